"""Block-alternating dictionary learners with monotone objective traces.

Each solver alternates a code update (a proximal gradient step, which in the
nonnegative regimes collapses to a shifted clamp) with a dictionary update:
an exact multiplier-bisection least-squares solve under the total-norm bound,
and a projected gradient step in the other regimes. Step constants are
squared spectral norms of the fixed block, inflated by a tiny safety factor
so every step minimizes a genuine upper bound of the objective; that is what
makes the recorded objective history nonincreasing.

Dictionaries start as seeded standard-normal draws projected onto the
regime's set; codes start at zero, which is feasible in every regime.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    CodeMatrix,
    ConstraintRegime,
    Dictionary,
    NonnegL1Atom,
    NonnegTotalNorm,
    PerAtomNorm,
    SolverConfig,
    SolverTrace,
    StopReason,
    TotalNorm,
    TrainingMatrix,
    as_array,
    check_feasible,
    objective,
)
from .proxops import (
    BisectionConfig,
    project_frobenius_ball,
    project_nonneg_frobenius,
    project_nonneg_l1_columns,
    project_per_atom_ball,
    ridge_dictionary_update,
    sigma_max_sq,
    soft_shrink,
)

MAX_ATOMS = 4096
TAU_SAFETY = 1.0 + 1e-6


@dataclass(frozen=True)
class BsumProblem:
    """Problem data for the block-alternating learners."""

    Y: TrainingMatrix
    k: int
    lam: float
    regime: ConstraintRegime
    config: SolverConfig

    def __post_init__(self):
        if not isinstance(self.Y, TrainingMatrix):
            object.__setattr__(self, "Y", TrainingMatrix(self.Y))
        if not 1 <= self.k <= MAX_ATOMS:
            raise ValueError(f"k must be in [1, {MAX_ATOMS}], got {self.k}")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if isinstance(self.regime, PerAtomNorm) and len(self.regime.betas) != self.k:
            raise ValueError(
                f"per-atom bounds want {len(self.regime.betas)} atoms, problem has k={self.k}"
            )


@dataclass(frozen=True, eq=False)
class BsumResult:
    A: Dictionary
    X: CodeMatrix
    trace: SolverTrace
    stationarity_residual: float


@dataclass(frozen=True, eq=False)
class IterationSnapshot:
    """One iteration of a solver run, as seen by the optional callback.

    The code step maps (A_prev, X_prev) to X_next using step constant tau_x;
    the dictionary step maps (A_prev, X_next) to A_next. For the total-norm
    learner tau_a records the multiplier of the exact dictionary solve.
    """

    iteration: int
    A_prev: np.ndarray
    X_prev: np.ndarray
    A_next: np.ndarray
    X_next: np.ndarray
    tau_x: float
    tau_a: float
    objective: float


class SolverDivergenceError(RuntimeError):
    """The objective became non-finite; carries the trace up to the failure."""

    def __init__(self, message: str, trace: SolverTrace):
        super().__init__(message)
        self.trace = trace


def project_to_regime(A, regime: ConstraintRegime, cfg: BisectionConfig | None = None) -> np.ndarray:
    """Project a dictionary onto the feasible set of ``regime``."""
    arr = as_array(A)
    if isinstance(regime, TotalNorm):
        return project_frobenius_ball(arr, regime.beta)
    if isinstance(regime, PerAtomNorm):
        return project_per_atom_ball(arr, regime.betas)
    if isinstance(regime, NonnegTotalNorm):
        return project_nonneg_frobenius(arr, regime.beta)
    if isinstance(regime, NonnegL1Atom):
        return project_nonneg_l1_columns(arr, regime.theta, cfg)
    raise TypeError(f"unknown constraint regime: {regime!r}")


def _effective_tau(raw: float, floor: float) -> float:
    return max(raw * TAU_SAFETY, floor)


def _shrink_code_step(Y, lam):
    def step(A, X, tau_x):
        return soft_shrink(X - A.T @ (A @ X - Y) / tau_x, lam / tau_x)

    return step


def _nonneg_code_step(Y, lam):
    def step(A, X, tau_x):
        return np.maximum(X - A.T @ (A @ X - Y) / tau_x - lam / tau_x, 0.0)

    return step


def _alternate(
    Y: np.ndarray,
    lam: float,
    cfg: SolverConfig,
    A0: np.ndarray,
    code_step: Callable,
    dict_step: Callable,
    callback,
):
    A = A0
    X = np.zeros((A.shape[1], Y.shape[1]))
    f = 0.5 * float(np.vdot(Y, Y))  # objective at X = 0
    obj_hist = [f]
    tau_x_hist: list[float] = []
    tau_a_hist: list[float] = []
    stop = StopReason.MAX_ITERS
    iters = 0
    for r in range(1, cfg.max_iters + 1):
        A_prev, X_prev, f_prev = A, X, f
        tau_x = _effective_tau(sigma_max_sq(A), cfg.tau_floor)
        X = code_step(A, X, tau_x)
        A, tau_a = dict_step(A, X)
        f = objective(Y, A, X, lam)
        obj_hist.append(f)
        tau_x_hist.append(tau_x)
        tau_a_hist.append(tau_a)
        iters = r
        if not np.isfinite(f):
            trace = SolverTrace(tuple(obj_hist), tuple(tau_x_hist), tuple(tau_a_hist), iters, stop)
            raise SolverDivergenceError("objective became non-finite", trace)
        if callback is not None:
            callback(IterationSnapshot(r, A_prev, X_prev, A, X, tau_x, tau_a, f))
        if abs(f_prev - f) <= cfg.rel_obj_tol * max(1.0, abs(f_prev)):
            stop = StopReason.CONVERGED
            break
    trace = SolverTrace(tuple(obj_hist), tuple(tau_x_hist), tuple(tau_a_hist), iters, stop)
    return A, X, trace


def _finalize(problem: BsumProblem, A: np.ndarray, X: np.ndarray, trace: SolverTrace, bis: BisectionConfig) -> BsumResult:
    cfg = problem.config
    tau_x = _effective_tau(sigma_max_sq(A), cfg.tau_floor)
    tau_a = _effective_tau(sigma_max_sq(X), cfg.tau_floor)
    residual = stationarity_residual(
        problem.Y, A, X, problem.lam, problem.regime, tau_x, tau_a, bis, cfg.tau_floor
    )
    if not check_feasible(A, X, problem.regime, 1e-8):
        raise RuntimeError("solver produced an infeasible iterate; this is a bug")
    return BsumResult(
        A=Dictionary(A, problem.regime),
        X=CodeMatrix(X),
        trace=trace,
        stationarity_residual=residual,
    )


def _initial_atoms(problem: BsumProblem, initial_atoms, bis: BisectionConfig) -> np.ndarray:
    n = problem.Y.signal_dim
    if initial_atoms is None:
        rng = np.random.default_rng(problem.config.seed)
        raw = rng.standard_normal((n, problem.k))
    else:
        raw = as_array(initial_atoms)
        if raw.shape != (n, problem.k):
            raise ValueError(f"initial atoms must be {(n, problem.k)}, got {raw.shape}")
    return project_to_regime(raw, problem.regime, bis)


def _require_regime(problem: BsumProblem, kind, name: str):
    if not isinstance(problem.regime, kind):
        raise ValueError(f"{name} requires a {kind.__name__} regime, got {type(problem.regime).__name__}")


def solve_case1(problem: BsumProblem, initial_atoms=None, callback=None) -> BsumResult:
    """Learn under a total squared-Frobenius-norm budget on the dictionary.

    Alternates the soft-shrinkage code step with the exact norm-bounded
    least-squares dictionary solve. The recorded tau_a values are the
    multipliers of that solve.
    """
    _require_regime(problem, TotalNorm, "solve_case1")
    Y = problem.Y.data
    bis = BisectionConfig()
    beta = problem.regime.beta
    tau_floor = problem.config.tau_floor

    def dict_step(A, X):
        return ridge_dictionary_update(Y, X, beta, bis, tau_floor)

    A0 = _initial_atoms(problem, initial_atoms, bis)
    A, X, trace = _alternate(Y, problem.lam, problem.config, A0, _shrink_code_step(Y, problem.lam), dict_step, callback)
    return _finalize(problem, A, X, trace, bis)


def _projected_dict_step(Y, cfg: SolverConfig, project):
    def step(A, X):
        tau_a = _effective_tau(sigma_max_sq(X), cfg.tau_floor)
        grad = (A @ X - Y) @ X.T
        return project(A - grad / tau_a), tau_a

    return step


def solve_case2(problem: BsumProblem, initial_atoms=None, callback=None) -> BsumResult:
    """Learn under per-atom squared-norm bounds (projected gradient dictionary step)."""
    _require_regime(problem, PerAtomNorm, "solve_case2")
    Y = problem.Y.data
    bis = BisectionConfig()
    betas = problem.regime.betas
    dict_step = _projected_dict_step(Y, problem.config, lambda A: project_per_atom_ball(A, betas))
    A0 = _initial_atoms(problem, initial_atoms, bis)
    A, X, trace = _alternate(Y, problem.lam, problem.config, A0, _shrink_code_step(Y, problem.lam), dict_step, callback)
    return _finalize(problem, A, X, trace, bis)


def solve_case3(problem: BsumProblem, initial_atoms=None, callback=None) -> BsumResult:
    """Nonnegative learning under a total squared-norm budget.

    The code step is the one-sided shrink-and-clamp map; the dictionary step
    projects a gradient step onto {A >= 0, ‖A‖_F^2 <= beta}.
    """
    _require_regime(problem, NonnegTotalNorm, "solve_case3")
    Y = problem.Y.data
    bis = BisectionConfig()
    beta = problem.regime.beta
    dict_step = _projected_dict_step(Y, problem.config, lambda A: project_nonneg_frobenius(A, beta))
    A0 = _initial_atoms(problem, initial_atoms, bis)
    A, X, trace = _alternate(Y, problem.lam, problem.config, A0, _nonneg_code_step(Y, problem.lam), dict_step, callback)
    return _finalize(problem, A, X, trace, bis)


def solve_case4(problem: BsumProblem, initial_atoms=None, callback=None) -> BsumResult:
    """Sparse nonnegative learning: per-atom L1 bounds, nonnegative factors."""
    _require_regime(problem, NonnegL1Atom, "solve_case4")
    Y = problem.Y.data
    bis = BisectionConfig()
    theta = problem.regime.theta
    dict_step = _projected_dict_step(
        Y, problem.config, lambda A: project_nonneg_l1_columns(A, theta, bis)
    )
    A0 = _initial_atoms(problem, initial_atoms, bis)
    A, X, trace = _alternate(Y, problem.lam, problem.config, A0, _nonneg_code_step(Y, problem.lam), dict_step, callback)
    return _finalize(problem, A, X, trace, bis)


def stationarity_residual(
    Y,
    A,
    X,
    lam: float,
    regime: ConstraintRegime,
    tau_x: float,
    tau_a: float,
    bis_cfg: BisectionConfig | None = None,
    tau_floor: float = 1e-8,
) -> float:
    """Normalized fixed-point defect of the two block-update maps at (A, X).

    Zero exactly when X is a fixed point of the code update and A a fixed
    point of the dictionary update; small values certify approximate
    stationarity of a converged run.
    """
    Ya = as_array(Y)
    Aa = as_array(A)
    Xa = as_array(X)
    bis = bis_cfg or BisectionConfig()

    grad_x = Aa.T @ (Aa @ Xa - Ya)
    if isinstance(regime, (TotalNorm, PerAtomNorm)):
        X_map = soft_shrink(Xa - grad_x / tau_x, lam / tau_x)
    else:
        X_map = np.maximum(Xa - grad_x / tau_x - lam / tau_x, 0.0)

    if isinstance(regime, TotalNorm):
        A_map, _ = ridge_dictionary_update(Ya, Xa, regime.beta, bis, tau_floor)
    else:
        grad_a = (Aa @ Xa - Ya) @ Xa.T
        stepped = Aa - grad_a / tau_a
        if isinstance(regime, PerAtomNorm):
            A_map = project_per_atom_ball(stepped, regime.betas)
        elif isinstance(regime, NonnegTotalNorm):
            A_map = project_nonneg_frobenius(stepped, regime.beta)
        else:
            A_map = project_nonneg_l1_columns(stepped, regime.theta, bis)

    x_defect = float(np.linalg.norm(Xa - X_map)) / (1.0 + float(np.linalg.norm(Xa)))
    a_defect = float(np.linalg.norm(Aa - A_map)) / (1.0 + float(np.linalg.norm(Aa)))
    return max(x_defect, a_defect)
