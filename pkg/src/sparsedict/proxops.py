"""Closed-form proximal maps, projections, and one-dimensional multiplier searches.

These are the building blocks the solvers alternate between: soft shrinkage
for the L1 penalty, projections for each constraint regime, a power-iteration
estimate of the squared spectral norm used as the prox step constant, and the
multiplier bisection behind the exact norm-bounded dictionary update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import as_array


@dataclass(frozen=True)
class BisectionConfig:
    """Tolerances for the one-dimensional multiplier searches."""

    tol: float = 1e-10          # absolute tolerance on the constraint residual
    max_iters: int = 200
    bracket_growth: float = 2.0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be strictly positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.bracket_growth > 1:
            raise ValueError("bracket_growth must exceed 1")


class BisectionError(RuntimeError):
    """A one-dimensional search failed to bracket or converge."""

    def __init__(self, message: str, lo: float, hi: float):
        super().__init__(f"{message} (last bracket [{lo:.6g}, {hi:.6g}])")
        self.lo = lo
        self.hi = hi


def soft_shrink(C, gamma: float) -> np.ndarray:
    """Component-wise soft shrinkage: shrink magnitudes by gamma, zero the dead zone.

    Entries with |C_ij| <= gamma map to exactly 0. gamma = 0 returns the
    input unchanged.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    arr = as_array(C)
    if gamma == 0:
        return arr
    return np.sign(arr) * np.maximum(np.abs(arr) - gamma, 0.0)


def _power_estimate(gram: np.ndarray, v: np.ndarray, tol: float, max_iters: int) -> float:
    estimate = 0.0
    for _ in range(max_iters):
        w = gram @ v
        rayleigh = float(v @ w)
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            return max(rayleigh, 0.0)
        v = w / norm_w
        if abs(rayleigh - estimate) <= tol * max(abs(rayleigh), 1e-300):
            return rayleigh
        estimate = rayleigh
    return estimate


def sigma_max_sq(M, tol: float = 1e-9, max_iters: int = 100) -> float:
    """Squared largest singular value of M, estimated by power iteration.

    Iterates on the smaller of M^T M and M M^T from two deterministic start
    vectors (normalized all-ones, and a fixed seeded pseudorandom draw) and
    keeps the larger estimate. The second start guards against structured
    matrices whose leading space is orthogonal to the all-ones vector, such
    as mean-removed dictionaries where ones is exactly a low eigenvector.
    Returns 0 for an all-zero matrix. Each estimate is a valid lower bound.
    """
    arr = as_array(M)
    if arr.size == 0 or not arr.any():
        return 0.0
    gram = arr.T @ arr if arr.shape[1] <= arr.shape[0] else arr @ arr.T
    dim = gram.shape[0]
    ones_start = np.full(dim, 1.0 / math.sqrt(dim))
    seeded = np.random.default_rng(0x5D1C7).standard_normal(dim)
    seeded /= np.linalg.norm(seeded)
    return max(
        _power_estimate(gram, ones_start, tol, max_iters),
        _power_estimate(gram, seeded, tol, max_iters),
    )


def project_frobenius_ball(A, beta: float) -> np.ndarray:
    """Scale A into {‖A‖_F^2 <= beta}; feasible inputs are returned unchanged."""
    if not beta > 0:
        raise ValueError("beta must be strictly positive")
    arr = as_array(A)
    norm_sq = float(np.vdot(arr, arr))
    if norm_sq <= beta:
        return arr
    return arr * math.sqrt(beta / norm_sq)


def project_per_atom_ball(A, betas) -> np.ndarray:
    """Scale each column of A independently into its squared-norm ball."""
    arr = as_array(A)
    bounds = np.asarray(betas, dtype=np.float64)
    if bounds.ndim != 1 or bounds.shape[0] != arr.shape[1]:
        raise ValueError(f"need one bound per column, got {bounds.shape} for {arr.shape[1]} columns")
    col_sq = (arr * arr).sum(axis=0)
    scale = np.where(col_sq > bounds, np.sqrt(bounds / np.maximum(col_sq, 1e-300)), 1.0)
    return arr * scale


def project_nonneg(M) -> np.ndarray:
    """Entrywise clamp to the nonnegative orthant."""
    return np.maximum(as_array(M), 0.0)


def project_nonneg_frobenius(A, beta: float) -> np.ndarray:
    """Project onto {A >= 0, ‖A‖_F^2 <= beta}: clamp first, then scale."""
    return project_frobenius_ball(project_nonneg(A), beta)


def project_nonneg_l1_column(a, theta: float, cfg: BisectionConfig | None = None) -> np.ndarray:
    """Project a vector onto {z >= 0, ||z||_1 <= theta}.

    Returns [a - rho]_+ with rho = 0 when the clamped vector is already
    feasible, otherwise rho > 0 chosen by bisection so the L1 norm hits
    theta within cfg.tol.
    """
    if not theta > 0:
        raise ValueError("theta must be strictly positive")
    cfg = cfg or BisectionConfig()
    vec = np.asarray(a, dtype=np.float64).ravel()
    clamped = np.maximum(vec, 0.0)
    if float(clamped.sum()) <= theta:
        return clamped
    lo, hi = 0.0, float(vec.max())
    for _ in range(cfg.max_iters):
        mid = 0.5 * (lo + hi)
        shifted = np.maximum(vec - mid, 0.0)
        total = float(shifted.sum())
        # accept only from the feasible side so reprojection is an exact no-op
        if 0.0 <= theta - total <= cfg.tol:
            return shifted
        if total > theta:
            lo = mid
        else:
            hi = mid
    raise BisectionError("L1-ball shift did not converge", lo, hi)


def project_nonneg_l1_columns(A, theta: float, cfg: BisectionConfig | None = None) -> np.ndarray:
    """Column-wise projection onto {z >= 0, ||z||_1 <= theta}, bisected in batch.

    Equivalent to applying project_nonneg_l1_column per column (identical
    per-column bisection midpoints), but runs the shift search on all
    infeasible columns at once.
    """
    if not theta > 0:
        raise ValueError("theta must be strictly positive")
    cfg = cfg or BisectionConfig()
    arr = as_array(A)
    clamped = np.maximum(arr, 0.0)
    need = clamped.sum(axis=0) > theta
    if not need.any():
        return clamped
    sub = arr[:, need]
    lo = np.zeros(sub.shape[1])
    hi = sub.max(axis=0)
    shift = np.zeros(sub.shape[1])
    active = np.ones(sub.shape[1], dtype=bool)
    for _ in range(cfg.max_iters):
        mid = 0.5 * (lo + hi)
        shift = np.where(active, mid, shift)
        totals = np.maximum(sub - shift, 0.0).sum(axis=0)
        active &= np.abs(totals - theta) > cfg.tol
        if not active.any():
            break
        grow = totals > theta
        lo = np.where(active & grow, mid, lo)
        hi = np.where(active & ~grow, mid, hi)
    else:
        worst = int(np.argmax(np.abs(np.maximum(sub - shift, 0.0).sum(axis=0) - theta)))
        raise BisectionError("L1-ball shift did not converge", float(lo[worst]), float(hi[worst]))
    out = clamped
    out[:, need] = np.maximum(sub - shift, 0.0)
    return out


def ridge_dictionary_update(
    Y, X, beta: float, cfg: BisectionConfig | None = None, tau_floor: float = 1e-8
) -> tuple[np.ndarray, float]:
    """Exact norm-bounded dictionary update A = Y X^T (X X^T + theta I)^{-1}.

    theta >= 0 is the multiplier of ‖A‖_F^2 <= beta: zero when the
    unconstrained solution is feasible, otherwise the bisection root of
    ‖A(theta)‖_F^2 = beta within cfg.tol. The SPD system is solved through
    one eigendecomposition of X X^T, reused across bisection evaluations.
    A singular X X^T at theta = 0 is regularized with tau_floor (degenerate
    codes then yield A = 0 rather than an error).

    If bisection exhausts float resolution before meeting cfg.tol, the
    feasible end of the bracket is returned.
    """
    if not beta > 0:
        raise ValueError("beta must be strictly positive")
    cfg = cfg or BisectionConfig()
    Ya = as_array(Y)
    Xa = as_array(X)
    if Xa.shape[1] != Ya.shape[1]:
        raise ValueError(f"Y has {Ya.shape[1]} columns but X has {Xa.shape[1]}")

    gram = Xa @ Xa.T
    cross = Ya @ Xa.T
    evals, Q = np.linalg.eigh(gram)
    evals = np.maximum(evals, 0.0)
    W = cross @ Q
    w_sq = (W * W).sum(axis=0)

    def norm_sq(theta: float) -> float:
        return float((w_sq / (evals + theta) ** 2).sum())

    def solution(theta: float) -> np.ndarray:
        return (W / (evals + theta)) @ Q.T

    singular = evals[-1] == 0.0 or evals[0] <= evals[-1] * 1e-14
    base = tau_floor if singular else 0.0
    if norm_sq(base) <= beta:
        return solution(base), 0.0

    lo, hi = 0.0, 1.0
    for _ in range(cfg.max_iters):
        if norm_sq(hi) <= beta:
            break
        lo, hi = hi, hi * cfg.bracket_growth
    else:
        raise BisectionError("could not bracket the norm-bound multiplier", lo, hi)

    for _ in range(cfg.max_iters):
        mid = 0.5 * (lo + hi)
        value = norm_sq(mid)
        if abs(value - beta) <= cfg.tol:
            return solution(mid), mid
        if value > beta:
            lo = mid
        else:
            hi = mid
        if hi - lo <= np.finfo(np.float64).eps * max(1.0, hi):
            return solution(hi), hi
    raise BisectionError("multiplier bisection did not converge", lo, hi)
