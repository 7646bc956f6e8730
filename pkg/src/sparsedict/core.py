"""Shared domain types and evaluation of the penalized dictionary fit.

The fit function used throughout is

    0.5 * ||Y - A X||_F^2 + lambda * ||X||_1

with Y the column-stacked training signals, A the dictionary (one atom per
column) and X the representation codes. Constraint regimes tag which set the
dictionary (and possibly the codes) must live in.

All matrices are dense float64. The wrapper types are immutable values: the
backing arrays are marked read-only, so instances are safe to share across
threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


def _validated(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and column, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TrainingMatrix:
    """Column-stacked training signals, one signal per column."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _validated(self.data, "training matrix"))

    @property
    def signal_dim(self) -> int:
        return self.data.shape[0]

    @property
    def signal_count(self) -> int:
        return self.data.shape[1]


# --- constraint regimes -----------------------------------------------------


@dataclass(frozen=True)
class TotalNorm:
    """Squared Frobenius norm of the whole dictionary bounded by ``beta``."""

    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be strictly positive")


@dataclass(frozen=True)
class PerAtomNorm:
    """Squared norm of atom i bounded by ``betas[i]``."""

    betas: tuple[float, ...]

    def __post_init__(self):
        betas = tuple(float(b) for b in self.betas)
        if not betas or any(not b > 0 for b in betas):
            raise ValueError("betas must be a nonempty sequence of positive reals")
        object.__setattr__(self, "betas", betas)


@dataclass(frozen=True)
class NonnegTotalNorm:
    """Nonnegative dictionary and codes with a total squared-norm bound."""

    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be strictly positive")


@dataclass(frozen=True)
class NonnegL1Atom:
    """Nonnegative dictionary and codes, each atom's L1 norm bounded by ``theta``."""

    theta: float

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be strictly positive")


ConstraintRegime = TotalNorm | PerAtomNorm | NonnegTotalNorm | NonnegL1Atom


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Atom matrix (one atom per column) tagged with its constraint regime."""

    atoms: np.ndarray
    regime: ConstraintRegime

    def __post_init__(self):
        atoms = _validated(self.atoms, "dictionary")
        if isinstance(self.regime, PerAtomNorm) and len(self.regime.betas) != atoms.shape[1]:
            raise ValueError(
                f"per-atom bounds want {len(self.regime.betas)} atoms, dictionary has {atoms.shape[1]}"
            )
        object.__setattr__(self, "atoms", atoms)

    @property
    def atom_count(self) -> int:
        return self.atoms.shape[1]


@dataclass(frozen=True, eq=False)
class CodeMatrix:
    """Sparse-representation coefficients, one code column per signal."""

    codes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "codes", _validated(self.codes, "code matrix"))


def as_array(value) -> np.ndarray:
    """Unwrap a domain type (or coerce an array-like) to its float64 matrix."""
    if isinstance(value, TrainingMatrix):
        return value.data
    if isinstance(value, Dictionary):
        return value.atoms
    if isinstance(value, CodeMatrix):
        return value.codes
    return np.asarray(value, dtype=np.float64)


# --- solver plumbing ---------------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    """Iteration and stopping knobs shared by all solvers."""

    max_iters: int = 5000
    rel_obj_tol: float = 1e-8
    tau_floor: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if not self.rel_obj_tol > 0:
            raise ValueError("rel_obj_tol must be strictly positive")
        if not self.tau_floor > 0:
            raise ValueError("tau_floor must be strictly positive")


class StopReason(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"


@dataclass(frozen=True)
class SolverTrace:
    """Per-iteration record of a solver run."""

    objective_history: tuple[float, ...]
    tau_x_history: tuple[float, ...]
    tau_a_history: tuple[float, ...]
    iterations: int
    stop_reason: StopReason


# --- objective and gradients --------------------------------------------------


def _conforming(Y, A, X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    Ya, Aa, Xa = as_array(Y), as_array(A), as_array(X)
    if Aa.shape[0] != Ya.shape[0] or Aa.shape[1] != Xa.shape[0] or Xa.shape[1] != Ya.shape[1]:
        raise ValueError(f"incompatible shapes: Y {Ya.shape}, A {Aa.shape}, X {Xa.shape}")
    return Ya, Aa, Xa


def objective(Y, A, X, lam: float) -> float:
    """Penalized fit value 0.5*||Y - A X||_F^2 + lam*||X||_1."""
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    Ya, Aa, Xa = _conforming(Y, A, X)
    resid = Ya - Aa @ Xa
    return 0.5 * float(np.vdot(resid, resid)) + lam * float(np.abs(Xa).sum())


def grad_A(Y, A, X) -> np.ndarray:
    """Gradient of the smooth fit term with respect to the dictionary: (AX - Y) X^T."""
    Ya, Aa, Xa = _conforming(Y, A, X)
    return (Aa @ Xa - Ya) @ Xa.T


def grad_X(Y, A, X) -> np.ndarray:
    """Gradient of the smooth fit term with respect to the codes: A^T (AX - Y)."""
    Ya, Aa, Xa = _conforming(Y, A, X)
    return Aa.T @ (Aa @ Xa - Ya)


def check_feasible(A, X, regime: ConstraintRegime, tol: float = 1e-9) -> bool:
    """True iff (A, X) satisfies every constraint of ``regime`` within additive ``tol``."""
    atoms = as_array(A)
    codes = as_array(X)
    if isinstance(regime, TotalNorm):
        return float(np.vdot(atoms, atoms)) <= regime.beta + tol
    if isinstance(regime, PerAtomNorm):
        if len(regime.betas) != atoms.shape[1]:
            raise ValueError(
                f"per-atom bounds want {len(regime.betas)} atoms, dictionary has {atoms.shape[1]}"
            )
        col_sq = (atoms * atoms).sum(axis=0)
        return bool((col_sq <= np.asarray(regime.betas) + tol).all())
    if isinstance(regime, NonnegTotalNorm):
        return (
            float(atoms.min(initial=0.0)) >= -tol
            and float(codes.min(initial=0.0)) >= -tol
            and float(np.vdot(atoms, atoms)) <= regime.beta + tol
        )
    if isinstance(regime, NonnegL1Atom):
        col_l1 = np.abs(atoms).sum(axis=0)
        return (
            float(atoms.min(initial=0.0)) >= -tol
            and float(codes.min(initial=0.0)) >= -tol
            and bool((col_l1 <= regime.theta + tol).all())
        )
    raise TypeError(f"unknown constraint regime: {regime!r}")
