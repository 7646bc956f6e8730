"""Independent oracles used by the test suite.

Everything here deliberately avoids the library's own code paths: finite
differences for gradients, the sort-based algorithm for simplex-style
projections, dense SVD for spectral norms, grid searches for scalar proximal
maps, and a general-purpose convex solver for the L1-over-ball subproblem.
"""

from __future__ import annotations

import numpy as np


def central_diff_grad(f, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Entrywise central finite differences of a scalar function of a matrix."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    for idx in np.ndindex(x.shape):
        bump = np.zeros_like(x)
        bump[idx] = step
        out[idx] = (f(x + bump) - f(x - bump)) / (2 * step)
    return out


def sort_based_nonneg_l1_projection(a: np.ndarray, theta: float) -> np.ndarray:
    """Exact projection onto {z >= 0, ||z||_1 <= theta} via the sorting algorithm."""
    a = np.asarray(a, dtype=np.float64).ravel()
    clipped = np.maximum(a, 0.0)
    if clipped.sum() <= theta:
        return clipped
    # Active L1 constraint: project onto the simplex {z >= 0, sum z = theta}.
    srt = np.sort(a)[::-1]
    csum = np.cumsum(srt)
    ranks = np.arange(1, a.size + 1)
    cond = srt - (csum - theta) / ranks > 0
    rho = int(np.nonzero(cond)[0].max()) + 1
    tau = (csum[rho - 1] - theta) / rho
    return np.maximum(a - tau, 0.0)


def scalar_prox_l1_grid(c: float, gamma: float, width: float = 3.0, points: int = 200001) -> float:
    """Grid-search minimizer of 0.5*(z - c)^2 + gamma*|z| on a dense grid."""
    grid = np.linspace(c - width, c + width, points)
    if abs(c) <= width:  # make sure 0 is exactly on the grid
        grid = np.concatenate([grid, [0.0]])
    vals = 0.5 * (grid - c) ** 2 + gamma * np.abs(grid)
    return float(grid[np.argmin(vals)])


def svd_sigma_max_sq(M: np.ndarray) -> float:
    """Dense-SVD oracle for the squared top singular value."""
    M = np.asarray(M, dtype=np.float64)
    if M.size == 0 or not M.any():
        return 0.0
    return float(np.linalg.svd(M, compute_uv=False)[0] ** 2)


def cvxpy_l1_over_ball(B: np.ndarray, radius_sq: float) -> np.ndarray:
    """Convex-solver oracle for min ||X||_1 s.t. ||X - B||_F^2 <= radius_sq."""
    import cvxpy as cp

    B = np.asarray(B, dtype=np.float64)
    X = cp.Variable(B.shape)
    problem = cp.Problem(
        cp.Minimize(cp.sum(cp.abs(X))), [cp.sum_squares(X - B) <= radius_sq]
    )
    problem.solve(solver=cp.CLARABEL)
    if X.value is None:
        raise RuntimeError(f"convex oracle failed: {problem.status}")
    return np.asarray(X.value, dtype=np.float64)


def cvxpy_fixed_dict_min_l1(Y: np.ndarray, A: np.ndarray, alpha: float) -> float:
    """Convex-solver oracle for min ||X||_1 s.t. 0.5*||Y - A X||_F^2 <= alpha."""
    import cvxpy as cp

    X = cp.Variable((A.shape[1], Y.shape[1]))
    problem = cp.Problem(
        cp.Minimize(cp.sum(cp.abs(X))), [0.5 * cp.sum_squares(Y - A @ X) <= alpha]
    )
    problem.solve(solver=cp.CLARABEL)
    if X.value is None:
        raise RuntimeError(f"convex oracle failed: {problem.status}")
    return float(np.abs(X.value).sum())


def cvxpy_ball_projection(A: np.ndarray, beta: float, nonneg: bool = False) -> np.ndarray:
    """Convex-solver oracle for projection onto {‖Z‖_F^2 <= beta} (optionally Z >= 0)."""
    import cvxpy as cp

    A = np.asarray(A, dtype=np.float64)
    Z = cp.Variable(A.shape)
    constraints = [cp.sum_squares(Z) <= beta]
    if nonneg:
        constraints.append(Z >= 0)
    problem = cp.Problem(cp.Minimize(cp.sum_squares(Z - A)), constraints)
    problem.solve(solver=cp.CLARABEL)
    if Z.value is None:
        raise RuntimeError(f"convex oracle failed: {problem.status}")
    return np.asarray(Z.value, dtype=np.float64)


def random_simple_graph(rng: np.random.Generator, n: int, edge_prob: float = 0.5):
    """Edge tuple of a seeded Erdos-Renyi simple graph on vertices 1..n."""
    edges = []
    for u in range(1, n + 1):
        for v in range(u + 1, n + 1):
            if rng.random() < edge_prob:
                edges.append((u, v))
    return tuple(edges)


def all_graphs(n: int):
    """Every simple graph on n labeled vertices (including the empty one)."""
    pairs = [(u, v) for u in range(1, n + 1) for v in range(u + 1, n + 1)]
    for mask in range(2 ** len(pairs)):
        yield tuple(p for i, p in enumerate(pairs) if mask >> i & 1)


def piecewise_constant_image(rng: np.random.Generator, size: int = 64) -> np.ndarray:
    """Random axis-aligned constant rectangles on a dark background."""
    img = np.zeros((size, size))
    for _ in range(6):
        r0, c0 = rng.integers(0, 3 * size // 4, 2)
        h, w = rng.integers(size // 8, size // 2, 2)
        img[r0 : r0 + h, c0 : c0 + w] = rng.integers(30, 226)
    return img
