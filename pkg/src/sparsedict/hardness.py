"""Densest-cut reduction instances and brute-force verification oracles.

A two-atom, one-nonzero-per-column dictionary factorization of a graph's
signed edge-vertex incidence matrix is equivalent to the densest cut problem
on that graph. This module builds the augmented reduction instances (a large
constant row stacked on the incidence matrix) and verifies the equivalence,
the minimum spacing of the cut objectives, and the rounding chain that ties
the augmented optimum back to the cut optimum, all by exhaustive enumeration
on small graphs.

Enumeration caps are hard errors: every routine documents its largest
accepted vertex count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .core import TrainingMatrix, as_array


@dataclass(frozen=True)
class GraphInstance:
    """Simple undirected graph with 1-indexed vertices.

    Edges are normalized to (u, v) with u < v; that ordering doubles as the
    fixed edge orientation used by the incidence matrix (the objectives
    verified here are orientation-invariant).
    """

    vertex_count: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.vertex_count < 1:
            raise ValueError("vertex_count must be at least 1")
        seen = set()
        normalized = []
        for u, v in self.edges:
            if not (1 <= u <= self.vertex_count and 1 <= v <= self.vertex_count):
                raise ValueError(f"edge ({u}, {v}) has an endpoint outside [1, {self.vertex_count}]")
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            normalized.append(key)
        object.__setattr__(self, "edges", tuple(normalized))

    @property
    def edge_count(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class Bipartition:
    """Split of the vertices 1..N into two nonempty sides P and Q."""

    vertex_count: int
    p_vertices: frozenset[int]

    def __post_init__(self):
        p = frozenset(self.p_vertices)
        if not p or len(p) >= self.vertex_count:
            raise ValueError("both sides of a bipartition must be nonempty")
        if any(not 1 <= v <= self.vertex_count for v in p):
            raise ValueError("bipartition references a vertex outside [1, N]")
        object.__setattr__(self, "p_vertices", p)

    @property
    def q_vertices(self) -> frozenset[int]:
        return frozenset(range(1, self.vertex_count + 1)) - self.p_vertices

    def side_of(self, vertex: int) -> str:
        return "P" if vertex in self.p_vertices else "Q"


def parse_graph(text: str) -> GraphInstance:
    """Parse the edge-list format: first line N, then one 'u v' pair per line."""
    lines = [line.strip() for line in text.splitlines()]
    lines = [line for line in lines if line]
    if not lines:
        raise ValueError("empty graph description")
    try:
        n = int(lines[0])
    except ValueError as exc:
        raise ValueError(f"line 1: expected the vertex count, got {lines[0]!r}") from exc
    edges = []
    for idx, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {idx}: expected 'u v', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ValueError(f"line {idx}: expected integers, got {line!r}") from exc
        edges.append((u, v))
    return GraphInstance(n, tuple(edges))


def load_graph(path) -> GraphInstance:
    with open(path, "r", encoding="ascii") as fh:
        return parse_graph(fh.read())


def incidence_transpose(g: GraphInstance) -> np.ndarray:
    """Edge-by-vertex signed incidence matrix: +1 where an edge leaves, -1 where it enters."""
    out = np.zeros((g.edge_count, g.vertex_count))
    for row, (u, v) in enumerate(g.edges):
        out[row, u - 1] = 1.0
        out[row, v - 1] = -1.0
    return out


def _bipartitions(n: int):
    """All bipartitions with vertex 1 on side P, as (P-tuple, Q-tuple)."""
    rest = list(range(2, n + 1))
    for mask in range(2 ** (n - 1) - 1):  # full mask would leave Q empty
        p = [1] + [v for i, v in enumerate(rest) if mask >> i & 1]
        q = [v for i, v in enumerate(rest) if not mask >> i & 1]
        yield tuple(p), tuple(q)


def _crossing_count(g: GraphInstance, p_set: frozenset[int]) -> int:
    return sum(1 for u, v in g.edges if (u in p_set) != (v in p_set))


def densest_cut_bruteforce(g: GraphInstance) -> tuple[Bipartition, float]:
    """Exhaustively maximize |E(P,Q)| / (|P| |Q|) over all bipartitions.

    Ratios are compared exactly as rationals. Ties resolve to the
    lexicographically smallest P containing vertex 1.
    """
    n = g.vertex_count
    if not 2 <= n <= 20:
        raise ValueError(f"brute force supports 2 <= N <= 20, got N={n}")
    best_ratio: Fraction | None = None
    best_p: tuple[int, ...] | None = None
    for p, q in _bipartitions(n):
        p_set = frozenset(p)
        ratio = Fraction(_crossing_count(g, p_set), len(p) * len(q))
        if best_ratio is None or ratio > best_ratio or (ratio == best_ratio and p < best_p):
            best_ratio = ratio
            best_p = p
    return Bipartition(n, frozenset(best_p)), float(best_ratio)


def _dcp_objective_exact(g: GraphInstance, p_set: frozenset[int], q_size: int) -> Fraction:
    cross = _crossing_count(g, p_set)
    return 2 * g.edge_count - Fraction(g.vertex_count * cross, len(p_set) * q_size)


def dcp_objective(g: GraphInstance, b: Bipartition) -> float:
    """Optimal two-atom fit value restricted to the support pattern of ``b``:
    2|E| - N |E(P,Q)| / (|P| |Q|)."""
    if b.vertex_count != g.vertex_count:
        raise ValueError("bipartition and graph have different vertex counts")
    return float(_dcp_objective_exact(g, b.p_vertices, len(b.q_vertices)))


def dcp_bruteforce_via_ls(g: GraphInstance) -> float:
    """Minimum two-atom fit of the incidence matrix over all column splits.

    Enumerates the 2^N - 2 assignments of vertices to the two atoms (both
    sides nonempty, as forced by one unit-sum nonzero per column) and solves
    each fixed-support least-squares exactly: every atom is the mean of its
    side's incidence columns. Independent of the cut-ratio formula, so
    agreement with it is the equivalence check.
    """
    n = g.vertex_count
    if not 2 <= n <= 12:
        raise ValueError(f"brute force supports 2 <= N <= 12, got N={n}")
    inc = incidence_transpose(g)
    best = math.inf
    for mask in range(1, 2**n - 1):
        total = 0.0
        for side in (True, False):
            idx = [j for j in range(n) if (mask >> j & 1) == side]
            cols = inc[:, idx]
            mean = cols.mean(axis=1)
            total += float(((cols - mean[:, None]) ** 2).sum())
        if total < best:
            best = total
    return best


def build_reduction(g: GraphInstance) -> TrainingMatrix:
    """Stack the constant row M = 6 N^7 on top of the incidence matrix.

    Each training signal (column) is that constant over the corresponding
    incidence column, giving an (|E| + 1) x N instance whose two-atom optimum
    tracks the densest cut.
    """
    n = g.vertex_count
    if n < 2:
        raise ValueError("reduction needs at least two vertices")
    m_value = 6.0 * float(n) ** 7
    top = np.full((1, n), m_value)
    return TrainingMatrix(np.vstack([top, incidence_transpose(g)]))


def _top_singular_pair(mat: np.ndarray, tol: float = 1e-12, max_iters: int = 1000):
    """Leading singular triple of a small dense matrix by power iteration.

    Falls back to canonical basis start vectors if the all-ones start makes
    no progress (it can be orthogonal to the leading space).
    """
    rows, cols = mat.shape
    use_col_gram = cols <= rows
    gram = mat.T @ mat if use_col_gram else mat @ mat.T
    dim = gram.shape[0]
    scale = float(np.abs(gram).max())
    starts = [np.full(dim, 1.0 / math.sqrt(dim))]
    starts.extend(np.eye(dim)[i] for i in range(dim))
    for start in starts:
        v = start
        estimate = 0.0
        converged = False
        for _ in range(max_iters):
            w = gram @ v
            rayleigh = float(v @ w)
            norm_w = float(np.linalg.norm(w))
            if norm_w <= scale * 1e-300:
                break
            v = w / norm_w
            if abs(rayleigh - estimate) <= tol * max(abs(rayleigh), 1e-300):
                converged = True
                break
            estimate = rayleigh
        else:
            converged = True  # hit the cap; keep the best estimate
        if not converged:
            continue
        if use_col_gram:
            image = mat @ v
            sigma = float(np.linalg.norm(image))
            if sigma == 0.0:
                continue
            u = image / sigma
        else:
            u = v
        coeffs = u @ mat
        return u, coeffs
    return np.zeros(rows), np.zeros(cols)


def _best_rank1(sub: np.ndarray):
    """Best rank-one fit of a column group: unit atom, coefficients, residual.

    The residual is accumulated entrywise from the explicit rank-one
    remainder, which stays accurate even when a huge constant row dominates
    the Gram matrix.
    """
    rows, cols = sub.shape
    if not sub.any():
        return np.zeros(rows), np.zeros(cols), 0.0
    if cols == 1:
        norm = float(np.linalg.norm(sub[:, 0]))
        return sub[:, 0] / norm, np.array([norm]), 0.0
    u, coeffs = _top_singular_pair(sub)
    resid = float(((sub - np.outer(u, coeffs)) ** 2).sum())
    return u, coeffs, resid


def dict_l0_bruteforce(Y, s: int = 1, k: int = 2) -> tuple[float, np.ndarray, np.ndarray]:
    """Globally minimize ||Y - A X||_F^2 with two atoms and one nonzero per column.

    Enumerates all 2^N assignments of columns to the two atoms (empty groups
    allowed); the optimum for a fixed assignment is the best rank-one fit of
    each group. Ties keep the first (lowest) assignment mask encountered.
    Returns the minimal objective and a minimizing (A, X).
    """
    if s != 1 or k != 2:
        raise ValueError("only the two-atom, single-support regime is enumerated")
    mat = as_array(Y)
    n_cols = mat.shape[1]
    if n_cols > 12:
        raise ValueError(f"brute force supports N <= 12, got N={n_cols}")
    best_obj = math.inf
    best_A = None
    best_X = None
    for mask in range(2**n_cols):
        groups = (
            [j for j in range(n_cols) if not mask >> j & 1],
            [j for j in range(n_cols) if mask >> j & 1],
        )
        atoms = np.zeros((mat.shape[0], 2))
        codes = np.zeros((2, n_cols))
        total = 0.0
        for atom_idx, group in enumerate(groups):
            if not group:
                continue
            u, coeffs, resid = _best_rank1(mat[:, group])
            atoms[:, atom_idx] = u
            codes[atom_idx, group] = coeffs
            total += resid
        if total < best_obj:
            best_obj = total
            best_A = atoms
            best_X = codes
    return best_obj, best_A, best_X


@dataclass(frozen=True)
class ClaimOutcome:
    passed: bool
    witness: dict = field(default_factory=dict)


@dataclass(frozen=True)
class HardnessReport:
    vertex_count: int
    edge_count: int
    densest_cut_ratio: float
    claim1: ClaimOutcome
    claim2: ClaimOutcome
    claim3: ClaimOutcome
    delta: ClaimOutcome

    @property
    def all_claims_passed(self) -> bool:
        return self.claim1.passed and self.claim2.passed and self.claim3.passed

    def to_dict(self) -> dict:
        return {
            "vertex_count": self.vertex_count,
            "edge_count": self.edge_count,
            "densest_cut_ratio": self.densest_cut_ratio,
            "claims": {
                "claim1": {"passed": self.claim1.passed, **self.claim1.witness},
                "claim2": {"passed": self.claim2.passed, **self.claim2.witness},
                "claim3": {"passed": self.claim3.passed, **self.claim3.witness},
            },
            "delta": {"passed": self.delta.passed, **self.delta.witness},
            "all_claims_passed": self.all_claims_passed,
        }


def _normalized_optimum(g: GraphInstance):
    """Brute-force optimum of the reduction instance, rescaled so every used
    atom's first entry equals the augmentation constant M."""
    reduction = build_reduction(g)
    m_value = 6.0 * float(g.vertex_count) ** 7
    obj, atoms, codes = dict_l0_bruteforce(reduction)
    atoms = atoms.copy()
    codes = codes.copy()
    for j in range(2):
        used = codes[j].any()
        pivot = atoms[0, j]
        if not used:
            atoms[:, j] = 0.0
            atoms[0, j] = m_value
            continue
        if abs(pivot) < 1e-6 * m_value:
            raise ArithmeticError(f"used atom {j} has a vanishing first entry: {pivot!r}")
        atoms[:, j] *= m_value / pivot
        codes[j, :] *= pivot / m_value
    return obj, atoms, codes


def verify_claims(g: GraphInstance) -> HardnessReport:
    """Numerically verify the reduction's three supporting claims on one graph.

    Claim 1: the enumerated two-atom fit of the incidence matrix equals
    2|E| - N * (densest cut ratio). Claim 2: distinct support-pattern
    objectives are separated by at least 16/N^3. Claim 3: dropping the
    constant row from the augmented optimum, rounding its codes to one, and
    the constrained optimum form the chain
    h(w) <= h(w') <= h(w+) <= h(w) + 28/(3 N^3), and the augmented optimum's
    code sums stay within 1/(3 N^6) of one (reported separately as delta).
    """
    n = g.vertex_count
    if not 2 <= n <= 10:
        raise ValueError(f"claim verification supports 2 <= N <= 10, got N={n}")

    _, ratio = densest_cut_bruteforce(g)
    via_ls = dcp_bruteforce_via_ls(g)

    identity_rhs = 2.0 * g.edge_count - n * ratio
    claim1 = ClaimOutcome(
        passed=abs(via_ls - identity_rhs) <= 1e-9,
        witness={"via_least_squares": via_ls, "via_cut_ratio": identity_rhs},
    )

    values = sorted(
        {_dcp_objective_exact(g, frozenset(p), len(q)) for p, q in _bipartitions(n)}
    )
    bound = Fraction(16, n**3)
    if len(values) < 2:
        claim2 = ClaimOutcome(passed=True, witness={"distinct_values": len(values), "bound": float(bound)})
    else:
        min_gap = min(b - a for a, b in zip(values, values[1:]))
        claim2 = ClaimOutcome(
            passed=float(min_gap) >= float(bound) - 1e-9,
            witness={"min_gap": float(min_gap), "bound": float(bound), "distinct_values": len(values)},
        )

    incidence = incidence_transpose(g)
    try:
        _, atoms, codes = _normalized_optimum(g)
    except ArithmeticError as exc:
        claim3 = ClaimOutcome(passed=False, witness={"error": str(exc)})
        delta = ClaimOutcome(passed=False, witness={"error": str(exc)})
    else:
        trimmed = atoms[1:, :]
        h_w = float(((incidence - trimmed @ codes) ** 2).sum())
        rounded = (codes != 0.0).astype(np.float64)
        h_w_plus = float(((incidence - trimmed @ rounded) ** 2).sum())
        h_w_prime = via_ls
        slack = 1e-6
        chain_bound = h_w + 28.0 / (3.0 * n**3)
        claim3 = ClaimOutcome(
            passed=(
                h_w <= h_w_prime + slack
                and h_w_prime <= h_w_plus + slack
                and h_w_plus <= chain_bound + slack
            ),
            witness={"h_w": h_w, "h_w_prime": h_w_prime, "h_w_plus": h_w_plus, "upper_bound": chain_bound},
        )
        defect = float(np.abs(1.0 - codes.sum(axis=0)).max())
        delta_bound = 1.0 / (3.0 * float(n) ** 6)
        delta = ClaimOutcome(
            passed=defect <= delta_bound,
            witness={"max_defect": defect, "bound": delta_bound},
        )

    return HardnessReport(
        vertex_count=n,
        edge_count=g.edge_count,
        densest_cut_ratio=ratio,
        claim1=claim1,
        claim2=claim2,
        claim3=claim3,
        delta=delta,
    )
