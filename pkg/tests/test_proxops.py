import numpy as np
import pytest

from sparsedict import (
    BisectionConfig,
    NonnegL1Atom,
    NonnegTotalNorm,
    PerAtomNorm,
    TotalNorm,
    check_feasible,
    project_frobenius_ball,
    project_nonneg,
    project_nonneg_frobenius,
    project_nonneg_l1_column,
    project_per_atom_ball,
    ridge_dictionary_update,
    sigma_max_sq,
    soft_shrink,
)
from sparsedict.proxops import project_nonneg_l1_columns

from oracles import scalar_prox_l1_grid, sort_based_nonneg_l1_projection, svd_sigma_max_sq


class TestSoftShrink:
    @pytest.mark.parametrize(
        "value,gamma,expected",
        [(1.2, 0.5, 0.7), (0.3, 0.5, 0.0), (-0.9, 0.5, -0.4), (0.5, 0.5, 0.0), (-0.5, 0.5, 0.0)],
    )
    def test_scalar_table(self, value, gamma, expected):
        assert soft_shrink(np.array([[value]]), gamma)[0, 0] == pytest.approx(expected, abs=1e-15)

    def test_zero_gamma_identity(self):
        arr = np.array([[1.0, -2.0]])
        assert np.array_equal(soft_shrink(arr, 0.0), arr)

    def test_negative_gamma_raises(self):
        with pytest.raises(ValueError):
            soft_shrink(np.eye(2), -0.1)

    def test_matches_prox_grid_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            c = float(rng.uniform(-2, 2))
            gamma = float(rng.uniform(0, 1.5))
            ours = soft_shrink(np.array([[c]]), gamma)[0, 0]
            grid = scalar_prox_l1_grid(c, gamma)
            assert ours == pytest.approx(grid, abs=1e-4)


class TestSigmaMaxSq:
    def test_identity(self):
        assert sigma_max_sq(np.eye(3)) == pytest.approx(1.0, rel=1e-12)

    def test_diagonal(self):
        assert sigma_max_sq(np.diag([3.0, 1.0])) == pytest.approx(9.0, rel=1e-9)

    def test_zero_matrix(self):
        assert sigma_max_sq(np.zeros((3, 4))) == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_svd_oracle(self, seed):
        rng = np.random.default_rng(seed)
        M = rng.standard_normal((5, 7))
        assert sigma_max_sq(M) == pytest.approx(svd_sigma_max_sq(M), rel=1e-6)

    def test_structured_matrix_with_ones_eigenvector(self):
        # mean-removed columns make the all-ones vector a low eigenvector
        rng = np.random.default_rng(3)
        M = rng.standard_normal((6, 12))
        M[:, 1:] -= M[:, 1:].mean(axis=0)
        M[:, 0] = 1.0 / np.sqrt(6)
        assert sigma_max_sq(M) == pytest.approx(svd_sigma_max_sq(M), rel=1e-6)


class TestProjections:
    def test_frobenius_feasible_unchanged(self):
        A = np.array([[0.5, 0.1]])
        assert project_frobenius_ball(A, 1.0) is A or np.array_equal(project_frobenius_ball(A, 1.0), A)

    def test_frobenius_scaling(self):
        out = project_frobenius_ball(np.array([[3.0], [4.0]]), 1.0)
        assert np.allclose(out, [[0.6], [0.8]], atol=1e-12)

    def test_frobenius_zero(self):
        assert np.array_equal(project_frobenius_ball(np.zeros((2, 2)), 1.0), np.zeros((2, 2)))

    def test_per_atom_column_scaling(self):
        A = np.array([[3.0, 0.1], [4.0, 0.2]])
        out = project_per_atom_ball(A, (1.0, 1.0))
        assert np.allclose(out[:, 0], [0.6, 0.8], atol=1e-12)
        assert np.array_equal(out[:, 1], A[:, 1])

    def test_per_atom_length_mismatch(self):
        with pytest.raises(ValueError):
            project_per_atom_ball(np.ones((2, 3)), (1.0, 1.0))

    def test_nonneg(self):
        assert np.array_equal(project_nonneg(np.array([[-1.0, 2.0]])), np.array([[0.0, 2.0]]))
        assert np.array_equal(project_nonneg(-np.ones((2, 2))), np.zeros((2, 2)))

    def test_nonneg_frobenius(self):
        out = project_nonneg_frobenius(np.array([[-1.0, 3.0], [0.0, 4.0]]), 1.0)
        assert np.allclose(out, [[0.0, 0.6], [0.0, 0.8]], atol=1e-12)
        assert np.array_equal(project_nonneg_frobenius(-np.ones((2, 2)), 1.0), np.zeros((2, 2)))

    def test_nonneg_l1_examples(self):
        assert np.allclose(project_nonneg_l1_column(np.array([0.2, 0.3]), 1.0), [0.2, 0.3])
        assert np.allclose(project_nonneg_l1_column(np.array([2.0, 1.0, -1.0]), 1.0), [1.0, 0.0, 0.0], atol=1e-9)
        assert np.allclose(project_nonneg_l1_column(np.array([0.6, 0.6]), 1.0), [0.5, 0.5], atol=1e-9)

    def test_nonneg_l1_matches_sort_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            size = int(rng.integers(1, 12))
            vec = rng.standard_normal(size) * rng.uniform(0.1, 3)
            theta = float(rng.uniform(0.05, 2.0))
            ours = project_nonneg_l1_column(vec, theta)
            oracle = sort_based_nonneg_l1_projection(vec, theta)
            assert np.abs(ours - oracle).max() <= 1e-8

    def test_batch_matches_columnwise(self):
        rng = np.random.default_rng(5)
        A = rng.standard_normal((9, 7)) * 2
        batch = project_nonneg_l1_columns(A, 0.8)
        loop = np.column_stack([project_nonneg_l1_column(A[:, j], 0.8) for j in range(7)])
        assert np.array_equal(batch, loop)

    @pytest.mark.parametrize("seed", range(20))
    def test_idempotence_and_feasibility(self, seed):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((5, 4)) * 3
        X = np.zeros((4, 2))
        cases = [
            (lambda M: project_frobenius_ball(M, 2.0), TotalNorm(2.0)),
            (lambda M: project_per_atom_ball(M, (0.5,) * 4), PerAtomNorm((0.5,) * 4)),
            (lambda M: project_nonneg(M), None),
            (lambda M: project_nonneg_frobenius(M, 2.0), NonnegTotalNorm(2.0)),
            (lambda M: project_nonneg_l1_columns(M, 0.7), NonnegL1Atom(0.7)),
        ]
        for proj, regime in cases:
            once = proj(A)
            twice = proj(once)
            assert np.abs(twice - once).max() <= 1e-12
            if regime is not None:
                assert check_feasible(once, X, regime, 1e-9)

    def test_nonneg_projection_idempotent_bitwise(self):
        rng = np.random.default_rng(1)
        A = rng.standard_normal((6, 6))
        once = project_nonneg(A)
        assert np.array_equal(project_nonneg(once), once)

    @pytest.mark.parametrize(
        "proj",
        [
            lambda M: project_frobenius_ball(M, 1.5),
            lambda M: project_per_atom_ball(M, (0.8,) * 3),
            lambda M: project_nonneg(M),
            lambda M: project_nonneg_frobenius(M, 1.5),
            lambda M: project_nonneg_l1_columns(M, 0.6),
        ],
    )
    def test_nonexpansiveness(self, proj):
        rng = np.random.default_rng(42)
        for _ in range(100):
            U = rng.standard_normal((4, 3)) * 2
            V = rng.standard_normal((4, 3)) * 2
            lhs = np.linalg.norm(proj(U) - proj(V))
            assert lhs <= np.linalg.norm(U - V) + 1e-10


class TestRidgeUpdate:
    def test_unconstrained_optimum_feasible(self):
        A, theta = ridge_dictionary_update(np.eye(2), np.eye(2), 10.0)
        assert theta == 0.0
        assert np.allclose(A, np.eye(2), atol=1e-12)

    def test_active_constraint_analytic(self):
        A, theta = ridge_dictionary_update(2 * np.eye(2), np.eye(2), 1.0)
        assert theta == pytest.approx(2 * np.sqrt(2) - 1, abs=1e-7)
        assert np.allclose(A, (2 / (1 + theta)) * np.eye(2), atol=1e-9)
        assert np.vdot(A, A) == pytest.approx(1.0, abs=1e-8)

    def test_zero_codes_floor_regularization(self):
        Y = np.arange(6.0).reshape(2, 3) + 1
        A, theta = ridge_dictionary_update(Y, np.zeros((2, 3)), 1.0)
        assert theta == 0.0
        assert np.allclose(A, 0.0)

    @pytest.mark.parametrize("seed", range(25))
    def test_kkt_conditions(self, seed):
        rng = np.random.default_rng(seed)
        n, k, N = 4, 3, 6
        Y = rng.standard_normal((n, N)) * rng.uniform(0.5, 3)
        X = rng.standard_normal((k, N))
        beta = float(rng.uniform(0.1, 5))
        A, theta = ridge_dictionary_update(Y, X, beta)
        norm_sq = float(np.vdot(A, A))
        assert theta >= 0.0
        assert norm_sq <= beta + 1e-8
        assert abs(theta * (norm_sq - beta)) <= 1e-6
        # stationarity of the penalized system: (A X - Y) X^T + theta A = 0
        resid = (A @ X - Y) @ X.T + theta * A
        assert np.abs(resid).max() <= 1e-6 * max(1.0, np.abs(Y).max())

    def test_bad_beta_raises(self):
        with pytest.raises(ValueError):
            ridge_dictionary_update(np.eye(2), np.eye(2), 0.0)


class TestBisectionConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            BisectionConfig(tol=0.0)
        with pytest.raises(ValueError):
            BisectionConfig(max_iters=0)
        with pytest.raises(ValueError):
            BisectionConfig(bracket_growth=1.0)
