import numpy as np
import pytest

from sparsedict import (
    CodeMatrix,
    Dictionary,
    NonnegL1Atom,
    NonnegTotalNorm,
    PerAtomNorm,
    SolverConfig,
    TotalNorm,
    TrainingMatrix,
    check_feasible,
    grad_A,
    grad_X,
    objective,
)

from oracles import central_diff_grad


class TestTypes:
    def test_training_matrix_rejects_non_finite(self):
        with pytest.raises(ValueError):
            TrainingMatrix(np.array([[1.0, np.nan]]))

    def test_training_matrix_rejects_wrong_ndim(self):
        with pytest.raises(ValueError):
            TrainingMatrix(np.ones(3))

    def test_arrays_are_read_only(self):
        tm = TrainingMatrix(np.ones((2, 2)))
        with pytest.raises(ValueError):
            tm.data[0, 0] = 5.0

    def test_regime_bounds_must_be_positive(self):
        with pytest.raises(ValueError):
            TotalNorm(0.0)
        with pytest.raises(ValueError):
            PerAtomNorm((1.0, -1.0))
        with pytest.raises(ValueError):
            NonnegTotalNorm(-2.0)
        with pytest.raises(ValueError):
            NonnegL1Atom(0.0)

    def test_dictionary_checks_per_atom_bound_count(self):
        with pytest.raises(ValueError):
            Dictionary(np.ones((3, 2)), PerAtomNorm((1.0,)))

    def test_solver_config_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(rel_obj_tol=0.0)
        with pytest.raises(ValueError):
            SolverConfig(tau_floor=-1.0)


class TestObjective:
    def test_exact_factorization_is_zero(self):
        rng = np.random.default_rng(0)
        A = rng.standard_normal((4, 3))
        X = rng.standard_normal((3, 5))
        assert objective(A @ X, A, X, 0.0) == pytest.approx(0.0, abs=1e-12)

    def test_zero_codes_value(self):
        Y = np.eye(2)
        assert objective(Y, np.zeros((2, 1)), np.zeros((1, 2)), 1.0) == pytest.approx(1.0)

    def test_direct_arithmetic(self):
        Y = np.array([[1.0], [0.0]])
        A = np.array([[1.0], [0.0]])
        X = np.array([[0.5]])
        assert objective(Y, A, X, 0.1) == pytest.approx(0.175)

    def test_dimension_mismatch_raises(self):
        with pytest.raises(ValueError):
            objective(np.ones((2, 2)), np.ones((3, 1)), np.ones((1, 2)), 0.0)

    def test_accepts_wrapper_types(self):
        Y = TrainingMatrix(np.eye(2))
        A = Dictionary(np.zeros((2, 1)) + 1e-9, TotalNorm(1.0))
        X = CodeMatrix(np.zeros((1, 2)) + 1e-9)
        assert np.isfinite(objective(Y, A, X, 1.0))

    def test_permutation_invariance(self):
        rng = np.random.default_rng(1)
        Y = rng.standard_normal((4, 6))
        A = rng.standard_normal((4, 3))
        X = rng.standard_normal((3, 6))
        perm = rng.permutation(3)
        assert objective(Y, A, X, 0.3) == pytest.approx(
            objective(Y, A[:, perm], X[perm, :], 0.3), rel=1e-13
        )

    def test_lower_bound_by_l1_term(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            Y = rng.standard_normal((3, 4))
            A = rng.standard_normal((3, 2))
            X = rng.standard_normal((2, 4))
            lam = float(rng.random())
            assert objective(Y, A, X, lam) >= lam * np.abs(X).sum() - 1e-12


class TestGradients:
    def test_grad_A_zero_codes(self):
        Y = np.ones((3, 2))
        assert np.array_equal(grad_A(Y, np.ones((3, 2)), np.zeros((2, 2))), np.zeros((3, 2)))

    def test_grad_A_identity_codes(self):
        Y = np.arange(6.0).reshape(2, 3) + 1
        out = grad_A(Y, np.zeros((2, 3)), np.eye(3))
        assert np.allclose(out, -Y)

    def test_grad_X_zero_dictionary(self):
        Y = np.ones((3, 2))
        assert np.array_equal(grad_X(Y, np.zeros((3, 2)), np.ones((2, 2))), np.zeros((2, 2)))

    def test_grad_X_exact_fit(self):
        Y = np.arange(4.0).reshape(2, 2) + 1
        assert np.allclose(grad_X(Y, np.eye(2), Y), 0.0)

    @pytest.mark.parametrize("seed", range(3))
    def test_finite_difference_agreement(self, seed):
        rng = np.random.default_rng(seed)
        Y = rng.standard_normal((3, 5))
        A = rng.standard_normal((3, 4))
        X = rng.standard_normal((4, 5))

        def smooth_of_A(Am):
            return 0.5 * np.sum((Y - Am @ X) ** 2)

        def smooth_of_X(Xm):
            return 0.5 * np.sum((Y - A @ Xm) ** 2)

        fd_A = central_diff_grad(smooth_of_A, A)
        fd_X = central_diff_grad(smooth_of_X, X)
        assert np.linalg.norm(fd_A - grad_A(Y, A, X)) <= 1e-5 * np.linalg.norm(fd_A)
        assert np.linalg.norm(fd_X - grad_X(Y, A, X)) <= 1e-5 * np.linalg.norm(fd_X)


class TestCheckFeasible:
    def test_zero_matrices_feasible_everywhere(self):
        A = np.zeros((2, 2))
        X = np.zeros((2, 3))
        for regime in (TotalNorm(1.0), PerAtomNorm((1.0, 1.0)), NonnegTotalNorm(1.0), NonnegL1Atom(1.0)):
            assert check_feasible(A, X, regime)

    def test_boundary_violation(self):
        tol = 1e-9
        A = np.zeros((2, 1))
        A[0, 0] = np.sqrt(1.0 + 2 * tol)
        assert not check_feasible(A, np.zeros((1, 1)), TotalNorm(1.0), tol)

    def test_nonneg_l1_boundary_inclusive(self):
        A = np.array([[0.5], [0.5]])
        X = np.array([[0.2, 0.0]])
        assert check_feasible(A, X, NonnegL1Atom(1.0))

    def test_nonneg_regime_rejects_negative_codes(self):
        A = np.array([[0.1], [0.1]])
        X = np.array([[-0.5, 0.0]])
        assert not check_feasible(A, X, NonnegTotalNorm(1.0), 1e-9)

    def test_per_atom_mixed(self):
        A = np.array([[3.0, 0.1], [4.0, 0.1]])
        assert not check_feasible(A, np.zeros((2, 1)), PerAtomNorm((1.0, 1.0)), 1e-9)
        assert check_feasible(A, np.zeros((2, 1)), PerAtomNorm((26.0, 1.0)), 1e-9)
