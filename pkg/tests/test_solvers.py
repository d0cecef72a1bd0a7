"""Matrix-equation solvers: certified residuals, definiteness, failure modes."""

import numpy as np
import pytest

from conftest import random_spd
from lqgpo.errors import DimensionError, SolverError
from lqgpo.solvers import Definiteness, care, lyap_ct, psd_sqrt, sylvester


class TestLyap:
    def test_scalar(self):
        rep = lyap_ct(np.array([[-1.0]]), np.array([[2.0]]))
        assert rep.solution[0, 0] == pytest.approx(1.0)
        assert rep.definiteness is Definiteness.PD

    def test_identity(self):
        rep = lyap_ct(-np.eye(2), np.eye(2))
        assert np.allclose(rep.solution, 0.5 * np.eye(2))

    def test_residual_certified(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            n = int(rng.integers(2, 6))
            A = rng.normal(size=(n, n)) - (n + 1) * np.eye(n)
            Q = random_spd(rng, n)
            rep = lyap_ct(A, Q)
            res = np.linalg.norm(A.T @ rep.solution + rep.solution @ A + Q, "fro")
            assert res <= 1e-10 * (
                np.linalg.norm(A, "fro") * np.linalg.norm(rep.solution, "fro")
                + np.linalg.norm(Q, "fro")
            ) + 1e-13
            assert np.allclose(rep.solution, rep.solution.T, atol=1e-12)

    def test_psd_of_stable_with_psd_rhs(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            A = rng.normal(size=(3, 3)) - 4 * np.eye(3)
            M = rng.normal(size=(3, 2))
            rep = lyap_ct(A, M @ M.T)
            assert np.linalg.eigvalsh(rep.solution).min() >= -1e-10

    def test_spectrum_conflict(self):
        A = np.diag([1.0, -1.0])  # A and -A share eigenvalues
        with pytest.raises(SolverError, match="non-unique"):
            lyap_ct(A, np.eye(2))

    def test_dimension_error(self):
        with pytest.raises(DimensionError):
            lyap_ct(-np.eye(2), np.eye(3))


class TestSylvester:
    def test_scalar(self):
        X = sylvester(np.array([[-1.0]]), np.array([[-2.0]]), np.array([[3.0]]))
        assert X[0, 0] == pytest.approx(1.0)

    def test_zero_rhs(self):
        X = sylvester(-np.eye(2), -2 * np.eye(3), np.zeros((2, 3)))
        assert np.allclose(X, 0.0)

    def test_random_residual(self):
        rng = np.random.default_rng(2)
        A = rng.normal(size=(3, 3)) - 4 * np.eye(3)
        B = rng.normal(size=(3, 3)) - 4 * np.eye(3)  # spectra of A, -B disjoint
        C = rng.normal(size=(3, 3))
        X = sylvester(A, B, C)
        res = np.linalg.norm(A @ X + X @ B + C, "fro")
        assert res <= 1e-9 * max(1.0, np.linalg.norm(X, "fro"))

    def test_spectrum_overlap(self):
        with pytest.raises(SolverError):
            sylvester(np.array([[1.0]]), np.array([[-1.0]]), np.array([[1.0]]))


class TestCare:
    def test_scalar_closed_form(self):
        rep = care(np.array([[-1.0]]), np.array([[1.0]]), np.eye(1), np.eye(1))
        assert rep.solution[0, 0] == pytest.approx(np.sqrt(2.0) - 1.0, abs=1e-10)
        assert rep.definiteness in (Definiteness.PD, Definiteness.PSD)

    def test_zero_state_cost(self):
        rep = care(-np.eye(2), np.eye(2), np.zeros((2, 2)), np.eye(2))
        assert np.allclose(rep.solution, 0.0, atol=1e-12)

    def test_closed_loop_stable_and_residual(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            n = int(rng.integers(2, 5))
            A = rng.normal(size=(n, n))
            B = rng.normal(size=(n, 2))
            Q = random_spd(rng, n)
            R = random_spd(rng, 2)
            rep = care(A, B, Q, R)
            P = rep.solution
            res = A.T @ P + P @ A - P @ B @ np.linalg.solve(R, B.T) @ P + Q
            scale = max(1.0, np.linalg.norm(P))
            assert np.linalg.norm(res, "fro") <= 1e-8 * scale * 10
            Acl = A - B @ np.linalg.solve(R, B.T @ P)
            assert np.linalg.eigvals(Acl).real.max() < 0

    def test_non_stabilizable(self):
        # second state is unstable and unreachable
        A = np.diag([-1.0, 1.0])
        B = np.array([[1.0], [0.0]])
        with pytest.raises(SolverError):
            care(A, B, np.eye(2), np.eye(1))


def test_psd_sqrt():
    rng = np.random.default_rng(4)
    M = random_spd(rng, 4)
    S = psd_sqrt(M)
    assert np.allclose(S @ S, M, atol=1e-10)
    assert np.allclose(S, S.T)
    # round-off clipping: a tiny negative eigenvalue is tolerated
    W = np.diag([1.0, -1e-15])
    S2 = psd_sqrt(W)
    assert S2[1, 1] == 0.0
