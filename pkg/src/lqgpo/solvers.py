"""Dense Lyapunov, Sylvester, and continuous-time Riccati solvers.

Sized for the desk-scale problems in this package (state dimension well
under 50).  Every solve returns or is backed by an independently recomputed
residual so downstream code never trusts an uncertified solution.  The
Riccati path seeds from a Schur-based solve and polishes with
Newton-Kleinman iterations until the residual certifies.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError, SolverError


class Definiteness(enum.Enum):
    PD = "positive_definite"
    PSD = "positive_semidefinite"
    INDEFINITE = "indefinite"
    NOT_CHECKED = "not_checked"


@dataclass(frozen=True)
class SolveReport:
    """A matrix-equation solution plus its certified residual."""

    solution: np.ndarray
    residual_norm: float
    definiteness: Definiteness = Definiteness.NOT_CHECKED


def _square(M, name):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got {M.shape}")
    return M


def _classify(X, tol=1e-10):
    if X.size == 0:
        return Definiteness.PSD
    w = np.linalg.eigvalsh(0.5 * (X + X.T))
    if w.min() > tol:
        return Definiteness.PD
    if w.min() >= -tol * max(1.0, w.max()):
        return Definiteness.PSD
    return Definiteness.INDEFINITE


def psd_sqrt(M, clip: float = 1e-12) -> np.ndarray:
    """Symmetric PSD principal square root via eigendecomposition.

    Eigenvalues below `clip` (relative) are treated as round-off and set to
    zero before taking the root.
    """
    M = _square(M, "M")
    if M.size == 0:
        return M
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    w = np.where(w > clip * max(1.0, abs(w).max()), w, 0.0)
    return (V * np.sqrt(w)) @ V.T


def lyap_ct(A, Qrhs, check_definiteness: bool = True) -> SolveReport:
    """Solve A^T X + X A + Qrhs = 0 for symmetric X.

    Requires that A and -A share no eigenvalue (automatic for stable A);
    otherwise the solution is not unique and a SolverError is raised.
    """
    A = _square(A, "A")
    Qrhs = _square(Qrhs, "Qrhs")
    if A.shape != Qrhs.shape:
        raise DimensionError("A and Qrhs must have the same shape")
    if A.size == 0:
        return SolveReport(np.zeros((0, 0)), 0.0, Definiteness.PSD)
    eigs = np.linalg.eigvals(A)
    gap = np.abs(eigs[:, None] + eigs[None, :]).min()
    scale = max(np.abs(eigs).max(), 1.0)
    if gap <= 1e-12 * scale:
        raise SolverError(
            "non-unique solution: spectra of A and -A overlap "
            f"(min |lambda_i + lambda_j| = {gap:.3e})"
        )
    X = sla.solve_continuous_lyapunov(A.T, -np.asarray(Qrhs, dtype=float))
    X = 0.5 * (X + X.T)
    residual = np.linalg.norm(A.T @ X + X @ A + Qrhs, "fro")
    bound = 1e-10 * (
        np.linalg.norm(A, "fro") * np.linalg.norm(X, "fro")
        + np.linalg.norm(Qrhs, "fro")
    )
    if residual > max(bound, 1e-300) and residual > 1e-12:
        raise SolverError(
            f"Lyapunov residual {residual:.3e} exceeds certified bound {bound:.3e}"
        )
    definiteness = _classify(X) if check_definiteness else Definiteness.NOT_CHECKED
    return SolveReport(X, float(residual), definiteness)


def sylvester(A, Bm, Cm) -> np.ndarray:
    """Solve A X + X Bm + Cm = 0.

    Requires the spectra of A and -Bm to be disjoint.
    """
    A = _square(A, "A")
    Bm = _square(Bm, "Bm")
    Cm = np.atleast_2d(np.asarray(Cm, dtype=float))
    if Cm.shape != (A.shape[0], Bm.shape[0]):
        raise DimensionError(f"Cm must have shape {(A.shape[0], Bm.shape[0])}")
    if A.size == 0 or Bm.size == 0:
        return np.zeros(Cm.shape)
    ea = np.linalg.eigvals(A)
    eb = np.linalg.eigvals(Bm)
    gap = np.abs(ea[:, None] + eb[None, :]).min()
    scale = max(np.abs(ea).max(), np.abs(eb).max(), 1.0)
    if gap <= 1e-12 * scale:
        raise SolverError("spectrum overlap: Sylvester equation is singular")
    X = sla.solve_sylvester(A, Bm, -Cm)
    residual = np.linalg.norm(A @ X + X @ Bm + Cm, "fro")
    bound = 1e-10 * (
        (np.linalg.norm(A, "fro") + np.linalg.norm(Bm, "fro"))
        * np.linalg.norm(X, "fro")
        + np.linalg.norm(Cm, "fro")
    )
    if residual > max(bound, 1e-300) and residual > 1e-12:
        raise SolverError(f"Sylvester residual {residual:.3e} not certified")
    return X


def _care_residual(A, B, Qw, Rinv_Bt, P):
    return A.T @ P + P @ A - P @ B @ Rinv_Bt @ P + Qw


def care(A, B, Qw, Rw, max_newton: int = 50) -> SolveReport:
    """Stabilizing solution of A^T P + P A - P B Rw^-1 B^T P + Qw = 0.

    A Schur-method solve provides the seed; Newton-Kleinman iterations
    (each a Lyapunov solve at the current closed loop) polish the residual
    below 1e-10 relative.  Fails with a diagnostic when the data is not
    stabilizable/detectable or the closed loop does not come out stable.
    """
    A = _square(A, "A")
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Qw = _square(Qw, "Qw")
    Rw = _square(Rw, "Rw")
    if B.shape[0] != A.shape[0]:
        raise DimensionError("B row count must match A")
    if Rw.shape[0] != B.shape[1]:
        raise DimensionError("Rw must match the input dimension")
    try:
        P = sla.solve_continuous_are(A, B, Qw, Rw)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"Riccati solve failed: {exc}") from exc
    P = 0.5 * (P + P.T)
    Rinv_Bt = np.linalg.solve(Rw, B.T)

    def scale(P):
        return max(
            1.0,
            2 * np.linalg.norm(A, "fro") * np.linalg.norm(P, "fro")
            + np.linalg.norm(P @ B @ Rinv_Bt @ P, "fro")
            + np.linalg.norm(Qw, "fro"),
        )

    res = np.linalg.norm(_care_residual(A, B, Qw, Rinv_Bt, P), "fro")
    for _ in range(max_newton):
        if res <= 1e-10 * scale(P):
            break
        K = Rinv_Bt @ P
        Acl = A - B @ K
        if np.max(np.linalg.eigvals(Acl).real) >= 0:
            raise SolverError("Newton-Kleinman lost closed-loop stability")
        rhs = Qw + K.T @ Rw @ K
        P = sla.solve_continuous_lyapunov(Acl.T, -rhs)
        P = 0.5 * (P + P.T)
        res = np.linalg.norm(_care_residual(A, B, Qw, Rinv_Bt, P), "fro")
    if res > 1e-8 * scale(P):
        raise SolverError(f"Riccati residual {res:.3e} not certified")
    Acl = A - B @ (Rinv_Bt @ P)
    if np.max(np.linalg.eigvals(Acl).real) >= 0:
        raise SolverError(
            "Riccati solution is not stabilizing; check stabilizability/detectability"
        )
    return SolveReport(P, float(res), _classify(P))
