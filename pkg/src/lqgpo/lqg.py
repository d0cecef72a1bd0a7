"""LQG problem objects: plant, dynamic output-feedback controller, closed
loop, cost and analytic gradients, Riccati synthesis, the vanilla
policy-gradient baseline, and the state-feedback (LQR) special case.

Conventions
-----------
The plant is  dx = A x + B u + w,  y = C x + v  with noise intensities
W, V and quadratic weights Q, R.  The controller is the triple
(A_K, B_K, C_K):  dxh = A_K xh + B_K y,  u = C_K xh,  packed as the
structured matrix [[0, C_K], [B_K, A_K]] whose top-left block is zero.

For the LQR case the gain enters the loop negatively (u = -K x, closed
loop A - B K), so the unique stationary gain is the Riccati gain
K* = R^-1 B^T P* and the gradient is 2 (R K - B^T P_K) Sigma_K.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import solvers
from .errors import DimensionError, SolverError, UnstableError
from .solvers import lyap_ct, psd_sqrt
from .ss import EPS_STAB, StateSpace

# Dual-trace agreement required of every constructed closed loop.
COST_CONSISTENCY_RTOL = 1e-8


def _mat(value, name):
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _check_spd(M, name):
    M = _mat(M, name)
    if M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square")
    if np.linalg.norm(M - M.T, "fro") > 1e-10 * max(1.0, np.linalg.norm(M, "fro")):
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(0.5 * (M + M.T)).min() <= 0:
        raise ValueError(f"{name} must be positive definite")
    return M


@dataclass(frozen=True)
class LqgPlant:
    """Problem data (A, B, C, Q, R, W, V) of the continuous-time LQG problem."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    W: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        A = _mat(self.A, "A")
        B = _mat(self.B, "B")
        C = _mat(self.C, "C")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError("A must be square")
        if B.shape[0] != n or C.shape[1] != n:
            raise DimensionError("B/C dimensions inconsistent with A")
        Q = _check_spd(self.Q, "Q")
        R = _check_spd(self.R, "R")
        W = _check_spd(self.W, "W")
        V = _check_spd(self.V, "V")
        if Q.shape[0] != n or W.shape[0] != n:
            raise DimensionError("Q/W must be n x n")
        if R.shape[0] != B.shape[1]:
            raise DimensionError("R must match the input dimension")
        if V.shape[0] != C.shape[0]:
            raise DimensionError("V must match the output dimension")
        for name, val in (
            ("A", A), ("B", B), ("C", C), ("Q", Q), ("R", R), ("W", W), ("V", V)
        ):
            val = val.copy()
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        # Stabilizability/detectability check via Riccati solvability.
        solvers.care(A, B, Q, R)
        solvers.care(A.T, C.T, W, V)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in "ABCQRWV"}

    @classmethod
    def from_dict(cls, data: dict) -> "LqgPlant":
        missing = set("ABCQRWV") - set(data)
        if missing:
            raise ValueError(f"plant JSON missing keys: {sorted(missing)}")
        return cls(*(np.asarray(data[k], dtype=float) for k in "ABCQRWV"))


@dataclass(frozen=True)
class DynController:
    """Dynamic output-feedback controller triple (A_K, B_K, C_K)."""

    A_K: np.ndarray
    B_K: np.ndarray
    C_K: np.ndarray

    def __post_init__(self):
        A_K = _mat(self.A_K, "A_K")
        B_K = _mat(self.B_K, "B_K")
        C_K = _mat(self.C_K, "C_K")
        q = A_K.shape[0]
        if A_K.shape != (q, q):
            raise DimensionError("A_K must be square")
        if B_K.shape[0] != q or C_K.shape[1] != q:
            raise DimensionError("B_K/C_K dimensions inconsistent with A_K")
        for name, val in (("A_K", A_K), ("B_K", B_K), ("C_K", C_K)):
            val = val.copy()
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def order(self) -> int:
        return self.A_K.shape[0]

    def as_packed(self) -> np.ndarray:
        """The structured matrix [[0, C_K], [B_K, A_K]] (zero top-left block)."""
        m1 = self.C_K.shape[0]
        m2 = self.B_K.shape[1]
        q = self.order
        K = np.zeros((m1 + q, m2 + q))
        K[:m1, m2:] = self.C_K
        K[m1:, :m2] = self.B_K
        K[m1:, m2:] = self.A_K
        return K

    @classmethod
    def from_packed(cls, K, m1: int, m2: int) -> "DynController":
        K = _mat(K, "K")
        return cls(K[m1:, m2:], K[m1:, :m2], K[:m1, m2:])

    def to_dict(self) -> dict:
        return {
            "A_K": self.A_K.tolist(),
            "B_K": self.B_K.tolist(),
            "C_K": self.C_K.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DynController":
        missing = {"A_K", "B_K", "C_K"} - set(data)
        if missing:
            raise ValueError(f"controller JSON missing keys: {sorted(missing)}")
        return cls(
            np.asarray(data["A_K"], dtype=float),
            np.asarray(data["B_K"], dtype=float),
            np.asarray(data["C_K"], dtype=float),
        )


@dataclass(frozen=True)
class ClosedLoop:
    """Augmented closed-loop dynamics and its two Lyapunov solutions.

    Acl is the (n+q) x (n+q) loop matrix; Bcl and Ccl are the noise-input
    and performance-output maps built from the square roots of (W, V) and
    (Q, R); P and Sigma solve

        Acl^T P + P Acl + Ccl^T Ccl = 0,
        Acl Sigma + Sigma Acl^T + Bcl Bcl^T = 0.
    """

    Acl: np.ndarray
    Bcl: np.ndarray
    Ccl: np.ndarray
    P: np.ndarray
    Sigma: np.ndarray
    n: int
    q: int


def loop_matrix(plant: LqgPlant, ctrl: DynController) -> np.ndarray:
    n, q = plant.n, ctrl.order
    A = np.zeros((n + q, n + q))
    A[:n, :n] = plant.A
    A[:n, n:] = plant.B @ ctrl.C_K
    A[n:, :n] = ctrl.B_K @ plant.C
    A[n:, n:] = ctrl.A_K
    return A


def close_loop(plant: LqgPlant, ctrl: DynController) -> ClosedLoop:
    """Assemble the augmented loop; fails if the controller does not stabilize."""
    if ctrl.B_K.shape[1] != plant.n_outputs:
        raise DimensionError("B_K column count must equal the plant output count")
    if ctrl.C_K.shape[0] != plant.n_inputs:
        raise DimensionError("C_K row count must equal the plant input count")
    n, q = plant.n, ctrl.order
    Acl = loop_matrix(plant, ctrl)
    if np.max(np.linalg.eigvals(Acl).real) >= -EPS_STAB:
        raise UnstableError("controller not stabilizing")
    Bcl = np.zeros((n + q, n + plant.n_outputs))
    Bcl[:n, :n] = psd_sqrt(plant.W)
    Bcl[n:, n:] = ctrl.B_K @ psd_sqrt(plant.V)
    Ccl = np.zeros((n + plant.n_inputs, n + q))
    Ccl[:n, :n] = psd_sqrt(plant.Q)
    Ccl[n:, n:] = psd_sqrt(plant.R) @ ctrl.C_K
    P = lyap_ct(Acl, Ccl.T @ Ccl, check_definiteness=False).solution
    Sigma = lyap_ct(Acl.T, Bcl @ Bcl.T, check_definiteness=False).solution
    return ClosedLoop(Acl, Bcl, Ccl, P, Sigma, n, q)


def performance_realization(cl: ClosedLoop) -> StateSpace:
    """The strictly proper closed-loop map whose squared H2 norm is the cost."""
    return StateSpace(cl.Acl, cl.Bcl, cl.Ccl, np.zeros((cl.Ccl.shape[0], cl.Bcl.shape[1])))


def lqg_cost(cl: ClosedLoop) -> float:
    """Steady-state quadratic cost via the primal Gramian trace.

    The dual trace is evaluated as well and the two are required to agree to
    COST_CONSISTENCY_RTOL relative; disagreement indicates a broken solve.
    """
    primal = float(np.trace(cl.Bcl @ cl.Bcl.T @ cl.P))
    dual = float(np.trace(cl.Ccl.T @ cl.Ccl @ cl.Sigma))
    if abs(primal - dual) > COST_CONSISTENCY_RTOL * max(1.0, abs(primal)):
        raise ArithmeticError(
            f"cost trace mismatch: {primal:.15e} vs {dual:.15e}"
        )
    return primal


def lqg_gradient(
    plant: LqgPlant, ctrl: DynController, cl: ClosedLoop | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Analytic cost gradients with respect to (A_K, B_K, C_K)."""
    if cl is None:
        cl = close_loop(plant, ctrl)
    n = cl.n
    P1, P2 = cl.P[:n, :], cl.P[n:, :]
    S1, S2 = cl.Sigma[:n, :], cl.Sigma[n:, :]
    P22 = cl.P[n:, n:]
    S22 = cl.Sigma[n:, n:]
    gA = 2.0 * (P2 @ S2.T)
    gB = 2.0 * (P22 @ ctrl.B_K @ plant.V + P2 @ S1.T @ plant.C.T)
    gC = 2.0 * (plant.R @ ctrl.C_K @ S22 + plant.B.T @ P1 @ S2.T)
    return gA, gB, gC


def lqg_optimal(plant: LqgPlant, order: int | None = None) -> DynController:
    """Riccati synthesis of the optimal controller, zero-padded to `order`.

    Requires order >= n; the padding block is -I with zero couplings so the
    padded controller has identical cost and remains a stationary point.
    """
    n = plant.n
    q = n if order is None else int(order)
    if q < n:
        raise ValueError(f"controller order {q} cannot be below the plant order {n}")
    P = solvers.care(plant.A, plant.B, plant.Q, plant.R).solution
    K = np.linalg.solve(plant.R, plant.B.T @ P)
    H = solvers.care(plant.A.T, plant.C.T, plant.W, plant.V).solution
    L = np.linalg.solve(plant.V, plant.C @ H).T
    A_K = plant.A - plant.B @ K - L @ plant.C
    B_K = L
    C_K = -K
    if q > n:
        pad = q - n
        A_full = np.zeros((q, q))
        A_full[:n, :n] = A_K
        A_full[n:, n:] = -np.eye(pad)
        B_full = np.vstack([B_K, np.zeros((pad, B_K.shape[1]))])
        C_full = np.hstack([C_K, np.zeros((C_K.shape[0], pad))])
        return DynController(A_full, B_full, C_full)
    return DynController(A_K, B_K, C_K)


@dataclass(frozen=True)
class PgRecord:
    iteration: int
    controller: DynController
    cost: float


def policy_gradient_run(
    plant: LqgPlant,
    ctrl0: DynController,
    step: float,
    iters: int,
    max_halvings: int = 20,
) -> list[PgRecord]:
    """Vanilla policy gradient on (A_K, B_K, C_K) with a shared step size.

    An update that would destabilize the loop is retried with a halved step
    (per update, up to max_halvings); if it still destabilizes, the update is
    skipped.  Stalling is a valid outcome, not an error.
    """
    ctrl = ctrl0
    cl = close_loop(plant, ctrl)
    records = [PgRecord(0, ctrl, lqg_cost(cl))]
    for it in range(1, iters + 1):
        gA, gB, gC = lqg_gradient(plant, ctrl, cl)
        eta = step
        for _ in range(max_halvings + 1):
            cand = DynController(
                ctrl.A_K - eta * gA, ctrl.B_K - eta * gB, ctrl.C_K - eta * gC
            )
            try:
                cl_cand = close_loop(plant, cand)
            except (UnstableError, SolverError):
                # destabilizing or numerically marginal update: halve and retry
                eta *= 0.5
                continue
            ctrl, cl = cand, cl_cand
            break
        records.append(PgRecord(it, ctrl, lqg_cost(cl)))
    return records


# ----------------------------------------------------------------------
# State-feedback (LQR) special case, noise intensity I.
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class LqrProblem:
    """State-feedback problem data; the loop closes as A - B K."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        A = _mat(self.A, "A")
        B = _mat(self.B, "B")
        Q = _check_spd(self.Q, "Q")
        R = _check_spd(self.R, "R")
        if A.shape[0] != A.shape[1] or B.shape[0] != A.shape[0]:
            raise DimensionError("A/B dimensions inconsistent")
        if Q.shape[0] != A.shape[0] or R.shape[0] != B.shape[1]:
            raise DimensionError("Q/R dimensions inconsistent")
        for name, val in (("A", A), ("B", B), ("Q", Q), ("R", R)):
            val = val.copy()
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        solvers.care(A, B, Q, R)

    def closed_loop(self, K) -> np.ndarray:
        return self.A - self.B @ np.atleast_2d(np.asarray(K, dtype=float))


def _lqr_terms(prob: LqrProblem, K):
    K = np.atleast_2d(np.asarray(K, dtype=float))
    Acl = prob.closed_loop(K)
    if np.max(np.linalg.eigvals(Acl).real) >= -EPS_STAB:
        raise UnstableError("gain does not stabilize the loop")
    P = lyap_ct(Acl, prob.Q + K.T @ prob.R @ K, check_definiteness=False).solution
    Sigma = lyap_ct(Acl.T, np.eye(Acl.shape[0]), check_definiteness=False).solution
    cost = float(np.trace(Sigma @ (prob.Q + K.T @ prob.R @ K)))
    gap = prob.R @ K - prob.B.T @ P
    return cost, gap, Sigma


def lqr_cost_grad(prob: LqrProblem, K) -> tuple[float, np.ndarray]:
    """Cost and gradient of the state-feedback problem at gain K.

    P_K and Sigma_K solve the closed-loop Lyapunov pair; the cost is
    tr(Sigma_K (Q + K^T R K)) and the gradient 2 (R K - B^T P_K) Sigma_K,
    which is also twice the stable residue sum of the associated
    optimality transfer function.
    """
    cost, gap, Sigma = _lqr_terms(prob, K)
    return cost, 2.0 * gap @ Sigma


def lqr_optimal(prob: LqrProblem) -> tuple[np.ndarray, float]:
    """Riccati gain K* = R^-1 B^T P* and its cost."""
    P = solvers.care(prob.A, prob.B, prob.Q, prob.R).solution
    K = np.linalg.solve(prob.R, prob.B.T @ P)
    cost, _ = lqr_cost_grad(prob, K)
    return K, cost


def lqr_gradient_descent(
    prob: LqrProblem,
    K0,
    step: float = 0.1,
    iters: int = 5000,
    gap_tol: float = 1e-8,
    max_halvings: int = 40,
) -> tuple[np.ndarray, list[float]]:
    """Gradient descent with a per-update backtracking step.

    An update that destabilizes the loop or increases the cost is retried
    with a halved step; a clean success lets the step grow back.  Stops on
    the stationarity gap ||R K - B^T P_K|| (relative to the gain scale),
    which certifies optimality directly, rather than on the gradient norm,
    which can be small while the gap is not.
    """
    K = np.atleast_2d(np.asarray(K0, dtype=float))
    cost, gap, Sigma = _lqr_terms(prob, K)
    history = [cost]
    eta = step
    best = (np.linalg.norm(gap, "fro"), K)

    def converged(gap, K):
        scale = 1.0 + np.linalg.norm(prob.R @ K, "fro")
        return np.linalg.norm(gap, "fro") <= gap_tol * scale

    for _ in range(iters):
        if converged(gap, K):
            break
        grad = 2.0 * gap @ Sigma
        halved = False
        # Near the optimum true cost decrements drop below double-precision
        # resolution while the Lyapunov-based gradient stays accurate, so
        # steps are accepted up to the evaluation noise floor.
        floor = 1e-14 * (1.0 + abs(cost))
        for _ in range(max_halvings):
            cand = K - eta * grad
            try:
                cand_cost, cand_gap, cand_Sigma = _lqr_terms(prob, cand)
            except (UnstableError, SolverError):
                eta *= 0.5
                halved = True
                continue
            if cand_cost <= cost + floor:
                K, cost, gap, Sigma = cand, cand_cost, cand_gap, cand_Sigma
                break
            eta *= 0.5
            halved = True
        else:
            break
        if not halved:
            # backtracking makes an aggressive cap safe; narrow valleys need
            # steps far beyond the nominal one
            eta = min(eta * 2.0, 1e8 * step)
        gap_norm = np.linalg.norm(gap, "fro")
        if gap_norm < best[0]:
            best = (gap_norm, K)
        history.append(cost)
    if not converged(gap, K):
        K = best[1]
    return K, history
