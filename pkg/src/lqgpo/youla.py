"""Gradient descent in the lifted controller space.

Fixing a stabilizing controller K0 turns the closed loop into a four-block
nominal system M; any controller perturbation acts through the feedback
parameter Q = DeltaK (I - M22 DeltaK)^-1, which splits uniquely into a
strictly proper stable part Q_dyn and a masked static part Q_stat.  In the
(Q_dyn, Q_stat) coordinates the cost

    J(Q_dyn, Q_stat) = || M11 + M12 (Q_dyn + Q_stat) M21 ||_H2^2

is convex, and its gradient is carried by a single stable transfer matrix
S (the sensitivity system) together with the masked residue sum of S.
The iteration here updates both parts with a common step size and controls
state growth with balanced truncation; the final iterate maps back to a
conventional controller through the inverse parameterization.

The update uses S itself (the factor 2 of the Frechet derivative is folded
into the step size), so a step eta corresponds to 2*eta in gradient-flow
scaling.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from .certificate import build_certificate_matrices
from .errors import DimensionError, UnstableError
from .lqg import ClosedLoop, DynController, LqgPlant, close_loop
from .solvers import psd_sqrt
from .ss import (
    StateSpace,
    h2_inner,
    h2_norm_sq,
    hinf_norm_est,
    minreal,
    para_conjugate,
    parallel,
    scaled,
    series,
    stable_projection,
    stable_residue_sum,
    static_gain,
    zero_system,
)

logger = logging.getLogger(__name__)

DEFAULT_TRUNC_TOL = 1e-9


def _truncate_stable(g: StateSpace, tol: float) -> StateSpace:
    """Balanced truncation that never trades strict stability for order.

    The inputs here are stable by construction; if round-off in the reduced
    realization leaves an eigenvalue at the stability margin, keep the
    unreduced system for this step instead.
    """
    red = minreal(g, tol)
    if red.n_states == 0 or red.is_stable():
        return red
    logger.debug("discarding marginal truncation (%d states kept)", red.n_states)
    return g


@dataclass(frozen=True)
class NominalLft:
    """Four-block nominal data at a fixed stabilizing controller.

    M11 maps noise to performance (its squared H2 norm is the cost at the
    base controller); M12/M21 carry the perturbation in/out; M22 is the
    interconnection seen by the perturbation.  G0 is the fixed stable term
    of the sensitivity system, built from the certificate blocks.
    """

    plant: LqgPlant
    ctrl0: DynController
    cl: ClosedLoop
    M11: StateSpace
    M12: StateSpace
    M21: StateSpace
    M22: StateSpace
    G0: StateSpace
    base_cost: float

    @property
    def q_rows(self) -> int:
        # rows of the lifted parameter: m1 + q
        return self.plant.n_inputs + self.ctrl0.order

    @property
    def q_cols(self) -> int:
        # columns of the lifted parameter: m2 + q
        return self.plant.n_outputs + self.ctrl0.order

    @property
    def mask_rows(self) -> int:
        return self.plant.n_inputs

    @property
    def mask_cols(self) -> int:
        return self.plant.n_outputs


def build_nominal(plant: LqgPlant, ctrl0: DynController) -> NominalLft:
    """Assemble the nominal four-block system at a stabilizing controller."""
    cl = close_loop(plant, ctrl0)
    n, q = cl.n, cl.q
    m1, m2 = plant.n_inputs, plant.n_outputs
    Acl = cl.Acl
    Bcl, Ccl = cl.Bcl, cl.Ccl

    # Perturbation input map [[B, 0], [0, I]] and output map [[C, 0], [0, I]].
    B_pert = np.zeros((n + q, m1 + q))
    B_pert[:n, :m1] = plant.B
    B_pert[n:, m1:] = np.eye(q)
    C_pert = np.zeros((m2 + q, n + q))
    C_pert[:m2, :n] = plant.C
    C_pert[m2:, n:] = np.eye(q)

    D12 = np.zeros((Ccl.shape[0], m1 + q))
    D12[n:, :m1] = psd_sqrt(plant.R)
    D21 = np.zeros((m2 + q, Bcl.shape[1]))
    D21[:m2, n:] = psd_sqrt(plant.V)

    M11 = StateSpace(Acl, Bcl, Ccl, np.zeros((Ccl.shape[0], Bcl.shape[1])))
    M12 = StateSpace(Acl, B_pert, Ccl, D12)
    M21 = StateSpace(Acl, Bcl, C_pert, D21)
    M22 = StateSpace(Acl, B_pert, C_pert, np.zeros((m2 + q, m1 + q)))

    cm = build_certificate_matrices(plant, ctrl0, cl)
    G0 = StateSpace(Acl, cm.Bterm, cm.Cterm, np.zeros((m1 + q, m2 + q)))

    base_cost = h2_norm_sq(M11)
    return NominalLft(plant, ctrl0, cl, M11, M12, M21, M22, G0, base_cost)


@dataclass(frozen=True)
class YoulaIterate:
    """A point (Q_dyn, Q_stat) of the lifted parameter space.

    Q_dyn is strictly proper and stable; Q_stat is a real matrix whose
    top-left mask block (plant inputs x plant outputs) is zero.
    """

    Q_dyn: StateSpace
    Q_stat: np.ndarray

    def __post_init__(self):
        stat = np.atleast_2d(np.asarray(self.Q_stat, dtype=float)).copy()
        stat.setflags(write=False)
        object.__setattr__(self, "Q_stat", stat)

    @classmethod
    def zero(cls, nom: NominalLft) -> "YoulaIterate":
        return cls(
            zero_system(nom.q_rows, nom.q_cols),
            np.zeros((nom.q_rows, nom.q_cols)),
        )

    def validate(self, nom: NominalLft) -> None:
        if (self.Q_dyn.n_outputs, self.Q_dyn.n_inputs) != (nom.q_rows, nom.q_cols):
            raise DimensionError("Q_dyn has wrong transfer dimensions")
        if self.Q_stat.shape != (nom.q_rows, nom.q_cols):
            raise DimensionError("Q_stat has wrong shape")
        if not self.Q_dyn.is_strictly_proper():
            raise ValueError("Q_dyn must be strictly proper")
        if not self.Q_dyn.is_stable():
            raise UnstableError("Q_dyn must be stable")
        if np.any(self.Q_stat[: nom.mask_rows, : nom.mask_cols]):
            raise ValueError("Q_stat mask block must be zero")

    def combined(self) -> StateSpace:
        """Q_dyn + Q_stat as one proper system (the static part rides on D)."""
        return self.Q_dyn.with_feedthrough(self.Q_stat)


def mask_block(M: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Zero the top-left rows x cols block, leaving the rest unchanged."""
    out = np.array(M, dtype=float, copy=True)
    out[:rows, :cols] = 0.0
    return out


def inner_u(a: tuple[StateSpace, np.ndarray], b: tuple[StateSpace, np.ndarray]) -> float:
    """Inner product on the lifted space: H2 pairing plus Frobenius pairing."""
    ga, ma = a
    gb, mb = b
    dyn = 0.0
    if ga.n_states and gb.n_states:
        dyn = h2_inner(ga, gb)
    return dyn + float(np.sum(ma * mb))


def norm_u(a: tuple[StateSpace, np.ndarray]) -> float:
    g, m = a
    return float(np.sqrt(max(h2_norm_sq(g) if g.n_states else 0.0, 0.0) + np.sum(m * m)))


def sensitivity(
    nom: NominalLft, it: YoulaIterate, trunc_tol: float = DEFAULT_TRUNC_TOL
) -> StateSpace:
    """The stable sensitivity system S at the given iterate.

    S = stable part of  G0 + M12~ M12 (Q_dyn + Q_stat) M21 M21~, reduced by
    balanced truncation.  The para-conjugate products are formed pairwise
    with intermediate truncation to cap the state dimension.
    """
    it.validate(nom)
    left = minreal(series(para_conjugate(nom.M12), nom.M12), trunc_tol)
    right = minreal(series(nom.M21, para_conjugate(nom.M21)), trunc_tol)
    mid = series(left, series(it.combined(), right))
    total = parallel(nom.G0, mid, 1)
    S = stable_projection(total)
    # The mask kills the feedthrough chain exactly; clear round-off and keep
    # the result strictly proper.
    S = S.with_feedthrough(np.zeros((S.n_outputs, S.n_inputs)))
    return _truncate_stable(S, trunc_tol)


def frechet_gradient(
    nom: NominalLft, it: YoulaIterate, trunc_tol: float = DEFAULT_TRUNC_TOL
) -> tuple[StateSpace, np.ndarray]:
    """Gradient carrier (S, masked residue of S); the true Frechet derivative
    is twice this pair."""
    S = sensitivity(nom, it, trunc_tol)
    res = (
        stable_residue_sum(S)
        if S.n_states
        else np.zeros((nom.q_rows, nom.q_cols))
    )
    return S, mask_block(res, nom.mask_rows, nom.mask_cols)


def lifted_cost(nom: NominalLft, it: YoulaIterate) -> float:
    """Cost of the iterate: squared H2 norm of M11 + M12 (Q_dyn+Q_stat) M21.

    The assembled map must come out strictly proper; a nonzero feedthrough
    would mean the mask invariant was violated and is raised as fatal.
    """
    it.validate(nom)
    T = parallel(nom.M11, series(nom.M12, series(it.combined(), nom.M21)), 1)
    if np.max(np.abs(T.D)) > 1e-9 * max(1.0, np.max(np.abs(it.Q_stat))):
        raise ArithmeticError("performance map is not strictly proper: mask violated")
    # T is stable by construction (block-triangular with stable diagonal
    # blocks), so the norm is evaluated on the unreduced realization.
    T = T.with_feedthrough(np.zeros((T.n_outputs, T.n_inputs)))
    return h2_norm_sq(T)


@dataclass(frozen=True)
class IterateRecord:
    iter_index: int
    cost: float
    grad_norm_u: float
    q_dyn_order: int
    wall_time: float


def estimate_smoothness(nom: NominalLft) -> float:
    """Grid-plus-refinement estimate of the gradient Lipschitz constant:
    twice the product of the squared peak gains of M12 and M21."""
    h12 = hinf_norm_est(nom.M12)
    h21 = hinf_norm_est(nom.M21)
    return 2.0 * (h12**2) * (h21**2)


def static_quadratic_form(nom: NominalLft) -> np.ndarray:
    """Gram matrix of U -> ||M12 U M21||_H2^2 over static masked directions.

    Entry ((a,b),(c,d)) is the H2 inner product of M12 e_ab M21 with
    M12 e_cd M21; used for the tight smoothness bound of the static part.
    """
    rows, cols = nom.q_rows, nom.q_cols
    systems = []
    for a in range(rows):
        for b in range(cols):
            E = np.zeros((rows, cols))
            E[a, b] = 1.0
            sys_ab = minreal(
                series(nom.M12, series(static_gain(E), nom.M21)), 1e-12
            )
            sys_ab = sys_ab.with_feedthrough(np.zeros((sys_ab.n_outputs, sys_ab.n_inputs)))
            systems.append(sys_ab)
    dim = rows * cols
    G = np.zeros((dim, dim))
    for i in range(dim):
        for j in range(i, dim):
            if systems[i].n_states and systems[j].n_states:
                G[i, j] = G[j, i] = h2_inner(systems[i], systems[j])
    return G


def estimate_smoothness_tight(nom: NominalLft) -> float:
    """Smoothness estimate that also covers static directions, for use when
    the peak-gain estimate proves too small on a descent-lemma check."""
    G = static_quadratic_form(nom)
    lam = float(np.linalg.eigvalsh(0.5 * (G + G.T)).max()) if G.size else 0.0
    return max(estimate_smoothness(nom), 4.0 * lam)


def run_lifted_gradient_descent(
    nom: NominalLft,
    eta: float | None = None,
    iters: int = 14,
    trunc_tol: float = DEFAULT_TRUNC_TOL,
) -> tuple[list[IterateRecord], YoulaIterate]:
    """Fixed-step descent on the lifted cost from the zero iterate.

    Per iteration: form the sensitivity S_k, subtract eta * S_k from Q_dyn
    (with balanced truncation), and subtract eta times the masked residue
    from Q_stat.  Records cost, gradient norm, and the dynamic order at
    every iterate including the final one.
    """
    if eta is None:
        L = estimate_smoothness(nom)
        eta = min(0.1, 1.9 / L) if L > 0 else 0.1
    if eta <= 0:
        raise ValueError("step size must be positive")
    L_hat = estimate_smoothness(nom)
    if L_hat > 0 and eta >= 2.0 / L_hat:
        logger.warning(
            "step size %.3g exceeds the 2/L guideline (L estimate %.3g)", eta, L_hat
        )
    it = YoulaIterate.zero(nom)
    records: list[IterateRecord] = []
    t0 = time.perf_counter()
    for k in range(iters + 1):
        S, res_mask = frechet_gradient(nom, it, trunc_tol)
        cost = lifted_cost(nom, it)
        gnorm = norm_u((S, res_mask))
        records.append(
            IterateRecord(k, cost, gnorm, it.Q_dyn.n_states, time.perf_counter() - t0)
        )
        if k == iters:
            break
        q_next = _truncate_stable(parallel(it.Q_dyn, scaled(S, eta), -1), trunc_tol)
        q_next = q_next.with_feedthrough(np.zeros((q_next.n_outputs, q_next.n_inputs)))
        it = YoulaIterate(q_next, it.Q_stat - eta * res_mask)
        it.validate(nom)
    return records, it


def iterate_from_controller(nom: NominalLft, target: DynController) -> YoulaIterate:
    """The lifted coordinates of a conventional controller.

    For DeltaK = target - ctrl0 the static part is DeltaK itself and the
    dynamic part is DeltaK Cp (sI - Acl')^-1 Bp DeltaK built on the loop
    closed with the target controller.
    """
    plant = nom.plant
    if target.order != nom.ctrl0.order:
        raise DimensionError("target controller order must match the base controller")
    delta = target.as_packed() - nom.ctrl0.as_packed()
    cl_target = close_loop(plant, target)  # also verifies stabilization
    n, q = plant.n, target.order
    m1, m2 = plant.n_inputs, plant.n_outputs
    Bp = np.zeros((n + q, m1 + q))
    Bp[:n, :m1] = plant.B
    Bp[n:, m1:] = np.eye(q)
    Cp = np.zeros((m2 + q, n + q))
    Cp[:m2, :n] = plant.C
    Cp[m2:, n:] = np.eye(q)
    Q_dyn = StateSpace(cl_target.Acl, Bp @ delta, delta @ Cp, np.zeros_like(delta))
    return YoulaIterate(minreal(Q_dyn), delta)


def reconstruct_controller_delta(nom: NominalLft, it: YoulaIterate) -> StateSpace:
    """Invert the parameterization: DeltaK = (I + Q M22)^-1 Q with Q = Q_dyn+Q_stat.

    Realized as a feedback interconnection; well-posedness is automatic
    because M22 is strictly proper.
    """
    it.validate(nom)
    Q = it.combined()
    M = nom.M22
    loop_D = np.eye(Q.n_outputs) + Q.D @ M.D
    if abs(np.linalg.det(loop_D)) < 1e-12:
        raise ArithmeticError("singular static loop in the inverse parameterization")
    nq, nm = Q.n_states, M.n_states
    A = np.zeros((nq + nm, nq + nm))
    A[:nq, :nq] = Q.A
    A[:nq, nq:] = -Q.B @ M.C
    A[nq:, :nq] = M.B @ Q.C
    A[nq:, nq:] = M.A - M.B @ Q.D @ M.C
    B = np.vstack([Q.B, M.B @ Q.D])
    C = np.hstack([Q.C, -Q.D @ M.C])
    D = Q.D
    return minreal(StateSpace(A, B, C, D))


def assemble_controller(ctrl0: DynController, delta: StateSpace) -> DynController:
    """Absorb a controller perturbation DeltaK into the base controller.

    DeltaK feeds back around the base controller's state equation: its
    output splits into a direct control correction and a filter-state
    correction, and its inputs are the measurement and the filter state.
    The top-left feedthrough block of DeltaK must be zero so the assembled
    controller remains strictly proper.
    """
    q = ctrl0.order
    m1 = ctrl0.C_K.shape[0]
    m2 = ctrl0.B_K.shape[1]
    if (delta.n_outputs, delta.n_inputs) != (m1 + q, m2 + q):
        raise DimensionError("delta has wrong dimensions for this controller")
    if delta.n_states == 0 and not np.any(delta.D):
        return ctrl0
    D = delta.D
    if np.max(np.abs(D[:m1, :m2])) > 1e-9 * max(1.0, np.max(np.abs(D))):
        raise ValueError("delta feedthrough mask block must be zero")
    D12 = D[:m1, m2:]
    D21 = D[m1:, :m2]
    D22 = D[m1:, m2:]
    C1d = delta.C[:m1, :]
    C2d = delta.C[m1:, :]
    B1d = delta.B[:, :m2]
    B2d = delta.B[:, m2:]
    nd = delta.n_states
    A_new = np.zeros((q + nd, q + nd))
    A_new[:q, :q] = ctrl0.A_K + D22
    A_new[:q, q:] = C2d
    A_new[q:, :q] = B2d
    A_new[q:, q:] = delta.A
    B_new = np.vstack([ctrl0.B_K + D21, B1d])
    C_new = np.hstack([ctrl0.C_K + D12, C1d])
    reduced = minreal(StateSpace(A_new, B_new, C_new, np.zeros((m1, m2))))
    return DynController(reduced.A, reduced.B, reduced.C)
