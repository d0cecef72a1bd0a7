"""State-space algebra for rational transfer matrices.

Every frequency-domain object in this package is carried as a real
state-space quadruple (A, B, C, D) with transfer matrix
G(s) = C (sI - A)^-1 B + D.  The module provides the compositions
(series, parallel, para-Hermitian conjugation), the additive
stable/anti-stable decomposition, H2 norms and inner products via
Gramians, balanced-truncation minimal realizations, and conversion from
scalar rational functions.

All operations are pure; `StateSpace` values are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import AxisPoleError, DimensionError, UnstableError

# Stability margin: eigenvalues must satisfy Re(lambda) < -EPS_STAB.
EPS_STAB = 1e-9
# Minimum distance of eigenvalues from the imaginary axis for the
# stable/anti-stable split to be well posed.
EPS_SPLIT = 1e-8
# Default relative Hankel singular value threshold for minreal.
MINREAL_TOL = 1e-8


def _as_matrix(value, name):
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be a 2-D matrix, got ndim={arr.ndim}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class StateSpace:
    """Immutable state-space realization of a rational transfer matrix."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        C = _as_matrix(self.C, "C")
        D = _as_matrix(self.D, "D")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise DimensionError(f"B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise DimensionError(f"C has {C.shape[1]} cols, expected {n}")
        if D.shape != (C.shape[0], B.shape[1]):
            raise DimensionError(
                f"D has shape {D.shape}, expected {(C.shape[0], B.shape[1])}"
            )
        for name, arr in (("A", A), ("B", B), ("C", C), ("D", D)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    def poles(self) -> np.ndarray:
        return np.linalg.eigvals(self.A) if self.n_states else np.zeros(0, complex)

    def is_stable(self, eps: float = EPS_STAB) -> bool:
        if self.n_states == 0:
            return True
        return bool(np.max(self.poles().real) < -eps)

    def is_strictly_proper(self) -> bool:
        return not np.any(self.D)

    def with_feedthrough(self, D) -> "StateSpace":
        return StateSpace(self.A, self.B, self.C, D)

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "C": self.C.tolist(),
            "D": self.D.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StateSpace":
        missing = {"A", "B", "C", "D"} - set(data)
        if missing:
            raise ValueError(f"state-space JSON missing keys: {sorted(missing)}")
        D = np.asarray(data["D"], dtype=float)
        n = len(data["A"])
        return cls(
            np.asarray(data["A"], dtype=float) if n else np.zeros((0, 0)),
            np.asarray(data["B"], dtype=float) if n else np.zeros((0, D.shape[1])),
            np.asarray(data["C"], dtype=float).reshape(D.shape[0], n),
            D,
        )


def zero_system(n_outputs: int, n_inputs: int) -> StateSpace:
    """The identically-zero transfer matrix with no states."""
    return StateSpace(
        np.zeros((0, 0)),
        np.zeros((0, n_inputs)),
        np.zeros((n_outputs, 0)),
        np.zeros((n_outputs, n_inputs)),
    )


def static_gain(D) -> StateSpace:
    """A constant transfer matrix G(s) = D."""
    D = np.atleast_2d(np.asarray(D, dtype=float))
    return StateSpace(np.zeros((0, 0)), np.zeros((0, D.shape[1])), np.zeros((D.shape[0], 0)), D)


def scaled(g: StateSpace, alpha: float) -> StateSpace:
    """alpha * G(s)."""
    return StateSpace(g.A, g.B, alpha * g.C, alpha * g.D)


def series(g: StateSpace, h: StateSpace) -> StateSpace:
    """Realize the product G(s) H(s); the signal passes through H first."""
    if g.n_inputs != h.n_outputs:
        raise DimensionError(
            f"series: G expects {g.n_inputs} inputs, H supplies {h.n_outputs} outputs"
        )
    ng, nh = g.n_states, h.n_states
    A = np.zeros((ng + nh, ng + nh))
    A[:ng, :ng] = g.A
    A[:ng, ng:] = g.B @ h.C
    A[ng:, ng:] = h.A
    B = np.vstack([g.B @ h.D, h.B])
    C = np.hstack([g.C, g.D @ h.C])
    D = g.D @ h.D
    return StateSpace(A, B, C, D)


def parallel(g: StateSpace, h: StateSpace, sign: int = 1) -> StateSpace:
    """Realize G(s) + sign * H(s) on a block-diagonal state."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if (g.n_inputs, g.n_outputs) != (h.n_inputs, h.n_outputs):
        raise DimensionError("parallel: input/output dimensions must match")
    ng, nh = g.n_states, h.n_states
    A = np.zeros((ng + nh, ng + nh))
    A[:ng, :ng] = g.A
    A[ng:, ng:] = h.A
    B = np.vstack([g.B, h.B])
    C = np.hstack([g.C, sign * h.C])
    D = g.D + sign * h.D
    return StateSpace(A, B, C, D)


def para_conjugate(g: StateSpace) -> StateSpace:
    """Realize G~(s) = G(-s)^T.  Stable inputs become anti-stable."""
    return StateSpace(-g.A.T, -g.C.T, g.B.T, g.D.T)


def freq_response(g: StateSpace, omega: float) -> np.ndarray:
    """Evaluate G(j omega) by a direct complex linear solve."""
    if g.n_states == 0:
        return g.D.astype(complex)
    M = 1j * omega * np.eye(g.n_states) - g.A
    try:
        X = np.linalg.solve(M, g.B)
    except np.linalg.LinAlgError as exc:
        raise AxisPoleError(f"j*{omega} is an eigenvalue of A") from exc
    return g.C @ X + g.D


def _ordered_stable_split(A, eps_split):
    """Orthogonal similarity pushing stable eigenvalues to the leading block.

    Returns (T, Z, k) with T = Z^T A Z quasi-triangular and the first k
    states spanning the stable invariant subspace.  Raises AxisPoleError if
    any eigenvalue is within eps_split of the imaginary axis.
    """
    eigs = np.linalg.eigvals(A)
    if np.any(np.abs(eigs.real) <= eps_split):
        worst = eigs[np.argmin(np.abs(eigs.real))]
        raise AxisPoleError(
            f"eigenvalue {worst} within {eps_split} of the imaginary axis"
        )
    T, Z, k = sla.schur(A, output="real", sort=lambda re, im: re < 0.0)
    return T, Z, k


def stable_antistable_split(
    g: StateSpace, eps_split: float = EPS_SPLIT
) -> tuple[StateSpace, StateSpace]:
    """Additive decomposition G = G_stable + G_anti.

    The anti-stable term is strictly proper; the feedthrough D stays with
    the stable term.  Requires no eigenvalue within eps_split of the axis.
    """
    n = g.n_states
    if n == 0:
        return g, zero_system(g.n_outputs, g.n_inputs)
    T, Z, k = _ordered_stable_split(g.A, eps_split)
    Bz = Z.T @ g.B
    Cz = g.C @ Z
    if k == n:
        return StateSpace(T, Bz, Cz, g.D), zero_system(g.n_outputs, g.n_inputs)
    if k == 0:
        return (
            static_gain(g.D) if np.any(g.D) else zero_system(g.n_outputs, g.n_inputs),
            StateSpace(T, Bz, Cz, np.zeros_like(g.D)),
        )
    A11, A12, A22 = T[:k, :k], T[:k, k:], T[k:, k:]
    # Decouple with X solving A11 X - X A22 + A12 = 0, i.e. the similarity
    # [[I, X], [0, I]] block-diagonalizes the quasi-triangular form.
    X = sla.solve_sylvester(A11, -A22, -A12)
    # In the decoupled coordinates: B <- S^-1 Bz, C <- Cz S with S = [[I,X],[0,I]].
    B1 = Bz[:k] - X @ Bz[k:]
    B2 = Bz[k:]
    C1 = Cz[:, :k]
    C2 = Cz[:, :k] @ X + Cz[:, k:]
    stable = StateSpace(A11, B1, C1, g.D)
    anti = StateSpace(A22, B2, C2, np.zeros_like(g.D))
    return stable, anti


def stable_projection(g: StateSpace, eps_split: float = EPS_SPLIT) -> StateSpace:
    """The stable term of the unique stable/anti-stable decomposition."""
    return stable_antistable_split(g, eps_split)[0]


def stable_residue_sum(g: StateSpace, eps_split: float = EPS_SPLIT) -> np.ndarray:
    """Sum of the matrix residues of a strictly proper G at its stable poles.

    Equals C_s B_s for the stable subsystem of the additive decomposition.
    """
    if np.any(g.D):
        raise ValueError("stable_residue_sum requires a strictly proper system")
    stable, _ = stable_antistable_split(g, eps_split)
    if stable.n_states == 0:
        return np.zeros((g.n_outputs, g.n_inputs))
    return stable.C @ stable.B


def _require_stable_strictly_proper(g, what):
    if not g.is_strictly_proper():
        raise ValueError(f"{what} requires a strictly proper system")
    if not g.is_stable():
        raise UnstableError(f"{what} requires a stable system")


def gramian_ctrb(g: StateSpace) -> np.ndarray:
    """Controllability Gramian P of a stable system: A P + P A^T + B B^T = 0."""
    if g.n_states == 0:
        return np.zeros((0, 0))
    P = sla.solve_continuous_lyapunov(g.A, -g.B @ g.B.T)
    return 0.5 * (P + P.T)


def gramian_obsv(g: StateSpace) -> np.ndarray:
    """Observability Gramian X of a stable system: A^T X + X A + C^T C = 0."""
    if g.n_states == 0:
        return np.zeros((0, 0))
    X = sla.solve_continuous_lyapunov(g.A.T, -g.C.T @ g.C)
    return 0.5 * (X + X.T)


def h2_norm_sq(g: StateSpace) -> float:
    """Squared H2 norm tr(B^T X B) with X the observability Gramian."""
    _require_stable_strictly_proper(g, "h2_norm_sq")
    if g.n_states == 0:
        return 0.0
    X = gramian_obsv(g)
    return float(max(np.trace(g.B.T @ X @ g.B), 0.0))


def h2_inner(g: StateSpace, h: StateSpace) -> float:
    """H2 inner product of two stable strictly proper systems.

    Computed as tr(B_g^T Y B_h) with Y the cross block of the joint
    observability Gramian of the stacked realization, i.e. the solution of
    A_g^T Y + Y A_h + C_g^T C_h = 0.
    """
    if (g.n_inputs, g.n_outputs) != (h.n_inputs, h.n_outputs):
        raise DimensionError("h2_inner requires matching dimensions")
    _require_stable_strictly_proper(g, "h2_inner")
    _require_stable_strictly_proper(h, "h2_inner")
    if g.n_states == 0 or h.n_states == 0:
        return 0.0
    Y = sla.solve_sylvester(g.A.T, h.A, -g.C.T @ h.C)
    return float(np.trace(g.B.T @ Y @ h.B))


def _mirror(g: StateSpace) -> StateSpace:
    # G(-s): reflects anti-stable spectra into the left half-plane.
    return StateSpace(-g.A, g.B, -g.C, g.D)


def _balanced_truncation_stable(g: StateSpace, tol: float) -> StateSpace:
    """Square-root balanced truncation of a stable system."""
    n = g.n_states
    if n == 0:
        return g
    P = gramian_ctrb(g)
    Q = gramian_obsv(g)

    def factor(M):
        w, V = np.linalg.eigh(M)
        w = np.clip(w, 0.0, None)
        keep = w > (w.max() if w.size else 0.0) * 1e-14
        if not np.any(keep):
            return np.zeros((M.shape[0], 0))
        return V[:, keep] * np.sqrt(w[keep])

    Lc = factor(P)
    Lo = factor(Q)
    if Lc.shape[1] == 0 or Lo.shape[1] == 0:
        return zero_system(g.n_outputs, g.n_inputs).with_feedthrough(g.D)
    U, sv, Vt = np.linalg.svd(Lo.T @ Lc, full_matrices=False)
    # Drop both the relatively negligible directions and anything at the
    # numerical noise floor of the factored product.
    floor = 30 * np.finfo(float).eps * np.linalg.norm(Lo, 2) * np.linalg.norm(Lc, 2)
    thresh = max(tol * (sv[0] if sv.size else 0.0), floor)
    r = int(np.sum(sv > thresh))
    if r == 0:
        return zero_system(g.n_outputs, g.n_inputs).with_feedthrough(g.D)
    s_half = 1.0 / np.sqrt(sv[:r])
    T = Lc @ Vt[:r].T * s_half
    Tinv = (U[:, :r] * s_half).T @ Lo.T
    return StateSpace(Tinv @ g.A @ T, Tinv @ g.B, g.C @ T, g.D)


def minreal(g: StateSpace, tol: float = MINREAL_TOL) -> StateSpace:
    """Balanced-truncation minimal realization.

    Keeps the Hankel singular values above tol times the largest one; the
    stable and anti-stable parts are reduced separately (the anti-stable part
    via its mirror image) and re-joined.
    """
    if g.n_states == 0:
        return g
    eigs = np.linalg.eigvals(g.A)
    if np.all(eigs.real < -EPS_SPLIT):
        return _balanced_truncation_stable(g, tol)
    if np.all(eigs.real > EPS_SPLIT):
        return _mirror(_balanced_truncation_stable(_mirror(g), tol))
    stable, anti = stable_antistable_split(g)
    red_s = _balanced_truncation_stable(stable, tol)
    red_a = _mirror(_balanced_truncation_stable(_mirror(anti), tol))
    return parallel(red_s, red_a, 1)


def hinf_norm_est(
    g: StateSpace,
    w_lo: float = 1e-3,
    w_hi: float = 1e4,
    n_grid: int = 400,
) -> float:
    """Estimate the H-infinity norm by a log-grid sweep with golden-section refinement."""
    grid = np.concatenate([[0.0], np.logspace(np.log10(w_lo), np.log10(w_hi), n_grid)])
    gains = np.array([np.linalg.norm(freq_response(g, w), 2) for w in grid])
    k = int(np.argmax(gains))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]
    if hi <= lo:
        return float(gains[k])
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - phi * (b - a)
    x2 = a + phi * (b - a)
    f1 = np.linalg.norm(freq_response(g, x1), 2)
    f2 = np.linalg.norm(freq_response(g, x2), 2)
    for _ in range(60):
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + phi * (b - a)
            f2 = np.linalg.norm(freq_response(g, x2), 2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - phi * (b - a)
            f1 = np.linalg.norm(freq_response(g, x1), 2)
        if b - a < 1e-10 * max(1.0, b):
            break
    return float(max(gains[k], f1, f2))


@dataclass(frozen=True)
class RationalScalar:
    """Scalar rational function num(s)/den(s), coefficients in ascending powers.

    The denominator is normalized to be monic on construction.
    """

    num: np.ndarray
    den: np.ndarray

    def __post_init__(self):
        num = np.atleast_1d(np.asarray(self.num, dtype=float))
        den = np.atleast_1d(np.asarray(self.den, dtype=float))
        if den.size == 0:
            raise ValueError("denominator must be non-empty")
        lead = den[-1]
        if abs(lead) < 1e-300:
            raise ValueError("denominator leading coefficient is zero")
        num = num / lead
        den = den / lead
        num.setflags(write=False)
        den.setflags(write=False)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @property
    def num_degree(self) -> int:
        return self.num.size - 1

    @property
    def den_degree(self) -> int:
        return self.den.size - 1

    def __call__(self, s):
        s = np.asarray(s, dtype=complex)
        return np.polynomial.polynomial.polyval(
            s, self.num
        ) / np.polynomial.polynomial.polyval(s, self.den)


def ss_entry_to_rational(
    g: StateSpace, i: int, j: int, tol: float = 1e-10
) -> RationalScalar | None:
    """Exact minimal rational form of one transfer-matrix entry.

    The entry subsystem is reduced to a minimal realization; the denominator
    is its characteristic polynomial and the numerator is recovered by
    interpolation at pole-free real points.  Returns None for a structurally
    zero entry.
    """
    sub = minreal(
        StateSpace(g.A, g.B[:, j : j + 1], g.C[i : i + 1, :], g.D[i : i + 1, j : j + 1]),
        tol,
    )
    n = sub.n_states
    if n == 0:
        if abs(sub.D[0, 0]) == 0.0:
            return None
        return RationalScalar([sub.D[0, 0]], [1.0])
    den_desc = np.poly(sub.A)  # monic, descending powers
    den = den_desc[::-1]
    n_num = n if np.any(sub.D) else n - 1
    radius = 1.0 + np.abs(np.linalg.eigvals(sub.A)).max()
    points = radius * (1.0 + np.arange(n_num + 1))
    den_vals = np.polynomial.polynomial.polyval(points, den)
    g_vals = np.array(
        [
            (sub.C @ np.linalg.solve(p * np.eye(n) - sub.A, sub.B) + sub.D)[0, 0]
            for p in points
        ]
    )
    V = np.vander(points, n_num + 1, increasing=True)
    num = np.linalg.solve(V, g_vals * den_vals)
    return RationalScalar(num, den)


def rational_to_ss(r: RationalScalar) -> StateSpace:
    """Controllable-canonical realization of a proper scalar rational function."""
    num = np.trim_zeros(r.num, "b")
    den = r.den
    n = den.size - 1
    if num.size == 0:
        return zero_system(1, 1)
    if num.size - 1 > n:
        raise ValueError("improper rational function: deg(num) > deg(den)")
    if n == 0:
        return static_gain([[num[0]]])
    num_full = np.zeros(n + 1)
    num_full[: num.size] = num
    d = num_full[n]
    c = num_full[:n] - d * den[:n]
    A = np.zeros((n, n))
    if n > 1:
        A[: n - 1, 1:] = np.eye(n - 1)
    A[-1, :] = -den[:n]
    B = np.zeros((n, 1))
    B[-1, 0] = 1.0
    C = c.reshape(1, n)
    D = np.array([[d]])
    return StateSpace(A, B, C, D)
