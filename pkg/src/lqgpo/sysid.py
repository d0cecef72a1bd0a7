"""Data-driven estimation: frequency-response acquisition, rational fitting,
Laguerre-basis expansion of the sensitivity system, and Monte-Carlo
zeroth-order estimation of the masked residue.

The sine-excitation simulator and the zeroth-order estimator are written
against the noise-free setting; they validate the estimation pipeline
itself rather than robustness to measurement noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IdentifiabilityError
from .ss import RationalScalar, StateSpace, freq_response, h2_inner, parallel, scaled
from .youla import NominalLft, YoulaIterate, lifted_cost

# Sampled responses uniformly below this (relative to the excitation
# amplitude) are declared structurally zero channels.
STRUCTURAL_ZERO_TOL = 1e-10


@dataclass(frozen=True)
class FreqSample:
    """One frequency-response measurement: value of G(j omega) with a weight."""

    omega: float
    value: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        if self.weight <= 0:
            raise ValueError("weight must be positive")
        object.__setattr__(self, "value", np.atleast_2d(np.asarray(self.value, complex)))


def default_grid(n_points: int = 200, lo: float = 0.1, hi: float = 100.0, spacing: str = "log") -> np.ndarray:
    if spacing == "log":
        return np.logspace(np.log10(lo), np.log10(hi), n_points)
    if spacing == "linear":
        return np.linspace(lo, hi, n_points)
    raise ValueError(f"unknown spacing {spacing!r}")


def measure_response_direct(g: StateSpace, grid) -> list[FreqSample]:
    """Noise-free frequency samples of the full response matrix, weight 1."""
    return [FreqSample(float(w), freq_response(g, float(w))) for w in grid]


def _rk4_step_ops(A, b, h):
    """Propagation matrix and input weights of one fixed-step RK4 update."""
    n = A.shape[0]

    def update(x, u1, u2, u3):
        k1 = A @ x + b * u1
        k2 = A @ (x + 0.5 * h * k1) + b * u2
        k3 = A @ (x + 0.5 * h * k2) + b * u2
        k4 = A @ (x + h * k3) + b * u3
        return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    M0 = np.column_stack([update(e, 0.0, 0.0, 0.0) for e in np.eye(n)]) if n else np.zeros((0, 0))
    z = np.zeros(n)
    w1 = update(z, 1.0, 0.0, 0.0)
    w2 = update(z, 0.0, 1.0, 0.0)
    w3 = update(z, 0.0, 0.0, 1.0)
    return M0, w1, w2, w3


def sine_response(
    g: StateSpace,
    omega: float,
    c_omega: float = 1.0,
    settle_cycles: int = 20,
    sample_cycles: int = 10,
    step: float | None = None,
) -> np.ndarray:
    """Estimate G(j omega) by simulating sinusoidal excitation channel by channel.

    Each input channel is driven with c_omega * sin(omega t) through a
    fixed-step classical RK4 integrator; after settle_cycles periods the
    outputs are least-squares fit to alpha sin + beta cos over
    sample_cycles periods, giving the response (alpha + j beta) / c_omega.
    """
    if not g.is_stable():
        raise ValueError("sine excitation requires a stable system")
    if omega <= 0 or c_omega <= 0:
        raise ValueError("omega and c_omega must be positive")
    h = min(0.01, 0.05 / omega) if step is None else float(step)
    if omega * h > 0.2:
        raise ValueError(f"step {h} too coarse for omega {omega} (omega*h > 0.2)")
    period = 2.0 * math.pi / omega
    n_settle = int(np.ceil(settle_cycles * period / h))
    n_sample = int(np.ceil(sample_cycles * period / h))
    n_total = n_settle + n_sample
    t = np.arange(n_total + 1) * h
    u_full = c_omega * np.sin(omega * t)
    u_mid = c_omega * np.sin(omega * (t + 0.5 * h))
    t_s = t[n_settle:]
    design = np.column_stack([np.sin(omega * t_s), np.cos(omega * t_s)])
    out = np.zeros((g.n_outputs, g.n_inputs), dtype=complex)
    for j in range(g.n_inputs):
        M0, w1, w2, w3 = _rk4_step_ops(g.A, g.B[:, j], h)
        x = np.zeros(g.n_states)
        ys = np.empty((n_sample + 1, g.n_outputs))
        for k in range(n_total + 1):
            if k >= n_settle:
                ys[k - n_settle] = g.C @ x + g.D[:, j] * u_full[k]
            if k < n_total:
                x = M0 @ x + w1 * u_full[k] + w2 * u_mid[k] + w3 * u_full[k + 1]
        coef, *_ = np.linalg.lstsq(design, ys, rcond=None)
        out[:, j] = (coef[0] + 1j * coef[1]) / c_omega
    return out


def fit_rational(samples: list[FreqSample], num_deg: int, den_deg: int) -> RationalScalar:
    """Linearized least-squares fit of a scalar rational function.

    Solves min || sum a_k s^k - M(s) (s^n2 + sum b_k s^k) || over the grid
    with the denominator normalized monic, stacking real and imaginary
    parts of every weighted sample.  Raises IdentifiabilityError when the
    design matrix is rank deficient.
    """
    n_unknowns = num_deg + 1 + den_deg
    if len(samples) < num_deg + den_deg + 1:
        raise IdentifiabilityError(
            f"need at least {num_deg + den_deg + 1} samples, got {len(samples)}"
        )
    rows = []
    rhs = []
    for sample in samples:
        value = complex(sample.value.reshape(-1)[0])
        s = 1j * sample.omega
        powers = s ** np.arange(max(num_deg, den_deg) + 1)
        row = np.concatenate(
            [powers[: num_deg + 1], -value * powers[:den_deg]]
        )
        rows.append(sample.weight * row)
        rhs.append(sample.weight * value * powers[den_deg])
    A = np.array(rows)
    b = np.array(rhs)
    A_real = np.vstack([A.real, A.imag])
    b_real = np.concatenate([b.real, b.imag])
    col_scale = np.linalg.norm(A_real, axis=0)
    col_scale[col_scale == 0] = 1.0
    x, _, rank, sv = np.linalg.lstsq(A_real / col_scale, b_real, rcond=None)
    if rank < n_unknowns:
        cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
        raise IdentifiabilityError(
            "unidentifiable: rank-deficient normal system",
            condition=cond,
            rank=int(rank),
            unknowns=n_unknowns,
        )
    x = x / col_scale
    num = x[: num_deg + 1]
    den = np.concatenate([x[num_deg + 1 :], [1.0]])
    return RationalScalar(num, den)


def identify_m22(
    g: StateSpace,
    grid,
    degrees,
    mode: str = "direct",
    c_omega: float = 1.0,
    zero_tol: float = STRUCTURAL_ZERO_TOL,
    sine_kwargs: dict | None = None,
) -> list[list[RationalScalar | None]]:
    """Fit every entry of a transfer matrix individually.

    `degrees` is either one (num_deg, den_deg) pair for all entries or a
    dict keyed by (i, j).  Entries whose sampled response stays below
    zero_tol * c_omega across the grid are reported as structurally zero
    (None) and skipped.
    """
    grid = np.asarray(list(grid), dtype=float)
    if mode == "direct":
        responses = np.array([freq_response(g, w) for w in grid])
    elif mode == "sine":
        kwargs = sine_kwargs or {}
        responses = np.array(
            [sine_response(g, w, c_omega=c_omega, **kwargs) for w in grid]
        )
    else:
        raise ValueError(f"unknown mode {mode!r}")
    result: list[list[RationalScalar | None]] = []
    for i in range(g.n_outputs):
        row: list[RationalScalar | None] = []
        for j in range(g.n_inputs):
            values = responses[:, i, j]
            if np.max(np.abs(values)) < zero_tol * c_omega:
                row.append(None)
                continue
            n1, n2 = degrees[(i, j)] if isinstance(degrees, dict) else degrees
            samples = [FreqSample(w, v) for w, v in zip(grid, values)]
            row.append(fit_rational(samples, n1, n2))
        result.append(row)
    return result


@dataclass(frozen=True)
class LaguerreBasis:
    """Orthonormal H2 basis sqrt(2a)/(s+a) * ((s-a)/(s+a))^k, k = 0..order."""

    pole: float
    order: int

    def __post_init__(self):
        if self.pole <= 0:
            raise ValueError("pole must be positive")
        if self.order < 0:
            raise ValueError("order must be nonnegative")

    def chain(self) -> StateSpace:
        """One-input system whose outputs are the first order+1 basis functions.

        The k-th output only involves the first k+1 states of the chain, so
        truncating states is exact for lower-order functions.
        """
        a = self.pole
        n = self.order + 1
        root = math.sqrt(2.0 * a)
        A = -2.0 * a * np.tril(np.ones((n, n)), -1)
        np.fill_diagonal(A, -a)
        A[1:, 0] = root
        B = np.zeros((n, 1))
        B[0, 0] = 1.0
        C = -2.0 * a * np.tril(np.ones((n, n)))
        C[:, 0] = root
        return StateSpace(A, B, C, np.zeros((n, 1)))

    def function(self, k: int) -> StateSpace:
        """SISO realization of the k-th basis function."""
        if not 0 <= k <= self.order:
            raise ValueError(f"k must be in [0, {self.order}]")
        chain = self.chain()
        m = k + 1
        return StateSpace(
            chain.A[:m, :m], chain.B[:m], chain.C[k : k + 1, :m], np.zeros((1, 1))
        )


def _entry_subsystem(g: StateSpace, i: int, j: int) -> StateSpace:
    return StateSpace(g.A, g.B[:, j : j + 1], g.C[i : i + 1, :], np.zeros((1, 1)))


def laguerre_project(s_true: StateSpace, basis: LaguerreBasis) -> np.ndarray:
    """Per-entry expansion coefficients <S_ij, phi_k> of a stable strictly
    proper system; shape (outputs, inputs, order+1)."""
    out = np.zeros((s_true.n_outputs, s_true.n_inputs, basis.order + 1))
    funcs = [basis.function(k) for k in range(basis.order + 1)]
    for i in range(s_true.n_outputs):
        for j in range(s_true.n_inputs):
            sub = _entry_subsystem(s_true, i, j)
            if sub.n_states == 0:
                continue
            for k, phi in enumerate(funcs):
                out[i, j, k] = h2_inner(sub, phi)
    return out


def laguerre_reconstruct(coeffs: np.ndarray, basis: LaguerreBasis) -> StateSpace:
    """Assemble the truncated expansion sum_k c_k(i,j) phi_k as one system."""
    coeffs = np.asarray(coeffs, dtype=float)
    p, m, n_fun = coeffs.shape
    if n_fun != basis.order + 1:
        raise ValueError("coefficient count must match the basis order")
    chain = basis.chain()
    nc = chain.n_states
    A = np.kron(np.eye(m), chain.A)
    B = np.zeros((m * nc, m))
    C = np.zeros((p, m * nc))
    for j in range(m):
        B[j * nc : (j + 1) * nc, j : j + 1] = chain.B
        C[:, j * nc : (j + 1) * nc] = coeffs[:, j, :] @ chain.C
    return StateSpace(A, B, C, np.zeros((p, m)))


def laguerre_coeffs_zeroth(
    nom: NominalLft,
    it: YoulaIterate,
    basis: LaguerreBasis,
    c_step: float = 1e-5,
) -> np.ndarray:
    """Expansion coefficients of the sensitivity system from cost probes.

    Each coefficient is the symmetric difference quotient of the lifted cost
    along the matching basis direction, (J(+c) - J(-c)) / (4c); the factor
    accounts for the derivative carrying twice the sensitivity system.
    """
    rows, cols = nom.q_rows, nom.q_cols
    out = np.zeros((rows, cols, basis.order + 1))
    for k in range(basis.order + 1):
        phi = basis.function(k)
        for i in range(rows):
            for j in range(cols):
                B_emb = np.zeros((phi.n_states, cols))
                B_emb[:, j] = phi.B[:, 0]
                C_emb = np.zeros((rows, phi.n_states))
                C_emb[i, :] = phi.C[0, :]
                direction = StateSpace(phi.A, B_emb, C_emb, np.zeros((rows, cols)))
                plus = YoulaIterate(
                    parallel(it.Q_dyn, scaled(direction, c_step), 1), it.Q_stat
                )
                minus = YoulaIterate(
                    parallel(it.Q_dyn, scaled(direction, -c_step), 1), it.Q_stat
                )
                out[i, j, k] = (
                    lifted_cost(nom, plus) - lifted_cost(nom, minus)
                ) / (4.0 * c_step)
    return out


def reduce_order(
    coeffs_entry: np.ndarray,
    basis: LaguerreBasis,
    num_deg: int,
    den_deg: int,
    grid,
    weighting: str = "h2",
) -> RationalScalar:
    """Fit a reduced-order rational function to one entry's Laguerre expansion.

    The expansion is evaluated on the grid and passed through the rational
    least-squares fit.  The default "h2" weighting combines trapezoid
    quadrature cell widths with a denominator-magnitude rolloff, which
    compensates the high-frequency amplification of the linearized residual
    and makes the weighted fit track the H2 error; "flat" uses unit weights.
    """
    coeffs_entry = np.asarray(coeffs_entry, dtype=float).reshape(1, 1, -1)
    expansion = laguerre_reconstruct(coeffs_entry, basis)
    grid = np.asarray(list(grid), dtype=float)
    if weighting == "h2":
        edges = np.concatenate(
            [[grid[0]], np.sqrt(grid[:-1] * grid[1:]), [grid[-1]]]
        )
        weights = np.sqrt(np.diff(edges)) / (1.0 + grid**2) ** (den_deg / 2.0)
    elif weighting == "flat":
        weights = np.ones_like(grid)
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    samples = [
        FreqSample(float(w), freq_response(expansion, float(w)), float(wt))
        for w, wt in zip(grid, weights)
    ]
    return fit_rational(samples, num_deg, den_deg)


@dataclass(frozen=True)
class ZoConfig:
    """Monte-Carlo settings for the zeroth-order residue estimator."""

    radius: float
    samples: int
    seed: int

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.samples <= 0:
            raise ValueError("samples must be positive")


def _masked_positions(shape, mask_rows, mask_cols):
    rows, cols = shape
    return [
        (i, j)
        for i in range(rows)
        for j in range(cols)
        if not (i < mask_rows and j < mask_cols)
    ]


def zo_gradient_estimate(cost_fn, shape, mask_rows, mask_cols, cfg: ZoConfig) -> np.ndarray:
    """Two-point sphere-sampling gradient estimate over the masked subspace.

    Directions are uniform on the Frobenius-norm sphere of radius cfg.radius
    inside the subspace of matrices with zero top-left mask block.  Each
    sample draws from an independent substream of the master seed and the
    sum is accumulated in sample order, so the result is reproducible.
    """
    positions = _masked_positions(shape, mask_rows, mask_cols)
    d = len(positions)
    acc = np.zeros(shape)
    factor = d / (2.0 * cfg.radius**2)
    for i in range(cfg.samples):
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(i,)))
        v = rng.standard_normal(d)
        v *= cfg.radius / np.linalg.norm(v)
        U = np.zeros(shape)
        for (r, c), val in zip(positions, v):
            U[r, c] = val
        diff = cost_fn(U) - cost_fn(-U)
        if not np.isfinite(diff):
            raise ArithmeticError("non-finite cost probe in zeroth-order estimate")
        acc += factor * diff * U
    return acc / cfg.samples


class _StaticQuadraticCost:
    """Exact quadratic model of the lifted cost over the static masked block.

    The lifted cost is an exactly quadratic polynomial in the static
    parameter (the performance map is affine in it and the squared H2 norm
    is quadratic), so the model built from finitely many exact cost probes
    reproduces every evaluation; it exists purely to make large Monte-Carlo
    sweeps cheap.
    """

    def __init__(self, nom: NominalLft, it: YoulaIterate, probe_scale: float = 1.0):
        self.nom = nom
        self.it = it
        shape = (nom.q_rows, nom.q_cols)
        positions = _masked_positions(shape, nom.mask_rows, nom.mask_cols)
        self.positions = positions
        d = len(positions)
        h = probe_scale

        def honest(U):
            return lifted_cost(nom, YoulaIterate(it.Q_dyn, it.Q_stat + U))

        self.honest = honest
        self.j0 = honest(np.zeros(shape))
        basis = []
        for r, c in positions:
            E = np.zeros(shape)
            E[r, c] = h
            basis.append(E)
        j_plus = np.array([honest(E) for E in basis])
        j_minus = np.array([honest(-E) for E in basis])
        self.g = (j_plus - j_minus) / (2.0 * h)
        H = np.zeros((d, d))
        diag = (j_plus + j_minus - 2.0 * self.j0) / h**2
        np.fill_diagonal(H, diag)
        for a in range(d):
            for b in range(a + 1, d):
                jab = honest(basis[a] + basis[b])
                H[a, b] = H[b, a] = (
                    jab - j_plus[a] - j_plus[b] + self.j0
                ) / h**2
        self.H = H

    def flatten(self, U):
        return np.array([U[r, c] for r, c in self.positions])

    def __call__(self, U):
        u = self.flatten(U)
        return float(self.j0 + self.g @ u + 0.5 * u @ self.H @ u)


def zo_residue_estimate(
    nom: NominalLft, it: YoulaIterate, cfg: ZoConfig, fast: bool = True
) -> np.ndarray:
    """Zeroth-order estimate of the static-part gradient 2*mask(Res(S)).

    With fast=True the cost oracle is replaced by its exact quadratic model
    (validated against a direct evaluation); the Monte-Carlo estimate itself
    is unchanged.
    """
    it.validate(nom)
    shape = (nom.q_rows, nom.q_cols)
    if fast:
        model = _StaticQuadraticCost(nom, it)
        probe = np.zeros(shape)
        pos = model.positions[-1]
        probe[pos] = 0.37
        direct = model.honest(probe)
        modeled = model(probe)
        if abs(direct - modeled) > 1e-8 * max(1.0, abs(direct)):
            raise ArithmeticError("quadratic cost model failed validation")
        cost_fn = model
    else:
        def cost_fn(U):
            return lifted_cost(nom, YoulaIterate(it.Q_dyn, it.Q_stat + U))

    return zo_gradient_estimate(cost_fn, shape, nom.mask_rows, nom.mask_cols, cfg)
