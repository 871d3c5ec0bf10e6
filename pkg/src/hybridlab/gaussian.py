"""Exact Gaussian phase-space backend.

The three-mode system (probe Q, probe Q', mediator C) is tracked through
a 6-vector of means and a 6x6 covariance matrix in the canonical ordering
(q, p, q', p', x, k).  The interaction Hamiltonian is quadratic, so the
evolution is an exact symplectic linear map and every diagnostic
(entanglement, witness, CHSH, moment tomography) reduces to linear
algebra on the moments.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import expm

# Canonical index layout, fixed project-wide.
IDX_Q, IDX_P, IDX_QP, IDX_PP, IDX_X, IDX_K = range(6)
MODE_SLICES = {"Q": slice(0, 2), "Qprime": slice(2, 4), "C": slice(4, 6)}


class PhysicalityError(ValueError):
    """Covariance matrix violates the uncertainty relation."""


class DegenerateDesignError(ValueError):
    """Moment-inversion design matrix is rank deficient."""


def symplectic_form(n_modes: int = 3) -> np.ndarray:
    """Block-diagonal symplectic form diag([[0,1],[-1,0]] x n_modes)."""
    j = np.array([[0.0, 1.0], [-1.0, 0.0]])
    out = np.zeros((2 * n_modes, 2 * n_modes))
    for m in range(n_modes):
        out[2 * m : 2 * m + 2, 2 * m : 2 * m + 2] = j
    return out


OMEGA = symplectic_form(3)


class HamiltonianVariant(Enum):
    EQ1 = "EQ1"            # g1*p*x + g2*q'*k
    PAPER_HEFF = "PAPER_HEFF"  # g1*p*x + g2*q*k


@dataclass(frozen=True)
class PhaseSpaceState:
    """Gaussian state: means, symmetrized covariance, and hbar."""

    means: np.ndarray
    covariance: np.ndarray
    hbar: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "means", np.asarray(self.means, dtype=float))
        object.__setattr__(self, "covariance", np.asarray(self.covariance, dtype=float))
        if self.means.shape != (6,) or self.covariance.shape != (6, 6):
            raise ValueError("expected a 6-vector of means and a 6x6 covariance")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        if np.abs(self.covariance - self.covariance.T).max() > 1e-12:
            raise ValueError("covariance must be symmetric to 1e-12")

    def require_physical(self, tol: float = 1e-10) -> None:
        """Raise unless covariance + i(hbar/2)Omega is PSD (up to tol)."""
        m = self.covariance + 0.5j * self.hbar * OMEGA
        min_eig = np.linalg.eigvalsh(m).min()
        if min_eig < -tol:
            raise PhysicalityError(
                f"covariance violates uncertainty relation (min eig {min_eig:.3e})"
            )

    def reduced(self, modes: list[str]) -> tuple[np.ndarray, np.ndarray]:
        """Means and covariance of the listed modes (others traced out)."""
        idx = np.concatenate([np.arange(6)[MODE_SLICES[m]] for m in modes])
        return self.means[idx], self.covariance[np.ix_(idx, idx)]


def vacuum_state(hbar: float = 1.0) -> PhaseSpaceState:
    """Three-mode vacuum: zero means, covariance (hbar/2) I."""
    return PhaseSpaceState(np.zeros(6), 0.5 * hbar * np.eye(6), hbar)


def mode_covariance(width: float, tilt: float = 0.0, chirp: float = 0.0,
                    hbar: float = 1.0) -> np.ndarray:
    """Single-mode pure-Gaussian covariance for position std `width`.

    `chirp` is the quadratic phase coefficient gamma; it plants the
    symmetrized position-momentum correlation gamma*width^2.  `tilt`
    shifts only the momentum mean and is ignored here.
    """
    if width <= 0:
        raise ValueError("width must be positive")
    vq = width * width
    cov = chirp * vq
    vp = hbar * hbar / (4.0 * vq) + chirp * chirp * vq
    return np.array([[vq, cov], [cov, vp]])


def product_state(widths=(None, None, None), means=(0.0, 0.0, 0.0),
                  tilts=(0.0, 0.0, 0.0), chirps=(0.0, 0.0, 0.0),
                  hbar: float = 1.0) -> PhaseSpaceState:
    """Product of three pure Gaussian modes in the canonical ordering.

    A width of None means the vacuum width sqrt(hbar/2).  Tilts are
    plane-wave wavenumbers, so the momentum mean of mode j is
    hbar*tilts[j]; chirps plant within-mode position-momentum
    correlations (for the mediator this is the <xk> control knob).
    """
    mu = np.zeros(6)
    cov = np.zeros((6, 6))
    for j in range(3):
        w = widths[j] if widths[j] is not None else np.sqrt(hbar / 2.0)
        mu[2 * j] = means[j]
        mu[2 * j + 1] = hbar * tilts[j]
        cov[2 * j : 2 * j + 2, 2 * j : 2 * j + 2] = mode_covariance(
            w, chirp=chirps[j], hbar=hbar)
    return PhaseSpaceState(mu, cov, hbar)


@dataclass(frozen=True)
class QuadraticHamiltonian:
    """H = (1/2) v^T G v with v in the canonical ordering."""

    gmatrix: np.ndarray
    g1: float
    g2: float
    variant: HamiltonianVariant = HamiltonianVariant.EQ1

    def __post_init__(self):
        g = np.asarray(self.gmatrix, dtype=float)
        object.__setattr__(self, "gmatrix", g)
        if g.shape != (6, 6) or np.abs(g - g.T).max() > 1e-12:
            raise ValueError("gmatrix must be a symmetric 6x6 matrix")


def build_hamiltonian(g1: float, g2: float,
                      variant: HamiltonianVariant = HamiltonianVariant.EQ1,
                      ) -> QuadraticHamiltonian:
    """Interaction g1*p*x plus g2*q'*k (EQ1) or g2*q*k (PAPER_HEFF)."""
    g = np.zeros((6, 6))
    g[IDX_P, IDX_X] = g[IDX_X, IDX_P] = g1
    if variant is HamiltonianVariant.EQ1:
        g[IDX_QP, IDX_K] = g[IDX_K, IDX_QP] = g2
    elif variant is HamiltonianVariant.PAPER_HEFF:
        g[IDX_Q, IDX_K] = g[IDX_K, IDX_Q] = g2
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return QuadraticHamiltonian(g, g1, g2, variant)


@dataclass(frozen=True)
class SymplecticMatrix:
    """Linear phase-space propagator, S^T Omega S = Omega."""

    entries: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.entries, dtype=float)
        object.__setattr__(self, "entries", s)
        if np.abs(s.T @ OMEGA @ s - OMEGA).max() > 1e-10:
            raise ValueError("matrix is not symplectic to 1e-10")


def symplectic_propagator(h: QuadraticHamiltonian, t: float) -> SymplecticMatrix:
    """exp(Omega G t) by scaling-and-squaring."""
    return SymplecticMatrix(expm(OMEGA @ h.gmatrix * t))


def closed_form_propagator(g1: float, g2: float, t: float) -> np.ndarray:
    """Exact EQ1 propagator from the nilpotent generator (cubes to zero)."""
    a = 0.5 * g1 * g2 * t * t
    s = np.eye(6)
    s[IDX_Q, IDX_X] = g1 * t
    s[IDX_Q, IDX_QP] = a
    s[IDX_PP, IDX_K] = -g2 * t
    s[IDX_PP, IDX_P] = a
    s[IDX_X, IDX_QP] = g2 * t
    s[IDX_K, IDX_P] = -g1 * t
    return s


def evolve_gaussian(state: PhaseSpaceState, h: QuadraticHamiltonian,
                    t: float) -> PhaseSpaceState:
    """Propagate means and covariance: m -> Sm, V -> S V S^T."""
    state.require_physical()
    s = symplectic_propagator(h, t).entries
    return PhaseSpaceState(s @ state.means, s @ state.covariance @ s.T, state.hbar)


def _symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    n = cov.shape[0] // 2
    om = symplectic_form(n)
    ev = np.abs(np.linalg.eigvals(1j * om @ cov))
    # eigenvalues come in +/- pairs; average each pair
    return np.sort(ev).reshape(n, 2).mean(axis=1)


def logarithmic_negativity(state: PhaseSpaceState,
                           bipartition: tuple[list[str], list[str]] = (["Q"], ["Qprime"]),
                           ) -> float:
    """PPT log-negativity of a Gaussian bipartition, natural-log units.

    Modes outside the bipartition are traced out; the partial transpose
    flips the momentum rows/columns of the second side.
    """
    state.require_physical()
    side_a, side_b = bipartition
    modes = list(side_a) + list(side_b)
    _, cov = state.reduced(modes)
    flip = np.ones(2 * len(modes))
    for j, m in enumerate(modes):
        if m in side_b:
            flip[2 * j + 1] = -1.0
    cov_pt = np.diag(flip) @ cov @ np.diag(flip)
    nu = _symplectic_eigenvalues(cov_pt)
    half = 0.5 * state.hbar
    neg = -sum(np.log(v / half) for v in nu if v < half)
    return max(0.0, float(neg))


def two_mode_squeezed_state(r: float, hbar: float = 1.0) -> PhaseSpaceState:
    """Two-mode squeezed vacuum on (Q, Q'); mediator left in vacuum."""
    c = 0.5 * hbar * np.cosh(2 * r)
    s = 0.5 * hbar * np.sinh(2 * r)
    cov = 0.5 * hbar * np.eye(6)
    cov[0:2, 0:2] = c * np.eye(2)
    cov[2:4, 2:4] = c * np.eye(2)
    cov[0:2, 2:4] = cov[2:4, 0:2] = s * np.diag([1.0, -1.0])
    return PhaseSpaceState(np.zeros(6), cov, hbar)


def witness_expectation(state: PhaseSpaceState) -> float:
    """Symmetrized <q p' + q' p>, covariance entries plus mean products."""
    state.require_physical()
    m, v = state.means, state.covariance
    return float(v[IDX_Q, IDX_PP] + m[IDX_Q] * m[IDX_PP]
                 + v[IDX_QP, IDX_P] + m[IDX_QP] * m[IDX_P])


def entangling_time_scan(state: PhaseSpaceState, g1: float, g2: float,
                         times: np.ndarray,
                         variant: HamiltonianVariant = HamiltonianVariant.EQ1,
                         threshold: float = 1e-9) -> float | None:
    """Smallest scanned time with E_N(Q|Q') above threshold, else None."""
    h = build_hamiltonian(g1, g2, variant)
    for t in np.asarray(times, dtype=float):
        if logarithmic_negativity(evolve_gaussian(state, h, t)) > threshold:
            return float(t)
    return None


# ---------------------------------------------------------------------------
# Displaced-parity CHSH
# ---------------------------------------------------------------------------

class _ParityCorrelator:
    """Precomputed two-mode displaced-parity correlation E(alpha, beta).

    E is proportional to the Wigner function at the displacement point,
    normalized so the two-mode vacuum at zero displacement gives 1.
    """

    def __init__(self, means: np.ndarray, cov: np.ndarray, hbar: float):
        self.means = means
        self.inv = np.linalg.inv(cov)
        self.scale = np.sqrt(2.0 * hbar)
        self.norm = (np.pi * hbar) ** 2 / (
            (2.0 * np.pi) ** 2 * np.sqrt(np.linalg.det(cov)))

    def __call__(self, alpha: complex, beta: complex) -> float:
        delta = np.array([alpha.real, alpha.imag, beta.real, beta.imag])
        delta = self.scale * delta - self.means
        return float(self.norm * np.exp(-0.5 * delta @ self.inv @ delta))


def chsh_displaced_parity(state: PhaseSpaceState,
                          settings: tuple[complex, complex, complex, complex],
                          modes: tuple[str, str] = ("Q", "Qprime")) -> float:
    """CHSH combination B = E11 + E21 + E12 - E22 over parity correlations."""
    state.require_physical()
    if len(modes) != 2:
        raise ValueError("CHSH needs exactly two modes")
    means, cov = state.reduced(list(modes))
    e = _ParityCorrelator(means, cov, state.hbar)
    a1, a2, b1, b2 = settings
    return e(a1, b1) + e(a2, b1) + e(a1, b2) - e(a2, b2)


def optimize_chsh(state: PhaseSpaceState,
                  modes: tuple[str, str] = ("Q", "Qprime"),
                  start_scale: float = 0.6,
                  ) -> tuple[float, tuple[complex, complex, complex, complex]]:
    """Multi-start coordinate descent over the four displacement settings.

    Starts: alpha1 = beta1 = 0 with (alpha2, beta2) on a 5x5 grid of
    imaginary displacements in [-start_scale, start_scale]; each start
    is refined by cyclic coordinate descent over the 8 real parameters
    with step halving down to 1e-6.  Deterministic.
    """
    grid = np.linspace(-start_scale, start_scale, 5)
    state.require_physical()
    means, cov = state.reduced(list(modes))
    corr = _ParityCorrelator(means, cov, state.hbar)
    # unrolled scalar evaluator; the optimizer makes ~1e5 calls per start
    c00, c01, c02, c03 = (float(v) for v in corr.inv[0])
    _, c11, c12, c13 = (float(v) for v in corr.inv[1])
    c22, c23, c33 = float(corr.inv[2, 2]), float(corr.inv[2, 3]), float(corr.inv[3, 3])
    m0, m1, m2, m3 = (float(v) for v in means)
    scale, norm = float(corr.scale), float(corr.norm)
    from math import exp

    def efun(ar, ai, br, bi):
        d0 = scale * ar - m0
        d1 = scale * ai - m1
        d2 = scale * br - m2
        d3 = scale * bi - m3
        quad = (c00 * d0 * d0 + c11 * d1 * d1 + c22 * d2 * d2 + c33 * d3 * d3
                + 2.0 * (c01 * d0 * d1 + c02 * d0 * d2 + c03 * d0 * d3
                         + c12 * d1 * d2 + c13 * d1 * d3 + c23 * d2 * d3))
        return norm * exp(-0.5 * quad)

    def pack(x):
        return (complex(x[0], x[1]), complex(x[2], x[3]),
                complex(x[4], x[5]), complex(x[6], x[7]))

    def value(x):
        return (efun(x[0], x[1], x[4], x[5]) + efun(x[2], x[3], x[4], x[5])
                + efun(x[0], x[1], x[6], x[7]) - efun(x[2], x[3], x[6], x[7]))

    best_val, best_x = -np.inf, None
    for va in grid:
        for vb in grid:
            x = np.array([0.0, 0.0, 0.0, va, 0.0, 0.0, 0.0, vb])
            cur = value(x)
            step = 0.25
            while step > 1e-6:
                improved = False
                for i in range(8):
                    for sgn in (1.0, -1.0):
                        trial = x.copy()
                        trial[i] += sgn * step
                        tv = value(trial)
                        if tv > cur + 1e-15:
                            x, cur, improved = trial, tv, True
                if not improved:
                    step *= 0.5
            if cur > best_val:
                best_val, best_x = cur, x
    return float(best_val), pack(best_x)


# ---------------------------------------------------------------------------
# Mediator moment tomography
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MediatorEstimate:
    """Least-squares estimate of the mediator's first and second moments."""

    mean_x: float
    mean_k: float
    var_x: float
    var_k: float
    cov_xk: float
    residual: float

    def __post_init__(self):
        if not (self.var_x >= -1e-9 and self.var_k >= -1e-9):
            raise ValueError("fitted variances are negative beyond fit noise")
        if self.var_x * self.var_k - self.cov_xk ** 2 < -1e-9:
            raise ValueError("fitted second moments are inconsistent")


@dataclass
class ProbeMomentSeries:
    """First and second moments of the probe variables at sample times.

    Suffix 2 marks the second probe Q'; within-probe covariances are
    symmetrized.  All arrays share the shape of `times`.
    """

    times: np.ndarray
    mean_q: np.ndarray
    mean_p: np.ndarray
    mean_q2: np.ndarray
    mean_p2: np.ndarray
    var_q: np.ndarray
    var_p: np.ndarray
    var_q2: np.ndarray
    var_p2: np.ndarray
    cov_qp: np.ndarray
    cov_q2p2: np.ndarray
    cov_q_p2: np.ndarray

    @staticmethod
    def from_states(times, states: list[PhaseSpaceState]) -> "ProbeMomentSeries":
        m = np.array([s.means for s in states])
        v = np.array([s.covariance for s in states])
        return ProbeMomentSeries(
            times=np.asarray(times, dtype=float),
            mean_q=m[:, IDX_Q], mean_p=m[:, IDX_P],
            mean_q2=m[:, IDX_QP], mean_p2=m[:, IDX_PP],
            var_q=v[:, IDX_Q, IDX_Q], var_p=v[:, IDX_P, IDX_P],
            var_q2=v[:, IDX_QP, IDX_QP], var_p2=v[:, IDX_PP, IDX_PP],
            cov_qp=v[:, IDX_Q, IDX_P], cov_q2p2=v[:, IDX_QP, IDX_PP],
            cov_q_p2=v[:, IDX_Q, IDX_PP],
        )

    def with_noise(self, sigma: float, seed: int = 0) -> "ProbeMomentSeries":
        rng = np.random.default_rng(seed)
        kwargs = {"times": self.times}
        for name in ("mean_q", "mean_p", "mean_q2", "mean_p2", "var_q",
                     "var_p", "var_q2", "var_p2", "cov_qp", "cov_q2p2",
                     "cov_q_p2"):
            arr = getattr(self, name)
            kwargs[name] = arr + rng.normal(0.0, sigma, size=arr.shape)
        return ProbeMomentSeries(**kwargs)


def _lstsq(design: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    sol, res, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < design.shape[1]:
        raise DegenerateDesignError("design matrix is rank deficient")
    resid = float(np.sqrt(res[0])) if res.size else float(
        np.linalg.norm(design @ sol - y))
    return sol, resid


def mediator_moment_inversion(series: ProbeMomentSeries, g1: float, g2: float,
                              ) -> MediatorEstimate:
    """Recover the mediator's moments from probe moment time series.

    Assumes the initial state is a product of (Q, Q', C) so all
    cross-subsystem covariances vanish at t=0; the closed-form EQ1
    propagator then makes each probe moment an affine function of the
    unknown mediator moments, solved by linear least squares.
    """
    if g1 == 0.0 or g2 == 0.0:
        raise ValueError("tomography needs both couplings nonzero")
    t = np.asarray(series.times, dtype=float)
    if np.unique(t).size < 3:
        raise DegenerateDesignError("need at least 3 distinct sample times")
    a = 0.5 * g1 * g2
    ones = np.ones_like(t)

    # Conserved probe quantities, read off the series directly.
    q2bar = series.mean_q2.mean()
    pbar = series.mean_p.mean()
    var_q2bar = series.var_q2.mean()
    var_pbar = series.var_p.mean()
    cov_qpbar = series.cov_qp.mean()
    cov_q2p2bar = series.cov_q2p2.mean()

    total = 0.0
    (_, mean_x), r1 = _lstsq(np.column_stack([ones, g1 * t]),
                             series.mean_q - a * t * t * q2bar)
    (_, mean_k), r2 = _lstsq(np.column_stack([ones, -g2 * t]),
                             series.mean_p2 - a * t * t * pbar)
    (_, var_x), r3 = _lstsq(np.column_stack([ones, g1 * g1 * t * t]),
                            series.var_q - a * a * t ** 4 * var_q2bar)
    (_, var_k), r4 = _lstsq(np.column_stack([ones, g2 * g2 * t * t]),
                            series.var_p2 - a * a * t ** 4 * var_pbar)
    (_, cov_xk), r5 = _lstsq(np.column_stack([ones, -g1 * g2 * t * t]),
                             series.cov_q_p2 - a * t * t * (cov_qpbar + cov_q2p2bar))
    total = float(np.sqrt(r1 ** 2 + r2 ** 2 + r3 ** 2 + r4 ** 2 + r5 ** 2))
    return MediatorEstimate(mean_x=float(mean_x), mean_k=float(mean_k),
                            var_x=float(var_x), var_k=float(var_k),
                            cov_xk=float(cov_xk), residual=total)
