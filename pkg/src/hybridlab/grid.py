"""Grid backend: split-operator FFT evolution of psi(q, q', x).

The interaction g1*p*x + g2*q'*k contains no kinetic term, so both
split factors are exact shears: the g1 term is diagonal after an FFT
along the q axis, the g2 term after an FFT along the x axis.  Strang
(A-B-A) splitting makes the combination second-order in dt.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

AXIS_NAMES = ("q", "qprime", "x")


class DomainTooSmallError(ValueError):
    """Initial state too wide for the configured box (aliasing guard)."""


class ConfigurationError(ValueError):
    """Evolution parameters violate the per-step shear bound."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid over (q, q', x), each axis [-L, L)."""

    points_per_axis: tuple[int, int, int] = (64, 64, 64)
    half_widths: tuple[float, float, float] = (8.0, 8.0, 8.0)
    hbar: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "points_per_axis", tuple(int(n) for n in self.points_per_axis))
        object.__setattr__(self, "half_widths", tuple(float(l) for l in self.half_widths))
        for n in self.points_per_axis:
            if n < 32 or (n & (n - 1)) != 0:
                raise ValueError("points_per_axis must be powers of two >= 32")
        if any(l <= 0 for l in self.half_widths):
            raise ValueError("half_widths must be positive")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")

    def axis(self, i: int) -> np.ndarray:
        n, l = self.points_per_axis[i], self.half_widths[i]
        return -l + (2.0 * l / n) * np.arange(n)

    def wavenumbers(self, i: int) -> np.ndarray:
        n, l = self.points_per_axis[i], self.half_widths[i]
        return 2.0 * np.pi * np.fft.fftfreq(n, d=2.0 * l / n)

    def steps(self) -> tuple[float, float, float]:
        return tuple(2.0 * l / n for n, l in
                     zip(self.points_per_axis, self.half_widths))

    @property
    def cell_volume(self) -> float:
        h = self.steps()
        return h[0] * h[1] * h[2]

    def coordinate_field(self, i: int) -> np.ndarray:
        shape = [1, 1, 1]
        shape[i] = self.points_per_axis[i]
        return self.axis(i).reshape(shape)


@dataclass(frozen=True)
class GridState:
    """Complex amplitude on the grid, axis order (q, q', x)."""

    spec: GridSpec
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        object.__setattr__(self, "amplitudes", amp)
        if amp.shape != self.spec.points_per_axis:
            raise ValueError("amplitude shape does not match the grid spec")

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.spec.cell_volume)

    def require_normalized(self, tol: float = 1e-10) -> None:
        if abs(self.norm - 1.0) > tol:
            raise ValueError(f"state norm {self.norm} deviates from 1")


@dataclass(frozen=True)
class EnsembleRepresentation:
    """Hybrid ensemble fields: density P and the three phase gradients."""

    spec: GridSpec
    density: np.ndarray
    phase_gradients: tuple[np.ndarray, np.ndarray, np.ndarray]
    support_mask: np.ndarray

    def total_probability(self) -> float:
        return float(np.sum(self.density) * self.spec.cell_volume)

    @property
    def mask_fraction(self) -> float:
        return float(1.0 - self.support_mask.mean())


def init_product_gaussian(spec: GridSpec,
                          means=(0.0, 0.0, 0.0),
                          widths=(None, None, None),
                          tilts=(0.0, 0.0, 0.0),
                          chirps=(0.0, 0.0, 0.0)) -> GridState:
    """Normalized product of Gaussians with optional plane-wave tilts.

    A width of None means the vacuum width sqrt(hbar/2).  The tilt k0
    multiplies by exp(i k0 coordinate), centering the conjugate-variable
    marginal at hbar*k0; the chirp gamma multiplies by
    exp(i gamma coordinate^2 / (2 hbar)), planting a symmetrized
    position-momentum correlation gamma*width^2.
    """
    factors = []
    for i in range(3):
        w = widths[i] if widths[i] is not None else np.sqrt(spec.hbar / 2.0)
        if w <= 0:
            raise ValueError("widths must be positive")
        if spec.half_widths[i] < 8.0 * w:
            raise DomainTooSmallError(
                f"axis {AXIS_NAMES[i]}: half-width {spec.half_widths[i]} "
                f"< 8 x initial std {w}")
        u = spec.axis(i) - means[i]
        amp = np.exp(-u * u / (4.0 * w * w)
                     + 1j * tilts[i] * spec.axis(i)
                     + 0.5j * chirps[i] * u * u / spec.hbar)
        factors.append(amp)
    psi = factors[0][:, None, None] * factors[1][None, :, None] * factors[2][None, None, :]
    psi = psi / np.sqrt(np.sum(np.abs(psi) ** 2) * spec.cell_volume)
    return GridState(spec, psi)


def split_step_evolve(state: GridState, g1: float, g2: float,
                      dt: float, steps: int) -> GridState:
    """Strang A-B-A evolution under exp(-i t (g1 p x + g2 q' k)/hbar).

    A = g1 p x is applied diagonally after an FFT along q; B = g2 q' k
    after an FFT along x.  Each factor is an exact unitary shear, so
    the norm is conserved to roundoff.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if steps == 0:
        return state
    spec = state.spec
    # per-step shear displacement must stay below the box size
    if abs(dt * g1) * spec.half_widths[2] > spec.half_widths[0] or \
       abs(dt * g2) * spec.half_widths[1] > spec.half_widths[2]:
        raise ConfigurationError("per-step shear exceeds the domain size; "
                                 "reduce dt or enlarge the box")
    kq = spec.wavenumbers(0)[:, None, None]
    kx = spec.wavenumbers(2)[None, None, :]
    x = spec.coordinate_field(2)
    qp = spec.coordinate_field(1)
    half_a = np.exp(-0.5j * g1 * dt * kq * x)
    full_b = np.exp(-1j * g2 * dt * qp * kx)
    # A(dt/2) [B(dt) A(dt)]^(n-1) B(dt) A(dt/2), fusing interior half-steps
    psi = state.amplitudes
    psi = np.fft.ifft(half_a * np.fft.fft(psi, axis=0), axis=0)
    full_a = half_a * half_a
    for step in range(steps):
        psi = np.fft.ifft(full_b * np.fft.fft(psi, axis=2), axis=2)
        phase = half_a if step == steps - 1 else full_a
        psi = np.fft.ifft(phase * np.fft.fft(psi, axis=0), axis=0)
    return GridState(spec, psi)


def _spectral_derivative(psi: np.ndarray, spec: GridSpec, axis: int) -> np.ndarray:
    k = spec.wavenumbers(axis)
    shape = [1, 1, 1]
    shape[axis] = k.size
    return np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(psi, axis=axis),
                       axis=axis)


def apply_operator(psi: np.ndarray, spec: GridSpec, symbol: str) -> np.ndarray:
    """Apply one canonical operator (position multiply or -i hbar d/daxis)."""
    positions = {"q": 0, "q'": 1, "x": 2}
    momenta = {"p": 0, "p'": 1, "k": 2}
    if symbol in positions:
        return spec.coordinate_field(positions[symbol]) * psi
    if symbol in momenta:
        return -1j * spec.hbar * _spectral_derivative(psi, spec, momenta[symbol])
    raise ValueError(f"unknown canonical symbol {symbol!r}")


def to_ensemble(state: GridState, epsilon: float | None = None,
                ) -> EnsembleRepresentation:
    """Density P = |psi|^2 and gauge-safe gradients hbar*Im(psi* grad psi)/P.

    No phase unwrapping is performed; gradients are masked (set to 0)
    where P <= epsilon.  Default epsilon is 1e-12 * max(P).
    """
    spec = state.spec
    psi = state.amplitudes
    density = np.abs(psi) ** 2
    if epsilon is None:
        epsilon = 1e-12 * density.max()
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    mask = density > epsilon
    grads = []
    for axis in range(3):
        num = spec.hbar * np.imag(np.conj(psi) * _spectral_derivative(psi, spec, axis))
        g = np.zeros_like(density)
        np.divide(num, density, out=g, where=mask)
        grads.append(g)
    return EnsembleRepresentation(spec, density, tuple(grads), mask)


def grid_moments(state: GridState) -> tuple[np.ndarray, np.ndarray]:
    """Means and symmetrized 6x6 covariance in the canonical ordering.

    Position moments by quadrature, momentum moments via spectral
    derivatives; the symmetrized second moment of Hermitian A, B is
    Re<A psi|B psi>.
    """
    spec = state.spec
    psi = state.amplitudes
    dv = spec.cell_volume
    symbols = ("q", "p", "q'", "p'", "x", "k")
    fields = [apply_operator(psi, spec, s) for s in symbols]
    means = np.array([np.real(np.sum(np.conj(psi) * f)) * dv for f in fields])
    cov = np.empty((6, 6))
    for i in range(6):
        for j in range(i, 6):
            second = np.real(np.sum(np.conj(fields[i]) * fields[j])) * dv
            cov[i, j] = cov[j, i] = second - means[i] * means[j]
    return means, cov


def momentum_marginal(state: GridState, axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Distribution of the conjugate momentum along one axis.

    Returns (momentum values, density), sorted and normalized to unit
    integral; momentum = hbar * wavenumber.
    """
    spec = state.spec
    n = spec.points_per_axis[axis]
    h = spec.steps()[axis]
    psi_k = np.fft.fft(state.amplitudes, axis=axis)
    other = tuple(a for a in range(3) if a != axis)
    prob = np.sum(np.abs(psi_k) ** 2, axis=other)
    k = spec.wavenumbers(axis)
    order = np.argsort(k)
    p = spec.hbar * k[order]
    prob = prob[order]
    dp = spec.hbar * 2.0 * np.pi / (n * h)
    prob = prob / (np.sum(prob) * dp)
    return p, prob


# ---------------------------------------------------------------------------
# Flat binary dump: 3 int64 sizes, 3 float64 half-widths, then
# interleaved re/im float64 in row-major order (all little-endian).
# ---------------------------------------------------------------------------

def save_grid_state(state: GridState, path) -> None:
    spec = state.spec
    with open(path, "wb") as fh:
        fh.write(struct.pack("<3q", *spec.points_per_axis))
        fh.write(struct.pack("<3d", *spec.half_widths))
        inter = np.empty(state.amplitudes.size * 2)
        inter[0::2] = state.amplitudes.real.ravel()
        inter[1::2] = state.amplitudes.imag.ravel()
        fh.write(inter.astype("<f8").tobytes())


def load_grid_state(path, hbar: float = 1.0) -> GridState:
    with open(path, "rb") as fh:
        sizes = struct.unpack("<3q", fh.read(24))
        halves = struct.unpack("<3d", fh.read(24))
        inter = np.frombuffer(fh.read(), dtype="<f8")
    spec = GridSpec(tuple(int(n) for n in sizes), halves, hbar)
    psi = (inter[0::2] + 1j * inter[1::2]).reshape(spec.points_per_axis)
    return GridState(spec, psi)
