"""Grids, real fields and the discrete calculus shared by every other module.

A state of the Schrödinger field is stored realified, ψ = q + ip, as a :class:`PhasePair`
of two :class:`RealField` samples on a uniform :class:`Grid1D`. Two boundary modes exist:

* periodic: Fourier differentiation, uniform quadrature weights, spectrally accurate;
* decaying: fields negligible at both ends, high-order finite differences with one-sided
  closures and trapezoid weights. This is the mode in which the skew antiderivative
  D⁻¹ = ½(∫₋∞ˣ − ∫ₓ^∞) is literal.
"""

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property, lru_cache
from typing import Callable, Optional, Union

import numpy as np
from scipy import fft, sparse


class Boundary(str, Enum):
    """Boundary mode of a grid"""

    PERIODIC = "periodic"
    DECAYING = "decaying"


class GridMismatchError(ValueError):
    """Raised when operands live on different grids"""


class IllPosedInversionError(ValueError):
    """Raised when D⁻¹ is asked to invert a periodic field with nonzero mean"""


# Half widths of the centered stencils, 8th order accurate for every supported order
_STENCIL_HALF_WIDTH = {1: 4, 2: 4, 3: 5, 4: 5}
# Relative bound on the mean of a periodic field handed to D⁻¹
MEAN_TOLERANCE = 1e-9
DEFAULT_FD_EPS = 1e-5


@dataclass(frozen=True)
class Grid1D:
    """Uniform 1-D grid with sample points x_i = origin + i·h, i in [0, N)"""

    length: float
    points: int
    boundary: Boundary
    origin: float

    @property
    def spacing(self) -> float:
        return self.length / self.points

    @property
    def is_periodic(self) -> bool:
        return self.boundary is Boundary.PERIODIC

    @cached_property
    def x(self) -> np.ndarray:
        return _frozen(self.origin + self.spacing * np.arange(self.points))

    @cached_property
    def weights(self) -> np.ndarray:
        weights = np.full(self.points, self.spacing)
        if not self.is_periodic:
            weights[0] = weights[-1] = 0.5 * self.spacing
        return _frozen(weights)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers in complex FFT order"""
        return _frozen(2.0 * np.pi * fft.fftfreq(self.points, d=self.spacing))

    @cached_property
    def real_wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers of the half spectrum used by rfft"""
        return _frozen(2.0 * np.pi * fft.rfftfreq(self.points, d=self.spacing))

    @property
    def center(self) -> float:
        return self.origin + 0.5 * self.length


def _frozen(values: np.ndarray) -> np.ndarray:
    values.flags.writeable = False
    return values


def make_grid(length: float, points: int, boundary: Union[Boundary, str] = Boundary.PERIODIC, origin: Optional[float] = None) -> Grid1D:
    """Build a grid with h = length / points.

    Periodic grids start at 0 and decaying grids are centred on 0 unless an origin is given.
    """
    boundary = Boundary(boundary)
    if isinstance(points, bool) or int(points) != points:
        raise ValueError(f"points must be an integer, got {points!r}")
    points = int(points)
    if points < 8:
        raise ValueError(f"points must be at least 8, got {points}")
    if points % 2:
        raise ValueError(f"points must be even for the spectral transforms, got {points}")
    if not math.isfinite(length) or length <= 0:
        raise ValueError(f"length must be positive and finite, got {length}")
    if origin is None:
        origin = 0.0 if boundary is Boundary.PERIODIC else -0.5 * length
    return Grid1D(float(length), points, boundary, float(origin))


def _check_same_grid(*grids: Grid1D) -> Grid1D:
    first = grids[0]
    for other in grids[1:]:
        if other != first:
            raise GridMismatchError(f"grid mismatch: {first} vs {other}")
    return first


@dataclass(frozen=True, eq=False)
class RealField:
    """Finite real samples on a grid"""

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.points,):
            raise ValueError(f"expected {self.grid.points} samples, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field samples must be finite")
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def zeros(cls, grid: Grid1D) -> "RealField":
        return cls(grid, np.zeros(grid.points))

    @classmethod
    def constant(cls, grid: Grid1D, value: float) -> "RealField":
        return cls(grid, np.full(grid.points, float(value)))

    @classmethod
    def from_function(cls, grid: Grid1D, function: Callable[[np.ndarray], np.ndarray]) -> "RealField":
        return cls(grid, np.broadcast_to(function(grid.x), (grid.points,)))

    def _operand(self, other) -> np.ndarray:
        if isinstance(other, RealField):
            _check_same_grid(self.grid, other.grid)
            return other.values
        return other

    def __add__(self, other) -> "RealField":
        return RealField(self.grid, self.values + self._operand(other))

    __radd__ = __add__

    def __sub__(self, other) -> "RealField":
        return RealField(self.grid, self.values - self._operand(other))

    def __rsub__(self, other) -> "RealField":
        return RealField(self.grid, self._operand(other) - self.values)

    def __mul__(self, other) -> "RealField":
        return RealField(self.grid, self.values * self._operand(other))

    __rmul__ = __mul__

    def __truediv__(self, other: float) -> "RealField":
        return RealField(self.grid, self.values / other)

    def __neg__(self) -> "RealField":
        return RealField(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class PhasePair:
    """Realified wave function ψ = q + ip.

    The same container carries functional gradients (δF/δq, δF/δp) and tangent
    vectors (q̇, ṗ); which one is meant follows from the operation.
    """

    q: RealField
    p: RealField

    def __post_init__(self):
        _check_same_grid(self.q.grid, self.p.grid)

    @property
    def grid(self) -> Grid1D:
        return self.q.grid

    @classmethod
    def from_arrays(cls, grid: Grid1D, q: np.ndarray, p: np.ndarray) -> "PhasePair":
        return cls(RealField(grid, q), RealField(grid, p))

    @classmethod
    def from_complex(cls, grid: Grid1D, psi: np.ndarray) -> "PhasePair":
        psi = np.asarray(psi)
        return cls.from_arrays(grid, psi.real, psi.imag)

    def to_complex(self) -> np.ndarray:
        return self.q.values + 1j * self.p.values

    @property
    def norm2(self) -> float:
        """Σ w_i (q_i² + p_i²)"""
        return float(np.dot(self.grid.weights, self.q.values**2 + self.p.values**2))

    def __add__(self, other: "PhasePair") -> "PhasePair":
        return PhasePair(self.q + other.q, self.p + other.p)

    def __sub__(self, other: "PhasePair") -> "PhasePair":
        return PhasePair(self.q - other.q, self.p - other.p)

    def __mul__(self, scalar: float) -> "PhasePair":
        return PhasePair(self.q * scalar, self.p * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "PhasePair":
        return PhasePair(-self.q, -self.p)


Functional = Callable[[PhasePair], float]


def integrate(f: RealField) -> float:
    """Quadrature Σ w_i f_i"""
    return float(np.dot(f.grid.weights, f.values))


def inner(a: PhasePair, b: PhasePair) -> float:
    """Quadrature inner product ∫(a_q b_q + a_p b_p)"""
    grid = _check_same_grid(a.grid, b.grid)
    return float(np.dot(grid.weights, a.q.values * b.q.values + a.p.values * b.p.values))


def norm(u: PhasePair) -> float:
    return math.sqrt(u.norm2)


def rotate(u: PhasePair, theta: float) -> PhasePair:
    """Global phase rotation ψ → e^{iθ}ψ"""
    cos, sin = math.cos(theta), math.sin(theta)
    return PhasePair(u.q * cos - u.p * sin, u.q * sin + u.p * cos)


def _stencil_weights(offsets: np.ndarray, order: int) -> np.ndarray:
    """Weights w with Σ_j w_j s_j^m = m!·δ(m, order) for every moment m below len(offsets)"""
    size = len(offsets)
    vandermonde = np.vander(offsets.astype(float), size, increasing=True).T
    rhs = np.zeros(size)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(vandermonde, rhs)


@lru_cache(maxsize=None)
def _difference_matrix(points: int, spacing: float, order: int) -> sparse.csr_matrix:
    half = _STENCIL_HALF_WIDTH[order]
    width = 2 * half + 1
    centered = _stencil_weights(np.arange(-half, half + 1), order)
    # exact (anti)symmetry keeps the interior operator (skew) self-adjoint
    centered = 0.5 * (centered + (-1) ** order * centered[::-1])

    rows, cols, values = [], [], []
    for i in range(points):
        start = min(max(i - half, 0), points - width)
        offsets = np.arange(start, start + width) - i
        weights = centered if start == i - half else _stencil_weights(offsets, order)
        rows.extend([i] * width)
        cols.extend(range(start, start + width))
        values.extend(weights)
    matrix = sparse.csr_matrix((values, (rows, cols)), shape=(points, points))
    return matrix / spacing**order


def _spectral_derivative(values: np.ndarray, grid: Grid1D, order: int) -> np.ndarray:
    multiplier = (1j * grid.real_wavenumbers) ** order
    if order % 2:
        multiplier[-1] = 0.0  # Nyquist mode has no odd derivative
    return fft.irfft(multiplier * fft.rfft(values), n=grid.points)


def derivative_values(grid: Grid1D, values: np.ndarray, order: int = 1) -> np.ndarray:
    """Derivative of raw samples; no finiteness check, for integrators that watch for blow-up themselves"""
    if order not in _STENCIL_HALF_WIDTH:
        raise ValueError(f"unsupported derivative order {order}; expected one of 1, 2, 3, 4")
    if grid.is_periodic:
        return _spectral_derivative(values, grid, order)
    return _difference_matrix(grid.points, grid.spacing, order) @ values


def derivative(f: RealField, order: int = 1) -> RealField:
    """Spatial derivative of order 1 to 4"""
    return RealField(f.grid, derivative_values(f.grid, f.values, order))


def dminus1(f: RealField) -> RealField:
    """Skew antiderivative D⁻¹f = ½(∫₋∞ˣ f − ∫ₓ^∞ f).

    Periodic fields must have zero mean; the zero mode is annihilated. Decaying fields use
    trapezoid partial sums from both ends with Euler–Maclaurin end corrections.
    """
    grid = f.grid
    values = f.values
    if grid.is_periodic:
        mean = float(values.mean())
        scale = max(1.0, float(np.max(np.abs(values))))
        if abs(mean) > MEAN_TOLERANCE * scale:
            raise IllPosedInversionError(f"D⁻¹ of a periodic field needs zero mean, got mean {mean:.3e}")
        spectrum = fft.rfft(values)
        result = np.zeros_like(spectrum)
        result[1:] = spectrum[1:] / (1j * grid.real_wavenumbers[1:])
        result[-1] = 0.0
        return RealField(grid, fft.irfft(result, n=grid.points))

    h = grid.spacing
    left = np.concatenate(([0.0], np.cumsum(0.5 * h * (values[1:] + values[:-1]))))
    right = left[-1] - left
    slope = derivative(f, 1).values
    third = derivative(f, 3).values
    left = left - h**2 / 12.0 * (slope - slope[0]) + h**4 / 720.0 * (third - third[0])
    right = right - h**2 / 12.0 * (slope[-1] - slope) + h**4 / 720.0 * (third[-1] - third)
    return RealField(grid, 0.5 * (left - right))


def fd_gradient(functional: Functional, u: PhasePair, eps: float = DEFAULT_FD_EPS) -> PhasePair:
    """Central-difference gradient of a functional under the quadrature inner product.

    Component i of the result satisfies F(u + ε·δ_i) − F(u − ε·δ_i) ≈ 2ε·w_i·g_i, with the
    step ε = eps·max(1, max|u|).
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    grid = u.grid
    work = [u.q.values.copy(), u.p.values.copy()]
    step = eps * max(1.0, float(np.max(np.abs(work[0]))), float(np.max(np.abs(work[1]))))
    gradient = [np.empty(grid.points), np.empty(grid.points)]

    for component, samples in enumerate(work):
        for i in range(grid.points):
            original = samples[i]
            samples[i] = original + step
            upper = functional(PhasePair.from_arrays(grid, work[0], work[1]))
            samples[i] = original - step
            lower = functional(PhasePair.from_arrays(grid, work[0], work[1]))
            samples[i] = original
            gradient[component][i] = (upper - lower) / (2.0 * step * grid.weights[i])

    return PhasePair.from_arrays(grid, gradient[0], gradient[1])


def random_phase_pair(grid: Grid1D, rng: np.random.Generator, amplitude: float = 1.0) -> PhasePair:
    """Seeded random state with norm ``amplitude``.

    Periodic grids get band-limited noise: modes above N/3 are zero and the rest roll off
    smoothly. Decaying grids get a Gaussian envelope of width L/16 about the grid centre,
    modulated by a random low-order trigonometric polynomial.
    """
    if grid.is_periodic:
        modes = np.arange(grid.points // 2 + 1)
        cutoff = grid.points // 3
        rolloff = np.exp(-((modes / max(1.5, grid.points / 24.0)) ** 2))
        rolloff[modes > cutoff] = 0.0

        def sample() -> np.ndarray:
            spectrum = (rng.standard_normal(modes.size) + 1j * rng.standard_normal(modes.size)) * rolloff
            spectrum[0] = spectrum[0].real
            return fft.irfft(spectrum, n=grid.points)

    else:
        width = grid.length / 16.0
        x = (grid.x - grid.center) / width
        envelope = np.exp(-0.5 * x**2)

        def sample() -> np.ndarray:
            cosines = rng.standard_normal(3)
            sines = rng.standard_normal(3)
            modulation = cosines[0] + sum(cosines[j] * np.cos(0.5 * j * x) + sines[j] * np.sin(0.5 * j * x) for j in (1, 2))
            return envelope * modulation

    state = PhasePair.from_arrays(grid, sample(), sample())
    return state * (amplitude / norm(state))
