"""Time evolution of the linear and nonlinear Schrödinger equations and the Madelung transform.

Steppers work on the complex samples ψ = q + ip. The split-step scheme alternates exact
pointwise phase rotations (potential or |ψ|² nonlinearity) with the exact kinetic propagator
in Fourier space; rk4 is the non-structure-preserving reference.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import fft

from .field_core import Grid1D, PhasePair, RealField, derivative, derivative_values
from .functionals import FunctionalSpec
from .structures import SchrodingerOperator

# Density floor for phase extraction, relative to max χ
DENSITY_FLOOR = 1e-8
# Time step of the centered differences in the Madelung checks
MADELUNG_DT = 1e-4


class Scheme(str, Enum):
    STRANG = "strang-split"
    RK4 = "rk4"


class EquationKind(str, Enum):
    LSE = "lse"
    NLS = "nls"


class SimulationDivergedError(RuntimeError):
    """Raised when a trajectory produces non-finite samples"""


@dataclass(frozen=True)
class IntegratorSpec:
    scheme: Scheme = Scheme.STRANG
    dt: float = 1e-3
    steps: int = 1000
    stride: int = 1

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.steps < 1:
            raise ValueError(f"steps must be at least 1, got {self.steps}")
        if self.stride < 1:
            raise ValueError(f"stride must be at least 1, got {self.stride}")


@dataclass(frozen=True)
class NlsParameters:
    """iħψₜ = −(ħ²/2m)ψₓₓ + b|ψ|²ψ"""

    hbar: float = 1.0
    mass: float = 0.5
    b: float = 0.0

    def __post_init__(self):
        if not self.hbar > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")
        if not self.mass > 0:
            raise ValueError(f"mass must be positive, got {self.mass}")

    @property
    def alpha(self) -> float:
        return self.b * math.sqrt(2.0 * self.mass) / self.hbar


def drift_statistics(series: Mapping[str, np.ndarray]) -> Dict[str, float]:
    """max_t |f(t) − f(0)| / max(|f(0)|, 1) per functional"""
    return {name: float(np.max(np.abs(values - values[0])) / max(abs(values[0]), 1.0)) for name, values in series.items()}


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    series: Dict[str, np.ndarray]
    states: List[PhasePair] = field(default_factory=list)

    @property
    def drift(self) -> Dict[str, float]:
        return drift_statistics(self.series)


Stepper = Callable[[np.ndarray], np.ndarray]


class _SplitStep:
    """half phase ∘ kinetic ∘ half phase"""

    def __init__(self, half_step: Stepper, kinetic_phase: np.ndarray):
        self.half_step = half_step
        self.kinetic_phase = kinetic_phase

    def __call__(self, psi: np.ndarray) -> np.ndarray:
        psi = self.half_step(psi)
        psi = fft.ifft(self.kinetic_phase * fft.fft(psi))
        return self.half_step(psi)


class _RungeKutta:
    def __init__(self, rhs: Stepper, dt: float):
        self.rhs = rhs
        self.dt = dt

    def __call__(self, psi: np.ndarray) -> np.ndarray:
        dt = self.dt
        k1 = self.rhs(psi)
        k2 = self.rhs(psi + 0.5 * dt * k1)
        k3 = self.rhs(psi + 0.5 * dt * k2)
        k4 = self.rhs(psi + dt * k3)
        return psi + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _second_derivative(grid: Grid1D, psi: np.ndarray) -> np.ndarray:
    return derivative_values(grid, psi.real, 2) + 1j * derivative_values(grid, psi.imag, 2)


def _kinetic_phase(grid: Grid1D, hbar: float, mass: float, dt: float) -> np.ndarray:
    if not grid.is_periodic:
        raise ValueError("the split-step scheme needs a periodic grid; use rk4 on decaying grids")
    return np.exp(-1j * hbar * grid.wavenumbers**2 * dt / (2.0 * mass))


def _lse_stepper(op: SchrodingerOperator, dt: float, scheme: Scheme) -> Stepper:
    grid = op.grid
    if Scheme(scheme) is Scheme.STRANG:
        half_phase = np.exp(-0.5j * dt * op.potential.values / op.hbar)
        return _SplitStep(lambda psi: half_phase * psi, _kinetic_phase(grid, op.hbar, op.mass, dt))

    def rhs(psi: np.ndarray) -> np.ndarray:
        return -1j / op.hbar * (-op.kinetic_coefficient * _second_derivative(grid, psi) + op.potential.values * psi)

    return _RungeKutta(rhs, dt)


def _nls_stepper(grid: Grid1D, params: NlsParameters, dt: float, scheme: Scheme) -> Stepper:
    hbar, b = params.hbar, params.b
    if Scheme(scheme) is Scheme.STRANG:

        def half_step(psi: np.ndarray) -> np.ndarray:
            return psi * np.exp(-0.5j * dt * b * np.abs(psi) ** 2 / hbar)

        return _SplitStep(half_step, _kinetic_phase(grid, hbar, params.mass, dt))

    kinetic = hbar**2 / (2.0 * params.mass)

    def rhs(psi: np.ndarray) -> np.ndarray:
        return -1j / hbar * (-kinetic * _second_derivative(grid, psi) + b * np.abs(psi) ** 2 * psi)

    return _RungeKutta(rhs, dt)


def step_lse(u: PhasePair, op: SchrodingerOperator, dt: float, scheme: Scheme = Scheme.STRANG) -> PhasePair:
    """Advance iħψₜ = ℋψ by dt (negative dt steps backwards)"""
    if dt == 0:
        return u
    return PhasePair.from_complex(u.grid, _lse_stepper(op, dt, scheme)(u.to_complex()))


def step_nls(u: PhasePair, hbar: float, mass: float, b: float, dt: float, scheme: Scheme = Scheme.STRANG) -> PhasePair:
    """Advance iħψₜ = −(ħ²/2m)ψₓₓ + b|ψ|²ψ by dt"""
    if dt == 0:
        return u
    return PhasePair.from_complex(u.grid, _nls_stepper(u.grid, NlsParameters(hbar, mass, b), dt, scheme)(u.to_complex()))


def run(
    kind: Union[EquationKind, str],
    u0: PhasePair,
    params: Union[SchrodingerOperator, NlsParameters],
    integ: IntegratorSpec,
    monitored: Union[Mapping[str, Callable[[PhasePair], float]], Sequence[FunctionalSpec]] = (),
) -> TrajectoryRecord:
    """Integrate from u0, sampling monitored functionals every ``stride`` steps and at the end"""
    kind = EquationKind(kind)
    if kind is EquationKind.LSE:
        if not isinstance(params, SchrodingerOperator):
            raise TypeError("lse runs take a SchrodingerOperator")
        stepper = _lse_stepper(params, integ.dt, integ.scheme)
    else:
        if not isinstance(params, NlsParameters):
            raise TypeError("nls runs take NlsParameters")
        stepper = _nls_stepper(u0.grid, params, integ.dt, integ.scheme)

    if not isinstance(monitored, Mapping):
        monitored = {spec.name: spec for spec in monitored}

    times = [0.0]
    states = [u0]
    values = {name: [functional(u0)] for name, functional in monitored.items()}

    psi = u0.to_complex()
    for step in range(1, integ.steps + 1):
        psi = stepper(psi)
        if step % integ.stride and step != integ.steps:
            continue
        if not np.all(np.isfinite(psi)):
            raise SimulationDivergedError(f"non-finite state at step {step} (t = {step * integ.dt:.6g}); reduce dt or check the initial state")
        state = PhasePair.from_complex(u0.grid, psi)
        times.append(step * integ.dt)
        states.append(state)
        for name, functional in monitored.items():
            values[name].append(functional(state))

    return TrajectoryRecord(np.array(times), {name: np.array(series) for name, series in values.items()}, states)


@dataclass(frozen=True, eq=False)
class MadelungFields:
    """Density and scaled phase of ψ = √χ·e^{2iπ}

    Attributes:
        chi: χ = q² + p²
        pi: π = θ/2, θ unwrapped from the leftmost masked point; zero off the mask
        current: J = (ħ/m)·χ·∂ₓθ, zero off the mask
        phase_gradient: ∂ₓπ, zero off the mask
        flux: χ·∂ₓθ = q·∂ₓp − p·∂ₓq on the whole grid
        mask: points with χ ≥ floor
    """

    chi: RealField
    pi: RealField
    current: RealField
    phase_gradient: RealField
    flux: RealField
    mask: np.ndarray
    floor: float


def madelung_from_state(u: PhasePair, hbar: float, mass: float, floor: Optional[float] = None) -> MadelungFields:
    """Density, phase and current of a state; phase quantities are masked where χ < floor.

    The default floor is 1e-8·max χ.
    """
    grid = u.grid
    q, p = u.q.values, u.p.values
    chi = q**2 + p**2
    if floor is None:
        floor = DENSITY_FLOOR * float(np.max(chi))
    if not floor > 0:
        raise ValueError(f"density floor must be positive, got {floor}")
    mask = chi >= floor

    theta = np.zeros(grid.points)
    masked = np.flatnonzero(mask)
    if masked.size:
        theta[masked] = np.unwrap(np.arctan2(p[masked], q[masked]))

    flux = q * derivative(u.p).values - p * derivative(u.q).values
    theta_x = np.where(mask, flux / np.where(mask, chi, 1.0), 0.0)
    mask.flags.writeable = False
    return MadelungFields(
        chi=RealField(grid, chi),
        pi=RealField(grid, 0.5 * theta),
        current=RealField(grid, np.where(mask, hbar / mass * flux, 0.0)),
        phase_gradient=RealField(grid, 0.5 * theta_x),
        flux=RealField(grid, flux),
        mask=mask,
        floor=floor,
    )


def madelung_rhs(fields: MadelungFields, potential: RealField, hbar: float, mass: float) -> Tuple[RealField, RealField]:
    """Hamilton's equations in the (χ, π) variables, on the mask:

    dχ/dt = −(2ħ/m)·∂ₓ(χ·∂ₓπ)
    dπ/dt = (ħ/4m)·∂ₓ²√χ/√χ − (ħ/m)(∂ₓπ)² − U/(2ħ)
    """
    grid = fields.chi.grid
    mask = fields.mask
    amplitude = RealField(grid, np.sqrt(fields.chi.values))
    pressure = np.where(mask, derivative(amplitude, 2).values / np.where(mask, amplitude.values, 1.0), 0.0)
    slope = fields.phase_gradient.values

    # χ·∂ₓπ = flux/2 on the whole grid
    dchi = -(hbar / mass) * derivative(fields.flux).values
    dpi = hbar / (4.0 * mass) * pressure - hbar / mass * slope**2 - potential.values / (2.0 * hbar)
    return RealField(grid, np.where(mask, dchi, 0.0)), RealField(grid, np.where(mask, dpi, 0.0))


def madelung_hamiltonian(fields: MadelungFields, potential: RealField, hbar: float, mass: float) -> float:
    """∫{(ħ²/2m)(χₓ²/(4χ) + 4χπₓ²) + Uχ} over the mask; equals 2·H₁ for nodeless states"""
    chi = fields.chi.values
    mask = fields.mask
    slope = derivative(fields.chi).values
    pressure = np.where(mask, slope**2 / (4.0 * np.where(mask, chi, 1.0)), 0.0)
    density = hbar**2 / (2.0 * mass) * (pressure + 4.0 * chi * fields.phase_gradient.values**2) + potential.values * chi
    return float(np.dot(fields.chi.grid.weights, np.where(mask, density, 0.0)))


class MadelungCheck(NamedTuple):
    """Sup-norm differences over the mask between transformed and time-differenced rates"""

    residual: float
    chi_residual: float
    pi_residual: float
    mask: np.ndarray


def _centered_rates(u: PhasePair, op: SchrodingerOperator, dt: float) -> Tuple[np.ndarray, np.ndarray]:
    scheme = Scheme.STRANG if u.grid.is_periodic else Scheme.RK4
    forward = step_lse(u, op, dt, scheme).to_complex()
    backward = step_lse(u, op, -dt, scheme).to_complex()
    chi_rate = (np.abs(forward) ** 2 - np.abs(backward) ** 2) / (2.0 * dt)
    pi_rate = np.angle(forward * np.conj(backward)) / (4.0 * dt)
    return chi_rate, pi_rate


def _sup(values: np.ndarray, mask: np.ndarray) -> float:
    return float(np.max(np.abs(values[mask]))) if np.any(mask) else 0.0


def madelung_consistency(u: PhasePair, op: SchrodingerOperator, dt: float = MADELUNG_DT, floor: Optional[float] = None) -> MadelungCheck:
    """Compare madelung_rhs with centered time differences of the transform along step_lse"""
    fields = madelung_from_state(u, op.hbar, op.mass, floor)
    dchi, dpi = madelung_rhs(fields, op.potential, op.hbar, op.mass)
    chi_rate, pi_rate = _centered_rates(u, op, dt)
    chi_residual = _sup(chi_rate - dchi.values, fields.mask)
    pi_residual = _sup(pi_rate - dpi.values, fields.mask)
    return MadelungCheck(max(chi_residual, pi_residual), chi_residual, pi_residual, fields.mask)


def continuity_residual(u: PhasePair, op: SchrodingerOperator, dt: float = MADELUNG_DT, floor: Optional[float] = None) -> float:
    """sup over the mask of dχ/dt + ∂ₓJ, with dχ/dt from centered time differences"""
    fields = madelung_from_state(u, op.hbar, op.mass, floor)
    chi_rate, _ = _centered_rates(u, op, dt)
    divergence = op.hbar / op.mass * derivative(fields.flux).values
    return _sup(chi_rate + divergence, fields.mask)


def gaussian_state(grid: Grid1D, center: float = 0.0, width: float = 1.0, momentum: float = 0.0) -> PhasePair:
    """Unit-norm packet exp(−(x−c)²/2w² + ikx)"""
    if not width > 0:
        raise ValueError(f"width must be positive, got {width}")
    x = grid.x
    psi = (math.pi * width**2) ** -0.25 * np.exp(-((x - center) ** 2) / (2.0 * width**2) + 1j * momentum * x)
    return PhasePair.from_complex(grid, psi)


def plane_wave_state(grid: Grid1D, k: float) -> PhasePair:
    """(cos kx, sin kx)/√L"""
    x = grid.x
    return PhasePair.from_complex(grid, np.exp(1j * k * x) / math.sqrt(grid.length))


def sech_state(grid: Grid1D, amplitude: float = 1.0, width: float = 1.0, phase_slope: float = 0.0) -> PhasePair:
    """A·sech((x − x_c)/w)·e^{i·s·x}, centred on the grid"""
    if not width > 0:
        raise ValueError(f"width must be positive, got {width}")
    x = grid.x
    return PhasePair.from_complex(grid, amplitude / np.cosh((x - grid.center) / width) * np.exp(1j * phase_slope * x))
