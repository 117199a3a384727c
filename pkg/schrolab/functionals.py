"""Conserved functionals of the linear and nonlinear Schrödinger equations and their gradients."""

import math
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from .field_core import PhasePair, RealField, derivative, integrate, inner, norm
from .structures import LinearDiag, NlsRecursion, PoissonStructure, SchrodingerOperator, poisson_bracket

FUNCTIONAL_NAME = re.compile(r"^(?:H(?P<order>\d+)|K(?P<k>-1|0|1))$")


class FunctionalSpec(ABC):
    """A functional with an analytic gradient under the quadrature inner product"""

    @property
    @abstractmethod
    def name(self) -> str:
        """Short label used in tables and CSV headers"""

    @abstractmethod
    def evaluate(self, u: PhasePair) -> float:
        pass

    @abstractmethod
    def gradient(self, u: PhasePair) -> PhasePair:
        pass

    def __call__(self, u: PhasePair) -> float:
        return self.evaluate(u)


@dataclass(frozen=True, eq=False)
class Hn(FunctionalSpec):
    """H_n = ½∫(p ℋⁿp + q ℋⁿq)"""

    order: int
    operator: SchrodingerOperator

    def __post_init__(self):
        if self.order < 0:
            raise ValueError(f"order must be non-negative, got {self.order}")

    @property
    def name(self) -> str:
        return f"H{self.order}"

    def evaluate(self, u: PhasePair) -> float:
        return 0.5 * inner(u, self.gradient(u))

    def gradient(self, u: PhasePair) -> PhasePair:
        return PhasePair(self.operator.power(u.q, self.order), self.operator.power(u.p, self.order))


@dataclass(frozen=True, eq=False)
class Kminus1(FunctionalSpec):
    """K₋₁ = ½∫(p² + q²)"""

    @property
    def name(self) -> str:
        return "K-1"

    def evaluate(self, u: PhasePair) -> float:
        return 0.5 * u.norm2

    def gradient(self, u: PhasePair) -> PhasePair:
        return u


@dataclass(frozen=True, eq=False)
class K0(FunctionalSpec):
    """K₀ = (ħ/√2m)∫q·∂ₓp"""

    hbar: float = 1.0
    mass: float = 0.5

    @property
    def name(self) -> str:
        return "K0"

    @property
    def dispersion(self) -> float:
        return self.hbar / math.sqrt(2.0 * self.mass)

    def evaluate(self, u: PhasePair) -> float:
        return self.dispersion * integrate(u.q * derivative(u.p))

    def gradient(self, u: PhasePair) -> PhasePair:
        c = self.dispersion
        return PhasePair(derivative(u.p) * c, derivative(u.q) * -c)


@dataclass(frozen=True, eq=False)
class K1(FunctionalSpec):
    """K₁ = ½∫{(ħ²/2m)(pₓ² + qₓ²) + (b/2)(p² + q²)²}"""

    hbar: float = 1.0
    mass: float = 0.5
    b: float = 1.0

    @property
    def name(self) -> str:
        return "K1"

    @property
    def kinetic_coefficient(self) -> float:
        return self.hbar**2 / (2.0 * self.mass)

    def evaluate(self, u: PhasePair) -> float:
        density = u.q.values**2 + u.p.values**2
        slopes = derivative(u.q).values ** 2 + derivative(u.p).values ** 2
        return 0.5 * integrate(RealField(u.grid, self.kinetic_coefficient * slopes + 0.5 * self.b * density**2))

    def gradient(self, u: PhasePair) -> PhasePair:
        density = u.q.values**2 + u.p.values**2
        kinetic = self.kinetic_coefficient
        return PhasePair.from_arrays(
            u.grid,
            -kinetic * derivative(u.q, 2).values + self.b * density * u.q.values,
            -kinetic * derivative(u.p, 2).values + self.b * density * u.p.values,
        )


@dataclass(frozen=True, eq=False)
class Moment(FunctionalSpec):
    """∫ q^a p^b, the polynomial test functionals of the Jacobi checks"""

    q_power: int
    p_power: int

    @property
    def name(self) -> str:
        return f"M{self.q_power}{self.p_power}"

    def evaluate(self, u: PhasePair) -> float:
        return integrate(RealField(u.grid, u.q.values**self.q_power * u.p.values**self.p_power))

    def gradient(self, u: PhasePair) -> PhasePair:
        q, p = u.q.values, u.p.values
        zeros = np.zeros_like(q)
        by_q = self.q_power * q ** (self.q_power - 1) * p**self.p_power if self.q_power else zeros
        by_p = self.p_power * q**self.q_power * p ** (self.p_power - 1) if self.p_power else zeros
        return PhasePair.from_arrays(u.grid, by_q, by_p)


def eval_functional(spec: FunctionalSpec, u: PhasePair) -> float:
    return spec.evaluate(u)


def grad_functional(spec: FunctionalSpec, u: PhasePair) -> PhasePair:
    return spec.gradient(u)


def functional_from_name(
    name: str,
    operator: Optional[SchrodingerOperator] = None,
    hbar: float = 1.0,
    mass: float = 0.5,
    b: float = 0.0,
) -> FunctionalSpec:
    """Resolve a label such as ``H2``, ``K-1``, ``K0`` or ``K1``"""
    match = FUNCTIONAL_NAME.match(name.strip())
    if not match:
        raise ValueError(f"unknown functional {name!r}; expected H<n>, K-1, K0 or K1")
    if match.group("order") is not None:
        if operator is None:
            raise ValueError(f"{name} needs a Schrödinger operator")
        return Hn(int(match.group("order")), operator)
    return {"-1": Kminus1(), "0": K0(hbar, mass), "1": K1(hbar, mass, b)}[match.group("k")]


def involution_matrix(specs: Sequence[FunctionalSpec], structure: PoissonStructure, u: PhasePair) -> np.ndarray:
    """Entry (i, j) is {specs[i], specs[j]} at u"""
    gradients = [spec.gradient(u) for spec in specs]
    size = len(gradients)
    matrix = np.zeros((size, size))
    for i in range(size):
        for j in range(size):
            matrix[i, j] = poisson_bracket(structure, gradients[i], gradients[j], state=u)
    return matrix


def involution_scale(specs: Sequence[FunctionalSpec], structure: PoissonStructure, u: PhasePair) -> np.ndarray:
    """Cauchy–Schwarz bound ‖∇F_i‖·‖P∇F_j‖ for each entry of the involution matrix"""
    gradients = [spec.gradient(u) for spec in specs]
    lengths = np.array([norm(g) for g in gradients])
    images = np.array([norm(structure.apply(g, u)) for g in gradients])
    return np.outer(lengths, images)


class Chain(str, Enum):
    LINEAR = "linear"
    NLS = "nls"


class RecursionReport(NamedTuple):
    """Relative residuals of a recursion chain

    Attributes:
        labels: link names, e.g. ``H0->H1``
        residuals: ‖c·T∇F_n − ∇F_{n+1}‖/‖∇F_{n+1}‖ per link
        constant: fitted normalization c (None for the linear chain, where c = 1)
    """

    labels: List[str]
    residuals: List[float]
    constant: Optional[float]

    @property
    def worst(self) -> float:
        return max(self.residuals)


def fit_normalization(images: Sequence[PhasePair], targets: Sequence[PhasePair]) -> float:
    """Least-squares c minimizing Σ‖c·image − target‖²"""
    numerator = sum(inner(image, target) for image, target in zip(images, targets))
    denominator = sum(inner(image, image) for image in images)
    if denominator == 0:
        raise ValueError("cannot fit a normalization against zero images")
    return numerator / denominator


def recursion_consistency(
    u: PhasePair,
    chain: Chain,
    operator: Optional[SchrodingerOperator] = None,
    hbar: float = 1.0,
    mass: float = 0.5,
    b: float = 1.0,
    depth: int = 4,
) -> RecursionReport:
    """Check ∇F_{n+1} = c·T∇F_n along the H_n tower (linear) or K₋₁ → K₀ → K₁ (nls)"""
    chain = Chain(chain)
    if chain is Chain.LINEAR:
        if operator is None:
            raise ValueError("the linear chain needs a Schrödinger operator")
        recursion = LinearDiag(operator)
        labels, residuals = [], []
        for n in range(depth):
            target = Hn(n + 1, operator).gradient(u)
            image = recursion.apply(Hn(n, operator).gradient(u))
            labels.append(f"H{n}->H{n + 1}")
            residuals.append(norm(target - image) / norm(target))
        return RecursionReport(labels, residuals, None)

    specs = [Kminus1(), K0(hbar, mass), K1(hbar, mass, b)]
    recursion = NlsRecursion.from_coupling(hbar, mass, b)
    gradients = [spec.gradient(u) for spec in specs]
    images = [recursion.apply(gradient, state=u) for gradient in gradients[:-1]]
    targets = gradients[1:]
    constant = fit_normalization(images, targets)
    residuals = [norm(image * constant - target) / norm(target) for image, target in zip(images, targets)]
    labels = [f"{a.name}->{c.name}" for a, c in zip(specs[:-1], specs[1:])]
    return RecursionReport(labels, residuals, constant)


def momentum_expectation(u: PhasePair, hbar: float = 1.0) -> float:
    """⟨p̂⟩ = −iħ∫ψ̄ψₓ = 2ħ∫q·∂ₓp, proportional to K₀"""
    return 2.0 * hbar * integrate(u.q * derivative(u.p))
