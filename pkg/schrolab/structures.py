"""Operator algebra: the Schrödinger operator, Poisson structures, recursion operators and brackets.

Convention: a covector is a gradient pair (δF/δq, δF/δp) and a tangent is (q̇, ṗ), both stored as
:class:`PhasePair`. Every Poisson structure maps covectors to tangents; the bracket of two
functionals is ⟨∇F, P∇G⟩ under the quadrature inner product.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from .field_core import (
    DEFAULT_FD_EPS,
    Functional,
    Grid1D,
    GridMismatchError,
    PhasePair,
    RealField,
    derivative,
    dminus1,
    fd_gradient,
    inner,
)

# Outer finite-difference step for nested brackets
JACOBI_OUTER_EPS = 1e-4


@dataclass(frozen=True, eq=False)
class SchrodingerOperator:
    """ℋ = −(ħ²/2m)∂ₓ² + U"""

    hbar: float
    mass: float
    potential: RealField

    def __post_init__(self):
        if not self.hbar > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")
        if not self.mass > 0:
            raise ValueError(f"mass must be positive, got {self.mass}")

    @classmethod
    def free(cls, grid: Grid1D, hbar: float = 1.0, mass: float = 1.0) -> "SchrodingerOperator":
        return cls(hbar, mass, RealField.zeros(grid))

    @classmethod
    def harmonic(cls, grid: Grid1D, hbar: float = 1.0, mass: float = 1.0, omega: float = 1.0, center: float = 0.0) -> "SchrodingerOperator":
        return cls(hbar, mass, RealField.from_function(grid, lambda x: 0.5 * mass * omega**2 * (x - center) ** 2))

    @property
    def grid(self) -> Grid1D:
        return self.potential.grid

    @property
    def kinetic_coefficient(self) -> float:
        return self.hbar**2 / (2.0 * self.mass)

    def apply(self, f: RealField) -> RealField:
        if f.grid != self.grid:
            raise GridMismatchError(f"field grid {f.grid} does not match the potential grid {self.grid}")
        return RealField(self.grid, -self.kinetic_coefficient * derivative(f, 2).values + self.potential.values * f.values)

    def power(self, f: RealField, n: int) -> RealField:
        if n < 0:
            raise ValueError(f"power must be non-negative, got {n}")
        for _ in range(n):
            f = self.apply(f)
        return f

    def matrix(self) -> np.ndarray:
        """Dense matrix of the discretized operator, built column by column"""
        identity = np.eye(self.grid.points)
        return np.column_stack([self.apply(RealField(self.grid, column)).values for column in identity])

    def eigenstates(self, count: int) -> Tuple[np.ndarray, np.ndarray]:
        """Lowest ``count`` energies and grid eigenvectors (columns) of the symmetrized matrix"""
        matrix = self.matrix()
        return linalg.eigh(0.5 * (matrix + matrix.T), subset_by_index=[0, count - 1])


def apply_schrodinger(op: SchrodingerOperator, f: RealField) -> RealField:
    return op.apply(f)


def _check_grid(covector: PhasePair, grid: Grid1D) -> None:
    if covector.grid != grid:
        raise GridMismatchError(f"covector grid {covector.grid} does not match {grid}")


class RecursionOperator(ABC):
    """Maps the gradient of one conserved functional to the gradient of the next"""

    @abstractmethod
    def apply(self, covector: PhasePair, state: Optional[PhasePair] = None) -> PhasePair:
        """Image of a covector, evaluated at ``state`` when the operator depends on it"""


@dataclass(frozen=True, eq=False)
class LinearDiag(RecursionOperator):
    """T̂ = diag(ℋ, ℋ), independent of the state"""

    operator: SchrodingerOperator

    def apply(self, covector: PhasePair, state: Optional[PhasePair] = None) -> PhasePair:
        return PhasePair(self.operator.apply(covector.q), self.operator.apply(covector.p))


def _coupling(hbar: float, mass: float, b: float) -> float:
    return b * math.sqrt(2.0 * mass) / hbar


@dataclass(frozen=True, eq=False)
class _NlsParameters:
    hbar: float
    mass: float
    alpha: float
    state: Optional[PhasePair] = None

    def __post_init__(self):
        if not self.hbar > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")
        if not self.mass > 0:
            raise ValueError(f"mass must be positive, got {self.mass}")

    @classmethod
    def from_coupling(cls, hbar: float, mass: float, b: float, state: Optional[PhasePair] = None):
        """Construct with α = b·√(2m)/ħ"""
        return cls(hbar, mass, _coupling(hbar, mass, b), state)

    @property
    def dispersion(self) -> float:
        """c = ħ/√(2m)"""
        return self.hbar / math.sqrt(2.0 * self.mass)

    @property
    def b(self) -> float:
        return self.alpha * self.hbar / math.sqrt(2.0 * self.mass)

    def at(self, state: PhasePair):
        """Copy holding a snapshot of ``state``"""
        return type(self)(self.hbar, self.mass, self.alpha, state)

    def _mixing(self, covector: PhasePair, state: Optional[PhasePair]) -> Tuple[PhasePair, RealField]:
        """Base state u and s = D⁻¹(p·a − q·b) for the covector (a, b)"""
        u = state if state is not None else self.state
        if u is None:
            raise ValueError(f"{type(self).__name__} depends on the state; pass one or construct it with .at(state)")
        _check_grid(covector, u.grid)
        return u, dminus1(u.p * covector.q - u.q * covector.p)


class PoissonStructure(ABC):
    """Skew map from covectors to tangent vectors"""

    name: str = "P"

    @abstractmethod
    def apply(self, covector: PhasePair, state: Optional[PhasePair] = None) -> PhasePair:
        """Tangent (q̇, ṗ) generated by the covector, at ``state`` when the structure depends on it"""

    def __add__(self, other: "PoissonStructure") -> "SumStructure":
        return SumStructure((self, other))


@dataclass(frozen=True, eq=False)
class Canonical(PoissonStructure):
    """Λ₁: q̇ = δF/δp / ħ, ṗ = −δF/δq / ħ"""

    hbar: float = 1.0
    name = "Λ₁"

    def apply(self, covector: PhasePair, state: Optional[PhasePair] = None) -> PhasePair:
        return PhasePair(covector.p / self.hbar, -covector.q / self.hbar)


@dataclass(frozen=True, eq=False)
class SchrodingerWeighted(PoissonStructure):
    """Λ₀ = Λ₁∘T̂"""

    operator: SchrodingerOperator
    name = "Λ₀"

    def apply(self, covector: PhasePair, state: Optional[PhasePair] = None) -> PhasePair:
        _check_grid(covector, self.operator.grid)
        return Canonical(self.operator.hbar).apply(LinearDiag(self.operator).apply(covector))


@dataclass(frozen=True, eq=False)
class NlsNonlocal(_NlsParameters, PoissonStructure):
    """Λ₂ of the nonlinear Schrödinger equation, with s = D⁻¹(p·a − q·b):

    q̇ = (−c·∂ₓa + 2α·p·s)/ħ,  ṗ = (−c·∂ₓb − 2α·q·s)/ħ
    """

    name = "Λ₂"

    def apply(self, covector: PhasePair, state: Optional[PhasePair] = None) -> PhasePair:
        u, mixing = self._mixing(covector, state)
        c = self.dispersion
        q_dot = -c * derivative(covector.q).values + 2.0 * self.alpha * u.p.values * mixing.values
        p_dot = -c * derivative(covector.p).values - 2.0 * self.alpha * u.q.values * mixing.values
        return PhasePair.from_arrays(u.grid, q_dot / self.hbar, p_dot / self.hbar)


@dataclass(frozen=True, eq=False)
class SumStructure(PoissonStructure):
    """Sum of Poisson structures; the tangent maps are added"""

    parts: Tuple[PoissonStructure, ...]

    @property
    def name(self) -> str:
        return "+".join(part.name for part in self.parts)

    def apply(self, covector: PhasePair, state: Optional[PhasePair] = None) -> PhasePair:
        tangents = [part.apply(covector, state) for part in self.parts]
        total = tangents[0]
        for tangent in tangents[1:]:
            total = total + tangent
        return total


@dataclass(frozen=True, eq=False)
class NlsRecursion(_NlsParameters, RecursionOperator):
    """T̂_N = Λ₁⁻¹∘Λ₂, with s = D⁻¹(p·a − q·b):

    (a, b) ↦ (c·∂ₓb + 2α·q·s, −c·∂ₓa + 2α·p·s)
    """

    def apply(self, covector: PhasePair, state: Optional[PhasePair] = None) -> PhasePair:
        u, mixing = self._mixing(covector, state)
        c = self.dispersion
        first = c * derivative(covector.p).values + 2.0 * self.alpha * u.q.values * mixing.values
        second = -c * derivative(covector.q).values + 2.0 * self.alpha * u.p.values * mixing.values
        return PhasePair.from_arrays(u.grid, first, second)


class SymplecticFormSpec(str, Enum):
    """Symplectic forms paired with the Poisson structures.

    Only ω₁ is realized as an operator; ω₀ and ω₂ need ℋ⁻¹ and ℋ_N⁻¹, which are never formed.
    """

    OMEGA1 = "omega1"
    OMEGA0 = "omega0"
    OMEGA2 = "omega2"

    @property
    def formula(self) -> str:
        return {
            SymplecticFormSpec.OMEGA1: "ħ∫δp∧δq",
            SymplecticFormSpec.OMEGA0: "ħ∫ℋ⁻¹δp∧δq",
            SymplecticFormSpec.OMEGA2: "ħ∫ℋ_N⁻¹δp∧δq",
        }[self]

    @property
    def poisson_name(self) -> str:
        return {SymplecticFormSpec.OMEGA1: "Λ₁", SymplecticFormSpec.OMEGA0: "Λ₀", SymplecticFormSpec.OMEGA2: "Λ₂"}[self]

    def lower_index(self, tangent: PhasePair, hbar: float = 1.0) -> PhasePair:
        """Covector ω(X, ·) of a tangent X; inverse of the matching Poisson structure"""
        if self is not SymplecticFormSpec.OMEGA1:
            raise ValueError(f"{self.value} = {self.formula} is only available through its Poisson structure {self.poisson_name}")
        return PhasePair(-tangent.p * hbar, tangent.q * hbar)

    def pairing(self, x: PhasePair, y: PhasePair, hbar: float = 1.0) -> float:
        return inner(self.lower_index(x, hbar), y)


def apply_poisson(structure: PoissonStructure, covector: PhasePair, state: Optional[PhasePair] = None) -> PhasePair:
    return structure.apply(covector, state)


def apply_recursion(operator: RecursionOperator, covector: PhasePair, state: Optional[PhasePair] = None) -> PhasePair:
    return operator.apply(covector, state)


def poisson_bracket(structure: PoissonStructure, grad_f: PhasePair, grad_g: PhasePair, state: Optional[PhasePair] = None) -> float:
    """{F, G} = ⟨∇F, P∇G⟩; for Λ₁ this is (1/ħ)∫(F_q G_p − F_p G_q)"""
    if grad_f.grid != grad_g.grid:
        raise GridMismatchError(f"gradient grids differ: {grad_f.grid} vs {grad_g.grid}")
    return inner(grad_f, structure.apply(grad_g, state))


def _gradient(functional: Functional, u: PhasePair, eps: float) -> PhasePair:
    analytic = getattr(functional, "gradient", None)
    if analytic is not None:
        return analytic(u)
    return fd_gradient(functional, u, eps)


def jacobi_terms(
    structure: PoissonStructure,
    f: Functional,
    g: Functional,
    h: Functional,
    u: PhasePair,
    outer_eps: float = JACOBI_OUTER_EPS,
    inner_eps: float = DEFAULT_FD_EPS,
) -> Tuple[float, float, float]:
    """The cyclic terms {F,{G,H}}, {G,{H,F}}, {H,{F,G}} at u.

    Inner brackets are functionals of the state (the structure is re-evaluated at each
    perturbed state); their gradients come from fd_gradient.
    """

    def nested(a: Functional, b: Functional, c: Functional) -> float:
        def bracket(v: PhasePair) -> float:
            return poisson_bracket(structure, _gradient(b, v, inner_eps), _gradient(c, v, inner_eps), state=v)

        return poisson_bracket(structure, _gradient(a, u, inner_eps), fd_gradient(bracket, u, outer_eps), state=u)

    return nested(f, g, h), nested(g, h, f), nested(h, f, g)


def jacobi_residual(
    structure: PoissonStructure,
    f: Functional,
    g: Functional,
    h: Functional,
    u: PhasePair,
    outer_eps: float = JACOBI_OUTER_EPS,
    inner_eps: float = DEFAULT_FD_EPS,
) -> float:
    return abs(sum(jacobi_terms(structure, f, g, h, u, outer_eps, inner_eps)))
