"""Numerical checks behind ``schrolab check`` and the reproduction suite behind ``schrolab report``."""

import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from .config import ExperimentConfig
from .dynamics import (
    EquationKind,
    IntegratorSpec,
    NlsParameters,
    Scheme,
    continuity_residual,
    gaussian_state,
    madelung_consistency,
    madelung_from_state,
    madelung_hamiltonian,
    run,
    sech_state,
)
from .field_core import Boundary, Grid1D, PhasePair, fd_gradient, make_grid, norm, random_phase_pair
from .functionals import (
    Chain,
    FunctionalSpec,
    Hn,
    K0,
    K1,
    Kminus1,
    Moment,
    fit_normalization,
    involution_matrix,
    involution_scale,
    recursion_consistency,
)
from .hierarchy import OperatorKind, SymbolicOperator, apply_operator, check_T_equals_TN_squared, generate_hierarchy, parse_flow, psi, render
from .structures import Canonical, NlsNonlocal, PoissonStructure, SchrodingerOperator, SchrodingerWeighted, jacobi_terms


class CheckResult(NamedTuple):
    """One thresholded quantity

    Attributes:
        name: what was measured
        value: the measured quantity
        threshold: the bound it is compared against
        comparison: "<" (must stay below), ">" (must exceed) or "==" (must match exactly)
    """

    name: str
    value: float
    threshold: float
    comparison: str = "<"

    @property
    def passed(self) -> bool:
        if self.comparison == ">":
            return self.value > self.threshold
        if self.comparison == "==":
            return self.value == self.threshold
        return self.value < self.threshold

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "value": float(self.value), "threshold": float(self.threshold), "comparison": self.comparison, "passed": self.passed}


@dataclass
class RunReport:
    """Outcome of a simulation, a check or the reproduction suite.

    ``wall_time`` is shown on the console but left out of ``to_dict`` so reports of the
    same configuration and seed serialize identically.
    """

    title: str
    config: Dict[str, Any] = field(default_factory=dict)
    drift: Dict[str, float] = field(default_factory=dict)
    involution: Dict[str, Any] = field(default_factory=dict)
    recursion: Dict[str, Any] = field(default_factory=dict)
    checks: List[CheckResult] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "title": self.title,
            "config": self.config,
            "drift": {name: float(value) for name, value in self.drift.items()},
            "involution": self.involution,
            "recursion": self.recursion,
            "checks": [check.to_dict() for check in self.checks],
            "passed": self.passed,
        }


def _states(grid: Grid1D, seed: int, count: int) -> List[PhasePair]:
    rng = np.random.default_rng(seed)
    return [random_phase_pair(grid, rng) for _ in range(count)]


def _decaying(grid: Grid1D, points: Optional[int] = None) -> Grid1D:
    """Decaying grid on the same interval; nonlocal checks need D⁻¹ without the mean constraint"""
    return make_grid(grid.length, points or grid.points, Boundary.DECAYING, grid.origin)


def _relative(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator > 0 else numerator


def _worst_involution(specs: Sequence[FunctionalSpec], structure: PoissonStructure, states: Sequence[PhasePair]) -> np.ndarray:
    """Entrywise max over states of |{F_i, F_j}| / (‖∇F_i‖·‖P∇F_j‖)"""
    worst = np.zeros((len(specs), len(specs)))
    for u in states:
        matrix = np.abs(involution_matrix(specs, structure, u))
        scale = involution_scale(specs, structure, u)
        ratio = np.divide(matrix, scale, out=matrix.copy(), where=scale > 0)
        worst = np.maximum(worst, ratio)
    return worst


def _involution_checks(specs, structures, states, tolerance, report: RunReport) -> None:
    report.involution["functionals"] = [spec.name for spec in specs]
    for structure in structures:
        worst = _worst_involution(specs, structure, states)
        report.involution[structure.name] = worst.tolist()
        report.checks.append(CheckResult(f"involution under {structure.name}", float(worst.max()), tolerance))


def _recursion_record(recursion) -> Dict[str, Any]:
    return {
        "links": dict(zip(recursion.labels, [float(r) for r in recursion.residuals])),
        "constant": None if recursion.constant is None else float(recursion.constant),
    }


def _jacobi_ratio(structure: PoissonStructure, triple: Sequence[FunctionalSpec], states: Sequence[PhasePair]) -> float:
    worst = 0.0
    for u in states:
        terms = jacobi_terms(structure, *triple, u)
        worst = max(worst, _relative(abs(sum(terms)), sum(abs(term) for term in terms)))
    return worst


JACOBI_TRIPLE = (Moment(3, 0), Moment(0, 3), Moment(1, 1))


def run_involution(config: ExperimentConfig, seed: int) -> RunReport:
    """Pairwise brackets of H₀..H₃ under Λ₁ and Λ₀ (lse) or of K₋₁, K₀, K₁ under Λ₁ (nls)"""
    report = RunReport("involution", config.as_dict())
    grid = config.build_grid()
    states = _states(grid, seed, config.check.states)
    physics = config.physics
    if config.equation is EquationKind.LSE:
        operator = config.build_operator(grid)
        specs = [Hn(n, operator) for n in range(4)]
        structures = [Canonical(physics.hbar), SchrodingerWeighted(operator)]
    else:
        specs = [Kminus1(), K0(physics.hbar, physics.mass), K1(physics.hbar, physics.mass, physics.b)]
        structures = [Canonical(physics.hbar)]
    _involution_checks(specs, structures, states, config.check.tolerance, report)
    return report


def run_recursion(config: ExperimentConfig, seed: int) -> RunReport:
    """∇F_{n+1} against T̂∇F_n: the H_n tower on random states (lse), K₋₁ → K₀ → K₁ on the initial state (nls)"""
    report = RunReport("recursion", config.as_dict())
    physics = config.physics
    if config.equation is EquationKind.LSE:
        grid = config.build_grid()
        operator = config.build_operator(grid)
        reports = [recursion_consistency(u, Chain.LINEAR, operator=operator) for u in _states(grid, seed, config.check.states)]
        links = np.max([recursion.residuals for recursion in reports], axis=0)
        report.recursion = {"links": dict(zip(reports[0].labels, links.tolist())), "constant": None}
        report.checks.append(CheckResult("linear chain H0..H4", float(links.max()), config.check.tolerance))
        return report

    grid = config.build_grid()
    if grid.is_periodic:
        grid = _decaying(grid)
    u = config.initial_state(grid)
    recursion = recursion_consistency(u, Chain.NLS, hbar=physics.hbar, mass=physics.mass, b=physics.b)
    report.recursion = _recursion_record(recursion)
    for label, residual in zip(recursion.labels, recursion.residuals):
        report.checks.append(CheckResult(f"nls chain {label}", residual, config.check.structure_tolerance))
    return report


def run_jacobi(config: ExperimentConfig, seed: int) -> RunReport:
    """Cyclic Jacobi sums of Λ₁, Λ₂ and Λ₁+Λ₂ over cubic and quadratic moments, on a decaying grid"""
    report = RunReport("jacobi", config.as_dict())
    physics = config.physics
    grid = _decaying(config.build_grid(), config.check.jacobi_points)
    states = _states(grid, seed, config.check.states)
    canonical = Canonical(physics.hbar)
    nonlocal_ = NlsNonlocal.from_coupling(physics.hbar, physics.mass, physics.b)
    for structure in (canonical, nonlocal_, canonical + nonlocal_):
        report.checks.append(CheckResult(f"jacobi {structure.name}", _jacobi_ratio(structure, JACOBI_TRIPLE, states), config.check.structure_tolerance))
    return report


def run_madelung(config: ExperimentConfig, seed: int) -> RunReport:
    """Transformed rates, continuity and the transformed Hamiltonian on the initial state"""
    if config.equation is not EquationKind.LSE:
        raise ValueError("the madelung check needs equation = lse")
    report = RunReport("madelung", config.as_dict())
    grid = config.build_grid()
    operator = config.build_operator(grid)
    u = config.initial_state(grid)
    tolerance = config.check.structure_tolerance
    _madelung_checks(u, operator, tolerance, report)
    return report


def _madelung_checks(u: PhasePair, operator: SchrodingerOperator, tolerance: float, report: RunReport) -> None:
    result = madelung_consistency(u, operator)
    report.checks.append(CheckResult("madelung rates", result.residual, tolerance))
    report.checks.append(CheckResult("continuity", continuity_residual(u, operator), tolerance))
    fields = madelung_from_state(u, operator.hbar, operator.mass)
    transformed = madelung_hamiltonian(fields, operator.potential, operator.hbar, operator.mass)
    doubled = 2.0 * Hn(1, operator).evaluate(u)
    report.checks.append(CheckResult("madelung hamiltonian vs 2*H1", _relative(abs(transformed - doubled), abs(doubled)), tolerance))


CHECKS: Dict[str, Callable[[ExperimentConfig, int], RunReport]] = {
    "involution": run_involution,
    "recursion": run_recursion,
    "jacobi": run_jacobi,
    "madelung": run_madelung,
}


def _harmonic_grid(points: int = 256) -> Grid1D:
    return make_grid(20.0, points, Boundary.PERIODIC, -10.0)


def _conserved_tower(seed: int, report: RunReport) -> None:
    grid = _harmonic_grid()
    operator = SchrodingerOperator.harmonic(grid, 1.0, 1.0, 1.0)
    record = run(EquationKind.LSE, gaussian_state(grid, 1.0), operator, IntegratorSpec(Scheme.STRANG, 1e-3, 10000, 100), [Hn(n, operator) for n in range(3)])
    report.drift.update({f"lse-tower {name}": value for name, value in record.drift.items()})
    report.checks.append(CheckResult("lse tower: H0 drift", record.drift["H0"], 1e-11))
    report.checks.append(CheckResult("lse tower: H1 drift", record.drift["H1"], 1e-5))
    report.checks.append(CheckResult("lse tower: H2 drift", record.drift["H2"], 1e-5))


def _involution(seed: int, report: RunReport) -> None:
    grid = _harmonic_grid(128)
    operator = SchrodingerOperator.harmonic(grid, 1.0, 1.0, 1.0)
    _involution_checks([Hn(n, operator) for n in range(4)], [Canonical(), SchrodingerWeighted(operator)], _states(grid, seed, 20), 1e-8, report)


def _coincidence(seed: int, report: RunReport) -> None:
    grid = _harmonic_grid(128)
    operator = SchrodingerOperator.harmonic(grid, 1.0, 1.0, 1.0)
    weighted, canonical = SchrodingerWeighted(operator), Canonical()
    worst = 0.0
    for u in _states(grid, seed, 5):
        target = canonical.apply(Hn(1, operator).gradient(u))
        worst = max(worst, norm(weighted.apply(Hn(0, operator).gradient(u)) - target) / norm(target))
    report.checks.append(CheckResult("coincidence Λ0∇H0 = Λ1∇H1", worst, 1e-9))

    decaying = make_grid(20.0, 256, Boundary.DECAYING, -10.0)
    nonlocal_ = NlsNonlocal.from_coupling(1.0, 0.5, -2.0)
    k0, k1 = K0(1.0, 0.5), K1(1.0, 0.5, -2.0)
    states = _states(decaying, seed, 5)
    images = [nonlocal_.apply(k0.gradient(u), u) for u in states]
    targets = [canonical.apply(k1.gradient(u)) for u in states]
    constant = fit_normalization(images, targets)
    worst = max(norm(image * constant - target) / norm(target) for image, target in zip(images, targets))
    report.recursion["coincidence constant"] = float(constant)
    report.checks.append(CheckResult("coincidence c·Λ2∇K0 = Λ1∇K1", worst, 1e-5))


def _nls_soliton_grid(boundary: Boundary) -> Grid1D:
    return make_grid(30.0, 256, boundary, -15.0)


def _nls_conservation(seed: int, report: RunReport) -> None:
    grid = _nls_soliton_grid(Boundary.PERIODIC)
    params = NlsParameters(1.0, 0.5, -2.0)
    specs = [Kminus1(), K0(1.0, 0.5), K1(1.0, 0.5, -2.0)]
    record = run(EquationKind.NLS, sech_state(grid), params, IntegratorSpec(Scheme.STRANG, 1e-3, 5000, 100), specs)
    report.drift.update({f"nls-soliton {name}": value for name, value in record.drift.items()})
    report.checks.append(CheckResult("nls soliton: K-1 drift", record.drift["K-1"], 1e-11))
    report.checks.append(CheckResult("nls soliton: K0 drift", record.drift["K0"], 1e-5))
    report.checks.append(CheckResult("nls soliton: K1 drift", record.drift["K1"], 1e-5))


def _translation(seed: int, report: RunReport) -> None:
    grid = _harmonic_grid()
    momentum = K0(1.0, 1.0)
    integrator = IntegratorSpec(Scheme.STRANG, 1e-3, 2000, 100)
    u0 = gaussian_state(grid, 1.0)
    trapped = run(EquationKind.LSE, u0, SchrodingerOperator.harmonic(grid, 1.0, 1.0, 1.0), integrator, [momentum])
    free = run(EquationKind.LSE, u0, SchrodingerOperator.free(grid, 1.0, 1.0), integrator, [momentum])
    report.drift["translation harmonic K0"] = trapped.drift["K0"]
    report.drift["translation free K0"] = free.drift["K0"]
    report.checks.append(CheckResult("translation: K0 drift with harmonic U", trapped.drift["K0"], 1e-2, ">"))
    report.checks.append(CheckResult("translation: K0 drift with U = 0", free.drift["K0"], 1e-7))


def _jacobi(seed: int, report: RunReport) -> None:
    grid = make_grid(20.0, 192, Boundary.DECAYING, -10.0)
    states = _states(grid, seed, 3)
    nonlocal_ = NlsNonlocal.from_coupling(1.0, 0.5, -2.0)
    for structure in (nonlocal_, Canonical() + nonlocal_):
        report.checks.append(CheckResult(f"jacobi {structure.name}", _jacobi_ratio(structure, JACOBI_TRIPLE, states), 1e-5))


_TN_FLOWS = (
    "psi_x",
    "I*(psi_xx + psi**2*conj(psi))",
    "-(psi_xxx + 3*psi*conj(psi)*psi_x)",
    "-I*(psi_xxxx + 4*psi*conj(psi)*psi_xx + 3*conj(psi)*psi_x**2 + 2*psi*psi_x*conj(psi_x) + psi**2*conj(psi_xx) + 3/2*psi**3*conj(psi)**2)",
)


def _symbolic(seed: int, report: RunReport) -> None:
    flows = generate_hierarchy(SymbolicOperator(OperatorKind.TN), parse_flow("-I*psi"), 4)
    mismatches = sum(flow != parse_flow(text) for flow, text in zip(flows, _TN_FLOWS))
    report.recursion["TN hierarchy"] = [render(flow) for flow in flows]
    report.checks.append(CheckResult("TN hierarchy from -i*psi, depth 4", float(mismatches), 0.0, "=="))

    tk = apply_operator(SymbolicOperator(OperatorKind.TK), psi(1))
    report.checks.append(CheckResult("TK(psi_x) = psi_xxx + psi*psi_x", float(tk != parse_flow("psi_xxx + psi*psi_x")), 0.0, "=="))
    report.checks.append(CheckResult("T = TN^2 at U = 0", float(check_T_equals_TN_squared(False).holds), 1.0, "=="))
    report.checks.append(CheckResult("T = TN^2 refuted with U", float(check_T_equals_TN_squared(True).holds), 0.0, "=="))


def _madelung(seed: int, report: RunReport) -> None:
    grid = _harmonic_grid()
    operator = SchrodingerOperator.harmonic(grid, 1.0, 1.0, 1.0)
    _madelung_checks(gaussian_state(grid, 1.0), operator, 1e-5, report)


def _gradient_oracle(seed: int, report: RunReport) -> None:
    grid = make_grid(20.0, 64, Boundary.PERIODIC, -10.0)
    operator = SchrodingerOperator.harmonic(grid, 1.0, 1.0, 1.0)
    specs = [Hn(0, operator), Hn(1, operator), Hn(2, operator), Kminus1(), K0(1.0, 0.5), K1(1.0, 0.5, -2.0), Moment(3, 0), Moment(1, 2)]
    states = _states(grid, seed, 10)
    for spec in specs:
        worst = 0.0
        for u in states:
            analytic = spec.gradient(u)
            worst = max(worst, norm(analytic - fd_gradient(spec, u)) / norm(analytic))
        report.checks.append(CheckResult(f"gradient oracle {spec.name}", worst, 1e-5))


def _recursion_chains(seed: int, report: RunReport) -> None:
    grid = _harmonic_grid(128)
    operator = SchrodingerOperator.harmonic(grid, 1.0, 1.0, 1.0)
    worst = max(recursion_consistency(u, Chain.LINEAR, operator=operator).worst for u in _states(grid, seed, 5))
    report.checks.append(CheckResult("linear chain H0..H4", worst, 1e-9))

    soliton = sech_state(_nls_soliton_grid(Boundary.DECAYING))
    recursion = recursion_consistency(soliton, Chain.NLS, hbar=1.0, mass=0.5, b=-2.0)
    report.recursion["nls chain"] = _recursion_record(recursion)
    for label, residual in zip(recursion.labels, recursion.residuals):
        report.checks.append(CheckResult(f"nls chain {label}", residual, 1e-5))


ACCEPTANCE_CRITERIA: Dict[str, Callable[[int, RunReport], None]] = {
    "conserved tower": _conserved_tower,
    "involution": _involution,
    "bi-hamiltonian coincidence": _coincidence,
    "nls conservation": _nls_conservation,
    "translation": _translation,
    "jacobi and compatibility": _jacobi,
    "symbolic hierarchy": _symbolic,
    "madelung": _madelung,
    "gradient oracle": _gradient_oracle,
    "recursion chains": _recursion_chains,
}


def run_acceptance_suite(seed: int = 0, on_criterion: Optional[Callable[[str, float], None]] = None) -> RunReport:
    """Run every reproduction criterion; ``on_criterion`` receives each name and its wall time"""
    report = RunReport("report", {"seed": seed, "criteria": list(ACCEPTANCE_CRITERIA)})
    started = time.perf_counter()
    for name, criterion in ACCEPTANCE_CRITERIA.items():
        begun = time.perf_counter()
        criterion(seed, report)
        if on_criterion is not None:
            on_criterion(name, time.perf_counter() - begun)
    report.wall_time = time.perf_counter() - started
    return report
