import numpy as np
import pytest

from schrolab.field_core import GridMismatchError, PhasePair, RealField, inner, make_grid, norm, random_phase_pair
from schrolab.functionals import K0, Hn, Kminus1, Moment
from schrolab.structures import (
    Canonical,
    LinearDiag,
    NlsNonlocal,
    NlsRecursion,
    SchrodingerOperator,
    SchrodingerWeighted,
    SumStructure,
    SymplecticFormSpec,
    apply_poisson,
    apply_recursion,
    apply_schrodinger,
    jacobi_residual,
    jacobi_terms,
    poisson_bracket,
)


def _relative_jacobi(structure, triple, u):
    terms = jacobi_terms(structure, *triple, u)
    return abs(sum(terms)) / sum(abs(term) for term in terms)


@pytest.mark.parametrize("hbar, mass", [(0.0, 1.0), (1.0, -1.0)])
def test_schrodinger_operator_validation(periodic_grid, hbar, mass):
    with pytest.raises(ValueError):
        SchrodingerOperator.free(periodic_grid, hbar, mass)


def test_apply_schrodinger_to_plane_wave():
    grid = make_grid(2.0 * np.pi, 64)
    op = SchrodingerOperator.free(grid, hbar=1.0, mass=0.5)
    wave = RealField.from_function(grid, lambda x: np.cos(3 * x))
    assert np.allclose(apply_schrodinger(op, wave).values, 9.0 * wave.values)


def test_apply_schrodinger_grid_mismatch(harmonic, decaying_grid):
    with pytest.raises(GridMismatchError):
        harmonic.apply(RealField.zeros(decaying_grid))


def test_harmonic_spectrum(harmonic):
    energies, _ = harmonic.eigenstates(4)
    assert np.allclose(energies, [0.5, 1.5, 2.5, 3.5], atol=1e-8)


def test_weighted_and_canonical_agree_on_eigenstate(harmonic):
    energies, vectors = harmonic.eigenstates(3)
    grid = harmonic.grid
    u = PhasePair.from_arrays(grid, vectors[:, 2] / np.sqrt(grid.spacing), np.zeros(grid.points))
    energy = energies[2]

    weighted = SchrodingerWeighted(harmonic).apply(u)
    canonical = Canonical(harmonic.hbar).apply(LinearDiag(harmonic).apply(u))
    rotation = PhasePair(RealField.zeros(grid), u.q * -energy)
    assert norm(weighted - canonical) < 1e-12
    assert norm(weighted - rotation) < 1e-7 * energy


@pytest.mark.parametrize("seed", range(5))
def test_linear_coincidence_on_random_states(harmonic, seed):
    u = random_phase_pair(harmonic.grid, np.random.default_rng(seed))
    lhs = SchrodingerWeighted(harmonic).apply(Hn(0, harmonic).gradient(u))
    rhs = Canonical(harmonic.hbar).apply(Hn(1, harmonic).gradient(u))
    assert norm(lhs - rhs) < 1e-9 * norm(rhs)


def test_canonical_bracket_is_antisymmetric(periodic_grid, rng):
    a = random_phase_pair(periodic_grid, rng)
    b = random_phase_pair(periodic_grid, rng)
    structure = Canonical(hbar=2.0)
    assert poisson_bracket(structure, a, b) == pytest.approx(-poisson_bracket(structure, b, a))
    assert poisson_bracket(structure, a, b) == pytest.approx(0.5 * float(np.dot(periodic_grid.weights, a.q.values * b.p.values - a.p.values * b.q.values)))


def test_poisson_bracket_grid_mismatch(periodic_grid, decaying_grid, rng):
    with pytest.raises(GridMismatchError):
        poisson_bracket(Canonical(), random_phase_pair(periodic_grid, rng), random_phase_pair(decaying_grid, rng))


def test_nonlocal_structure_needs_state(decaying_grid, rng):
    structure = NlsNonlocal.from_coupling(1.0, 0.5, -2.0)
    with pytest.raises(ValueError, match="depends on the state"):
        structure.apply(random_phase_pair(decaying_grid, rng))


def test_from_coupling(decaying_grid, rng):
    structure = NlsNonlocal.from_coupling(1.0, 0.5, -2.0)
    assert structure.alpha == pytest.approx(-2.0)
    assert structure.dispersion == pytest.approx(1.0)
    assert structure.b == pytest.approx(-2.0)

    u = random_phase_pair(decaying_grid, rng)
    snapshot = structure.at(u)
    a = random_phase_pair(decaying_grid, rng)
    assert norm(snapshot.apply(a) - structure.apply(a, u)) == 0.0


def test_nonlocal_structure_is_skew(decaying_grid, rng):
    u, a, b = (random_phase_pair(decaying_grid, rng) for _ in range(3))
    structure = NlsNonlocal.from_coupling(1.0, 0.5, -2.0)
    forward = inner(a, structure.apply(b, u))
    backward = inner(b, structure.apply(a, u))
    scale = norm(a) * norm(structure.apply(b, u))
    assert abs(forward + backward) < 1e-6 * scale


def test_nonlocal_structure_factors_through_recursion(decaying_grid, rng):
    u, a = random_phase_pair(decaying_grid, rng), random_phase_pair(decaying_grid, rng)
    structure = NlsNonlocal.from_coupling(1.0, 0.5, 3.0)
    recursion = NlsRecursion.from_coupling(1.0, 0.5, 3.0)
    direct = apply_poisson(structure, a, u)
    factored = Canonical().apply(apply_recursion(recursion, a, u))
    assert norm(direct - factored) < 1e-12 * norm(direct)


def test_recursion_maps_norm_to_momentum(decaying_grid, rng):
    u = random_phase_pair(decaying_grid, rng)
    recursion = NlsRecursion.from_coupling(1.0, 0.5, -2.0)
    image = recursion.apply(Kminus1().gradient(u), u)
    assert norm(image - K0(1.0, 0.5).gradient(u)) < 1e-12


def test_sum_structure(decaying_grid, rng):
    u, a = random_phase_pair(decaying_grid, rng), random_phase_pair(decaying_grid, rng)
    nonlocal_ = NlsNonlocal.from_coupling(1.0, 0.5, -2.0)
    total = Canonical() + nonlocal_
    assert isinstance(total, SumStructure)
    assert total.name == "Λ₁+Λ₂"
    assert norm(total.apply(a, u) - Canonical().apply(a) - nonlocal_.apply(a, u)) < 1e-14


def test_symplectic_form_inverts_canonical(periodic_grid, rng):
    a = random_phase_pair(periodic_grid, rng)
    tangent = Canonical(hbar=0.5).apply(a)
    assert norm(SymplecticFormSpec.OMEGA1.lower_index(tangent, hbar=0.5) - a) < 1e-14
    x, y = random_phase_pair(periodic_grid, rng), random_phase_pair(periodic_grid, rng)
    assert SymplecticFormSpec.OMEGA1.pairing(x, y) == pytest.approx(-SymplecticFormSpec.OMEGA1.pairing(y, x))


def test_symplectic_forms_without_operator(periodic_grid, rng):
    assert SymplecticFormSpec.OMEGA2.poisson_name == "Λ₂"
    with pytest.raises(ValueError, match="only available through"):
        SymplecticFormSpec.OMEGA2.lower_index(random_phase_pair(periodic_grid, rng))


def test_jacobi_canonical():
    grid = make_grid(20.0, 64, "decaying")
    u = random_phase_pair(grid, np.random.default_rng(3))
    triple = (Moment(3, 0), Moment(0, 3), Moment(1, 1))
    assert _relative_jacobi(Canonical(), triple, u) < 1e-6
    assert jacobi_residual(Canonical(), *triple, u) == pytest.approx(abs(sum(jacobi_terms(Canonical(), *triple, u))))


def test_jacobi_nonlocal_and_sum():
    grid = make_grid(20.0, 192, "decaying")
    u = random_phase_pair(grid, np.random.default_rng(11))
    triple = (Moment(3, 0), Moment(0, 3), Moment(1, 1))
    nonlocal_ = NlsNonlocal.from_coupling(1.0, 0.5, -2.0)
    assert _relative_jacobi(nonlocal_, triple, u) < 1e-5
    assert _relative_jacobi(Canonical() + nonlocal_, triple, u) < 1e-5
