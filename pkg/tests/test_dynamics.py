import math

import numpy as np
import pytest

from schrolab.dynamics import (
    EquationKind,
    IntegratorSpec,
    NlsParameters,
    Scheme,
    SimulationDivergedError,
    continuity_residual,
    drift_statistics,
    gaussian_state,
    madelung_consistency,
    madelung_from_state,
    madelung_hamiltonian,
    madelung_rhs,
    plane_wave_state,
    run,
    sech_state,
    step_lse,
    step_nls,
)
from schrolab.field_core import PhasePair, make_grid, norm
from schrolab.functionals import Hn, Kminus1
from schrolab.structures import SchrodingerOperator


@pytest.fixture
def soliton_grid():
    return make_grid(30.0, 256, "periodic", -15.0)


@pytest.mark.parametrize("dt, steps, stride", [(0.0, 10, 1), (-1e-3, 10, 1), (1e-3, 0, 1), (1e-3, 10, 0)])
def test_integrator_spec_validation(dt, steps, stride):
    with pytest.raises(ValueError):
        IntegratorSpec(Scheme.STRANG, dt, steps, stride)


def test_integrator_spec_accepts_scheme_names():
    assert IntegratorSpec("rk4").scheme is Scheme.RK4


def test_nls_parameters():
    params = NlsParameters(1.0, 0.5, -2.0)
    assert params.alpha == pytest.approx(-2.0)
    with pytest.raises(ValueError, match="mass"):
        NlsParameters(1.0, 0.0, 1.0)


def test_zero_step_is_identity(harmonic):
    u = gaussian_state(harmonic.grid, 1.0)
    assert step_lse(u, harmonic, 0.0) is u
    assert step_nls(u, 1.0, 0.5, -2.0, 0.0) is u


def test_split_step_is_unitary(harmonic):
    u = gaussian_state(harmonic.grid, 1.0, 0.8, 2.0)
    for _ in range(50):
        u = step_lse(u, harmonic, 1e-2)
    assert norm(u) == pytest.approx(1.0, abs=1e-13)


def test_ground_state_only_rotates(harmonic):
    u0 = gaussian_state(harmonic.grid)
    u = u0
    for _ in range(1000):
        u = step_lse(u, harmonic, 1e-3)
    expected = np.exp(-0.5j) * u0.to_complex()
    assert np.max(np.abs(u.to_complex() - expected)) < 1e-5


def test_split_step_needs_periodic_grid(decaying_grid):
    op = SchrodingerOperator.free(decaying_grid)
    with pytest.raises(ValueError):
        step_lse(gaussian_state(decaying_grid), op, 1e-3, Scheme.STRANG)


def test_rk4_on_decaying_grid_moves_packet(decaying_grid):
    op = SchrodingerOperator.free(decaying_grid)
    u0 = gaussian_state(decaying_grid, -2.0, 1.0, 1.0)
    record = run(EquationKind.LSE, u0, op, IntegratorSpec(Scheme.RK4, 5e-4, 2000, 500), [Hn(0, op)])
    assert record.drift["H0"] < 1e-8
    density = np.abs(record.states[-1].to_complex()) ** 2
    assert decaying_grid.x[np.argmax(density)] == pytest.approx(-1.0, abs=0.1)


def test_soliton_is_stationary_up_to_phase(soliton_grid):
    u = sech_state(soliton_grid)
    for _ in range(1000):
        u = step_nls(u, 1.0, 0.5, -2.0, 1e-3)
    expected = np.exp(1j) / np.cosh(soliton_grid.x)
    assert np.max(np.abs(u.to_complex() - expected)) < 1e-4


@pytest.mark.parametrize("scheme, boundary", [(Scheme.STRANG, "periodic"), (Scheme.RK4, "decaying")])
def test_lse_step_is_time_reversible(scheme, boundary):
    grid = make_grid(20.0, 256, boundary, -10.0)
    op = SchrodingerOperator.harmonic(grid)
    u = gaussian_state(grid, 1.0, 1.0, 0.5)
    back = step_lse(step_lse(u, op, 1e-3, scheme), op, -1e-3, scheme)
    assert np.max(np.abs(back.to_complex() - u.to_complex())) < 1e-10


@pytest.mark.parametrize("scheme, boundary", [(Scheme.STRANG, "periodic"), (Scheme.RK4, "decaying")])
def test_nls_step_is_time_reversible(scheme, boundary):
    grid = make_grid(30.0, 256, boundary, -15.0)
    u = sech_state(grid, 1.0, 1.0, 0.5)
    back = step_nls(step_nls(u, 1.0, 0.5, -2.0, 1e-3, scheme), 1.0, 0.5, -2.0, -1e-3, scheme)
    assert np.max(np.abs(back.to_complex() - u.to_complex())) < 1e-10


def test_split_step_is_second_order(harmonic):
    u0 = gaussian_state(harmonic.grid, 1.0, 0.8, 1.0)

    def evolve(dt, steps):
        u = u0
        for _ in range(steps):
            u = step_lse(u, harmonic, dt)
        return u.to_complex()

    reference = evolve(1e-4, 4000)
    coarse = np.max(np.abs(evolve(1e-2, 40) - reference))
    fine = np.max(np.abs(evolve(5e-3, 80) - reference))
    assert 3.5 < coarse / fine < 4.5


def test_nls_without_coupling_is_free_lse(soliton_grid):
    u = gaussian_state(soliton_grid, 0.0, 1.5, 2.0)
    free = SchrodingerOperator.free(soliton_grid, 1.0, 0.5)
    for scheme in (Scheme.STRANG, Scheme.RK4):
        difference = step_nls(u, 1.0, 0.5, 0.0, 1e-3, scheme).to_complex() - step_lse(u, free, 1e-3, scheme).to_complex()
        assert np.max(np.abs(difference)) <= 1e-15


@pytest.mark.parametrize("mass", [0.5, 1.0])
def test_plane_wave_step_is_exact(periodic_grid, mass):
    k = 2.0 * math.pi * 3 / periodic_grid.length
    u = plane_wave_state(periodic_grid, k)
    op = SchrodingerOperator.free(periodic_grid, 1.0, mass)
    stepped = step_lse(u, op, 0.1)
    expected = np.exp(-1j * k**2 * 0.1 / (2.0 * mass)) * u.to_complex()
    assert np.max(np.abs(stepped.to_complex() - expected)) < 1e-10


def test_constant_state_rotates_at_nonlinear_rate(periodic_grid):
    amplitude, b, dt = 0.7, -2.0, 1e-2
    u0 = PhasePair.from_complex(periodic_grid, np.full(periodic_grid.points, amplitude, dtype=complex))
    u = u0
    for n in range(1, 11):
        u = step_nls(u, 1.0, 0.5, b, dt)
        expected = amplitude * np.exp(-1j * b * amplitude**2 * n * dt)
        assert np.max(np.abs(u.to_complex() - expected)) < 1e-10


def test_run_checkpoints(harmonic):
    u0 = gaussian_state(harmonic.grid, 1.0)
    record = run("lse", u0, harmonic, IntegratorSpec(Scheme.STRANG, 1e-3, 250, 100), {"H0": Hn(0, harmonic), "H1": Hn(1, harmonic)})
    assert np.allclose(record.times, [0.0, 0.1, 0.2, 0.25])
    assert list(record.series) == ["H0", "H1"]
    assert len(record.states) == 4
    assert record.drift["H0"] < 1e-12


def test_run_checks_parameter_types(harmonic):
    u0 = gaussian_state(harmonic.grid)
    with pytest.raises(TypeError):
        run(EquationKind.LSE, u0, NlsParameters(), IntegratorSpec())
    with pytest.raises(TypeError):
        run(EquationKind.NLS, u0, harmonic, IntegratorSpec())


def test_run_nls_conserves_norm(soliton_grid):
    record = run(EquationKind.NLS, sech_state(soliton_grid), NlsParameters(1.0, 0.5, -2.0), IntegratorSpec(Scheme.STRANG, 1e-3, 500, 100), [Kminus1()])
    assert record.drift["K-1"] < 1e-12


def test_run_detects_divergence(decaying_grid):
    op = SchrodingerOperator.free(decaying_grid)
    with np.errstate(all="ignore"):
        with pytest.raises(SimulationDivergedError, match="non-finite"):
            run(EquationKind.LSE, gaussian_state(decaying_grid), op, IntegratorSpec(Scheme.RK4, 1.0, 200, 200))


def test_drift_statistics():
    drift = drift_statistics({"small": np.array([0.5, 0.6, 0.4]), "large": np.array([10.0, 10.5, 9.0])})
    assert drift["small"] == pytest.approx(0.1)
    assert drift["large"] == pytest.approx(0.1)


def test_madelung_fields_of_moving_packet(harmonic):
    u = gaussian_state(harmonic.grid, 0.0, 1.0, 1.5)
    fields = madelung_from_state(u, 1.0, 1.0)
    mask = fields.mask
    chi = np.abs(u.to_complex()) ** 2
    assert np.allclose(fields.chi.values, chi)
    assert np.allclose(fields.phase_gradient.values[mask], 0.75, atol=1e-5)
    assert np.allclose(fields.current.values[mask], 1.5 * chi[mask], atol=1e-8)
    assert not mask[0] and mask[harmonic.grid.points // 2]


def test_madelung_floor_must_be_positive(harmonic):
    with pytest.raises(ValueError, match="floor"):
        madelung_from_state(gaussian_state(harmonic.grid), 1.0, 1.0, floor=0.0)


def test_madelung_rhs_of_uniform_state(harmonic):
    u = plane_wave_state(harmonic.grid, 0.0)
    dchi, dpi = madelung_rhs(madelung_from_state(u, 1.0, 1.0), harmonic.potential, 1.0, 1.0)
    assert np.allclose(dchi.values, 0.0, atol=1e-12)
    assert np.allclose(dpi.values, -0.5 * harmonic.potential.values, atol=1e-10)


def test_madelung_consistency_on_coherent_state():
    grid = make_grid(20.0, 256, "periodic", -10.0)
    op = SchrodingerOperator.harmonic(grid)
    u = gaussian_state(grid, 1.0)
    check = madelung_consistency(u, op)
    assert check.residual < 1e-5
    assert check.residual == max(check.chi_residual, check.pi_residual)
    assert continuity_residual(u, op) < 1e-5


def test_madelung_consistency_masks_nodes(harmonic):
    grid = harmonic.grid
    node = int(np.argmin(np.abs(grid.x)))
    u = PhasePair.from_arrays(grid, grid.x * np.exp(-0.5 * grid.x**2), np.zeros(grid.points))
    chi = u.q.values**2

    default = madelung_consistency(u, harmonic)
    widened = madelung_consistency(u, harmonic, floor=0.1 * float(chi.max()))
    assert not default.mask[node]
    assert not widened.mask[node - 1 : node + 2].any()
    assert np.all(widened.mask <= default.mask)
    assert np.isfinite(default.residual)
    assert widened.residual <= default.residual
    assert widened.chi_residual < 1e-8


def test_madelung_hamiltonian_is_twice_h1(harmonic):
    u = gaussian_state(harmonic.grid, 1.0, 0.9, 0.5)
    fields = madelung_from_state(u, 1.0, 1.0)
    doubled = 2.0 * Hn(1, harmonic).evaluate(u)
    assert madelung_hamiltonian(fields, harmonic.potential, 1.0, 1.0) == pytest.approx(doubled, rel=1e-5)


def test_state_builders(periodic_grid):
    assert norm(gaussian_state(periodic_grid, 0.5, 1.2, -1.0)) == pytest.approx(1.0)
    assert norm(plane_wave_state(periodic_grid, 2.0 * math.pi / periodic_grid.length)) == pytest.approx(1.0)
    soliton = sech_state(periodic_grid, 2.0, 0.5)
    assert periodic_grid.x[np.argmax(np.abs(soliton.to_complex()))] == pytest.approx(periodic_grid.center)
    with pytest.raises(ValueError, match="width"):
        sech_state(periodic_grid, 1.0, 0.0)
    with pytest.raises(ValueError, match="width"):
        gaussian_state(periodic_grid, 0.0, -1.0)
