import math

import numpy as np
import pytest
from scipy.special import erf

from schrolab.field_core import (
    Boundary,
    GridMismatchError,
    IllPosedInversionError,
    PhasePair,
    RealField,
    derivative,
    dminus1,
    fd_gradient,
    inner,
    integrate,
    make_grid,
    norm,
    random_phase_pair,
    rotate,
)


def test_make_grid_defaults():
    periodic = make_grid(10.0, 64)
    assert periodic.boundary is Boundary.PERIODIC
    assert periodic.origin == 0.0
    assert periodic.spacing == pytest.approx(10.0 / 64)

    decaying = make_grid(10.0, 64, "decaying")
    assert decaying.origin == -5.0
    assert decaying.x[0] == -5.0


@pytest.mark.parametrize("length, points", [(10.0, 63), (10.0, 4), (0.0, 64), (-1.0, 64), (float("inf"), 64)])
def test_make_grid_rejects_bad_arguments(length, points):
    with pytest.raises(ValueError):
        make_grid(length, points)


def test_quadrature_weights(periodic_grid, decaying_grid):
    assert periodic_grid.weights.sum() == pytest.approx(periodic_grid.length)
    assert decaying_grid.weights.sum() == pytest.approx((decaying_grid.points - 1) * decaying_grid.spacing)
    assert decaying_grid.weights[0] == pytest.approx(0.5 * decaying_grid.spacing)


def test_real_field_validation(periodic_grid):
    with pytest.raises(ValueError, match="expected 128 samples"):
        RealField(periodic_grid, np.zeros(10))
    values = np.zeros(periodic_grid.points)
    values[3] = np.nan
    with pytest.raises(ValueError, match="finite"):
        RealField(periodic_grid, values)


def test_real_field_is_immutable(periodic_grid):
    source = np.ones(periodic_grid.points)
    field = RealField(periodic_grid, source)
    source[0] = 5.0
    assert field.values[0] == 1.0
    with pytest.raises(ValueError):
        field.values[0] = 2.0


def test_grid_mismatch(periodic_grid, decaying_grid):
    a = RealField.zeros(periodic_grid)
    b = RealField.zeros(make_grid(20.0, 128, Boundary.PERIODIC, 0.0))
    with pytest.raises(GridMismatchError):
        a + b
    with pytest.raises(GridMismatchError):
        PhasePair(RealField.zeros(periodic_grid), RealField.zeros(decaying_grid))


def test_phase_pair_complex_adapters(periodic_grid):
    psi = np.exp(1j * periodic_grid.x) * (1.0 + periodic_grid.x**2) ** -1
    u = PhasePair.from_complex(periodic_grid, psi)
    assert np.allclose(u.q.values, psi.real)
    assert np.allclose(u.to_complex(), psi)
    assert u.norm2 == pytest.approx(float(np.sum(np.abs(psi) ** 2)) * periodic_grid.spacing)


def test_integrate_trigonometric_polynomial():
    grid = make_grid(2.0 * math.pi, 64)
    assert integrate(RealField.from_function(grid, lambda x: np.sin(3 * x) ** 2)) == pytest.approx(math.pi, abs=1e-12)


def test_inner_and_rotate(periodic_grid, rng):
    u = random_phase_pair(periodic_grid, rng)
    v = random_phase_pair(periodic_grid, rng)
    assert inner(u, v) == pytest.approx(inner(v, u))
    assert inner(u, u) == pytest.approx(u.norm2)

    rotated = rotate(u, 0.7)
    assert norm(rotated) == pytest.approx(norm(u))
    assert np.allclose(rotated.to_complex(), np.exp(0.7j) * u.to_complex())


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_spectral_derivative_is_exact_for_resolved_modes(order):
    grid = make_grid(2.0 * math.pi, 64)
    f = RealField.from_function(grid, lambda x: np.sin(5 * x))
    expected = 5.0**order * np.sin(5 * grid.x + order * math.pi / 2)
    assert np.max(np.abs(derivative(f, order).values - expected)) < 1e-9 * 5.0**order


@pytest.mark.parametrize(
    "order, exact, tolerance",
    [
        (1, lambda x: -2 * x * np.exp(-(x**2)), 1e-6),
        (2, lambda x: (4 * x**2 - 2) * np.exp(-(x**2)), 1e-5),
        (3, lambda x: (12 * x - 8 * x**3) * np.exp(-(x**2)), 1e-4),
    ],
)
def test_finite_difference_derivative_on_decaying_grid(decaying_grid, order, exact, tolerance):
    f = RealField.from_function(decaying_grid, lambda x: np.exp(-(x**2)))
    assert np.max(np.abs(derivative(f, order).values - exact(decaying_grid.x))) < tolerance


def test_derivative_rejects_unsupported_order(periodic_grid):
    with pytest.raises(ValueError, match="unsupported derivative order"):
        derivative(RealField.zeros(periodic_grid), 5)


def test_dminus1_periodic():
    grid = make_grid(2.0 * math.pi, 64)
    f = RealField.from_function(grid, lambda x: np.cos(2 * x))
    assert np.max(np.abs(dminus1(f).values - 0.5 * np.sin(2 * grid.x))) < 1e-12


def test_dminus1_periodic_needs_zero_mean(periodic_grid):
    with pytest.raises(IllPosedInversionError, match="zero mean"):
        dminus1(RealField.constant(periodic_grid, 1.0))


def test_dminus1_inverts_derivative_on_decaying_grid(decaying_grid):
    x = decaying_grid.x
    slope = RealField(decaying_grid, -2 * x * np.exp(-(x**2)))
    assert np.max(np.abs(dminus1(slope).values - np.exp(-(x**2)))) < 1e-7


def test_dminus1_is_skew_antiderivative(decaying_grid):
    x = decaying_grid.x
    result = dminus1(RealField(decaying_grid, np.exp(-(x**2))))
    assert np.max(np.abs(result.values - 0.5 * math.sqrt(math.pi) * erf(x))) < 1e-8


def test_integral_of_derivative_vanishes(periodic_grid, decaying_grid, rng):
    f = random_phase_pair(periodic_grid, rng).q
    assert abs(integrate(derivative(f))) < 1e-10
    gaussian = RealField.from_function(decaying_grid, lambda x: np.exp(-((x - 0.5) ** 2)))
    assert abs(integrate(derivative(gaussian))) < 1e-10


def test_derivative_undoes_dminus1(periodic_grid, rng):
    f = random_phase_pair(periodic_grid, rng).q
    f = f - integrate(f) / periodic_grid.length
    assert np.max(np.abs(derivative(dminus1(f)).values - f.values)) < 1e-10 * np.max(np.abs(f.values))

    fine = make_grid(20.0, 512, Boundary.DECAYING)
    gaussian = RealField.from_function(fine, lambda x: np.exp(-(x**2)))
    assert np.max(np.abs(derivative(dminus1(gaussian)).values - gaussian.values)) < 1e-8


@pytest.mark.parametrize("points", [128, 256])
def test_dminus1_is_skew_adjoint(points, rng):
    grid = make_grid(20.0, points, Boundary.DECAYING)
    u = random_phase_pair(grid, rng)
    f, g = u.q, u.p
    assert abs(integrate(dminus1(f) * g) + integrate(f * dminus1(g))) < 1e-8


def test_fd_gradient_of_norm(periodic_grid, rng):
    u = random_phase_pair(periodic_grid, rng)
    gradient = fd_gradient(lambda v: 0.5 * v.norm2, u)
    assert norm(gradient - u) < 1e-8 * norm(u)


def test_fd_gradient_rejects_bad_eps(periodic_grid, rng):
    with pytest.raises(ValueError, match="eps"):
        fd_gradient(lambda v: 0.0, random_phase_pair(periodic_grid, rng), eps=0.0)


def test_random_phase_pair_is_band_limited(periodic_grid, rng):
    u = random_phase_pair(periodic_grid, rng, amplitude=2.0)
    assert norm(u) == pytest.approx(2.0)
    spectrum = np.abs(np.fft.rfft(u.q.values))
    assert np.all(spectrum[periodic_grid.points // 3 + 1 :] < 1e-10 * spectrum.max())


def test_random_phase_pair_decays(decaying_grid, rng):
    u = random_phase_pair(decaying_grid, rng)
    assert norm(u) == pytest.approx(1.0)
    assert np.max(np.abs(u.to_complex()[[0, -1]])) < 1e-8


def test_random_phase_pair_is_seeded(periodic_grid):
    first = random_phase_pair(periodic_grid, np.random.default_rng(5))
    second = random_phase_pair(periodic_grid, np.random.default_rng(5))
    assert np.array_equal(first.q.values, second.q.values)
    assert np.array_equal(first.p.values, second.p.values)
