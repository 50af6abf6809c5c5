import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from collapse_lab import catalog
from collapse_lab.errors import OutOfDomain, SingularPoint, ValidationError, WrongChart
from collapse_lab.geometry import (Chart, ChartPoint, Family, ProfileMetric, chart_convert, chi_of_x,
                                   dispersion_derivs, dispersion_x, eval_profile, hamiltonian_x,
                                   log_dispersion_slope, metric_components, polynomial_profile,
                                   potential_R, profile_variable, radial_data, rate, x_of_chi)

from .conftest import CATALOG_CASES, interior


def test_eval_profile_examples(sphere, fs, flat_potential):
    assert eval_profile(sphere, math.pi / 2, 0) == pytest.approx(1.0, abs=1e-15)
    assert eval_profile(fs, 0.5, 1) == pytest.approx(-1.0, abs=1e-14)
    assert eval_profile(flat_potential, 2.0, 2) == 0.0


def test_eval_profile_rejects_outside_domain(fs):
    with pytest.raises(OutOfDomain):
        eval_profile(fs, 1.5)


def test_chi_round_trip_one_dim(sphere):
    p = ChartPoint(Chart.CHI, (0.0, 0.0))
    q = chart_convert(sphere, chart_convert(sphere, p, Chart.THETA), Chart.CHI)
    assert q.coords[0] == pytest.approx(0.0, abs=1e-10)
    assert q.coords[1] == 0.0


def test_flat_potential_radius(flat_potential):
    z = (2.0 + 0j, 0j)
    p = chart_convert(flat_potential, ChartPoint(Chart.COMPLEX, z), Chart.RADIAL_FRAME)
    assert p.coords[0] == pytest.approx(2.0 * math.sqrt(2.0), rel=1e-14)


def test_unit_complex_vector_has_chi_zero(fs_potential):
    p = chart_convert(fs_potential, ChartPoint(Chart.COMPLEX, (1.0, 0.0, 0.0)), Chart.CHI)
    assert p.coords[0] == 0.0


def test_metric_components_examples(fs, sphere, flat_potential):
    mc = metric_components(fs, 0.0)
    assert mc.coefficients[0] == pytest.approx(1.0)
    assert mc.F == 1.0
    assert metric_components(sphere, math.pi / 2).coefficients == pytest.approx((1.0, 1.0))
    mc = metric_components(flat_potential, 1.0)
    assert mc.F == pytest.approx(1.0) and mc.Q == pytest.approx(0.0, abs=1e-15)


def test_wrong_chart_rejected(fs):
    with pytest.raises(WrongChart):
        profile_variable(fs, ChartPoint(Chart.THETA, (0.5, 0.0)))


def test_endpoint_needs_boundary_flag(sphere):
    with pytest.raises(SingularPoint):
        chart_convert(sphere, ChartPoint(Chart.THETA, (0.0, 0.0)), Chart.CHI)
    p = chart_convert(sphere, ChartPoint(Chart.THETA, (0.0, 0.0)), Chart.CHI, allow_boundary=True)
    assert p.at_boundary and p.coords[0] < 0 and math.isfinite(p.coords[0])


def test_sphere_chi_closed_form(sphere):
    # dχ = dθ / sin θ gives χ = log tan(θ/2)
    for th in np.linspace(0.05, math.pi - 0.05, 13):
        assert chi_of_x(sphere, th) == pytest.approx(math.log(math.tan(th / 2)), abs=1e-12)


@pytest.mark.parametrize("name,params", [c for c in CATALOG_CASES])
def test_chi_inverse_round_trip(name, params):
    m = catalog.instantiate(name, params)
    for x in interior(m, 9):
        if m.family is Family.POTENTIAL_UN and x > 50:
            continue
        assert x_of_chi(m, chi_of_x(m, x)) == pytest.approx(x, rel=1e-9, abs=1e-12)


@given(st.floats(0.02, math.pi - 0.02), st.floats(-3.0, 3.0))
def test_sphere_chart_bijective(theta, phi):
    m = catalog.instantiate("sphere_1d")
    p = ChartPoint(Chart.THETA, (theta, phi))
    back = chart_convert(m, chart_convert(m, p, Chart.CHI), Chart.THETA)
    assert back.coords[0] == pytest.approx(theta, abs=1e-9)
    assert back.coords[1] == phi


@given(st.floats(0.05, 0.95), st.floats(0.1, 3.0), st.floats(-3.0, 3.0), st.floats(0.0, 6.0))
def test_radial_chart_bijective(R, theta, phi, psi):
    m = catalog.instantiate("fubini_study")
    p = ChartPoint(Chart.RADIAL_FRAME, (R, theta, phi, psi))
    back = chart_convert(m, chart_convert(m, p, Chart.CHI), Chart.RADIAL_FRAME)
    assert back.coords[0] == pytest.approx(R, abs=1e-9)
    assert back.coords[1:] == (theta, phi, psi)


@given(st.lists(st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False),
                min_size=3, max_size=3).filter(lambda z: 0.05 < sum(abs(c) ** 2 for c in z) < 20))
def test_complex_chart_bijective(z):
    m = catalog.instantiate("fubini_study_potential")
    p = ChartPoint(Chart.COMPLEX, tuple(z))
    back = chart_convert(m, chart_convert(m, p, Chart.CHI), Chart.COMPLEX)
    assert np.allclose(back.coords, z, atol=1e-9)
    via_R = chart_convert(m, chart_convert(m, p, Chart.RADIAL_FRAME), Chart.COMPLEX)
    assert np.allclose(via_R.coords, z, atol=1e-9)


def test_potential_two_dispersion_routes(fs_potential):
    # V = 2u(Σ' + uΣ'') against the polar form; the U(N) phase generator is
    # twice the fibre generator, so V_pot = R^2 F = 4 V_radial and H_pot = 2 H_radial
    for u in np.geomspace(1e-4, 1e4, 40):
        d = radial_data(fs_potential, float(u))
        assert float(dispersion_x(fs_potential, u)) == pytest.approx(d.R**2 * d.F, rel=1e-10)
        assert float(hamiltonian_x(fs_potential, u)) == pytest.approx(-0.5 * d.R**2, rel=1e-12)


def test_fs_potential_matches_radial_profile(fs_potential):
    # Σ = ½ log(1+u) is F = 1 - R^2 in the polar form
    for u in (0.1, 1.0, 7.0):
        d = radial_data(fs_potential, u)
        assert d.F == pytest.approx(1.0 - d.R**2, abs=1e-12)


def test_one_dim_conformal_chi_metric(sphere):
    # ds^2 = dθ^2 + S^2 dφ^2 = S^2 (dχ^2 + dφ^2) since dθ = S dχ
    for th in (0.3, 1.1, 2.7):
        g = metric_components(sphere, th).coefficients
        S = math.sin(th)
        assert g[0] * (S**2) == pytest.approx(S**2 * 1.0)
        assert g[1] == pytest.approx(dispersion_x(sphere, th))
        assert float(rate(sphere, th)) == pytest.approx(S)


def test_energy_derivative_sympy_oracle():
    """dH/dχ = -V in every family, checked symbolically then numerically."""
    x, s, n, lam = sp.symbols("x s n lambda", positive=True)
    F = (x**2 - 1) * (s * n + 1 - x**2) / (s * x**2)
    H, V, g = -x**2 / 4, x**2 * F / 4, x * F / 2
    assert sp.simplify(sp.diff(H, x) * g + V) == 0
    Sig = sp.log(1 + x) / 2
    Hp, Vp = -x * sp.diff(Sig, x), 2 * x * (sp.diff(Sig, x) + x * sp.diff(Sig, x, 2))
    assert sp.simplify(sp.diff(Hp, x) * 2 * x + Vp) == 0
    m = catalog.instantiate("hitchin", {"s": 0.1, "n": 2})
    f = sp.lambdify(x, F.subs({s: 0.1, n: 2}))
    for R in interior(m, 7):
        assert float(m.profile(R)) == pytest.approx(f(R), rel=1e-12)


@pytest.mark.parametrize("name,params", [c for c in CATALOG_CASES])
def test_energy_decreases_at_rate_V(name, params):
    m = catalog.instantiate(name, params)
    for x in interior(m, 5):
        h = 1e-5 * max(1.0, abs(x))
        dH = (hamiltonian_x(m, x + h) - hamiltonian_x(m, x - h)) / (2 * h)
        assert float(dH * rate(m, x)) == pytest.approx(-float(dispersion_x(m, x)), rel=1e-6, abs=1e-10)


def test_sphere_energy_is_cosine(sphere):
    for th in np.linspace(0, math.pi, 9):
        assert float(hamiltonian_x(sphere, th)) == pytest.approx(math.cos(th), abs=1e-12)


def test_dispersion_derivatives_fd(hitchin, fs_potential):
    for m in (hitchin, fs_potential):
        for x in interior(m, 5):
            h = 1e-5 * max(1.0, x)
            V, V1, V2 = dispersion_derivs(m, x)
            Vp, Vm = dispersion_x(m, x + h), dispersion_x(m, x - h)
            assert float(V1) == pytest.approx(float(Vp - Vm) / (2 * h), rel=1e-6, abs=1e-9)
            assert float(V2) == pytest.approx(float(Vp - 2 * V + Vm) / h**2, rel=1e-4, abs=1e-6)


def test_log_slope_sphere(sphere):
    for th in (0.4, 1.3, 2.2):
        assert float(log_dispersion_slope(sphere, th)) == pytest.approx(2 * math.cos(th), rel=1e-12)


def test_user_polynomial_profile_falls_back_to_differences():
    prof = polynomial_profile([1.0, 0.0, -1.0])
    m = ProfileMetric(Family.RADIAL_UN, prof, 2, (0.0, 1.0))
    assert float(m.profile(0.5, 1)) == pytest.approx(-1.0)
    assert float(m.profile(0.5, 3)) == pytest.approx(0.0, abs=1e-6)


def test_invalid_metrics_rejected():
    prof = polynomial_profile([1.0])
    with pytest.raises(ValidationError):
        ProfileMetric(Family.RADIAL_UN, prof, 2, (1.0, 0.0))
    with pytest.raises(ValidationError):
        ProfileMetric(Family.ONE_DIM, prof, 2, (0.0, 1.0))
    with pytest.raises(ValidationError):
        ProfileMetric(Family.POTENTIAL_UN, prof, 2, (1.0, 2.0))


def test_potential_radius_function(flat_potential):
    assert float(potential_R(flat_potential, 4.0)) == pytest.approx(math.sqrt(8.0))
