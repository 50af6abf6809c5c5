import dataclasses
import math

import numpy as np
import pytest
from scipy import integrate

from collapse_lab import analysis, catalog, sde
from collapse_lab.errors import InsufficientData, NotCompact, ValidationError
from collapse_lab.geometry import Chart, ChartPoint, chart_convert, chi_of_x, dispersion_x
from collapse_lab.tables import x_on_grid

RAD = ChartPoint(Chart.CHI, (0.0, 0.5, 0.1, 0.0))


def ensemble(metric, start, n=2000, sigma=1.0, steps=4000, dt=1e-3, seed=1, **kw):
    cfg = sde.SimConfig(metric, sigma=sigma, dt=dt, max_steps=steps, start=start, n_trajectories=n,
                        seed=seed, **kw)
    return sde.run_ensemble(cfg)


# ---------------------------------------------------------------- martingale

def test_energy_is_martingale_on_sphere(sphere):
    rep = analysis.martingale_test(ensemble(sphere, ChartPoint(Chart.THETA, (1.2, 0.0)), sigma=0.3))
    assert rep.passed and abs(rep.z_score) < 3
    assert rep.extra["qv_ratio"] == pytest.approx(1.0, abs=0.05)


def test_no_noise_is_trivially_martingale(sphere):
    rep = analysis.martingale_test(ensemble(sphere, ChartPoint(Chart.THETA, (1.2, 0.0)), sigma=0.0, steps=500))
    assert rep.passed and rep.statistic == 0.0


def test_biased_integrator_is_caught(sphere, monkeypatch):
    real_prepare = sde.prepare
    sigma = 0.3
    c_drift = -0.5 * sigma * sigma

    def biased(config):
        prep = real_prepare(config)
        table = dataclasses.replace(prep.table, L=prep.table.L + 0.1 / c_drift)
        return dataclasses.replace(prep, table=table)

    monkeypatch.setattr(sde, "prepare", biased)
    rep = analysis.martingale_test(ensemble(sphere, ChartPoint(Chart.THETA, (1.2, 0.0)), sigma=sigma))
    assert not rep.passed and rep.z_score < -3


def test_too_few_paths(sphere):
    with pytest.raises(InsufficientData):
        analysis.martingale_test(ensemble(sphere, ChartPoint(Chart.THETA, (1.2, 0.0)), n=50, steps=200))


def test_spin_martingale_not_recorded(fs):
    with pytest.raises(ValidationError):
        analysis.martingale_test(ensemble(fs, RAD, n=200, steps=200), observable="S3")


# ---------------------------------------------------------------- supermartingale

def test_fubini_study_drift_coefficient(fs):
    rep = analysis.supermartingale_test(ensemble(fs, RAD))
    assert rep.expected == pytest.approx(-4.0)
    assert rep.passed and abs(rep.statistic + 4.0) < 3 * rep.standard_error
    assert rep.extra["K_H_constant"] and rep.extra["mean_V_monotone"]


def test_hitchin_drift_coefficient(hitchin):
    rep = analysis.supermartingale_test(ensemble(hitchin, RAD))
    assert rep.expected == pytest.approx(-40.0)
    assert rep.passed


def test_flat_metric_has_no_drift(flat_potential):
    rep = analysis.supermartingale_test(ensemble(flat_potential, ChartPoint(Chart.CHI, (0.0,))))
    assert rep.expected == 0.0 and rep.passed
    assert "K_H = 0)" in rep.description


@pytest.mark.parametrize("name", ["berger", "eh"])
def test_varying_curvature_weighting(name, request):
    rep = analysis.supermartingale_test(ensemble(request.getfixturevalue(name), RAD))
    assert not rep.extra["K_H_constant"] and rep.expected == -1.0 and rep.passed


# ---------------------------------------------------------------- spin reduction

@pytest.mark.parametrize("name", ["fs", "berger", "hitchin", "eh"])
def test_spin_dispersion_reduces_along_orbits(name, request):
    # V3 = -H sin^2θ + V cos^2θ with θ frozen, so its drift is cos^2θ times that of V
    ens = ensemble(request.getfixturevalue(name), RAD)
    for axis in (1, 3):
        rep = analysis.spin_reduction_test(ens, axis=axis)
        assert rep.passed, rep.as_dict()
        assert rep.extra["mean_increment"] <= 3 * rep.extra["mean_increment_se"]


def test_spin_dispersion_at_orbit_pole_is_energy_dispersion(fs):
    ens = ensemble(fs, ChartPoint(Chart.CHI, (0.0, 0.0, 0.0, 0.0)), n=200, steps=500)
    assert np.allclose(analysis.spin_dispersion_records(ens, 3), ens.V_records())


def test_spin_axes_need_radial_family(sphere):
    with pytest.raises(ValidationError):
        analysis.spin_dispersion_records(ensemble(sphere, ChartPoint(Chart.THETA, (1.0, 0.0)), n=100,
                                                  steps=100), 3)


# ---------------------------------------------------------------- hitting probabilities

def theta_chi(sphere, theta):
    return chi_of_x(sphere, theta)


def test_sphere_hitting_symmetry(sphere):
    chi0 = theta_chi(sphere, math.pi / 2)
    assert analysis.hitting_probability_analytic(sphere, chi0) == pytest.approx(0.5)
    assert analysis.hitting_probability_oracle(sphere, chi0) == pytest.approx(0.5, abs=1e-12)


def test_sphere_hitting_closed_form(sphere):
    # H = cos θ, so the upper end (θ = π, H = -1) is reached with probability (1 - cos θ0) / 2
    for th in (0.3, 1.0, 2.5):
        assert analysis.hitting_probability_analytic(sphere, theta_chi(sphere, th)) == pytest.approx(
            (1 - math.cos(th)) / 2, abs=1e-12)


def test_cylinder_goes_to_the_nut():
    cyl = catalog.instantiate("cylinder_1d")
    d = analysis.hitting_probabilities(cyl, 0.3)
    assert d["pi_minus"] == 1.0 and not d["compact"]
    assert analysis.hitting_probability_oracle(cyl, 0.3) == 0.0
    with pytest.raises(NotCompact):
        analysis.hitting_probability_analytic(cyl, 0.3, require_compact=True)


@pytest.mark.parametrize("name", ["sphere", "fs", "fs_potential", "hitchin"])
def test_oracle_matches_analytic(name, request):
    metric = request.getfixturevalue(name)
    rng = np.random.default_rng(17)
    for chi0 in rng.uniform(-4, 4, size=10):
        a = analysis.hitting_probability_analytic(metric, float(chi0))
        assert analysis.hitting_probability_oracle(metric, float(chi0)) == pytest.approx(a, abs=1e-8)


def test_oracle_is_independent_quadrature(fs):
    # direct χ-quadrature of V, with no use of the energy function
    chi0 = 0.4
    left, right = np.linspace(-30, chi0, 30001), np.linspace(chi0, 30, 30001)
    below = integrate.simpson(dispersion_x(fs, x_on_grid(fs, left)), x=left)
    above = integrate.simpson(dispersion_x(fs, x_on_grid(fs, right)), x=right)
    assert analysis.hitting_probability_analytic(fs, chi0) == pytest.approx(below / (below + above), abs=1e-8)


def test_fubini_study_from_half_radius(fs):
    chi0 = chart_convert(fs, ChartPoint(Chart.RADIAL_FRAME, (0.5, 0.4, 0.0, 0.0)), Chart.CHI)
    assert analysis.hitting_probability_analytic(fs, chi0) == pytest.approx(0.25)


@pytest.mark.parametrize("name", ["eh", "berger"])
def test_noncompact_metrics_hit_the_finite_end(name, request):
    metric = request.getfixturevalue(name)
    assert analysis.hitting_probability_analytic(metric, 0.2) == 0.0
    assert analysis.hitting_probability_oracle(metric, 0.2) == 0.0


def test_monte_carlo_hitting(sphere):
    ens = ensemble(sphere, ChartPoint(Chart.THETA, (1.0, 0.0)), n=1500, dt=5e-3, steps=20000,
                   absorb_V_tol=1e-6)
    rep = analysis.hitting_test(ens)
    assert rep.passed and rep.extra["unabsorbed"] == 0


def test_hitting_insensitive_to_bounds(fs):
    base = dict(n=1000, dt=5e-3, steps=20000)
    a = analysis.hitting_test(ensemble(fs, RAD, chi_bounds=(-8.0, 8.0), **base))
    b = analysis.hitting_test(ensemble(fs, RAD, chi_bounds=(-16.0, 16.0), **base))
    assert a.passed and b.passed
    assert abs(a.statistic - b.statistic) < 3 * math.hypot(a.standard_error, b.standard_error)


# ---------------------------------------------------------------- Lüders

def lueders_config(metric, n=1500):
    return sde.SimConfig(metric, sigma=1.0, dt=2e-3, max_steps=40000, start=ChartPoint(Chart.CHI, (0.0,)),
                         n_trajectories=n, seed=3)


def test_lueders_symmetric_point():
    m = catalog.instantiate("fubini_study_potential", {"N": 3})
    rep = analysis.lueders_check(m, np.array([1, 1, 0]) / math.sqrt(2), lueders_config(m))
    assert rep.ratio_confined and rep.ratio_residual < 1e-12
    assert rep.split.expected == pytest.approx(0.5) and rep.passed
    assert rep.born_weight == pytest.approx(0.5)


def test_lueders_generic_start():
    m = catalog.instantiate("fubini_study_potential", {"N": 3})
    z0 = np.array([0.9, 0.7j, -0.4])
    u0 = float(np.vdot(z0, z0).real)
    rep = analysis.lueders_check(m, z0, lueders_config(m))
    assert rep.split.expected == pytest.approx(u0 / (1 + u0))
    assert rep.passed and rep.born.passed
    assert rep.as_dict()["ratio_confined"]


def test_lueders_bolt_start():
    m = catalog.instantiate("fubini_study_potential", {"N": 3})
    bolt = chart_convert(m, ChartPoint(Chart.CHI, (math.inf,)), Chart.CHI, allow_boundary=True)
    rep = analysis.lueders_check(m, bolt, lueders_config(m, n=100))
    assert rep.split.statistic == 1.0 and rep.passed


def test_lueders_needs_potential(fs):
    with pytest.raises(ValidationError):
        analysis.lueders_check(fs, [1, 0], lueders_config(catalog.instantiate("fubini_study_potential")))
