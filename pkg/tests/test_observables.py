import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from collapse_lab import catalog
from collapse_lab.errors import BadParams, DimensionMismatch, IncompleteManifold, SingularPoint, WrongChart
from collapse_lab.geometry import Chart, ChartPoint
from collapse_lab.observables import (Observable, check_hermitian, critical_set, dispersion, gradient_norm,
                                      hamiltonian, poisson_bracket, spin, spin_dispersion,
                                      spin_dispersion_general, spin_general)

FS = catalog.instantiate("fubini_study")
FSP = catalog.instantiate("fubini_study_potential")
H, S1, S2, S3 = (Observable.parse(k) for k in ("H", "S1", "S2", "S3"))


def rp(R, th=0.0, ph=0.0, ps=0.0):
    return ChartPoint(Chart.RADIAL_FRAME, (R, th, ph, ps))


radial_points = st.tuples(st.floats(0.05, 0.95), st.floats(0.05, 3.09), st.floats(-3.1, 3.1),
                          st.floats(0, 6.2)).map(lambda t: rp(*t))
cvec = st.lists(st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False),
                min_size=3, max_size=3).filter(lambda z: 0.01 < sum(abs(c) ** 2 for c in z) < 10).map(np.array)


def herm(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    h = a + a.conj().T
    return h - np.trace(h) / 3 * np.eye(3)


def test_hamiltonian_examples(sphere):
    assert hamiltonian(FS, rp(1.0)) == pytest.approx(-0.25)
    assert hamiltonian(FSP, ChartPoint(Chart.COMPLEX, (0, 0, 0))) == 0.0
    assert hamiltonian(sphere, ChartPoint(Chart.THETA, (math.pi / 2, 0.0))) == pytest.approx(0.0, abs=1e-15)


def test_spin_examples():
    assert spin(FS, rp(1.0, 0.0), 3) == pytest.approx(-0.25)
    p = rp(1.0, math.pi / 2, 0.0)
    assert (spin(FS, p, 1), spin(FS, p, 2), spin(FS, p, 3)) == pytest.approx((-0.25, 0.0, 0.0), abs=1e-15)


@given(radial_points)
def test_energy_is_spin_length(p):
    assert hamiltonian(FS, p) ** 2 == pytest.approx(sum(spin(FS, p, i) ** 2 for i in (1, 2, 3)), rel=1e-10)


def test_spin_needs_radial_point(sphere):
    with pytest.raises(WrongChart):
        spin(FS, 0.5, 3)
    with pytest.raises(WrongChart):
        spin(sphere, ChartPoint(Chart.THETA, (1.0, 0.0)), 3)
    with pytest.raises(BadParams):
        spin(FS, rp(0.5), 4)


def test_spin_general_examples():
    flat2 = catalog.instantiate("flat_potential")
    h = np.diag([1.0, -1.0])
    assert spin_general(flat2, (1, 0), h) == pytest.approx(-1.0)
    fsp2 = catalog.instantiate("fubini_study_potential", {"N": 2})
    assert spin_general(fsp2, (1, 0), h) == pytest.approx(-float(fsp2.profile(1.0, 1)))
    assert spin_general(flat2, (0, 0), h) == 0.0


@pytest.mark.parametrize("h,exc", [(np.zeros((2, 2)), BadParams), (np.diag([1.0, 1.0]), BadParams),
                                   (np.array([[0, 1], [0, 0]]), BadParams), (np.ones((2, 3)), DimensionMismatch)])
def test_check_hermitian_rejects(h, exc):
    with pytest.raises(exc):
        check_hermitian(h)


def test_dispersion_examples(sphere, eh):
    assert dispersion(sphere, ChartPoint(Chart.THETA, (math.pi / 2, 0))) == pytest.approx(1.0)
    assert dispersion(FS, 1.0) == 0.0
    assert dispersion(eh, math.sqrt(2.0)) == pytest.approx(0.375)


def test_spin_dispersion_at_orbit_pole():
    # labels follow the gradient computation: V3 = V at θ = 0 and V1 = R^2/4 there
    for R in (0.3, 0.8):
        p = rp(R, 0.0, 0.4)
        assert spin_dispersion(FS, p, 3) == pytest.approx(dispersion(FS, p))
        assert spin_dispersion(FS, p, 1) == pytest.approx(R * R / 4)


def test_bolt_pole_degenerate_only_for_energy():
    p = rp(1.0, 0.0)
    assert dispersion(FS, p) == 0.0
    assert spin_dispersion(FS, p, 1) == pytest.approx(0.25)
    assert spin_dispersion(FS, p, 3) == pytest.approx(0.0, abs=1e-15)


@given(radial_points, st.sampled_from([H, S1, S2, S3]))
def test_gradient_norms_match_dispersions(p, obs):
    expected = dispersion(FS, p) if obs.axis is None else spin_dispersion(FS, p, obs.axis)
    assert gradient_norm(FS, p, obs) == pytest.approx(expected, rel=1e-9, abs=1e-13)


@given(cvec, st.integers(0, 10**6))
def test_potential_dispersion_routes(z, seed):
    h = herm(seed)
    closed = spin_dispersion_general(FSP, z, h)
    assert spin_dispersion_general(FSP, z, h, route="metric") == pytest.approx(closed, rel=1e-10, abs=1e-14)
    obs = Observable.spin_matrix(h)
    assert gradient_norm(FSP, z, obs) == pytest.approx(closed, rel=1e-9, abs=1e-13)


def test_potential_dispersion_examples():
    flat2 = catalog.instantiate("flat_potential")
    assert spin_dispersion_general(flat2, (1, 0), np.diag([1.0, -1.0])) == pytest.approx(2.0)
    h = np.diag([1.0, -1.0, 0.0])
    assert spin_dispersion_general(FSP, (0, 0, 0.7), h) == 0.0
    assert spin_dispersion_general(FSP, (0, 0, 0), h) == 0.0
    # an eigenvector with eigenvalue λ carries λ^2 times the energy dispersion
    z = np.array([0.0, 0.9, 0.0])
    assert spin_dispersion_general(FSP, z, h) == pytest.approx(dispersion(FSP, ChartPoint(Chart.COMPLEX, z)))


@given(radial_points)
def test_spin_algebra(p):
    for a, b, c in ((S1, S2, S3), (S2, S3, S1), (S3, S1, S2)):
        assert poisson_bracket(FS, p, a, b) == pytest.approx(spin(FS, p, c.axis), abs=1e-8)
    for s in (S1, S2, S3):
        assert poisson_bracket(FS, p, H, s) == pytest.approx(0.0, abs=1e-8)


def test_bracket_antisymmetry_and_fd():
    p = rp(0.6, 0.9, 0.4, 1.0)
    assert poisson_bracket(FS, p, H, H) == 0.0
    ab = poisson_bracket(FS, p, S1, S2)
    assert poisson_bracket(FS, p, S2, S1) == pytest.approx(-ab)
    assert poisson_bracket(FS, p, S1, S2, method="fd") == pytest.approx(ab, rel=1e-6)


def test_bracket_singular_chart_points():
    with pytest.raises(SingularPoint):
        poisson_bracket(FS, rp(0.5, 0.0), S1, S2)


@given(cvec, st.integers(0, 10**6), st.integers(0, 10**6))
def test_spin_matrix_algebra(z, s1, s2):
    h, k = herm(s1), herm(s2)
    lhs = poisson_bracket(FSP, z, Observable.spin_matrix(h), Observable.spin_matrix(k))
    comm = -1j * (h @ k - k @ h)
    rhs = spin_general(FSP, z, comm) if np.any(np.abs(comm) > 1e-12) else 0.0
    assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-10)
    assert poisson_bracket(FSP, z, H, Observable.spin_matrix(h)) == pytest.approx(0.0, abs=1e-9)


def test_critical_sets(berger):
    locs = critical_set(FS, "H")
    assert [(c.where, c.value, c.degenerate) for c in locs] == [("nut", 0.0, False), ("bolt", -0.25, True)]
    vals = sorted(c.value for c in critical_set(FS, "S3"))
    assert vals == pytest.approx([-0.25, 0.0, 0.25])
    assert [c.where for c in critical_set(berger, "H")] == ["nut"]


def test_critical_loci_have_zero_gradient():
    for c in critical_set(FS, "S3"):
        if c.where == "bolt pole":
            R0, th, ph = c.location
            assert gradient_norm(FS, rp(R0 - 1e-12, th + 1e-9, ph), S3) < 1e-8


def test_critical_set_potential_spin():
    h = np.diag([1.0, -1.0, 0.0])
    locs = critical_set(FSP, {"spin_matrix": h.tolist()})
    assert sorted(c.value for c in locs if c.where == "bolt eigenline") == pytest.approx([-0.5, 0.0, 0.5])


def test_critical_set_requires_complete_manifold():
    from collapse_lab.geometry import Family, ProfileMetric, polynomial_profile
    m = ProfileMetric(Family.RADIAL_UN, polynomial_profile([1, 0, 0, -1]), 2, (0.0, 1.0))
    with pytest.raises(IncompleteManifold):
        critical_set(m, "H")


def test_observable_parse_names():
    assert Observable.parse("S2").name() == "S2"
    with pytest.raises(BadParams):
        Observable.parse("S7")
