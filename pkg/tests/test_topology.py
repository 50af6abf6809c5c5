import math

import pytest

from collapse_lab import catalog
from collapse_lab.curvature import positivity_scan
from collapse_lab.errors import IncompleteManifold, NotAnEndpoint
from collapse_lab.geometry import Family, Profile, ProfileMetric, polynomial_profile
from collapse_lab.topology import CaseLabel, EndKind, classify_end, classify_manifold


def test_quartic_closure_is_bolt_two():
    m = ProfileMetric(Family.RADIAL_UN, polynomial_profile([1, 0, 0, 0, -1]), 2, (0.0, 1.0))
    e = classify_end(m, 1.0)
    assert e.kind is EndKind.BOLT and (e.n, e.sign) == (2, -1)


def test_eguchi_hanson_bolt(eh):
    e = classify_end(eh, 1.0)
    assert e.kind is EndKind.BOLT and e.n == 2 and e.label() == "Bolt(2)"
    assert e.radius == pytest.approx(1.0)
    c = classify_manifold(eh)
    assert c.case_label is CaseLabel.CASE4


def test_fubini_study_ends(fs):
    assert classify_end(fs, 0.0).kind is EndKind.NUT
    b = classify_end(fs, 1.0)
    assert b.kind is EndKind.BOLT and b.n == 1 and b.sign == -1
    c = classify_manifold(fs)
    assert c.case_label is CaseLabel.CASE1 and "CP^2" in c.topology_note


@pytest.mark.parametrize("lam", [0.0, 0.5])
def test_berger_infinite_end(lam):
    m = catalog.instantiate("berger", {"lambda": lam})
    assert classify_end(m, math.inf).kind is EndKind.INFINITE
    c = classify_manifold(m)
    assert c.case_label is CaseLabel.CASE3 and "C^2" in c.topology_note


def test_sphere_poles_are_smooth(sphere):
    e = classify_end(sphere, math.pi)
    assert e.kind is EndKind.NUT and e.slope == pytest.approx(-1.0)
    assert classify_manifold(sphere).case_label is CaseLabel.SPHERE


def test_hitchin_two_bolts(hitchin):
    c = classify_manifold(hitchin)
    assert c.case_label is CaseLabel.CASE2 and c.principal_orbit == "L(3,2)"
    lo, hi = c.ends
    assert lo.n == hi.n == 2 and (lo.sign, hi.sign) == (1, -1)


@pytest.mark.parametrize("s", [0.05, 0.1, 0.2])
@pytest.mark.parametrize("n", [2, 3])
def test_case2_fails_reduction(s, n):
    m = catalog.instantiate("hitchin", {"s": s, "n": n})
    assert classify_manifold(m).case_label is CaseLabel.CASE2
    assert not positivity_scan(m).reduce_S


def test_potential_families():
    assert classify_manifold(catalog.instantiate("fubini_study_potential")).case_label is CaseLabel.CASE1
    assert classify_manifold(catalog.instantiate("flat_potential")).case_label is CaseLabel.CASE3


def test_conical_defect_reported():
    m = ProfileMetric(Family.ONE_DIM, polynomial_profile([0.0, 0.5]), 1, (0.0, math.inf))
    e = classify_end(m, 0.0)
    assert e.kind is EndKind.CONICAL and e.deficit == pytest.approx(math.pi)
    c = classify_manifold(m)
    assert not c.complete
    with pytest.raises(IncompleteManifold):
        c.require_complete()


def test_wrong_bolt_slope_is_degenerate():
    # F = 1 - R^3 closes at R = 1 with R F' = -3, an odd slope
    m = ProfileMetric(Family.RADIAL_UN, polynomial_profile([1, 0, 0, -1]), 2, (0.0, 1.0))
    assert classify_end(m, 1.0).kind is EndKind.DEGENERATE
    assert classify_manifold(m).case_label is CaseLabel.INCOMPLETE


def test_nut_with_wrong_value_is_degenerate():
    m = ProfileMetric(Family.RADIAL_UN, polynomial_profile([2, 0, -2]), 2, (0.0, 1.0))
    assert classify_end(m, 0.0).kind is EndKind.DEGENERATE


def test_not_an_endpoint(fs):
    with pytest.raises(NotAnEndpoint):
        classify_end(fs, 0.5)


def test_interior_zero_is_an_endpoint():
    # 1 - R^2 declared on [0, 2]: the zero at R = 1 is where the manifold closes
    m = ProfileMetric(Family.RADIAL_UN, polynomial_profile([1, 0, -1]), 2, (0.0, 2.0))
    assert classify_end(m, 1.0).kind is EndKind.BOLT
    assert not classify_manifold(m).complete


def test_periodic_coordinate_rejected():
    prof = Profile("sin", (math.sin, math.cos), params={})
    m = ProfileMetric(Family.ONE_DIM, prof, 1, (0.0, math.pi), params={"periodic": True})
    c = classify_manifold(m)
    assert c.case_label is CaseLabel.INCOMPLETE and "circle" in c.failed_condition


def test_one_dim_half_line(sphere):
    c = classify_manifold(catalog.instantiate("cylinder_1d"))
    assert c.case_label is CaseLabel.PLANE
    inf_end = c.ends[1]
    assert inf_end.kind is EndKind.INFINITE and inf_end.drift_limit == pytest.approx(0.0, abs=1e-12)


def test_to_json_round_trip(hitchin):
    import json
    doc = json.loads(json.dumps(classify_manifold(hitchin).to_json()))
    assert doc["case"] == "Case2_TwoBolts"
    assert [e["label"] for e in doc["ends"]] == ["Bolt(2)", "Bolt(2)"]
