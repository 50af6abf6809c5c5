import json
import math

import pytest

from collapse_lab import catalog
from collapse_lab.curvature import positivity_scan
from collapse_lab.errors import BadParams, ValidationError
from collapse_lab.geometry import Family
from collapse_lab.topology import classify_manifold

from .conftest import CATALOG_CASES


def test_fubini_study_profile(fs):
    assert fs.domain == (0.0, 1.0)
    for R in (0.1, 0.5, 0.9):
        assert float(fs.profile(R)) == pytest.approx(1.0 - R * R)


def test_hitchin_bolts_at_zeros(hitchin):
    lo, hi = hitchin.domain
    assert lo == pytest.approx(1.0)
    assert hi == pytest.approx(math.sqrt(0.1 * 2 + 1.0), abs=1e-12)
    assert abs(float(hitchin.profile(lo))) < 1e-12 and abs(float(hitchin.profile(hi))) < 1e-12


def test_sphere_and_cylinder_profiles():
    sph = catalog.instantiate("sphere_1d")
    cyl = catalog.instantiate("cylinder_1d")
    assert sph.domain == (0.0, math.pi) and cyl.domain == (0.0, math.inf)
    assert float(sph.profile(1.0)) == pytest.approx(math.sin(1.0))
    assert float(cyl.profile(1.0)) == pytest.approx(math.tanh(1.0))
    assert float(cyl.profile(1.0, 2)) == pytest.approx(-2 * math.tanh(1.0) / math.cosh(1.0) ** 2)


def test_eguchi_hanson_profile(eh):
    assert eh.domain == (1.0, math.inf)
    assert float(eh.profile(2.0)) == pytest.approx(1 - 1 / 16)


@pytest.mark.parametrize("name,params", [
    ("berger", {"lambda": 1.5}), ("berger", {"lambda": -0.1}), ("hitchin", {"s": -1, "n": 2}),
    ("hitchin", {"s": 0.1, "n": 1}), ("hitchin", {"s": 0.1, "n": 2.5}), ("eguchi_hanson", {"a": 0}),
    ("hitchin", {"s": 0.1}), ("nope", {}), ("fubini_study", {"N": 1}), ("berger", {"lambda": "x"}),
])
def test_bad_params(name, params):
    with pytest.raises(BadParams):
        catalog.instantiate(name, params)


def test_aliases_resolve():
    assert catalog.instantiate("lambda_family", {"lam": 0.5}).name == "berger"


@pytest.mark.parametrize("name,params", CATALOG_CASES)
def test_recorded_expectations_rederived(name, params):
    m = catalog.instantiate(name, params)
    entry = catalog.CATALOG[name]
    assert classify_manifold(m).case_label.value == entry.expected_case
    verdicts = positivity_scan(m).as_dict()
    for key, expected in entry.expected_positivity.items():
        assert verdicts[key] is expected, key


@pytest.mark.parametrize("s", [0.05, 0.1, 0.2])
@pytest.mark.parametrize("n", [2, 3])
def test_hitchin_bolt_slopes(s, n):
    m = catalog.instantiate("hitchin", {"s": s, "n": n})
    lo, hi = m.domain
    assert lo * float(m.profile(lo, 1)) == pytest.approx(2 * n, abs=1e-8)
    assert hi * float(m.profile(hi, 1)) == pytest.approx(-2 * n, abs=1e-8)


def test_list_entries_json():
    entries = catalog.list_entries()
    json.dumps(entries)
    assert {e["name"] for e in entries} == set(catalog.CATALOG)


def test_load_metric_catalog_and_polynomial():
    m = catalog.load_metric('{"family": "radial_un", "profile": {"name": "hitchin", "params": {"s": 0.1, "n": 2}}}')
    assert m.name == "hitchin"
    p = catalog.load_metric({"family": "radial_un", "profile": {"name": "polynomial", "coeffs": [1, 0, -1]},
                             "domain": [0, 1], "N": 2})
    assert p.family is Family.RADIAL_UN
    assert classify_manifold(p).case_label.value == "Case1_NutBolt"
    with pytest.raises(ValidationError):
        catalog.load_metric({"family": "radial_un", "profile": {"name": "polynomial", "coeffs": [1]}})
    with pytest.raises(ValidationError):
        catalog.load_metric({"family": "one_dim", "profile": {"name": "hitchin", "params": {"s": 0.1, "n": 2}}})
