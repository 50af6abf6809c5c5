"""Built-in metric families with analytic profile derivatives."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from .errors import BadParams, ValidationError
from .geometry import Family, Profile, ProfileMetric, polynomial_profile

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    family: Family
    param_schema: dict
    domain_rule: str
    expected_case: str
    expected_positivity: dict
    notes: str
    build: Callable = field(repr=False, compare=False)

    def schema_json(self) -> dict:
        return {
            "name": self.name,
            "family": self.family.value,
            "params": self.param_schema,
            "domain": self.domain_rule,
            "expected_case": self.expected_case,
            "expected_positivity": self.expected_positivity,
            "notes": self.notes,
        }


def _param(params: dict, key: str, default=None, kind=float):
    if key not in params:
        if default is None:
            raise BadParams(f"missing parameter {key!r}")
        return default
    try:
        value = kind(params[key])
    except (TypeError, ValueError) as exc:
        raise BadParams(f"parameter {key!r}: {exc}") from None
    if kind is int and float(params[key]) != value:
        raise BadParams(f"parameter {key!r} must be an integer")
    return value


def _dimension(params, default):
    N = _param(params, "N", default, int)
    if N < 2:
        raise BadParams("N must be >= 2")
    return N


# ---------------------------------------------------------------- one-dimensional

def _sphere(params):
    prof = Profile(
        "sin",
        (np.sin, np.cos, lambda t: -np.sin(t), lambda t: -np.cos(t), np.sin, np.cos),
        antiderivative=lambda t: -np.cos(t),
    )
    return ProfileMetric(Family.ONE_DIM, prof, 1, (0.0, math.pi), name="sphere_1d")


def _sech2(t):
    # 1 - tanh^2 rounds to zero past t ~ 19; this form keeps full relative accuracy
    c = np.cosh(np.minimum(np.abs(t), 350.0))
    return 1.0 / (c * c)


def _cylinder(params):
    T = np.tanh
    prof = Profile(
        "tanh",
        (
            T,
            _sech2,
            lambda t: -2.0 * T(t) * _sech2(t),
            lambda t: _sech2(t) * (6.0 * T(t) ** 2 - 2.0),
            lambda t: _sech2(t) * T(t) * (16.0 - 24.0 * T(t) ** 2),
        ),
        antiderivative=lambda t: np.logaddexp(t, -t) - math.log(2.0),
    )
    return ProfileMetric(Family.ONE_DIM, prof, 1, (0.0, math.inf), chi_ref=math.asinh(1.0),
                         name="cylinder_1d")


def _plane(params):
    prof = polynomial_profile([0.0, 1.0], name="identity")
    return ProfileMetric(Family.ONE_DIM, prof, 1, (0.0, math.inf), name="plane_1d")


# ---------------------------------------------------------------- radial U(N)

def _fubini_study(params):
    L = _param(params, "scale", 1.0)
    N = _dimension(params, 2)
    if L <= 0:
        raise BadParams("scale must be positive")
    prof = polynomial_profile([1.0, 0.0, -1.0 / L**2], name="fubini_study")
    prof = Profile(prof.name, prof.derivs, {"scale": L})
    return ProfileMetric(Family.RADIAL_UN, prof, N, (0.0, L), chi_ref=L / math.sqrt(2.0),
                         name="fubini_study", params={"scale": L, "N": N})


def _hitchin_F(s, n):
    k = s * n + 1.0
    return (
        lambda R: (R**2 - 1.0) * (k - R**2) / (s * R**2),
        lambda R: (-2.0 * R + 2.0 * k / R**3) / s,
        lambda R: (-2.0 - 6.0 * k / R**4) / s,
        lambda R: 24.0 * k / R**5 / s,
        lambda R: -120.0 * k / R**6 / s,
    )


def _newton_polish(derivs, r):
    for _ in range(2):
        r = r - derivs[0](r) / derivs[1](r)
    return r


def _hitchin(params):
    s = _param(params, "s")
    n = _param(params, "n", kind=int)
    N = _dimension(params, 2)
    if s <= 0 or n <= 1:
        raise BadParams("hitchin requires s > 0 and integer n > 1")
    derivs = _hitchin_F(s, n)
    F = derivs[0]
    # zeros of F bracket the domain; located by bisection
    peak = (s * n + 1.0) ** 0.25
    R0 = optimize.bisect(F, 0.5, peak, xtol=1e-15, rtol=1e-15, maxiter=200)
    R1 = optimize.bisect(F, peak, 2.0 * math.sqrt(s * n + 2.0), xtol=1e-15, rtol=1e-15, maxiter=200)
    R0, R1 = (_newton_polish(derivs, r) for r in (R0, R1))
    prof = Profile("hitchin", derivs, {"s": s, "n": n})
    return ProfileMetric(Family.RADIAL_UN, prof, N, (R0, R1), name="hitchin",
                         params={"s": s, "n": n, "N": N})


def _eguchi_hanson(params):
    a = _param(params, "a", 1.0)
    if a <= 0:
        raise BadParams("a must be positive")
    a4 = a**4
    derivs = (
        lambda R: 1.0 - a4 / R**4,
        lambda R: 4.0 * a4 / R**5,
        lambda R: -20.0 * a4 / R**6,
        lambda R: 120.0 * a4 / R**7,
        lambda R: -840.0 * a4 / R**8,
    )
    prof = Profile("eguchi_hanson", derivs, {"a": a})
    return ProfileMetric(Family.RADIAL_UN, prof, 2, (a, math.inf), name="eguchi_hanson",
                         params={"a": a})


def _berger(params):
    lam = _param(params, "lambda", 0.5)
    N = _dimension(params, 2)
    if not 0.0 <= lam <= 1.0:
        raise BadParams("lambda must lie in [0, 1]")
    m = 1.0 - lam
    derivs = (
        lambda R: lam + m / (1.0 + R**2),
        lambda R: -2.0 * m * R / (1.0 + R**2) ** 2,
        lambda R: m * (6.0 * R**2 - 2.0) / (1.0 + R**2) ** 3,
        lambda R: m * (24.0 * R - 24.0 * R**3) / (1.0 + R**2) ** 4,
        lambda R: m * (24.0 - 240.0 * R**2 + 120.0 * R**4) / (1.0 + R**2) ** 5,
    )
    prof = Profile("berger", derivs, {"lambda": lam})
    return ProfileMetric(Family.RADIAL_UN, prof, N, (0.0, math.inf), name="berger",
                         params={"lambda": lam, "N": N})


# ---------------------------------------------------------------- potential U(N)

def _fs_potential(params):
    L = _param(params, "scale", 1.0)
    N = _dimension(params, 3)
    if L <= 0:
        raise BadParams("scale must be positive")
    c = 0.5 * L * L
    derivs = (
        lambda u: c * np.log1p(u),
        lambda u: c / (1.0 + u),
        lambda u: -c / (1.0 + u) ** 2,
        lambda u: 2.0 * c / (1.0 + u) ** 3,
        lambda u: -6.0 * c / (1.0 + u) ** 4,
        lambda u: 24.0 * c / (1.0 + u) ** 5,
    )
    prof = Profile("log1p", derivs, {"scale": L})
    return ProfileMetric(Family.POTENTIAL_UN, prof, N, (0.0, math.inf),
                         name="fubini_study_potential", params={"scale": L, "N": N})


def _flat_potential(params):
    N = _dimension(params, 2)
    prof = polynomial_profile([0.0, 1.0], name="flat")
    return ProfileMetric(Family.POTENTIAL_UN, prof, N, (0.0, math.inf), name="flat_potential",
                         params={"N": N})


CATALOG: dict[str, CatalogEntry] = {
    e.name: e
    for e in [
        CatalogEntry("sphere_1d", Family.ONE_DIM, {}, "theta in [0, pi]", "OneDimSphere",
                     {"collapse_H": True}, "round sphere S = sin(theta)", _sphere),
        CatalogEntry("cylinder_1d", Family.ONE_DIM, {}, "theta in [0, inf)", "OneDimPlane",
                     {"collapse_H": True}, "S = tanh(theta); K = 2 sech^2 > 0; pi_- = 1", _cylinder),
        CatalogEntry("plane_1d", Family.ONE_DIM, {}, "theta in [0, inf)", "OneDimPlane",
                     {"collapse_H": False}, "flat plane S = theta", _plane),
        CatalogEntry("fubini_study", Family.RADIAL_UN, {"scale": "float > 0 (default 1)", "N": "int >= 2"},
                     "R in [0, scale]", "Case1_NutBolt",
                     {"collapse_H": True, "reduce_S": True, "all_bisectional": True},
                     "F = 1 - R^2/scale^2, constant K_H = 4/scale^2", _fubini_study),
        CatalogEntry("hitchin", Family.RADIAL_UN, {"s": "float > 0", "n": "int > 1", "N": "int >= 2"},
                     "R between the two positive zeros of F", "Case2_TwoBolts",
                     {"collapse_H": True, "reduce_S": False, "all_bisectional": False},
                     "F = (R^2-1)(sn+1-R^2)/(s R^2); R0303 = 4/s", _hitchin),
        CatalogEntry("eguchi_hanson", Family.RADIAL_UN, {"a": "float > 0"}, "R in [a, inf)",
                     "Case4_SemiInfiniteBolt",
                     {"collapse_H": True, "reduce_S": False, "all_bisectional": False},
                     "F = 1 - a^4/R^4, bolt n = 2 at R = a", _eguchi_hanson),
        CatalogEntry("berger", Family.RADIAL_UN, {"lambda": "float in [0, 1]", "N": "int >= 2"},
                     "R in [0, inf)", "Case3_SemiInfiniteNut",
                     {"collapse_H": True, "reduce_S": True, "all_bisectional": True},
                     "F = (1 + lambda R^2)/(1 + R^2); flat at lambda = 1 (no strict positivity)",
                     _berger),
        CatalogEntry("fubini_study_potential", Family.POTENTIAL_UN,
                     {"scale": "float > 0 (default 1)", "N": "int >= 2"}, "u in [0, inf)",
                     "Case1_NutBolt",
                     {"collapse_H": True, "reduce_S": True, "all_bisectional": True},
                     "Sigma = (scale^2/2) log(1+u), i.e. F = 1 - R^2/scale^2", _fs_potential),
        CatalogEntry("flat_potential", Family.POTENTIAL_UN, {"N": "int >= 2"}, "u in [0, inf)",
                     "Case3_SemiInfiniteNut", {"collapse_H": False},
                     "Sigma = u, flat C^N", _flat_potential),
    ]
}

ALIASES = {"lambda_family": "berger", "fs": "fubini_study", "sphere": "sphere_1d",
           "cylinder": "cylinder_1d"}


def instantiate(name: str, params: dict | None = None) -> ProfileMetric:
    key = ALIASES.get(name, name)
    if key not in CATALOG:
        raise BadParams(f"unknown catalog entry {name!r}")
    params = dict(params or {})
    if "lam" in params:
        params["lambda"] = params.pop("lam")
    return CATALOG[key].build(params)


def list_entries() -> list[dict]:
    return [e.schema_json() for e in CATALOG.values()]


_FAMILIES = {f.value: f for f in Family}


def load_metric(spec) -> ProfileMetric:
    """Build a metric from a JSON document (str, path-like content or dict).

    ``{"family": "radial_un", "profile": {"name": "hitchin", "params": {...}},
    "N": 2, "domain": [1.0, 1.4832]}``; user profiles use
    ``{"name": "polynomial", "coeffs": [...]}``.
    """
    if isinstance(spec, str):
        spec = json.loads(spec)
    try:
        prof_spec = spec["profile"]
        name = prof_spec["name"]
    except (KeyError, TypeError):
        raise ValidationError("metric spec needs a profile with a name") from None
    if name != "polynomial":
        params = dict(prof_spec.get("params", {}))
        if "N" in spec:
            params.setdefault("N", spec["N"])
        metric = instantiate(name, params)
        if "family" in spec and _FAMILIES.get(spec["family"]) is not metric.family:
            raise ValidationError(f"profile {name!r} belongs to family {metric.family.value}")
        if "domain" in spec:
            lo, hi = (float(v) for v in spec["domain"])
            tol = 1e-3 * max(1.0, abs(metric.hi) if math.isfinite(metric.hi) else 1.0)
            if abs(lo - metric.lo) > tol or (math.isfinite(hi) and abs(hi - metric.hi) > tol):
                log.warning("declared domain %s replaced by computed %s", spec["domain"], metric.domain)
        return metric
    family = _FAMILIES.get(spec.get("family"))
    if family is None:
        raise ValidationError(f"unknown family {spec.get('family')!r}")
    if "domain" not in spec:
        raise ValidationError("polynomial profiles need an explicit domain")
    lo, hi = (float(v) for v in spec["domain"])
    N = int(spec.get("N", 1 if family is Family.ONE_DIM else 2))
    prof = polynomial_profile(prof_spec["coeffs"])
    return ProfileMetric(family, prof, N, (lo, hi), chi_ref=spec.get("chi_ref"),
                         name="polynomial", params={"coeffs": prof.params["coeffs"]})
