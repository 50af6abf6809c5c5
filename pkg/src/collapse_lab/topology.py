"""Endpoint (nut / bolt) analysis and the four-case completeness taxonomy."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IncompleteManifold, NotAnEndpoint
from .geometry import Family, ProfileMetric, radial_data

ENDPOINT_TOL = 1e-8
# Σ' + uΣ'' cancels badly at huge u, so the u -> infinity limit is taken by
# Richardson extrapolation in 1/u from moderate probes
INFINITY_PROBES = (1e3, 1e4, 1e5)


class EndKind(enum.Enum):
    NUT = "Nut"
    BOLT = "Bolt"
    CONICAL = "ConicalDefect"
    INFINITE = "InfiniteEnd"
    DEGENERATE = "Degenerate"


class CaseLabel(enum.Enum):
    CASE1 = "Case1_NutBolt"
    CASE2 = "Case2_TwoBolts"
    CASE3 = "Case3_SemiInfiniteNut"
    CASE4 = "Case4_SemiInfiniteBolt"
    SPHERE = "OneDimSphere"
    PLANE = "OneDimPlane"
    INCOMPLETE = "Incomplete"


@dataclass(frozen=True)
class EndpointClass:
    kind: EndKind
    location: float
    n: int | None = None
    sign: int | None = None
    deficit: float | None = None
    slope: float | None = None
    drift_limit: float | None = None
    radius: float | None = None
    note: str = ""

    def label(self) -> str:
        if self.kind is EndKind.BOLT:
            return f"Bolt({self.n})"
        if self.kind is EndKind.CONICAL:
            return f"ConicalDefect({self.deficit:.6g})"
        return self.kind.value

    def to_json(self) -> dict:
        out = {"kind": self.kind.value, "label": self.label(), "location": _jsonable(self.location)}
        for key in ("n", "sign", "radius", "deficit", "slope", "drift_limit"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        if self.note:
            out["note"] = self.note
        return out


def _jsonable(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


@dataclass(frozen=True)
class ManifoldClassification:
    ends: tuple[EndpointClass, EndpointClass]
    case_label: CaseLabel
    principal_orbit: str
    topology_note: str
    failed_condition: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return self.case_label is not CaseLabel.INCOMPLETE

    def require_complete(self) -> "ManifoldClassification":
        if not self.complete:
            raise IncompleteManifold(self.failed_condition or "incomplete metric")
        return self

    def to_json(self) -> dict:
        out = {
            "ends": [e.to_json() for e in self.ends],
            "case": self.case_label.value,
            "orbit": self.principal_orbit,
            "notes": self.topology_note,
        }
        if self.failed_condition:
            out["failed_condition"] = self.failed_condition
        return out


# ---------------------------------------------------------------- single ends

def classify_end(metric: ProfileMetric, endpoint: float) -> EndpointClass:
    if endpoint not in metric.domain and not _is_interior_zero(metric, endpoint):
        raise NotAnEndpoint(f"{endpoint} is neither a domain end nor a zero of the profile")
    if metric.family is Family.ONE_DIM:
        return _one_dim_end(metric, endpoint)
    if metric.family is Family.RADIAL_UN:
        return _radial_end(metric, endpoint)
    return _potential_end(metric, endpoint)


def _is_interior_zero(metric: ProfileMetric, x: float) -> bool:
    if not metric.lo < x < metric.hi:
        return False
    f = _positivity_function(metric)
    return abs(float(f(x))) < ENDPOINT_TOL


def _positivity_function(metric: ProfileMetric):
    p = metric.profile
    if metric.family is Family.POTENTIAL_UN:
        return lambda u: np.minimum(p(u, 1), p(u, 1) + u * p(u, 2))
    return lambda x: p(x, 0)


def _one_dim_end(metric: ProfileMetric, x0: float) -> EndpointClass:
    p = metric.profile
    if math.isinf(x0):
        far = metric.lo + 50.0
        drift = -float(p(far, 1))
        return EndpointClass(EndKind.INFINITE, x0, drift_limit=drift,
                             note="drift limit in units of sigma^2, estimated at theta = lo + 50")
    S0, slope = float(p(x0, 0)), float(p(x0, 1))
    if abs(S0) >= ENDPOINT_TOL:
        return EndpointClass(EndKind.DEGENERATE, x0, note=f"S = {S0:.6g} != 0 at a finite end")
    if abs(abs(slope) - 1.0) < ENDPOINT_TOL:
        return EndpointClass(EndKind.NUT, x0, slope=slope, note="smooth pole")
    return EndpointClass(EndKind.CONICAL, x0, deficit=2 * math.pi * (1 - abs(slope)), slope=slope,
                         note="|dS/dtheta| != 1 at a zero of S")


def _bolt_or_degenerate(x0: float, R0: float, RF1: float) -> EndpointClass:
    n = int(round(abs(RF1) / 2.0))
    if n >= 1 and abs(abs(RF1) - 2 * n) < ENDPOINT_TOL:
        return EndpointClass(EndKind.BOLT, x0, n=n, sign=1 if RF1 > 0 else -1, radius=R0,
                             note=f"R0 F'(R0) = {RF1:.12g} at R0 = {R0:.12g}")
    return EndpointClass(EndKind.DEGENERATE, x0,
                         note=f"R0 F'(R0) = {RF1:.12g} is not an even integer")


def _radial_end(metric: ProfileMetric, x0: float) -> EndpointClass:
    p = metric.profile
    if math.isinf(x0):
        # complete iff F stays positive and the radial distance, the integral
        # of dR/sqrt(F), diverges; F may decay (ALF ends such as F ~ 1/R^2)
        F_far = [float(p(r)) for r in (1e3, 1e6)]
        if min(F_far) > 0.0 and F_far[1] / F_far[0] < 1e6:
            return EndpointClass(EndKind.INFINITE, x0, note=f"F -> {F_far[-1]:.6g}")
        return EndpointClass(EndKind.DEGENERATE, x0, note="F is not positive or grows too fast at infinity")
    F0, F1 = float(p(x0, 0)), float(p(x0, 1))
    if x0 == 0.0:
        if abs(F0 - 1.0) < ENDPOINT_TOL and abs(F1) < ENDPOINT_TOL:
            return EndpointClass(EndKind.NUT, 0.0, note="F(0) = 1, F'(0) = 0")
        return EndpointClass(EndKind.DEGENERATE, 0.0, note=f"F(0) = {F0:.6g}, F'(0) = {F1:.6g}")
    if abs(F0) >= ENDPOINT_TOL:
        return EndpointClass(EndKind.DEGENERATE, x0, note=f"F = {F0:.6g} != 0 at a finite end")
    return _bolt_or_degenerate(x0, x0, x0 * F1)


def _potential_end(metric: ProfileMetric, u0: float) -> EndpointClass:
    p = metric.profile
    if u0 == 0.0:
        s1 = float(p(0.0, 1))
        if s1 > 0.0:
            return EndpointClass(EndKind.NUT, 0.0, note="u = 0 with Sigma'(0) > 0")
        return EndpointClass(EndKind.DEGENERATE, 0.0, note=f"Sigma'(0) = {s1:.6g}")
    if math.isfinite(u0):
        d = radial_data(metric, u0 * (1 - 1e-12))
        if abs(d.F) < ENDPOINT_TOL:
            return _bolt_or_degenerate(u0, d.R, d.R * d.dF)
        return EndpointClass(EndKind.DEGENERATE, u0, note=f"F = {d.F:.6g} at a finite end")
    probes = [radial_data(metric, u) for u in INFINITY_PROBES]
    if probes[-1].R < 2.0 * probes[-2].R:
        F_inf = _extrapolate_inf([d.F for d in probes])
        if abs(F_inf) < ENDPOINT_TOL:
            R_inf = _extrapolate_inf([d.R for d in probes])
            RF1 = _extrapolate_inf([d.R * d.dF for d in probes])
            return _bolt_or_degenerate(u0, R_inf, RF1)
    if min(d.F for d in probes) > ENDPOINT_TOL:
        return EndpointClass(EndKind.INFINITE, u0, note=f"F -> {probes[-1].F:.6g}")
    return EndpointClass(EndKind.DEGENERATE, u0, note="no clean limit at u = infinity")


def _extrapolate_inf(values) -> float:
    """Limit of f(u) as u -> infinity assuming f = a0 + a1/u + a2/u^2."""
    h = 1.0 / np.asarray(INFINITY_PROBES)
    A = np.vander(h, 3, increasing=True)
    return float(np.linalg.solve(A, np.asarray(values, dtype=float))[0])


# ---------------------------------------------------------------- whole manifold

def _interior_sign_problem(metric: ProfileMetric) -> str:
    lo, hi = metric.domain
    top = hi if math.isfinite(hi) else lo + 100.0
    xs = lo + (top - lo) * np.linspace(0.0, 1.0, 2001)[1:-1]
    vals = _positivity_function(metric)(xs)
    bad = np.nonzero(vals <= 0.0)[0]
    if bad.size:
        return f"profile not positive in the interior (first at {xs[bad[0]]:.6g})"
    return ""


def classify_manifold(metric: ProfileMetric) -> ManifoldClassification:
    """Classify both ends and assign the completeness case."""
    ends = (classify_end(metric, metric.lo), classify_end(metric, metric.hi))
    N = metric.complex_dimension

    def incomplete(reason: str) -> ManifoldClassification:
        return ManifoldClassification(ends, CaseLabel.INCOMPLETE, "n/a", "", failed_condition=reason)

    if metric.params.get("periodic"):
        return incomplete("the radial coordinate cannot range over a circle")
    problem = _interior_sign_problem(metric)
    if problem:
        return incomplete(problem)
    bad = [e for e in ends if e.kind in (EndKind.DEGENERATE, EndKind.CONICAL)]
    if bad:
        return incomplete("; ".join(f"{e.label()} at {e.location}: {e.note}" for e in bad))
    k0, k1 = ends[0].kind, ends[1].kind

    if metric.family is Family.ONE_DIM:
        if k0 is EndKind.NUT and k1 is EndKind.NUT:
            return ManifoldClassification(ends, CaseLabel.SPHERE, "circle", "two-sphere CP^1")
        if EndKind.NUT in (k0, k1) and EndKind.INFINITE in (k0, k1):
            return ManifoldClassification(ends, CaseLabel.PLANE, "circle", "plane C")
        return incomplete("a complete surface needs a pole at a zero of S")

    cpn = f"CP^{N - 1}"
    if k0 is EndKind.NUT and k1 is EndKind.NUT:
        return incomplete("there cannot be two nuts")
    if k0 is EndKind.NUT and k1 is EndKind.BOLT:
        if ends[1].n != 1 or ends[1].sign != -1:
            return incomplete("a nut and a bolt need n = 1 with R0 F'(R0) = -2 at the bolt")
        return ManifoldClassification(ends, CaseLabel.CASE1, "three-sphere",
                                      f"biholomorphic to CP^{N}; bolt is a {cpn}")
    if k0 is EndKind.BOLT and k1 is EndKind.BOLT:
        if ends[0].n != ends[1].n or ends[0].sign != 1 or ends[1].sign != -1:
            return incomplete("two bolts must have the same n with opposite signs")
        n = ends[0].n
        orbit = "three-sphere" if n == 1 else f"L(3,{n})"
        return ManifoldClassification(ends, CaseLabel.CASE2, orbit,
                                      f"P(O({n})+O(0)) bundle over {cpn}")
    if k0 is EndKind.NUT and k1 is EndKind.INFINITE:
        return ManifoldClassification(ends, CaseLabel.CASE3, "three-sphere", f"C^{N}")
    if k0 is EndKind.BOLT and k1 is EndKind.INFINITE:
        if ends[0].sign != 1:
            return incomplete("a lower bolt needs R0 F'(R0) = +2n")
        n = ends[0].n
        orbit = "three-sphere" if n == 1 else f"L(3,{n})"
        return ManifoldClassification(ends, CaseLabel.CASE4, orbit,
                                      f"bolt {cpn} with an asymptotic end (O(-{n}) over {cpn})")
    return incomplete(f"unsupported end pair {ends[0].label()}, {ends[1].label()}")
