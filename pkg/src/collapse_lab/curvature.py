"""Gauss, Riemann and (bi)holomorphic sectional curvatures."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyGrid, NotUnit, SingularPoint, WrongChart, ZeroDispersion
from .geometry import (
    Family,
    ProfileMetric,
    dispersion_derivs,
    profile_variable,
    radial_data,
    rate,
    rate_derivative,
)

POSITIVITY_MARGIN = 1e-12
UNIT_TOL = 1e-9
INFINITE_END_SPAN = 20.0


@dataclass(frozen=True)
class CurvatureReport:
    """Orthonormal-frame Riemann components of a U(N)-symmetric metric.

    Only the independent components are stored; the rest follow from
    ``R0101 = R0202 = R1313 = R2323`` and ``R0123 = R0231 = -R0312/2``.
    """

    R: float
    R0101: float
    R0123: float
    R0303: float
    R0312: float
    R1212: float
    F: float = field(default=math.nan)

    @property
    def R0202(self) -> float:
        return self.R0101

    @property
    def R0231(self) -> float:
        return self.R0123

    @property
    def K_H(self) -> float:
        return self.R0303

    def bianchi_residual(self) -> float:
        return self.R0123 + self.R0231 + self.R0312

    def K_HS3(self, theta: float) -> float:
        return _khs3(self, theta)

    def as_row(self) -> dict:
        return {"R": self.R, "R0101": self.R0101, "R0123": self.R0123, "R0303": self.R0303,
                "R0312": self.R0312, "R1212": self.R1212, "K_H": self.K_H}


def gauss_curvature(metric: ProfileMetric, theta) -> float:
    if metric.family is not Family.ONE_DIM:
        raise WrongChart("Gauss curvature is defined for the one-dimensional family")
    x = profile_variable(metric, theta)
    S = float(metric.profile(x))
    if S == 0.0:
        raise SingularPoint(f"S vanishes at theta = {x}")
    return -float(metric.profile(x, 2)) / S


def riemann_components(metric: ProfileMetric, p) -> CurvatureReport:
    """Frame components at radius ``R`` (radial) or ``u`` (potential).

    ``p`` is a ChartPoint or the family's profile variable.
    """
    if metric.family is Family.ONE_DIM:
        raise WrongChart("frame components need a U(N) family")
    x = profile_variable(metric, p)
    if x <= 0.0:
        raise SingularPoint("R = 0 is the nut; curvature there is a limit")
    d = radial_data(metric, x)
    R, F, F1, F2 = d.R, float(d.F), float(d.dF), float(d.d2F)
    half = F1 / (2.0 * R)
    return CurvatureReport(
        R=R,
        R0101=-half,
        R0123=half,
        R0303=-0.5 * (F2 + 3.0 * F1 / R),
        R0312=-2.0 * half,
        R1212=4.0 * _one_minus_F(metric, x, R, F) / R**2,
        F=F,
    )


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


def _stable_route(metric: ProfileMetric, x: float, R: float) -> bool:
    """Whether ``1 - F`` is evaluated without cancellation at this point."""
    if metric.family is Family.RADIAL_UN and metric.lo == 0.0 and R < 0.1:
        return abs(float(metric.profile(0.0)) - 1.0) < 1e-12
    return metric.family is Family.POTENTIAL_UN and x < 0.01


def _one_minus_F(metric: ProfileMetric, x: float, R: float, F: float) -> float:
    if not _stable_route(metric, x, R):
        return 1.0 - F
    if metric.family is Family.RADIAL_UN:
        # near a nut F(0) = 1 and 1 - F cancels; integrate F' from the nut instead
        t = 0.5 * R * (_GL_NODES + 1.0)
        return -0.5 * R * float(_GL_WEIGHTS @ metric.profile(t, 1))
    # 1 - F = -u Σ''/Σ' ; no cancellation
    return float(-x * metric.profile(x, 2) / metric.profile(x, 1))


def kh_from_dispersion(metric: ProfileMetric, x):
    """``-(1/2V) d^2 log V / dχ^2`` evaluated by the chain rule in ``x``."""
    V, Vx, Vxx = dispersion_derivs(metric, x)
    if np.any(np.asarray(V) == 0.0):
        raise ZeroDispersion("K_H undefined where V = 0")
    g, gx = rate(metric, x), rate_derivative(metric, x)
    second = g * (gx * Vx / V + g * Vxx / V - g * Vx * Vx / (V * V))
    return -second / (2.0 * V)


def holomorphic_sectional_KH(metric: ProfileMetric, p, route: str = "frame") -> float:
    """Holomorphic sectional curvature along the energy gradient.

    ``route="frame"`` uses R0303 (or ``-S''/S`` in one dimension);
    ``route="dispersion"`` uses the second χ-derivative of ``log V``.
    """
    x = profile_variable(metric, p)
    V = float(dispersion_derivs(metric, x)[0])
    if V == 0.0:
        raise ZeroDispersion(f"V = 0 at {x}")
    if route == "dispersion":
        return float(kh_from_dispersion(metric, x))
    if route != "frame":
        raise ValueError(f"unknown route {route!r}")
    if metric.family is Family.ONE_DIM:
        return gauss_curvature(metric, x)
    return riemann_components(metric, x).R0303


def bisectional(report: CurvatureReport, U, W) -> float:
    """``R(U, JU, W, JW)`` for unit frame vectors ``U``, ``W``."""
    U = np.asarray(U, dtype=float)
    W = np.asarray(W, dtype=float)
    for name, v in (("U", U), ("W", W)):
        if v.shape != (4,) or abs(float(v @ v) - 1.0) > UNIT_TOL:
            raise NotUnit(f"{name} is not a unit 4-vector")
    A, B, C, D = U
    al, be, ga, de = W
    return (
        report.R0303 * (al**2 + de**2) * (A**2 + D**2)
        + report.R0312 * ((al * B + be * A - ga * D - de * C) ** 2
                          + (al * C + be * D + ga * A + de * B) ** 2)
        + report.R1212 * (be**2 + ga**2) * (B**2 + C**2)
    )


def _khs3(report: CurvatureReport, theta: float) -> float:
    F = report.F
    c2, s2 = math.cos(theta) ** 2, math.sin(theta) ** 2
    delta = F * c2 + s2
    if delta <= 0.0:
        raise SingularPoint("Δ = F cos^2θ + sin^2θ vanishes")
    return (report.R0303 * F * c2 + report.R0312 * s2) / delta


def bisectional_KHS3(metric: ProfileMetric, R, theta: float) -> float:
    return _khs3(riemann_components(metric, R), theta)


# ---------------------------------------------------------------- positivity

def default_grid(metric: ProfileMetric, n_log: int = 200, n_end: int = 10) -> np.ndarray:
    """Interior sample points: log-spaced in the distance from the lower end
    plus points clustered within 1e-3 of every finite end.

    Infinite domains are truncated ``INFINITE_END_SPAN`` past the lower end.
    """
    lo, hi = metric.domain
    finite_hi = math.isfinite(hi)
    top = hi if finite_hi else lo + INFINITE_END_SPAN
    span = top - lo
    pts = [lo + span * np.geomspace(1e-3, 1.0 - 1e-3, n_log)]
    near = np.geomspace(1e-9, 1e-3, n_end)
    pts.append(lo + near * max(1.0, span) if lo != 0.0 else near)
    if finite_hi:
        pts.append(hi - near * max(1.0, span) if hi != 0.0 else hi - near)
    grid = np.unique(np.concatenate(pts))
    return grid[(grid > lo) & (grid < hi)]


@dataclass(frozen=True)
class Verdict:
    holds: bool
    min_value: float
    argmin: float


@dataclass(frozen=True)
class PositivityVerdicts:
    collapse_H: bool
    reduce_S: bool
    all_bisectional: bool
    details: dict

    def as_dict(self) -> dict:
        return {
            "collapse_H": self.collapse_H,
            "reduce_S": self.reduce_S,
            "all_bisectional": self.all_bisectional,
            "details": {k: {"holds": v.holds, "min": v.min_value, "at": v.argmin}
                        for k, v in self.details.items()},
        }


def _verdict(grid, values, scales=None) -> Verdict:
    """Strict positivity beyond the rounding level of each value's own terms.

    ``scales`` holds the magnitude of the terms that were combined at each
    point, so an exact cancellation (flat directions) never counts as
    positive while a small but cleanly computed value still does.
    """
    values = np.asarray(values, dtype=float)
    scales = np.abs(values) if scales is None else np.asarray(scales, dtype=float)
    ok = values > POSITIVITY_MARGIN * scales
    i = int(np.argmin(values))
    return Verdict(bool(np.all(ok) and np.all(values > 0.0)), float(values[i]), float(grid[i]))


def _term_scales(metric: ProfileMetric, x: float, report: CurvatureReport) -> tuple[float, float, float]:
    d = radial_data(metric, x)
    R, F1, F2 = d.R, abs(float(d.dF)), abs(float(d.d2F))
    s1212 = abs(report.R1212) if _stable_route(metric, x, R) else 4.0 * max(1.0, abs(report.F)) / R**2
    return 0.5 * (F2 + 3.0 * F1 / R), F1 / R, s1212


def positivity_scan(metric: ProfileMetric, grid=None) -> PositivityVerdicts:
    """Check the collapse / reduction / full bisectional positivity conditions."""
    grid = default_grid(metric) if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise EmptyGrid("positivity scan needs at least one point")
    if metric.family is Family.ONE_DIM:
        K = [gauss_curvature(metric, float(x)) for x in grid]
        v = _verdict(grid, K)
        return PositivityVerdicts(v.holds, v.holds, v.holds, {"K": v})
    reports = [riemann_components(metric, float(x)) for x in grid]
    scales = np.array([_term_scales(metric, float(x), r) for x, r in zip(grid, reports)])
    h = _verdict(grid, [r.R0303 for r in reports], scales[:, 0])
    s = _verdict(grid, [r.R0312 for r in reports], scales[:, 1])
    b = _verdict(grid, [r.R1212 for r in reports], scales[:, 2])
    return PositivityVerdicts(
        collapse_H=h.holds,
        reduce_S=h.holds and s.holds,
        all_bisectional=h.holds and s.holds and b.holds,
        details={"R0303": h, "R0312": s, "R1212": b},
    )
