"""Symmetric Kähler metrics described by a single profile function.

Three families are supported:

``ONE_DIM``
    ``ds^2 = dθ^2 + S(θ)^2 dφ^2`` on a surface of revolution.
``RADIAL_UN``
    ``ds^2 = dR^2/F + R^2/4 (σ1^2 + σ2^2) + R^2 F/4 σ3^2`` with U(2)-type symmetry.
``POTENTIAL_UN``
    ``g_{ab̄} = Σ' δ_{ab̄} + Σ'' z̄_a z_b`` with Kähler potential ``Σ(u)``, ``u = |z|^2``.

Every family has a radial profile variable ``x`` (θ, R or u) and a reduced
coordinate χ in which the radial part of the metric is ``V dχ^2``.  The rate
``g(x) = dx/dχ`` is ``S`` (one-dim), ``R F / 2`` (radial) and ``2u`` (potential).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import (
    DegenerateMetric,
    DerivativeUnavailable,
    NonInvertible,
    OutOfDomain,
    SingularPoint,
    ValidationError,
    WrongChart,
)

CHI_SENTINEL = 1.0e3
FD_STEP = 1.0e-5
MAX_PUBLIC_ORDER = 3


class Family(enum.Enum):
    ONE_DIM = "one_dim"
    RADIAL_UN = "radial_un"
    POTENTIAL_UN = "potential_un"


class Chart(enum.Enum):
    THETA = "theta"
    CHI = "chi"
    RADIAL_FRAME = "radial_frame"
    COMPLEX = "complex"


@dataclass(frozen=True)
class Profile:
    """A function of one real variable with its derivatives.

    ``derivs[k]`` evaluates the k-th derivative and must accept numpy arrays.
    Orders past the supplied ones fall back to Richardson-extrapolated central
    differences of the highest supplied derivative.
    """

    name: str
    derivs: tuple[Callable, ...]
    params: dict = field(default_factory=dict)
    antiderivative: Callable | None = None

    def __call__(self, x, order: int = 0):
        if order < 0:
            raise DerivativeUnavailable(f"negative derivative order {order}")
        if order < len(self.derivs):
            return self.derivs[order](x)
        top = len(self.derivs) - 1
        f = self.derivs[top]
        return _richardson(f, x, order - top)


def _richardson(f: Callable, x, k: int, h: float = FD_STEP):
    if k == 0:
        return f(x)

    def d1(y, step):
        return (_richardson(f, y + step, k - 1, h) - _richardson(f, y - step, k - 1, h)) / (2 * step)

    hh = h * max(1.0, float(np.max(np.abs(x))))
    return (4.0 * d1(x, hh / 2) - d1(x, hh)) / 3.0


def polynomial_profile(coeffs: Sequence[float], name: str = "polynomial") -> Profile:
    """Profile ``sum c_k x^k`` with exact derivatives of every order."""
    p = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))
    derivs = tuple(p.deriv(k) if k else p for k in range(6))
    return Profile(name, derivs, {"coeffs": list(map(float, coeffs))}, antiderivative=p.integ())


@dataclass(frozen=True)
class ProfileMetric:
    family: Family
    profile: Profile
    complex_dimension: int
    domain: tuple[float, float]
    chi_ref: float | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        lo, hi = self.domain
        if not lo < hi:
            raise ValidationError(f"empty domain {self.domain}")
        if self.family is Family.ONE_DIM and self.complex_dimension != 1:
            raise ValidationError("one-dimensional family requires N = 1")
        if self.family is not Family.ONE_DIM and self.complex_dimension < 2:
            raise ValidationError("U(N) families require N >= 2")
        if self.family is Family.POTENTIAL_UN and lo != 0.0:
            raise ValidationError("potential metrics live on u in [0, u_max]")
        if self.chi_ref is None:
            object.__setattr__(self, "chi_ref", _default_reference(self))
        if not lo < self.chi_ref < hi:
            raise ValidationError("chi reference point must be interior")

    @property
    def lo(self) -> float:
        return self.domain[0]

    @property
    def hi(self) -> float:
        return self.domain[1]

    @property
    def compact(self) -> bool:
        return math.isfinite(self.hi)


def _default_reference(metric: ProfileMetric) -> float:
    lo, hi = metric.domain
    if metric.family is Family.POTENTIAL_UN:
        return 1.0 if hi > 1.0 else 0.5 * hi
    if math.isfinite(hi):
        return 0.5 * (lo + hi)
    return lo + 1.0


@dataclass(frozen=True)
class ChartPoint:
    """Coordinates of a point in one chart.

    Charts and coordinate layouts:

    * one-dim: ``THETA (θ, φ)`` or ``CHI (χ, φ)``
    * radial: ``RADIAL_FRAME (R, θ, φ, ψ)`` or ``CHI (χ, θ, φ, ψ)``
    * potential: ``COMPLEX (z^1..z^N)``, ``CHI (χ, ζ^1..ζ^N)`` or
      ``RADIAL_FRAME (R, ζ^1..ζ^N)`` with ``|ζ| = 1``
    """

    chart: Chart
    coords: tuple
    at_boundary: bool = False

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))


# ---------------------------------------------------------------- profiles

def eval_profile(metric: ProfileMetric, x: float, order: int = 0) -> float:
    if order > MAX_PUBLIC_ORDER or order < 0:
        raise DerivativeUnavailable(f"order {order} outside 0..{MAX_PUBLIC_ORDER}")
    _check_domain(metric, x)
    return float(metric.profile(x, order))


def _check_domain(metric: ProfileMetric, x) -> None:
    xa = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(xa)) or np.any(xa < metric.lo) or np.any(xa > metric.hi):
        raise OutOfDomain(f"{x} outside domain {metric.domain}")


def rate(metric: ProfileMetric, x):
    """``dx/dχ`` for the family's reduced coordinate."""
    fam = metric.family
    if fam is Family.ONE_DIM:
        return metric.profile(x, 0)
    if fam is Family.RADIAL_UN:
        return 0.5 * x * metric.profile(x, 0)
    return 2.0 * x


# ---------------------------------------------------------------- potential -> radial data

@dataclass(frozen=True)
class RadialData:
    """``R`` and ``F(R)`` with R-derivatives at one profile point."""

    R: float
    F: float
    dF: float
    d2F: float
    d3F: float | None = None


def radial_data(metric: ProfileMetric, x: float, with_third: bool = False) -> RadialData:
    if metric.family is Family.RADIAL_UN:
        p = metric.profile
        return RadialData(x, p(x, 0), p(x, 1), p(x, 2), p(x, 3) if with_third else None)
    if metric.family is not Family.POTENTIAL_UN:
        raise WrongChart("radial data needs a U(N) family")
    u = x
    if u <= 0.0:
        raise SingularPoint("u = 0 is the nut; use the nut limit")
    s1, s2, s3, s4 = (metric.profile(u, k) for k in (1, 2, 3, 4))
    P = s1 + u * s2
    Pu = 2 * s2 + u * s3
    Puu = 3 * s3 + u * s4
    R = math.sqrt(2 * u * s1)
    F = P / s1
    Fu = (Pu * s1 - P * s2) / s1**2
    Fuu = ((Puu * s1 - P * s3) * s1 - 2 * s2 * (Pu * s1 - P * s2)) / s1**3
    Ru = P / R
    Ruu = Pu / R - P**2 / R**3
    dF = Fu / Ru
    d2F = (Fuu * Ru - Fu * Ruu) / Ru**3
    return RadialData(R, F, dF, d2F)


def potential_R(metric: ProfileMetric, u):
    return np.sqrt(2.0 * u * metric.profile(u, 1))


# ---------------------------------------------------------------- chi <-> profile variable

def chi_of_x(metric: ProfileMetric, x: float) -> float:
    """Reduced coordinate of profile value ``x``; ``χ(chi_ref) = 0``."""
    _check_domain(metric, x)
    if metric.family is Family.POTENTIAL_UN:
        if x <= 0.0:
            raise SingularPoint("u = 0 maps to chi = -inf")
        return 0.5 * math.log(x)
    lo, hi, ref = metric.lo, metric.hi, metric.chi_ref
    if x == lo or x == hi:
        raise SingularPoint(f"endpoint {x} has infinite chi")
    if x == ref:
        return 0.0
    g = lambda y: float(rate(metric, y))  # noqa: E731
    if x < ref:
        # x = lo + e^s
        f = lambda s: math.exp(s) / g(lo + math.exp(s))  # noqa: E731
        return -_quad(f, math.log(x - lo), math.log(ref - lo))
    if math.isfinite(hi):
        f = lambda s: math.exp(s) / g(hi - math.exp(s))  # noqa: E731
        return _quad(f, math.log(hi - x), math.log(hi - ref))
    return _quad(lambda y: 1.0 / g(y), ref, x)


def _quad(f, a, b) -> float:
    val, _err = integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-13, limit=400)
    return val


def x_of_chi(metric: ProfileMetric, chi: float) -> float:
    """Inverse of :func:`chi_of_x`."""
    if not math.isfinite(chi):
        raise SingularPoint("infinite chi is an endpoint")
    if metric.family is Family.POTENTIAL_UN:
        u = math.exp(2.0 * chi)
        if u >= metric.hi:
            raise OutOfDomain(f"chi {chi} beyond domain")
        return u
    lo, hi, ref = metric.lo, metric.hi, metric.chi_ref
    if chi == 0.0:
        return ref
    if chi < 0.0:
        def f(s):
            return chi_of_x(metric, lo + math.exp(s)) - chi

        s_hi = math.log(ref - lo)
        s_lo = _expand(f, s_hi, -5.0)
        s = optimize.brentq(f, s_lo, s_hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        return lo + math.exp(s)
    if math.isfinite(hi):
        def f(s):
            return chi - chi_of_x(metric, hi - math.exp(s))

        s_hi = math.log(hi - ref)
        s_lo = _expand(f, s_hi, -5.0)
        s = optimize.brentq(f, s_lo, s_hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        return hi - math.exp(s)

    def f(y):
        return chi_of_x(metric, y) - chi

    b = ref + 1.0
    while f(b) < 0.0:
        b = ref + 2.0 * (b - ref)
        if b > 1e300:
            raise NonInvertible("chi not reached on infinite end")
    return optimize.brentq(f, ref, b, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)


def _expand(f, start: float, step: float) -> float:
    s = start + step
    for _ in range(200):
        if f(s) < 0.0:
            return s
        s += step
    raise NonInvertible("could not bracket chi")


# ---------------------------------------------------------------- charts

def profile_variable(metric: ProfileMetric, p) -> float:
    """Profile argument (θ, R or u) of a point given as ChartPoint or float."""
    if not isinstance(p, ChartPoint):
        x = float(p)
        _check_domain(metric, x)
        return x
    fam, c = metric.family, p.chart
    if c is Chart.CHI and (p.at_boundary or math.isinf(p.coords[0])):
        return metric.lo if p.coords[0] < 0 else metric.hi
    if c is Chart.CHI:
        return x_of_chi(metric, float(p.coords[0]))
    if fam is Family.ONE_DIM and c is Chart.THETA:
        x = float(p.coords[0])
    elif fam is Family.RADIAL_UN and c is Chart.RADIAL_FRAME:
        x = float(p.coords[0])
    elif fam is Family.POTENTIAL_UN and c is Chart.COMPLEX:
        z = np.asarray(p.coords, dtype=complex)
        if z.size != metric.complex_dimension:
            raise ValidationError("coordinate count does not match N")
        x = float(np.vdot(z, z).real)
    elif fam is Family.POTENTIAL_UN and c is Chart.RADIAL_FRAME:
        x = _u_of_R(metric, float(p.coords[0]))
    else:
        raise WrongChart(f"chart {c.value} not available for {fam.value}")
    _check_domain(metric, x)
    return x


def _u_of_R(metric: ProfileMetric, R: float) -> float:
    if R == 0.0:
        return 0.0
    hi = metric.hi if math.isfinite(metric.hi) else None
    f = lambda u: float(potential_R(metric, u)) - R  # noqa: E731
    b = 1.0 if hi is None else hi
    if hi is None:
        while f(b) < 0.0:
            b *= 2.0
            if b > 1e300:
                raise NonInvertible(f"R = {R} not attained")
    grid = np.linspace(0.0, b, 257)
    rv = potential_R(metric, grid)
    if np.any(np.diff(rv) <= 0.0):
        raise NonInvertible("R(u) is not monotone on the requested range")
    if f(b) < 0.0:
        raise OutOfDomain(f"R = {R} beyond domain")
    return optimize.brentq(f, 0.0, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def chart_convert(metric: ProfileMetric, p: ChartPoint, target: Chart,
                  allow_boundary: bool = False) -> ChartPoint:
    """Express the point ``p`` in the ``target`` chart."""
    fam = metric.family
    if p.chart is target and not (target is Chart.CHI and math.isinf(p.coords[0])):
        return p
    angles = _angular_part(metric, p)
    x = profile_variable(metric, p)
    at_end = x in (metric.lo, metric.hi) or p.at_boundary
    if target is Chart.CHI:
        if at_end and (allow_boundary or not (fam is Family.POTENTIAL_UN and x == metric.hi)):
            if not allow_boundary:
                raise SingularPoint(f"profile value {x} is an endpoint (chi infinite)")
            chi = -CHI_SENTINEL if x == metric.lo else CHI_SENTINEL
            return ChartPoint(Chart.CHI, (chi, *angles), at_boundary=True)
        return ChartPoint(Chart.CHI, (chi_of_x(metric, x), *angles))
    if fam is Family.ONE_DIM and target is Chart.THETA:
        return ChartPoint(Chart.THETA, (x, *angles))
    if fam is Family.RADIAL_UN and target is Chart.RADIAL_FRAME:
        return ChartPoint(Chart.RADIAL_FRAME, (x, *angles))
    if fam is Family.POTENTIAL_UN and target is Chart.RADIAL_FRAME:
        return ChartPoint(Chart.RADIAL_FRAME, (float(potential_R(metric, x)), *angles))
    if fam is Family.POTENTIAL_UN and target is Chart.COMPLEX:
        if math.isinf(x):
            raise SingularPoint("the end at u = infinity has no complex coordinates")
        zeta = np.asarray(angles, dtype=complex)
        return ChartPoint(Chart.COMPLEX, tuple(math.sqrt(x) * zeta))
    raise WrongChart(f"no conversion to {target.value} for {fam.value}")


def _angular_part(metric: ProfileMetric, p: ChartPoint) -> tuple:
    if metric.family is not Family.POTENTIAL_UN or p.chart is not Chart.COMPLEX:
        return tuple(p.coords[1:])
    z = np.asarray(p.coords, dtype=complex)
    r = float(np.linalg.norm(z))
    if r == 0.0:
        zeta = np.zeros(metric.complex_dimension, dtype=complex)
        zeta[0] = 1.0
        return tuple(zeta)
    return tuple(z / r)


# ---------------------------------------------------------------- metric components

@dataclass(frozen=True)
class MetricComponents:
    """Orthonormal-frame coefficients of the metric at a point."""

    coefficients: tuple[float, ...]
    F: float | None = None
    Q: float | None = None


def metric_components(metric: ProfileMetric, p) -> MetricComponents:
    x = profile_variable(metric, p)
    fam = metric.family
    if fam is Family.ONE_DIM:
        S = float(metric.profile(x))
        coeffs = (1.0, S * S)
        if S < 0.0:
            raise DegenerateMetric(f"S = {S} < 0")
        return MetricComponents(coeffs)
    if fam is Family.RADIAL_UN:
        R, F = x, float(metric.profile(x))
        Q = None
    else:
        u = x
        s1, s2 = float(metric.profile(u, 1)), float(metric.profile(u, 2))
        P = s1 + u * s2
        if s1 <= 0.0 or P <= 0.0:
            raise DegenerateMetric(f"Σ' = {s1}, Σ' + uΣ'' = {P}")
        R = math.sqrt(2 * u * s1)
        F = P / s1
        Q = s2 / P
    if F <= 0.0:
        raise DegenerateMetric(f"F = {F} <= 0")
    coeffs = (1.0 / F, R * R / 4.0, R * R * F / 4.0)
    return MetricComponents(coeffs, F=F, Q=Q)


def dispersion_x(metric: ProfileMetric, x):
    """Dispersion of the family's energy Hamiltonian as a function of ``x``.

    One-dim ``S^2``; radial ``R^2 F / 4``; potential ``2u(Σ' + uΣ'')``.
    """
    fam = metric.family
    if fam is Family.ONE_DIM:
        S = metric.profile(x)
        return S * S
    if fam is Family.RADIAL_UN:
        return 0.25 * x * x * metric.profile(x)
    return 2.0 * x * (metric.profile(x, 1) + x * metric.profile(x, 2))


def hamiltonian_x(metric: ProfileMetric, x):
    """Energy Hamiltonian as a function of ``x``.

    One-dim: ``dH/dθ = -S`` with the constant chosen so that the two ends are
    symmetric about zero on compact domains (``H = cos θ`` for the round
    sphere) and ``H(lo) = 0`` otherwise.  Radial ``-R^2/4``; potential ``-uΣ'``.
    """
    fam = metric.family
    if fam is Family.RADIAL_UN:
        return -0.25 * np.asarray(x) ** 2 if np.ndim(x) else -0.25 * x * x
    if fam is Family.POTENTIAL_UN:
        return -x * metric.profile(x, 1)
    lo, hi = metric.domain
    A = metric.profile.antiderivative
    if A is None:
        A = _numeric_antiderivative(metric)
    offset = 0.5 * (A(hi) - A(lo)) if math.isfinite(hi) else 0.0
    return offset - (A(x) - A(lo))


def _numeric_antiderivative(metric: ProfileMetric) -> Callable:
    lo = metric.lo

    def A(x):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.array([_quad(lambda t: float(metric.profile(t)), lo, xi) for xi in xs])
        return out if np.ndim(x) else float(out[0])

    return A


def dispersion_derivs(metric: ProfileMetric, x):
    """``(V, dV/dx, d2V/dx2)`` for :func:`dispersion_x`."""
    fam, p = metric.family, metric.profile
    if fam is Family.ONE_DIM:
        S, S1, S2 = p(x, 0), p(x, 1), p(x, 2)
        return S * S, 2 * S * S1, 2 * S1 * S1 + 2 * S * S2
    if fam is Family.RADIAL_UN:
        F, F1, F2 = p(x, 0), p(x, 1), p(x, 2)
        return (0.25 * x * x * F, 0.25 * (2 * x * F + x * x * F1),
                0.25 * (2 * F + 4 * x * F1 + x * x * F2))
    s1, s2, s3, s4 = p(x, 1), p(x, 2), p(x, 3), p(x, 4)
    return (2 * x * s1 + 2 * x * x * s2, 2 * s1 + 6 * x * s2 + 2 * x * x * s3,
            8 * s2 + 10 * x * s3 + 2 * x * x * s4)


def rate_derivative(metric: ProfileMetric, x):
    """``d g / dx`` where ``g = dx/dχ``."""
    fam, p = metric.family, metric.profile
    if fam is Family.ONE_DIM:
        return p(x, 1)
    if fam is Family.RADIAL_UN:
        return 0.5 * (p(x, 0) + x * p(x, 1))
    return 2.0 + 0.0 * x


def log_dispersion_slope(metric: ProfileMetric, x):
    """``d log V / dχ``, the quantity driving the reduced SDE."""
    V, Vx, _ = dispersion_derivs(metric, x)
    return rate(metric, x) * Vx / V
