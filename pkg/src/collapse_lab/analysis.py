"""Statistical checks on simulated ensembles and the hitting-probability formulas."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import InsufficientData, NotCompact, QuadratureFailure, ValidationError
from .geometry import Chart, ChartPoint, Family, ProfileMetric, dispersion_x, hamiltonian_x, profile_variable, rate
from .sde import EnsembleStats, SimConfig, run_ensemble, run_full_ensemble
from .topology import EndKind, classify_end

Z_THRESHOLD = 3.0
MIN_PATHS = 100
RATIO_TOL = 1e-12


@dataclass(frozen=True)
class HypothesisReport:
    statistic: float
    expected: float
    standard_error: float
    z_score: float
    passed: bool
    n_samples: int
    description: str
    threshold: float = Z_THRESHOLD
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"statistic": self.statistic, "expected": self.expected,
                "standard_error": self.standard_error, "z_score": self.z_score,
                "pass": self.passed, "n_samples": self.n_samples, "threshold": self.threshold,
                "description": self.description, **self.extra}


def _zscore(stat: float, expected: float, se: float) -> float:
    if se > 0.0:
        return (stat - expected) / se
    return 0.0 if stat == expected else math.copysign(math.inf, stat - expected)


# ---------------------------------------------------------------- bucket helpers

def _buckets(ens: EnsembleStats):
    """Active mask per (path, bucket) and the bucket duration."""
    if ens.n_paths < MIN_PATHS:
        raise InsufficientData(f"need at least {MIN_PATHS} paths, got {ens.n_paths}")
    rec = ens.records
    if rec is None:
        raise InsufficientData("path records were not kept")
    if rec.shape[1] < 2:
        raise InsufficientData("need at least one full bucket of steps")
    re_ = ens.config.record_every
    starts = np.arange(rec.shape[1] - 1) * re_
    ex = ens.exit_step[:, None]
    active = (ex < 0) | (ex > starts[None, :])
    return active, re_ * ens.config.dt


def _kh_table(ens: EnsembleStats) -> tuple[np.ndarray, np.ndarray]:
    t = ens.prep.table
    with np.errstate(all="ignore"):
        kh = -(t.L_hd / t.h) / (2.0 * t.V)
    return t.chi, kh


def _integral_KV2(ens: EnsembleStats, weight_KH: bool) -> np.ndarray:
    """Trapezoid ``∫ K_H V² dt`` (or ``∫ V² dt``) over every bucket."""
    V = ens.V_records()
    f = V * V
    if weight_KH:
        grid, kh = _kh_table(ens)
        f = f * np.interp(ens.records, grid, kh)
    _, width = _buckets(ens)
    return 0.5 * (f[:, 1:] + f[:, :-1]) * width


# ---------------------------------------------------------------- martingale

def martingale_test(ens: EnsembleStats, observable: str = "H", threshold: float = Z_THRESHOLD) -> HypothesisReport:
    """Mean of bucketed ``ΔH`` against zero, studentised over (path, bucket).

    Also reports the quadratic-variation ratio ``ΣΔH² / Σ σ²∫V² dt``,
    which should be near one.
    """
    if observable != "H":
        raise ValidationError("the reduced ensemble records only the energy")
    active, _ = _buckets(ens)
    H = ens.H_records()
    dH = np.diff(H, axis=1)[active]
    n = int(dH.size)
    if n < 2:
        raise InsufficientData("no active buckets")
    mean = float(dH.mean())
    se = float(dH.std(ddof=1) / math.sqrt(n))
    z = _zscore(mean, 0.0, se)
    qv_model = ens.config.sigma**2 * _integral_KV2(ens, weight_KH=False)[active]
    denom = float(qv_model.sum())
    qv_ratio = float((dH * dH).sum() / denom) if denom > 0 else (1.0 if not np.any(dH) else math.inf)
    return HypothesisReport(mean, 0.0, se, z, bool(abs(z) < threshold), n,
                            "mean bucketed increment of H (martingale)", threshold,
                            {"qv_ratio": qv_ratio, "bucket_steps": ens.config.record_every})


# ---------------------------------------------------------------- supermartingale

def _drift_fit(dY: np.ndarray, X: np.ndarray, expected: float, threshold: float, what: str,
               extra: dict) -> HypothesisReport:
    """Ratio estimator ``c = ΣΔY / ΣX`` for ``E[ΔY] = c E[X]``.

    ``ΔY - cX`` is a martingale increment, so the residuals are uncorrelated
    and ``Σe² / (ΣX)²`` estimates the variance of ``c``.
    """
    n = int(dY.size)
    sx = float(X.sum())
    if sx == 0.0:
        mean = float(dY.mean())
        se = float(dY.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        z = _zscore(mean, 0.0, se)
        return HypothesisReport(mean, 0.0, se, z, bool(abs(z) < threshold), n,
                                f"{what}: zero curvature weight, mean increment vs 0", threshold, extra)
    c = float(dY.sum() / sx)
    e = dY - c * X
    se = float(math.sqrt(float((e * e).sum())) / abs(sx))
    z = _zscore(c, expected, se)
    return HypothesisReport(c, expected, se, z, bool(abs(z) < threshold), n, what, threshold, extra)


def _mean_monotone(Y: np.ndarray, threshold: float) -> tuple[bool, float]:
    """No significant increase of the ensemble mean between consecutive records."""
    d = np.diff(Y, axis=0 if Y.ndim == 1 else 1)
    if Y.ndim == 1:
        return bool(np.all(d <= 0)), float(d.max(initial=-math.inf))
    mean = d.mean(axis=0)
    se = d.std(axis=0, ddof=1) / math.sqrt(Y.shape[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        zs = np.where(se > 0, mean / se, np.where(mean > 0, math.inf, 0.0))
    return bool(np.all(zs < threshold)), float(zs.max(initial=-math.inf))


def supermartingale_test(ens: EnsembleStats, threshold: float = Z_THRESHOLD) -> HypothesisReport:
    """Fit ``E[ΔV] = c ∫V² dt`` and compare ``c`` with ``-σ² K_H``.

    When ``K_H`` varies over the visited range the weight becomes
    ``∫K_H V² dt`` and the expected coefficient is ``-σ²``.
    """
    active, _ = _buckets(ens)
    V = ens.V_records()
    dV = np.diff(V, axis=1)[active]
    grid, kh = _kh_table(ens)
    seen = np.interp(ens.records[:, 0], grid, kh)
    visited = np.interp(np.unique(np.round(ens.records, 3)), grid, kh)
    constant = bool(np.ptp(visited) <= 1e-6 * max(1.0, float(np.max(np.abs(visited)))))
    s2 = ens.config.sigma**2
    if constant:
        K = float(seen[0])
        X = _integral_KV2(ens, weight_KH=False)[active]
        expected = -s2 * K
        what = f"V drift coefficient vs -sigma^2 K_H (K_H = {K + 0.0:.10g})"
    else:
        X = _integral_KV2(ens, weight_KH=True)[active]
        expected = -s2
        what = "V drift coefficient per unit of integral K_H V^2 dt vs -sigma^2"
    mono, worst = _mean_monotone(V, threshold)
    decay = float(ens.mean_V[-1] / ens.mean_V[0]) if ens.mean_V[0] > 0 else 0.0
    rep = _drift_fit(dV, X, expected, threshold, what,
                     {"mean_V_monotone": mono, "max_increase_z": worst, "final_to_initial_mean_V": decay,
                      "K_H_constant": constant})
    return HypothesisReport(rep.statistic, rep.expected, rep.standard_error, rep.z_score,
                            rep.passed and mono, rep.n_samples, rep.description, threshold, rep.extra)


# ---------------------------------------------------------------- spin reduction

def _axis_weight(angles: tuple, axis: int) -> float:
    th, ph = float(angles[0]), float(angles[1])
    n = (math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th))
    return n[axis - 1] ** 2


def spin_dispersion_records(ens: EnsembleStats, axis: int) -> np.ndarray:
    """``V_i`` along the recorded paths.

    The polar angles are constant along a path, so
    ``V_i = -H (1 - n_i²) + V n_i²`` with ``n`` the unit vector of ``(θ, φ)``.
    """
    if ens.config.metric.family is not Family.RADIAL_UN:
        raise ValidationError("spin axes are defined on the radial family")
    if axis not in (1, 2, 3):
        raise ValidationError("axis must be 1, 2 or 3")
    w = _axis_weight(ens.prep.angles, axis)
    return -ens.H_records() * (1.0 - w) + ens.V_records() * w


def spin_reduction_test(ens: EnsembleStats, axis: int = 3, threshold: float = Z_THRESHOLD) -> HypothesisReport:
    """Is ``E[ΔV_i]`` non-positive, and does its drift match ``-σ² n_i² K_H V²``?

    ``passed`` means reduction is observed: the mean of ``V_i`` never
    increases significantly and the fitted drift agrees with the Itô formula.
    """
    active, _ = _buckets(ens)
    Vi = spin_dispersion_records(ens, axis)
    dVi = np.diff(Vi, axis=1)[active]
    w = _axis_weight(ens.prep.angles, axis)
    X = w * _integral_KV2(ens, weight_KH=True)[active]
    mono, worst = _mean_monotone(Vi, threshold)
    mean_inc = float(dVi.mean())
    se_inc = float(dVi.std(ddof=1) / math.sqrt(dVi.size)) if dVi.size > 1 else 0.0
    rep = _drift_fit(dVi, X, -ens.config.sigma**2, threshold,
                     f"V_{axis} drift per unit of n_i^2 * integral K_H V^2 dt vs -sigma^2",
                     {"mean_V_i_monotone": mono, "max_increase_z": worst, "axis_weight": w,
                      "mean_increment": mean_inc, "mean_increment_se": se_inc})
    return HypothesisReport(rep.statistic, rep.expected, rep.standard_error, rep.z_score,
                            rep.passed and mono and _zscore(mean_inc, 0.0, se_inc) < threshold,
                            rep.n_samples, rep.description, threshold, rep.extra)


# ---------------------------------------------------------------- hitting probabilities

def _start_x(metric: ProfileMetric, chi0) -> float:
    if isinstance(chi0, ChartPoint):
        return profile_variable(metric, chi0)
    return profile_variable(metric, ChartPoint(Chart.CHI, (float(chi0),)))


def _H_end(metric: ProfileMetric, end: float) -> float:
    """Limit of the energy at a domain end (``-inf`` where it diverges)."""
    fam = metric.family
    if math.isfinite(end):
        return float(hamiltonian_x(metric, end))
    if fam is Family.POTENTIAL_UN:
        ec = classify_end(metric, end)
        return -0.5 * ec.radius**2 if ec.kind is EndKind.BOLT else -math.inf
    if fam is Family.RADIAL_UN:
        return -math.inf
    # one-dimensional: H decreases by the integral of S
    ref = metric.chi_ref
    S = lambda t: float(metric.profile(t))  # noqa: E731
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if _tail_diverges(S, ref):
            return -math.inf
    tail, _ = integrate.quad(lambda t: float(metric.profile(t)), ref, math.inf, limit=400)
    return float(hamiltonian_x(metric, ref)) - tail


def hitting_probabilities(metric: ProfileMetric, chi0) -> dict:
    """``π+`` (upper end) and ``π-`` from the boundary values of ``H``."""
    x0 = _start_x(metric, chi0)
    H0 = float(hamiltonian_x(metric, x0))
    H_lo, H_hi = _H_end(metric, metric.lo), _H_end(metric, metric.hi)
    compact = math.isfinite(H_lo) and math.isfinite(H_hi)
    if not compact:
        pi_plus = 0.0 if math.isinf(H_hi) else 1.0
    else:
        pi_plus = (H0 - H_lo) / (H_hi - H_lo)
    return {"pi_plus": pi_plus, "pi_minus": 1.0 - pi_plus, "compact": compact,
            "H_start": H0, "H_lower": H_lo, "H_upper": H_hi}


def hitting_probability_analytic(metric: ProfileMetric, chi0, require_compact: bool = False) -> float:
    """``π+ = (H(χ0) - H(-∞)) / (H(∞) - H(-∞))``.

    With one end where ``H`` diverges the lower end is hit almost surely and
    0 is returned, unless ``require_compact`` asks for ``NotCompact``.
    """
    res = hitting_probabilities(metric, chi0)
    if require_compact and not res["compact"]:
        raise NotCompact("one end has an infinite energy limit; pi_minus = 1")
    return res["pi_plus"]


def _dispersion_per_rate(metric: ProfileMetric):
    return lambda x: float(dispersion_x(metric, x)) / float(rate(metric, x))


def _tail_diverges(f, x0: float) -> bool:
    """Whether ``∫_{x0}^∞ f`` diverges, judged by its contributions over successive decades.

    A convergent tail must lose at least three orders of magnitude between the
    first decade and the sixth one (any integrand decaying like ``x^-1.6`` or
    faster does); a ``1/x`` or slower tail keeps contributing and is divergent.
    """
    scale = max(1.0, abs(x0))
    edges = [x0] + [x0 + scale * 10.0**k for k in range(2, 9)]
    pieces = [abs(integrate.quad(f, a, b, limit=200)[0]) for a, b in zip(edges[1:], edges[2:])]
    first, last = pieces[0], pieces[-1]
    if not all(math.isfinite(p) for p in pieces):
        return True
    return last > 1e-3 * first and last > 1e-300


def _quad_checked(f, a: float, b: float) -> float:
    val, err = integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-12, limit=500)
    if not math.isfinite(val) or err > 1e-9 * max(1.0, abs(val)):
        raise QuadratureFailure(f"quadrature on [{a}, {b}] did not converge (err {err:.3g})")
    return val


def hitting_probability_oracle(metric: ProfileMetric, chi0, require_compact: bool = False) -> float:
    """``∫_{-∞}^{χ0} V dχ / ∫ V dχ`` by adaptive quadrature in the profile variable."""
    x0 = _start_x(metric, chi0)
    f = _dispersion_per_rate(metric)
    lo, hi = metric.lo, metric.hi
    below = _quad_checked(f, lo, x0)
    if not math.isfinite(hi):
        # the integrand is -dH/dx
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            diverges = _tail_diverges(f, x0)
        if not diverges:
            with warnings.catch_warnings():
                warnings.simplefilter("error", integrate.IntegrationWarning)
                try:
                    above = _quad_checked(f, x0, math.inf)
                except (QuadratureFailure, integrate.IntegrationWarning):
                    diverges = True
        if diverges:
            if require_compact:
                raise NotCompact("the dispersion integral diverges at the infinite end")
            return 0.0
    else:
        above = _quad_checked(f, x0, hi)
    return below / (below + above)


def hitting_test(ens: EnsembleStats, threshold: float = Z_THRESHOLD) -> HypothesisReport:
    """Monte Carlo upper-end fraction against the analytic ``π+``."""
    cfg = ens.config
    pi = hitting_probability_analytic(cfg.metric, cfg.start)
    p_hat, _ = ens.fraction(1)
    n = ens.n_paths
    se = math.sqrt(max(pi * (1.0 - pi), 0.0) / n)
    z = _zscore(p_hat, pi, se)
    unabsorbed = int(np.sum(ens.status == 0))
    return HypothesisReport(p_hat, pi, se, z, bool(abs(z) < threshold) and unabsorbed == 0, n,
                            "upper-end absorption fraction vs analytic pi_plus", threshold,
                            {"unabsorbed": unabsorbed})


# ---------------------------------------------------------------- Lüders

@dataclass(frozen=True)
class LuedersReport:
    ratio_residual: float
    ratio_confined: bool
    split: HypothesisReport
    born_weight: float | None
    born: HypothesisReport | None

    @property
    def passed(self) -> bool:
        return self.ratio_confined and self.split.passed and (self.born is None or self.born.passed)

    def as_dict(self) -> dict:
        return {"ratio_residual": self.ratio_residual, "ratio_confined": self.ratio_confined,
                "split": self.split.as_dict(), "born_weight": self.born_weight,
                "born": None if self.born is None else self.born.as_dict(), "pass": self.passed}


def _born_weight(metric: ProfileMetric, u0: float) -> float | None:
    """Weight of the bolt eigenspace for the Fubini-Study potential, else None."""
    if metric.name != "fubini_study_potential":
        return None
    return u0 / (1.0 + u0)


def lueders_check(metric: ProfileMetric, z0, config: SimConfig, threshold: float = Z_THRESHOLD) -> LuedersReport:
    """Ray confinement, nut/bolt split and Born weights for the complex equation.

    ``z0`` may be a complex vector or a boundary ChartPoint on the bolt.
    """
    if metric.family is not Family.POTENTIAL_UN:
        raise ValidationError("the Lüders check needs a potential metric")
    cfg = SimConfig(**{**config.__dict__, "metric": metric})
    n = cfg.n_trajectories
    if isinstance(z0, ChartPoint):
        ens = run_ensemble(SimConfig(**{**cfg.__dict__, "start": z0}))
        p_hat, _ = ens.fraction(1)
        pi = 1.0 if ens.prep.initial_status == 1 else hitting_probability_analytic(metric, z0)
        rep = HypothesisReport(p_hat, pi, 0.0, _zscore(p_hat, pi, 0.0), p_hat == pi, n,
                               "bolt fraction from a boundary start", threshold)
        return LuedersReport(0.0, True, rep, None, None)
    z0 = np.asarray(z0, dtype=complex)
    res = run_full_ensemble(cfg, z0)
    u0 = float(np.vdot(z0, z0).real)
    pi = hitting_probability_analytic(metric, ChartPoint(Chart.COMPLEX, tuple(z0)))
    p_hat, _ = res.fraction(1)
    se = math.sqrt(max(pi * (1.0 - pi), 0.0) / n)
    unabsorbed = int(np.sum(res.status == 0))
    split = HypothesisReport(p_hat, pi, se, _zscore(p_hat, pi, se),
                             bool(abs(_zscore(p_hat, pi, se)) < threshold) and unabsorbed == 0, n,
                             "bolt fraction vs analytic pi_plus", threshold, {"unabsorbed": unabsorbed})
    born_w = _born_weight(metric, u0)
    born = None
    if born_w is not None:
        se_b = math.sqrt(max(born_w * (1.0 - born_w), 0.0) / n)
        zb = _zscore(p_hat, born_w, se_b)
        born = HypothesisReport(p_hat, born_w, se_b, zb, bool(abs(zb) < threshold), n,
                                "bolt fraction vs Born weight |z|^2 / (1 + |z|^2)", threshold)
    return LuedersReport(res.ratio_residual, res.ratio_residual <= RATIO_TOL, split, born_w, born)
