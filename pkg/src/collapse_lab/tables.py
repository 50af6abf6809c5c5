"""Uniform-χ lookup tables for the reduced process.

The kernel needs ``L = d log V / dχ`` at arbitrary χ; recording needs the
profile variable, ``V`` and ``H``.  All four are tabulated with their
χ-derivatives and read back with cubic Hermite interpolation.  Useful facts:
``dV/dχ = V L`` and ``dH/dχ = -V`` in every family.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import ZeroDispersion
from .geometry import Family, ProfileMetric, dispersion_x, hamiltonian_x, rate
from .kernels import hermite_eval

TABLE_STEP = 2e-3
ODE_RTOL = 1e-12


def slope_and_derivative(metric: ProfileMetric, x):
    """``L(x)`` and ``dL/dχ`` from closed forms that avoid dividing by ``V``."""
    p, fam = metric.profile, metric.family
    x = np.asarray(x, dtype=float)
    if fam is Family.ONE_DIM:
        S, S1, S2 = p(x, 0), p(x, 1), p(x, 2)
        return 2.0 * S1, 2.0 * S2 * S
    if fam is Family.RADIAL_UN:
        F, F1, F2 = p(x, 0), p(x, 1), p(x, 2)
        return F + 0.5 * x * F1, 0.5 * x * F * (1.5 * F1 + 0.5 * x * F2)
    s1, s2, s3, s4 = (p(x, k) for k in (1, 2, 3, 4))
    P = s1 + x * s2
    Pu = 2.0 * s2 + x * s3
    Puu = 3.0 * s3 + x * s4
    L = 2.0 + 2.0 * x * Pu / P
    dLdu = 2.0 * ((Pu + x * Puu) * P - x * Pu * Pu) / (P * P)
    return L, 2.0 * x * dLdu


def drift_slope(metric: ProfileMetric, x) -> float:
    V = float(dispersion_x(metric, x))
    if not V > 0.0:
        raise ZeroDispersion(f"V = {V} at {x}")
    return float(slope_and_derivative(metric, x)[0])


SWITCH_DISTANCE = 1e-7


def _rate_taylor(metric: ProfileMetric, x: float) -> tuple[float, float]:
    """First and second x-derivatives of ``g`` at ``x``."""
    p = metric.profile
    if metric.family is Family.ONE_DIM:
        return float(p(x, 1)), float(p(x, 2))
    F, F1, F2 = float(p(x, 0)), float(p(x, 1)), float(p(x, 2))
    return 0.5 * (F + x * F1), F1 + 0.5 * x * F2


def _distance_profile(metric: ProfileMetric, end: float, side: int, chi0: float, y0: float,
                      targets: np.ndarray) -> np.ndarray:
    """Distance ``d`` to a finite end for χ values beyond the integration range.

    ``x = end + side*d``; near the end ``dd/dχ = αd - βd²`` (Taylor expansion
    of ``g``), solved in closed form.
    """
    g1, g2 = _rate_taylor(metric, end)
    alpha = g1
    beta = -0.5 * g2 * side
    d0 = math.exp(y0)
    with np.errstate(over="ignore"):
        return alpha / (beta + (alpha / d0 - beta) * np.exp(-alpha * (targets - chi0)))


def x_on_grid(metric: ProfileMetric, chis: np.ndarray) -> np.ndarray:
    """Profile variable at increasing χ values by integrating ``dx/dχ = g``.

    Distances to finite ends are integrated in log form, so points
    exponentially close to a nut or bolt keep full relative accuracy.  Where
    the end is not at zero the last stretch (distance below 1e-7) uses the
    local closed-form solution, because ``end ± d`` itself is rounded there.
    """
    chis = np.asarray(chis, dtype=float)
    if metric.family is Family.POTENTIAL_UN:
        return np.exp(2.0 * chis)
    lo, hi, ref = metric.lo, metric.hi, metric.chi_ref
    out = np.empty_like(chis)
    neg = chis < 0.0
    g = lambda x: float(rate(metric, x))  # noqa: E731

    def solve(end, side, targets):
        # y = log d with x = end + side*d; end = None means the plain log(x - lo) variable
        base = lo if end is None else end
        rhs = lambda c, y: [side * g(base + side * math.exp(y[0])) * math.exp(-y[0])]  # noqa: E731
        y0 = math.log(abs(ref - base))
        if targets.size == 0:
            return targets
        event = None
        if end is not None and end != 0.0:
            floor_ = math.log(SWITCH_DISTANCE * max(1.0, abs(end)))
            event = lambda c, y: y[0] - floor_  # noqa: E731
            event.terminal = True
        sol = integrate.solve_ivp(rhs, (0.0, float(targets[-1])), [y0], method="DOP853",
                                  rtol=ODE_RTOL, atol=1e-14, t_eval=targets, events=event)
        d = np.empty(targets.size)
        k = sol.y.shape[1]
        d[:k] = np.exp(sol.y[0])
        if k < targets.size:
            chi_c, y_c = float(sol.t_events[0][0]), float(sol.y_events[0][0][0])
            d[k:] = _distance_profile(metric, end, side, chi_c, y_c, targets[k:])
        return base + side * d

    if neg.any():
        out[neg] = solve(lo, 1, chis[neg][::-1])[::-1]
    pos = ~neg
    if pos.any():
        out[pos] = solve(hi, -1, chis[pos]) if math.isfinite(hi) else solve(None, 1, chis[pos])
    return out


@dataclass(frozen=True)
class ReducedTable:
    """Hermite tables on ``chi = a + h*j``; ``*_hd`` arrays hold ``h * d/dχ``."""

    a: float
    h: float
    x: np.ndarray
    x_hd: np.ndarray
    L: np.ndarray
    L_hd: np.ndarray
    V: np.ndarray
    V_hd: np.ndarray
    H: np.ndarray
    H_hd: np.ndarray

    @property
    def chi(self) -> np.ndarray:
        return self.a + self.h * np.arange(self.L.size)

    def slope(self, chi):
        return hermite_eval(chi, self.a, self.h, self.L, self.L_hd)

    def profile_variable(self, chi):
        return hermite_eval(chi, self.a, self.h, self.x, self.x_hd)

    def dispersion(self, chi):
        return hermite_eval(chi, self.a, self.h, self.V, self.V_hd)

    def hamiltonian(self, chi):
        return hermite_eval(chi, self.a, self.h, self.H, self.H_hd)


def _fill_invalid(arr: np.ndarray, ok: np.ndarray, start: int) -> np.ndarray:
    """Replace entries outside the valid run around ``start`` by the nearest valid value."""
    arr = arr.copy()
    bad_left = np.nonzero(~ok[:start + 1])[0]
    if bad_left.size:
        k = bad_left[-1]
        arr[: k + 1] = arr[k + 1]
    bad_right = np.nonzero(~ok[start:])[0]
    if bad_right.size:
        k = start + bad_right[0]
        arr[k:] = arr[k - 1]
    return arr


def build_table(metric: ProfileMetric, chi_lo: float, chi_hi: float, chi_start: float,
                step: float = TABLE_STEP) -> ReducedTable:
    """Tabulate on a grid covering ``[chi_lo, chi_hi]`` that contains ``chi_start`` exactly."""
    n_lo = int(math.ceil((chi_start - chi_lo) / step)) + 2
    n_hi = int(math.ceil((chi_hi - chi_start) / step)) + 2
    a = chi_start - n_lo * step
    chis = a + step * np.arange(n_lo + n_hi + 1)
    with np.errstate(all="ignore"):
        x = x_on_grid(metric, chis)
        g = rate(metric, x)
        L, dL = slope_and_derivative(metric, x)
        V = dispersion_x(metric, x)
        H = hamiltonian_x(metric, x)
    ok = np.isfinite(L) & np.isfinite(dL) & np.isfinite(V) & np.isfinite(x) & (V > 0.0)
    fix = lambda arr: _fill_invalid(np.asarray(arr, dtype=float), ok, n_lo)  # noqa: E731
    x, g, L, dL, V, H = (fix(v) for v in (x, g, L, dL, V, H))
    return ReducedTable(a=a, h=step, x=x, x_hd=step * g, L=L, L_hd=step * dL,
                        V=V, V_hd=step * V * L, H=H, H_hd=-step * V)


def level_crossing(table: ReducedTable, chi_start: float, level: float, direction: int) -> float | None:
    """First χ beyond ``chi_start`` (going ``direction``) where the tabulated V drops to ``level``."""
    j0 = int(round((chi_start - table.a) / table.h))
    V = table.V
    idx = np.arange(j0, -1, -1) if direction < 0 else np.arange(j0, V.size)
    hits = np.nonzero(V[idx] <= level)[0]
    if hits.size == 0:
        return None
    j = int(idx[hits[0]])
    j_prev = j + 1 if direction < 0 else j - 1
    c0, c1 = table.a + table.h * min(j, j_prev), table.a + table.h * max(j, j_prev)
    f = lambda c: float(table.dispersion(c)) - level  # noqa: E731
    if f(c0) * f(c1) > 0.0:
        return table.a + table.h * j
    return optimize.brentq(f, c0, c1, xtol=1e-13)
