"""Euler-Maruyama integration of the reduced χ process and of the full
complex-coordinate equation, with absorption at the ends."""
from __future__ import annotations

import cmath
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .curvature import default_grid
from .errors import BadParams, NonConvergence, ValidationError, ZeroDispersion
from .geometry import (
    Chart,
    ChartPoint,
    Family,
    ProfileMetric,
    chart_convert,
    dispersion_x,
    profile_variable,
    x_of_chi,
)
from .rng import IncrementSource, check_seed
from .tables import ReducedTable, build_table, drift_slope, level_crossing, slope_and_derivative
from .topology import EndKind, classify_end

log = logging.getLogger(__name__)

CHUNK_PATHS = 512
DEFAULT_BOUND_SPAN = 40.0
DEFAULT_TOL_FACTOR = 1e-10
STIFFNESS_WARN = 0.01


@dataclass(frozen=True)
class SimConfig:
    metric: ProfileMetric
    sigma: float
    dt: float
    max_steps: int
    start: ChartPoint
    seed: int = 0
    n_trajectories: int = 1
    absorb_V_tol: float | None = None
    chi_bounds: tuple[float, float] | None = None
    record_every: int = 50
    block: int = 1000
    keep_paths: bool = True
    threads: int = 1
    backend: str | None = None

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma >= 0.0):
            raise BadParams("sigma must be a finite number >= 0")
        if not self.dt > 0.0:
            raise BadParams("dt must be positive")
        if self.max_steps < 1 or self.n_trajectories < 1 or self.threads < 1:
            raise BadParams("max_steps, n_trajectories and threads must be >= 1")
        if self.record_every < 1 or self.block < self.record_every or self.block % self.record_every:
            raise BadParams("block must be a positive multiple of record_every")
        if self.absorb_V_tol is not None and not self.absorb_V_tol > 0.0:
            raise BadParams("absorb_V_tol must be positive")
        if self.chi_bounds is not None and not self.chi_bounds[0] < self.chi_bounds[1]:
            raise BadParams("chi_bounds must be increasing")
        check_seed(self.seed)
        if self.dt * self.sigma**2 > STIFFNESS_WARN:
            warnings.warn(f"dt*sigma^2 = {self.dt * self.sigma**2:.3g} > {STIFFNESS_WARN}; "
                          "Euler-Maruyama bias may be visible", stacklevel=2)

    def summary(self) -> dict:
        return {"metric": self.metric.name, "params": dict(self.metric.params), "sigma": self.sigma,
                "dt": self.dt, "max_steps": self.max_steps, "seed": self.seed,
                "n_trajectories": self.n_trajectories, "record_every": self.record_every}


# ---------------------------------------------------------------- single steps

def drift_chi(metric: ProfileMetric, chi: float, sigma: float) -> float:
    """``-(σ²/2) d log V / dχ`` at ``chi``."""
    x = x_of_chi(metric, chi)
    return -0.5 * sigma * sigma * drift_slope(metric, x)


def step_chi(metric: ProfileMetric, state: tuple, dt: float, dW: float, sigma: float) -> tuple:
    """One Euler-Maruyama step of ``(χ, φ)``; the phase advances by ``2 dt``."""
    chi, phi = float(state[0]), float(state[1])
    return chi + drift_chi(metric, chi, sigma) * dt + sigma * dW, phi + 2.0 * dt


def _potential_slope(metric: ProfileMetric, u: float) -> float:
    if metric.family is not Family.POTENTIAL_UN:
        raise ValidationError("the complex-coordinate equation needs a potential metric")
    V = float(dispersion_x(metric, u))
    if not V > 0.0:
        raise ZeroDispersion(f"V = {V} at u = {u}")
    return float(slope_and_derivative(metric, u)[0])


def step_full(metric: ProfileMetric, z, dt: float, dW: float, sigma: float,
              scheme: str = "log") -> np.ndarray:
    """One step of ``dz = z[(2i + (σ²/2)(1 - L)) dt + σ dW]`` with ``L = 2u V'/V``.

    ``scheme="log"`` multiplies by ``exp(-(σ²/2) L dt + σ dW + 2i dt)``, which
    is the same Itô process and makes ``χ = ½ log u`` follow the reduced
    Euler step exactly.  ``scheme="euler"`` is the literal linear update.
    Both multiply every component by one common complex number.
    """
    z = np.asarray(z, dtype=complex)
    u = float(np.vdot(z, z).real)
    profile_variable(metric, u)
    L = _potential_slope(metric, u)
    if scheme == "log":
        factor = cmath.exp(complex(-0.5 * sigma * sigma * L * dt + sigma * dW, 2.0 * dt))
    elif scheme == "euler":
        factor = 1.0 + complex(0.5 * sigma * sigma * (1.0 - L), 2.0) * dt + sigma * dW
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    out = z * factor
    if not np.all(np.isfinite(out)):
        raise OverflowError("state left the representable range")
    return out


# ---------------------------------------------------------------- run preparation

@dataclass(frozen=True)
class PreparedRun:
    table: ReducedTable
    chi0: float
    angles: tuple
    lo: float
    hi: float
    tol: float
    labels: dict
    initial_status: int


def _start_chi(metric: ProfileMetric, start) -> tuple[float, tuple, int]:
    """``(χ0, angles, status)``; status is ±1 when the start is an end point."""
    if not isinstance(start, ChartPoint):
        start = ChartPoint(Chart.CHI, (float(start),))
    q = chart_convert(metric, start, Chart.CHI, allow_boundary=True)
    chi0 = float(q.coords[0])
    status = 0
    if q.at_boundary:
        status = -1 if chi0 < 0 else 1
    return chi0, tuple(q.coords[1:]), status


def max_dispersion(metric: ProfileMetric) -> float:
    return float(np.max(dispersion_x(metric, default_grid(metric))))


def prepare(config: SimConfig) -> PreparedRun:
    metric = config.metric
    chi0, angles, status = _start_chi(metric, config.start)
    tol = config.absorb_V_tol if config.absorb_V_tol is not None else DEFAULT_TOL_FACTOR * max_dispersion(metric)
    if status:
        chi0 = 0.0
    b_lo, b_hi = config.chi_bounds or (chi0 - DEFAULT_BOUND_SPAN, chi0 + DEFAULT_BOUND_SPAN)
    if not b_lo < chi0 < b_hi and not status:
        raise BadParams("start lies outside chi_bounds")
    table = build_table(metric, b_lo, b_hi, chi0)
    labels = {}
    bounds = []
    for side, b, end in ((-1, b_lo, metric.lo), (1, b_hi, metric.hi)):
        c = level_crossing(table, chi0, tol, side)
        ec = classify_end(metric, end)
        if c is not None and side * (c - b) < 0:
            while float(table.dispersion(c)) > tol:
                c += side * 1e-12 * max(1.0, abs(c))
            bounds.append(c)
            labels[side] = ec.label()
        else:
            bounds.append(b)
            labels[side] = ec.label() if ec.kind is EndKind.INFINITE else "chi_bound"
    lo, hi = bounds
    if not status and float(table.dispersion(chi0)) <= tol:
        status = -1 if abs(chi0 - lo) <= abs(hi - chi0) else 1
    if status:
        chi0 = lo if status < 0 else hi
    return PreparedRun(table, chi0, angles, lo, hi, tol, labels, status)


def _end_names(prep: PreparedRun) -> dict:
    return {-1: f"lower:{prep.labels[-1]}", 1: f"upper:{prep.labels[1]}", 0: "unabsorbed"}


# ---------------------------------------------------------------- path chunks

@dataclass
class _ChunkResult:
    chi: np.ndarray
    status: np.ndarray
    exit_step: np.ndarray
    records: np.ndarray


def _simulate_chunk(config: SimConfig, prep: PreparedRun, first: int, count: int, backend) -> _ChunkResult:
    re_ = config.record_every
    n_rec = config.max_steps // re_
    chi = np.full(count, prep.chi0)
    status = np.full(count, prep.initial_status, dtype=np.int8)
    exit_step = np.where(status != 0, 0, -1).astype(np.int64)
    records = np.empty((count, n_rec + 1))
    records[:, 0] = chi
    src = IncrementSource(config.seed, first, count, config.dt)
    t = prep.table
    c_drift = -0.5 * config.sigma * config.sigma
    done = 0
    while done < config.max_steps and np.any(status == 0):
        width = min(config.block, config.max_steps - done)
        incr = src.block(width, active=status == 0)
        rec = np.empty((count, width // re_))
        backend.advance(chi, status, exit_step, incr, width, done, t.a, t.h, t.L, t.L_hd,
                        c_drift, config.sigma, config.dt, prep.lo, prep.hi, rec, re_)
        r0 = done // re_
        records[:, 1 + r0: 1 + r0 + rec.shape[1]] = rec
        done += width
    filled = done // re_
    if filled < n_rec:
        records[:, 1 + filled:] = chi[:, None]
    return _ChunkResult(chi, status, exit_step, records)


# ---------------------------------------------------------------- results

@dataclass
class Trajectory:
    times: np.ndarray
    chi: np.ndarray
    states: list
    H_series: np.ndarray
    V_series: np.ndarray
    absorbed_at: tuple | None
    seed_used: int
    flag: str | None = None

    def to_rows(self) -> list[dict]:
        rows = []
        for t, c, s, H, V in zip(self.times, self.chi, self.states, self.H_series, self.V_series):
            row = {"t": t, "chi": c}
            angles = s.coords[1:]
            if angles and not isinstance(angles[-1], complex):
                row["phi"] = angles[-1]
            row.update(H=H, V=V)
            rows.append(row)
        return rows


@dataclass
class EnsembleStats:
    config: SimConfig
    prep: PreparedRun
    times: np.ndarray
    mean_H: np.ndarray
    mean_V: np.ndarray
    se_H: np.ndarray
    se_V: np.ndarray
    status: np.ndarray
    exit_step: np.ndarray
    terminal_chi: np.ndarray
    records: np.ndarray | None
    backend: str
    endpoint_counts: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return int(self.status.size)

    def fraction(self, side: int) -> tuple[float, float]:
        """Fraction absorbed at ``side`` (-1 lower, +1 upper) and its binomial SE."""
        p = float(np.mean(self.status == side))
        return p, math.sqrt(max(p * (1.0 - p), 0.0) / self.n_paths)

    def H_records(self) -> np.ndarray:
        self._need_records()
        return self.prep.table.hamiltonian(self.records)

    def V_records(self) -> np.ndarray:
        self._need_records()
        return self.prep.table.dispersion(self.records)

    def _need_records(self):
        if self.records is None:
            from .errors import InsufficientData
            raise InsufficientData("path records were not kept (keep_paths=False)")

    def summary(self) -> dict:
        return {
            "config": self.config.summary(),
            "absorption_bounds": [self.prep.lo, self.prep.hi],
            "absorb_V_tol": self.prep.tol,
            "endpoints": self.endpoint_counts,
            "times": self.times.tolist(),
            "mean_H": self.mean_H.tolist(),
            "mean_V": self.mean_V.tolist(),
            "se": {"H": self.se_H.tolist(), "V": self.se_V.tolist()},
        }


def _moments(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return values.sum(axis=0), (values * values).sum(axis=0)


def run_ensemble(config: SimConfig) -> EnsembleStats:
    """Simulate ``n_trajectories`` independent reduced paths.

    Paths are split into fixed chunks of 512 that run on ``threads`` workers;
    each path draws from its own stream, and chunk partials are merged in
    chunk order, so results do not depend on the thread count.
    """
    prep = prepare(config)
    backend = kernels.get_backend(config.backend)
    n = config.n_trajectories
    starts = list(range(0, n, CHUNK_PATHS))

    def work(first):
        return _simulate_chunk(config, prep, first, min(CHUNK_PATHS, n - first), backend)

    if config.threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            chunks = list(pool.map(work, starts))
    else:
        chunks = [work(f) for f in starts]

    table = prep.table
    n_cols = config.max_steps // config.record_every + 1
    sH, sH2, sV, sV2 = (np.zeros(n_cols) for _ in range(4))
    for ch in chunks:
        H = table.hamiltonian(ch.records)
        V = table.dispersion(ch.records)
        a, b = _moments(H)
        c, d = _moments(V)
        sH += a
        sH2 += b
        sV += c
        sV2 += d
    mean_H, mean_V = sH / n, sV / n
    denom = max(n - 1, 1)
    se_H = np.sqrt(np.maximum(sH2 - n * mean_H**2, 0.0) / denom / n)
    se_V = np.sqrt(np.maximum(sV2 - n * mean_V**2, 0.0) / denom / n)
    status = np.concatenate([c.status for c in chunks])
    names = _end_names(prep)
    counts = {names[k]: int(np.sum(status == k)) for k in (-1, 1, 0)}
    times = np.arange(n_cols) * config.record_every * config.dt
    return EnsembleStats(
        config=config, prep=prep, times=times, mean_H=mean_H, mean_V=mean_V, se_H=se_H, se_V=se_V,
        status=status, exit_step=np.concatenate([c.exit_step for c in chunks]),
        terminal_chi=np.concatenate([c.chi for c in chunks]),
        records=np.concatenate([c.records for c in chunks]) if config.keep_paths else None,
        backend="cython" if backend is kernels.BACKENDS.get("cython") else "python",
        endpoint_counts=counts,
    )


def _angles_at(metric: ProfileMetric, angles: tuple, t: float) -> tuple:
    """Angular coordinates after time ``t`` of the deterministic phase flow."""
    if metric.family is Family.POTENTIAL_UN:
        rot = cmath.exp(2j * t)
        return tuple(complex(a) * rot for a in angles)
    if not angles:
        return (2.0 * t,)
    return tuple(angles[:-1]) + (float(angles[-1]) + 2.0 * t,)


def run_trajectory(config: SimConfig, strict: bool = False) -> Trajectory:
    """Single path (stream index 0) recorded every ``record_every`` steps.

    A path that survives ``max_steps`` is returned with ``flag =
    "NonConvergence"``; with ``strict=True`` that raises instead.
    """
    single = SimConfig(**{**config.__dict__, "n_trajectories": 1, "threads": 1})
    ens = run_ensemble(single)
    prep, metric = ens.prep, config.metric
    chi_rec = ens.records[0] if ens.records is not None else np.array([prep.chi0, ens.terminal_chi[0]])
    times = ens.times if ens.records is not None else np.array([0.0, config.max_steps * config.dt])
    st = int(ens.status[0])
    absorbed_at = None
    flag = None
    if st != 0:
        t_exit = int(ens.exit_step[0]) * config.dt
        keep = times < t_exit
        times = np.append(times[keep], t_exit)
        chi_rec = np.append(chi_rec[keep], ens.terminal_chi[0])
        absorbed_at = (t_exit, _end_names(prep)[st])
    else:
        flag = "NonConvergence"
        msg = f"no absorption within {config.max_steps} steps"
        if strict:
            raise NonConvergence(msg)
        log.warning(msg)
    states = [ChartPoint(Chart.CHI, (float(c), *_angles_at(metric, prep.angles, float(t))))
              for t, c in zip(times, chi_rec)]
    return Trajectory(times=times, chi=chi_rec, states=states,
                      H_series=prep.table.hamiltonian(chi_rec), V_series=prep.table.dispersion(chi_rec),
                      absorbed_at=absorbed_at, seed_used=config.seed, flag=flag)


# ---------------------------------------------------------------- full complex ensemble

@dataclass
class FullEnsembleResult:
    status: np.ndarray
    exit_step: np.ndarray
    terminal_z: np.ndarray
    ratio_residual: float
    chi_records: np.ndarray | None
    prep: PreparedRun

    def fraction(self, side: int) -> tuple[float, float]:
        p = float(np.mean(self.status == side))
        return p, math.sqrt(max(p * (1.0 - p), 0.0) / self.status.size)


def _ratio_residual(z: np.ndarray, ref: np.ndarray, pivot: int) -> float:
    """Largest relative change of ``z_a / z_pivot`` from its initial value."""
    ratios = z / z[:, pivot:pivot + 1]
    scale = np.maximum(1.0, np.abs(ref))
    return float(np.max(np.abs(ratios - ref) / scale))


def run_full_ensemble(config: SimConfig, z0, scheme: str = "log",
                      record_chi: bool = False) -> FullEnsembleResult:
    """Integrate the complex equation for every path with the increments the
    reduced run of the same config would use.  Absorption uses the same χ
    bounds as the reduced process."""
    metric = config.metric
    if metric.family is not Family.POTENTIAL_UN:
        raise ValidationError("the complex-coordinate equation needs a potential metric")
    z0 = np.asarray(z0, dtype=complex)
    if z0.size != metric.complex_dimension or not np.any(z0):
        raise BadParams("z0 must be a nonzero vector of length N")
    start = ChartPoint(Chart.COMPLEX, tuple(z0))
    prep = prepare(SimConfig(**{**config.__dict__, "start": start}))
    n = config.n_trajectories
    pivot = int(np.argmax(np.abs(z0)))
    ref = z0 / z0[pivot]
    sig, dt = config.sigma, config.dt
    c_drift = -0.5 * sig * sig
    t = prep.table
    status = np.full(n, prep.initial_status, dtype=np.int8)
    exit_step = np.where(status != 0, 0, -1).astype(np.int64)
    z = np.tile(z0, (n, 1))
    residual = 0.0
    chi_rows = [] if record_chi else None
    for first in range(0, n, CHUNK_PATHS):
        count = min(CHUNK_PATHS, n - first)
        sl = slice(first, first + count)
        src = IncrementSource(config.seed, first, count, dt)
        zc, st, ex = z[sl], status[sl], exit_step[sl]
        rec = [] if record_chi else None
        done = 0
        while done < config.max_steps and np.any(st == 0):
            width = min(config.block, config.max_steps - done)
            incr = src.block(width, active=st == 0)
            for k in range(width):
                idx = np.nonzero(st == 0)[0]
                if idx.size == 0:
                    break
                zi = zc[idx]
                u = np.einsum("ij,ij->i", zi.real, zi.real) + np.einsum("ij,ij->i", zi.imag, zi.imag)
                chi = 0.5 * np.log(u)
                if scheme == "log":
                    L = kernels.hermite_eval(chi, t.a, t.h, t.L, t.L_hd)
                    fac = np.exp((c_drift * L * dt + sig * incr[idx, k]) + 2j * dt)
                else:
                    L = kernels.hermite_eval(chi, t.a, t.h, t.L, t.L_hd)
                    fac = 1.0 + (0.5 * sig * sig * (1.0 - L) + 2j) * dt + sig * incr[idx, k]
                zi = zi * fac[:, None]
                zc[idx] = zi
                u = np.einsum("ij,ij->i", zi.real, zi.real) + np.einsum("ij,ij->i", zi.imag, zi.imag)
                chi = 0.5 * np.log(u)
                st[idx[chi <= prep.lo]] = -1
                st[idx[chi >= prep.hi]] = 1
                ex[idx[(chi <= prep.lo) | (chi >= prep.hi)]] = done + k + 1
                if rec is not None and (done + k + 1) % config.record_every == 0:
                    uu = np.sum(np.abs(zc) ** 2, axis=1)
                    rec.append(0.5 * np.log(uu))
            done += width
            residual = max(residual, _ratio_residual(zc, ref, pivot))
        if rec is not None:
            chi_rows.append(np.array(rec).T if rec else np.empty((count, 0)))
    return FullEnsembleResult(status=status, exit_step=exit_step, terminal_z=z, ratio_residual=residual,
                              chi_records=np.concatenate(chi_rows) if record_chi else None, prep=prep)
