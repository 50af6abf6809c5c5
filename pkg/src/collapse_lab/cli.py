"""Command-line front end.

Subcommands: classify, curvature, simulate, hitprob, lueders, brackets, catalog.
JSON reports go to stdout; CSV series go to stdout (curvature) or to ``--csv``.
Exit codes: 0 success, 1 validation or usage error, 2 numerical failure,
3 failed statistical test under ``--strict``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, analysis, catalog, curvature, observables, sde, topology
from .errors import CollapseLabError, IncompleteManifold, NumericalError, ValidationError
from .geometry import Chart, ChartPoint, Family, ProfileMetric
from .rng import IncrementSource

log = logging.getLogger("collapse_lab")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_HYPOTHESIS = 0, 1, 2, 3
GEOMETRY_COMMANDS = ("classify", "curvature", "brackets", "catalog")

DEFAULTS = {
    "sigma": 1.0, "dt": 1e-3, "steps": 20000, "seed": 0, "record_every": 50, "scheme": "log",
    "phi": 0.0, "theta": 1.0, "psi": 0.0, "points": 20, "A": "S1", "B": "S2", "method": "both",
    "threshold": analysis.Z_THRESHOLD,
}
COMMAND_DEFAULTS = {
    "hitprob": {"n": 10000, "steps": 200000},
    "lueders": {"n": 10000, "steps": 200000},
    "simulate": {"n": 1, "steps": 100000},
}
METRIC_KEYS = ("a", "s", "lambda", "N", "scale")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# ---------------------------------------------------------------- parser

def _metric_args(p: argparse.ArgumentParser, n_is_param: bool) -> None:
    g = p.add_argument_group("metric")
    g.add_argument("--catalog", help="catalog entry name")
    g.add_argument("--metric", help="metric JSON, inline or a file path")
    g.add_argument("--a", type=float, help="Eguchi-Hanson scale")
    g.add_argument("--s", type=float, help="Hitchin parameter s")
    g.add_argument("--lambda", dest="lambda_", type=float, help="Berger family parameter")
    g.add_argument("--N", type=int, help="complex dimension")
    g.add_argument("--scale", type=float, help="Fubini-Study scale")
    g.add_argument("--param", action="append", metavar="KEY=VALUE", help="any catalog parameter")
    if n_is_param:
        g.add_argument("--n", type=int, help="Hitchin integer n")


def _point_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("start point")
    g.add_argument("--theta0", type=float, help="one-dimensional polar angle")
    g.add_argument("--chi0", type=float, help="reduced coordinate")
    g.add_argument("--R0", type=float, help="radial coordinate")
    g.add_argument("--z0", help="complex vector, e.g. '1,1j,0'")
    g.add_argument("--theta", type=float, help="orbit angle theta (radial family)")
    g.add_argument("--phi", type=float, help="azimuthal angle")
    g.add_argument("--psi", type=float, help="fibre angle (radial family)")


def _sim_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("simulation")
    g.add_argument("--n", type=int, help="number of paths")
    g.add_argument("--sigma", type=float)
    g.add_argument("--dt", type=float)
    g.add_argument("--steps", type=int, help="maximum number of steps")
    g.add_argument("--seed", type=int)
    g.add_argument("--record-every", dest="record_every", type=int)
    g.add_argument("--absorb-tol", dest="absorb_tol", type=float, help="absolute V absorption level")
    g.add_argument("--chi-bounds", dest="chi_bounds", type=float, nargs=2, metavar=("LO", "HI"))
    g.add_argument("--threads", type=int, help="worker threads (COLLAPSE_LAB_THREADS overrides)")
    g.add_argument("--backend", choices=("cython", "python"))
    g.add_argument("--threshold", type=float, help="|z| pass threshold")
    g.add_argument("--csv", help="write per-path or per-step CSV here")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of option values; explicit flags win")
    p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp from JSON output")
    p.add_argument("--strict", action="store_true", help="exit 3 when a statistical test fails")
    p.add_argument("--force", action="store_true", help="run dynamics on incomplete metrics")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="collapse-lab", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("catalog", help="list catalog entries and parameter schemas")
    p.add_argument("name", nargs="?")
    _common(p)

    p = sub.add_parser("classify", help="ends, case label and principal orbit")
    _metric_args(p, True)
    _common(p)

    p = sub.add_parser("curvature", help="curvature components on a grid (CSV) and positivity verdicts")
    _metric_args(p, True)
    p.add_argument("--points", type=int, help="number of interior grid points")
    p.add_argument("--grid", choices=("uniform", "scan"), default="uniform",
                   help="uniform interior points or the positivity-scan grid")
    p.add_argument("--csv", help="write the CSV here instead of stdout")
    _common(p)

    p = sub.add_parser("simulate", help="single trajectory or ensemble summary")
    _metric_args(p, False)
    _point_args(p)
    _sim_args(p)
    p.add_argument("--full", action="store_true", help="integrate the complex equation (potential family)")
    p.add_argument("--scheme", choices=("log", "euler"))
    p.add_argument("--tests", action="store_true", help="run the martingale and supermartingale tests")
    _common(p)

    p = sub.add_parser("hitprob", help="absorption probabilities: analytic, quadrature and Monte Carlo")
    _metric_args(p, False)
    _point_args(p)
    _sim_args(p)
    _common(p)

    p = sub.add_parser("lueders", help="ray confinement and nut/bolt split of the complex equation")
    _metric_args(p, False)
    _point_args(p)
    _sim_args(p)
    p.add_argument("--scheme", choices=("log", "euler"))
    _common(p)

    p = sub.add_parser("brackets", help="Poisson bracket of two observables at a point")
    _metric_args(p, True)
    _point_args(p)
    p.add_argument("--A", help='observable: H, S1..S3 or {"spin_matrix": [[...]]}')
    p.add_argument("--B")
    p.add_argument("--method", choices=("analytic", "fd", "both"))
    _common(p)
    return parser


# ---------------------------------------------------------------- option merging

def _merge(ns: argparse.Namespace) -> argparse.Namespace:
    """Explicit flags, then the ``--config`` file, then built-in defaults."""
    layers = []
    if getattr(ns, "config", None):
        try:
            layers.append(json.loads(Path(ns.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {ns.config}: {exc}") from None
    layers.append(COMMAND_DEFAULTS.get(ns.command, {}))
    layers.append(DEFAULTS)
    for layer in layers:
        for key, value in layer.items():
            key = key.replace("-", "_")
            key = "lambda_" if key == "lambda" else key
            if hasattr(ns, key) and getattr(ns, key) is None:
                setattr(ns, key, value)
    env = os.environ.get("COLLAPSE_LAB_THREADS")
    if env:
        ns.threads = int(env)
    elif getattr(ns, "threads", 0) is None:
        ns.threads = os.cpu_count() or 1
    return ns


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _metric(ns) -> ProfileMetric:
    if bool(ns.catalog) == bool(ns.metric):
        raise ValidationError("give exactly one of --catalog and --metric")
    if ns.metric:
        text = ns.metric
        if not text.lstrip().startswith("{"):
            text = Path(text).read_text()
        return catalog.load_metric(text)
    params = {}
    for key in METRIC_KEYS:
        value = getattr(ns, "lambda_" if key == "lambda" else key, None)
        if value is not None:
            params[key] = value
    if ns.command in GEOMETRY_COMMANDS and getattr(ns, "n", None) is not None:
        params["n"] = ns.n
    for item in ns.param or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"--param expects KEY=VALUE, got {item!r}")
        params[key.strip()] = _parse_value(value.strip())
    return catalog.instantiate(ns.catalog, params)


def _complex_vector(text: str) -> tuple:
    try:
        return tuple(complex(part.strip().replace(" ", "")) for part in text.split(","))
    except ValueError as exc:
        raise ValidationError(f"cannot parse complex vector {text!r}: {exc}") from None


def _start(metric: ProfileMetric, ns) -> ChartPoint:
    fam = metric.family
    phi = ns.phi
    if fam is Family.ONE_DIM:
        if ns.theta0 is not None:
            return ChartPoint(Chart.THETA, (ns.theta0, phi))
        return ChartPoint(Chart.CHI, (ns.chi0 or 0.0, phi))
    if fam is Family.RADIAL_UN:
        if ns.theta0 is not None or ns.z0 is not None:
            raise ValidationError("radial metrics take --R0 or --chi0 with --theta/--phi/--psi")
        angles = (ns.theta, phi, ns.psi)
        if ns.R0 is not None:
            return ChartPoint(Chart.RADIAL_FRAME, (ns.R0, *angles))
        return ChartPoint(Chart.CHI, (ns.chi0 or 0.0, *angles))
    if ns.z0 is not None:
        return ChartPoint(Chart.COMPLEX, _complex_vector(ns.z0))
    zeta = (1.0 + 0j,) + (0j,) * (metric.complex_dimension - 1)
    return ChartPoint(Chart.CHI, (ns.chi0 or 0.0, *zeta))


def _require_complete(metric: ProfileMetric, ns) -> dict:
    cls = topology.classify_manifold(metric)
    if not cls.complete and not ns.force:
        raise IncompleteManifold(f"{metric.name}: {cls.failed_condition} (use --force to run anyway)")
    return cls.to_json()


def _sim_config(metric: ProfileMetric, ns, start: ChartPoint, keep_paths: bool) -> sde.SimConfig:
    return sde.SimConfig(
        metric=metric, sigma=ns.sigma, dt=ns.dt, max_steps=ns.steps, start=start, seed=ns.seed,
        n_trajectories=max(ns.n, 1), absorb_V_tol=ns.absorb_tol,
        chi_bounds=tuple(ns.chi_bounds) if ns.chi_bounds else None, record_every=ns.record_every,
        block=ns.record_every * max(1, 1000 // ns.record_every), keep_paths=keep_paths,
        threads=ns.threads, backend=ns.backend)


# ---------------------------------------------------------------- output

def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if math.isfinite(obj) else str(obj)
    return obj


def _emit(report: dict, ns, out) -> None:
    doc = {"command": ns.command, "version": __version__, **report}
    if not ns.no_timestamp:
        doc["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    out.write(json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n")


def _write_csv(rows: list[dict], target) -> None:
    if not rows:
        return
    fh = open(target, "w", newline="") if isinstance(target, (str, Path)) else target
    try:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(float(v)) if isinstance(v, (float, np.floating)) else v for k, v in row.items()})
    finally:
        if fh is not target:
            fh.close()


# ---------------------------------------------------------------- commands

def cmd_catalog(ns, out) -> int:
    if ns.name:
        entry = catalog.CATALOG.get(catalog.ALIASES.get(ns.name, ns.name))
        if entry is None:
            raise ValidationError(f"unknown catalog entry {ns.name!r}")
        _emit({"entry": entry.schema_json()}, ns, out)
    else:
        _emit({"entries": catalog.list_entries(), "aliases": catalog.ALIASES}, ns, out)
    return EXIT_OK


def cmd_classify(ns, out) -> int:
    metric = _metric(ns)
    cls = topology.classify_manifold(metric)
    _emit({"metric": metric.name, "params": metric.params, **cls.to_json()}, ns, out)
    return EXIT_OK


def _curvature_grid(metric: ProfileMetric, ns) -> np.ndarray:
    if ns.grid == "scan":
        return curvature.default_grid(metric)
    lo, hi = metric.domain
    top = hi if math.isfinite(hi) else lo + curvature.INFINITE_END_SPAN
    return np.linspace(lo, top, ns.points + 2)[1:-1]


def cmd_curvature(ns, out) -> int:
    metric = _metric(ns)
    grid = _curvature_grid(metric, ns)
    if metric.family is Family.ONE_DIM:
        rows = [{"theta": float(x), "K": curvature.gauss_curvature(metric, float(x))} for x in grid]
    else:
        rows = [curvature.riemann_components(metric, float(x)).as_row() for x in grid]
    verdicts = curvature.positivity_scan(metric).as_dict()
    if ns.csv:
        _write_csv(rows, ns.csv)
        _emit({"metric": metric.name, "params": metric.params, "csv": ns.csv, "verdicts": verdicts}, ns, out)
    else:
        _write_csv(rows, out)
        buf = io.StringIO()
        _emit({"verdicts": verdicts}, ns, buf)
        out.write("".join("# " + line + "\n" for line in buf.getvalue().splitlines()))
    return EXIT_OK


def _full_trajectory(cfg: sde.SimConfig, z0: np.ndarray, scheme: str) -> list[dict]:
    """One complex path (stream 0) recorded every ``record_every`` steps."""
    prep = sde.prepare(sde.SimConfig(**{**cfg.__dict__, "start": ChartPoint(Chart.COMPLEX, tuple(z0))}))
    src = IncrementSource(cfg.seed, 0, 1, cfg.dt)
    z = z0.copy()
    rows = []

    def record(step):
        chi = 0.5 * math.log(float(np.vdot(z, z).real))
        row = {"t": step * cfg.dt, "chi": chi, "H": float(prep.table.hamiltonian(chi)),
               "V": float(prep.table.dispersion(chi))}
        for a, za in enumerate(z, 1):
            row[f"re_z{a}"] = za.real
            row[f"im_z{a}"] = za.imag
        rows.append(row)
        return chi

    step = 0
    record(0)
    while step < cfg.max_steps:
        incr = src.block(cfg.block)[0]
        for dw in incr:
            z = sde.step_full(cfg.metric, z, cfg.dt, float(dw), cfg.sigma, scheme)
            step += 1
            chi = 0.5 * math.log(float(np.vdot(z, z).real))
            if not prep.lo < chi < prep.hi:
                record(step)
                return rows
            if step % cfg.record_every == 0:
                record(step)
            if step >= cfg.max_steps:
                break
    return rows


def cmd_simulate(ns, out) -> int:
    metric = _metric(ns)
    cls = _require_complete(metric, ns)
    start = _start(metric, ns)
    report = {"metric": metric.name, "params": metric.params, "case": cls["case"]}
    code = EXIT_OK
    if ns.full:
        if metric.family is not Family.POTENTIAL_UN:
            raise ValidationError("--full needs a potential metric")
        if start.chart is not Chart.COMPLEX:
            raise ValidationError("--full needs --z0")
        z0 = np.asarray(start.coords, dtype=complex)
        cfg = _sim_config(metric, ns, start, keep_paths=False)
        if ns.n == 1:
            rows = _full_trajectory(cfg, z0, ns.scheme)
            report.update(config=cfg.summary(), steps_recorded=len(rows), final=rows[-1])
            if ns.csv:
                _write_csv(rows, ns.csv)
        else:
            res = sde.run_full_ensemble(cfg, z0, scheme=ns.scheme)
            names = sde._end_names(res.prep)
            report.update(config=cfg.summary(), ratio_residual=res.ratio_residual,
                          endpoints={names[k]: int(np.sum(res.status == k)) for k in (-1, 1, 0)})
        _emit(report, ns, out)
        return code
    cfg = _sim_config(metric, ns, start, keep_paths=True)
    if ns.n == 1:
        traj = sde.run_trajectory(cfg)
        report.update(config=cfg.summary(), absorbed_at=traj.absorbed_at, flag=traj.flag,
                      steps_recorded=len(traj.times), final={"chi": traj.chi[-1], "H": traj.H_series[-1],
                                                             "V": traj.V_series[-1]})
        if ns.csv:
            _write_csv(traj.to_rows(), ns.csv)
    else:
        ens = sde.run_ensemble(cfg)
        report.update(ens.summary())
        report["backend"] = ens.backend
        if ns.csv:
            _write_csv(_terminal_rows(ens.status, ens.exit_step, ens.terminal_chi), ns.csv)
        if ns.tests:
            tests = {"martingale": analysis.martingale_test(ens, threshold=ns.threshold),
                     "supermartingale": analysis.supermartingale_test(ens, threshold=ns.threshold)}
            report["tests"] = {k: v.as_dict() for k, v in tests.items()}
            if ns.strict and not all(v.passed for v in tests.values()):
                code = EXIT_HYPOTHESIS
    _emit(report, ns, out)
    return code


def _terminal_rows(status, exit_step, terminal) -> list[dict]:
    return [{"path": i, "status": int(s), "exit_step": int(e), "terminal_chi": float(c)}
            for i, (s, e, c) in enumerate(zip(status, exit_step, terminal))]


def cmd_hitprob(ns, out) -> int:
    metric = _metric(ns)
    cls = _require_complete(metric, ns)
    start = _start(metric, ns)
    probs = analysis.hitting_probabilities(metric, start)
    report = {"metric": metric.name, "params": metric.params, "case": cls["case"], **probs,
              "analytic": probs["pi_plus"], "oracle": analysis.hitting_probability_oracle(metric, start)}
    code = EXIT_OK
    if ns.n > 0:
        cfg = _sim_config(metric, ns, start, keep_paths=False)
        ens = sde.run_ensemble(cfg)
        test = analysis.hitting_test(ens, threshold=ns.threshold)
        report.update(config=cfg.summary(), endpoints=ens.endpoint_counts, estimate=test.statistic,
                      test=test.as_dict(), backend=ens.backend)
        if ns.csv:
            _write_csv(_terminal_rows(ens.status, ens.exit_step, ens.terminal_chi), ns.csv)
        if ns.strict and not test.passed:
            code = EXIT_HYPOTHESIS
    _emit(report, ns, out)
    return code


def cmd_lueders(ns, out) -> int:
    metric = _metric(ns)
    _require_complete(metric, ns)
    if ns.z0 is None:
        raise ValidationError("lueders needs --z0")
    z0 = np.asarray(_complex_vector(ns.z0), dtype=complex)
    cfg = _sim_config(metric, ns, ChartPoint(Chart.COMPLEX, tuple(z0)), keep_paths=False)
    rep = analysis.lueders_check(metric, z0, cfg, threshold=ns.threshold)
    _emit({"metric": metric.name, "params": metric.params, "config": cfg.summary(), **rep.as_dict()}, ns, out)
    return EXIT_HYPOTHESIS if ns.strict and not rep.passed else EXIT_OK


def cmd_brackets(ns, out) -> int:
    metric = _metric(ns)
    p = _start(metric, ns)
    A = observables.Observable.parse(_parse_value(ns.A))
    B = observables.Observable.parse(_parse_value(ns.B))
    report = {"metric": metric.name, "params": metric.params, "A": A.name(), "B": B.name(),
              "point": {"chart": p.chart.value, "coords": list(p.coords)}}
    methods = ("analytic", "fd") if ns.method == "both" else (ns.method,)
    for m in methods:
        report[m] = observables.poisson_bracket(metric, p, A, B, method=m)
    if len(methods) == 2:
        report["difference"] = abs(report["analytic"] - report["fd"])
    cls = topology.classify_manifold(metric)
    if cls.complete:
        report["critical_set_A"] = [c.to_json() for c in observables.critical_set(metric, A)]
    _emit(report, ns, out)
    return EXIT_OK


COMMANDS = {"catalog": cmd_catalog, "classify": cmd_classify, "curvature": cmd_curvature,
            "simulate": cmd_simulate, "hitprob": cmd_hitprob, "lueders": cmd_lueders,
            "brackets": cmd_brackets}


def run(argv=None, out=None, err=None) -> int:
    """Execute one command line and return its exit code."""
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            raise UsageError(parser.format_help())
        ns = _merge(ns)
        logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[ns.command](ns, out)
    except UsageError as exc:
        err.write(f"{exc}\n")
        return EXIT_VALIDATION
    except (ValidationError, OSError) as exc:
        err.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_VALIDATION
    except (NumericalError, OverflowError) as exc:
        err.write(f"numerical failure: {type(exc).__name__}: {exc}\n")
        return EXIT_NUMERICAL
    except CollapseLabError as exc:
        err.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_NUMERICAL


def main(argv=None) -> None:
    sys.exit(run(argv))
