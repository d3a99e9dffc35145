"""Command-line front end: subcommands over the package's computations,
INI configuration with flag overrides, CSV/JSON artifacts, and run
manifests that make every invocation reproducible.

Layering for every parameter: command-line flag > config-file entry >
built-in default.  The output directory additionally honors the QPT_OUT
environment variable (flag > QPT_OUT > config > default).  Each run
writes a manifest.json capturing the fully resolved configuration,
library versions, seed, and timings; `qpt --from-manifest m.json`
re-executes that configuration and regenerates the data artifacts
byte-for-byte.

Exit codes: 0 success, 1 numerical or module-level failure (and verify
runs that found violations, and sweeps with failed points), 2 usage.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .arithmetic import (Frequency, construct_liouville_frequency,
                         continued_fraction_expansion)
from .errors import QptError
from .floquet import band_structure, discriminant, measure_uniform_lower_bound
from .operator import (AmoSampling, Chain, TableSampling, ZeroSampling,
                       periodic_model)
from .transfer import lyapunov_exponent
from .transport import DEFAULT_CONFIG, moments, probability_distribution
from .verify import (FLOQUET_CHECKS, TRANSPORT_CHECKS, floquet_identity_suite,
                     theorem_demo, transport_consistency_suite)

MANIFEST_SCHEMA = "qpt-manifest/1"
OUT_ENV_VAR = "QPT_OUT"
DEFAULT_OUT = "qpt-out"


class UsageError(Exception):
    """Bad command line or config: reported on stderr, exit code 2."""


# ---------------------------------------------------------------------------
# serialization helpers

def to_jsonable(obj):
    """Recursively convert dataclasses, numpy types, Fractions, and
    containers into plain JSON-serializable values."""
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):
        return obj
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.generic):
        return to_jsonable(obj.item())
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, Frequency):
        return obj.to_json_dict()
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name))
                for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        seq = sorted(obj, key=repr) if isinstance(obj, (set, frozenset)) else obj
        return [to_jsonable(v) for v in seq]
    return repr(obj)


def _fmt_cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    if x is None:
        return ""
    return str(x)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt_cell(x) for x in row])


def write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(to_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# spec parsing: sampling functions, frequencies, grids

def parse_freq_spec(text: str) -> dict:
    """'p/q' -> rational, 'liouville:beta=2,q1=2,depth=3' -> constructed,
    anything float-parseable -> value."""
    text = text.strip()
    if text.startswith("liouville:"):
        return _parse_liouville_fields(text[len("liouville:"):])
    if "/" in text:
        num_s, _, den_s = text.partition("/")
        try:
            num, den = int(num_s), int(den_s)
        except ValueError:
            raise UsageError(f"bad rational frequency {text!r}") from None
        if den <= 0 or not 0 < num < den:
            raise UsageError(f"rational frequency must be in (0, 1): {text!r}")
        return {"kind": "rational", "num": num, "den": den}
    try:
        value = float(text)
    except ValueError:
        raise UsageError(f"cannot parse frequency spec {text!r}") from None
    return {"kind": "value", "value": value, "max_terms": 32}


def _parse_liouville_fields(text: str) -> dict:
    fields = {}
    for part in text.split(","):
        key, sep, val = part.partition("=")
        if not sep:
            raise UsageError(f"bad liouville field {part!r} (want key=value)")
        fields[key.strip()] = val.strip()
    unknown = set(fields) - {"beta", "q1", "depth"}
    if unknown:
        raise UsageError(f"unknown liouville fields {sorted(unknown)}")
    try:
        return {"kind": "liouville", "beta": float(fields["beta"]),
                "q1": int(fields["q1"]), "depth": int(fields["depth"])}
    except (KeyError, ValueError) as exc:
        raise UsageError(f"liouville spec needs beta=, q1=, depth=: {exc}") \
            from None


def build_frequency(spec: dict) -> Frequency:
    kind = spec["kind"]
    if kind == "rational":
        return continued_fraction_expansion(Fraction(spec["num"], spec["den"]))
    if kind == "value":
        return continued_fraction_expansion(spec["value"],
                                            max_terms=spec.get("max_terms", 32))
    if kind == "liouville":
        return construct_liouville_frequency(spec["beta"], spec["q1"],
                                             spec["depth"])
    raise UsageError(f"unknown frequency kind {kind!r}")


def chain_alpha(spec: dict):
    """The alpha a Chain should carry: exact Fraction when available."""
    if spec["kind"] == "rational":
        return Fraction(spec["num"], spec["den"])
    if spec["kind"] == "value":
        return float(spec["value"])
    return build_frequency(spec).value


def rational_alpha(spec: dict) -> Fraction:
    if spec["kind"] != "rational":
        raise UsageError("this command needs a rational frequency p/q "
                         "(pass a convergent explicitly)")
    return Fraction(spec["num"], spec["den"])


def build_sampling(cfg: dict):
    kind = cfg.get("sampling", "amo")
    if kind == "amo":
        return AmoSampling(cfg.get("lam", 1.0))
    if kind == "zero":
        return ZeroSampling()
    if kind == "table":
        values = cfg.get("potential")
        if not values:
            raise UsageError("table sampling needs --potential v1,v2,...")
        return TableSampling(values)
    raise UsageError(f"unknown sampling kind {kind!r}")


def parse_axis(text: str, name: str, integer: bool = False):
    """Grid axis: 'a,b,c' list, 'lin:lo:hi:n' linspace, 'grid:n' n points
    equispaced on [0, 1)."""
    text = text.strip()
    if not text:
        raise UsageError(f"axis {name} is empty")
    if text.startswith("grid:"):
        try:
            n = int(text[5:])
        except ValueError:
            raise UsageError(f"bad grid axis {text!r}") from None
        if n < 1:
            raise UsageError(f"axis {name}: grid size must be >= 1")
        return [i / n for i in range(n)]
    if text.startswith("lin:"):
        parts = text[4:].split(":")
        if len(parts) != 3:
            raise UsageError(f"bad lin axis {text!r} (want lin:lo:hi:n)")
        try:
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise UsageError(f"bad lin axis {text!r}") from None
        if n < 1:
            raise UsageError(f"axis {name}: lin size must be >= 1")
        vals = np.linspace(lo, hi, n)
        return [int(v) for v in vals] if integer else [float(v) for v in vals]
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            out.append(int(part) if integer else float(part))
        except ValueError:
            raise UsageError(f"axis {name}: cannot parse {part!r}") from None
    if not out:
        raise UsageError(f"axis {name} is empty")
    return out


# ---------------------------------------------------------------------------
# configuration resolution

def _load_ini(path: str | None) -> configparser.ConfigParser | None:
    if path is None:
        return None
    ini = configparser.ConfigParser()
    read = ini.read(path)
    if not read:
        raise UsageError(f"config file {path!r} not found or unreadable")
    return ini


class ParamSet:
    """Merges CLI args over an INI section, recording resolved values."""

    def __init__(self, args, ini, section: str):
        self.args = args
        self.ini = ini
        self.section = section
        self.resolved: dict = {}

    def _ini_get(self, name: str, run_section: bool = False):
        if self.ini is None:
            return None
        section = "run" if run_section else self.section
        for key in (name, name.replace("_", "-")):
            if self.ini.has_option(section, key):
                return self.ini.get(section, key)
        return None

    def get(self, name: str, default=None, cast=None, run_section: bool = False):
        cli_val = getattr(self.args, name.replace("-", "_"), None)
        if cli_val is not None:
            value = cli_val
        else:
            raw = self._ini_get(name, run_section)
            if raw is None:
                value = default
            elif cast is bool:
                value = raw.strip().lower() in ("1", "true", "yes", "on")
            elif cast is not None:
                try:
                    value = cast(raw)
                except (ValueError, TypeError):
                    raise UsageError(
                        f"config [{self.section}] {name} = {raw!r}: "
                        f"cannot convert") from None
            else:
                value = raw
        self.resolved[name] = value
        return value


def _resolve_out(args, ini) -> str:
    if getattr(args, "out", None):
        return args.out
    env = os.environ.get(OUT_ENV_VAR)
    if env:
        return env
    if ini is not None and ini.has_option("run", "out"):
        return ini.get("run", "out")
    return DEFAULT_OUT


def _csv_floats(text: str):
    return [float(p) for p in text.split(",") if p.strip()]


def _csv_ints(text: str):
    return [int(p) for p in text.split(",") if p.strip()]


# ---------------------------------------------------------------------------
# command runners: cfg dict -> (exit_code, summary, artifact names, extra)

def _run_freq(cfg: dict, out: Path):
    freq = build_frequency(cfg["freq"])
    doc = freq.to_json_dict()
    write_json(out / "freq.json", doc)
    beta = doc["beta_hat"]
    beta_s = "n/a" if beta is None else f"{beta:.6g}"
    summary = (f"freq value={freq.value.numerator}/{freq.value.denominator} "
               f"depth={freq.depth} beta_hat={beta_s}")
    return 0, summary, ["freq.json"], {}


def _run_bands(cfg: dict, out: Path):
    f = build_sampling(cfg)
    alpha = rational_alpha(cfg["freq"])
    model = periodic_model(f, alpha, cfg["theta"])
    bs = band_structure(model, kappa_grid=cfg["kappa_grid"])
    rows = [(b.j, b.lo, b.hi, b.width, b.center) for b in bs.bands]
    write_csv(out / "bands.csv", ("j", "lo", "hi", "width", "center"), rows)
    widths = bs.widths
    summary = (f"bands q={bs.q} span=[{bs.bands[0].lo:.6g}, "
               f"{bs.bands[-1].hi:.6g}] min_width={widths.min():.6g}")
    return 0, summary, ["bands.csv"], {"q": bs.q}


def _run_discriminant(cfg: dict, out: Path):
    f = build_sampling(cfg)
    alpha = rational_alpha(cfg["freq"])
    model = periodic_model(f, alpha, cfg["theta"])
    lo, hi = cfg["e_min"], cfg["e_max"]
    if lo is None or hi is None:
        bs = band_structure(model)
        pad = 0.5
        lo = bs.bands[0].lo - pad if lo is None else lo
        hi = bs.bands[-1].hi + pad if hi is None else hi
    energies = np.linspace(lo, hi, cfg["count"])
    rows = [(e, discriminant(model, e)) for e in energies]
    write_csv(out / "discriminant.csv", ("energy", "discriminant"), rows)
    summary = (f"discriminant q={model.q} on [{lo:.6g}, {hi:.6g}] "
               f"({cfg['count']} points)")
    return 0, summary, ["discriminant.csv"], {}


def _run_measure(cfg: dict, out: Path):
    f = build_sampling(cfg)
    alpha = rational_alpha(cfg["freq"])
    interval = (cfg["e_min"], cfg["e_max"])
    if interval[0] is None or interval[1] is None:
        raise UsageError("measure needs --e-min and --e-max")
    res = measure_uniform_lower_bound(f, alpha, interval,
                                      theta_grid=cfg["theta_grid"],
                                      kappa_grid=cfg["kappa_grid"])
    write_json(out / "measure.json", res)
    summary = (f"measure eta={res.eta:.6g} over theta_grid={res.theta_count} "
               f"kappa_grid={res.kappa_count} "
               f"argmin=(theta {res.theta_argmin:.6g}, "
               f"kappa {res.kappa_argmin:.6g})")
    return 0, summary, ["measure.json"], {"eta": res.eta}


def _run_lyapunov(cfg: dict, out: Path):
    f = build_sampling(cfg)
    alpha = chain_alpha(cfg["freq"])
    if cfg["energies"]:
        energies = cfg["energies"]
    else:
        if cfg["e_min"] is None or cfg["e_max"] is None:
            raise UsageError("lyapunov needs --energies or --e-min/--e-max")
        energies = [float(e) for e in
                    np.linspace(cfg["e_min"], cfg["e_max"], cfg["e_count"])]
    rows = []
    for e in energies:
        est = lyapunov_exponent(f, alpha, e, n_steps=cfg["n_steps"],
                                theta_count=cfg["theta_count"],
                                theta_mode=cfg["theta_mode"],
                                seed=cfg["seed"])
        rows.append((e, est.gamma_hat, est.stderr))
    write_csv(out / "lyapunov.csv", ("energy", "gamma_hat", "stderr"), rows)
    gmin = min(r[1] for r in rows)
    summary = (f"lyapunov {len(rows)} energies, min gamma_hat={gmin:.6g} "
               f"(n_steps={cfg['n_steps']}, theta_count={cfg['theta_count']})")
    return 0, summary, ["lyapunov.csv"], {"min_gamma": gmin}


def _run_transport(cfg: dict, out: Path):
    f = build_sampling(cfg)
    chain = Chain(f, chain_alpha(cfg["freq"]), cfg["theta"])
    dist = probability_distribution(chain, cfg["time_scale"],
                                    radius=cfg["radius"])
    n_max = cfg["max_site"]
    mask = np.abs(dist.displacements) <= n_max
    rows = list(zip(dist.displacements[mask].tolist(),
                    dist.probabilities[mask].tolist()))
    write_csv(out / "transport.csv", ("displacement", "probability"), rows)
    summary = (f"transport T={cfg['time_scale']:.6g} radius={dist.radius} "
               f"total_mass={dist.total_mass:.9g} "
               f"window |n|<={n_max} ({len(rows)} rows)")
    return 0, summary, ["transport.csv"], {"total_mass": dist.total_mass}


def _run_moments(cfg: dict, out: Path):
    f = build_sampling(cfg)
    chain = Chain(f, chain_alpha(cfg["freq"]), cfg["theta"])
    mom = moments(chain, cfg["time_scale"], orders=cfg["orders"],
                  radius=cfg["radius"])
    rows = [(p, v, v / cfg["time_scale"] ** p if p > 0 else v)
            for p, v in zip(mom.orders, mom.values)]
    write_csv(out / "moments.csv", ("order", "moment", "moment_over_Tp"), rows)
    parts = " ".join(f"M_{p:g}={v:.6g}" for p, v in zip(mom.orders, mom.values))
    summary = f"moments T={cfg['time_scale']:.6g} {parts}"
    return 0, summary, ["moments.csv"], {"values": list(mom.values)}


def _rows_to_csv(path: Path, rows) -> None:
    keys = sorted({k for row in rows for k in row})
    write_csv(path, keys, [[row.get(k) for k in keys] for row in rows])


def _run_verify(cfg: dict, out: Path):
    suites = ("floquet", "transport") if cfg["suite"] == "all" \
        else (cfg["suite"],)
    checks = cfg["checks"]
    artifacts, summaries, results = [], [], {}
    total_violations = 0
    for name in suites:
        if name == "floquet":
            chosen = tuple(c for c in (checks or FLOQUET_CHECKS)
                           if c in FLOQUET_CHECKS)
            if not chosen:
                raise UsageError("no floquet checks selected")
            rep = floquet_identity_suite(
                count=cfg["trials"], q_max=cfg["q_max"], seed=cfg["seed"],
                checks=chosen, samples_per_model=cfg["samples_per_model"],
                corrupt_corner=cfg["corrupt"])
        else:
            chosen = tuple(c for c in (checks or TRANSPORT_CHECKS)
                           if c in TRANSPORT_CHECKS)
            if not chosen:
                raise UsageError("no transport checks selected")
            rep = transport_consistency_suite(
                time_scales=tuple(cfg["time_scales"]), checks=chosen,
                max_site=cfg["max_site"])
        fname = f"verify_{name}.csv"
        _rows_to_csv(out / fname, rep.artifacts)
        artifacts.append(fname)
        results[name] = {"instances": rep.instances,
                         "violations": rep.violations,
                         "worst_margin": rep.worst_margin,
                         "config": rep.config_snapshot}
        total_violations += rep.violations
        summaries.append(f"{name}: {rep.violations} violations "
                         f"/ {rep.instances} instances")
    if checks is not None:
        known = set(FLOQUET_CHECKS) | set(TRANSPORT_CHECKS)
        bad = [c for c in checks if c not in known]
        if bad:
            raise UsageError(f"unknown checks {bad}")
    write_json(out / "verify.json", results)
    artifacts.append("verify.json")
    code = 0 if total_violations == 0 else 1
    return code, "verify " + "; ".join(summaries), artifacts, results


def _run_theorem_demo(cfg: dict, out: Path):
    f = build_sampling(cfg)
    rep = theorem_demo(f, cfg["delta"], depth_budget=cfg["depth_budget"],
                       p_list=tuple(cfg["p_list"]),
                       theta_grid=cfg["theta_grid"],
                       beta_target=cfg["beta_target"],
                       max_radius=cfg["max_radius"])
    write_json(out / "theorem_demo.json", rep)
    p_list = tuple(cfg["p_list"])
    header = ["k", "q", "time_scale", "feasible", "note"]
    for p in p_list:
        header += [f"min_p{p:g}", f"ratio_plain_p{p:g}", f"ratio_log_p{p:g}"]
    rows = []
    for pt in rep.points:
        row = [pt.k, pt.q, pt.time_scale, pt.feasible, pt.note or ""]
        for p in p_list:
            if pt.feasible:
                row += [pt.min_moments[p], pt.ratio_plain[p],
                        pt.ratio_log[p]]
            else:
                row += [None, None, None]
        rows.append(row)
    write_csv(out / "theorem_points.csv", header, rows)
    feas = len(rep.feasible_points)
    summary = (f"theorem-demo gamma0={rep.gamma0:.6g} "
               f"threshold={rep.threshold:.6g} beta_hat={rep.beta_hat:.6g} "
               f"points={len(rep.points)} feasible={feas}")
    return 0, summary, ["theorem_demo.json", "theorem_points.csv"], \
        {"feasible": feas}


# ---------------------------------------------------------------------------
# sweep

SWEEP_AXES = ("lam", "theta", "energy", "time", "depth")


def _sweep_eval(task: dict) -> dict:
    """One grid point, executed in a worker process."""
    try:
        cfg = task["cfg"]
        point = task["point"]
        base = dict(cfg)
        if "lam" in point:
            base["lam"] = point["lam"]
        f = build_sampling(base)
        freq_spec = dict(cfg["freq"])
        if "depth" in point:
            if freq_spec["kind"] == "liouville":
                freq_spec["depth"] = point["depth"]
            else:
                freq = build_frequency(freq_spec)
                conv = freq.convergent(min(point["depth"], freq.depth))
                freq_spec = {"kind": "rational", "num": conv.numerator,
                             "den": conv.denominator}
        alpha = chain_alpha(freq_spec)
        theta = point.get("theta", cfg["theta"])
        if task["command"] == "moments":
            t = point.get("time", cfg["time_scale"])
            mom = moments(Chain(f, alpha, theta), t, orders=cfg["orders"],
                          radius=cfg["radius"])
            values = {f"m_{p:g}": v for p, v in zip(mom.orders, mom.values)}
        else:
            e = point.get("energy", 0.0)
            est = lyapunov_exponent(f, alpha, e, n_steps=cfg["n_steps"],
                                    theta_count=cfg["theta_count"],
                                    theta_mode=cfg["theta_mode"],
                                    seed=cfg["seed"])
            values = {"gamma_hat": est.gamma_hat, "stderr": est.stderr}
        return {"index": task["index"], "ok": True, "values": values}
    except (QptError, UsageError, FloatingPointError) as exc:
        return {"index": task["index"], "ok": False,
                "error": f"{type(exc).__name__}: {exc}"}


def _run_sweep(cfg: dict, out: Path):
    axes = [(name, cfg["axes"][name]) for name in SWEEP_AXES
            if name in cfg["axes"]]
    if not axes:
        raise UsageError("sweep needs at least one grid axis "
                         "(--lambdas/--thetas/--energies/--times/--depths)")
    axis_names = [name for name, _ in axes]
    points = [dict(zip(axis_names, combo))
              for combo in itertools.product(*(vals for _, vals in axes))]
    tasks = [{"index": i, "command": cfg["command"], "cfg": cfg,
              "point": pt} for i, pt in enumerate(points)]

    jobs = cfg["jobs"]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_eval, tasks))
    else:
        results = [_sweep_eval(t) for t in tasks]

    value_keys = sorted({k for r in results if r["ok"] for k in r["values"]})
    if not value_keys:
        value_keys = []

    # per-point CSVs plus the index
    index_rows = []
    point_files = []
    for pt, res in zip(points, results):
        entry = {"index": res["index"], "params": pt, "ok": res["ok"]}
        if res["ok"]:
            fname = f"point_{res['index']:05d}.csv"
            header = axis_names + value_keys
            row = [pt[a] for a in axis_names] + \
                [res["values"].get(k) for k in value_keys]
            write_csv(out / fname, header, [row])
            entry["file"] = fname
            point_files.append(fname)
        else:
            entry["error"] = res["error"]
        index_rows.append(entry)

    # aggregated CSV with a min-over-theta column per value when a theta
    # axis is present: the minimum within the group of rows sharing every
    # other axis coordinate
    min_cols = []
    minima = {}
    if "theta" in axis_names and value_keys:
        min_cols = [f"min_theta_{k}" for k in value_keys]
        group_axes = [a for a in axis_names if a != "theta"]
        for pt, res in zip(points, results):
            if not res["ok"]:
                continue
            gkey = tuple(pt[a] for a in group_axes)
            cur = minima.setdefault(gkey, {})
            for k in value_keys:
                v = res["values"][k]
                if k not in cur or v < cur[k]:
                    cur[k] = v

    agg_header = axis_names + value_keys + min_cols + ["ok"]
    agg_rows = []
    for pt, res in zip(points, results):
        row = [pt[a] for a in axis_names]
        if res["ok"]:
            row += [res["values"][k] for k in value_keys]
        else:
            row += [math.nan] * len(value_keys)
        if min_cols:
            gkey = tuple(pt[a] for a in axis_names if a != "theta")
            group = minima.get(gkey, {})
            row += [group.get(k, math.nan) for k in value_keys]
        row.append(res["ok"])
        agg_rows.append(row)
    write_csv(out / "sweep.csv", agg_header, agg_rows)

    failed = sum(1 for r in results if not r["ok"])
    write_json(out / "sweep_index.json",
               {"command": cfg["command"], "axes": dict(axes),
                "points": index_rows, "failed": failed})
    artifacts = ["sweep.csv", "sweep_index.json"] + point_files
    summary = (f"sweep {cfg['command']} over {'x'.join(axis_names)} "
               f"({len(points)} points, {failed} failed, jobs={jobs})")
    return (1 if failed else 0), summary, artifacts, {"failed": failed}


RUNNERS = {
    "freq": _run_freq,
    "bands": _run_bands,
    "discriminant": _run_discriminant,
    "measure": _run_measure,
    "lyapunov": _run_lyapunov,
    "transport": _run_transport,
    "moments": _run_moments,
    "verify": _run_verify,
    "theorem-demo": _run_theorem_demo,
    "sweep": _run_sweep,
}


# ---------------------------------------------------------------------------
# argument parsing and config assembly

def _add_common(sub, sampling=True, freq=True, theta=True):
    sub.add_argument("--config", help="INI config file")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--seed", type=int, help="seed for randomized pieces")
    if sampling:
        sub.add_argument("--sampling", choices=("amo", "table", "zero"))
        sub.add_argument("--lambda", dest="lam", type=float,
                         help="cosine coupling for amo sampling")
        sub.add_argument("--potential",
                         help="comma-separated table sampling values")
    if freq:
        sub.add_argument("--freq",
                         help="frequency: p/q, a float, or "
                              "liouville:beta=B,q1=Q,depth=D")
    if theta:
        sub.add_argument("--theta", type=float, help="phase offset")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qpt",
        description="Transport and spectral diagnostics for one-dimensional "
                    "quasiperiodic Schrodinger operators.")
    parser.add_argument("--version", action="version",
                        version=f"qpt {__version__}")
    parser.add_argument("--from-manifest", metavar="PATH",
                        help="re-run the configuration stored in a manifest")
    parser.add_argument("--out", help="output directory (with --from-manifest)")
    subs = parser.add_subparsers(dest="command")

    p = subs.add_parser("freq", help="continued-fraction data for a frequency")
    _add_common(p, sampling=False, freq=False, theta=False)
    p.add_argument("--value", type=float, help="float frequency in (0, 1)")
    p.add_argument("--rational", help="p/q")
    p.add_argument("--liouville", help="beta=B,q1=Q,depth=D construction")
    p.add_argument("--max-terms", type=int, help="expansion depth for --value")

    p = subs.add_parser("bands", help="band structure of a periodic model")
    _add_common(p)
    p.add_argument("--kappa-grid", type=int)

    p = subs.add_parser("discriminant", help="discriminant on an energy grid")
    _add_common(p)
    p.add_argument("--e-min", type=float)
    p.add_argument("--e-max", type=float)
    p.add_argument("--count", type=int)

    p = subs.add_parser("measure",
                        help="uniform spectral-measure lower bound eta")
    _add_common(p)
    p.add_argument("--e-min", type=float)
    p.add_argument("--e-max", type=float)
    p.add_argument("--theta-grid", type=int)
    p.add_argument("--kappa-grid", type=int)

    p = subs.add_parser("lyapunov", help="phase-averaged Lyapunov estimates")
    _add_common(p, theta=False)
    p.add_argument("--energies", help="comma-separated energy list")
    p.add_argument("--e-min", type=float)
    p.add_argument("--e-max", type=float)
    p.add_argument("--e-count", type=int)
    p.add_argument("--n-steps", type=int)
    p.add_argument("--theta-count", type=int)
    p.add_argument("--theta-mode", choices=("golden", "random"))

    p = subs.add_parser("transport",
                        help="Abel-averaged site probabilities at one T")
    _add_common(p)
    p.add_argument("--time-scale", type=float)
    p.add_argument("--radius", type=int)
    p.add_argument("--max-site", type=int)

    p = subs.add_parser("moments", help="Abel-averaged position moments")
    _add_common(p)
    p.add_argument("--time-scale", type=float)
    p.add_argument("--orders", help="comma-separated moment orders")
    p.add_argument("--radius", type=int)

    p = subs.add_parser("verify", help="identity and consistency suites")
    _add_common(p, sampling=False, freq=False, theta=False)
    p.add_argument("suite", nargs="?", choices=("floquet", "transport", "all"))
    p.add_argument("--trials", type=int, help="random models for floquet")
    p.add_argument("--q-max", type=int)
    p.add_argument("--samples-per-model", type=int)
    p.add_argument("--checks", help="comma-separated check subset")
    p.add_argument("--time-scales", help="comma-separated T list (transport)")
    p.add_argument("--max-site", type=int)
    p.add_argument("--corrupt", action="store_const", const=True,
                   help="corrupt a matrix corner (self-test of the checks)")

    p = subs.add_parser("theorem-demo",
                        help="end-to-end subsequence transport demonstration")
    _add_common(p, freq=False, theta=False)
    p.add_argument("--delta", type=float)
    p.add_argument("--depth-budget", type=int)
    p.add_argument("--theta-grid", type=int)
    p.add_argument("--p-list", help="comma-separated moment orders")
    p.add_argument("--beta-target", type=float)
    p.add_argument("--max-radius", type=int)

    p = subs.add_parser("sweep", help="grid sweep of moments or lyapunov")
    _add_common(p)
    p.add_argument("--command", dest="point_command",
                   choices=("moments", "lyapunov"))
    p.add_argument("--lambdas", help="coupling axis (list, lin:, grid:)")
    p.add_argument("--thetas", help="phase axis")
    p.add_argument("--energies", help="energy axis (lyapunov)")
    p.add_argument("--times", help="time-scale axis (moments)")
    p.add_argument("--depths", help="convergent-depth axis")
    p.add_argument("--time-scale", type=float, help="fixed T (moments)")
    p.add_argument("--orders", help="moment orders (moments)")
    p.add_argument("--radius", type=int)
    p.add_argument("--n-steps", type=int)
    p.add_argument("--theta-count", type=int)
    p.add_argument("--theta-mode", choices=("golden", "random"))
    p.add_argument("--jobs", type=int, help="worker pool size")

    return parser


def _sampling_cfg(ps: ParamSet) -> None:
    ps.get("sampling", default="amo")
    ps.get("lam", default=1.0, cast=float)
    pot = ps.get("potential", default=None)
    if isinstance(pot, str):
        ps.resolved["potential"] = _csv_floats(pot)


def _freq_cfg(ps: ParamSet, default="0.6180339887498949") -> None:
    spec = ps.get("freq", default=default)
    if isinstance(spec, str):
        spec = parse_freq_spec(spec)
    ps.resolved["freq"] = spec


def assemble_config(args, ini) -> dict:
    """Merge flags over INI into the fully resolved config dict for the
    chosen subcommand."""
    cmd = args.command
    ps = ParamSet(args, ini, cmd)
    ps.get("seed", default=0, cast=int, run_section=True)

    if cmd == "freq":
        given = [s for s in ("value", "rational", "liouville")
                 if getattr(args, s, None) is not None]
        if len(given) > 1:
            raise UsageError("pass exactly one of --value/--rational/--liouville")
        if args.value is not None:
            ps.resolved["freq"] = {"kind": "value", "value": args.value,
                                   "max_terms": args.max_terms or 32}
        elif args.rational is not None:
            ps.resolved["freq"] = parse_freq_spec(args.rational)
        elif args.liouville is not None:
            ps.resolved["freq"] = _parse_liouville_fields(args.liouville)
        else:
            raw = ps.get("freq", default=None)
            if raw is None:
                raise UsageError("freq needs --value, --rational, or --liouville")
            ps.resolved["freq"] = parse_freq_spec(raw) \
                if isinstance(raw, str) else raw
    elif cmd == "bands":
        _sampling_cfg(ps)
        _freq_cfg(ps, default="8/13")
        ps.get("theta", default=0.0, cast=float)
        ps.get("kappa_grid", default=64, cast=int)
    elif cmd == "discriminant":
        _sampling_cfg(ps)
        _freq_cfg(ps, default="8/13")
        ps.get("theta", default=0.0, cast=float)
        ps.get("e_min", default=None, cast=float)
        ps.get("e_max", default=None, cast=float)
        ps.get("count", default=512, cast=int)
    elif cmd == "measure":
        _sampling_cfg(ps)
        _freq_cfg(ps, default="8/13")
        ps.get("theta_grid", default=16, cast=int)
        ps.get("kappa_grid", default=64, cast=int)
        ps.get("e_min", default=None, cast=float)
        ps.get("e_max", default=None, cast=float)
    elif cmd == "lyapunov":
        _sampling_cfg(ps)
        _freq_cfg(ps)
        en = ps.get("energies", default=None)
        if isinstance(en, str):
            ps.resolved["energies"] = _csv_floats(en)
        ps.get("e_min", default=None, cast=float)
        ps.get("e_max", default=None, cast=float)
        ps.get("e_count", default=17, cast=int)
        ps.get("n_steps", default=10_000, cast=int)
        ps.get("theta_count", default=100, cast=int)
        ps.get("theta_mode", default="golden")
    elif cmd == "transport":
        _sampling_cfg(ps)
        _freq_cfg(ps)
        ps.get("theta", default=0.0, cast=float)
        ps.get("time_scale", default=20.0, cast=float)
        ps.get("radius", default=None, cast=int)
        ps.get("max_site", default=60, cast=int)
    elif cmd == "moments":
        _sampling_cfg(ps)
        _freq_cfg(ps)
        ps.get("theta", default=0.0, cast=float)
        ps.get("time_scale", default=20.0, cast=float)
        orders = ps.get("orders", default="1,2")
        if isinstance(orders, str):
            ps.resolved["orders"] = _csv_floats(orders)
        ps.get("radius", default=None, cast=int)
    elif cmd == "verify":
        ps.get("suite", default="all")
        ps.get("trials", default=20, cast=int)
        ps.get("q_max", default=8, cast=int)
        ps.get("samples_per_model", default=4, cast=int)
        checks = ps.get("checks", default=None)
        if isinstance(checks, str):
            ps.resolved["checks"] = [c.strip() for c in checks.split(",")
                                     if c.strip()]
        ts = ps.get("time_scales", default="5,20")
        if isinstance(ts, str):
            ps.resolved["time_scales"] = _csv_floats(ts)
        ps.get("max_site", default=60, cast=int)
        ps.get("corrupt", default=False, cast=bool)
    elif cmd == "theorem-demo":
        _sampling_cfg(ps)
        ps.get("delta", default=0.45, cast=float)
        ps.get("depth_budget", default=3, cast=int)
        ps.get("theta_grid", default=64, cast=int)
        plist = ps.get("p_list", default="1,2")
        if isinstance(plist, str):
            ps.resolved["p_list"] = _csv_floats(plist)
        ps.get("beta_target", default=2.0, cast=float)
        ps.get("max_radius", default=2500, cast=int)
    elif cmd == "sweep":
        _sampling_cfg(ps)
        _freq_cfg(ps)
        ps.get("theta", default=0.0, cast=float)
        ps.get("point_command", default="moments")
        ps.resolved["command"] = ps.resolved.pop("point_command")
        axes = {}
        for flag, axis, integer in (("lambdas", "lam", False),
                                    ("thetas", "theta", False),
                                    ("energies", "energy", False),
                                    ("times", "time", False),
                                    ("depths", "depth", True)):
            raw = ps.get(flag, default=None)
            if raw is not None:
                axes[axis] = parse_axis(raw, axis, integer=integer)
            ps.resolved.pop(flag, None)
        ps.resolved["axes"] = axes
        ps.get("time_scale", default=20.0, cast=float)
        orders = ps.get("orders", default="1,2")
        if isinstance(orders, str):
            ps.resolved["orders"] = _csv_floats(orders)
        ps.get("radius", default=None, cast=int)
        ps.get("n_steps", default=10_000, cast=int)
        ps.get("theta_count", default=16, cast=int)
        ps.get("theta_mode", default="golden")
        ps.get("jobs", default=1, cast=int, run_section=True)
    else:
        raise UsageError(f"unknown command {cmd!r}")

    ps.resolved["out"] = _resolve_out(args, ini)
    return ps.resolved


# ---------------------------------------------------------------------------
# execution

def _versions() -> dict:
    return {"python": ".".join(map(str, sys.version_info[:3])),
            "numpy": np.__version__, "scipy": scipy.__version__,
            "qptransport": __version__}


def execute(command: str, cfg: dict, out_dir: str | None = None) -> int:
    out = Path(out_dir if out_dir is not None else cfg.get("out", DEFAULT_OUT))
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    code, summary, artifacts, extra = RUNNERS[command](cfg, out)
    elapsed = time.perf_counter() - t0
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "command": command,
        "config": cfg,
        "seed": cfg.get("seed", 0),
        "versions": _versions(),
        "timings": {"total_seconds": elapsed},
        "artifacts": artifacts,
        "results": extra,
    }
    write_json(out / "manifest.json", manifest)
    print(f"{summary}  [{elapsed:.2f}s -> {out}]")
    return code


def _restore_freq_spec(cfg: dict) -> dict:
    """JSON round-trips tuples to lists; normalize the bits that matter."""
    cfg = dict(cfg)
    for key in ("orders", "p_list", "time_scales", "energies", "potential"):
        if key in cfg and cfg[key] is not None:
            cfg[key] = list(cfg[key])
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.from_manifest:
            with open(args.from_manifest) as fh:
                manifest = json.load(fh)
            if manifest.get("schema") != MANIFEST_SCHEMA:
                raise UsageError(
                    f"unrecognized manifest schema "
                    f"{manifest.get('schema')!r} (want {MANIFEST_SCHEMA})")
            command = manifest["command"]
            cfg = _restore_freq_spec(manifest["config"])
            return execute(command, cfg, out_dir=args.out)
        if not args.command:
            parser.print_usage(sys.stderr)
            print("qpt: error: a subcommand is required", file=sys.stderr)
            return 2
        ini = _load_ini(getattr(args, "config", None))
        cfg = assemble_config(args, ini)
        return execute(args.command, cfg)
    except UsageError as exc:
        print(f"qpt: usage error: {exc}", file=sys.stderr)
        return 2
    except QptError as exc:
        print(f"qpt: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
