"""``bloch-currents`` command line: scenario runs and LMG calibration.

Config files are plain ``key = value`` text split into one section per
module::

    [scenario]
    name = kerr-dissipative
    omega0 = pi/2, 0

    [dynamics]
    gamma = 0.015
    snapshots = 0, 0.32, pi/2

Command-line flags override the file. Exit status is 0 on success, 2 for
an invalid configuration and 3 when the numerics fail.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import re
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .currents import classical_velocity, total_current
from .dynamics import (
    DissipationParams,
    EvolutionTrace,
    best_squeezing_time,
    default_step,
    evolve,
    propagate,
    write_series_csv,
)
from .errors import BandOverflow, CalibrationFailed, ConfigError, DegenerateField, DegenerateMeanSpin, GridTooSmall
from .flow_analysis import integral_flow, stagnation_points, tunnelling_flow, write_flow_csv, write_stagnation_csv
from .phasespace_map import default_grid, symbol
from .scenarios import SCENARIOS, ScenarioConfig, calibrate_lmg, energy_landscape, preset
from .semiclassics import twa_propagate
from .sphere import SphereGrid

DIGITS = 17
# above this many RK4 steps the exact propagator is cheaper
RK4_STEP_LIMIT = 50_000
PHI_CONVENTION = "x^2 = K(K+1)"

# -- config parsing -----------------------------------------------------------

_PI = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*\*?\s*pi\s*(?:/\s*(\d+\.?\d*))?$")


def parse_number(text: str) -> float:
    """Float literal or a multiple of ``pi`` such as ``3*pi/4`` or ``-pi``."""
    t = text.strip()
    try:
        return float(t)
    except ValueError:
        pass
    m = _PI.match(t.replace(" ", ""))
    if m is None and t.startswith("-"):
        m = _PI.match("-1" + t[1:].replace(" ", ""))
    if m is None:
        raise ValueError(f"not a number: {text!r}")
    coef = float(m.group(1)) if m.group(1) not in (None, "", "+", "-") else -1.0 if m.group(1) == "-" else 1.0
    den = float(m.group(2)) if m.group(2) else 1.0
    return coef * math.pi / den


def _numbers(text: str, count: int | None = None) -> tuple:
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    vals = tuple(parse_number(p) for p in parts)
    if count is not None and len(vals) != count:
        raise ValueError(f"expected {count} numbers, got {len(vals)}")
    return vals


def _boolean(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _integer(text: str) -> int:
    v = parse_number(text)
    if v != int(v):
        raise ValueError(f"not an integer: {text!r}")
    return int(v)


def _grid(text: str) -> tuple:
    vals = _numbers(text, 2)
    if any(v != int(v) for v in vals):
        raise ValueError("grid sizes must be integers")
    return tuple(int(v) for v in vals)


# section -> key -> (field, parser)
SCHEMA = {
    "scenario": {
        "name": ("name", str.strip),
        "model": ("model", str.strip),
        "omega0": ("omega0", lambda t: _numbers(t, 2)),
        "basis_m": ("basis_m", parse_number),
    },
    "spin_algebra": {"S": ("S", parse_number)},
    "phasespace_map": {"s": ("s", _integer), "grid": ("grid", _grid)},
    "dynamics": {
        "chi": ("chi", parse_number),
        "h": ("h", parse_number),
        "lambda": ("lam", parse_number),
        "a": ("a", lambda t: _numbers(t, 3)),
        "b": ("b", lambda t: _numbers(t, 9)),
        "gamma": ("gamma", parse_number),
        "nbar": ("nbar", parse_number),
        "tmax": ("tmax", parse_number),
        "dt": ("dt", parse_number),
        "snapshots": ("snapshots", _numbers),
        "series_points": ("series_points", _integer),
        "method": ("method", str.strip),
    },
    "flow_analysis": {"phi0": ("phi0", parse_number), "tunnelling": ("tunnelling", _boolean)},
    "semiclassics": {"twa": ("twa", _boolean)},
    "cli": {"out": ("out", str.strip)},
}


def read_config(path) -> ScenarioConfig:
    """Parse a config file; errors carry the offending line number."""
    path = str(path)
    with open(path) as fh:
        lines = fh.read().splitlines()
    section = None
    entries: dict = {}
    for no, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", no, path)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]; expected one of {', '.join(SCHEMA)}", no, path)
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {raw.strip()!r}", no, path)
        if section is None:
            raise ConfigError("key outside any section", no, path)
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", no, path)
        field, parse = SCHEMA[section][key]
        if field in entries:
            raise ConfigError(f"{key} already set on line {entries[field][2]}", no, path)
        try:
            entries[field] = (parse(value), path, no)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", no, path) from None

    name = entries.get("name", ("custom",))[0]
    try:
        cfg = preset(name)
    except ValueError as exc:
        raise ConfigError(str(exc), entries["name"][2], path, "name") from None
    values = {f: v[0] for f, v in entries.items()}
    if "basis_m" in values and "omega0" not in values:
        values["omega0"] = None
    cfg = replace(cfg, **values)
    cfg.origin = {f: (v[1], v[2]) for f, v in entries.items()}
    return cfg


# -- argument handling ----------------------------------------------------------


def _flag(parse):
    def inner(text):
        try:
            return parse(text)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    return inner


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bloch-currents", description=__doc__.split("\n")[0], allow_abbrev=False)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="evolve a scenario and write its data files", allow_abbrev=False)
    r.add_argument("target", help=f"scenario name ({', '.join(SCENARIOS)}) or config file")
    r.add_argument("--S", type=_flag(parse_number), dest="S")
    r.add_argument("--s", type=_flag(_integer), dest="s")
    r.add_argument("--gamma", type=_flag(parse_number))
    r.add_argument("--nbar", type=_flag(parse_number))
    r.add_argument("--chi", type=_flag(parse_number))
    r.add_argument("--h", type=_flag(parse_number), dest="h")
    r.add_argument("--lambda", type=_flag(parse_number), dest="lam")
    r.add_argument("--omega0", type=_flag(lambda t: _numbers(t, 2)), metavar="THETA,PHI")
    r.add_argument("--basis-m", type=_flag(parse_number), dest="basis_m")
    r.add_argument("--tmax", type=_flag(parse_number))
    r.add_argument("--dt", type=_flag(parse_number))
    r.add_argument("--snapshots", type=_flag(_numbers), metavar="T1,T2,...")
    r.add_argument("--grid", type=_flag(_grid), metavar="NTHETA,NPHI")
    r.add_argument("--method", choices=("auto", "rk4", "propagator"))
    r.add_argument("--phi0", type=_flag(parse_number))
    r.add_argument("--twa", action="store_true", default=None, help="also write truncated-Wigner snapshots (s=0)")
    r.add_argument("--out", metavar="DIR")
    r.add_argument("--jobs", type=int, default=None, help="worker threads for snapshot analysis")

    c = sub.add_parser("calibrate-lmg", help="coupling placing the LMG minimum at phi = 1.459", allow_abbrev=False)
    c.add_argument("--S", type=_flag(parse_number), dest="S", required=True)
    return p


FLAG_FIELDS = (
    "S", "s", "gamma", "nbar", "chi", "h", "lam", "omega0", "basis_m",
    "tmax", "dt", "snapshots", "grid", "method", "phi0", "twa", "out",
)  # fmt: skip


def resolve_config(args) -> ScenarioConfig:
    if args.target in SCENARIOS:
        cfg = preset(args.target)
    elif os.path.isfile(args.target):
        cfg = read_config(args.target)
    else:
        raise ConfigError(f"{args.target!r} is neither a scenario ({', '.join(SCENARIOS)}) nor a readable file")
    flags = {f: getattr(args, f) for f in FLAG_FIELDS if getattr(args, f, None) is not None}
    if "basis_m" in flags and "omega0" not in flags:
        flags["omega0"] = None
    if "omega0" in flags and "basis_m" not in flags:
        flags["basis_m"] = None
    origin = dict(cfg.origin)
    origin.update({f: ("--" + {"lam": "lambda", "basis_m": "basis-m"}.get(f, f), None) for f in flags})
    cfg = replace(cfg, **flags)
    cfg.origin = origin
    # without an explicit tmax the run stretches to the latest snapshot
    if "tmax" not in origin and cfg.snapshots and not (cfg.tunnelling and cfg.tmax == 0):
        cfg.tmax = max(cfg.tmax, max(cfg.snapshots))
    try:
        cfg.validate()
    except ConfigError as exc:
        src, line = origin.get(exc.field, (None, None))
        if src is not None and line is None:
            raise ConfigError(f"{src}: {exc}", field=exc.field) from None
        raise ConfigError(str(exc), line, src, exc.field) from None
    return cfg


# -- the run ----------------------------------------------------------------------


def _grid_for(cfg: ScenarioConfig, irrep) -> SphereGrid:
    if cfg.grid is None:
        return default_grid(irrep)
    n_theta, n_phi = cfg.grid
    k_max = min(n_theta - 1, (n_phi - 1) // 2)
    if k_max < irrep.two_s + 2:
        raise ConfigError(
            f"grid {n_theta}x{n_phi} resolves degree {k_max}; currents need at least {irrep.two_s + 2}",
            *cfg.origin.get("grid", (None, None))[::-1],
            field="grid",
        )
    try:
        return SphereGrid(k_max, n_theta, n_phi)
    except GridTooSmall as exc:
        raise ConfigError(str(exc), field="grid") from None


def _tag(t: float) -> str:
    return format(t, ".10g")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _clean(x):
    """JSON-safe copy with non-finite floats turned into strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _evolution(cfg, H, diss, irrep, rho0, times):
    Hm = H.matrix(irrep)
    method = cfg.method
    dt = cfg.dt if cfg.dt is not None else default_step(Hm, diss, irrep)
    if method == "auto":
        method = "propagator" if (times[-1] / dt > RK4_STEP_LIMIT) else "rk4"
    if method == "propagator":
        return propagate(rho0, Hm, diss, times, irrep=irrep), method
    trace = evolve(rho0, Hm, diss, times[-1], cfg.dt, times, irrep, check_halving=False)
    return trace, method


def _analyse(H, diss, irrep, s, grid, rho, phi0):
    W = symbol(rho, irrep, s, grid)
    J = total_current(H, diss, W)
    try:
        stag = stagnation_points(J)
    except DegenerateField:
        stag = None
    return W, J, stag, integral_flow(J, phi0)


def run(cfg: ScenarioConfig, jobs: int | None = None) -> dict:
    """Evolve, analyse and write the output bundle; returns the manifest."""
    irrep = cfg.irrep()
    if cfg.model == "lmg" and cfg.lam is None:
        cfg = replace(cfg, lam=calibrate_lmg(cfg.S))
    lam = cfg.lam if cfg.model == "lmg" else None
    H = cfg.hamiltonian()
    diss = DissipationParams(cfg.gamma, cfg.nbar)
    grid = _grid_for(cfg, irrep)
    psi0 = cfg.initial_state()
    rho0 = np.outer(psi0, psi0.conj())
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)

    tmax = cfg.tmax
    snapshots = list(cfg.snapshots)
    tunnel = None
    if cfg.tunnelling:
        tunnel = tunnelling_flow(H, psi0, irrep, diss if diss.active else None, cfg.s, cfg.phi0, grid=grid)
        T = tunnel.period
        if tmax == 0:
            tmax = T
        if not snapshots:
            snapshots = [f * T for f in (0.0, 0.25, 0.5, 0.75, 1.0) if f * T <= tmax + 1e-12]
    if not snapshots:
        snapshots = [0.0, tmax]
    series_t = np.linspace(0.0, tmax, cfg.series_points)
    times = np.array(sorted(set(np.round(np.concatenate([series_t, snapshots]), 14))))

    trace, method = _evolution(cfg, H, diss if diss.active else None, irrep, rho0, times)
    if cfg.tunnelling:
        method = "propagator"

    files = []

    def emit(name):
        files.append(name)
        return out / name

    write_series_csv(_subset(trace, series_t), emit("series.csv"), DIGITS)

    workers = jobs or min(len(snapshots), os.cpu_count() or 1)
    rhos = [trace.state_at(t) for t in snapshots]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(
            pool.map(lambda r: _analyse(H, diss if diss.active else None, irrep, cfg.s, grid, r, cfg.phi0), rhos)
        )

    th, ph = grid.mesh()
    stag_entries = []
    degenerate_snapshots = []
    snapshot_files = {}
    for t, (W, J, stag, _) in zip(snapshots, results):
        name = f"snapshot_{_tag(t)}.csv"
        cols = [th, ph, np.real(W.values), np.real(J.J_theta), np.real(J.J_phi)]
        _write_columns(emit(name), ["theta", "phi", "W", "J_theta", "J_phi"], cols)
        snapshot_files[_tag(t)] = name
        if stag is None:
            degenerate_snapshots.append(t)
        else:
            stag_entries.append((t, stag))
    write_stagnation_csv(emit("stagnation.csv"), stag_entries, DIGITS)

    if tunnel is not None:
        write_flow_csv(emit("flow.csv"), tunnel.times, tunnel.flow, DIGITS)
    else:
        series_rhos = [trace.state_at(t) for t in series_t]
        flows = [
            integral_flow(total_current(H, diss if diss.active else None, symbol(r, irrep, cfg.s, grid)), cfg.phi0)
            for r in series_rhos
        ]
        write_flow_csv(emit("flow.csv"), series_t, flows, DIGITS)

    twa_files = {}
    if cfg.twa:
        W0 = symbol(rho0, irrep, 0, grid)
        v = classical_velocity(H, irrep, grid)
        for t in snapshots:
            Wt = np.real(twa_propagate(W0, H, t).values)
            name = f"twa_{_tag(t)}.csv"
            cols = [th, ph, Wt, np.real(v.J_theta) * Wt, np.real(v.J_phi) * Wt]
            _write_columns(emit(name), ["theta", "phi", "W", "J_theta", "J_phi"], cols)
            twa_files[_tag(t)] = name

    try:
        t_sq = best_squeezing_time(_subset(trace, series_t))
    except DegenerateMeanSpin:
        t_sq = None

    manifest = {
        "scenario": cfg.name,
        "parameters": {k: v for k, v in asdict(cfg).items() if k != "origin"},
        "S": irrep.S,
        "s": cfg.s,
        "hamiltonian": {"a": H.a_vec.tolist(), "b": H.b_mat.tolist()},
        "gamma": cfg.gamma,
        "nbar": cfg.nbar,
        "lambda": lam,
        "grid": {"k_max": grid.k_max, "n_theta": grid.n_theta, "n_phi": grid.n_phi},
        "phi_convention": PHI_CONVENTION,
        "method": method,
        "tmax": tmax,
        "snapshots": snapshots,
        "snapshot_files": snapshot_files,
        "degenerate_snapshots": degenerate_snapshots,
        "best_squeezing_time": t_sq,
        "energy_landscape": energy_landscape(H, irrep, cfg.model),
        "trace_drift": trace.trace_drift,
        "min_eigenvalue": trace.min_eigenvalue,
        "index_sums": {_tag(t): (st.index_sum if st.all_isolated else None) for t, st in stag_entries},
    }
    if twa_files:
        manifest["twa"] = {"method": "twa", "snapshot_files": twa_files}
    if tunnel is not None:
        first, second = tunnel.half_period_means()
        manifest["tunnelling"] = {
            "period": tunnel.period,
            "period_estimate": tunnel.period_estimate,
            "window": tunnel.window,
            "crossings": tunnel.crossings.tolist(),
            "half_period_means": [first, second],
        }
    manifest["files"] = {name: _sha256(out / name) for name in sorted(files)}
    manifest = _clean(manifest)
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def _subset(trace: EvolutionTrace, times) -> EvolutionTrace:
    idx = [int(np.argmin(np.abs(trace.times - t))) for t in times]
    sub = replace(trace, times=trace.times[idx], states=trace.states[idx])
    sub.scalars = {k: np.asarray(v)[idx] for k, v in trace.scalars.items()}
    return sub


def _write_columns(path, header, cols):
    flat = [np.asarray(c).ravel() for c in cols]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*flat):
            fh.write(",".join(f"{v:.{DIGITS}g}" for v in row) + "\n")


def _dump_diagnostic(cfg, exc, out_dir) -> Path | None:
    info = {
        "error": type(exc).__name__,
        "message": str(exc),
        "parameters": {k: v for k, v in asdict(cfg).items() if k != "origin"},
        "traceback": traceback.format_exception(type(exc), exc, exc.__traceback__),
    }
    try:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        path = Path(out_dir) / "diagnostic.json"
        with open(path, "w") as fh:
            json.dump(_clean(info), fh, indent=2, sort_keys=True)
        return path
    except OSError:
        return None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "calibrate-lmg":
        try:
            lam = calibrate_lmg(args.S)
        except CalibrationFailed as exc:
            print(f"calibration failed: {exc}", file=sys.stderr)
            return 3
        except ValueError as exc:
            print(f"--S: {exc}", file=sys.stderr)
            return 2
        print(f"{lam:.{DIGITS}g}")
        return 0

    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        manifest = run(cfg, args.jobs)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, BandOverflow, CalibrationFailed, np.linalg.LinAlgError) as exc:
        where = _dump_diagnostic(cfg, exc, cfg.out)
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        if where is not None:
            print(f"diagnostics written to {where}", file=sys.stderr)
        return 3
    print(f"wrote {len(manifest['files']) + 1} files to {cfg.out}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
