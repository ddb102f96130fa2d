"""``latfkg`` command-line entry point.

    latfkg <subcommand> [--config FILE.json] --out-dir DIR [--assert] [--seed N]

Exit codes: 0 ok, 1 numerical assertion failed (--assert), 2 invalid config.
Every successful run writes its CSV outputs plus ``manifest.json`` into
``--out-dir`` and nowhere else.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, normalized_dict, validate
from .continuum import gaussian_profile, point_profile, symbol_gap
from .convergence import SweepPlan, run_sweep, self_convergence
from .fraclap import build_table
from .lattice import GridFunction, LatticeSpec, fmt_float, read_grid_csv, write_grid_csv
from .solver import (
    EvolutionState,
    Forcing,
    MassField,
    apriori_report,
    energy,
    energy_inequality_slack,
    forcing_l1_in_time,
    solve,
)

DEFAULT_OUT = {
    "coeffs": "coeffs.csv",
    "solve": "energies.csv",
    "energy": "energy.csv",
    "symbol-gap": "symbol_gap.csv",
    "converge": "converge.csv",
}


class AssertionFailed(Exception):
    pass


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """Bookkeeping for one dispatch: resolved paths, inputs read, outputs written."""

    def __init__(self, out_dir: Path, base_dir: Path, seed: int):
        self.out_dir = out_dir
        self.base_dir = base_dir
        self.seed = seed
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}
        self.summary: dict = {}

    def input_path(self, name: str) -> Path:
        p = Path(name)
        p = p if p.is_absolute() else self.base_dir / p
        try:
            self.inputs[str(name)] = sha256(p)
        except OSError as exc:
            raise ConfigError([f"{name}: cannot read input file ({exc.strerror})"]) from None
        return p

    def output_path(self, name: str) -> Path:
        p = (self.out_dir / name).resolve()
        if self.out_dir.resolve() not in p.parents:
            raise ConfigError([f"out: {name!r} resolves outside --out-dir"])
        self.outputs.setdefault(name, "")
        return p

    def finish_outputs(self) -> None:
        for name in self.outputs:
            self.outputs[name] = sha256(self.out_dir / name)


def _write_rows(path: Path, header, rows, trailer: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([x if isinstance(x, (int, str)) else fmt_float(x) for x in row])
        if trailer:
            fh.write(trailer + "\n")


# ----------------------------------------------------------------------------
# input builders
# ----------------------------------------------------------------------------


def _read_grid(run: Run, name: str, spec: LatticeSpec) -> GridFunction:
    path = run.input_path(name)
    try:
        return read_grid_csv(path, spec.spacing)
    except ValueError as exc:
        raise ConfigError([f"{name}: {exc}"]) from None


def _field(src, spec: LatticeSpec, run: Run, rng: np.random.Generator) -> GridFunction:
    if src.file is not None:
        u = _read_grid(run, src.file, spec)
        if u.spec != spec:
            raise ConfigError([f"{src.file}: lattice {u.spec} does not match config"])
        return u
    x = spec.coordinates()
    if src.builtin == "zero":
        return GridFunction.zeros(spec)
    if src.builtin == "gaussian":
        c = np.broadcast_to(np.asarray(src.center or 0.0, dtype=float), (spec.dim,))
        r2 = np.sum((x - c) ** 2, axis=-1)
        return GridFunction(spec, src.amplitude * np.exp(-r2 / src.width**2))
    if src.builtin == "planewave":
        return src.amplitude * GridFunction.plane_wave(spec, src.mode)
    if src.builtin == "random":
        vals = rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape)
        return GridFunction(spec, src.amplitude * vals)
    raise AssertionError(src.builtin)


def _mass(src, spec: LatticeSpec, run: Run) -> MassField:
    if src.const is not None:
        return MassField.constant(spec, src.const)
    if src.bump is not None:
        return MassField.from_function(spec, _bump(src.bump))
    u = _read_grid(run, src.file, spec)
    if u.spec != spec or np.any(u.values.imag != 0):
        raise ConfigError([f"mass.file: expected real values on {spec}"])
    return MassField(spec, u.values.real)


def _bump(params):
    base, height, width = params
    return lambda c: base + height * np.exp(-np.sum(c**2, axis=-1) / width**2)


def read_forcing_csv(path, spec: LatticeSpec) -> Forcing:
    """Columns ``t,index_0,...,index_{n-1},re,im``; every time carries all sites."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = ["t"] + [f"index_{a}" for a in range(spec.dim)] + ["re", "im"]
    if rows[0] != header:
        raise ConfigError([f"forcing.file: header must be {','.join(header)}"])
    by_time: dict[float, np.ndarray] = {}
    half = spec.points_per_axis // 2
    try:
        for lineno, row in enumerate(rows[1:], start=2):
            t = float(row[0])
            arr = by_time.setdefault(t, np.zeros(spec.shape, dtype=complex))
            pos = tuple(int(s) + half for s in row[1 : 1 + spec.dim])
            if min(pos) < 0:
                raise IndexError(pos)
            arr[pos] = complex(float(row[-2]), float(row[-1]))
        times = sorted(by_time)
        return Forcing(spec, np.array(times), np.stack([by_time[t] for t in times]))
    except (ValueError, IndexError) as exc:
        raise ConfigError([f"forcing.file: line {lineno}: {exc}"]) from None


# ----------------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------------


def cmd_coeffs(cfg, run: Run, out: str, check: bool) -> None:
    table = build_table(cfg.alpha, cfg.dim, cfg.radius, cfg.quad_points, cfg.richardson)
    header = [f"j_{a}" for a in range(cfg.dim)] + ["a_j", "quad_err"]
    rows = [list(j) + [a, e] for j, a, e in table.rows()]
    _write_rows(run.output_path(out), header, rows)
    run.summary.update(
        a_0=table.weight([0] * cfg.dim),
        table_sum=float(table.weights.sum()),
        quad_error_estimate=table.quad_error_estimate,
        tail_estimate=table.tail_estimate,
        tail_bound=table.tail_bound,
    )
    if check and table.quad_error_estimate > 1e-8:
        raise AssertionFailed(f"quadrature error estimate {table.quad_error_estimate:.3e} > 1e-8")


def _spec(cfg) -> LatticeSpec:
    return LatticeSpec(cfg.n, cfg.hbar, cfg.N)


def cmd_solve(cfg, run: Run, out: str, check: bool) -> None:
    spec = _spec(cfg)
    rng = np.random.default_rng(run.seed)
    u0 = _field(cfg.u0, spec, run, rng)
    u1 = _field(cfg.u1, spec, run, rng)
    mass = _mass(cfg.mass, spec, run)
    if cfg.forcing == "zero":
        forcing = Forcing.zero(spec)
    else:
        forcing = read_forcing_csv(run.input_path(cfg.forcing.file), spec)
        if forcing.times[0] > 0 or forcing.times[-1] < cfg.T - 1e-12:
            raise ConfigError(["forcing.file: time grid must cover [0, T]"])
    trace = solve(u0, u1, cfg.alpha, mass, forcing, cfg.T, cfg.dt, cfg.record_every)
    for i, st in enumerate(trace.states):
        write_grid_csv(st.u, run.output_path(f"u_{i:05d}.csv"))
        write_grid_csv(st.du, run.output_path(f"du_{i:05d}.csv"))
    sqrt_bound = math.sqrt(trace.energies[0].total) + forcing_l1_in_time(forcing, trace.times, trace.dt)
    rows = [
        [e.time, e.kinetic, e.dirichlet, e.potential, e.total, b]
        for e, b in zip(trace.energies, sqrt_bound)
    ]
    _write_rows(run.output_path(out), ["t", "kinetic", "dirichlet", "potential", "total", "sqrtE_bound"], rows)
    _write_rows(
        run.output_path("times.csv"),
        ["record", "t"],
        [[i, t] for i, t in enumerate(trace.times)],
    )
    slack = energy_inequality_slack(trace)
    report = apriori_report(trace, u0, u1, mass, forcing)
    e0 = trace.energies[0].total
    drift = max(abs(e.total - e0) for e in trace.energies) / max(e0, 1.0)
    run.summary.update(
        scheme="exact" if mass.is_constant else "strang",
        steps=round(cfg.T / trace.dt),
        records=len(trace.states),
        min_energy_slack=float(slack.min()),
        max_relative_energy_drift=drift,
        implied_constant=report.implied_constant,
    )
    if check and slack.min() < -1e-8:
        raise AssertionFailed(f"energy inequality violated by {-slack.min():.3e}")


def cmd_energy(cfg, run: Run, out: str, check: bool) -> None:
    spec = _spec(cfg)
    rng = np.random.default_rng(run.seed)
    state = EvolutionState(0.0, _field(cfg.u0, spec, run, rng), _field(cfg.u1, spec, run, rng))
    rec = energy(state, cfg.alpha, _mass(cfg.mass, spec, run))
    _write_rows(
        run.output_path(out),
        ["t", "kinetic", "dirichlet", "potential", "total"],
        [[rec.time, rec.kinetic, rec.dirichlet, rec.potential, rec.total]],
    )
    run.summary.update(total=rec.total)


def cmd_symbol_gap(cfg, run: Run, out: str, check: bool) -> None:
    spec = _spec(cfg)
    theta = spec.frequencies()
    gap, normalized = symbol_gap(theta, cfg.hbar, cfg.alpha)
    header = [f"theta_{a}" for a in range(cfg.n)] + ["gap", "normalized"]
    flat_theta = theta.reshape(-1, cfg.n)
    rows = [list(t) + [g, q] for t, g, q in zip(flat_theta, gap.ravel(), normalized.ravel())]
    _write_rows(run.output_path(out), header, rows)
    run.summary.update(max_gap=float(gap.max()), max_normalized=float(normalized.max()))
    if check and cfg.alpha == 1.0 and normalized.max() > 4 * math.pi**4 / 3 + 1e-9:
        raise AssertionFailed(f"normalized gap {normalized.max()} exceeds 4 pi^4/3")


def _profile(p, dim: int):
    if p.kind == "gaussian":
        return gaussian_profile(dim, p.cutoff, p.width, p.center, p.amplitude, p.points, p.velocity_amplitude)
    return point_profile(dim, p.cutoff, p.value, p.points)


def cmd_converge(cfg, run: Run, out: str, check: bool) -> None:
    mass = cfg.mass.const if cfg.mass.const is not None else _bump(cfg.mass.bump)
    plan = SweepPlan(cfg.alpha, cfg.n, mass, _profile(cfg.profile, cfg.n), cfg.T,
                     tuple(cfg.hbar_list), cfg.box, cfg.dt)
    if cfg.reference == "continuum":
        report = run_sweep(plan)
    else:
        report = self_convergence(plan, cfg.reference_refinements)
    rows = [
        [r.hbar, r.N, r.D_u, r.D_du, r.D_total, r.D_total_weighted(cfg.n), r.normalized]
        for r in report.rows
    ]
    rate = "exact" if report.exact else fmt_float(report.fitted_rate)
    _write_rows(
        run.output_path(out),
        ["hbar", "N", "D_u", "D_du", "D_total", "D_total_weighted", "normalized"],
        rows,
        trailer=f"# fitted_rate={rate} residual={fmt_float(report.fit_residual)}",
    )
    run.summary.update(fitted_rate=rate if report.exact else report.fitted_rate,
                       fit_residual=report.fit_residual)
    if check and not report.exact and report.fitted_rate < 2 * cfg.alpha - 0.3:
        raise AssertionFailed(f"fitted rate {report.fitted_rate:.3f} < 2*alpha - 0.3")


COMMANDS = {
    "coeffs": cmd_coeffs,
    "solve": cmd_solve,
    "energy": cmd_energy,
    "symbol-gap": cmd_symbol_gap,
    "converge": cmd_converge,
}

# flag -> config key, per subcommand
FLAG_KEYS = {
    "coeffs": {"alpha": float, "dim": int, "radius": int, "quad_points": int},
    "symbol-gap": {"alpha": float, "hbar": float, "n": int, "N": int},
}


def _write_manifest(out_dir: Path, manifest: dict) -> None:
    fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=".manifest.", suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, out_dir / "manifest.json")


def dispatch(subcommand: str, raw: dict, out_dir, *, seed: int = 0, check: bool = False,
             out: str | None = None, base_dir=None) -> int:
    """Validate, run and record one subcommand.  Returns the exit status."""
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    try:
        cfg = validate(subcommand, raw)
    except ConfigError as exc:
        for line in exc.errors:
            print(f"config error: {line}", file=sys.stderr)
        return 2
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    run = Run(out_dir, Path(base_dir or "."), seed)
    status = 0
    try:
        COMMANDS[subcommand](cfg, run, out or DEFAULT_OUT[subcommand], check)
    except ConfigError as exc:
        for line in exc.errors:
            print(f"config error: {line}", file=sys.stderr)
        return 2
    except AssertionFailed as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        status = 1
    run.finish_outputs()
    _write_manifest(out_dir, {
        "tool": "latfkg",
        "version": __version__,
        "subcommand": subcommand,
        "config": normalized_dict(cfg),
        "seed": seed,
        "assert": check,
        "status": status,
        "started": started,
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "inputs": run.inputs,
        "outputs": run.outputs,
        "summary": run.summary,
    })
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latfkg", description="Fractional Klein-Gordon equation on the lattice hZ^n: coefficients, solver, continuum-limit sweeps.")
    parser.add_argument("--version", action="version", version=f"latfkg {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON configuration file")
        p.add_argument("--out-dir", type=Path, default=Path("."))
        p.add_argument("--out", help="output CSV name inside --out-dir")
        p.add_argument("--assert", dest="check", action="store_true",
                       help="exit 1 when the subcommand's numerical check fails")
        p.add_argument("--seed", type=int, default=0)
        for key, typ in FLAG_KEYS.get(name, {}).items():
            p.add_argument("--" + key.replace("_", "-"), dest=key, type=typ)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    raw: dict = {}
    base_dir = Path(".")
    if args.config is not None:
        try:
            raw = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"config error: <root>: cannot read {args.config}: {exc}", file=sys.stderr)
            return 2
        base_dir = args.config.parent
    if isinstance(raw, dict):
        for key in FLAG_KEYS.get(args.subcommand, {}):
            if getattr(args, key) is not None:
                raw[key] = getattr(args, key)
    if args.seed < 0 or args.seed >= 2**64:
        print("config error: seed: must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    return dispatch(args.subcommand, raw, args.out_dir, seed=args.seed, check=args.check,
                    out=args.out, base_dir=base_dir)


if __name__ == "__main__":
    sys.exit(main())
