"""Command line front end: JSON configs in, bit-stable data files out.

Subcommands map one-to-one onto library operations:

    trajectory      simulate_conditional  -> trajectory_<index>.csv
    unconditional   solve_unconditional   -> unconditional.csv
    unitary         solve_unitary         -> unitary.csv
    ensemble        run_ensemble          -> stats.json + summaries.csv
    converge        strong_error          -> converge.json

Configs are flat JSON objects; unknown keys are rejected (loudly, with the
key name) and every omitted key falls back to a default that is echoed in
the manifest, so a run is always fully described by its manifest alone.
Data files are byte-identical across reruns of the same resolved config;
wall-clock information lives only in manifest.json.

Exit codes: 0 success, 1 configuration problem, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .dynamics import SweepParams
from .ensemble import (EnsembleConfig, EnsembleStats, ValueOutOfRange,
                       run_ensemble)
from .qubit import NonPhysicalState
from .sde import IndivisibleFactor, NumericsConfig, strong_error
from .trajectory import (ReferenceRecord, TrajectoryRecord,
                         simulate_conditional, solve_unconditional,
                         solve_unitary)


class ConfigError(Exception):
    """Configuration rejected; message names the offending key."""


_DEFAULTS: dict[str, Any] = {
    "omega": 100.0,
    "alpha": 1.0e3,
    "gamma_decay": 1.0,
    "phi": 0.0,
    "eta": 1.0,
    "t_initial": -1.0,
    "t_final": 1.0,
    "dt": 4.0e-5,
    "stepper": "milstein",
    "renormalize_each_step": True,
    "decimation": 50,
    "n_traj": 1000,
    "master_seed": 0,
    "thresholds": (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.96, 0.99),
    "histogram_bins": 25,
    "histogram_times": (-0.5, 0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.75, 1.0),
    "store_trajectories": False,
    "factors": (1, 2, 4, 8),
    "n_paths": 200,
    "out_dir": "out",
}

_FLOAT_KEYS = ("omega", "alpha", "gamma_decay", "phi", "eta",
               "t_initial", "t_final", "dt")
_INT_KEYS = ("decimation", "n_traj", "master_seed", "histogram_bins", "n_paths")
_BOOL_KEYS = ("renormalize_each_step", "store_trajectories")
_FLOAT_LIST_KEYS = ("thresholds", "histogram_times")
_INT_LIST_KEYS = ("factors",)
_STR_KEYS = ("stepper", "out_dir")


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run description: physics + numerics + ensemble + output.

    applied_defaults lists the keys the parser filled in; it is excluded
    from equality so parse(serialize(c)) == c holds.
    """

    omega: float
    alpha: float
    gamma_decay: float
    phi: float
    eta: float
    t_initial: float
    t_final: float
    dt: float
    stepper: str
    renormalize_each_step: bool
    decimation: int
    n_traj: int
    master_seed: int
    thresholds: tuple[float, ...]
    histogram_bins: int
    histogram_times: tuple[float, ...]
    store_trajectories: bool
    factors: tuple[int, ...]
    n_paths: int
    out_dir: str
    applied_defaults: tuple[str, ...] = field(default=(), compare=False, repr=False)

    def sweep_params(self) -> SweepParams:
        return SweepParams(omega=self.omega, alpha=self.alpha,
                           gamma_decay=self.gamma_decay, phi=self.phi,
                           eta=self.eta, t_initial=self.t_initial,
                           t_final=self.t_final)

    def numerics(self) -> NumericsConfig:
        return NumericsConfig(dt=self.dt, stepper=self.stepper,
                              renormalize_each_step=self.renormalize_each_step,
                              decimation=self.decimation)

    def ensemble_config(self) -> EnsembleConfig:
        return EnsembleConfig(n_traj=self.n_traj, master_seed=self.master_seed,
                              thresholds=self.thresholds,
                              histogram_bins=self.histogram_bins,
                              histogram_times=self.histogram_times,
                              store_trajectories=self.store_trajectories)

    def serialize(self) -> str:
        """Canonical JSON text; parse_config inverts this exactly."""
        data = {k: self._jsonable(getattr(self, k)) for k in _DEFAULTS}
        return json.dumps(data, indent=2, sort_keys=True) + "\n"

    @staticmethod
    def _jsonable(v: Any) -> Any:
        return list(v) if isinstance(v, tuple) else v


def _coerce(key: str, value: Any) -> Any:
    if key in _FLOAT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if key in _BOOL_KEYS:
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
        return value
    if key in _FLOAT_LIST_KEYS:
        if (not isinstance(value, list)
                or any(isinstance(v, bool) or not isinstance(v, (int, float))
                       for v in value)):
            raise ConfigError(f"{key}: expected a list of numbers, got {value!r}")
        return tuple(float(v) for v in value)
    if key in _INT_LIST_KEYS:
        if (not isinstance(value, list)
                or any(isinstance(v, bool) or not isinstance(v, int) for v in value)):
            raise ConfigError(f"{key}: expected a list of integers, got {value!r}")
        return tuple(value)
    if key in _STR_KEYS:
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        return value
    raise ConfigError(f"unknown key {key!r}")


def parse_config(text: str) -> RunConfig:
    """Parse and validate one JSON config, applying documented defaults.

    Raises ConfigError naming the offending key for unknown keys, type
    mismatches, or any violated invariant of the embedded configurations.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"top level must be a JSON object, got {type(raw).__name__}")

    unknown = sorted(set(raw) - set(_DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r} (unrecognized: {unknown})")

    resolved: dict[str, Any] = {}
    applied: list[str] = []
    for key, default in _DEFAULTS.items():
        if key in raw:
            resolved[key] = _coerce(key, raw[key])
        else:
            resolved[key] = default
            applied.append(key)

    cfg = RunConfig(**resolved, applied_defaults=tuple(applied))
    # Re-validate every embedded invariant at parse time, not first use.
    try:
        cfg.sweep_params()
        cfg.numerics()
        cfg.ensemble_config()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.n_paths < 1:
        raise ConfigError(f"n_paths: must be >= 1, got {cfg.n_paths}")
    if not cfg.factors or any(f < 1 for f in cfg.factors):
        raise ConfigError(f"factors: must be integers >= 1, got {list(cfg.factors)}")
    return cfg


def manifest_for(cfg: RunConfig, command: str) -> dict[str, Any]:
    """Deterministic run description embedded in every output file."""
    from . import __version__

    return {
        "command": command,
        "config": json.loads(cfg.serialize()),
        "applied_defaults": list(cfg.applied_defaults),
        "master_seed": cfg.master_seed,
        "code_version": __version__,
    }


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(record: TrajectoryRecord | ReferenceRecord,
                         path: Path) -> None:
    """Sample-resolution CSV: t, pe, x, y, z, purity[, dq].

    The dq column is omitted entirely (header included) when there is no
    measurement record.  Floats carry 17 significant digits so the file
    round-trips bit for bit.
    """
    dq = getattr(record, "dq", None)
    cols = ["t", "pe", "x", "y", "z", "purity"] + (["dq"] if dq is not None else [])
    lines = [",".join(cols)]
    for i in range(record.times.shape[0]):
        row = [record.times[i], record.pe[i], record.x[i], record.y[i],
               record.z[i], record.purity[i]]
        if dq is not None:
            row.append(dq[i])
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_summaries_csv(stats: EnsembleStats, path: Path) -> None:
    """Per-trajectory summary table, one row per index."""
    s = stats.summaries
    cols = ["index", "seed", "max_excitation", "terminal_pe"]
    cols += [f"dwell_frac_{c!r}" for c in s.thresholds.tolist()]
    lines = [",".join(cols)]
    for i in range(len(s)):
        row = [str(int(s.indices[i])), str(s.master_seed),
               _fmt(s.max_excitation[i]), _fmt(s.terminal_pe[i])]
        row += [_fmt(v) for v in s.dwell_fractions[i]]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")


def stats_payload(stats: EnsembleStats, manifest: dict[str, Any]) -> dict[str, Any]:
    """stats.json structure: manifest + mean curve + histograms + fractions."""
    return {
        "manifest": manifest,
        "n_traj": stats.n_traj,
        "mean_curve": [[float(t), float(pe)]
                       for t, pe in zip(stats.times, stats.mean_pe)],
        "histograms": {
            repr(float(t)): {
                "counts": h.counts.tolist(),
                "skew_moment": h.skew_moment,
                "skew_pearson": h.skew_pearson,
            } for t, h in stats.histograms.items()},
        "exit_fractions": {repr(float(c)): f
                           for c, f in stats.exit_fractions.items()},
        "dwell": {repr(float(c)): {"mean": m, "max": mx}
                  for c, (m, mx) in stats.dwell.items()},
    }


def _dump_json(data: dict[str, Any], path: Path) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def log_log_slope(points: Iterable[tuple[float, float]]) -> float | None:
    """Least-squares slope of log(error) against log(dt), zero errors skipped."""
    pts = [(dt, err) for dt, err in points if err > 0.0]
    if len(pts) < 2:
        return None
    x = np.log([dt for dt, _ in pts])
    y = np.log([err for _, err in pts])
    return float(np.polyfit(x, y, 1)[0])


def _write_manifest(manifest: dict[str, Any], out: Path, started: float) -> None:
    full = dict(manifest)
    full["wall_time_s"] = time.monotonic() - started
    full["completed_at"] = datetime.now(timezone.utc).isoformat()
    _dump_json(full, out / "manifest.json")


def _cmd_trajectory(cfg: RunConfig, out: Path, index: int) -> None:
    record = simulate_conditional(cfg.sweep_params(), cfg.numerics(),
                                  cfg.master_seed, index,
                                  thresholds=cfg.thresholds)
    write_trajectory_csv(record, out / f"trajectory_{index:05d}.csv")


def _cmd_unconditional(cfg: RunConfig, out: Path) -> None:
    write_trajectory_csv(solve_unconditional(cfg.sweep_params(), cfg.numerics()),
                         out / "unconditional.csv")


def _cmd_unitary(cfg: RunConfig, out: Path) -> None:
    write_trajectory_csv(solve_unitary(cfg.sweep_params(), cfg.numerics()),
                         out / "unitary.csv")


def _cmd_ensemble(cfg: RunConfig, out: Path, threads: int, manifest: dict) -> None:
    stats = run_ensemble(cfg.sweep_params(), cfg.numerics(),
                         cfg.ensemble_config(), n_workers=threads)
    _dump_json(stats_payload(stats, manifest), out / "stats.json")
    write_summaries_csv(stats, out / "summaries.csv")
    if stats.records is not None:
        for rec in stats.records:
            write_trajectory_csv(
                rec, out / f"trajectory_{rec.trajectory_index:05d}.csv")


def _cmd_converge(cfg: RunConfig, out: Path, manifest: dict) -> None:
    p = cfg.sweep_params()
    schemes = {}
    for stepper in ("euler", "milstein"):
        points = strong_error(p, cfg.dt, list(cfg.factors), cfg.n_paths,
                              cfg.master_seed, stepper=stepper,
                              renormalize=cfg.renormalize_each_step)
        schemes[stepper] = {
            "points": [[dt, err] for dt, err in points],
            "slope": log_log_slope(points),
        }
    _dump_json({"manifest": manifest, "dt_fine": cfg.dt,
                "n_paths": cfg.n_paths, "schemes": schemes},
               out / "converge.json")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage problems are config errors: exit 1
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lzhomodyne",
                     description="Monitored Landau-Zener sweeps of a decaying qubit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
            ("trajectory", "one monitored trajectory to CSV"),
            ("unconditional", "deterministic master equation to CSV"),
            ("unitary", "lossless sweep reference to CSV"),
            ("ensemble", "trajectory ensemble to stats.json + summaries.csv"),
            ("converge", "strong-convergence table for both steppers")]:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, type=Path,
                         help="JSON config file")
        cmd.add_argument("--out", type=Path, default=None,
                         help="output directory (default: out_dir from config)")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override master_seed from the config")
        if name == "ensemble":
            cmd.add_argument("--threads", type=int, default=1,
                             help="worker threads; affects speed, never results")
        if name == "trajectory":
            cmd.add_argument("--index", type=int, default=0,
                             help="trajectory index (selects the noise stream)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    started = time.monotonic()
    try:
        args = build_parser().parse_args(argv)
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        cfg = parse_config(text)
        if args.seed is not None:
            if not (0 <= args.seed < 2**64):
                raise ConfigError(f"--seed must fit in uint64, got {args.seed}")
            cfg = replace(cfg, master_seed=args.seed)
        out = args.out if args.out is not None else Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        manifest = manifest_for(cfg, args.command)

        if args.command == "trajectory":
            _cmd_trajectory(cfg, out, args.index)
        elif args.command == "unconditional":
            _cmd_unconditional(cfg, out)
        elif args.command == "unitary":
            _cmd_unitary(cfg, out)
        elif args.command == "ensemble":
            if args.threads < 1:
                raise ConfigError(f"--threads must be >= 1, got {args.threads}")
            _cmd_ensemble(cfg, out, args.threads, manifest)
        elif args.command == "converge":
            _cmd_converge(cfg, out, manifest)
        _write_manifest(manifest, out, started)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NonPhysicalState as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueOutOfRange, IndivisibleFactor, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
