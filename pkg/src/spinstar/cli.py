"""``spinstar`` command line front end.

Exit codes: 0 success, 2 usage or configuration error, 3 model-assumption
violation, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import closed_form as cf
from .entanglement import reduced_pair_density, wootters_concurrence
from .estimation import (
    EstimationError,
    ProbabilitySeries,
    estimate_coupling_ratios,
    fit_collective_coupling,
    simulate_ratio_sampling,
    simulate_survival_sampling,
)
from .model import (
    ModelAssumptionError,
    ParamsError,
    SpinStarParams,
    load_params,
    rabi_frequency,
    uniform_params,
)
from .protocol import (
    binomial_sigma,
    make_stream,
    postselected_ladder,
    prepare_w_like,
    run_ladder,
    trajectory_seeds,
)
from .sector import SectorState, evolve_sector_grid, expectation_j2, expectation_jz, initial_state

DEFAULT_SEED = 20081
SEED_ENV = "SPINSTAR_SEED"
CSV_VERSION = "1"

EXIT_OK, EXIT_USAGE, EXIT_MODEL, EXIT_NUMERIC = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, Any] = {
    "t_min": 0.0,
    "t_max": 10.0,
    "points": 101,
    "format": "csv",
    "trajectories": 1000,
    "n": 0,
    "shots": 1000,
    "x_max": 4e-3,
    "mode": "frequency",
}
COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "robustness": {"n": 100, "points": 801},
    "wstate": {"format": "json"},
    "ladder": {"format": "json"},
}


@dataclass
class RunConfig:
    """Resolved options for one subcommand run."""

    command: str
    values: dict[str, Any]

    def __getattr__(self, name):
        try:
            return self.values[name]
        except KeyError:
            raise AttributeError(name) from None

    def time_grid(self) -> np.ndarray:
        t_min, t_max, points = float(self.t_min), float(self.t_max), int(self.points)
        if not t_min < t_max:
            raise ConfigError(f"time grid needs t_min < t_max, got {t_min} and {t_max}")
        if points < 2:
            raise ConfigError("time grid needs at least 2 points")
        return np.linspace(t_min, t_max, points)

    def params(self) -> SpinStarParams:
        path = self.values.get("params")
        if path is None:
            raise ConfigError("--params is required")
        if not Path(path).is_file():
            raise ConfigError(f"params file not found: {path}")
        return load_params(path)


def resolve_config(args: argparse.Namespace, environ=os.environ) -> RunConfig:
    """Merge flags, an optional JSON config file and defaults, in that order."""
    from_file: dict[str, Any] = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            from_file = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(from_file, dict):
            raise ConfigError("config file must hold a JSON object")
    values = dict(DEFAULTS)
    values.update(COMMAND_DEFAULTS.get(args.command, {}))
    values["seed"] = DEFAULT_SEED
    values.update({k.replace("-", "_"): v for k, v in from_file.items()})
    if environ.get(SEED_ENV):
        try:
            values["seed"] = int(environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer") from None
    for key, value in vars(args).items():
        if value is not None and key not in ("func", "config"):
            values[key] = value
    if int(values["seed"]) < 0:
        raise ConfigError("seed must be non-negative")
    return RunConfig(args.command, values)


# --- output helpers ------------------------------------------------------------


def _num(x) -> Any:
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    return float(x)


def _fmt(x) -> str:
    x = _num(x)
    return repr(x) if isinstance(x, float) else str(x)


def _write_table(out, cfg: RunConfig, header: list[str], rows, footer: dict | None = None) -> None:
    if cfg.format == "json":
        doc = {
            "command": cfg.command,
            "version": CSV_VERSION,
            "columns": header,
            "rows": [[_num(v) for v in row] for row in rows],
        }
        if footer is not None:
            doc["footer"] = footer
        out.write(json.dumps(doc) + "\n")
        return
    out.write(f"# spinstar {cfg.command} v{CSV_VERSION}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    if footer is not None:
        out.write("# footer " + json.dumps(footer) + "\n")


def _write_trajectories(out, cfg: RunConfig, records, summary: dict) -> None:
    if cfg.format == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["seed", "succeeded", "times", "outcomes", "probabilities"])
        for rec in records:
            w.writerow([
                rec.seed,
                int(rec.succeeded),
                ";".join(repr(t) for t, _, _ in rec.steps),
                ";".join(str(o) for _, o, _ in rec.steps),
                ";".join(repr(p) for _, _, p in rec.steps),
            ])
        out.write("# summary " + json.dumps(summary) + "\n")
        return
    for rec in records:
        out.write(json.dumps(rec.to_json()) + "\n")
    out.write(json.dumps({"summary": summary}) + "\n")


# --- subcommands -----------------------------------------------------------------


def cmd_simulate(cfg: RunConfig, out) -> int:
    params = cfg.params()
    times = cfg.time_grid()
    a, b = cf.amplitudes_on_grid(params, times)
    n = params.n_spins
    header = ["t", "re_a", "im_a", "p_success", "p_survival"] + [f"abs_b{j}" for j in range(1, n + 1)]
    columns = [times, a.real, a.imag,
               [cf.success_probability(params, t) for t in times],
               [cf.survival_probability(params, t) for t in times]]
    columns += [np.abs(b[:, j]) for j in range(n)]
    footer = None
    if cfg.values.get("with_oracle"):
        amps = evolve_sector_grid(params, initial_state(params), times)
        oa, ob = amps[:, 0], amps[:, 1:]
        header += ["oracle_re_a", "oracle_im_a"] + [f"oracle_abs_b{j}" for j in range(1, n + 1)]
        columns += [oa.real, oa.imag] + [np.abs(ob[:, j]) for j in range(n)]
        dev = max(float(np.max(np.abs(a - oa))), float(np.max(np.abs(b - ob))))
        footer = {"max_abs_closed_minus_oracle": dev}
    _write_table(out, cfg, header, zip(*columns), footer)
    return EXIT_OK


def cmd_wstate(cfg: RunConfig, out) -> int:
    params = cfg.params()
    if rabi_frequency(params) == 0.0 or params.sum_alpha_sq == 0.0:
        raise ModelAssumptionError("all couplings vanish; the W-like protocol can never succeed")
    t = cfg.values.get("time")
    t = float(t) if t is not None else cf.optimal_times(params, int(cfg.n))
    count = int(cfg.trajectories)
    if count < 1:
        raise ConfigError("--trajectories must be >= 1")
    records = [prepare_w_like(params, t, s) for s in trajectory_seeds(cfg.seed, count)]
    wins = sum(r.succeeded for r in records)
    predicted = cf.success_probability(params, t)
    summary = {
        "seed": int(cfg.seed),
        "time": t,
        "trajectories": count,
        "successes": wins,
        "empirical_success_rate": wins / count,
        "predicted_success_probability": predicted,
        "binomial_sigma": binomial_sigma(predicted, count),
    }
    _write_trajectories(out, cfg, records, summary)
    return EXIT_OK


def _parse_schedule(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse schedule {text!r}") from None


def cmd_ladder(cfg: RunConfig, out) -> int:
    params = cfg.params()
    if not params.is_uniform:
        raise ModelAssumptionError(
            "the ladder protocol assumes every bath spin has the same coupling; got "
            + ", ".join(repr(a) for a in params.couplings)
        )
    if params.detuning != 0.0:
        raise ModelAssumptionError("the ladder protocol assumes zero detuning")
    n_spins, alpha = params.n_spins, params.couplings[0]
    k = int(cfg.values.get("k") or n_spins)
    if not 1 <= k <= n_spins:
        raise ConfigError(f"--k must lie in 1..{n_spins}")
    schedule = cfg.values.get("schedule")
    if schedule is None:
        schedule = [cf.ladder_optimal_time(n_spins, i, alpha, int(cfg.n)) for i in range(1, k + 1)]
    elif isinstance(schedule, str):
        schedule = _parse_schedule(schedule)
    schedule = [float(x) for x in schedule]
    if len(schedule) != k:
        raise ConfigError(f"schedule has {len(schedule)} times but k={k}")
    count = int(cfg.trajectories)
    if count < 1:
        raise ConfigError("--trajectories must be >= 1")
    records = [run_ladder(n_spins, alpha, k, schedule, s) for s in trajectory_seeds(cfg.seed, count)]
    wins = sum(r.succeeded for r in records)
    predicted = cf.ladder_success_probability(n_spins, alpha, schedule)
    _, branch = postselected_ladder(n_spins, alpha, schedule)
    summary = {
        "seed": int(cfg.seed),
        "schedule": schedule,
        "k": k,
        "trajectories": count,
        "successes": wins,
        "empirical_success_rate": wins / count,
        "predicted_success_probability": predicted,
        "binomial_sigma": binomial_sigma(predicted, count),
        "final_j2": expectation_j2(branch),
        "final_jz": expectation_jz(branch),
        "target_j2": n_spins / 2 * (n_spins / 2 + 1),
        "target_jz": -n_spins / 2 + k,
    }
    _write_trajectories(out, cfg, records, summary)
    return EXIT_OK


def cmd_concurrence(cfg: RunConfig, out) -> int:
    params = cfg.params()
    i, j = cfg.values.get("i"), cfg.values.get("j")
    if i is None or j is None:
        raise ConfigError("--i and --j are required")
    i, j = int(i), int(j)
    n = params.n_spins
    if i == j or not (1 <= i <= n and 1 <= j <= n):
        raise ConfigError(f"--i and --j must be distinct spin indices in 1..{n}")
    times = cfg.time_grid()
    state0 = initial_state(params)
    amps = evolve_sector_grid(params, state0, times)
    rows = []
    for t, vec in zip(times, amps):
        closed = cf.pair_concurrence(params, i, j, t)
        oracle = wootters_concurrence(reduced_pair_density(SectorState(state0.basis, vec), i, j))
        rows.append((t, closed, oracle, abs(closed - oracle)))
    footer = {"max_abs_diff": max(r[3] for r in rows), "max_closed": max(r[1] for r in rows)}
    _write_table(out, cfg, ["t", "closed_form", "oracle", "abs_diff"], rows, footer)
    return EXIT_OK


def cmd_estimate(cfg: RunConfig, out) -> int:
    from_file = cfg.values.get("from_file")
    synthesize = bool(cfg.values.get("synthesize"))
    if bool(from_file) == synthesize:
        raise ConfigError("give exactly one of --from-file or --synthesize")
    rng = make_stream(int(cfg.seed))
    if cfg.mode == "ratios":
        if from_file:
            try:
                counts = [int(c) for c in json.loads(Path(from_file).read_text())["counts"]]
            except (OSError, KeyError, ValueError, TypeError) as exc:
                raise ConfigError(f"cannot read counts from {from_file}: {exc}") from exc
        else:
            params = cfg.params()
            counts = simulate_ratio_sampling(params, int(cfg.shots), rng)
        est = estimate_coupling_ratios(counts)
        est.diagnostics["counts"] = counts
    elif cfg.mode == "frequency":
        if from_file:
            path = Path(from_file)
            if not path.is_file():
                raise ConfigError(f"series file not found: {path}")
            with open(path) as fh:
                series = ProbabilitySeries.read_csv(io.StringIO(
                    "".join(line for line in fh if not line.startswith("#"))
                ))
        else:
            params = cfg.params()
            times = cfg.time_grid()
            omega = rabi_frequency(params)
            dt = float(np.max(np.diff(times)))
            if omega > 0 and dt > math.pi / (2 * omega):
                raise EstimationError(
                    f"sampling interval {dt:.4g} exceeds pi/(2 Omega) = {math.pi / (2 * omega):.4g}; "
                    "the synthesized series would be aliased"
                )
            shots = int(cfg.shots)
            series = simulate_survival_sampling(
                params, times, max(shots, 1), rng, exact=shots == 0,
                allow_detuning=bool(cfg.values.get("fit_floor")),
            )
            series_out = cfg.values.get("series_out")
            if series_out:
                with open(series_out, "w") as fh:
                    series.write_csv(fh)
        est = fit_collective_coupling(series, fit_floor=bool(cfg.values.get("fit_floor")))
        n_spins = cfg.values.get("n_spins")
        if n_spins:
            est.diagnostics["per_spin_scale_order_of_magnitude"] = est.per_spin_scale(int(n_spins))
    else:
        raise ConfigError(f"unknown estimate mode {cfg.mode!r}")
    out.write(json.dumps(est.to_json(), indent=2) + "\n")
    return EXIT_OK


def cmd_robustness(cfg: RunConfig, out) -> int:
    # for zero detuning the curve does not depend on the couplings
    params = cfg.params() if cfg.values.get("params") else uniform_params(1, 1.0)
    n = int(cfg.n)
    x_max = float(cfg.x_max)
    points = int(cfg.points)
    if x_max <= 0 or points < 2:
        raise ConfigError("--x-max must be positive and --points >= 2")
    xs = np.linspace(-x_max, x_max, points)
    rows = [(x, cf.timing_robustness(params, n, x)) for x in xs]
    _write_table(out, cfg, ["x", "p_success"], rows)
    return EXIT_OK


# --- argument parsing ------------------------------------------------------------


def _common(p: argparse.ArgumentParser, grid: bool = True) -> None:
    p.add_argument("--params", help="parameter JSON file")
    p.add_argument("--config", help="JSON file with option defaults (flags take precedence)")
    p.add_argument("--seed", type=int, help=f"base seed (default {DEFAULT_SEED}, or ${SEED_ENV})")
    p.add_argument("--output", "-o", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"))
    if grid:
        p.add_argument("--t-min", type=float, dest="t_min")
        p.add_argument("--t-max", type=float, dest="t_max")
        p.add_argument("--points", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinstar",
        description="Spin-star dynamics, conditional state preparation and coupling estimation.",
        epilog=f"The default seed can be overridden with the {SEED_ENV} environment variable.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="closed-form amplitudes and probabilities on a time grid")
    _common(p)
    p.add_argument("--with-oracle", action="store_true", default=None, dest="with_oracle")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("wstate", help="conditional W-like state preparation trajectories")
    _common(p, grid=False)
    p.add_argument("--time", type=float, help="measurement time (default: optimal time t_n)")
    p.add_argument("--n", type=int, help="index of the optimal time (default 0)")
    p.add_argument("--trajectories", type=int)
    p.set_defaults(func=cmd_wstate)

    p = sub.add_parser("ladder", help="iterated Dicke ladder protocol")
    _common(p, grid=False)
    p.add_argument("--k", type=int, help="number of ladder steps (default N)")
    p.add_argument("--schedule", help="comma separated measurement times (default: optimal)")
    p.add_argument("--n", type=int, help="index of the optimal time for every step (default 0)")
    p.add_argument("--trajectories", type=int)
    p.set_defaults(func=cmd_ladder)

    p = sub.add_parser("concurrence", help="pair concurrence, closed form against the density-matrix oracle")
    _common(p)
    p.add_argument("--i", type=int)
    p.add_argument("--j", type=int)
    p.set_defaults(func=cmd_concurrence)

    p = sub.add_parser("estimate", help="estimate couplings from survival or readout statistics")
    _common(p)
    p.add_argument("--mode", choices=("frequency", "ratios"))
    p.add_argument("--from-file", dest="from_file", help="series CSV (frequency) or counts JSON (ratios)")
    p.add_argument("--synthesize", action="store_true", default=None)
    p.add_argument("--shots", type=int, help="shots per point (frequency, 0 = noiseless) or total (ratios)")
    p.add_argument("--series-out", dest="series_out", help="write the synthesized series CSV here")
    p.add_argument("--fit-floor", action="store_true", default=None, dest="fit_floor")
    p.add_argument("--n-spins", type=int, dest="n_spins", help="report sqrt(sum alpha^2 / N) as a per-spin scale")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("robustness", help="success probability against relative timing error")
    _common(p, grid=False)
    p.add_argument("--n", type=int, help="optimal-time index (default 100)")
    p.add_argument("--x-max", type=float, dest="x_max")
    p.add_argument("--points", type=int)
    p.set_defaults(func=cmd_robustness)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    func: Callable = args.func
    try:
        cfg = resolve_config(args)
        buf = io.StringIO()
        code = func(cfg, buf)
    except ModelAssumptionError as exc:
        print(f"spinstar {args.command}: model assumption violated: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (ConfigError, ParamsError, ValueError, OSError) as exc:
        print(f"spinstar {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EstimationError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"spinstar {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    output = cfg.values.get("output")
    if output:
        Path(output).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return code


if __name__ == "__main__":
    sys.exit(main())
