"""Experiment command line: single runs, temperature sweeps, lookahead
comparisons and sequential-vs-interleaved receding-horizon studies.

Subcommands: ``run``, ``sweep-alpha``, ``rh-compare``, ``rh-seq-vs-par``,
``validate``.  Results are written as CSV traces plus JSON result
documents; all floating-point output carries 17 significant digits so
values round-trip losslessly.  Files are written atomically (temp file
then rename).  Exit codes: 0 success, 2 configuration error, 3 I/O
failure, 4 nonconvergence when --require-convergence is set.

A JSON config file (same field names as the flags) may replace flags;
explicitly passed flags override file values.  The environment variable
``MFG_OUTPUT_DIR`` provides the default output directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .algorithms import (
    SolverConfig,
    SolverResult,
    gfp,
    gfpi,
    rh_parallel,
    rh_sequential,
)
from .games import (
    GameFormatError,
    PRNG_ALGORITHM,
    RandomMfgParams,
    RpsParams,
    SisParams,
    load_game,
    make_random,
    make_rps,
    make_sis,
)
from .metrics import delta_equilibrium, policy_distance
from .model import MfgModel, Policy, validate_model
from .operators import Concept

TRACE_HEADER = "iter,delta_qpire,delta_qstarre,delta_re,exploitability,reg_exploitability,wall_time_s"

_EXIT_OK = 0
_EXIT_CONFIG = 2
_EXIT_IO = 3
_EXIT_NONCONVERGED = 4


class ConfigError(ValueError):
    """Invalid flag, config-file field or game parameter."""


@dataclass
class ExperimentConfig:
    game: str = "sis"
    algorithm: str = "gfp"
    concept: str = "re"
    alpha: float = 1.0
    beta: float = 0.95
    iterations: int = 1000
    tolerance: float = 1e-3
    horizon_rh: int | None = None
    seed: int = 0
    output_dir: str = ""
    trace_every: int = 1
    require_convergence: bool = False
    game_params: dict = field(default_factory=dict)
    alpha_list: list = field(default_factory=list)
    horizon_list: list = field(default_factory=list)

    def __post_init__(self):
        if not self.output_dir:
            self.output_dir = os.environ.get("MFG_OUTPUT_DIR", ".")


_ALGORITHMS = {"gfpi": gfpi, "gfp": gfp, "rh-seq": rh_sequential, "rh-par": rh_parallel}
_GAME_PARAM_TYPES = {"sis": SisParams, "rps": RpsParams, "random": RandomMfgParams}


def _fmt(value: float) -> str:
    return f"{float(value):.17g}"


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.parent / f".{path.name}.tmp"
    tmp.write_text(text)
    os.replace(tmp, path)


def build_model(config: ExperimentConfig) -> MfgModel:
    """Construct the configured game, raising ConfigError on bad input."""
    game = config.game
    if game.startswith("file:"):
        return load_game(game[len("file:"):])
    if game not in _GAME_PARAM_TYPES:
        raise ConfigError(f"invalid value for --game: {game!r} "
                          "(expected sis, rps, random or file:<path>)")
    params = dict(config.game_params)
    if game == "random":
        params.setdefault("seed", config.seed)
    try:
        param_obj = _GAME_PARAM_TYPES[game](**params)
    except TypeError as exc:
        raise ConfigError(f"invalid game parameter for {game}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"invalid game parameter for {game}: {exc}") from None
    return {"sis": make_sis, "rps": make_rps, "random": make_random}[game](param_obj)


def build_solver_config(config: ExperimentConfig, **overrides) -> SolverConfig:
    kwargs = dict(
        concept=config.concept,
        alpha=config.alpha,
        beta=config.beta,
        max_iterations=config.iterations,
        tolerance=config.tolerance,
        horizon_rh=config.horizon_rh,
        trace_every=config.trace_every,
    )
    kwargs.update(overrides)
    try:
        return SolverConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _solve(model: MfgModel, config: ExperimentConfig, solver_config: SolverConfig,
           **solver_kwargs) -> SolverResult:
    if config.algorithm not in _ALGORITHMS:
        raise ConfigError(f"invalid value for --algorithm: {config.algorithm!r}")
    if config.algorithm.startswith("rh-") and solver_config.horizon_rh is None:
        raise ConfigError("--horizon-rh is required for receding-horizon algorithms")
    return _ALGORITHMS[config.algorithm](model, solver_config, **solver_kwargs)


def trace_csv(result: SolverResult) -> str:
    trace = result.trace
    lines = [TRACE_HEADER]
    for i in range(len(trace)):
        lines.append(",".join([
            str(int(trace.iterations[i])),
            _fmt(trace.delta_qpire[i]),
            _fmt(trace.delta_qstarre[i]),
            _fmt(trace.delta_re[i]),
            _fmt(trace.exploitability[i]),
            _fmt(trace.reg_exploitability[i]),
            _fmt(trace.wall_time_seconds[i]),
        ]))
    return "\n".join(lines) + "\n"


def _result_document(model: MfgModel, config: ExperimentConfig,
                     result: SolverResult) -> dict:
    trace = result.trace
    final_metrics = {name: float(getattr(trace, name)[-1])
                     for name in trace.METRIC_COLUMNS}
    final_delta = delta_equilibrium(model, result.final_policy, config.alpha,
                                    Concept(config.concept))
    return {
        "config": dataclasses.asdict(config),
        "prng": PRNG_ALGORITHM if config.game == "random" else None,
        "concept": config.concept,
        "converged": bool(result.converged),
        "iterations_used": int(result.iterations_used),
        "final_delta": final_delta,
        "final_metrics": final_metrics,
        "final_policy": result.final_policy.probs.tolist(),
    }


def _write_run_outputs(model: MfgModel, config: ExperimentConfig,
                       result: SolverResult, out: Path) -> list[Path]:
    written = []
    trace_path = out / "trace.csv"
    _write_atomic(trace_path, trace_csv(result))
    written.append(trace_path)
    result_path = out / "result.json"
    _write_atomic(result_path, json.dumps(
        _result_document(model, config, result), indent=2) + "\n")
    written.append(result_path)
    if result.ensemble is not None:
        ensemble_path = out / "ensemble.json"
        _write_atomic(ensemble_path, json.dumps({
            "horizon_rh": result.ensemble.horizon,
            "total_horizon": result.ensemble.total_horizon,
            "start_times": list(result.ensemble.start_times),
            "members": [m.probs.tolist() for m in result.ensemble.members],
            "implemented_policy": result.implemented_policy.probs.tolist(),
            "subgame_iterations": list(result.subgame_iterations),
        }, indent=2) + "\n")
        written.append(ensemble_path)
    return written


def cmd_run(config: ExperimentConfig) -> int:
    model = build_model(config)
    result = _solve(model, config, build_solver_config(config))
    out = Path(config.output_dir)
    written = _write_run_outputs(model, config, result, out)
    print(f"{config.algorithm} on {config.game} [{config.concept}]: "
          f"converged={result.converged} iterations={result.iterations_used}")
    for path in written:
        print(f"wrote {path}")
    if config.require_convergence and not result.converged:
        print("error: run did not reach tolerance", file=sys.stderr)
        return _EXIT_NONCONVERGED
    return _EXIT_OK


def cmd_sweep_alpha(config: ExperimentConfig) -> int:
    if not config.alpha_list:
        raise ConfigError("--alpha-list must name at least one temperature")
    if config.algorithm not in ("gfpi", "gfp"):
        raise ConfigError("sweep-alpha supports --algorithm gfpi or gfp")
    model = build_model(config)
    lines = ["alpha,concept,state,action,prob,converged"]
    for alpha in config.alpha_list:
        for concept in (Concept.QPI_RE, Concept.QSTAR_RE, Concept.RE):
            solver_config = build_solver_config(config, concept=concept, alpha=float(alpha))
            result = _ALGORITHMS[config.algorithm](model, solver_config)
            first_step = result.final_policy.probs[0]
            for x in range(model.num_states):
                for u in range(model.num_actions):
                    lines.append(",".join([
                        _fmt(alpha), concept.value, str(x), str(u),
                        _fmt(first_step[x, u]), str(int(result.converged)),
                    ]))
            if not result.converged:
                print(f"note: alpha={alpha} concept={concept.value} did not converge",
                      file=sys.stderr)
    out = Path(config.output_dir) / "simplex.csv"
    _write_atomic(out, "\n".join(lines) + "\n")
    print(f"wrote {out}")
    return _EXIT_OK


def cmd_rh_compare(config: ExperimentConfig) -> int:
    if not config.horizon_list:
        raise ConfigError("--horizon-list must name at least one lookahead horizon")
    model = build_model(config)
    reference = gfp(model, build_solver_config(config, horizon_rh=None))
    rh_solver = rh_sequential if config.algorithm == "rh-seq" else rh_parallel
    lines = ["horizon,iter,distance"]
    for horizon in config.horizon_list:
        horizon = int(horizon)
        rows: list[tuple[int, float]] = []

        def on_iteration(k: int, implemented: Policy) -> None:
            rows.append((k, policy_distance(implemented, reference.final_policy)))

        solver_config = build_solver_config(
            config, horizon_rh=horizon,
            trace_every=max(config.trace_every, config.iterations))
        rh_solver(model, solver_config, iteration_callback=on_iteration)
        for k, distance in rows:
            lines.append(f"{horizon},{k},{_fmt(distance)}")
    out = Path(config.output_dir) / "rh.csv"
    _write_atomic(out, "\n".join(lines) + "\n")
    print(f"wrote {out}")
    return _EXIT_OK


def cmd_rh_seq_vs_par(config: ExperimentConfig) -> int:
    if config.horizon_rh is None:
        raise ConfigError("--horizon-rh is required for rh-seq-vs-par")
    model = build_model(config)
    solver_config = build_solver_config(
        config, trace_every=max(config.trace_every, config.iterations))
    lines = ["variant,subgame,iterations"]
    for variant, solver in (("sequential", rh_sequential), ("parallel", rh_parallel)):
        result = solver(model, solver_config)
        for start, count in zip(result.ensemble.start_times, result.subgame_iterations):
            lines.append(f"{variant},{start},{count}")
        total = (sum(result.subgame_iterations) if variant == "sequential"
                 else result.iterations_used)
        lines.append(f"{variant},total,{total}")
    out = Path(config.output_dir) / "seqpar.csv"
    _write_atomic(out, "\n".join(lines) + "\n")
    print(f"wrote {out}")
    return _EXIT_OK


def cmd_validate(game_path: str) -> int:
    model = load_game(game_path)
    probes = [np.full(model.num_states, 1.0 / model.num_states)]
    probes.extend(np.eye(model.num_states))
    report = validate_model(model, probes)
    print(report)
    return _EXIT_OK


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, metavar="FILE",
                        help="JSON config file; flags override its values")
    parser.add_argument("--game", default=None,
                        help="sis | rps | random | file:<path>")
    parser.add_argument("--algorithm", default=None,
                        help="gfpi | gfp | rh-seq | rh-par")
    parser.add_argument("--concept", default=None,
                        choices=[c.value for c in Concept])
    parser.add_argument("--alpha", type=float, default=None)
    parser.add_argument("--beta", type=float, default=None)
    parser.add_argument("--iterations", type=int, default=None)
    parser.add_argument("--tolerance", type=float, default=None)
    parser.add_argument("--horizon-rh", type=int, default=None, dest="horizon_rh")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--output-dir", default=None, dest="output_dir")
    parser.add_argument("--trace-every", type=int, default=None, dest="trace_every")
    parser.add_argument("--require-convergence", action="store_const", const=True,
                        default=None, dest="require_convergence")
    parser.add_argument("--param", action="append", default=None, metavar="KEY=VALUE",
                        help="game parameter, repeatable (e.g. --param horizon=10)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfglearn",
        description="Mean field game equilibrium experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve one game and write trace/result files")
    _add_common_flags(run)

    sweep = sub.add_parser("sweep-alpha",
                           help="solve the three softmax concepts over a temperature list")
    _add_common_flags(sweep)
    sweep.add_argument("--alpha-list", default=None, dest="alpha_list",
                       help="comma-separated temperatures, e.g. 0.01,1.0,1e6")

    rhc = sub.add_parser("rh-compare",
                         help="distance of receding-horizon solutions to the full-horizon one")
    _add_common_flags(rhc)
    rhc.add_argument("--horizon-list", default=None, dest="horizon_list",
                     help="comma-separated lookahead horizons, e.g. 1,3,5,9")

    svp = sub.add_parser("rh-seq-vs-par",
                         help="per-subgame iteration counts of both receding-horizon variants")
    _add_common_flags(svp)

    val = sub.add_parser("validate", help="probe a game file for defects")
    val.add_argument("game_path", help="path to a JSON game file")
    return parser


def _parse_param_entries(entries: list[str]) -> dict:
    params = {}
    for entry in entries:
        key, sep, raw = entry.partition("=")
        if not sep or not key:
            raise ConfigError(f"invalid --param {entry!r}, expected KEY=VALUE")
        try:
            params[key] = json.loads(raw)
        except json.JSONDecodeError:
            params[key] = raw
    return params


def _parse_number_list(raw, flag: str) -> list[float]:
    if isinstance(raw, (list, tuple)):
        return [float(v) for v in raw]
    try:
        return [float(part) for part in str(raw).split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"invalid value for {flag}: {raw!r}") from None


def _load_config_file(path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config file must hold a JSON object")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key in doc:
        if key not in known:
            raise ConfigError(f"{path}: unknown config field {key!r}")
    return doc


def build_experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    """Merge defaults, config-file values and explicitly passed flags."""
    merged: dict = {}
    if getattr(args, "config", None):
        merged.update(_load_config_file(args.config))
    for config_field in dataclasses.fields(ExperimentConfig):
        value = getattr(args, config_field.name, None)
        if value is not None:
            merged[config_field.name] = value
    if getattr(args, "param", None):
        file_params = dict(merged.get("game_params", {}))
        file_params.update(_parse_param_entries(args.param))
        merged["game_params"] = file_params
    if "alpha_list" in merged and merged["alpha_list"]:
        merged["alpha_list"] = _parse_number_list(merged["alpha_list"], "--alpha-list")
    if "horizon_list" in merged and merged["horizon_list"]:
        merged["horizon_list"] = [
            int(v) for v in _parse_number_list(merged["horizon_list"], "--horizon-list")]
    try:
        return ExperimentConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else _EXIT_OK
    try:
        if args.command == "validate":
            return cmd_validate(args.game_path)
        config = build_experiment_config(args)
        if args.command == "run":
            return cmd_run(config)
        if args.command == "sweep-alpha":
            return cmd_sweep_alpha(config)
        if args.command == "rh-compare":
            return cmd_rh_compare(config)
        if args.command == "rh-seq-vs-par":
            return cmd_rh_seq_vs_par(config)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, GameFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
