"""
Command layer: train, evaluate, sweep and oracle subcommands.

Every command reads a scenario (preset name or path), writes only under its
output directory and returns a process exit status: 0 on success, 2 for a
missing scenario file (and argparse usage errors), 1 for any other failure.
"""

import argparse
import json
from functools import partial
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Type

import pandas as pd
import yaml
from loguru import logger
from pydantic import BaseModel, ValidationError

from ..core.config import settings
from ..core.errors import CheckpointError, OffloadError
from ..core.job_queue import run_jobs
from ..models.jobs import SweepCell
from ..models.scenario import ScenarioConfig, load_scenario_file
from ..models.schedule import EvaluationReport, Schedule
from ..services.baselines import brute_force_oracle, cross_check, export_oracle_fixture, random_policy, uniform_policy
from ..services.dqn import DqnAgent, DqnHyper, dqn_train
from ..services.environment import OffloadingEnv
from ..services.figure_export import figure_exporter
from ..services.nn import load_checkpoint
from ..services.ppo import PpoAgent, PpoHyper, train
from ..services.timeline import write_timeline_csv
from ..services.training import evaluate_agent
from ..utils.provenance import write_csv
from ..utils.scenario_presets import get_presets, resolve_scenario

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_MISSING_SCENARIO = 2

BASELINES = ("random", "uniform", "oracle")
LEARNED = ("ppo", "dqn")
SWEEP_AXES = ("tasks", "reliability", "privacy")
METRIC_COLUMNS = ["T_total", "E", "r_failure", "P_total", "C"]
FLAG_COLUMNS = ["feasible_time", "feasible_reliability", "feasible_privacy", "feasible"]


class MissingScenarioError(OffloadError):
    """The scenario argument names neither a preset nor an existing file."""


# ----------------------------------------------------------------------
# Shared helpers
# ----------------------------------------------------------------------
def load_cli_scenario(name_or_path: str) -> ScenarioConfig:
    path = resolve_scenario(name_or_path)
    if not path.is_file():
        raise MissingScenarioError(f"Scenario file not found: {name_or_path}")
    return load_scenario_file(path)


def parse_seeds(text: str) -> List[int]:
    """Seeds as ``1,2,3`` or an inclusive range ``1..5``."""
    seeds: List[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            low, high = part.split("..", 1)
            seeds.extend(range(int(low), int(high) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise OffloadError("At least one seed is required")
    return seeds


def parse_values(text: str) -> List[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as e:
        raise OffloadError(f"Invalid sweep values: {text}") from e


def build_hyper(cls: Type[BaseModel], file: Optional[str], overrides: Dict[str, Any]) -> BaseModel:
    """Hyperparameters from an optional YAML file plus command-line overrides."""
    data: Dict[str, Any] = {}
    if file:
        try:
            loaded = yaml.safe_load(Path(file).read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as e:
            raise OffloadError(f"Cannot read hyperparameter file {file}: {e}") from e
        if not isinstance(loaded, dict):
            raise OffloadError(f"Hyperparameter file {file} must be a mapping")
        data.update(loaded)
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return cls(**data)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(p) for p in first.get("loc", ()))
        raise OffloadError(f"Invalid hyperparameter {field}: {first.get('msg')}") from e


def output_dir(args: argparse.Namespace, command: str) -> Path:
    path = Path(args.output_dir) if args.output_dir else settings.output_root / command
    path.mkdir(parents=True, exist_ok=True)
    return path


def report_row(report: EvaluationReport) -> Dict[str, Any]:
    row = report.summary()
    row["feasible"] = report.feasible
    return row


def load_agent(path: str):
    """
    Load a PPO or DQN agent, dispatching on the checkpoint kind.

    Raises:
        CheckpointError: if ``path`` is not an existing file or not a valid checkpoint
    """
    if not Path(path).is_file():
        raise CheckpointError(
            f"Policy '{path}' is neither a baseline ({', '.join(BASELINES)}) nor an existing checkpoint file"
        )
    kind = load_checkpoint(path).kind
    if kind == PpoAgent.kind:
        return PpoAgent.load(path)
    if kind == DqnAgent.kind:
        return DqnAgent.load(path)
    raise CheckpointError(f"Unknown checkpoint kind {kind}")


def check_fits(agent, cfg: ScenarioConfig) -> None:
    if cfg.num_tasks > agent.max_tasks or cfg.num_satellites > agent.max_satellites:
        raise CheckpointError(
            f"Checkpoint was built for N<={agent.max_tasks}, M<={agent.max_satellites}; "
            f"scenario has N={cfg.num_tasks}, M={cfg.num_satellites}"
        )


def run_policy(policy: str, cfg: ScenarioConfig, seed: int, pool_size: int = 1000, agent=None,
               train_steps: int = 2048, penalty: float = 100.0) -> Tuple[Schedule, EvaluationReport]:
    """
    Evaluate one policy on one (already reseeded) scenario.

    ``ppo``/``dqn`` use ``agent`` when given, otherwise a fresh agent is
    trained for ``train_steps`` on this scenario.
    """
    if policy == "random":
        result = random_policy(cfg, pool_size, seed)
        return result.schedule, result.report
    if policy == "uniform":
        result = uniform_policy(cfg)
        return result.schedule, result.report
    if policy == "oracle":
        result = brute_force_oracle(cfg).result
        return result.schedule, result.report
    if policy in LEARNED:
        if agent is None:
            agent = train_agent(policy, cfg, seed, train_steps, penalty)
        check_fits(agent, cfg)
        episode = evaluate_agent(agent, cfg, [cfg.rng_seed], penalty=penalty)[0]
        return episode.schedule, episode.report
    raise OffloadError(f"Unknown policy: {policy}")


def train_agent(policy: str, cfg: ScenarioConfig, seed: int, steps: int, penalty: float):
    factory = partial(OffloadingEnv, cfg, penalty=penalty)
    if policy == "ppo":
        hyper = PpoHyper(total_timesteps=steps, horizon=min(2048, steps), penalty=penalty)
        return train(factory, hyper, seed).agent
    hyper = DqnHyper(total_timesteps=steps, eval_interval=steps, penalty=penalty)
    return dqn_train(factory, hyper, seed).agent


def apply_axis(cfg: ScenarioConfig, axis: str, value: float) -> ScenarioConfig:
    """Scenario for one sweep value; percentages are converted to thresholds."""
    if axis == "tasks":
        return cfg.with_overrides(num_tasks=int(value), task_sizes=[])
    if axis == "reliability":
        return cfg.with_overrides(failure_threshold=1.0 - value / 100.0)
    if axis == "privacy":
        return cfg.with_overrides(privacy_threshold=value / 100.0)
    raise OffloadError(f"Unknown sweep axis: {axis}")


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------
def cmd_train(args: argparse.Namespace) -> int:
    """Train a PPO (or DQN) agent; writes checkpoint, training log and chart data."""
    cfg = load_cli_scenario(args.scenario)
    overrides = {
        "total_timesteps": args.steps,
        "lr_initial": args.lr,
        "lr_final": args.lr_final,
        "lr_mode": args.lr_mode,
        "penalty": args.penalty,
        "max_tasks": args.max_tasks,
        "max_satellites": args.max_satellites,
    }
    if args.algo == "ppo":
        overrides.update({
            "horizon": args.horizon,
            "epochs": args.epochs,
            "minibatch_size": args.minibatch,
            "entropy_coef": args.entropy_coef,
        })
        hyper = build_hyper(PpoHyper, args.hyper, overrides)
        trainer = train
    else:
        hyper = build_hyper(DqnHyper, args.hyper, overrides)
        trainer = dqn_train

    out = output_dir(args, "train")
    logger.info(f"🚀 Training {args.algo} for {hyper.total_timesteps} steps (seed {args.seed})")
    env_factory = partial(OffloadingEnv, cfg, hyper.max_tasks, hyper.max_satellites, hyper.penalty)
    result = trainer(env_factory, hyper, args.seed)

    result.agent.save(out / f"{args.algo}.ckpt")
    frame = result.frame()
    write_csv(frame, out / "training_log.csv", cfg, args.seed, {"algorithm": args.algo})
    figure = figure_exporter.training_figure({args.algo: frame})
    (out / "training_chart.json").write_text(
        json.dumps(figure_exporter.chartjs_config(figure), indent=2, sort_keys=True), encoding="utf-8"
    )

    final = result.log[-1]
    print(json.dumps({"algorithm": args.algo, **final}, sort_keys=True))
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    """Per-seed metrics of a checkpoint or baseline plus an aggregate row."""
    cfg = load_cli_scenario(args.scenario)
    seeds = parse_seeds(args.seeds)
    agent = None
    if args.policy in BASELINES:
        name = args.policy
    else:
        agent = load_agent(args.policy)
        check_fits(agent, cfg)
        name = agent.kind

    out = output_dir(args, "evaluate")
    rows = []
    for seed in seeds:
        seeded = cfg.reseeded(seed)
        schedule, report = run_policy(name, seeded, seed, args.pool_size, agent=agent, penalty=args.penalty)
        rows.append({"seed": str(seed), "policy": name, **report_row(report)})
        if args.timelines:
            write_timeline_csv(report, out / f"timeline_{name}_seed{seed}.csv", cfg, seed)
        logger.info(f"✅ {name} seed {seed}: C={report.cost:.4f} feasible={report.feasible}")

    frame = pd.DataFrame(rows)
    aggregate: Dict[str, Any] = {"seed": "aggregate", "policy": name}
    for column in METRIC_COLUMNS + FLAG_COLUMNS:
        values = frame[column].astype(float)
        aggregate[column] = float(values.mean())
        aggregate[f"{column}_std"] = float(values.std(ddof=0))
    frame = pd.concat([frame, pd.DataFrame([aggregate])], ignore_index=True)

    path = write_csv(frame, out / f"evaluate_{name}.csv", cfg, seeds)
    print(f"Wrote {path}")
    return EXIT_OK


def _sweep_cell(cell: SweepCell, cfg: ScenarioConfig, pool_size: int, agents: Dict[str, Any],
                train_steps: int, penalty: float) -> Dict[str, Any]:
    seeded = apply_axis(cfg, cell.axis, cell.value).reseeded(cell.seed)
    _, report = run_policy(cell.policy, seeded, cell.seed, pool_size, agents.get(cell.policy),
                           train_steps, penalty)
    return {**cell.to_dict(), **report_row(report)}


def sweep(cfg: ScenarioConfig, axis: str, values: Sequence[float], policies: Sequence[str],
          seeds: Sequence[int], pool_size: int = 1000, agents: Optional[Dict[str, Any]] = None,
          train_steps: int = 2048, penalty: float = 100.0, workers: Optional[int] = None) -> pd.DataFrame:
    """
    Evaluate the Cartesian product axis value x policy x seed.

    Cells run on the evaluation queue and are merged in submission order.
    """
    if axis not in SWEEP_AXES:
        raise OffloadError(f"Unknown sweep axis: {axis}")
    unknown = [p for p in policies if p not in BASELINES + LEARNED]
    if unknown:
        raise OffloadError(f"Unknown policies: {', '.join(unknown)}")
    for value in values:
        apply_axis(cfg, axis, value)

    cells = [SweepCell(axis, float(v), p, int(s)) for v in values for p in policies for s in seeds]
    processor = partial(_sweep_cell, cfg=cfg, pool_size=pool_size, agents=agents or {},
                        train_steps=train_steps, penalty=penalty)
    logger.info(f"📊 Sweeping {axis} over {len(cells)} cells")
    return pd.DataFrame(run_jobs(cells, processor, workers))


def cmd_sweep(args: argparse.Namespace) -> int:
    """Tidy CSV over axis value x policy x seed, plus Chart.js series per metric."""
    cfg = load_cli_scenario(args.scenario)
    seeds = parse_seeds(args.seeds)
    values = parse_values(args.values)
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]

    agents: Dict[str, Any] = {}
    if args.checkpoint:
        agent = load_agent(args.checkpoint)
        agents[agent.kind] = agent

    frame = sweep(cfg, args.axis, values, policies, seeds, args.pool_size, agents,
                  args.train_steps, args.penalty, args.workers)
    out = output_dir(args, "sweep")
    path = write_csv(frame, out / f"sweep_{args.axis}.csv", cfg, seeds, {"axis": args.axis})
    figure_exporter.export_sweep(frame, args.axis, out / f"sweep_{args.axis}.json")
    print(f"Wrote {path}")
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    """Exhaustive optimum, optional evaluator cross-check and JSON fixture export."""
    cfg = load_cli_scenario(args.scenario)
    out = output_dir(args, "oracle")
    result = brute_force_oracle(cfg, cap=args.cap)
    export_oracle_fixture(result, cfg, Path(args.export) if args.export else out / "oracle.json")

    best = result.result
    summary = {"count": result.count, "feasible_found": result.best is not None,
               "schedule": best.schedule.to_dict()["decisions"], **best.report.summary()}
    print(json.dumps(summary, sort_keys=True))

    if args.cross_check:
        mismatches = cross_check(cfg, cap=args.cap)
        if mismatches:
            logger.error(f"❌ Event enumerator disagrees on {mismatches} of {result.count} schedules")
            return EXIT_FAILURE
        logger.info(f"✅ Event enumerator agrees on all {result.count} schedules")
    return EXIT_OK


# ----------------------------------------------------------------------
# Parser and dispatch
# ----------------------------------------------------------------------
def register_commands(subparsers: argparse._SubParsersAction) -> None:
    """Register every subcommand with its flags."""
    common = argparse.ArgumentParser(add_help=False)
    names = ", ".join(p["name"] for p in get_presets())
    common.add_argument("--scenario", required=True, help=f"preset name ({names}) or scenario file")
    common.add_argument("--output-dir", default=None, help="output directory (default: $LEO_OFFLOAD_OUTPUT_ROOT/<command>)")
    common.add_argument("--penalty", type=float, default=100.0, help="terminal penalty per violated constraint")

    p = subparsers.add_parser("train", parents=[common], help="train a PPO or DQN agent")
    p.add_argument("--algo", choices=LEARNED, default="ppo")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=None, help="total training timesteps")
    p.add_argument("--lr", type=float, default=None, help="initial (or fixed) learning rate")
    p.add_argument("--lr-final", type=float, default=None)
    p.add_argument("--lr-mode", choices=("linear", "fixed"), default=None)
    p.add_argument("--horizon", type=int, default=None, help="PPO rollout length")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--minibatch", type=int, default=None)
    p.add_argument("--entropy-coef", type=float, default=None)
    p.add_argument("--max-tasks", type=int, default=None, help="padded task dimension")
    p.add_argument("--max-satellites", type=int, default=None, help="padded satellite dimension")
    p.add_argument("--hyper", default=None, help="YAML file of hyperparameters")
    p.set_defaults(handler=cmd_train)

    p = subparsers.add_parser("evaluate", parents=[common], help="evaluate a checkpoint or baseline")
    p.add_argument("--policy", required=True, help="checkpoint path or one of: " + ", ".join(BASELINES))
    p.add_argument("--seeds", default="0", help="e.g. 1,2,3 or 1..5")
    p.add_argument("--pool-size", type=int, default=1000, help="random policy pool size")
    p.add_argument("--timelines", action="store_true", help="also dump per-task timelines")
    p.set_defaults(handler=cmd_evaluate)

    p = subparsers.add_parser("sweep", parents=[common], help="parameter sweep over policies and seeds")
    p.add_argument("--axis", choices=SWEEP_AXES, required=True)
    p.add_argument("--values", required=True, help="comma-separated axis values (percent for thresholds)")
    p.add_argument("--policies", default="uniform,random", help="comma-separated policies")
    p.add_argument("--seeds", default="0")
    p.add_argument("--checkpoint", default=None, help="padded PPO/DQN checkpoint shared by all cells")
    p.add_argument("--train-steps", type=int, default=2048, help="per-cell training steps without a checkpoint")
    p.add_argument("--pool-size", type=int, default=1000)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(handler=cmd_sweep)

    p = subparsers.add_parser("oracle", parents=[common], help="exhaustive optimum on a small scenario")
    p.add_argument("--cap", type=int, default=None, help="maximum number of schedules to enumerate")
    p.add_argument("--cross-check", action="store_true", help="compare against the event-driven enumerator")
    p.add_argument("--export", default=None, help="JSON fixture path")
    p.set_defaults(handler=cmd_oracle)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leo-offload",
        description="Privacy-aware task offloading to a LEO constellation: training, evaluation and sweeps",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    register_commands(subparsers)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, dispatch, and map failures to exit statuses."""
    args = build_parser().parse_args(argv)
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except MissingScenarioError as e:
        logger.error(f"❌ {e}")
        return EXIT_MISSING_SCENARIO
    except OffloadError as e:
        logger.error(f"❌ {args.command} failed: {e}")
        return EXIT_FAILURE
