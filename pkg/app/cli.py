import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence, TextIO

from pydantic import ValidationError

from app.config import configure_logging, get_settings
from app.errors import PlannerError
from app.schemas.planner import ExpansionOrder, PlannerConfig
from app.schemas.reports import PlanResponse
from app.services.export_service import ExportService
from app.services.knowledge_base_service import KnowledgeBaseService
from app.services.planner_service import PlannerService
from app.services.scheduler_service import SchedulerService
from app.services.simulator_service import SimulatorService

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="python -m app",
        description="Plan, schedule and simulate test-action pairs for a probabilistic knowledge base.",
    )
    parser.add_argument("--log-level", default=None, help="logging level (default from settings)")
    commands = parser.add_subparsers(dest="command", required=True)

    planner = argparse.ArgumentParser(add_help=False)
    planner.add_argument("kb_path", type=Path, help="knowledge-base JSON file")
    planner.add_argument("--epsilon", type=float, default=None)
    planner.add_argument("--p1", dest="initial_p1", type=float, default=None, help="initial removal threshold")
    planner.add_argument("--max-expansions", type=int, default=None)
    planner.add_argument("--order", choices=[o.value for o in ExpansionOrder], default=None)
    planner.add_argument("--seed-order", dest="order_seed", type=int, default=None,
                         help="shuffle depth-first push order with this seed")
    planner.add_argument("-o", "--output", type=Path, default=None, help="write JSON/DOT here instead of stdout")

    validate = commands.add_parser("validate", help="list knowledge-base violations")
    validate.add_argument("kb_path", type=Path)

    plan = commands.add_parser("plan", parents=[planner], help="plan and schedule")
    plan.add_argument("--compare", action="store_true",
                      help="also tabulate probabilistic against depth-first expansion")
    plan.add_argument("--compare-seeds", type=int, default=10, help="depth-first orders to try with --compare")

    simulate = commands.add_parser("simulate", parents=[planner], help="Monte Carlo validation of the schedule")
    simulate.add_argument("--trials", type=int, default=None)
    simulate.add_argument("--seed", type=int, default=None)
    simulate.add_argument("--horizon", type=float, default=None)
    simulate.add_argument("--fires-per-cycle", type=int, default=None)
    simulate.add_argument("--trace-out", type=Path, default=None, help="per-trial traces as JSON lines")

    commands.add_parser("export-dot", parents=[planner], help="state graph in Graphviz DOT")
    return parser.parse_args(argv)


def _config(args: argparse.Namespace) -> PlannerConfig:
    return PlannerConfig.from_settings(
        epsilon=args.epsilon,
        initial_p1=args.initial_p1,
        max_expansions=args.max_expansions,
        order=args.order,
        order_seed=args.order_seed,
    )


def _emit(text: str, path: Optional[Path], stdout: TextIO) -> None:
    if path is None:
        stdout.write(text)
    else:
        path.write_text(text)


def _validate(args, stdout, stderr) -> int:
    kb = KnowledgeBaseService.build(args.kb_path.read_text())
    violations = KnowledgeBaseService.validate_knowledge_base(kb)
    stdout.write(json.dumps({"valid": not violations, "violations": violations}, indent=2, sort_keys=True) + "\n")
    return EXIT_FAILURE if violations else EXIT_OK


def _plan(args, stdout, stderr) -> int:
    kb = KnowledgeBaseService.load_path(args.kb_path)
    cfg = _config(args)
    graph, schedule = SchedulerService.plan_and_schedule(kb, cfg)
    response = PlanResponse(
        plan=ExportService.plan_report(graph),
        schedule=ExportService.schedule_report(schedule, kb),
    )
    _emit(ExportService.dump_json(response), args.output, stdout)
    summary_stream = stdout if args.output is not None else stderr
    summary_stream.write(ExportService.summary_table(graph, schedule))
    if args.compare:
        rows = PlannerService.compare_orders(kb, cfg, range(args.compare_seeds))
        summary_stream.write(ExportService.comparison_table(rows))
    return EXIT_OK


def _simulate(args, stdout, stderr) -> int:
    kb = KnowledgeBaseService.load_path(args.kb_path)
    graph, schedule = SchedulerService.plan_and_schedule(kb, _config(args))
    report = SimulatorService.estimate(
        graph,
        schedule,
        kb,
        n_trials=args.trials,
        horizon=args.horizon,
        seed=args.seed,
        fires_per_cycle=args.fires_per_cycle,
        keep_outcomes=args.trace_out is not None,
    )
    _emit(ExportService.dump_json(ExportService.simulation_report(report, kb)), args.output, stdout)
    if args.trace_out is not None:
        with args.trace_out.open("w") as f:
            f.writelines(ExportService.trace_lines(report, kb))
    return EXIT_OK


def _export_dot(args, stdout, stderr) -> int:
    kb = KnowledgeBaseService.load_path(args.kb_path)
    graph, _ = SchedulerService.plan_and_schedule(kb, _config(args))
    _emit(ExportService.to_dot(graph), args.output, stdout)
    return EXIT_OK


COMMANDS = {
    "validate": _validate,
    "plan": _plan,
    "simulate": _simulate,
    "export-dot": _export_dot,
}


def main(argv: Optional[Sequence[str]] = None, stdout: TextIO = None, stderr: TextIO = None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = _parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    configure_logging(args.log_level or get_settings().LOG_LEVEL)
    try:
        return COMMANDS[args.command](args, stdout, stderr)
    except PlannerError as e:
        logger.debug("command %s failed", args.command, exc_info=True)
        stderr.write(json.dumps(e.to_dict(), sort_keys=True, default=str) + "\n")
        return EXIT_FAILURE
    except (ValidationError, ValueError) as e:
        stderr.write(json.dumps({"error": "usage_error", "message": str(e)}) + "\n")
        return EXIT_USAGE
    except OSError as e:
        stderr.write(json.dumps({"error": "io_error", "message": str(e)}) + "\n")
        return EXIT_USAGE
