import json
import math
from typing import Iterable, Iterator, List, Optional

from pydantic import BaseModel

from app.models.knowledge_base import KnowledgeBase, StateVector
from app.models.plan import PlanGraph, PlannedState, StateClass, StateStatus
from app.models.probability import TransitionKind
from app.models.schedule import TapSchedule
from app.models.simulation import SimReport
from app.schemas.reports import (
    EdgeReport,
    EscalationReport,
    FrequencyReport,
    PlanReport,
    ScheduleReport,
    SimulationReport,
    StateReport,
    TapReport,
)


def _finite(value: Optional[float]) -> Optional[float]:
    if value is None or math.isinf(value):
        return None
    return value


def _gvquote(s: str) -> str:
    return '"{}"'.format(s.replace('"', r"\""))


class ExportService:
    """JSON, DOT and tabular renderings of plans, schedules and simulation reports."""

    @staticmethod
    def dump_json(model: BaseModel) -> str:
        """Deterministic JSON: sorted keys, fixed indentation."""
        return json.dumps(model.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"

    @staticmethod
    def _state_report(state: PlannedState, kb: KnowledgeBase) -> StateReport:
        return StateReport(
            state=kb.assignment(state.vector),
            failed=state.vector.failed,
            prob=state.prob,
            status=state.status.value,
            state_class=state.state_class.value,
            chosen_action=state.chosen_action.name if state.chosen_action else None,
            action_kind=state.action_kind.value,
            critical_time=_finite(state.critical_time),
            discarded_mass=state.discarded_mass,
            expansion_index=state.expansion_index,
        )

    @staticmethod
    def plan_report(graph: PlanGraph) -> PlanReport:
        kb = graph.kb
        edges = sorted(graph.edges, key=lambda e: (e.source, e.target, e.via))
        return PlanReport(
            knowledge_base=kb.name,
            config=graph.config,
            p1=graph.p1,
            p2=graph.p2,
            goal_found=graph.goal_found,
            goal_path=[kb.assignment(v) for v in graph.goal_path] if graph.goal_path else None,
            goal_path_prob=graph.goal_path_prob,
            expansions=graph.expansions,
            discarded_mass=graph.discarded_mass,
            truncated=graph.truncated,
            stats=graph.stats,
            states=[ExportService._state_report(s, kb) for s in graph.sorted_states()],
            edges=[
                EdgeReport(
                    source=kb.assignment(e.source),
                    target=kb.assignment(e.target),
                    target_failed=e.target.failed,
                    via=e.via,
                    kind=e.kind.value,
                    fraction=e.fraction,
                    mass=e.mass,
                )
                for e in edges
            ],
        )

    @staticmethod
    def schedule_report(schedule: TapSchedule, kb: KnowledgeBase) -> ScheduleReport:
        return ScheduleReport(
            taps=[
                TapReport(
                    name=t.name,
                    kind=t.kind.value,
                    action=t.action.name,
                    test=t.test.as_dict(),
                    test_wcet=t.test_wcet,
                    action_wcet=t.action_wcet,
                    t_delay=t.action.t_delay,
                    deadline=t.deadline,
                    period=t.period,
                    guarded_states=[kb.assignment(v) for v in sorted(t.guarded_states)],
                )
                for t in schedule.taps
            ],
            utilization=schedule.utilization,
            feasible=schedule.feasible,
            cycle_length=schedule.cycle_length,
            escalations=[EscalationReport(p1=e.p1, removed=e.removed) for e in schedule.escalations],
        )

    @staticmethod
    def simulation_report(report: SimReport, kb: KnowledgeBase) -> SimulationReport:
        return SimulationReport(
            knowledge_base=kb.name,
            trials=report.trials,
            aborted=report.aborted,
            seed=report.seed,
            horizon=report.horizon,
            frequencies={
                result.value: FrequencyReport(
                    count=f.count, frequency=f.frequency, low=f.low, high=f.high, half_width=f.half_width
                )
                for result, f in report.frequencies.items()
            },
            planner_goal_prob=report.planner_goal_prob,
            mean_time_to_goal=report.mean_time_to_goal,
            mean_guarded_visits=report.mean_guarded_visits,
        )

    @staticmethod
    def trace_lines(report: SimReport, kb: KnowledgeBase) -> Iterator[str]:
        """One JSON object per trial, in trial order."""
        for i, outcome in enumerate(report.outcomes):
            yield json.dumps(
                {
                    "trial": i,
                    "result": outcome.result.value,
                    "elapsed": outcome.elapsed,
                    "trace": [
                        {
                            "time": step.time,
                            "state": kb.assignment(step.state),
                            "failed": step.state.failed,
                            "transition": step.transition,
                        }
                        for step in outcome.trace
                    ],
                },
                sort_keys=True,
            ) + "\n"

    @staticmethod
    def _node_id(vector: StateVector, kb: KnowledgeBase) -> str:
        label = ",".join(f"{f}={v}" for f, v in kb.assignment(vector).items())
        return _gvquote(("FAIL:" if vector.failed else "") + label)

    @staticmethod
    def to_dot(graph: PlanGraph) -> str:
        return "".join(ExportService.iter_dot(graph))

    @staticmethod
    def iter_dot(graph: PlanGraph) -> Iterator[str]:
        """Nodes labeled with probability; bold action edges, double-circled failures, grey removed states."""
        kb = graph.kb
        yield "digraph {\n"
        yield "  rankdir=LR;\n"
        yield "  node [shape=circle];\n"
        for state in graph.sorted_states():
            attributes = [f'xlabel="{state.prob:.4g}"', f'label="{state.state_class.value}"']
            if state.is_failure:
                attributes.append("shape=doublecircle")
            if state.status is StateStatus.REMOVED:
                attributes.append("style=filled fillcolor=grey")
            elif state.state_class is StateClass.GOAL:
                attributes.append("peripheries=2 shape=box")
            yield "  {} [{}];\n".format(ExportService._node_id(state.vector, kb), " ".join(attributes))
        for edge in sorted(graph.edges, key=lambda e: (e.source, e.target, e.via)):
            style = "style=bold" if edge.kind is TransitionKind.ACTION else "style=solid"
            yield "  {} -> {} [label={} {}];\n".format(
                ExportService._node_id(edge.source, kb),
                ExportService._node_id(edge.target, kb),
                _gvquote(f"{edge.via} ({edge.fraction:.3g})"),
                style,
            )
        yield "}\n"

    @staticmethod
    def summary_table(graph: PlanGraph, schedule: TapSchedule) -> str:
        rows = [
            ("knowledge base", graph.kb.name),
            ("states", str(len(graph.states))),
            ("states expanded", str(graph.count(status=StateStatus.EXPANDED))),
            ("states removed", str(graph.count(status=StateStatus.REMOVED))),
            ("truncated", "yes" if graph.truncated else "no"),
            ("goal-path probability", f"{graph.goal_path_prob:.6g}"),
            ("P1", f"{graph.p1:.6g}"),
            ("P2", f"{graph.p2:.6g}" if graph.p2 is not None else "-"),
            ("guaranteed taps", str(len(schedule.guaranteed))),
            ("best-effort taps", str(len(schedule.best_effort))),
            ("utilization", f"{schedule.utilization:.4f}"),
            ("feasible", "yes" if schedule.feasible else "no"),
            ("escalations", str(len(schedule.escalations))),
        ]
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows) + "\n"

    @staticmethod
    def comparison_table(rows: Iterable[dict]) -> str:
        header = ("order", "seed", "expanded", "goal-path prob", "path length")
        lines: List[tuple] = [header]
        for row in rows:
            lines.append(
                (
                    row["order"],
                    "-" if row["seed"] is None else str(row["seed"]),
                    "-" if row["expanded"] is None else str(row["expanded"]),
                    "-" if row["goal_path_prob"] is None else f"{row['goal_path_prob']:.6g}",
                    "-" if row["path_length"] is None else str(row["path_length"]),
                )
            )
        widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
        return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip() for line in lines) + "\n"
