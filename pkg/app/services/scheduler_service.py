import logging
from collections import defaultdict
from typing import Any, Dict, Iterable, List, Optional, Tuple

from app.errors import SchedulingFailure, UnguardableStateError
from app.models.knowledge_base import Condition, KnowledgeBase
from app.models.plan import PlanGraph, PlannedState, StateStatus
from app.models.probability import ActionKind
from app.models.schedule import Escalation, Tap, TapKind, TapSchedule
from app.schemas.planner import PlannerConfig
from app.services.knowledge_base_service import KnowledgeBaseService
from app.services.planner_service import PlannerService
from app.services.probability_service import TOLERANCE, ProbabilityService

logger = logging.getLogger(__name__)


class SchedulerService:
    """Test-action pairs, the utilization test and P1 escalation."""

    @staticmethod
    def _common_clauses(states: List[PlannedState], kb: KnowledgeBase) -> Condition:
        assignments = [kb.assignment(s.vector) for s in states]
        shared = {
            f: v for f, v in assignments[0].items() if all(a.get(f) == v for a in assignments[1:])
        }
        return Condition.of(shared)

    @staticmethod
    def ttf_epsilon_time(state: PlannedState, kb: KnowledgeBase, epsilon: float) -> float:
        tset = KnowledgeBaseService.matching_set(state.vector, kb)
        return min(ProbabilityService.epsilon_time(m.curve, epsilon) for m in tset.ttfs)

    @staticmethod
    def derive_taps(graph: PlanGraph, kb: KnowledgeBase, epsilon: Optional[float] = None) -> List[Tap]:
        """One guaranteed tap per guard action, one best-effort tap per other chosen action."""
        if epsilon is None:
            epsilon = graph.config.epsilon

        guarded: Dict[str, List[PlannedState]] = defaultdict(list)
        opportunistic: Dict[str, List[PlannedState]] = defaultdict(list)
        for state in graph.sorted_states():
            if state.status is not StateStatus.EXPANDED or state.chosen_action is None:
                continue
            if state.action_kind is ActionKind.PREEMPTIVE:
                guarded[state.chosen_action.name].append(state)
            else:
                opportunistic[state.chosen_action.name].append(state)

        taps = []
        for name in sorted(guarded):
            states = guarded[name]
            action = states[0].chosen_action
            deadlines = [
                (SchedulerService.ttf_epsilon_time(s, kb, epsilon) - action.t_delay, s) for s in states
            ]
            deadline = min(d for d, _ in deadlines)
            if deadline <= action.wcet:
                raise UnguardableStateError(
                    f"guard {name} cannot meet deadline {deadline:.6g} with WCET {action.wcet:.6g}",
                    states=[kb.assignment(s.vector) for d, s in deadlines if d <= action.wcet],
                    action=name,
                    deadline=deadline,
                    wcet=action.wcet,
                )
            taps.append(
                Tap(
                    name=f"guard:{name}",
                    test=SchedulerService._common_clauses(states, kb),
                    action=action,
                    kind=TapKind.GUARANTEED,
                    deadline=deadline,
                    period=deadline - action.wcet,
                    guarded_states=frozenset(s.vector for s in states),
                )
            )

        for name in sorted(opportunistic):
            states = opportunistic[name]
            taps.append(
                Tap(
                    name=f"best_effort:{name}",
                    test=SchedulerService._common_clauses(states, kb),
                    action=states[0].chosen_action,
                    kind=TapKind.BEST_EFFORT,
                    deadline=None,
                    period=None,
                    guarded_states=frozenset(s.vector for s in states),
                )
            )
        return taps

    @staticmethod
    def schedulability(taps: Iterable[Tap], escalations: Iterable[Escalation] = ()) -> TapSchedule:
        taps = tuple(taps)
        utilization = sum(t.wcet / t.period for t in taps if t.kind is TapKind.GUARANTEED)
        return TapSchedule(
            taps=taps,
            utilization=utilization,
            feasible=utilization <= 1.0,
            escalations=tuple(escalations),
        )

    @staticmethod
    def audit_guarantees(
        schedule: TapSchedule,
        graph: PlanGraph,
        kb: KnowledgeBase,
        epsilon: Optional[float] = None,
    ) -> List[Dict[str, Any]]:
        """Guarded states whose worst-case guard latency exceeds their TTF epsilon time."""
        if epsilon is None:
            epsilon = graph.config.epsilon
        problems = []
        for tap in schedule.guaranteed:
            latency = tap.period + tap.wcet + tap.action.t_delay
            for vector in sorted(tap.guarded_states):
                limit = SchedulerService.ttf_epsilon_time(graph.states[vector], kb, epsilon)
                if latency > limit + TOLERANCE:
                    problems.append(
                        {"tap": tap.name, "state": kb.assignment(vector), "latency": latency, "limit": limit}
                    )
        return problems

    @staticmethod
    def next_p1(graph: PlanGraph) -> Optional[float]:
        """Threshold that removes the lowest probability layer of live states, if another layer exists."""
        levels = sorted({s.prob for s in graph.states.values() if s.is_live})
        return levels[1] if len(levels) > 1 else None

    @staticmethod
    def plan_and_schedule(kb: KnowledgeBase, cfg: PlannerConfig) -> Tuple[PlanGraph, TapSchedule]:
        p1 = cfg.initial_p1
        escalations: List[Escalation] = []

        while True:
            graph = PlannerService.plan(kb, cfg.model_copy(update={"initial_p1": p1}))
            if p1 != cfg.initial_p1:
                removed = graph.count(status=StateStatus.REMOVED)
                escalations.append(Escalation(p1=p1, removed=removed))
                logger.info("escalated P1 to %.6g: %d states removed", p1, removed)

            utilization = None
            unguardable = None
            try:
                taps = SchedulerService.derive_taps(graph, kb, cfg.epsilon)
            except UnguardableStateError as e:
                unguardable = e
            else:
                schedule = SchedulerService.schedulability(taps, escalations)
                utilization = schedule.utilization
                if schedule.feasible:
                    logger.info(
                        "schedule feasible at P1=%.6g: %d taps, utilization %.4f",
                        p1,
                        len(schedule.taps),
                        utilization,
                    )
                    return graph, schedule
                logger.info("schedule infeasible at P1=%.6g: utilization %.4f", p1, utilization)

            candidate = SchedulerService.next_p1(graph)
            if candidate is None or graph.p2 is None or candidate > graph.p2:
                reason = unguardable.message if unguardable else f"utilization {utilization:.4f} > 1"
                raise SchedulingFailure(
                    f"no schedulable plan: {reason}; raising P1 further would cut the goal path",
                    utilization=utilization,
                    p1=p1,
                    p2=graph.p2,
                    escalations=[{"p1": e.p1, "removed": e.removed} for e in escalations],
                )
            p1 = candidate
