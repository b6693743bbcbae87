import heapq
import logging
from collections import Counter, defaultdict, deque
from typing import Any, Dict, Iterable, List, Optional, Tuple

from app.errors import PlanningFailure, UnguardableStateError
from app.models.knowledge_base import (
    ActionTransition,
    Condition,
    KnowledgeBase,
    StateVector,
    TransitionSet,
)
from app.models.plan import (
    Edge,
    ExpansionRecord,
    Frontier,
    PlanGraph,
    PlannedState,
    StateClass,
    StateStatus,
)
from app.models.probability import ActionKind
from app.schemas.planner import ExpansionOrder, PlannerConfig
from app.services.knowledge_base_service import KnowledgeBaseService
from app.services.probability_service import ProbabilityService

logger = logging.getLogger(__name__)


class PlannerService:
    """Best-first state-space expansion with locally computed state probabilities."""

    @staticmethod
    def initialize(kb: KnowledgeBase, cfg: PlannerConfig) -> PlanGraph:
        """Graph holding the initial states under a uniform prior."""
        graph = PlanGraph(
            kb=kb,
            config=cfg,
            frontier=Frontier(cfg.order, cfg.order_seed),
            p1=cfg.initial_p1,
        )
        prior = 1.0 / len(kb.initial_states)
        queued = []
        for vector in kb.initial_states:
            state = PlannedState(vector=vector, prob=prior)
            graph.states[vector] = state
            if prior < graph.p1:
                state.status = StateStatus.REMOVED
                state.state_class = StateClass.REMOVED
                continue
            queued.append((vector, prior))
            if kb.satisfies(vector, kb.goal):
                graph.goal_found = True
        graph.frontier.push_all(queued)
        return graph

    @staticmethod
    def _ttf_deadline(tset: Optional[TransitionSet], epsilon: float) -> Optional[float]:
        if tset is None or not tset.ttfs:
            return None
        return min(ProbabilityService.epsilon_time(m.curve, epsilon) for m in tset.ttfs)

    @staticmethod
    def score_action(
        action: ActionTransition,
        state: StateVector,
        kb: KnowledgeBase,
        goal: Optional[Condition],
        cfg: PlannerConfig,
    ) -> float:
        score = 0.0
        if goal is not None:
            wanted = goal.as_dict()
            index = kb.feature_index
            newly = sum(
                1
                for feature, value in action.post.clauses
                if wanted.get(feature) == value and state.values[index[feature]] != value
            )
            score += cfg.goal_weight * newly
        successor = kb.apply(state, action.post)
        successor_set = KnowledgeBaseService.matching_set(successor, kb)
        if successor_set is not None and successor_set.ttfs:
            score -= cfg.ttf_penalty
        return score

    @staticmethod
    def select_action(
        state: PlannedState,
        kb: KnowledgeBase,
        goal: Optional[Condition],
        graph: PlanGraph,
    ) -> Tuple[Optional[ActionTransition], ActionKind]:
        """Pick the guard (TTF present) or the best goal-advancing action.

        ``goal=None`` means safety-only selection: only guards are chosen.
        """
        cfg = graph.config
        tset, actions = KnowledgeBaseService.matching_transitions(state.vector, kb)

        def ranked(candidates):
            scored = [(PlannerService.score_action(a, state.vector, kb, goal, cfg), a) for a in candidates]
            return sorted(scored, key=lambda sa: (-sa[0], sa[1].name))

        deadline = PlannerService._ttf_deadline(tset, cfg.epsilon)
        if deadline is not None:
            feasible = [a for a in actions if a.t_delay < deadline]
            if not feasible:
                raise UnguardableStateError(
                    f"no action preempts the TTFs of {kb.describe(state.vector)} "
                    f"(epsilon deadline {deadline:.6g})",
                    states=[kb.assignment(state.vector)],
                    deadline=deadline,
                )
            return ranked(feasible)[0][1], ActionKind.PREEMPTIVE

        if goal is None:
            return None, ActionKind.NONE
        positive = [(s, a) for s, a in ranked(actions) if s > 0]
        if not positive:
            return None, ActionKind.NONE
        return positive[0][1], ActionKind.NONPREEMPTIVE

    @staticmethod
    def expand_one(graph: PlanGraph, kb: KnowledgeBase, cfg: PlannerConfig) -> ExpansionRecord:
        vector = graph.frontier.pop()
        state = graph.states[vector]

        tset = KnowledgeBaseService.matching_set(vector, kb)
        temporals = tset.members if tset is not None else ()

        goal = None if graph.goal_found else kb.goal
        action, kind = PlannerService.select_action(state, kb, goal, graph)

        if kind is ActionKind.PREEMPTIVE:
            t = ProbabilityService.critical_time(
                kind, ttf_deadline=PlannerService._ttf_deadline(tset, cfg.epsilon)
            )
        elif kind is ActionKind.NONPREEMPTIVE:
            ctx = ProbabilityService.build_context(graph.planned_actions.values(), action)
            t = ProbabilityService.critical_time(kind, ctx=ctx)
        else:
            t = ProbabilityService.critical_time(kind)

        contributions = ProbabilityService.offspring_probabilities(
            state.prob, temporals, action, kind, t, parent=vector, kb=kb
        )

        state.status = StateStatus.EXPANDED
        state.chosen_action = action
        state.action_kind = kind
        state.critical_time = t
        state.expansion_index = graph.expansions
        if action is not None:
            graph.planned_actions[action.name] = action
        graph.expansions += 1

        discarded = 0.0
        queued: Dict[StateVector, float] = {}
        for c in contributions:
            target = c.target
            graph.add_edge(Edge(vector, c.via, c.kind, target, c.fraction, c.mass))
            existing = graph.states.get(target)

            if c.is_failure:
                if existing is None:
                    graph.states[target] = PlannedState(
                        vector=target,
                        prob=c.mass,
                        state_class=StateClass.FAILURE,
                        clock_origin=graph.expansions,
                    )
                else:
                    existing.prob = ProbabilityService.merge_contribution(existing.prob, False, c.mass)
                continue

            already_expanded = existing is not None and existing.status is StateStatus.EXPANDED
            merged = ProbabilityService.merge_contribution(
                existing.prob if existing is not None else None, already_expanded, c.mass
            )
            if already_expanded:
                existing.discarded_mass += c.mass
                discarded += c.mass
                continue

            if existing is None:
                existing = PlannedState(vector=target, prob=merged, clock_origin=graph.expansions)
                graph.states[target] = existing
            else:
                existing.prob = merged

            if merged < graph.p1:
                existing.status = StateStatus.REMOVED
                existing.state_class = StateClass.REMOVED
                graph.frontier.discard(target)
                queued.pop(target, None)
                continue

            existing.status = StateStatus.UNEXPANDED
            existing.state_class = StateClass.UNKNOWN
            queued[target] = merged
            if not graph.goal_found and kb.satisfies(target, kb.goal):
                graph.goal_found = True
                logger.info(
                    "goal state %s reached after %d expansions", kb.describe(target), graph.expansions
                )

        graph.frontier.push_all(queued.items())
        if discarded > 0:
            graph.discarded_mass += discarded
            logger.debug(
                "dropped %.6g mass arriving at expanded states from %s", discarded, kb.describe(vector)
            )

        logger.debug(
            "expanded %s p=%.6g action=%s (%s) t=%s",
            kb.describe(vector),
            state.prob,
            action.name if action else None,
            kind.value,
            t,
        )
        return ExpansionRecord(
            state=vector,
            prob=state.prob,
            action=action.name if action else None,
            action_kind=kind,
            critical_time=t,
            contributions=tuple(contributions),
            discarded=discarded,
        )

    @staticmethod
    def plan(kb: KnowledgeBase, cfg: PlannerConfig) -> PlanGraph:
        logger.info(
            "planning %s (order=%s, epsilon=%g, P1=%g)", kb.name, cfg.order.value, cfg.epsilon, cfg.initial_p1
        )
        graph = PlannerService.initialize(kb, cfg)

        while graph.frontier and graph.expansions < cfg.max_expansions:
            try:
                PlannerService.expand_one(graph, kb, cfg)
            except UnguardableStateError as e:
                raise PlanningFailure(
                    f"unguardable state above P1={graph.p1:g}: {e.message}",
                    witness=e.states,
                    p1=graph.p1,
                ) from e

        if graph.frontier:
            graph.truncated = True
            logger.warning(
                "stopped after %d expansions with %d states unexpanded", graph.expansions, len(graph.frontier)
            )
            unguarded = PlannerService.unguarded_frontier(graph, kb)
            if unguarded:
                raise PlanningFailure(
                    f"stopped after {graph.expansions} expansions with "
                    f"{len(unguarded)} TTF state(s) left unguarded",
                    witness=[kb.assignment(v) for v in unguarded],
                    p1=graph.p1,
                    expansions=graph.expansions,
                )
        if not graph.goal_found:
            raise PlanningFailure(
                f"no goal state reachable above P1={graph.p1:g}",
                p1=graph.p1,
                expansions=graph.expansions,
            )

        if graph.discarded_mass > 0:
            logger.warning(
                "dropped %.6g mass arriving at already expanded states; goal-path probability is a lower bound",
                graph.discarded_mass,
            )
        PlannerService.classify_states(graph)
        PlannerService.extract_goal_path(graph)
        logger.info(
            "planned %s: %d expansions, goal-path probability %.6g",
            kb.name,
            graph.expansions,
            graph.goal_path_prob,
        )
        return graph

    @staticmethod
    def unguarded_frontier(graph: PlanGraph, kb: KnowledgeBase) -> List[StateVector]:
        """Unexpanded frontier states whose temporal set holds a TTF, in a stable order."""
        unguarded = []
        for vector in graph.frontier:
            tset = KnowledgeBaseService.matching_set(vector, kb)
            if tset is not None and tset.ttfs:
                unguarded.append(vector)
        return sorted(unguarded, key=kb.describe)

    @staticmethod
    def classify_states(graph: PlanGraph) -> PlanGraph:
        kb = graph.kb
        goals = []
        for s in graph.states.values():
            if s.is_failure:
                s.state_class = StateClass.FAILURE
            elif s.status is StateStatus.REMOVED:
                s.state_class = StateClass.REMOVED
            elif kb.satisfies(s.vector, kb.goal):
                s.state_class = StateClass.GOAL
                goals.append(s.vector)

        reverse = defaultdict(list)
        for e in graph.edges:
            if graph.states[e.source].is_live and graph.states[e.target].is_live:
                reverse[e.target].append(e.source)
        reaching = set(goals)
        queue = deque(goals)
        while queue:
            for parent in reverse[queue.popleft()]:
                if parent not in reaching:
                    reaching.add(parent)
                    queue.append(parent)

        necessity = 0
        for s in graph.states.values():
            if not s.is_live or s.state_class is StateClass.GOAL:
                continue
            if s.vector in reaching:
                s.state_class = StateClass.GOAL_REACHING
            elif s.status is StateStatus.EXPANDED:
                s.state_class = StateClass.DEADEND
                tset, actions = KnowledgeBaseService.matching_transitions(s.vector, kb)
                if (tset is None or not tset.members) and not actions:
                    necessity += 1
            else:
                s.state_class = StateClass.UNKNOWN

        counts = Counter(s.state_class.value for s in graph.states.values())
        graph.stats = {
            "states": len(graph.states),
            "expanded": graph.count(status=StateStatus.EXPANDED),
            "removed": graph.count(status=StateStatus.REMOVED),
            **{f"class_{name.value}": counts.get(name.value, 0) for name in StateClass},
            "deadend_by_necessity": necessity,
            "deadend_by_choice": counts.get(StateClass.DEADEND.value, 0) - necessity,
        }
        return graph

    @staticmethod
    def extract_goal_path(graph: PlanGraph) -> Optional[List[StateVector]]:
        """Maximum-probability path (prior times edge fractions) from an initial to a goal state."""
        prior = 1.0 / len(graph.kb.initial_states)
        best: Dict[StateVector, float] = {}
        parent: Dict[StateVector, StateVector] = {}
        heap = []
        for vector in graph.kb.initial_states:
            if graph.states[vector].is_live:
                best[vector] = prior
                heap.append((-prior, vector))
        heapq.heapify(heap)

        done = set()
        reached = None
        while heap:
            neg_p, vector = heapq.heappop(heap)
            if vector in done:
                continue
            done.add(vector)
            if graph.states[vector].state_class is StateClass.GOAL:
                reached = vector
                break
            for edge in graph.outgoing(vector):
                target = edge.target
                if target in done or not graph.states[target].is_live:
                    continue
                p = -neg_p * edge.fraction
                if target not in best or p > best[target]:
                    best[target] = p
                    parent[target] = vector
                    heapq.heappush(heap, (-p, target))

        if reached is None:
            graph.goal_path, graph.goal_path_prob, graph.p2 = None, 0.0, None
            return None

        path = [reached]
        while path[-1] in parent:
            path.append(parent[path[-1]])
        path.reverse()
        graph.goal_path = path
        graph.goal_path_prob = best[reached]
        graph.p2 = min(graph.states[v].prob for v in path)
        return path

    @staticmethod
    def compare_orders(
        kb: KnowledgeBase, cfg: PlannerConfig, seeds: Iterable[Optional[int]] = (None,)
    ) -> List[Dict[str, Any]]:
        """Probabilistic expansion next to depth-first expansion under each push-order seed."""
        runs = [(ExpansionOrder.PROBABILISTIC, None)]
        runs.extend((ExpansionOrder.DEPTH_FIRST, seed) for seed in seeds)
        rows = []
        for order, seed in runs:
            row = {"order": order.value, "seed": seed}
            try:
                graph = PlannerService.plan(kb, cfg.model_copy(update={"order": order, "order_seed": seed}))
            except PlanningFailure as e:
                logger.info("%s (seed %s) failed: %s", order.value, seed, e.message)
                row.update(expanded=None, goal_path_prob=None, path_length=None)
            else:
                row.update(
                    expanded=graph.count(status=StateStatus.EXPANDED),
                    goal_path_prob=graph.goal_path_prob,
                    path_length=len(graph.goal_path) if graph.goal_path else None,
                )
            rows.append(row)
        return rows
