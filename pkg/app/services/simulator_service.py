import logging
import math
from collections import Counter
from typing import Optional, Tuple

import numpy as np
from scipy.stats import norm

from app.config import Settings, get_settings
from app.errors import ModelIncompletenessError
from app.models.knowledge_base import KnowledgeBase, TemporalTransition, TransitionSet
from app.models.plan import PlanGraph, StateClass, StateStatus
from app.models.schedule import Tap, TapKind, TapSchedule
from app.models.simulation import (
    ResultFrequency,
    SimReport,
    TraceStep,
    TrialOutcome,
    TrialResult,
)
from app.services.knowledge_base_service import KnowledgeBaseService
from app.services.probability_service import ProbabilityService

logger = logging.getLogger(__name__)

Z_95 = float(norm.ppf(1 - 0.05 / 2))


def wilson_interval(count: int, n: int, z: float = Z_95) -> Tuple[float, float]:
    p = count / n
    denominator = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denominator
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denominator
    return max(0.0, centre - half), min(1.0, centre + half)


def _next_release(now: float, interval: float) -> float:
    if interval <= 0:
        return now
    release = math.ceil(now / interval) * interval
    if release < now:
        release += interval
    return release


class SimulatorService:
    """Continuous-time Monte Carlo execution of a tap schedule against the world model."""

    @staticmethod
    def sample_temporal_outcome(
        tset: Optional[TransitionSet], rng
    ) -> Tuple[Optional[TemporalTransition], float]:
        """Which member of the set fires, and after how long; ``(None, inf)`` if none ever does.

        Members' asymptotes are stacked on [0, 1); the selected member's delay is the
        inverse of its curve at a second uniform draw scaled by its asymptote.
        """
        if tset is None or not tset.members:
            return None, math.inf
        u = rng.random()
        stacked = 0.0
        for member in tset.members:
            asymptote = member.curve.asymptote
            if u < stacked + asymptote:
                level = rng.random() * asymptote
                return member, ProbabilityService.quantile(member.curve, level)
            stacked += asymptote
        return None, math.inf

    @staticmethod
    def default_horizon(schedule: TapSchedule, settings: Optional[Settings] = None) -> float:
        settings = settings or get_settings()
        periods = [t.period for t in schedule.guaranteed]
        if periods:
            return settings.HORIZON_PERIODS * max(periods)
        return settings.FALLBACK_HORIZON

    @staticmethod
    def tap_effect_time(tap: Tap, now: float, schedule: TapSchedule, fires_per_cycle: int = 1) -> float:
        """When the next release of ``tap`` at or after ``now`` changes the world."""
        if tap.kind is TapKind.GUARANTEED:
            interval = tap.period
        else:
            interval = schedule.cycle_length / fires_per_cycle
        return _next_release(now, interval) + tap.wcet + tap.action.t_delay

    @staticmethod
    def run_trial(
        graph: PlanGraph,
        schedule: TapSchedule,
        kb: KnowledgeBase,
        rng,
        horizon: float,
        fires_per_cycle: int = 1,
    ) -> TrialOutcome:
        vector = kb.initial_states[int(rng.integers(len(kb.initial_states)))]
        now = 0.0
        trace = [TraceStep(now, vector, None)]
        guarded_visits = 0

        def finish(result: TrialResult, elapsed: float) -> TrialOutcome:
            return TrialOutcome(result, elapsed, tuple(trace), guarded_visits)

        while True:
            if vector.failed:
                return finish(TrialResult.FAILURE, now)
            state = graph.get(vector)
            if state is None:
                raise ModelIncompletenessError(
                    f"simulation reached {kb.describe(vector)}, which the plan never generated",
                    state=kb.assignment(vector),
                    elapsed=now,
                )
            if state.status is StateStatus.REMOVED:
                return finish(TrialResult.REMOVED_DETECTED, now)
            if kb.satisfies(vector, kb.goal):
                return finish(TrialResult.GOAL, now)
            if now >= horizon:
                return finish(TrialResult.TIMEOUT, horizon)

            tset = KnowledgeBaseService.matching_set(vector, kb)
            if tset is not None and tset.ttfs:
                guarded_visits += 1
            member, delay = SimulatorService.sample_temporal_outcome(tset, rng)

            # (time, taps-first rank, name, target)
            events = []
            if member is not None:
                events.append(
                    (now + delay, 1, member.name, kb.apply(vector, member.post, failed=member.is_failure))
                )
            for tap in schedule.taps_for(vector):
                at = SimulatorService.tap_effect_time(tap, now, schedule, fires_per_cycle)
                events.append((at, 0, tap.action.name, kb.apply(vector, tap.action.post)))

            if not events:
                if state.state_class is StateClass.DEADEND:
                    return finish(TrialResult.DEADEND_STUCK, now)
                return finish(TrialResult.TIMEOUT, horizon)

            at, _, via, target = min(events, key=lambda e: (e[0], e[1], e[2]))
            if at > horizon:
                return finish(TrialResult.TIMEOUT, horizon)
            now = max(at, math.nextafter(now, math.inf))
            vector = target
            trace.append(TraceStep(now, vector, via))

    @staticmethod
    def estimate(
        graph: PlanGraph,
        schedule: TapSchedule,
        kb: KnowledgeBase,
        n_trials: Optional[int] = None,
        horizon: Optional[float] = None,
        seed: Optional[int] = None,
        fires_per_cycle: Optional[int] = None,
        keep_outcomes: bool = False,
    ) -> SimReport:
        """Independent seeded trials aggregated into outcome frequencies with Wilson 95% intervals."""
        settings = get_settings()
        n_trials = settings.SIM_TRIALS if n_trials is None else n_trials
        seed = settings.SIM_SEED if seed is None else seed
        fires_per_cycle = fires_per_cycle or settings.BEST_EFFORT_FIRES_PER_CYCLE
        if horizon is None:
            horizon = settings.SIM_HORIZON or SimulatorService.default_horizon(schedule, settings)
        if n_trials < 1:
            raise ValueError(f"n_trials must be at least 1, got {n_trials}")

        counts: Counter = Counter()
        goal_times = []
        visits = 0
        aborted = 0
        outcomes = []
        for i in range(n_trials):
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
            try:
                outcome = SimulatorService.run_trial(graph, schedule, kb, rng, horizon, fires_per_cycle)
            except ModelIncompletenessError as e:
                aborted += 1
                logger.warning("trial %d aborted: %s", i, e.message)
                continue
            counts[outcome.result] += 1
            visits += outcome.guarded_visits
            if outcome.result is TrialResult.GOAL:
                goal_times.append(outcome.elapsed)
            if keep_outcomes:
                outcomes.append(outcome)

        completed = n_trials - aborted
        if completed == 0:
            raise ModelIncompletenessError(
                f"all {n_trials} trials left the planned state space", trials=n_trials
            )

        frequencies = {}
        for result in TrialResult:
            count = counts.get(result, 0)
            low, high = wilson_interval(count, completed)
            frequencies[result] = ResultFrequency(count, count / completed, low, high)

        report = SimReport(
            trials=completed,
            seed=seed,
            horizon=horizon,
            frequencies=frequencies,
            planner_goal_prob=graph.goal_path_prob,
            mean_time_to_goal=float(np.mean(goal_times)) if goal_times else None,
            mean_guarded_visits=visits / completed,
            aborted=aborted,
            outcomes=tuple(outcomes),
        )
        logger.info(
            "simulated %d trials of %s: goal %.4f, failure %.4f (planner goal-path %.4f)",
            completed,
            kb.name,
            report.frequency(TrialResult.GOAL),
            report.frequency(TrialResult.FAILURE),
            report.planner_goal_prob,
        )
        return report
