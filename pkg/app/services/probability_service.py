import logging
import math
from bisect import bisect_right
from typing import Iterable, List, Optional, Sequence, Union

from app.errors import ProbabilityError
from app.models.knowledge_base import (
    ActionTransition,
    Curve,
    KnowledgeBase,
    StateVector,
    TemporalTransition,
)
from app.models.probability import (
    ActionKind,
    CriticalTimeContext,
    OffspringContribution,
    TransitionKind,
)
from app.schemas.curve import DelayedExponentialCurve

logger = logging.getLogger(__name__)

TOLERANCE = 1e-9
_NUDGE_LIMIT = 64


class ProbabilityService:
    """Temporal curves and the local (per-expansion) state probability rules."""

    @staticmethod
    def cum_prob(curve: Curve, t: float) -> float:
        """Cumulative probability that the transition has fired after ``t`` seconds in state."""
        if math.isnan(t) or t < 0:
            raise ProbabilityError(f"cumulative probability queried at negative time {t}", t=t)
        if math.isinf(t):
            return curve.asymptote

        if isinstance(curve, DelayedExponentialCurve):
            if t < curve.t0:
                return 0.0
            return curve.p_max * -math.expm1(-curve.rate * (t - curve.t0))

        knots = curve.knots
        if not knots:
            return curve.asymptote
        if t < knots[0][0]:
            return 0.0
        if t >= knots[-1][0]:
            return curve.asymptote
        i = bisect_right([k[0] for k in knots], t) - 1
        (t0, c0), (t1, c1) = knots[i], knots[i + 1]
        return c0 + (c1 - c0) * (t - t0) / (t1 - t0)

    @staticmethod
    def asymptotic_prob(curve: Curve) -> float:
        return curve.asymptote

    @staticmethod
    def quantile(curve: Curve, level: float) -> float:
        """Generalized inverse: smallest t >= 0 with C(t) >= level, infinity if never reached."""
        if level <= 0:
            return 0.0
        if isinstance(curve, DelayedExponentialCurve):
            if level >= curve.p_max:
                return math.inf
            t = curve.t0 - math.log1p(-level / curve.p_max) / curve.rate
        else:
            if level > curve.asymptote:
                return math.inf
            t = _piecewise_inverse(curve.knots, level)

        # Rounding in the closed form can leave C(t) a few ulps short of level.
        for _ in range(_NUDGE_LIMIT):
            if ProbabilityService.cum_prob(curve, t) >= level:
                break
            t = math.nextafter(t, math.inf)
        return t

    @staticmethod
    def epsilon_time(curve: Curve, epsilon: float) -> float:
        """Time at which the curve first reaches ``epsilon``; 0 means the transition is unguardable."""
        if not 0 < epsilon < 1:
            raise ProbabilityError(f"epsilon must lie in (0, 1), got {epsilon}", epsilon=epsilon)
        if ProbabilityService.cum_prob(curve, 0.0) >= epsilon:
            return 0.0
        return ProbabilityService.quantile(curve, epsilon)

    @staticmethod
    def curve_violations(curve: Curve) -> List[str]:
        problems = []
        if isinstance(curve, DelayedExponentialCurve):
            if not (math.isfinite(curve.t0) and curve.t0 >= 0):
                problems.append(f"onset t0={curve.t0} must be finite and >= 0")
            if not (math.isfinite(curve.rate) and curve.rate > 0):
                problems.append(f"lambda={curve.rate} must be finite and > 0")
            return problems

        previous_t, previous_c = -math.inf, 0.0
        for t, c in curve.knots:
            if not (math.isfinite(t) and t >= 0):
                problems.append(f"knot time {t} must be finite and >= 0")
            if t <= previous_t:
                problems.append(f"knot times must be strictly increasing ({previous_t} then {t})")
            if not 0 <= c <= curve.asymptote + TOLERANCE:
                problems.append(f"knot value {c} outside [0, asymptote={curve.asymptote}]")
            if c < previous_c:
                problems.append(f"knot values must be nondecreasing ({previous_c} then {c})")
            previous_t, previous_c = t, c
        if curve.knots and abs(curve.knots[-1][1] - curve.asymptote) > TOLERANCE:
            problems.append(
                f"last knot value {curve.knots[-1][1]} must equal the asymptote {curve.asymptote}"
            )
        return problems

    @staticmethod
    def build_context(
        planned_actions: Iterable[ActionTransition],
        candidate: ActionTransition,
    ) -> CriticalTimeContext:
        """Timing context over the distinct planned actions, candidate included."""
        actions = {a.name: a for a in planned_actions}
        actions[candidate.name] = candidate
        return CriticalTimeContext(
            a=sum(a.test_wcet for a in actions.values()),
            n=len(actions),
            b=sum(a.action_wcet for a in actions.values()),
            t_delay=candidate.t_delay,
        )

    @staticmethod
    def critical_time(
        case: Union[ActionKind, str],
        ttf_deadline: Optional[float] = None,
        ctx: Optional[CriticalTimeContext] = None,
    ) -> float:
        if case == "no_action":
            case = ActionKind.NONE
        case = ActionKind(case)

        if case is ActionKind.PREEMPTIVE:
            if ttf_deadline is None:
                raise ProbabilityError("preemptive critical time requires a TTF deadline")
            return ttf_deadline
        if case is ActionKind.NONPREEMPTIVE:
            if ctx is None:
                raise ProbabilityError("non-preemptive critical time requires a timing context")
            return ctx.a * ctx.n / 8 + ctx.b / 4 + ctx.t_delay
        return math.inf

    @staticmethod
    def offspring_probabilities(
        parent_prob: float,
        temporals: Sequence[TemporalTransition],
        action: Optional[ActionTransition],
        action_kind: ActionKind,
        t: float,
        parent: Optional[StateVector] = None,
        kb: Optional[KnowledgeBase] = None,
    ) -> List[OffspringContribution]:
        """Offspring masses for one expansion, scaled by the parent's probability.

        Targets are filled in when both ``parent`` and ``kb`` are given.
        """
        if not 0 <= parent_prob <= 1 + TOLERANCE:
            raise ProbabilityError(f"parent probability {parent_prob} outside [0, 1]")
        if (action is None) != (action_kind is ActionKind.NONE):
            raise ProbabilityError(
                f"action {action.name if action else None!r} inconsistent with kind {action_kind.value}"
            )

        fractions = [ProbabilityService.cum_prob(m.curve, t) for m in temporals]
        total = sum(fractions)
        if total > 1 + TOLERANCE:
            raise ProbabilityError(
                f"temporal probabilities sum to {total:.12g} > 1 at t={t}",
                transitions=[m.name for m in temporals],
            )
        p = max(0.0, 1.0 - total)

        def target(post, failed=False):
            if parent is None or kb is None:
                return None
            return kb.apply(parent, post, failed=failed)

        contributions = [
            OffspringContribution(
                target=target(m.post, m.is_failure),
                via=m.name,
                kind=TransitionKind.TEMPORAL,
                fraction=c,
                mass=parent_prob * c,
                is_failure=m.is_failure,
            )
            for m, c in zip(temporals, fractions)
        ]
        if action is not None:
            fraction = p if action_kind is ActionKind.PREEMPTIVE else p / 2
            contributions.append(
                OffspringContribution(
                    target=target(action.post),
                    via=action.name,
                    kind=TransitionKind.ACTION,
                    fraction=fraction,
                    mass=parent_prob * fraction,
                )
            )
        return contributions

    @staticmethod
    def merge_contribution(
        existing_prob: Optional[float],
        already_expanded: bool,
        new_mass: float,
    ) -> float:
        """Combine a new contribution with an offspring's existing probability.

        Mass arriving at an already expanded state is dropped (the caller records it).
        """
        if existing_prob is None:
            result = new_mass
        elif already_expanded:
            return existing_prob
        else:
            result = existing_prob + new_mass

        if result > 1 + TOLERANCE:
            logger.warning("merged probability %.12g exceeds 1; clamping", result)
        return min(result, 1.0)


def _piecewise_inverse(knots: Sequence[tuple], level: float) -> float:
    if not knots:
        return 0.0
    previous = None
    for t, c in knots:
        if c >= level:
            if previous is None:
                return t
            t0, c0 = previous
            return t0 + (level - c0) / (c - c0) * (t - t0)
        previous = (t, c)
    # Last knot below the asymptote: the jump happens just after it.
    return math.nextafter(knots[-1][0], math.inf)
