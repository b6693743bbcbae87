import logging
import math
from collections import defaultdict
from pathlib import Path

import pytest

from app.errors import EmptyFrontierError, PlanningFailure, UnguardableStateError
from app.models.knowledge_base import StateVector
from app.models.plan import StateClass, StateStatus
from app.models.probability import ActionKind
from app.schemas.planner import ExpansionOrder, PlannerConfig
from app.services.knowledge_base_service import KnowledgeBaseService
from app.services.planner_service import PlannerService
from app.services.probability_service import ProbabilityService

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def load(name):
    return KnowledgeBaseService.load_path(FIXTURES / f"{name}.json")


@pytest.fixture
def m1():
    return load("micro_m1")


@pytest.fixture
def flight():
    return load("flight_fix3_fix4")


@pytest.fixture
def diamond():
    return load("micro_diamond")


@pytest.fixture
def cfg():
    return PlannerConfig()


def guard_document(t_delay):
    return {
        "features": [{"name": "ALT", "values": ["ok", "low"]}],
        "initial_states": [{"ALT": "low"}],
        "goal": {"ALT": "ok"},
        "actions": [
            {"name": "climb_fast", "pre": {"ALT": "low"}, "post": {"ALT": "ok"},
             "t_delay": t_delay, "test_wcet": 0.05, "action_wcet": 0.1},
            {"name": "climb_slow", "pre": {"ALT": "low"}, "post": {"ALT": "ok"},
             "t_delay": t_delay, "test_wcet": 0.05, "action_wcet": 0.1},
        ],
        "temporal_sets": [{"pre": {"ALT": "low"}, "members": [
            {"name": "crash", "post": {"ALT": "low"}, "is_failure": True,
             "curve": {"kind": "piecewise", "knots": [[5.0, 0.0], [10.0, 0.5]], "asymptote": 0.5}}
        ]}],
    }


def sink_document():
    """Altitude can sink while the aircraft moves; low altitude carries a crash TTF."""
    return {
        "name": "sink",
        "features": [
            {"name": "ALT", "values": ["ok", "low"]},
            {"name": "POS", "values": ["start", "end"]},
        ],
        "initial_states": [{"ALT": "ok", "POS": "start"}],
        "goal": {"POS": "end"},
        "actions": [
            {"name": "move", "pre": {"POS": "start"}, "post": {"POS": "end"},
             "t_delay": 1.0, "test_wcet": 0.05, "action_wcet": 0.1},
            {"name": "climb", "pre": {"ALT": "low"}, "post": {"ALT": "ok"},
             "t_delay": 1.0, "test_wcet": 0.05, "action_wcet": 0.1},
        ],
        "temporal_sets": [
            {"pre": {"ALT": "ok"}, "members": [
                {"name": "sink", "post": {"ALT": "low"},
                 "curve": {"kind": "piecewise", "knots": [[0.0, 0.0], [2.0, 0.5]], "asymptote": 0.5}}
            ]},
            {"pre": {"ALT": "low"}, "members": [
                {"name": "crash", "post": {"ALT": "low"}, "is_failure": True,
                 "curve": {"kind": "piecewise", "knots": [[5.0, 0.0], [10.0, 0.5]], "asymptote": 0.5}}
            ]},
        ],
    }


def late_join_document():
    """The likely branch reaches and expands the join before the unlikely branch arrives."""
    def always(name, post, asymptote):
        return {"name": name, "post": post,
                "curve": {"kind": "piecewise", "knots": [[0.0, 0.0], [1.0, asymptote]], "asymptote": asymptote}}

    return {
        "name": "late_join",
        "features": [
            {"name": "POS", "values": ["start", "left", "right", "join"]},
            {"name": "FLAG", "values": ["off", "on"]},
        ],
        "initial_states": [{"POS": "start", "FLAG": "off"}],
        "goal": {"FLAG": "on"},
        "actions": [
            {"name": "set_flag", "pre": {"POS": "join", "FLAG": "off"}, "post": {"FLAG": "on"},
             "t_delay": 0.5, "test_wcet": 0.05, "action_wcet": 0.1}
        ],
        "temporal_sets": [
            {"pre": {"POS": "start"},
             "members": [always("go_left", {"POS": "left"}, 0.6), always("go_right", {"POS": "right"}, 0.4)]},
            {"pre": {"POS": "left"}, "members": [always("join_l", {"POS": "join"}, 1.0)]},
            {"pre": {"POS": "right"}, "members": [always("join_r", {"POS": "join"}, 1.0)]},
        ],
    }


class TestSelectAction:
    """Test guard and goal-directed action selection"""

    def test_ttf_forces_preemptive_guard(self, m1, cfg):
        """Test a TTF makes the chosen action preemptive"""
        graph = PlannerService.initialize(m1, cfg)
        state = graph.states[StateVector(("low",))]

        action, kind = PlannerService.select_action(state, m1, m1.goal, graph)

        assert action.name == "climb"
        assert kind is ActionKind.PREEMPTIVE

    def test_equal_scores_break_ties_by_name(self, cfg):
        """Test ties go to the smaller action name"""
        kb = KnowledgeBaseService.build(guard_document(1.0))
        graph = PlannerService.initialize(kb, cfg)

        action, _ = PlannerService.select_action(graph.states[kb.initial_states[0]], kb, kb.goal, graph)

        assert action.name == "climb_fast"

    def test_guard_slower_than_ttf_is_unguardable(self, cfg):
        """Test no action fast enough raises with the state as witness"""
        kb = KnowledgeBaseService.build(guard_document(6.0))
        graph = PlannerService.initialize(kb, cfg)

        with pytest.raises(UnguardableStateError) as exc:
            PlannerService.select_action(graph.states[kb.initial_states[0]], kb, kb.goal, graph)
        assert exc.value.details["states"] == [{"ALT": "low"}]

    def test_goal_advancing_action_is_nonpreemptive(self, flight, cfg):
        """Test goal-directed choice without a TTF"""
        graph = PlannerService.initialize(flight, cfg)

        action, kind = PlannerService.select_action(
            graph.states[flight.initial_states[0]], flight, flight.goal, graph
        )

        assert action.name == "turn_left_W"
        assert kind is ActionKind.NONPREEMPTIVE

    def test_safety_only_selection_skips_goal_actions(self, flight, cfg):
        """Test no goal means no goal-directed action"""
        graph = PlannerService.initialize(flight, cfg)

        action, kind = PlannerService.select_action(graph.states[flight.initial_states[0]], flight, None, graph)

        assert action is None
        assert kind is ActionKind.NONE


class TestExpandOne:
    """Test a single expansion step"""

    def test_m1_first_expansion(self, m1, cfg):
        """Test expanding the low state splits mass between climb and crash"""
        graph = PlannerService.initialize(m1, cfg)

        record = PlannerService.expand_one(graph, m1, cfg)

        assert record.action == "climb"
        assert record.critical_time == pytest.approx(5.1)
        assert graph.states[StateVector(("ok",))].prob == pytest.approx(0.99)
        assert graph.states[StateVector(("low",), failed=True)].prob == pytest.approx(0.01)
        assert graph.states[StateVector(("low",), failed=True)].state_class is StateClass.FAILURE
        assert graph.goal_found

    def test_empty_frontier(self, m1, cfg):
        """Test expanding with nothing left raises"""
        graph = PlannerService.initialize(m1, cfg)
        PlannerService.expand_one(graph, m1, cfg)
        PlannerService.expand_one(graph, m1, cfg)

        with pytest.raises(EmptyFrontierError):
            PlannerService.expand_one(graph, m1, cfg)

    def test_nonpreemptive_critical_time(self, flight, cfg):
        """Test average-delay critical time on the first flight expansion"""
        graph = PlannerService.initialize(flight, cfg)

        record = PlannerService.expand_one(graph, flight, cfg)

        assert record.critical_time == pytest.approx(0.05 / 8 + 0.1 / 4 + 2.0)
        turned = flight.vector({"LOC": "FIX3", "HEAD": "W", "OBS": "FIX5", "ALT": "ok",
                                "GEAR": "down", "TRAFFIC": "none"})
        assert graph.states[turned].prob == pytest.approx(0.48625)

    def test_low_probability_offspring_removed(self, cfg):
        """Test offspring below P1 are removed, not queued"""
        kb = load("flight_gear")
        strict = cfg.model_copy(update={"initial_p1": 0.02})
        graph = PlannerService.initialize(kb, strict)

        PlannerService.expand_one(graph, kb, strict)

        gear_up = [s for s in graph.states.values() if kb.assignment(s.vector)["GEAR"] == "up"]
        assert gear_up
        assert all(s.status is StateStatus.REMOVED for s in gear_up)
        assert all(s.vector not in graph.frontier for s in gear_up)


class TestPlan:
    """Test complete planning runs"""

    def test_m1_goal_path(self, m1, cfg):
        """Test goal path and P2 for the single-feature domain"""
        graph = PlannerService.plan(m1, cfg)

        assert graph.goal_path == [StateVector(("low",)), StateVector(("ok",))]
        assert graph.goal_path_prob == pytest.approx(0.99)
        assert graph.p2 == pytest.approx(0.99)
        assert graph.discarded_mass == 0

    def test_flight_takes_direct_path(self, flight, cfg):
        """Test best-first search finds the direct approach"""
        graph = PlannerService.plan(flight, cfg)

        assert len(graph.goal_path) == 4
        assert graph.goal_path_prob == pytest.approx(0.1945)
        locations = [flight.assignment(v)["LOC"] for v in graph.goal_path]
        assert locations == ["FIX3", "FIX3", "FIX3", "FIX4"]
        assert graph.states[graph.goal_path[2]].prob == pytest.approx(0.243125)

    def test_depth_first_drifts_to_long_path(self, flight, cfg):
        """Test depth-first order settles for the long way round"""
        graph = PlannerService.plan(flight, cfg.model_copy(update={"order": ExpansionOrder.DEPTH_FIRST}))

        locations = [flight.assignment(v)["LOC"] for v in graph.goal_path]
        assert "FIX6" in locations
        assert graph.goal_path_prob < 0.1945

    def test_seeded_depth_first_is_reproducible(self, flight, cfg):
        """Test same order seed gives the same plan"""
        seeded = cfg.model_copy(update={"order": ExpansionOrder.DEPTH_FIRST, "order_seed": 7})

        first = PlannerService.plan(flight, seeded)
        second = PlannerService.plan(flight, seeded)

        assert first.goal_path == second.goal_path
        assert [s.expansion_index for s in first.sorted_states()] == [
            s.expansion_index for s in second.sorted_states()
        ]

    def test_diamond_join_sums_both_branches(self, diamond, cfg):
        """Test join state collects mass from both branches"""
        graph = PlannerService.plan(diamond, cfg)

        join = diamond.vector({"POS": "join", "FLAG": "off"})
        goal = diamond.vector({"POS": "join", "FLAG": "on"})
        assert graph.states[join].prob == pytest.approx(0.51)
        assert graph.states[goal].prob == pytest.approx(0.255)
        assert graph.goal_path_prob == pytest.approx(0.135)
        assert diamond.assignment(graph.goal_path[1])["POS"] == "right"
        assert graph.p2 == pytest.approx(0.255)

    def test_removed_state_reenters_when_merged_above_p1(self, diamond, cfg):
        """Test a removed state comes back once merged mass clears P1"""
        graph = PlannerService.plan(diamond, cfg.model_copy(update={"initial_p1": 0.25}))

        join = graph.states[diamond.vector({"POS": "join", "FLAG": "off"})]
        assert join.status is StateStatus.EXPANDED
        assert join.prob == pytest.approx(0.51)
        assert graph.goal_found

    def test_everything_removed_is_a_planning_failure(self, diamond, cfg):
        """Test P1 above every state fails to reach the goal"""
        with pytest.raises(PlanningFailure) as exc:
            PlannerService.plan(diamond, cfg.model_copy(update={"initial_p1": 0.7}))
        assert exc.value.details["p1"] == 0.7

    def test_unguardable_state_is_a_planning_failure(self, cfg):
        """Test unguardable state surfaces as planning failure"""
        kb = KnowledgeBaseService.build(guard_document(6.0))

        with pytest.raises(PlanningFailure) as exc:
            PlannerService.plan(kb, cfg)
        assert exc.value.details["witness"] == [{"ALT": "low"}]

    def test_truncated_run_warns(self, m1, caplog):
        """Test hitting max_expansions marks the plan truncated"""
        with caplog.at_level(logging.WARNING, logger="app.services.planner_service"):
            graph = PlannerService.plan(m1, PlannerConfig(max_expansions=1))

        assert graph.truncated
        assert "stopped after 1 expansions" in caplog.text
        assert graph.goal_path_prob == pytest.approx(0.99)

    def test_truncated_run_with_unguarded_ttf_state_fails(self):
        """Test stopping early is a failure when a TTF state is still unexpanded"""
        kb = KnowledgeBaseService.load_knowledge_base(sink_document())

        with pytest.raises(PlanningFailure) as exc:
            PlannerService.plan(kb, PlannerConfig(max_expansions=1))

        assert exc.value.details["witness"] == [{"ALT": "low", "POS": "start"}]
        assert exc.value.details["expansions"] == 1
        assert "left unguarded" in exc.value.message

    def test_untruncated_sink_run_guards_every_ttf_state(self, cfg):
        """Test the same knowledge base plans safely without an expansion limit"""
        kb = KnowledgeBaseService.load_knowledge_base(sink_document())

        graph = PlannerService.plan(kb, cfg)

        low = [s for s in graph.states.values() if not s.is_failure and kb.assignment(s.vector)["ALT"] == "low"]
        assert not graph.truncated
        assert len(low) == 2
        assert all(s.action_kind is ActionKind.PREEMPTIVE for s in low)
        assert all(s.chosen_action.name == "climb" for s in low)

    @pytest.mark.parametrize("name", ["micro_m1", "micro_diamond", "micro_chain", "flight_fix3_fix4"])
    def test_expands_most_probable_state_first(self, name, cfg):
        """Test each expansion takes the most probable frontier state"""
        kb = load(name)
        graph = PlannerService.initialize(kb, cfg)

        while graph.frontier:
            best = max(graph.states[v].prob for v in graph.frontier)
            record = PlannerService.expand_one(graph, kb, cfg)
            assert record.prob >= best - 1e-12

    @pytest.mark.parametrize("name", ["micro_m1", "micro_chain", "flight_fix3_fix4", "flight_tornado"])
    def test_every_live_ttf_state_is_guarded(self, name, cfg):
        """Test every live TTF state gets a preemptive action"""
        kb = load(name)
        graph = PlannerService.plan(kb, cfg)

        for state in graph.states.values():
            if not state.is_live:
                continue
            tset = KnowledgeBaseService.matching_set(state.vector, kb)
            if tset is not None and tset.ttfs:
                assert state.status is StateStatus.EXPANDED
                assert state.action_kind is ActionKind.PREEMPTIVE
                assert state.chosen_action.t_delay < state.critical_time

    def test_runs_are_deterministic(self, flight, cfg):
        """Test repeated runs give identical graphs"""
        first = PlannerService.plan(flight, cfg)
        second = PlannerService.plan(flight, cfg)

        assert {v: s.prob for v, s in first.states.items()} == {v: s.prob for v, s in second.states.items()}
        assert first.goal_path == second.goal_path

    def test_compare_orders(self, flight, cfg):
        """Test comparison rows for probabilistic and depth-first runs"""
        rows = PlannerService.compare_orders(flight, cfg, seeds=(None, 3))

        assert [r["order"] for r in rows] == ["probabilistic", "depth_first", "depth_first"]
        assert rows[0]["goal_path_prob"] == pytest.approx(0.1945)
        assert rows[1]["goal_path_prob"] < rows[0]["goal_path_prob"]


class TestClassifyStates:
    """Test goal, goal-reaching and dead-end classification"""

    def test_flight_classes(self, flight, cfg):
        """Test goal, goal-reaching and dead-end classes on the flight domain"""
        graph = PlannerService.plan(flight, cfg)

        traffic = flight.vector({"LOC": "FIX3", "HEAD": "W", "OBS": "FIX4", "ALT": "ok",
                                 "GEAR": "down", "TRAFFIC": "final"})
        assert graph.states[traffic].state_class is StateClass.DEADEND
        assert graph.states[flight.initial_states[0]].state_class is StateClass.GOAL_REACHING
        assert graph.states[graph.goal_path[-1]].state_class is StateClass.GOAL
        assert graph.stats["deadend_by_necessity"] >= 1

    def test_chain_deadend_by_necessity(self, cfg):
        """Test dead end with nothing to do is counted as by necessity"""
        kb = load("micro_chain")
        graph = PlannerService.plan(kb, cfg)

        drifted = graph.states[kb.vector({"A": "q", "B": "x"})]
        assert drifted.state_class is StateClass.DEADEND
        assert graph.stats["deadend_by_necessity"] == 1
        assert graph.stats["class_failure"] == 1
        assert graph.p2 == pytest.approx(0.495)

    def test_stats_add_up(self, flight, cfg):
        """Test class counts add up to the number of states"""
        graph = PlannerService.plan(flight, cfg)

        classes = sum(v for k, v in graph.stats.items() if k.startswith("class_"))
        assert classes == graph.stats["states"] == len(graph.states)


class TestGearFault:
    """Test pruning of a rare fault that doubles the state space"""

    def test_raising_p1_halves_the_work(self, cfg):
        """Test pruning the rare gear fault halves the expansions"""
        kb = load("flight_gear")

        full = PlannerService.plan(kb, cfg)
        pruned = PlannerService.plan(kb, cfg.model_copy(update={"initial_p1": 0.02}))

        full_expanded = full.count(status=StateStatus.EXPANDED)
        pruned_expanded = pruned.count(status=StateStatus.EXPANDED)
        assert pruned_expanded <= full_expanded / 2
        assert pruned.goal_path_prob == pytest.approx(full.goal_path_prob, rel=0.05)
        assert all(
            kb.assignment(s.vector)["GEAR"] == "down"
            for s in pruned.states.values()
            if s.status is StateStatus.EXPANDED
        )


def enumerate_path_mass(graph, kb):
    """Mass per state summed over every path from the initial states, recomputed from the KB."""
    mass = defaultdict(float)
    prior = 1.0 / len(kb.initial_states)

    def walk(vector, carried):
        mass[vector] += carried
        state = graph.states[vector]
        if state.is_failure or state.status is not StateStatus.EXPANDED:
            return
        tset = KnowledgeBaseService.matching_set(vector, kb)
        fractions = []
        total = 0.0
        for member in tset.members if tset else ():
            c = ProbabilityService.cum_prob(member.curve, state.critical_time)
            total += c
            fractions.append((kb.apply(vector, member.post, failed=member.is_failure), c))
        if state.chosen_action is not None:
            share = 1.0 - total
            if state.action_kind is ActionKind.NONPREEMPTIVE:
                share /= 2
            fractions.append((kb.apply(vector, state.chosen_action.post), share))
        for target, fraction in fractions:
            walk(target, carried * fraction)

    for vector in kb.initial_states:
        walk(vector, prior)
    return mass


class TestPathEnumerationOracle:
    """Compare state probabilities against brute-force path sums on acyclic models"""

    @pytest.mark.parametrize("name", ["micro_m1", "micro_diamond", "micro_chain"])
    def test_probabilities_match_path_sums(self, name, cfg):
        """Test state probabilities equal brute-force path sums"""
        kb = load(name)
        graph = PlannerService.plan(kb, cfg)

        mass = enumerate_path_mass(graph, kb)

        assert graph.discarded_mass == 0
        assert set(mass) == set(graph.states)
        for vector, state in graph.states.items():
            assert state.prob == pytest.approx(mass[vector], abs=1e-12)
            assert not math.isnan(state.prob)


class TestDiscardedMass:
    """Test accounting for mass that arrives at already expanded states"""

    @pytest.fixture
    def late_join(self):
        return KnowledgeBaseService.load_knowledge_base(late_join_document())

    def test_late_branch_mass_is_recorded(self, late_join, cfg, caplog):
        """Test the late branch's mass lands in discarded_mass, not in prob"""
        with caplog.at_level(logging.WARNING, logger="app.services.planner_service"):
            graph = PlannerService.plan(late_join, cfg)

        join = graph.states[StateVector(("join", "off"))]
        assert join.prob == pytest.approx(0.6)
        assert join.discarded_mass == pytest.approx(0.4)
        assert graph.discarded_mass == pytest.approx(0.4)
        assert "dropped 0.4 mass" in caplog.text

    def test_join_expanded_before_late_branch(self, late_join, cfg):
        """Test best-first order expands the join ahead of the unlikely branch"""
        graph = PlannerService.plan(late_join, cfg)

        join = graph.states[StateVector(("join", "off"))]
        right = graph.states[StateVector(("right", "off"))]
        assert join.expansion_index < right.expansion_index

    def test_discarded_mass_bounds_path_sums(self, late_join, cfg):
        """Test prob underestimates the path sum by at most the discarded mass"""
        graph = PlannerService.plan(late_join, cfg)

        mass = enumerate_path_mass(graph, late_join)

        for vector, state in graph.states.items():
            assert state.prob <= mass[vector] + 1e-12
        join = StateVector(("join", "off"))
        assert graph.states[join].prob + graph.states[join].discarded_mass == pytest.approx(mass[join])
        goal = graph.goal_path[-1]
        assert graph.goal_path_prob <= mass[goal] + 1e-12
        assert mass[goal] <= graph.goal_path_prob + graph.discarded_mass + 1e-12
        assert graph.goal_path_prob == pytest.approx(0.3)
        assert mass[goal] == pytest.approx(0.5)
