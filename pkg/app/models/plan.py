import heapq
import random
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

from app.errors import EmptyFrontierError
from app.models.knowledge_base import ActionTransition, KnowledgeBase, StateVector
from app.models.probability import ActionKind, OffspringContribution, TransitionKind
from app.schemas.planner import ExpansionOrder, PlannerConfig


class StateStatus(str, Enum):
    UNEXPANDED = "unexpanded"
    EXPANDED = "expanded"
    REMOVED = "removed"


class StateClass(str, Enum):
    UNKNOWN = "unknown"
    GOAL = "goal"
    GOAL_REACHING = "goal_reaching"
    DEADEND = "deadend"
    FAILURE = "failure"
    REMOVED = "removed"


@dataclass
class PlannedState:
    vector: StateVector
    prob: float
    status: StateStatus = StateStatus.UNEXPANDED
    state_class: StateClass = StateClass.UNKNOWN
    chosen_action: Optional[ActionTransition] = None
    action_kind: ActionKind = ActionKind.NONE
    critical_time: Optional[float] = None
    discarded_mass: float = 0.0
    # Expansion counter value when the state was first reached.
    clock_origin: int = 0
    expansion_index: Optional[int] = None

    @property
    def is_failure(self) -> bool:
        return self.vector.failed

    @property
    def is_live(self) -> bool:
        """Neither removed nor a failure sink."""
        return self.status is not StateStatus.REMOVED and not self.vector.failed


@dataclass(frozen=True)
class Edge:
    source: StateVector
    via: str
    kind: TransitionKind
    target: StateVector
    fraction: float
    mass: float


@dataclass(frozen=True)
class ExpansionRecord:
    state: StateVector
    prob: float
    action: Optional[str]
    action_kind: ActionKind
    critical_time: float
    contributions: Tuple[OffspringContribution, ...]
    discarded: float


class Frontier:
    """Unexpanded states awaiting expansion.

    Probabilistic order is a max-heap on probability with lazy invalidation, so a
    merge can raise a queued state's priority; ties go to the smaller vector.
    Depth-first order is a stack where a state keeps its first position.
    """

    def __init__(self, order: ExpansionOrder = ExpansionOrder.PROBABILISTIC, seed: Optional[int] = None):
        self.order = ExpansionOrder(order)
        self._heap: List[list] = []
        self._stack: List[list] = []
        self._entries: Dict[StateVector, list] = {}
        self._rng = random.Random(seed) if seed is not None else None

    def push(self, vector: StateVector, prob: float) -> None:
        old = self._entries.get(vector)
        if self.order is ExpansionOrder.DEPTH_FIRST:
            if old is None:
                entry = [vector, True]
                self._entries[vector] = entry
                self._stack.append(entry)
            return

        if old is not None:
            if old[0] == -prob:
                return
            old[-1] = False
        entry = [-prob, vector, True]
        self._entries[vector] = entry
        heapq.heappush(self._heap, entry)

    def push_all(self, items: Iterable[Tuple[StateVector, float]]) -> None:
        batch = sorted(items)
        if self.order is ExpansionOrder.DEPTH_FIRST and self._rng is not None:
            self._rng.shuffle(batch)
        for vector, prob in batch:
            self.push(vector, prob)

    def discard(self, vector: StateVector) -> None:
        entry = self._entries.pop(vector, None)
        if entry is not None:
            entry[-1] = False

    def pop(self) -> StateVector:
        container = self._stack if self.order is ExpansionOrder.DEPTH_FIRST else self._heap
        while container:
            if self.order is ExpansionOrder.DEPTH_FIRST:
                entry = container.pop()
            else:
                entry = heapq.heappop(container)
            if entry[-1]:
                vector = entry[-2]
                del self._entries[vector]
                return vector
        raise EmptyFrontierError("frontier is empty")

    def __contains__(self, vector: StateVector) -> bool:
        return vector in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __bool__(self) -> bool:
        return bool(self._entries)

    def __iter__(self) -> Iterator[StateVector]:
        return iter(list(self._entries))


@dataclass
class PlanGraph:
    kb: KnowledgeBase
    config: PlannerConfig
    frontier: Frontier
    p1: float
    states: Dict[StateVector, PlannedState] = field(default_factory=dict)
    edges: List[Edge] = field(default_factory=list)
    p2: Optional[float] = None
    goal_path: Optional[List[StateVector]] = None
    goal_path_prob: float = 0.0
    goal_found: bool = False
    expansions: int = 0
    discarded_mass: float = 0.0
    truncated: bool = False
    planned_actions: Dict[str, ActionTransition] = field(default_factory=dict)
    stats: Dict[str, int] = field(default_factory=dict)
    _outgoing: Dict[StateVector, List[Edge]] = field(default_factory=lambda: defaultdict(list), repr=False)

    def add_edge(self, edge: Edge) -> None:
        self.edges.append(edge)
        self._outgoing[edge.source].append(edge)

    def outgoing(self, vector: StateVector) -> List[Edge]:
        return self._outgoing.get(vector, [])

    def incoming(self, vector: StateVector) -> List[Edge]:
        return [e for e in self.edges if e.target == vector]

    def get(self, vector: StateVector) -> Optional[PlannedState]:
        return self.states.get(vector)

    def sorted_states(self) -> List[PlannedState]:
        return [self.states[v] for v in sorted(self.states)]

    def count(self, **criteria) -> int:
        return sum(
            all(getattr(s, k) == v for k, v in criteria.items()) for s in self.states.values()
        )
