from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import Dict, Iterable, Mapping, Optional, Tuple

from app.schemas.curve import DelayedExponentialCurve, PiecewiseCurve

Curve = PiecewiseCurve | DelayedExponentialCurve


@dataclass(frozen=True, order=True)
class StateVector:
    """Total assignment, one value per feature in knowledge-base feature order.

    ``failed`` marks the target of a temporal transition to failure; a failure
    vector never equals an ordinary vector with the same values.
    """

    values: Tuple[str, ...]
    failed: bool = False


@dataclass(frozen=True)
class Condition:
    """Conjunction of feature == value tests, clauses sorted by feature name."""

    clauses: Tuple[Tuple[str, str], ...] = ()

    @classmethod
    def of(cls, mapping: Mapping[str, str]) -> "Condition":
        return cls(tuple(sorted(mapping.items())))

    def as_dict(self) -> Dict[str, str]:
        return dict(self.clauses)

    def __len__(self) -> int:
        return len(self.clauses)


@dataclass(frozen=True)
class Feature:
    name: str
    values: Tuple[str, ...]


@dataclass(frozen=True)
class ActionTransition:
    name: str
    pre: Condition
    post: Condition
    t_delay: float
    test_wcet: float
    action_wcet: float

    @property
    def wcet(self) -> float:
        return self.test_wcet + self.action_wcet


@dataclass(frozen=True)
class TemporalTransition:
    name: str
    post: Condition
    curve: Curve
    is_failure: bool = False


@dataclass(frozen=True)
class TransitionSet:
    pre: Condition
    members: Tuple[TemporalTransition, ...] = ()

    @property
    def ttfs(self) -> Tuple[TemporalTransition, ...]:
        return tuple(m for m in self.members if m.is_failure)


@dataclass(frozen=True)
class KnowledgeBase:
    """Immutable domain knowledge for one planning cycle."""

    features: Tuple[Feature, ...]
    initial_states: Tuple[StateVector, ...]
    goal: Condition
    actions: Tuple[ActionTransition, ...] = ()
    temporal_sets: Tuple[TransitionSet, ...] = ()
    name: str = "knowledge-base"
    description: Optional[str] = field(default=None, compare=False)

    @cached_property
    def feature_index(self) -> Dict[str, int]:
        return {f.name: i for i, f in enumerate(self.features)}

    @cached_property
    def _compiled(self) -> Dict[Condition, Tuple[Tuple[int, str], ...]]:
        conditions = [self.goal]
        conditions += [a.pre for a in self.actions] + [a.post for a in self.actions]
        for tset in self.temporal_sets:
            conditions.append(tset.pre)
            conditions += [m.post for m in tset.members]
        return {c: self._index_clauses(c) for c in conditions}

    def _index_clauses(self, condition: Condition) -> Tuple[Tuple[int, str], ...]:
        index = self.feature_index
        return tuple((index[f], v) for f, v in condition.clauses)

    def _indexed(self, condition: Condition) -> Tuple[Tuple[int, str], ...]:
        compiled = self._compiled.get(condition)
        return compiled if compiled is not None else self._index_clauses(condition)

    def satisfies(self, state: StateVector, condition: Condition) -> bool:
        values = state.values
        return all(values[i] == v for i, v in self._indexed(condition))

    def apply(self, state: StateVector, post: Condition, failed: bool = False) -> StateVector:
        values = list(state.values)
        for i, v in self._indexed(post):
            values[i] = v
        return StateVector(tuple(values), failed)

    def vector(self, assignment: Mapping[str, str]) -> StateVector:
        return StateVector(tuple(assignment[f.name] for f in self.features))

    def assignment(self, state: StateVector) -> Dict[str, str]:
        return {f.name: v for f, v in zip(self.features, state.values)}

    def state_space_size(self) -> int:
        size = 1
        for feature in self.features:
            size *= len(feature.values)
        return size

    def iter_states(self) -> Iterable[StateVector]:
        for values in product(*(f.values for f in self.features)):
            yield StateVector(tuple(values))

    def describe(self, state: StateVector) -> str:
        body = ", ".join(f"{f.name}={v}" for f, v in zip(self.features, state.values))
        return f"FAILURE{{{body}}}" if state.failed else f"{{{body}}}"
