import json
import logging
from itertools import combinations
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

from pydantic import ValidationError

from app.config import get_settings
from app.errors import (
    KnowledgeBaseConsistencyError,
    KnowledgeBaseParseError,
    KnowledgeBaseReferenceError,
    KnowledgeBaseValidationError,
)
from app.models.knowledge_base import (
    ActionTransition,
    Condition,
    Feature,
    KnowledgeBase,
    StateVector,
    TemporalTransition,
    TransitionSet,
)
from app.schemas.knowledge_base import (
    ActionSchema,
    FeatureSchema,
    KnowledgeBaseDocument,
    TemporalSchema,
    TransitionSetSchema,
)
from app.services.probability_service import TOLERANCE, ProbabilityService

logger = logging.getLogger(__name__)

Document = Union[str, bytes, Mapping[str, Any], KnowledgeBaseDocument]


class KnowledgeBaseService:
    """Parse, validate and query knowledge bases."""

    @staticmethod
    def parse_document(document: Document) -> KnowledgeBaseDocument:
        if isinstance(document, KnowledgeBaseDocument):
            return document
        try:
            if isinstance(document, (str, bytes)):
                return KnowledgeBaseDocument.model_validate_json(document)
            return KnowledgeBaseDocument.model_validate(document)
        except ValidationError as e:
            raise KnowledgeBaseParseError(
                "malformed knowledge-base document",
                issues=[
                    {"loc": ".".join(str(p) for p in err["loc"]), "msg": err["msg"]}
                    for err in e.errors()
                ],
            ) from e

    @staticmethod
    def build(document: Document) -> KnowledgeBase:
        """Resolve a document into a KnowledgeBase without semantic validation."""
        doc = KnowledgeBaseService.parse_document(document)

        features = []
        seen = set()
        for f in doc.features:
            if f.name in seen:
                raise KnowledgeBaseReferenceError(f"duplicate feature {f.name!r}", feature=f.name)
            if len(set(f.values)) != len(f.values):
                raise KnowledgeBaseReferenceError(
                    f"duplicate value in feature {f.name!r}", feature=f.name
                )
            seen.add(f.name)
            features.append(Feature(f.name, tuple(f.values)))
        domains = {f.name: set(f.values) for f in features}

        def condition(mapping: Mapping[str, str], where: str) -> Condition:
            for name, value in mapping.items():
                if name not in domains:
                    raise KnowledgeBaseReferenceError(
                        f"{where}: unknown feature {name!r}", where=where, feature=name
                    )
                if value not in domains[name]:
                    raise KnowledgeBaseReferenceError(
                        f"{where}: unknown value {value!r} for feature {name!r}",
                        where=where,
                        feature=name,
                        value=value,
                    )
            return Condition.of(mapping)

        initial = []
        for i, assignment in enumerate(doc.initial_states):
            where = f"initial_states[{i}]"
            condition(assignment, where)
            missing = [f.name for f in features if f.name not in assignment]
            if missing:
                raise KnowledgeBaseReferenceError(
                    f"{where}: no value for feature(s) {', '.join(missing)}", where=where
                )
            initial.append(StateVector(tuple(assignment[f.name] for f in features)))

        actions = tuple(
            ActionTransition(
                name=a.name,
                pre=condition(a.pre, f"action {a.name}.pre"),
                post=condition(a.post, f"action {a.name}.post"),
                t_delay=a.t_delay,
                test_wcet=a.test_wcet,
                action_wcet=a.action_wcet,
            )
            for a in doc.actions
        )
        temporal_sets = tuple(
            TransitionSet(
                pre=condition(s.pre, f"temporal_sets[{i}].pre"),
                members=tuple(
                    TemporalTransition(
                        name=m.name,
                        post=condition(m.post, f"temporal {m.name}.post"),
                        curve=m.curve,
                        is_failure=m.is_failure,
                    )
                    for m in s.members
                ),
            )
            for i, s in enumerate(doc.temporal_sets)
        )

        return KnowledgeBase(
            features=tuple(features),
            initial_states=tuple(initial),
            goal=condition(doc.goal, "goal"),
            actions=actions,
            temporal_sets=temporal_sets,
            name=doc.name or "knowledge-base",
            description=doc.description,
        )

    @staticmethod
    def load_knowledge_base(document: Document) -> KnowledgeBase:
        """Parse, resolve and validate; raises on the first failing stage."""
        kb = KnowledgeBaseService.build(document)
        violations = KnowledgeBaseService.validate_knowledge_base(kb)
        if violations:
            raise KnowledgeBaseValidationError(violations)
        logger.info(
            "loaded knowledge base %s: %d features, %d actions, %d temporal sets",
            kb.name,
            len(kb.features),
            len(kb.actions),
            len(kb.temporal_sets),
        )
        return kb

    @staticmethod
    def load_path(path: Union[str, Path]) -> KnowledgeBase:
        return KnowledgeBaseService.load_knowledge_base(Path(path).read_text())

    @staticmethod
    def validate_knowledge_base(
        kb: KnowledgeBase,
        enumeration_limit: Optional[int] = None,
    ) -> List[Dict[str, Any]]:
        """Every violated invariant, as ``{"kind", "message", ...}`` records."""
        if enumeration_limit is None:
            enumeration_limit = get_settings().ENUMERATION_LIMIT
        violations: List[Dict[str, Any]] = []

        if len(set(kb.initial_states)) != len(kb.initial_states):
            violations.append(
                {"kind": "duplicate_initial_state", "message": "initial states must be pairwise distinct"}
            )

        for action in kb.actions:
            if any(v < 0 for v in (action.t_delay, action.test_wcet, action.action_wcet)):
                violations.append(
                    {"kind": "negative_duration", "action": action.name,
                     "message": f"action {action.name} has a negative duration"}
                )
            pre = action.pre.as_dict()
            if all(pre.get(f) == v for f, v in action.post.clauses):
                violations.append(
                    {"kind": "ineffective_action", "action": action.name,
                     "message": f"action {action.name} post changes nothing its pre constrains"}
                )

        for i, tset in enumerate(kb.temporal_sets):
            total = sum(ProbabilityService.asymptotic_prob(m.curve) for m in tset.members)
            if total > 1 + TOLERANCE:
                violations.append(
                    {"kind": "asymptote_sum", "set": i, "sum": total,
                     "message": f"temporal set {i} asymptotes sum to {total:.6g} > 1.0"}
                )
            for member in tset.members:
                for problem in ProbabilityService.curve_violations(member.curve):
                    violations.append(
                        {"kind": "malformed_curve", "set": i, "transition": member.name,
                         "message": f"{member.name}: {problem}"}
                    )

        violations.extend(KnowledgeBaseService._overlap_violations(kb, enumeration_limit))
        return violations

    @staticmethod
    def _overlap_violations(kb: KnowledgeBase, enumeration_limit: int) -> List[Dict[str, Any]]:
        witnesses: Dict[Tuple[int, int], StateVector] = {}
        if kb.state_space_size() <= enumeration_limit:
            for state in kb.iter_states():
                matched = [i for i, s in enumerate(kb.temporal_sets) if kb.satisfies(state, s.pre)]
                for pair in combinations(matched, 2):
                    witnesses.setdefault(pair, state)
        else:
            # Conjunctions overlap iff no feature is pinned to different values by both.
            for (i, a), (j, b) in combinations(enumerate(kb.temporal_sets), 2):
                pa, pb = a.pre.as_dict(), b.pre.as_dict()
                if any(f in pb and pb[f] != v for f, v in pa.items()):
                    continue
                merged = {**pa, **pb}
                witnesses[(i, j)] = StateVector(
                    tuple(merged.get(f.name, f.values[0]) for f in kb.features)
                )

        return [
            {"kind": "overlapping_sets", "sets": [i, j], "witness": kb.assignment(state),
             "message": f"temporal sets {i} and {j} both match {kb.describe(state)}"}
            for (i, j), state in sorted(witnesses.items())
        ]

    @staticmethod
    def matching_set(state: StateVector, kb: KnowledgeBase) -> Optional[TransitionSet]:
        """The temporal set whose pre ``state`` satisfies, without scanning actions."""
        matched = [s for s in kb.temporal_sets if kb.satisfies(state, s.pre)]
        if len(matched) > 1:
            raise KnowledgeBaseConsistencyError(
                f"{len(matched)} temporal sets match {kb.describe(state)}",
                state=kb.assignment(state),
            )
        return matched[0] if matched else None

    @staticmethod
    def matching_transitions(
        state: StateVector,
        kb: KnowledgeBase,
    ) -> Tuple[Optional[TransitionSet], List[ActionTransition]]:
        tset = KnowledgeBaseService.matching_set(state, kb)
        actions = [a for a in kb.actions if kb.satisfies(state, a.pre)]
        return tset, actions

    @staticmethod
    def to_document(kb: KnowledgeBase) -> KnowledgeBaseDocument:
        return KnowledgeBaseDocument(
            name=kb.name,
            description=kb.description,
            features=[FeatureSchema(name=f.name, values=list(f.values)) for f in kb.features],
            initial_states=[kb.assignment(s) for s in kb.initial_states],
            goal=kb.goal.as_dict(),
            actions=[
                ActionSchema(
                    name=a.name,
                    pre=a.pre.as_dict(),
                    post=a.post.as_dict(),
                    t_delay=a.t_delay,
                    test_wcet=a.test_wcet,
                    action_wcet=a.action_wcet,
                )
                for a in kb.actions
            ],
            temporal_sets=[
                TransitionSetSchema(
                    pre=s.pre.as_dict(),
                    members=[
                        TemporalSchema(
                            name=m.name, post=m.post.as_dict(), curve=m.curve, is_failure=m.is_failure
                        )
                        for m in s.members
                    ],
                )
                for s in kb.temporal_sets
            ],
        )

    @staticmethod
    def dump_knowledge_base(kb: KnowledgeBase) -> str:
        document = KnowledgeBaseService.to_document(kb)
        return json.dumps(document.model_dump(mode="json", by_alias=True), indent=2)
