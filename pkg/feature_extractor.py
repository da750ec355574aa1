"""
WawPart - Feature Extractor
Extracts P/PO features and SS/OS/OO join links from workload queries, and
materializes feature statistics from the knowledge graph indices
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from rdf_store import KnowledgeGraph, Term
from sparql_query import Const, PatternTerm, Query

logger = logging.getLogger(__name__)


class FeatureExtractionError(ValueError):
    """A query pattern that no feature covers."""


class FeatureKind(str, Enum):
    P = "P"
    PO = "PO"


class JoinKind(str, Enum):
    SS = "SS"
    OS = "OS"
    OO = "OO"


@dataclass(frozen=True)
class Feature:
    """A predicate (P) or predicate-object (PO) key over the triple set."""
    kind: FeatureKind
    predicate: Term
    object: Optional[Term] = None

    def __post_init__(self):
        if not self.predicate.is_iri:
            raise ValueError(f"Feature predicate must be an IRI: {self.predicate}")
        if (self.kind is FeatureKind.PO) != (self.object is not None):
            raise ValueError(f"{self.kind.value} feature object mismatch")

    @classmethod
    def p(cls, predicate: Term) -> "Feature":
        return cls(FeatureKind.P, predicate)

    @classmethod
    def po(cls, predicate: Term, obj: Term) -> "Feature":
        return cls(FeatureKind.PO, predicate, obj)

    @property
    def key(self) -> str:
        """Canonical form: `P|<pred>` or `PO|<pred>|<obj>`."""
        if self.kind is FeatureKind.P:
            return f"P|{self.predicate.lexical}"
        return f"PO|{self.predicate.lexical}|{self.object.lexical}"

    @classmethod
    def from_key(cls, key: str) -> "Feature":
        kind, rest = key.split("|", 1)
        if kind == FeatureKind.P.value:
            return cls.p(Term.iri(rest))
        if kind == FeatureKind.PO.value:
            predicate, obj = rest.split("|", 1)
            obj_term = Term.literal(obj) if obj.startswith('"') else Term.iri(obj)
            return cls.po(Term.iri(predicate), obj_term)
        raise ValueError(f"Unknown feature key: {key}")

    @property
    def base(self) -> "Feature":
        """The P feature this feature refines (itself for P)."""
        return self if self.kind is FeatureKind.P else Feature.p(self.predicate)

    def sort_key(self) -> Tuple[int, str, str]:
        return (0 if self.kind is FeatureKind.P else 1,
                self.predicate.lexical,
                self.object.lexical if self.object else "")

    def __str__(self) -> str:
        return self.key


def sorted_features(features: Iterable[Feature]) -> List[Feature]:
    return sorted(features, key=Feature.sort_key)


@dataclass(frozen=True)
class JoinLink:
    """
    Two patterns of one query sharing a position. SS and OO pairs are stored
    once with left < right; OS is directional (left's object = right's subject).
    """
    kind: JoinKind
    left: int
    right: int
    term: PatternTerm

    def __post_init__(self):
        if self.left == self.right:
            raise ValueError("JoinLink endpoints must differ")
        if self.kind is not JoinKind.OS and self.left > self.right:
            raise ValueError(f"{self.kind.value} links are stored with left < right")


@dataclass(frozen=True)
class QueryFeatures:
    query_id: str
    features: FrozenSet[Feature]
    joins: Tuple[JoinLink, ...]
    per_pattern_feature: Mapping[int, Feature]

    @property
    def pattern_count(self) -> int:
        return len(self.per_pattern_feature)


@dataclass(frozen=True)
class FeatureStats:
    count: int
    triple_ids: Tuple[int, ...]


@dataclass
class FeatureCatalog:
    """
    Dataset feature statistics plus the featurized workload. Triples matched
    by a PO key are owned by that PO feature; its P feature owns the residual.
    """
    dataset_features: Dict[Feature, FeatureStats]
    workload: Dict[str, QueryFeatures]
    total_triples: int
    _owned: Dict[Feature, Tuple[int, ...]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        refined: Dict[Term, Set[int]] = {}
        for feature, stats in self.dataset_features.items():
            if feature.kind is FeatureKind.PO:
                self._owned[feature] = stats.triple_ids
                refined.setdefault(feature.predicate, set()).update(stats.triple_ids)
        for feature, stats in self.dataset_features.items():
            if feature.kind is FeatureKind.P:
                taken = refined.get(feature.predicate, set())
                self._owned[feature] = tuple(t for t in stats.triple_ids if t not in taken)

    def count(self, feature: Feature) -> int:
        stats = self.dataset_features.get(feature)
        return stats.count if stats else 0

    def owned_ids(self, feature: Feature) -> Tuple[int, ...]:
        if feature not in self._owned:
            raise KeyError(f"Unknown feature: {feature.key}")
        return self._owned[feature]

    def owned_count(self, feature: Feature) -> int:
        return len(self.owned_ids(feature))

    def workload_features(self) -> Set[Feature]:
        return {f for qf in self.workload.values() for f in qf.features}

    def export(self) -> Dict:
        """JSON-ready document keyed by canonical feature strings."""
        return {
            "total_triples": self.total_triples,
            "dataset_features": {
                f.key: {"count": self.dataset_features[f].count, "owned": self.owned_count(f)}
                for f in sorted_features(self.dataset_features)
            },
            "workload": {
                qid: {
                    "features": [f.key for f in sorted_features(qf.features)],
                    "joins": [
                        {"kind": j.kind.value, "left": j.left, "right": j.right}
                        for j in qf.joins
                    ],
                }
                for qid, qf in sorted(self.workload.items())
            },
        }


def export_catalog(catalog: FeatureCatalog) -> str:
    return json.dumps(catalog.export(), indent=2, sort_keys=True)


def _pattern_feature(query: Query, index: int) -> Feature:
    pattern = query.patterns[index]
    if not isinstance(pattern.p, Const):
        raise FeatureExtractionError(
            f"unfeaturizable pattern {index} in query {query.id}: variable predicate {pattern.p.n3()}"
        )
    if isinstance(pattern.o, Const):
        return Feature.po(pattern.p.term, pattern.o.term)
    return Feature.p(pattern.p.term)


def _join_links(query: Query) -> List[JoinLink]:
    links: List[JoinLink] = []
    patterns = query.patterns
    for i, j in combinations(range(len(patterns)), 2):
        if patterns[i].s == patterns[j].s:
            links.append(JoinLink(JoinKind.SS, i, j, patterns[i].s))
        if patterns[i].o == patterns[j].o:
            links.append(JoinLink(JoinKind.OO, i, j, patterns[i].o))
    for i in range(len(patterns)):
        for j in range(len(patterns)):
            if i != j and patterns[i].o == patterns[j].s:
                links.append(JoinLink(JoinKind.OS, i, j, patterns[i].o))
    return links


def extract_query_features(query: Query) -> QueryFeatures:
    """
    Featurize a query: Const predicate + Const object gives PO, Const
    predicate + Var object gives P. Join links cover every pattern pair that
    shares a subject/object position.

    Raises:
        FeatureExtractionError: a pattern has a variable predicate
    """
    per_pattern = {i: _pattern_feature(query, i) for i in range(len(query.patterns))}
    return QueryFeatures(
        query_id=query.id,
        features=frozenset(per_pattern.values()),
        joins=tuple(_join_links(query)),
        per_pattern_feature=per_pattern,
    )


def extract_dataset_features(graph: KnowledgeGraph,
                             workload: Sequence[QueryFeatures]) -> FeatureCatalog:
    """
    Build the catalog: one P feature per predicate in the graph, plus every
    workload feature with its index-backed count (0 when unmatched).
    """
    dataset: Dict[Feature, FeatureStats] = {}
    for predicate, ids in graph.index_p.items():
        dataset[Feature.p(predicate)] = FeatureStats(len(ids), ids)

    unmatched = 0
    for qf in workload:
        for feature in qf.features:
            if feature in dataset:
                continue
            if feature.kind is FeatureKind.PO:
                ids = tuple(graph.lookup_po(feature.predicate, feature.object))
            else:
                ids = tuple(graph.lookup_p(feature.predicate))
            if not ids:
                unmatched += 1
            dataset[feature] = FeatureStats(len(ids), ids)

    workload_map: Dict[str, QueryFeatures] = {}
    for qf in workload:
        if qf.query_id in workload_map:
            raise FeatureExtractionError(f"Duplicate query id in workload: {qf.query_id}")
        workload_map[qf.query_id] = qf

    logger.info(f"Feature catalog: {len(dataset)} dataset features, "
                f"{len(workload_map)} queries, {unmatched} unmatched workload features")
    return FeatureCatalog(dataset_features=dataset, workload=workload_map, total_triples=len(graph))

