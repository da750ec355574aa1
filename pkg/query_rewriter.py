"""
WawPart - Query Rewriter
Locates triple patterns on shards and rewrites workload queries into
federated plans executed at the Primary Processing Node
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, List, Mapping, Sequence, Tuple

from feature_extractor import Feature, JoinLink, extract_query_features
from partition_engine import Partitioning, ShardId
from sparql_query import Const, FederatedQuery, PatternTerm, Query, TriplePattern, serialize_federated

logger = logging.getLogger(__name__)


class RewriteError(ValueError):
    """A query that cannot be routed to the shards of a partitioning."""


class UnknownPredicateError(RewriteError):
    def __init__(self, predicate: str):
        super().__init__(f"unknown predicate {predicate}: no shard holds it")
        self.predicate = predicate


class SplitPredicateError(RewriteError):
    def __init__(self, predicate: str, shards: Sequence[int]):
        super().__init__(f"predicate {predicate} is split across shards {sorted(shards)}")
        self.predicate = predicate
        self.shards = tuple(sorted(shards))


class JoinLocality(str, Enum):
    LOCAL = "local"
    DISTRIBUTED = "distributed"


def locate_pattern(tp: TriplePattern, meta: Partitioning) -> ShardId:
    """
    Shard holding every triple the pattern can match.

    A constant object resolves through its PO feature when homed, else
    through the P feature. A variable object needs the whole predicate on
    one shard.

    Raises:
        RewriteError: variable predicate
        UnknownPredicateError: predicate absent from the metadata
        SplitPredicateError: variable-object pattern over a split predicate
    """
    if not isinstance(tp.p, Const):
        raise RewriteError(f"cannot locate pattern with variable predicate: {tp.n3()}")
    predicate = tp.p.term

    if isinstance(tp.o, Const):
        home = meta.home_of(Feature.po(predicate, tp.o.term))
        if home is not None:
            return home

    home = meta.home_of(Feature.p(predicate))
    if home is None:
        raise UnknownPredicateError(predicate.n3())
    if isinstance(tp.o, Const):
        return home

    holders = meta.predicate_shards(predicate)
    if len(holders) > 1:
        raise SplitPredicateError(predicate.n3(), holders)
    return next(iter(holders)) if holders else home


@dataclass(frozen=True)
class FederatedPlan:
    query: Query
    federated: FederatedQuery
    pattern_shards: Tuple[ShardId, ...]
    join_annotations: Tuple[Tuple[JoinLink, JoinLocality], ...]

    @property
    def ppn(self) -> ShardId:
        return self.federated.ppn

    @property
    def rewritten(self) -> bool:
        return len(self.federated.groups) > 1

    @property
    def remote_shards(self) -> Tuple[ShardId, ...]:
        return tuple(shard for shard, _ in self.federated.remote_groups)

    @property
    def distributed_links(self) -> int:
        return sum(1 for _, locality in self.join_annotations if locality is JoinLocality.DISTRIBUTED)

    def join_terms(self) -> FrozenSet[PatternTerm]:
        return frozenset(
            link.term for link, locality in self.join_annotations
            if locality is JoinLocality.DISTRIBUTED
        )

    @property
    def distributed_joins(self) -> int:
        """Distinct join variables (or constants) shared across shards."""
        return len(self.join_terms())

    def to_sparql(self, endpoints: Mapping[int, str]) -> str:
        return serialize_federated(self.federated, endpoints)


def rewrite(q: Query, meta: Partitioning) -> FederatedPlan:
    """
    Group the query's patterns by shard. The PPN is the shard holding most
    patterns (ties: smaller id) and leads the plan; the other groups follow
    in order of first appearance, one group per shard.

    Raises:
        RewriteError: a pattern cannot be located
    """
    shards = tuple(locate_pattern(tp, meta) for tp in q.patterns)
    counts: Dict[ShardId, int] = {}
    for shard in shards:
        counts[shard] = counts.get(shard, 0) + 1
    ppn = min(counts, key=lambda s: (-counts[s], s))

    grouped: Dict[ShardId, List[TriplePattern]] = {ppn: []}
    for tp, shard in zip(q.patterns, shards):
        grouped.setdefault(shard, []).append(tp)

    federated = FederatedQuery(
        base_query_id=q.id,
        ppn=ppn,
        projected=q.projected,
        groups=tuple((shard, tuple(patterns)) for shard, patterns in grouped.items()),
    )
    annotations = tuple(
        (link, JoinLocality.DISTRIBUTED if shards[link.left] != shards[link.right] else JoinLocality.LOCAL)
        for link in extract_query_features(q).joins
    )
    plan = FederatedPlan(q, federated, shards, annotations)
    logger.debug(f"{q.id}: PPN {ppn}, remote {list(plan.remote_shards)}, "
                 f"{plan.distributed_joins} distributed joins")
    return plan


def rewrite_workload(queries: Sequence[Query], meta: Partitioning) -> Dict[str, FederatedPlan]:
    return {q.id: rewrite(q, meta) for q in queries}
