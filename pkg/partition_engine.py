"""
WawPart - Partition Engine
Turns a workload cluster cut into k disjoint shards: replicated-feature
scoring, proximity placement of unclustered features and greedy balancing
of unused features
"""

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Set, Tuple, Union

from pydantic import BaseModel, Field, model_validator

from feature_extractor import Feature, FeatureCatalog, FeatureKind, QueryFeatures, sorted_features
from query_clustering import ClusterCut
from rdf_store import KnowledgeGraph, Term, write_ntriples

logger = logging.getLogger(__name__)

ShardId = int
Score = Fraction


class PartitioningError(ValueError):
    """Partitioning input or output that breaks the shard invariants."""


class ScoreWeights(BaseModel):
    """Weights of the replicated-feature score."""
    w1: float = Field(default=1.0, ge=0, description="Peer features in the candidate group")
    w2: float = Field(default=1.0, ge=0, description="Queries fully covered by the candidate group")
    w3: float = Field(default=1.0, ge=0, description="Triples matched by the candidate group")
    w4: float = Field(default=1.0, ge=0, description="Peer features in the whole workload")
    w5: float = Field(default=1.0, ge=0, description="Queries using the feature")
    w6: float = Field(default=1.0, ge=0, description="Dataset size")
    w7: float = Field(default=1.0, ge=0, description="Join links kept local by the placement")

    @model_validator(mode="after")
    def _any_positive(self) -> "ScoreWeights":
        if not any(w > 0 for w in self.as_tuple()):
            raise ValueError("At least one score weight must be positive")
        return self

    def as_tuple(self) -> Tuple[float, ...]:
        return (self.w1, self.w2, self.w3, self.w4, self.w5, self.w6, self.w7)

    def exact(self) -> Tuple[Fraction, ...]:
        """Weights as exact rationals of their decimal form."""
        return tuple(Fraction(str(w)) for w in self.as_tuple())


@dataclass
class FeatureGroup:
    group_id: int
    features: Set[Feature]
    source_queries: Set[str]

    def __post_init__(self):
        if self.source_queries and not self.features:
            raise PartitioningError(f"Group {self.group_id} has queries but no features")


@dataclass
class ReplicatedFeature:
    feature: Feature
    groups: FrozenSet[int]
    per_group_score: Dict[int, Score] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.groups) < 2:
            raise PartitioningError(f"{self.feature.key} appears in fewer than two groups")


class BalanceReport(BaseModel):
    mean: float = Field(description="Exact average shard size n/k")
    deviations: Dict[int, float] = Field(description="Relative deviation of each shard from the mean")
    epsilon: float = Field(description="Reporting threshold for |deviation|")
    within_epsilon: bool

    @classmethod
    def of(cls, sizes: Mapping[int, int], epsilon: float) -> "BalanceReport":
        total = sum(sizes.values())
        mean = total / len(sizes) if sizes else 0.0
        deviations = {
            shard: ((size - mean) / mean if mean else 0.0)
            for shard, size in sorted(sizes.items())
        }
        return cls(
            mean=mean,
            deviations=deviations,
            epsilon=epsilon,
            within_epsilon=all(abs(d) <= epsilon for d in deviations.values()),
        )


@dataclass
class Partitioning:
    """
    Partition metadata: where every feature lives and which triples each
    shard holds. `shards` is empty when restored from metadata without a
    graph.
    """
    k: int
    shards: Dict[ShardId, FrozenSet[int]]
    feature_home: Dict[Feature, ShardId]
    sizes: Dict[ShardId, int]
    feature_sizes: Dict[Feature, int] = field(default_factory=dict)
    strategy: str = "wawpart"
    epsilon: float = 0.15
    _predicate_shards: Dict[Term, FrozenSet[ShardId]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.k < 1:
            raise PartitioningError(f"k must be at least 1, got {self.k}")
        if set(self.sizes) != set(range(self.k)):
            raise PartitioningError(f"Shard ids must be 0..{self.k - 1}")
        bad = {f.key: s for f, s in self.feature_home.items() if not 0 <= s < self.k}
        if bad:
            raise PartitioningError(f"Features homed outside 0..{self.k - 1}: {bad}")
        if self.shards:
            for shard, ids in self.shards.items():
                if len(ids) != self.sizes[shard]:
                    raise PartitioningError(f"Shard {shard} size {self.sizes[shard]} != {len(ids)} triples")
        for feature, shard in self.feature_home.items():
            if self.feature_sizes.get(feature, 0) > 0:
                self._predicate_shards.setdefault(feature.predicate, frozenset())
                self._predicate_shards[feature.predicate] |= {shard}

    @property
    def balance(self) -> BalanceReport:
        return BalanceReport.of(self.sizes, self.epsilon)

    def home_of(self, feature: Feature) -> Optional[ShardId]:
        return self.feature_home.get(feature)

    def predicate_shards(self, predicate: Term) -> FrozenSet[ShardId]:
        """Shards holding at least one triple with this predicate."""
        return self._predicate_shards.get(predicate, frozenset())

    def check_disjoint_cover(self, total_triples: int) -> None:
        """
        Raises:
            PartitioningError: shards overlap or miss triples
        """
        if sum(self.sizes.values()) != total_triples:
            raise PartitioningError(
                f"Shard sizes sum to {sum(self.sizes.values())}, graph has {total_triples} triples"
            )
        if self.shards:
            union: Set[int] = set()
            for shard in sorted(self.shards):
                overlap = union & self.shards[shard]
                if overlap:
                    raise PartitioningError(f"Shard {shard} repeats {len(overlap)} triples")
                union |= self.shards[shard]
            if union != set(range(total_triples)):
                raise PartitioningError("Shards do not cover every triple")


def find_replicated(groups: Sequence[FeatureGroup]) -> List[ReplicatedFeature]:
    """Features present in two or more groups, in canonical feature order."""
    seen: Dict[Feature, Set[int]] = {}
    for group in groups:
        for feature in group.features:
            seen.setdefault(feature, set()).add(group.group_id)
    return [
        ReplicatedFeature(feature, frozenset(seen[feature]))
        for feature in sorted_features(seen)
        if len(seen[feature]) > 1
    ]


def _link_features(workload: Iterable[QueryFeatures]) -> Iterator[Tuple[Feature, Feature]]:
    for qf in workload:
        for link in qf.joins:
            yield qf.per_pattern_feature[link.left], qf.per_pattern_feature[link.right]


def score_replicated(rep: ReplicatedFeature, group: FeatureGroup,
                     catalog: FeatureCatalog, weights: ScoreWeights) -> Score:
    """
    w7*D_QR + (p_c*w1 + q_c*w2 + s_c*w3) + (p_t*w4 + q_t*w5 + s_t*w6)

    p counts peer features (co-occurring with f in some query), q counts
    queries, s counts triples. The c terms are restricted to the candidate
    group, the t terms cover the whole workload and dataset. D_QR counts join
    links between a pattern featurized by f and a pattern whose feature is
    in the group.

    Raises:
        PartitioningError: feature unknown to the catalog
    """
    f = rep.feature
    if f not in catalog.dataset_features:
        raise PartitioningError(f"Unknown feature: {f.key}")
    w1, w2, w3, w4, w5, w6, w7 = weights.exact()
    using = [qf for qf in catalog.workload.values() if f in qf.features]

    peers: Set[Feature] = set()
    for qf in using:
        peers |= qf.features
    peers.discard(f)
    p_c = len(peers & group.features)
    p_t = len(peers)

    q_c = sum(1 for qf in using if qf.features <= group.features)
    q_t = len(using)

    matched: Set[int] = set()
    for feature in group.features:
        stats = catalog.dataset_features.get(feature)
        if stats:
            matched.update(stats.triple_ids)
    s_c = len(matched)
    s_t = catalog.total_triples

    d_qr = sum(
        1 for left, right in _link_features(using)
        if (left == f and right in group.features) or (right == f and left in group.features)
    )

    return w7 * d_qr + (p_c * w1 + q_c * w2 + s_c * w3) + (p_t * w4 + q_t * w5 + s_t * w6)


def resolve_replication(reps: Sequence[ReplicatedFeature],
                        groups: Optional[Sequence[FeatureGroup]] = None) -> Dict[Feature, int]:
    """
    Keep each replicated feature only in its highest-scoring group (ties go
    to the smaller group id). When `groups` is given the losing groups lose
    the feature.

    Raises:
        PartitioningError: a candidate group has no score
    """
    ownership: Dict[Feature, int] = {}
    for rep in reps:
        missing = rep.groups - set(rep.per_group_score)
        if missing:
            raise PartitioningError(f"{rep.feature.key} has no score for groups {sorted(missing)}")
        ownership[rep.feature] = min(rep.groups, key=lambda g: (-rep.per_group_score[g], g))

    if groups is not None:
        for group in groups:
            for feature, owner in ownership.items():
                if owner != group.group_id:
                    group.features.discard(feature)
    return ownership


@dataclass
class ProximityResult:
    placements: Dict[Feature, int]
    deferred: Set[Feature]


def proximity_place(unclustered: Iterable[Feature], groups: Sequence[FeatureGroup],
                    workload: Sequence[QueryFeatures]) -> ProximityResult:
    """
    Place unclustered features next to the features they join with.

    Repeatedly assigns the (feature, group) pair with the most workload join
    links between the feature and the group's features; a placed feature
    counts toward later proximities. Features with no links to any group are
    deferred to the unused pool.
    """
    pending = set(unclustered)
    links = list(_link_features(workload))
    placements: Dict[Feature, int] = {}

    def proximity(f: Feature, group: FeatureGroup) -> int:
        return sum(
            1 for left, right in links
            if (left == f and right in group.features) or (right == f and left in group.features)
        )

    while pending:
        best: Optional[Tuple[int, Feature, FeatureGroup]] = None
        for f in sorted_features(pending):
            for group in groups:
                score = proximity(f, group)
                if score and (best is None or score > best[0]):
                    best = (score, f, group)
        if best is None:
            break
        _, f, group = best
        group.features.add(f)
        placements[f] = group.group_id
        pending.discard(f)

    if pending:
        logger.debug(f"Proximity deferred {len(pending)} features to the unused pool")
    return ProximityResult(placements, pending)


def assign_triples(graph: KnowledgeGraph, feature_home: Mapping[Feature, ShardId],
                   k: int) -> Dict[ShardId, FrozenSet[int]]:
    """
    Send every triple to the home of its most specific homed feature: the
    PO key if homed, otherwise the P key.

    Raises:
        PartitioningError: a triple's predicate has no home
    """
    buckets: Dict[ShardId, List[int]] = {shard: [] for shard in range(k)}
    for tid, triple in enumerate(graph.triples):
        home = feature_home.get(Feature.po(triple.p, triple.o))
        if home is None:
            home = feature_home.get(Feature.p(triple.p))
        if home is None:
            raise PartitioningError(f"No shard for predicate {triple.p}")
        buckets[home].append(tid)
    return {shard: frozenset(ids) for shard, ids in buckets.items()}


def balance_and_assign(groups: Sequence[FeatureGroup], catalog: FeatureCatalog,
                       graph: KnowledgeGraph, k: int, epsilon: float = 0.15,
                       feature_home: Optional[Mapping[Feature, ShardId]] = None) -> Partitioning:
    """
    Seed one shard per group with the triples its features own, then place
    every still-unhomed catalog feature, largest first, on the currently
    smallest shard (ties: smaller shard id).

    Raises:
        PartitioningError: k < 1, or k differs from the number of groups
    """
    if k < 1:
        raise PartitioningError(f"k must be at least 1, got {k}")
    if len(groups) != k:
        raise PartitioningError(f"Need exactly k={k} groups, got {len(groups)}")

    home: Dict[Feature, ShardId] = dict(feature_home or {})
    if feature_home is None:
        for shard, group in enumerate(groups):
            for f in group.features:
                home[f] = shard

    sizes = {shard: 0 for shard in range(k)}
    for f, shard in home.items():
        sizes[shard] += catalog.owned_count(f)

    unused = [f for f in catalog.dataset_features if f not in home]
    unused.sort(key=lambda f: (-catalog.owned_count(f), f.sort_key()))
    for f in unused:
        target = min(sizes, key=lambda s: (sizes[s], s))
        home[f] = target
        sizes[target] += catalog.owned_count(f)

    shards = assign_triples(graph, home, k)
    partitioning = Partitioning(
        k=k,
        shards=shards,
        feature_home=home,
        sizes={shard: len(ids) for shard, ids in shards.items()},
        feature_sizes={f: catalog.owned_count(f) for f in home},
        epsilon=epsilon,
    )
    partitioning.check_disjoint_cover(len(graph))
    logger.info(f"Balanced {len(unused)} unused features; shard sizes {partitioning.sizes}")
    return partitioning


@dataclass
class PartitionTrace:
    """What each step of a partitioning run decided."""
    groups: List[FeatureGroup] = field(default_factory=list)
    replicated: List[ReplicatedFeature] = field(default_factory=list)
    ownership: Dict[Feature, int] = field(default_factory=dict)
    proximity: Dict[Feature, int] = field(default_factory=dict)
    deferred: Set[Feature] = field(default_factory=set)
    cohesion_moves: Dict[Feature, int] = field(default_factory=dict)


class WorkloadPartitioner:
    """
    Workload-aware partitioner: groups from a cluster cut, replicated
    features resolved by score, unclustered features placed by proximity,
    unused features balanced greedily.
    """

    def __init__(self, catalog: FeatureCatalog, graph: KnowledgeGraph, k: int,
                 weights: Optional[ScoreWeights] = None, epsilon: float = 0.15):
        if k < 1:
            raise PartitioningError(f"k must be at least 1, got {k}")
        self.catalog = catalog
        self.graph = graph
        self.k = k
        self.weights = weights or ScoreWeights()
        self.epsilon = epsilon
        self.trace = PartitionTrace()

    def _cluster_mass(self, cluster: Sequence[str]) -> int:
        features = {f for qid in cluster for f in self.catalog.workload[qid].features}
        return sum(self.catalog.count(f) for f in features)

    def form_groups(self, cut: ClusterCut) -> Tuple[List[FeatureGroup], Set[Feature]]:
        """
        One group per selected cluster. With more clusters than k, the k
        clusters with most queries win (ties: larger triple mass, then
        earlier first query); features of the others are returned as
        unclustered.
        """
        clusters = [c for c in cut.clusters if c]
        unknown = [qid for c in clusters for qid in c if qid not in self.catalog.workload]
        if unknown:
            raise PartitioningError(f"Cut names queries missing from the catalog: {unknown}")
        if not clusters:
            return [FeatureGroup(i, set(), set()) for i in range(self.k)], set()
        if len(clusters) < self.k:
            raise PartitioningError(f"k={self.k} exceeds the {len(clusters)} clusters of the cut")

        order = {c: i for i, c in enumerate(clusters)}
        ranked = sorted(clusters, key=lambda c: (-len(c), -self._cluster_mass(c), order[c]))
        selected = sorted(ranked[:self.k], key=order.get)
        groups = [
            FeatureGroup(
                group_id=i,
                features={f for qid in cluster for f in self.catalog.workload[qid].features},
                source_queries=set(cluster),
            )
            for i, cluster in enumerate(selected)
        ]
        grouped = {f for g in groups for f in g.features}
        unclustered = {
            f for cluster in ranked[self.k:] for qid in cluster
            for f in self.catalog.workload[qid].features
        } - grouped
        return groups, unclustered

    def _refinements(self, f: Feature) -> List[Feature]:
        return [other for other in self.catalog.dataset_features
                if other.kind is FeatureKind.PO and other.predicate == f.predicate]

    def _move(self, groups: Sequence[FeatureGroup], f: Feature, target: int) -> None:
        for g in groups:
            if g.group_id == target:
                g.features.add(f)
            else:
                g.features.discard(f)
        self.trace.cohesion_moves[f] = target

    def _apply_cohesion(self, groups: Sequence[FeatureGroup]) -> None:
        """Home every catalog PO(p, .) feature with a grouped workload P(p) feature."""
        home = {f: g.group_id for g in groups for f in g.features}
        for f in list(home):
            if f.kind is not FeatureKind.P:
                continue
            for other in self._refinements(f):
                if home.get(other) != home[f]:
                    self._move(groups, other, home[f])
                    home[other] = home[f]

    def _home_deferred_predicates(self, groups: Sequence[FeatureGroup], deferred: Set[Feature]) -> None:
        """
        Give every deferred workload P(p) one group together with all its
        PO(p, .) refinements: the group already holding most of their triples,
        or the lightest group when none of them is homed.
        """
        for f in sorted((d for d in deferred if d.kind is FeatureKind.P), key=lambda d: d.sort_key()):
            home = {h: g.group_id for g in groups for h in g.features}
            refinements = self._refinements(f)
            mass: Dict[int, int] = {}
            for other in refinements:
                if other in home:
                    mass[home[other]] = mass.get(home[other], 0) + self.catalog.owned_count(other)
            if mass:
                target = min(mass, key=lambda gid: (-mass[gid], gid))
            else:
                load = {g.group_id: sum(self.catalog.owned_count(h) for h in g.features) for g in groups}
                target = min(load, key=lambda gid: (load[gid], gid))
            self._move(groups, f, target)
            for other in refinements:
                if home.get(other) != target:
                    self._move(groups, other, target)

    def partition(self, cut: ClusterCut) -> Partitioning:
        """
        Raises:
            PartitioningError: cut and k are incompatible or the output
                breaks the disjoint-cover invariant
        """
        groups, unclustered = self.form_groups(cut)
        self.trace.groups = groups

        replicated = find_replicated(groups)
        by_id = {g.group_id: g for g in groups}
        for rep in replicated:
            for gid in sorted(rep.groups):
                rep.per_group_score[gid] = score_replicated(rep, by_id[gid], self.catalog, self.weights)
        self.trace.replicated = replicated
        self.trace.ownership = resolve_replication(replicated, groups)

        placed = proximity_place(unclustered, groups, list(self.catalog.workload.values()))
        self.trace.proximity = placed.placements
        self.trace.deferred = placed.deferred

        self._apply_cohesion(groups)
        self._home_deferred_predicates(groups, placed.deferred)
        logger.info(f"{len(groups)} groups, {len(replicated)} replicated features, "
                    f"{len(placed.placements)} placed by proximity, {len(placed.deferred)} deferred")
        return balance_and_assign(groups, self.catalog, self.graph, self.k, self.epsilon)


def partition_workload(catalog: FeatureCatalog, graph: KnowledgeGraph, cut: ClusterCut, k: int,
                       weights: Optional[ScoreWeights] = None, epsilon: float = 0.15) -> Partitioning:
    return WorkloadPartitioner(catalog, graph, k, weights, epsilon).partition(cut)


def emit_metadata(p: Partitioning) -> Dict:
    """JSON-ready metadata with canonical feature keys."""
    return {
        "strategy": p.strategy,
        "k": p.k,
        "features": {f.key: p.feature_home[f] for f in sorted_features(p.feature_home)},
        "feature_sizes": {f.key: p.feature_sizes.get(f, 0) for f in sorted_features(p.feature_home)},
        "shards": {str(shard): p.sizes[shard] for shard in sorted(p.sizes)},
        "balance": p.balance.model_dump(),
    }


def metadata_json(p: Partitioning) -> str:
    return json.dumps(emit_metadata(p), indent=2, sort_keys=True)


def load_metadata(doc: Union[Mapping, str], graph: Optional[KnowledgeGraph] = None) -> Partitioning:
    """
    Restore a Partitioning from its metadata document. With a graph, shard
    triple sets are rebuilt and checked against the recorded sizes.

    Raises:
        PartitioningError: malformed document or sizes that disagree
    """
    if isinstance(doc, str):
        doc = json.loads(doc)
    try:
        k = int(doc["k"])
        home = {Feature.from_key(key): int(shard) for key, shard in doc["features"].items()}
        sizes = {int(shard): int(n) for shard, n in doc["shards"].items()}
        feature_sizes = {Feature.from_key(key): int(n) for key, n in doc.get("feature_sizes", {}).items()}
        epsilon = float(doc.get("balance", {}).get("epsilon", 0.15))
    except (KeyError, TypeError, ValueError) as e:
        raise PartitioningError(f"Malformed partition metadata: {e}") from e

    shards: Dict[ShardId, FrozenSet[int]] = {}
    if graph is not None:
        shards = assign_triples(graph, home, k)
        rebuilt = {shard: len(ids) for shard, ids in shards.items()}
        if rebuilt != sizes:
            raise PartitioningError(f"Metadata sizes {sizes} do not match graph {rebuilt}")

    return Partitioning(
        k=k,
        shards=shards,
        feature_home=home,
        sizes=sizes,
        feature_sizes=feature_sizes,
        strategy=doc.get("strategy", "wawpart"),
        epsilon=epsilon,
    )


def build_shards(graph: KnowledgeGraph, p: Partitioning) -> Dict[ShardId, KnowledgeGraph]:
    if not p.shards:
        raise PartitioningError("Partitioning has no triple sets; load it with a graph")
    return {shard: graph.subgraph(ids) for shard, ids in sorted(p.shards.items())}


def write_shards(shards: Mapping[ShardId, KnowledgeGraph], out_dir: Union[str, Path]) -> List[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for shard, shard_graph in sorted(shards.items()):
        path = out / f"shard-{shard}.nt"
        write_ntriples(shard_graph, path)
        paths.append(path)
    return paths
