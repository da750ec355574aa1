"""
WawPart - Query Clustering
Jaccard distance matrix over workload queries and hierarchical agglomerative
clustering with single, complete or average linkage
"""

import json
import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np

from feature_extractor import QueryFeatures

logger = logging.getLogger(__name__)

Distance = Fraction


class ClusteringError(ValueError):
    """Invalid clustering input or cut request."""


class Linkage(str, Enum):
    SINGLE = "single"
    COMPLETE = "complete"
    AVERAGE = "average"


def jaccard_distance(a: QueryFeatures, b: QueryFeatures) -> Distance:
    """1 - |A n B| / |A u B| over the P/PO feature sets, as an exact rational."""
    union = a.features | b.features
    if not union:
        return Fraction(0)
    return 1 - Fraction(len(a.features & b.features), len(union))


@dataclass(frozen=True)
class DistanceMatrix:
    ids: Tuple[str, ...]
    d: Tuple[Tuple[Distance, ...], ...]

    def __post_init__(self):
        n = len(self.ids)
        if len(set(self.ids)) != n:
            raise ClusteringError(f"Duplicate query ids: {sorted({i for i in self.ids if self.ids.count(i) > 1})}")
        if len(self.d) != n or any(len(row) != n for row in self.d):
            raise ClusteringError(f"Distance matrix must be {n}x{n}")
        rows = tuple(tuple(Fraction(v) for v in row) for row in self.d)
        object.__setattr__(self, "d", rows)
        for i in range(n):
            if rows[i][i] != 0:
                raise ClusteringError(f"Non-zero diagonal at {self.ids[i]}")
            for j in range(i + 1, n):
                if rows[i][j] != rows[j][i]:
                    raise ClusteringError(f"Asymmetric distance between {self.ids[i]} and {self.ids[j]}")
                if not 0 <= rows[i][j] <= 1:
                    raise ClusteringError(f"Distance out of [0,1] between {self.ids[i]} and {self.ids[j]}")

    @property
    def size(self) -> int:
        return len(self.ids)

    def as_array(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.d], dtype=float)

    def to_json(self, decimals: int = 4) -> str:
        return json.dumps({
            "ids": list(self.ids),
            "distances": np.round(self.as_array(), decimals).tolist(),
        }, indent=2)


def build_distance_matrix(workload: Sequence[QueryFeatures]) -> DistanceMatrix:
    """
    Pairwise Jaccard distances, position-addressed by workload order.

    Raises:
        ClusteringError: empty workload or duplicate query ids
    """
    if not workload:
        raise ClusteringError("Distance matrix needs at least one query")
    n = len(workload)
    rows = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            rows[i][j] = rows[j][i] = jaccard_distance(workload[i], workload[j])
    return DistanceMatrix(tuple(q.query_id for q in workload), tuple(tuple(r) for r in rows))


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: Distance
    new: int


@dataclass(frozen=True)
class Dendrogram:
    """
    HAC merge tree. Leaves are nodes 0..n-1; merge i creates node n+i.
    """
    leaves: Tuple[str, ...]
    merges: Tuple[Merge, ...]

    def __post_init__(self):
        n = len(self.leaves)
        if n and len(self.merges) != n - 1:
            raise ClusteringError(f"Dendrogram over {n} leaves needs {n - 1} merges")
        used = set()
        for merge in self.merges:
            for child in (merge.left, merge.right):
                if child in used or child >= merge.new:
                    raise ClusteringError(f"Node {child} merged twice or out of order")
                used.add(child)

    def members(self) -> Dict[int, FrozenSet[int]]:
        """Leaf indices under every node."""
        nodes: Dict[int, FrozenSet[int]] = {i: frozenset([i]) for i in range(len(self.leaves))}
        for merge in self.merges:
            nodes[merge.new] = nodes[merge.left] | nodes[merge.right]
        return nodes

    def heights(self) -> List[Distance]:
        return [m.height for m in self.merges]

    def to_text(self) -> str:
        """One merge per line: `<new-id> <left> <right> <height>`."""
        return "".join(f"{m.new} {m.left} {m.right} {float(m.height):.6f}\n" for m in self.merges)

    def to_dot(self) -> str:
        lines = ["digraph dendrogram {", "  rankdir=BT;"]
        for i, leaf in enumerate(self.leaves):
            lines.append(f'  n{i} [label="{leaf}", shape=box];')
        for m in self.merges:
            lines.append(f'  n{m.new} [label="{float(m.height):.2f}", shape=ellipse];')
            lines.append(f"  n{m.left} -> n{m.new};")
            lines.append(f"  n{m.right} -> n{m.new};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _proximity(linkage: Linkage, d_a: Distance, d_b: Distance, n_a: int, n_b: int) -> Distance:
    """Linkage update for the distance from a merged cluster (a u b) to another."""
    if linkage is Linkage.SINGLE:
        return min(d_a, d_b)
    if linkage is Linkage.COMPLETE:
        return max(d_a, d_b)
    return (n_a * d_a + n_b * d_b) / (n_a + n_b)


def hac(matrix: DistanceMatrix, linkage: Union[Linkage, str] = Linkage.SINGLE) -> Dendrogram:
    """
    Agglomerate clusters pairwise until one remains, always merging the pair
    at minimum linkage distance.

    Ties go to the pair with the smallest (min, max) of cluster
    representatives, where a representative is the cluster's smallest leaf.
    """
    linkage = Linkage(linkage)
    n = matrix.size
    rep: Dict[int, int] = {i: i for i in range(n)}
    size: Dict[int, int] = {i: 1 for i in range(n)}
    proximity: Dict[Tuple[int, int], Distance] = {
        (i, j): matrix.d[i][j] for i in range(n) for j in range(i + 1, n)
    }

    def pair(a: int, b: int) -> Tuple[int, int]:
        return (a, b) if a < b else (b, a)

    merges: List[Merge] = []
    next_id = n
    while len(rep) > 1:
        a, b = min(
            proximity,
            key=lambda ab: (proximity[ab], min(rep[ab[0]], rep[ab[1]]), max(rep[ab[0]], rep[ab[1]])),
        )
        height = proximity[(a, b)]
        left, right = (a, b) if rep[a] < rep[b] else (b, a)
        merges.append(Merge(left, right, height, next_id))

        for c in rep:
            if c in (a, b):
                continue
            proximity[pair(next_id, c)] = _proximity(
                linkage, proximity[pair(a, c)], proximity[pair(b, c)], size[a], size[b]
            )
        for key in [k for k in proximity if a in k or b in k]:
            del proximity[key]

        rep[next_id] = min(rep.pop(a), rep.pop(b))
        size[next_id] = size.pop(a) + size.pop(b)
        next_id += 1

    logger.info(f"HAC ({linkage.value}) over {n} queries: "
                f"heights {[round(float(m.height), 4) for m in merges]}")
    return Dendrogram(matrix.ids, tuple(merges))


@dataclass(frozen=True)
class ClusterCut:
    cut_distance: Distance
    clusters: Tuple[Tuple[str, ...], ...]

    def __post_init__(self):
        seen = [qid for cluster in self.clusters for qid in cluster]
        if len(seen) != len(set(seen)):
            raise ClusteringError("Clusters must be disjoint")


def cut(dendrogram: Dendrogram, distance: Optional[Union[Distance, float]] = None,
        k: Optional[int] = None) -> ClusterCut:
    """
    Flatten the dendrogram, either at a distance (undo merges above it) or
    into k clusters (undo the last k-1 merges).

    Raises:
        ClusteringError: neither or both targets given, or k out of range
    """
    if (distance is None) == (k is None):
        raise ClusteringError("Cut needs exactly one of distance or k")
    n = len(dendrogram.leaves)
    if k is not None:
        if not 1 <= k <= max(n, 1):
            raise ClusteringError(f"Cluster count k={k} out of range 1..{n}")
        applied = list(dendrogram.merges[:n - k])
        cut_distance = applied[-1].height if applied else Fraction(0)
    else:
        cut_distance = Fraction(distance)
        applied = [m for m in dendrogram.merges if m.height <= cut_distance]

    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    members = dendrogram.members()
    for merge in applied:
        ra, rb = find(min(members[merge.left])), find(min(members[merge.right]))
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    groups: Dict[int, List[int]] = {}
    for leaf in range(n):
        groups.setdefault(find(leaf), []).append(leaf)
    clusters = tuple(
        tuple(dendrogram.leaves[i] for i in leaves)
        for _, leaves in sorted(groups.items(), key=lambda kv: kv[1][0])
    )
    return ClusterCut(cut_distance, clusters)
