"""
WawPart - Execution Simulator
Centralized and federated evaluation of basic graph patterns over in-process
shards, with deterministic simulated cost accounting
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from pydantic import BaseModel, Field, computed_field

from partition_engine import BalanceReport, Partitioning
from query_rewriter import FederatedPlan, RewriteError, rewrite
from rdf_store import KnowledgeGraph, Term
from sparql_query import Const, Query, TriplePattern, Var

logger = logging.getLogger(__name__)


class ExecutionError(ValueError):
    """A plan that cannot run against the given shards."""


@dataclass(frozen=True)
class Binding:
    """An immutable variable assignment, one term per variable."""
    pairs: Tuple[Tuple[str, Term], ...] = ()

    @classmethod
    def of(cls, mapping: Mapping[str, Term]) -> "Binding":
        return cls(tuple(sorted(mapping.items())))

    def as_dict(self) -> Dict[str, Term]:
        return dict(self.pairs)

    def __getitem__(self, name: str) -> Term:
        for var, term in self.pairs:
            if var == name:
                return term
        raise KeyError(name)

    def variables(self) -> FrozenSet[str]:
        return frozenset(var for var, _ in self.pairs)

    def merge(self, other: "Binding") -> Optional["Binding"]:
        """Union of two bindings, or None when they disagree on a variable."""
        merged = self.as_dict()
        for var, term in other.pairs:
            if merged.setdefault(var, term) != term:
                return None
        return Binding.of(merged)

    def project(self, names: Iterable[str]) -> "Binding":
        wanted = set(names)
        return Binding(tuple(pair for pair in self.pairs if pair[0] in wanted))


class CostModel(BaseModel):
    call_latency: float = Field(default=50.0, ge=0, description="Simulated ms per remote SERVICE call")
    per_row_cost: float = Field(default=0.01, ge=0, description="Simulated ms per row shipped to the PPN")
    local_match_cost: float = Field(default=0.0001, ge=0, description="Simulated ms per index probe")

    def simulated_time(self, remote_calls: int, rows_shipped: int, probes: int) -> Fraction:
        """Exact cost over the decimal forms of the model parameters."""
        return (remote_calls * Fraction(str(self.call_latency))
                + rows_shipped * Fraction(str(self.per_row_cost))
                + probes * Fraction(str(self.local_match_cost)))


class ExecStats(BaseModel):
    result_count: int = Field(ge=0)
    distributed_joins: int = Field(default=0, ge=0, description="Distinct join terms crossing shards")
    distributed_links: int = Field(default=0, ge=0, description="Pattern pairs joined across shards")
    remote_calls: int = Field(default=0, ge=0)
    rows_shipped: int = Field(default=0, ge=0)
    probes: int = Field(default=0, ge=0, description="Index match calls")
    simulated_time: float = Field(default=0.0, ge=0, description="Simulated ms")

    @classmethod
    def priced(cls, cm: CostModel, **counts) -> "ExecStats":
        time = cm.simulated_time(counts.get("remote_calls", 0), counts.get("rows_shipped", 0),
                                 counts.get("probes", 0))
        return cls(simulated_time=float(time), **counts)


@dataclass
class Relation:
    """Solutions over a fixed variable set."""
    variables: FrozenSet[str]
    rows: Set[Binding]


def hash_join(left: Relation, right: Relation) -> Relation:
    """Natural join on shared variables; a cross product when none are shared."""
    shared = sorted(left.variables & right.variables)
    build, probe = (left, right) if len(left.rows) <= len(right.rows) else (right, left)
    table: Dict[Tuple[Term, ...], List[Binding]] = {}
    for row in build.rows:
        table.setdefault(tuple(row[v] for v in shared), []).append(row)
    rows: Set[Binding] = set()
    for row in probe.rows:
        for match in table.get(tuple(row[v] for v in shared), ()):
            merged = row.merge(match)
            if merged is not None:
                rows.add(merged)
    return Relation(left.variables | right.variables, rows)


def join_all(relations: Sequence[Relation]) -> Relation:
    """
    Join relations in order, taking next the first relation that shares a
    variable with the result so far.
    """
    if not relations:
        return Relation(frozenset(), {Binding()})
    pending = list(relations)
    result = pending.pop(0)
    while pending:
        index = next((i for i, r in enumerate(pending) if r.variables & result.variables), 0)
        result = hash_join(result, pending.pop(index))
    return result


def connected_components(patterns: Sequence[TriplePattern]) -> List[List[TriplePattern]]:
    """Patterns grouped by shared variables, each group in original order."""
    parent = list(range(len(patterns)))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    owner: Dict[str, int] = {}
    for i, tp in enumerate(patterns):
        for name in tp.variables():
            if name in owner:
                a, b = find(owner[name]), find(i)
                if a != b:
                    parent[max(a, b)] = min(a, b)
            else:
                owner[name] = i

    components: Dict[int, List[TriplePattern]] = {}
    for i, tp in enumerate(patterns):
        components.setdefault(find(i), []).append(tp)
    return [components[root] for root in sorted(components)]


class BGPEvaluator:
    """Index-backed pattern matching over one store, counting probes."""

    def __init__(self, store: KnowledgeGraph):
        self.store = store
        self.probes = 0

    def match_pattern(self, tp: TriplePattern) -> Relation:
        self.probes += 1
        bound = [t.term if isinstance(t, Const) else None for t in (tp.s, tp.p, tp.o)]
        rows: Set[Binding] = set()
        for tid in self.store.match(*bound):
            triple = self.store[tid]
            assignment: Dict[str, Term] = {}
            consistent = True
            for position, term in zip((tp.s, tp.p, tp.o), (triple.s, triple.p, triple.o)):
                if isinstance(position, Var) and assignment.setdefault(position.name, term) != term:
                    consistent = False
                    break
            if consistent:
                rows.add(Binding.of(assignment))
        return Relation(frozenset(tp.variables()), rows)

    def evaluate_component(self, patterns: Sequence[TriplePattern]) -> Relation:
        return join_all([self.match_pattern(tp) for tp in patterns])

    def evaluate_components(self, patterns: Sequence[TriplePattern]) -> List[Relation]:
        return [self.evaluate_component(c) for c in connected_components(patterns)]

    def evaluate(self, patterns: Sequence[TriplePattern]) -> Relation:
        return join_all(self.evaluate_components(patterns))


def eval_bgp(patterns: Sequence[TriplePattern], store: KnowledgeGraph) -> Set[Binding]:
    """Every solution of the conjunctive pattern over the store (set semantics)."""
    return BGPEvaluator(store).evaluate(patterns).rows


def _project(rows: Iterable[Binding], names: Sequence[str]) -> Set[Binding]:
    return {row.project(names) for row in rows}


def eval_centralized(q: Query, g: KnowledgeGraph, cm: Optional[CostModel] = None,
                     remote: bool = False) -> Tuple[Set[Binding], ExecStats]:
    """
    Evaluate over the whole graph. `remote=True` charges the single call of
    a centralized store reached over the network.
    """
    cm = cm or CostModel()
    evaluator = BGPEvaluator(g)
    rows = _project(evaluator.evaluate(q.patterns).rows, q.projected)
    stats = ExecStats.priced(cm, result_count=len(rows), remote_calls=1 if remote else 0,
                             probes=evaluator.probes)
    return rows, stats


def eval_federated(plan: FederatedPlan, shards: Mapping[int, KnowledgeGraph],
                   cm: Optional[CostModel] = None,
                   max_workers: Optional[int] = None) -> Tuple[Set[Binding], ExecStats]:
    """
    Run each pattern group on its shard, remote groups concurrently, and join
    everything at the PPN in plan group order.

    Raises:
        ExecutionError: a plan group names a shard that is not loaded
    """
    cm = cm or CostModel()
    missing = [shard for shard, _ in plan.federated.groups if shard not in shards]
    if missing:
        raise ExecutionError(f"{plan.query.id}: shards {missing} are not loaded")

    def run_group(group: Tuple[int, Tuple[TriplePattern, ...]]) -> Tuple[List[Relation], int]:
        shard, patterns = group
        evaluator = BGPEvaluator(shards[shard])
        return evaluator.evaluate_components(patterns), evaluator.probes

    local = run_group(plan.federated.groups[0])
    remote: List[Tuple[List[Relation], int]] = []
    if plan.federated.remote_groups:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            remote = list(pool.map(run_group, plan.federated.remote_groups))

    relations = list(local[0])
    for components, _ in remote:
        relations.extend(components)
    rows = _project(join_all(relations).rows, plan.query.projected)

    stats = ExecStats.priced(
        cm,
        result_count=len(rows),
        distributed_joins=plan.distributed_joins,
        distributed_links=plan.distributed_links,
        remote_calls=len(remote),
        rows_shipped=sum(len(r.rows) for components, _ in remote for r in components),
        probes=local[1] + sum(probes for _, probes in remote),
    )
    return rows, stats


class QueryRow(BaseModel):
    query_id: str
    stats: ExecStats

    def to_text(self) -> str:
        s = self.stats
        return (f"{self.query_id:<12} {s.result_count:>8} {s.distributed_joins:>6} "
                f"{s.remote_calls:>6} {s.rows_shipped:>10} {s.simulated_time:>12.4f}")


_TOTALLED = ("result_count", "distributed_joins", "distributed_links", "remote_calls",
             "rows_shipped", "probes", "simulated_time")


class WorkloadReport(BaseModel):
    mode: str = Field(description="Execution mode the rows were produced under")
    rows: List[QueryRow] = Field(default_factory=list)
    failures: Dict[str, str] = Field(default_factory=dict, description="Query id to error message")
    balance: Optional[BalanceReport] = None

    @computed_field
    @property
    def totals(self) -> Dict[str, float]:
        return {name: sum(getattr(r.stats, name) for r in self.rows) for name in _TOTALLED}

    @computed_field
    @property
    def means(self) -> Dict[str, float]:
        if not self.rows:
            return {name: 0.0 for name in _TOTALLED}
        return {name: value / len(self.rows) for name, value in self.totals.items()}

    def stats_for(self, query_id: str) -> ExecStats:
        for row in self.rows:
            if row.query_id == query_id:
                return row.stats
        raise KeyError(query_id)

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True)

    def to_text(self) -> str:
        header = (f"{'query':<12} {'results':>8} {'djoins':>6} {'calls':>6} "
                  f"{'shipped':>10} {'sim-ms':>12}")
        lines = [f"# mode: {self.mode}", header]
        lines.extend(row.to_text() for row in self.rows)
        t = self.totals
        lines.append(f"{'TOTAL':<12} {int(t['result_count']):>8} {int(t['distributed_joins']):>6} "
                     f"{int(t['remote_calls']):>6} {int(t['rows_shipped']):>10} {t['simulated_time']:>12.4f}")
        for qid, message in sorted(self.failures.items()):
            lines.append(f"! {qid}: {message}")
        if self.balance is not None:
            lines.append(f"# balance: mean {self.balance.mean:.1f}, within epsilon "
                         f"{self.balance.epsilon}: {self.balance.within_epsilon}")
            lines.extend(f"#   shard {shard}: {dev:+.2%}" for shard, dev in self.balance.deviations.items())
        return "\n".join(lines) + "\n"


def run_workload(workload: Sequence[Query], meta: Partitioning, shards: Mapping[int, KnowledgeGraph],
                 cm: Optional[CostModel] = None, mode: Optional[str] = None) -> WorkloadReport:
    """
    Rewrite and execute every query once. Per-query failures are recorded
    and the run continues.
    """
    cm = cm or CostModel()
    report = WorkloadReport(mode=mode or meta.strategy, balance=meta.balance)
    for q in workload:
        try:
            _, stats = eval_federated(rewrite(q, meta), shards, cm)
        except (RewriteError, ExecutionError) as e:
            logger.warning(f"{q.id} failed under {report.mode}: {e}")
            report.failures[q.id] = str(e)
            continue
        report.rows.append(QueryRow(query_id=q.id, stats=stats))
    logger.info(f"{report.mode}: {len(report.rows)} queries run, {len(report.failures)} failed, "
                f"{int(report.totals['distributed_joins'])} distributed joins")
    return report


def run_centralized(workload: Sequence[Query], g: KnowledgeGraph, cm: Optional[CostModel] = None,
                    remote: bool = False) -> WorkloadReport:
    cm = cm or CostModel()
    report = WorkloadReport(mode="remote-centralized" if remote else "local-centralized")
    for q in workload:
        _, stats = eval_centralized(q, g, cm, remote=remote)
        report.rows.append(QueryRow(query_id=q.id, stats=stats))
    return report


_COMPARED = (("distributed_joins", "djoins"), ("remote_calls", "calls"),
             ("rows_shipped", "shipped"), ("simulated_time", "sim-ms"))


def compare_reports(reports: Sequence[WorkloadReport]) -> str:
    """Side-by-side totals, one row per execution mode."""
    header = f"{'mode':<20} {'queries':>7} {'failed':>6} " + " ".join(f"{label:>12}" for _, label in _COMPARED)
    header += f" {'mean-ms':>12}"
    lines = [header]
    for report in reports:
        t = report.totals
        cells = " ".join(
            f"{t[name]:>12.4f}" if name == "simulated_time" else f"{int(t[name]):>12}"
            for name, _ in _COMPARED
        )
        lines.append(f"{report.mode:<20} {len(report.rows):>7} {len(report.failures):>6} {cells} "
                     f"{report.means['simulated_time']:>12.4f}")
    return "\n".join(lines) + "\n"
