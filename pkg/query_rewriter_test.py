import pytest

from benchmark_generator import BaselineSpec, random_partition
from config import PipelineConfig
from feature_extractor import Feature
from partition_engine import Partitioning
from pipeline import WawPartPipeline
from query_rewriter import (JoinLocality, RewriteError, SplitPredicateError, UnknownPredicateError,
                            locate_pattern, rewrite, rewrite_workload)
from rdf_store import Term
from sparql_query import parse_federated, parse_query

UB = "http://swat.cse.lehigh.edu/onto/univ-bench.owl#"
RDF_TYPE = Term.iri("http://www.w3.org/1999/02/22-rdf-syntax-ns#type")
ENDPOINTS = {0: "http://shard-0/sparql", 1: "http://shard-1/sparql", 2: "http://shard-2/sparql"}


def ub(name):
    return Term.iri(UB + name)


def grad_student_metadata():
    home = {
        Feature.p(RDF_TYPE): 0,
        Feature.po(RDF_TYPE, ub("GraduateStudent")): 0,
        Feature.po(RDF_TYPE, ub("University")): 0,
        Feature.po(RDF_TYPE, ub("Department")): 0,
        Feature.p(ub("memberOf")): 1,
        Feature.p(ub("subOrganizationOf")): 1,
        Feature.p(ub("undergraduateDegreeFrom")): 2,
    }
    return Partitioning(k=3, shards={}, feature_home=home, sizes={0: 6, 1: 4, 2: 2},
                        feature_sizes={f: 2 for f in home})


def test_locate_pattern_po_then_p():
    meta = grad_student_metadata()
    student = parse_query(f"SELECT ?x WHERE {{ ?x a <{UB}GraduateStudent> }}").patterns[0]
    assert locate_pattern(student, meta) == 0
    fallback = parse_query(f"SELECT ?x WHERE {{ ?x <{UB}memberOf> <http://example.org/d1> }}").patterns[0]
    assert locate_pattern(fallback, meta) == 1


def test_locate_pattern_errors():
    meta = grad_student_metadata()
    with pytest.raises(UnknownPredicateError):
        locate_pattern(parse_query("SELECT ?x WHERE { ?x <http://nowhere> ?y }").patterns[0], meta)
    with pytest.raises(RewriteError):
        locate_pattern(parse_query("SELECT ?x WHERE { ?x ?p ?y }").patterns[0], meta)


def test_split_predicate():
    home = {Feature.p(RDF_TYPE): 0, Feature.po(RDF_TYPE, ub("Student")): 1}
    meta = Partitioning(k=2, shards={}, feature_home=home, sizes={0: 3, 1: 2}, feature_sizes={f: 1 for f in home})
    with pytest.raises(SplitPredicateError) as err:
        locate_pattern(parse_query("SELECT ?x WHERE { ?x a ?c }").patterns[0], meta)
    assert err.value.shards == (0, 1)
    assert locate_pattern(parse_query(f"SELECT ?x WHERE {{ ?x a <{UB}Student> }}").patterns[0], meta) == 1


def test_grad_student_rewrite(q2):
    plan = rewrite(q2, grad_student_metadata())
    assert plan.ppn == 0
    assert plan.rewritten
    assert plan.remote_shards == (1, 2)
    assert plan.pattern_shards == (0, 0, 0, 1, 1, 2)
    assert plan.distributed_joins == 3
    assert {t.n3() for t in plan.join_terms()} == {"?X", "?Y", "?Z"}
    assert plan.distributed_links == 8
    text = plan.to_sparql(ENDPOINTS)
    assert text.count("SERVICE") == 2
    assert parse_federated(text, ENDPOINTS, ppn=0, query_id="Q2") == plan.federated


def test_join_annotations(q2):
    plan = rewrite(q2, grad_student_metadata())
    for link, locality in plan.join_annotations:
        crosses = plan.pattern_shards[link.left] != plan.pattern_shards[link.right]
        assert (locality is JoinLocality.DISTRIBUTED) == crosses


def test_single_pattern_never_rewritten():
    meta = grad_student_metadata()
    plan = rewrite(parse_query(f"SELECT ?x WHERE {{ ?x <{UB}memberOf> ?d }}"), meta)
    assert not plan.rewritten
    assert plan.distributed_joins == 0
    assert plan.ppn == 1


def test_colocated_query_equals_original():
    meta = grad_student_metadata()
    q = parse_query(f"SELECT ?x ?d WHERE {{ ?x <{UB}memberOf> ?d . ?d <{UB}subOrganizationOf> ?u }}")
    plan = rewrite(q, meta)
    assert not plan.rewritten
    assert plan.to_sparql({}) == plan.to_sparql(ENDPOINTS)
    assert plan.federated.patterns == list(q.patterns)


def test_ppn_tie_goes_to_smaller_shard():
    meta = grad_student_metadata()
    q = parse_query(f"SELECT ?x WHERE {{ ?x <{UB}undergraduateDegreeFrom> ?u . ?x <{UB}memberOf> ?d }}")
    plan = rewrite(q, meta)
    assert plan.ppn == 1
    assert plan.remote_shards == (2,)


def test_every_pattern_located_on_its_triples(lubm, lubm_queries):
    for meta in (WawPartPipeline(PipelineConfig(k=3)).partition(lubm.graph, lubm_queries).partitioning,
                 random_partition(lubm.graph, BaselineSpec(seed=4, k=3))):
        g = lubm.graph
        for q in lubm_queries:
            plan = rewrite(q, meta)
            assert sorted(map(id, plan.federated.patterns)) == sorted(map(id, q.patterns))
            counts = {s: plan.pattern_shards.count(s) for s in plan.pattern_shards}
            assert counts[plan.ppn] == max(counts.values())
            for tp, shard in zip(q.patterns, plan.pattern_shards):
                bound = [t.term if hasattr(t, "term") else None for t in (tp.s, tp.p, tp.o)]
                assert set(g.match(*bound)) <= meta.shards[shard]


def test_wawpart_keeps_generated_workload_local(lubm, lubm_queries):
    meta = WawPartPipeline(PipelineConfig(k=3)).partition(lubm.graph, lubm_queries).partitioning
    plans = rewrite_workload(lubm_queries, meta)
    assert set(plans) == {q.id for q in lubm_queries}
    assert all(plan.distributed_joins == 0 for plan in plans.values())
