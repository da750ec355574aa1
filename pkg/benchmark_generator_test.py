from fractions import Fraction

import pytest

from benchmark_generator import (BaselineSpec, BenchmarkKind, GeneratorError, GeneratorSpec, generate,
                                 random_partition)
from execution_simulator import eval_centralized
from feature_extractor import extract_query_features
from query_clustering import jaccard_distance
from rdf_store import parse_ntriples, serialize_ntriples
from sparql_query import parse_workload


def test_same_seed_same_bytes(lubm_small):
    again = generate(GeneratorSpec(benchmark=BenchmarkKind.LUBM, seed=1, units=2))
    assert serialize_ntriples(again.graph) == serialize_ntriples(lubm_small.graph)
    assert again.workload_text == lubm_small.workload_text


def test_different_seed_differs(lubm_small):
    other = generate(GeneratorSpec(benchmark=BenchmarkKind.LUBM, seed=2, units=2))
    assert serialize_ntriples(other.graph) != serialize_ntriples(lubm_small.graph)


def test_lubm_scale_and_round_trip(lubm):
    assert lubm.triple_count >= 15000
    assert parse_ntriples(serialize_ntriples(lubm.graph)).triples == lubm.graph.triples


def test_lubm_workload_keeps_the_q7_q9_pair(lubm_queries):
    by_id = {q.id: extract_query_features(q) for q in lubm_queries}
    assert jaccard_distance(by_id["Q7"], by_id["Q9"]) == Fraction(1, 3)
    assert len(lubm_queries) == 11


def test_every_workload_query_has_answers(lubm, lubm_queries):
    for q in lubm_queries:
        rows, _ = eval_centralized(q, lubm.graph)
        assert rows, q.id


def test_scale_below_minimum():
    with pytest.raises(GeneratorError):
        generate(GeneratorSpec(benchmark=BenchmarkKind.LUBM, scale=999))
    with pytest.raises(GeneratorError):
        generate(GeneratorSpec(benchmark=BenchmarkKind.BSBM, scale=100))
    # an explicit unit count bypasses the scale floor
    assert generate(GeneratorSpec(benchmark=BenchmarkKind.BSBM, scale=100, units=1)).units == 1


def test_bsbm():
    bench = generate(GeneratorSpec(benchmark=BenchmarkKind.BSBM, seed=3, scale=2000))
    assert bench.triple_count >= 2000
    queries = parse_workload(bench.workload_text)
    assert [q.id for q in queries] == [f"B{i}" for i in range(1, 12)]
    for q in queries:
        extract_query_features(q)


def test_random_partition_single_shard(lubm_small):
    meta = random_partition(lubm_small.graph, BaselineSpec(seed=1, k=1))
    assert meta.shards[0] == frozenset(range(len(lubm_small.graph)))
    assert meta.strategy == "random"


def test_random_partition_is_seeded(lubm_small):
    a = random_partition(lubm_small.graph, BaselineSpec(seed=5, k=3))
    b = random_partition(lubm_small.graph, BaselineSpec(seed=5, k=3))
    assert a.shards == b.shards
    assert a.feature_home == b.feature_home


def test_random_partition_keeps_predicates_whole(lubm_small):
    g = lubm_small.graph
    meta = random_partition(g, BaselineSpec(seed=7, k=3))
    meta.check_disjoint_cover(len(g))
    for predicate in g.predicates():
        holders = {shard for shard, ids in meta.shards.items() if set(g.lookup_p(predicate)) & ids}
        assert len(holders) == 1
        assert meta.predicate_shards(predicate) == holders
