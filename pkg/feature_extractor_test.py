import json

import pytest

from feature_extractor import (Feature, FeatureExtractionError, FeatureKind, JoinKind, JoinLink, export_catalog,
                               extract_dataset_features, extract_query_features)
from rdf_store import Term
from sparql_query import parse_query

UB = "http://swat.cse.lehigh.edu/onto/univ-bench.owl#"
RDF_TYPE = Term.iri("http://www.w3.org/1999/02/22-rdf-syntax-ns#type")


def ub(name):
    return Term.iri(UB + name)


def test_query_7_has_four_features(q7):
    qf = extract_query_features(q7)
    assert qf.features == {
        Feature.po(RDF_TYPE, ub("Student")),
        Feature.po(RDF_TYPE, ub("Course")),
        Feature.p(ub("takesCourse")),
        Feature.p(ub("teacherOf")),
    }


def test_query_9_has_six_features(q9):
    qf = extract_query_features(q9)
    assert len(qf.features) == 6
    assert Feature.po(RDF_TYPE, ub("Faculty")) in qf.features
    assert Feature.p(ub("advisor")) in qf.features
    assert qf.pattern_count == 6


def test_single_pattern_query():
    qf = extract_query_features(parse_query("SELECT ?x WHERE { ?x <p> ?y }"))
    assert qf.features == {Feature.p(Term.iri("p"))}
    assert qf.joins == ()


def test_variable_predicate_is_unfeaturizable():
    q = parse_query("SELECT ?x WHERE { ?x ?p ?y }", "Qv")
    with pytest.raises(FeatureExtractionError, match="unfeaturizable pattern 0 in query Qv"):
        extract_query_features(q)


def test_join_links_of_an_elbow_and_a_star():
    q = parse_query("SELECT ?x WHERE { ?x <a> ?y . ?y <b> ?z . ?x <c> ?z }")
    joins = set(extract_query_features(q).joins)
    assert joins == {
        JoinLink(JoinKind.OS, 0, 1, q.patterns[0].o),
        JoinLink(JoinKind.SS, 0, 2, q.patterns[0].s),
        JoinLink(JoinKind.OO, 1, 2, q.patterns[1].o),
    }


def test_join_link_storage_rules():
    term = parse_query("SELECT ?x WHERE { ?x <a> ?y }").patterns[0].s
    with pytest.raises(ValueError):
        JoinLink(JoinKind.SS, 2, 1, term)
    with pytest.raises(ValueError):
        JoinLink(JoinKind.OO, 1, 1, term)
    assert JoinLink(JoinKind.OS, 2, 1, term).left == 2


def test_features_ignore_variable_names():
    a = parse_query("SELECT ?x WHERE { ?x <a> ?y . ?y <b> <o> }")
    b = parse_query("SELECT ?m WHERE { ?m <a> ?n . ?n <b> <o> }")
    fa, fb = extract_query_features(a), extract_query_features(b)
    assert fa.features == fb.features
    assert [(j.kind, j.left, j.right) for j in fa.joins] == [(j.kind, j.left, j.right) for j in fb.joins]


def test_feature_keys():
    po = Feature.po(RDF_TYPE, Term.literal('"x"@en'))
    assert Feature.from_key(po.key) == po
    assert Feature.p(ub("advisor")).key == f"P|{UB}advisor"
    assert po.base == Feature.p(RDF_TYPE)
    assert Feature.p(RDF_TYPE) != Feature.po(RDF_TYPE, ub("Student"))
    with pytest.raises(ValueError):
        Feature(FeatureKind.PO, RDF_TYPE)


def test_empty_workload_catalog(small_graph):
    catalog = extract_dataset_features(small_graph, [])
    assert set(catalog.dataset_features) == {Feature.p(p) for p in small_graph.predicates()}
    assert sum(catalog.count(f) for f in catalog.dataset_features) == len(small_graph)


def test_workload_po_counts_and_ownership(small_graph, pair_features):
    catalog = extract_dataset_features(small_graph, pair_features)
    student = Feature.po(RDF_TYPE, ub("Student"))
    assert catalog.count(student) == 2
    assert catalog.count(Feature.p(RDF_TYPE)) == 4
    # Student, Course and Faculty refine rdf:type and leave nothing behind
    assert catalog.owned_count(Feature.p(RDF_TYPE)) == 0
    assert catalog.owned_ids(student) == (0, 1)


def test_unmatched_workload_feature_kept_with_zero_count(small_graph):
    qf = extract_query_features(parse_query(f"SELECT ?x WHERE {{ ?x <{RDF_TYPE.lexical}> <{UB}Nobody> }}"))
    catalog = extract_dataset_features(small_graph, [qf])
    assert catalog.count(Feature.po(RDF_TYPE, ub("Nobody"))) == 0


def test_duplicate_query_ids(small_graph, pair_features):
    with pytest.raises(FeatureExtractionError):
        extract_dataset_features(small_graph, pair_features + pair_features[:1])


def test_p_count_is_po_refinements_plus_residual(lubm, lubm_queries):
    catalog = extract_dataset_features(lubm.graph, [extract_query_features(q) for q in lubm_queries])
    g = lubm.graph
    for predicate in g.predicates():
        named = {f.object for f in catalog.dataset_features if f.kind is FeatureKind.PO and f.predicate == predicate}
        refined = sum(catalog.count(Feature.po(predicate, o)) for o in named)
        residual = sum(1 for tr in g.triples if tr.p == predicate and tr.o not in named)
        assert catalog.count(Feature.p(predicate)) == refined + residual
    owned = sum(catalog.owned_count(f) for f in catalog.dataset_features)
    assert owned == len(g)


def test_export_catalog(small_graph, pair_features):
    doc = json.loads(export_catalog(extract_dataset_features(small_graph, pair_features)))
    assert doc["total_triples"] == 10
    assert doc["dataset_features"][f"PO|{RDF_TYPE.lexical}|{UB}Student"] == {"count": 2, "owned": 2}
    assert len(doc["workload"]["Q9"]["features"]) == 6
