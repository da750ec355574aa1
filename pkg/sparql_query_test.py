import random

import pytest

from rdf_store import Term
from sparql_query import (RDF_TYPE, Const, FederatedQuery, MissingEndpointError, Query, QuerySyntaxError,
                          TriplePattern, UndeclaredPrefixError, UnsupportedKeywordError, Var, parse_federated,
                          parse_query, parse_workload, serialize_federated, serialize_query, serialize_workload)

UB = "http://swat.cse.lehigh.edu/onto/univ-bench.owl#"
ENDPOINTS = {0: "http://shard-0/sparql", 1: "http://shard-1/sparql", 2: "http://shard-2/sparql"}


def test_grad_student_query(q2):
    assert len(q2.patterns) == 6
    assert q2.projected == ("X", "Y", "Z")
    assert q2.patterns[0] == TriplePattern(Var("X"), Const(Term.iri(RDF_TYPE)), Const(Term.iri(UB + "GraduateStudent")))
    assert q2.patterns[5].p == Const(Term.iri(UB + "undergraduateDegreeFrom"))


def test_minimal_query():
    q = parse_query("SELECT ?x WHERE { ?x <p> <o> . }")
    assert q.projected == ("x",)
    assert q.patterns == (TriplePattern(Var("x"), Const(Term.iri("p")), Const(Term.iri("o"))),)


def test_undeclared_prefix_names_the_prefix():
    with pytest.raises(UndeclaredPrefixError) as err:
        parse_query("SELECT ?x WHERE { ?x foo:bar ?y }")
    assert err.value.prefix == "foo"
    assert "foo" in str(err.value)


@pytest.mark.parametrize("keyword, text", [
    ("OPTIONAL", "SELECT ?x WHERE { ?x <p> ?y . OPTIONAL { ?x <q> ?z } }"),
    ("FILTER", "SELECT ?x WHERE { ?x <p> ?y . FILTER (?y != <o>) }"),
    ("UNION", "SELECT ?x WHERE { { ?x <p> ?y } UNION { ?x <q> ?y } }"),
    ("LIMIT", "SELECT ?x WHERE { ?x <p> ?y } LIMIT 5"),
    ("ORDER", "SELECT ?x WHERE { ?x <p> ?y } ORDER BY ?y"),
    ("CONSTRUCT", "CONSTRUCT { ?x <p> ?y } WHERE { ?x <p> ?y }"),
    ("NAMED", "SELECT ?x FROM NAMED <g> WHERE { ?x <p> ?y }"),
])
def test_unsupported_keyword_is_named(keyword, text):
    with pytest.raises(UnsupportedKeywordError) as err:
        parse_query(text)
    assert err.value.keyword == keyword
    assert err.value.position == text.index(keyword)


def test_syntax_error_is_located():
    text = "SELECT ?x\nWHERE { ?x <p> }"
    with pytest.raises(QuerySyntaxError) as err:
        parse_query(text)
    assert not isinstance(err.value, UnsupportedKeywordError)
    assert 0 <= err.value.position <= len(text)
    assert "line" in str(err.value) and "column" in str(err.value)


def test_blank_nodes_rejected():
    with pytest.raises(QuerySyntaxError, match="blank"):
        parse_query("SELECT ?x WHERE { ?x <p> _:b }")


def test_pattern_order_is_kept():
    q = parse_query("SELECT * WHERE { ?a <p> ?b . <s> <q> <o> . ?b <r> ?c ; <t> ?d }")
    assert [tp.p for tp in q.patterns] == [Const(Term.iri(i)) for i in ("p", "q", "r", "t")]
    assert q.projected == ("a", "b", "c", "d")


def test_declared_prefix_and_caller_prefixes():
    q = parse_query("PREFIX ex: <http://ex/> SELECT ?x WHERE { ?x ex:p my:o }", prefixes={"my": "http://my/"})
    assert q.patterns[0].p == Const(Term.iri("http://ex/p"))
    assert q.patterns[0].o == Const(Term.iri("http://my/o"))


def test_select_star_distinct_and_a_keyword():
    q = parse_query("SELECT DISTINCT * WHERE { ?s a <C> . ?s <p> ?o }")
    assert q.projected == ("s", "o")
    assert q.patterns[0].p == Const(Term.iri(RDF_TYPE))


def test_literal_objects_and_prefixed_datatype():
    q = parse_query('SELECT ?x WHERE { ?x <age> "42"^^xsd:integer . ?x <name> "Al"@en }')
    assert q.patterns[0].o == Const(Term.literal('"42"^^<http://www.w3.org/2001/XMLSchema#integer>'))
    assert q.patterns[1].o == Const(Term.literal('"Al"@en'))


def test_literal_subject_is_an_error():
    with pytest.raises(QuerySyntaxError):
        parse_query('SELECT ?x WHERE { "x" <p> ?x }')


def test_projecting_unbound_variable_is_an_error():
    with pytest.raises(QuerySyntaxError):
        parse_query("SELECT ?z WHERE { ?x <p> ?y }")


def _random_query(rng: random.Random, qid: str) -> Query:
    names = ["a", "b", "c", "d"]
    patterns = []
    for _ in range(rng.randint(1, 4)):
        s = Var(rng.choice(names)) if rng.random() < 0.8 else Const(Term.iri(f"http://ex/s{rng.randrange(3)}"))
        p = Const(Term.iri(f"http://ex/p{rng.randrange(4)}"))
        roll = rng.random()
        if roll < 0.5:
            o = Var(rng.choice(names))
        elif roll < 0.8:
            o = Const(Term.iri(f"http://ex/o{rng.randrange(3)}"))
        else:
            o = Const(Term.literal(f'"v{rng.randrange(3)}"'))
        patterns.append(TriplePattern(s, p, o))
    variables = list(dict.fromkeys(v for tp in patterns for v in tp.variables()))
    projected = tuple(rng.sample(variables, rng.randint(0, len(variables))))
    return Query(qid, projected or tuple(variables), tuple(patterns))


def test_serialize_parse_round_trip():
    rng = random.Random(7)
    for i in range(100):
        q = _random_query(rng, f"Q{i}")
        if not q.projected:
            continue
        assert parse_query(serialize_query(q), q.id) == q


def _grad_student_plan(q2):
    p = q2.patterns
    return FederatedQuery("Q2", 0, q2.projected, ((0, p[0:3]), (1, p[3:5]), (2, p[5:6])))


def test_serialize_federated_grad_student(q2):
    text = serialize_federated(_grad_student_plan(q2), ENDPOINTS)
    assert text.count("SERVICE") == 2
    assert "SERVICE <http://shard-1/sparql>" in text
    assert "SERVICE <http://shard-2/sparql>" in text
    for tp in q2.patterns:
        assert text.count(tp.n3()) == 1


def test_single_group_serializes_as_the_original(q2):
    fq = FederatedQuery("Q2", 1, q2.projected, ((1, q2.patterns),))
    assert serialize_federated(fq, {}) == serialize_query(q2)


def test_missing_endpoint(q2):
    with pytest.raises(MissingEndpointError):
        serialize_federated(_grad_student_plan(q2), {})


def test_parse_federated_round_trip(q2):
    plan = _grad_student_plan(q2)
    again = parse_federated(serialize_federated(plan, ENDPOINTS), ENDPOINTS, ppn=0, query_id="Q2")
    assert again == plan


def test_parse_federated_merges_same_endpoint():
    text = ("SELECT ?x ?y WHERE { ?x <a> ?y . SERVICE <http://e1> { ?x <b> ?y } "
            "SERVICE <http://e1> { ?y <c> ?x } }")
    fq = parse_federated(text, {0: "http://e0", 1: "http://e1"}, ppn=0)
    assert [shard for shard, _ in fq.groups] == [0, 1]
    assert len(fq.groups[1][1]) == 2


def test_parse_federated_unknown_endpoint():
    with pytest.raises(MissingEndpointError):
        parse_federated("SELECT ?x WHERE { SERVICE <http://nowhere> { ?x <a> ?y } }", {}, ppn=0)


def test_nested_service_rejected():
    text = "SELECT ?x WHERE { SERVICE <http://e> { SERVICE <http://f> { ?x <a> ?y } } }"
    with pytest.raises(UnsupportedKeywordError):
        parse_federated(text, {0: "http://e", 1: "http://f"}, ppn=0)


def test_federated_query_requires_leading_ppn_group(q2):
    with pytest.raises(ValueError):
        FederatedQuery("Q2", 0, q2.projected, ((1, q2.patterns),))
    with pytest.raises(ValueError):
        FederatedQuery("Q2", 0, q2.projected, ((0, q2.patterns[:3]), (0, q2.patterns[3:])))


def test_workload_ids_and_defaults():
    text = ("# id: first\nSELECT ?x WHERE { ?x <p> ?y }\n---\n"
            "SELECT ?x WHERE { ?x <q> ?y }\n---\n\n")
    queries = parse_workload(text)
    assert [q.id for q in queries] == ["first", "Q2"]
    assert parse_workload(serialize_workload(queries)) == queries


def test_workload_duplicate_ids():
    text = "# id: A\nSELECT ?x WHERE { ?x <p> ?y }\n---\n# id: A\nSELECT ?x WHERE { ?x <q> ?y }\n"
    with pytest.raises(QuerySyntaxError, match="duplicate"):
        parse_workload(text)


def test_generated_workload_parses(lubm_queries):
    assert len(lubm_queries) >= 10
    assert {"Q7", "Q9", "Q2"} <= {q.id for q in lubm_queries}
    assert sum(1 for q in lubm_queries if len(q.patterns) == 1) >= 2


def test_default_ids_skip_explicit_ones():
    text = "# id: Q2\nSELECT ?x WHERE { ?x <p> ?y }\n---\nSELECT ?x WHERE { ?x <q> ?y }\n---\nSELECT ?x WHERE { ?x <r> ?y }\n"
    assert [q.id for q in parse_workload(text)] == ["Q2", "Q3", "Q4"]
