import pytest

from benchmark_generator import BenchmarkKind, GeneratorSpec, generate
from feature_extractor import extract_query_features
from rdf_store import parse_ntriples
from sparql_query import parse_query, parse_workload

UB = "http://swat.cse.lehigh.edu/onto/univ-bench.owl#"
EX = "http://example.org/"
RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"

QUERY_7 = f"""
PREFIX ub: <{UB}>
SELECT ?X ?Y WHERE {{
  ?X rdf:type ub:Student .
  ?Y rdf:type ub:Course .
  ?X ub:takesCourse ?Y .
  <{EX}f1> ub:teacherOf ?Y .
}}
"""

QUERY_9 = f"""
PREFIX ub: <{UB}>
SELECT ?X ?Y ?Z WHERE {{
  ?X rdf:type ub:Student .
  ?Y rdf:type ub:Faculty .
  ?Z rdf:type ub:Course .
  ?X ub:advisor ?Y .
  ?Y ub:teacherOf ?Z .
  ?X ub:takesCourse ?Z .
}}
"""

# graduate students whose degree and department share a university
QUERY_2 = f"""
PREFIX ub: <{UB}>
SELECT ?X ?Y ?Z FROM <lubm> WHERE {{
  ?X rdf:type ub:GraduateStudent .
  ?Y rdf:type ub:University .
  ?Z rdf:type ub:Department .
  ?X ub:memberOf ?Z .
  ?Z ub:subOrganizationOf ?Y .
  ?X ub:undergraduateDegreeFrom ?Y .
}}
"""

SMALL_GRAPH = f"""\
<{EX}s1> <{RDF_TYPE}> <{UB}Student> .
<{EX}s2> <{RDF_TYPE}> <{UB}Student> .
<{EX}c1> <{RDF_TYPE}> <{UB}Course> .
<{EX}f1> <{RDF_TYPE}> <{UB}Faculty> .
<{EX}s1> <{UB}takesCourse> <{EX}c1> .
<{EX}s2> <{UB}takesCourse> <{EX}c1> .
<{EX}f1> <{UB}teacherOf> <{EX}c1> .
<{EX}s1> <{UB}advisor> <{EX}f1> .
<{EX}s2> <{UB}advisor> <{EX}f1> .
<{EX}f1> <{UB}worksFor> <{EX}d1> .
"""

UNIVERSITY_GRAPH = f"""\
<{EX}g1> <{RDF_TYPE}> <{UB}GraduateStudent> .
<{EX}g2> <{RDF_TYPE}> <{UB}GraduateStudent> .
<{EX}u1> <{RDF_TYPE}> <{UB}University> .
<{EX}u2> <{RDF_TYPE}> <{UB}University> .
<{EX}d1> <{RDF_TYPE}> <{UB}Department> .
<{EX}d2> <{RDF_TYPE}> <{UB}Department> .
<{EX}g1> <{UB}memberOf> <{EX}d1> .
<{EX}g2> <{UB}memberOf> <{EX}d2> .
<{EX}d1> <{UB}subOrganizationOf> <{EX}u1> .
<{EX}d2> <{UB}subOrganizationOf> <{EX}u1> .
<{EX}g1> <{UB}undergraduateDegreeFrom> <{EX}u1> .
<{EX}g2> <{UB}undergraduateDegreeFrom> <{EX}u2> .
"""


@pytest.fixture
def q7():
    return parse_query(QUERY_7, "Q7")


@pytest.fixture
def q9():
    return parse_query(QUERY_9, "Q9")


@pytest.fixture
def q2():
    return parse_query(QUERY_2, "Q2")


@pytest.fixture
def pair_features(q7, q9):
    return [extract_query_features(q7), extract_query_features(q9)]


@pytest.fixture
def small_graph():
    """Ten triples covering the Q7/Q9 pair plus one predicate no query uses."""
    return parse_ntriples(SMALL_GRAPH)


@pytest.fixture
def university_graph():
    return parse_ntriples(UNIVERSITY_GRAPH)


@pytest.fixture(scope="session")
def lubm():
    return generate(GeneratorSpec(benchmark=BenchmarkKind.LUBM, seed=1, scale=15000))


@pytest.fixture(scope="session")
def lubm_small():
    return generate(GeneratorSpec(benchmark=BenchmarkKind.LUBM, seed=1, units=2))


@pytest.fixture(scope="session")
def lubm_queries(lubm):
    return parse_workload(lubm.workload_text)
