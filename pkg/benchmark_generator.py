"""
WawPart - Benchmark Generator
Mini LUBM/BSBM-style datasets with matching workloads, and the
random-predicate partitioning baseline
"""

import logging
import random
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field

from feature_extractor import Feature
from partition_engine import Partitioning, assign_triples
from rdf_store import KnowledgeGraph, Term, Triple
from sparql_query import RDF_TYPE, Query, parse_workload

logger = logging.getLogger(__name__)

UB = "http://swat.cse.lehigh.edu/onto/univ-bench.owl#"
BSBM = "http://www4.wiwiss.fu-berlin.de/bizer/bsbm/v01/vocabulary/"
BSBM_INST = "http://www4.wiwiss.fu-berlin.de/bizer/bsbm/v01/instances/"
RDFS_LABEL = "http://www.w3.org/2000/01/rdf-schema#label"
REV = "http://purl.org/stuff/rev#"
DC = "http://purl.org/dc/elements/1.1/"
FOAF = "http://xmlns.com/foaf/0.1/"
XSD_INTEGER = "http://www.w3.org/2001/XMLSchema#integer"

LUBM_MIN_SCALE = 1000
BSBM_MIN_SCALE = 500


class GeneratorError(ValueError):
    """Generator parameters outside the supported range."""


class BenchmarkKind(str, Enum):
    LUBM = "lubm"
    BSBM = "bsbm"


class GeneratorSpec(BaseModel):
    benchmark: BenchmarkKind = Field(default=BenchmarkKind.LUBM)
    seed: int = Field(default=1, description="RNG seed; equal seeds give byte-identical output")
    scale: int = Field(default=15000, ge=1, description="Triple-count target")
    units: Optional[int] = Field(default=None, ge=1, description="Universities (LUBM) or producers (BSBM); overrides scale")


class BaselineStrategy(str, Enum):
    RANDOM_PREDICATE = "random"


class BaselineSpec(BaseModel):
    seed: int = 1
    k: int = Field(default=3, ge=1)
    strategy: BaselineStrategy = BaselineStrategy.RANDOM_PREDICATE


@dataclass(frozen=True)
class GeneratedBenchmark:
    graph: KnowledgeGraph
    workload_text: str
    units: int

    @property
    def queries(self) -> List[Query]:
        return parse_workload(self.workload_text)

    @property
    def triple_count(self) -> int:
        return len(self.graph)


def _iri(value: str) -> Term:
    return Term.iri(value)


def _lit(value: str) -> Term:
    return Term.literal(f'"{value}"')


def _int(value: int) -> Term:
    return Term.literal(f'"{value}"^^<{XSD_INTEGER}>')


class _TripleSink:
    def __init__(self):
        self.triples: List[Triple] = []

    def add(self, s: Term, p: str, o: Term) -> None:
        self.triples.append(Triple(s, _iri(p), o))

    def typed(self, s: Term, cls: str) -> None:
        self.add(s, RDF_TYPE, _iri(cls))

    def __len__(self) -> int:
        return len(self.triples)


# LUBM-like university data

LUBM_WORKLOAD = """\
PREFIX ub: <http://swat.cse.lehigh.edu/onto/univ-bench.owl#>
# id: Q7
SELECT ?X ?Y WHERE {
  ?X rdf:type ub:Student .
  ?Y rdf:type ub:Course .
  ?X ub:takesCourse ?Y .
  <http://www.Department0.University0.edu/Professor0> ub:teacherOf ?Y .
}
---
PREFIX ub: <http://swat.cse.lehigh.edu/onto/univ-bench.owl#>
# id: Q9
SELECT ?X ?Y ?Z WHERE {
  ?X rdf:type ub:Student .
  ?Y rdf:type ub:Faculty .
  ?Z rdf:type ub:Course .
  ?X ub:advisor ?Y .
  ?Y ub:teacherOf ?Z .
  ?X ub:takesCourse ?Z .
}
---
PREFIX ub: <http://swat.cse.lehigh.edu/onto/univ-bench.owl#>
# id: Q2
SELECT ?X ?Y ?Z FROM <lubm> WHERE {
  ?X rdf:type ub:GraduateStudent .
  ?Y rdf:type ub:University .
  ?Z rdf:type ub:Department .
  ?X ub:memberOf ?Z .
  ?Z ub:subOrganizationOf ?Y .
  ?X ub:undergraduateDegreeFrom ?Y .
}
---
PREFIX ub: <http://swat.cse.lehigh.edu/onto/univ-bench.owl#>
# id: Q6
SELECT ?X WHERE {
  ?X rdf:type ub:Student .
}
---
PREFIX ub: <http://swat.cse.lehigh.edu/onto/univ-bench.owl#>
# id: Q14
SELECT ?X ?Y WHERE {
  ?X a ub:Student .
  ?X ub:advisor ?Y .
}
---
PREFIX ub: <http://swat.cse.lehigh.edu/onto/univ-bench.owl#>
# id: Q1
SELECT ?X ?D WHERE {
  ?X a ub:GraduateStudent .
  ?X ub:memberOf ?D .
}
---
PREFIX ub: <http://swat.cse.lehigh.edu/onto/univ-bench.owl#>
# id: Q5
SELECT ?X ?D ?U WHERE {
  ?X ub:worksFor ?D .
  ?D ub:subOrganizationOf ?U .
}
---
PREFIX ub: <http://swat.cse.lehigh.edu/onto/univ-bench.owl#>
# id: Q4
SELECT ?X WHERE {
  ?X a ub:GraduateStudent .
}
---
PREFIX ub: <http://swat.cse.lehigh.edu/onto/univ-bench.owl#>
# id: Q3
SELECT ?P ?A WHERE {
  ?P a ub:Publication .
  ?P ub:publicationAuthor ?A .
}
---
PREFIX ub: <http://swat.cse.lehigh.edu/onto/univ-bench.owl#>
# id: Q8
SELECT ?P ?A ?R WHERE {
  ?P ub:publicationAuthor ?A .
  ?A ub:researchInterest ?R .
}
---
PREFIX ub: <http://swat.cse.lehigh.edu/onto/univ-bench.owl#>
# id: Q10
SELECT ?P WHERE {
  ?P a ub:Publication .
}
"""


def _lubm_department(sink: _TripleSink, rng: random.Random, u: int, d: int, universities: int) -> None:
    base = f"http://www.Department{d}.University{u}.edu"
    dept = _iri(base)
    univ = _iri(f"http://www.University{u}.edu")

    def any_univ() -> Term:
        return _iri(f"http://www.University{rng.randrange(universities)}.edu")

    sink.typed(dept, UB + "Department")
    sink.add(dept, UB + "subOrganizationOf", univ)
    sink.add(dept, UB + "name", _lit(f"Department{d}"))

    faculty_count = rng.randint(4, 6)
    courses = [_iri(f"{base}/Course{i}") for i in range(2 * faculty_count)]
    faculty = [_iri(f"{base}/Professor{i}") for i in range(faculty_count)]
    for i, prof in enumerate(faculty):
        sink.typed(prof, UB + "Faculty")
        sink.add(prof, UB + "worksFor", dept)
        sink.add(prof, UB + "name", _lit(f"Professor{i}"))
        sink.add(prof, UB + "emailAddress", _lit(f"Professor{i}@Department{d}.University{u}.edu"))
        sink.add(prof, UB + "telephone", _lit(f"{u:03d}-{d:03d}-{i:04d}"))
        sink.add(prof, UB + "teacherOf", courses[2 * i])
        sink.add(prof, UB + "teacherOf", courses[2 * i + 1])
        sink.add(prof, UB + "undergraduateDegreeFrom", any_univ())
        sink.add(prof, UB + "mastersDegreeFrom", any_univ())
        sink.add(prof, UB + "doctoralDegreeFrom", any_univ())
        sink.add(prof, UB + "researchInterest", _lit(f"Research{rng.randrange(30)}"))
    sink.add(faculty[0], UB + "headOf", dept)

    for i, course in enumerate(courses):
        sink.typed(course, UB + "Course")
        sink.add(course, UB + "name", _lit(f"Course{i}"))

    for i in range(rng.randint(14, 18)):
        student = _iri(f"{base}/UndergraduateStudent{i}")
        sink.typed(student, UB + "Student")
        sink.add(student, UB + "memberOf", dept)
        sink.add(student, UB + "name", _lit(f"UndergraduateStudent{i}"))
        sink.add(student, UB + "emailAddress", _lit(f"UndergraduateStudent{i}@Department{d}.University{u}.edu"))
        sink.add(student, UB + "telephone", _lit(f"{u:03d}-{d:03d}-{100 + i:04d}"))
        for course in rng.sample(courses, 2):
            sink.add(student, UB + "takesCourse", course)
        if i % 2 == 0:
            sink.add(student, UB + "advisor", rng.choice(faculty))

    for i in range(rng.randint(5, 7)):
        student = _iri(f"{base}/GraduateStudent{i}")
        sink.typed(student, UB + "GraduateStudent")
        sink.add(student, UB + "memberOf", dept)
        sink.add(student, UB + "undergraduateDegreeFrom", any_univ())
        sink.add(student, UB + "takesCourse", rng.choice(courses))
        sink.add(student, UB + "advisor", rng.choice(faculty))
        sink.add(student, UB + "name", _lit(f"GraduateStudent{i}"))
        sink.add(student, UB + "emailAddress", _lit(f"GraduateStudent{i}@Department{d}.University{u}.edu"))
        sink.add(student, UB + "telephone", _lit(f"{u:03d}-{d:03d}-{200 + i:04d}"))
        if i % 2 == 0:
            sink.add(student, UB + "teachingAssistantOf", rng.choice(courses))

    for i in range(rng.randint(8, 12)):
        paper = _iri(f"{base}/Publication{i}")
        sink.typed(paper, UB + "Publication")
        sink.add(paper, UB + "publicationAuthor", rng.choice(faculty))
        sink.add(paper, UB + "title", _lit(f"Publication{i} of Department{d}.University{u}"))

    for i in range(2):
        group = _iri(f"{base}/ResearchGroup{i}")
        sink.typed(group, UB + "ResearchGroup")
        sink.add(group, UB + "subOrganizationOf", dept)


def _lubm_university(sink: _TripleSink, rng: random.Random, u: int, universities: int) -> None:
    univ = _iri(f"http://www.University{u}.edu")
    sink.typed(univ, UB + "University")
    sink.add(univ, UB + "name", _lit(f"University{u}"))
    for d in range(3):
        _lubm_department(sink, rng, u, d, universities)


# BSBM-like e-commerce data

BSBM_WORKLOAD = """\
PREFIX bsbm: <http://www4.wiwiss.fu-berlin.de/bizer/bsbm/v01/vocabulary/>
# id: B1
SELECT ?p ?f ?n WHERE {
  ?p a bsbm:Product .
  ?p bsbm:productFeature ?f .
  ?p bsbm:productPropertyNumeric1 ?n .
}
---
PREFIX bsbm: <http://www4.wiwiss.fu-berlin.de/bizer/bsbm/v01/vocabulary/>
# id: B2
SELECT ?p ?r WHERE {
  ?p a bsbm:Product .
  ?p bsbm:producer ?r .
  ?r a bsbm:Producer .
}
---
PREFIX bsbm: <http://www4.wiwiss.fu-berlin.de/bizer/bsbm/v01/vocabulary/>
PREFIX inst: <http://www4.wiwiss.fu-berlin.de/bizer/bsbm/v01/instances/>
# id: B3
SELECT ?p ?r WHERE {
  ?p bsbm:productFeature inst:ProductFeature1 .
  ?p bsbm:producer ?r .
}
---
PREFIX bsbm: <http://www4.wiwiss.fu-berlin.de/bizer/bsbm/v01/vocabulary/>
# id: B4
SELECT ?p WHERE {
  ?p a bsbm:Product .
}
---
PREFIX bsbm: <http://www4.wiwiss.fu-berlin.de/bizer/bsbm/v01/vocabulary/>
# id: B5
SELECT ?o ?p ?v ?c WHERE {
  ?o a bsbm:Offer .
  ?o bsbm:product ?p .
  ?o bsbm:vendor ?v .
  ?v bsbm:country ?c .
}
---
PREFIX bsbm: <http://www4.wiwiss.fu-berlin.de/bizer/bsbm/v01/vocabulary/>
# id: B6
SELECT ?o ?x ?d WHERE {
  ?o a bsbm:Offer .
  ?o bsbm:price ?x .
  ?o bsbm:deliveryDays ?d .
}
---
PREFIX bsbm: <http://www4.wiwiss.fu-berlin.de/bizer/bsbm/v01/vocabulary/>
# id: B7
SELECT ?o ?v WHERE {
  ?o bsbm:vendor ?v .
  ?v a bsbm:Vendor .
}
---
PREFIX bsbm: <http://www4.wiwiss.fu-berlin.de/bizer/bsbm/v01/vocabulary/>
# id: B8
SELECT ?o WHERE {
  ?o a bsbm:Offer .
}
---
PREFIX bsbm: <http://www4.wiwiss.fu-berlin.de/bizer/bsbm/v01/vocabulary/>
PREFIX rev: <http://purl.org/stuff/rev#>
# id: B9
SELECT ?r ?p ?x WHERE {
  ?r a rev:Review .
  ?r bsbm:reviewFor ?p .
  ?r bsbm:rating1 ?x .
}
---
PREFIX bsbm: <http://www4.wiwiss.fu-berlin.de/bizer/bsbm/v01/vocabulary/>
PREFIX rev: <http://purl.org/stuff/rev#>
PREFIX foaf: <http://xmlns.com/foaf/0.1/>
# id: B10
SELECT ?r ?u ?n WHERE {
  ?r bsbm:reviewFor ?p .
  ?r rev:reviewer ?u .
  ?u foaf:name ?n .
}
---
PREFIX rev: <http://purl.org/stuff/rev#>
# id: B11
SELECT ?r WHERE {
  ?r a rev:Review .
}
"""

_BSBM_FEATURES = 20
_COUNTRIES = ("US", "DE", "GB", "FR", "JP", "CN", "RU", "ES", "AT", "KR")


def _bsbm_prelude(sink: _TripleSink) -> None:
    for i in range(_BSBM_FEATURES):
        feature = _iri(f"{BSBM_INST}ProductFeature{i}")
        sink.typed(feature, BSBM + "ProductFeature")
        sink.add(feature, RDFS_LABEL, _lit(f"feature {i}"))


def _bsbm_producer(sink: _TripleSink, rng: random.Random, n: int, producers: int) -> None:
    base = f"{BSBM_INST}dataFromProducer{n}"
    producer = _iri(f"{base}/Producer{n}")
    sink.typed(producer, BSBM + "Producer")
    sink.add(producer, RDFS_LABEL, _lit(f"Producer{n}"))
    sink.add(producer, BSBM + "country", _iri(f"http://downlode.org/rdf/iso-3166/countries#{rng.choice(_COUNTRIES)}"))

    vendor = _iri(f"{BSBM_INST}dataFromVendor{n}/Vendor{n}")
    sink.typed(vendor, BSBM + "Vendor")
    sink.add(vendor, RDFS_LABEL, _lit(f"Vendor{n}"))
    sink.add(vendor, BSBM + "country", _iri(f"http://downlode.org/rdf/iso-3166/countries#{rng.choice(_COUNTRIES)}"))

    reviewers = []
    for i in range(2):
        person = _iri(f"{BSBM_INST}dataFromRatingSite{n}/Reviewer{i}")
        sink.typed(person, FOAF + "Person")
        sink.add(person, FOAF + "name", _lit(f"Reviewer{n}-{i}"))
        sink.add(person, BSBM + "country", _iri(f"http://downlode.org/rdf/iso-3166/countries#{rng.choice(_COUNTRIES)}"))
        reviewers.append(person)

    products = []
    for i in range(rng.randint(4, 6)):
        product = _iri(f"{base}/Product{i}")
        sink.typed(product, BSBM + "Product")
        sink.add(product, RDFS_LABEL, _lit(f"Product{i} of Producer{n}"))
        sink.add(product, BSBM + "producer", producer)
        for f in rng.sample(range(_BSBM_FEATURES), 2):
            sink.add(product, BSBM + "productFeature", _iri(f"{BSBM_INST}ProductFeature{f}"))
        sink.add(product, BSBM + "productPropertyNumeric1", _int(rng.randint(1, 2000)))
        sink.add(product, BSBM + "productPropertyTextual1", _lit(f"text{rng.randrange(1000)}"))
        products.append(product)

    for i in range(2 * len(products)):
        offer = _iri(f"{BSBM_INST}dataFromVendor{n}/Offer{i}")
        sink.typed(offer, BSBM + "Offer")
        sink.add(offer, BSBM + "product", rng.choice(products))
        sink.add(offer, BSBM + "vendor", vendor)
        sink.add(offer, BSBM + "price", _int(rng.randint(5, 10000)))
        sink.add(offer, BSBM + "deliveryDays", _int(rng.randint(1, 14)))
        sink.add(offer, BSBM + "validTo", _lit(f"2008-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}"))

    for i in range(2 * len(products)):
        review = _iri(f"{BSBM_INST}dataFromRatingSite{n}/Review{i}")
        sink.typed(review, REV + "Review")
        sink.add(review, BSBM + "reviewFor", rng.choice(products))
        sink.add(review, REV + "reviewer", rng.choice(reviewers))
        sink.add(review, BSBM + "rating1", _int(rng.randint(1, 10)))
        sink.add(review, DC + "title", _lit(f"Review{i} of Producer{n}"))
        sink.add(review, REV + "text", _lit(f"review text {rng.randrange(10000)}"))


_UnitBuilder = Callable[[_TripleSink, random.Random, int, int], None]


def _grow(spec: GeneratorSpec, unit: _UnitBuilder, unit_estimate: int) -> Tuple[_TripleSink, int]:
    rng = random.Random(spec.seed)
    sink = _TripleSink()
    if spec.benchmark is BenchmarkKind.BSBM:
        _bsbm_prelude(sink)
    target_units = spec.units or max(1, -(-spec.scale // unit_estimate))
    n = 0
    while n < target_units or (spec.units is None and len(sink) < spec.scale):
        unit(sink, rng, n, target_units)
        n += 1
    return sink, n


def generate(spec: GeneratorSpec) -> GeneratedBenchmark:
    """
    Build a dataset and its workload. Data units (universities or producers)
    are added until the triple count reaches `scale`.

    Raises:
        GeneratorError: scale below the benchmark's minimum
    """
    if spec.benchmark is BenchmarkKind.LUBM:
        minimum, workload = LUBM_MIN_SCALE, LUBM_WORKLOAD
        unit: _UnitBuilder = _lubm_university
        estimate = 854
    else:
        minimum, workload = BSBM_MIN_SCALE, BSBM_WORKLOAD
        unit = _bsbm_producer
        estimate = 170
    if spec.units is None and spec.scale < minimum:
        raise GeneratorError(f"{spec.benchmark.value} scale {spec.scale} is below the minimum of {minimum} triples")

    sink, units = _grow(spec, unit, estimate)
    graph = KnowledgeGraph.from_triples(sink.triples)
    logger.info(f"Generated {spec.benchmark.value} seed={spec.seed}: {units} units, {len(graph)} triples")
    return GeneratedBenchmark(graph=graph, workload_text=workload, units=units)


def random_partition(g: KnowledgeGraph, spec: BaselineSpec) -> Partitioning:
    """
    Whole predicates shuffled by a seeded RNG and dealt round-robin to k
    shards.
    """
    predicates = sorted(g.predicates(), key=lambda t: t.lexical)
    random.Random(spec.seed).shuffle(predicates)
    home: Dict[Feature, int] = {Feature.p(p): i % spec.k for i, p in enumerate(predicates)}
    shards = assign_triples(g, home, spec.k)
    partitioning = Partitioning(
        k=spec.k,
        shards=shards,
        feature_home=home,
        sizes={shard: len(ids) for shard, ids in shards.items()},
        feature_sizes={f: len(g.index_p[f.predicate]) for f in home},
        strategy=spec.strategy.value,
    )
    partitioning.check_disjoint_cover(len(g))
    logger.info(f"Random-predicate baseline seed={spec.seed}: shard sizes {partitioning.sizes}")
    return partitioning
