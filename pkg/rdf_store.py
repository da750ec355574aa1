"""
WawPart - RDF Store
N-Triples parsing and serialization with subject/predicate/object indices
"""

import io
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import BinaryIO, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from rdflib.plugins.parsers.ntriples import ParseError, W3CNTriplesParser
from rdflib.term import BNode, Literal, Node, URIRef

logger = logging.getLogger(__name__)


class NTriplesSyntaxError(ValueError):
    """Malformed N-Triples input, tagged with the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class TermKind(str, Enum):
    IRI = "Iri"
    LITERAL = "Literal"


@dataclass(frozen=True, order=True)
class Term:
    """
    An RDF term. Literal lexical forms are stored as the full token,
    quotes and language/datatype suffix included, so equality is syntactic.
    """
    kind: TermKind
    lexical: str

    def __post_init__(self):
        if self.kind is TermKind.IRI:
            if not self.lexical or any(ch.isspace() for ch in self.lexical):
                raise ValueError(f"Invalid IRI: {self.lexical!r}")

    @classmethod
    def iri(cls, value: str) -> "Term":
        return cls(TermKind.IRI, value)

    @classmethod
    def literal(cls, token: str) -> "Term":
        return cls(TermKind.LITERAL, token)

    @property
    def is_iri(self) -> bool:
        return self.kind is TermKind.IRI

    def n3(self) -> str:
        """Render the term the way it appears in N-Triples and SPARQL."""
        if self.is_iri:
            return f"<{self.lexical}>"
        return self.lexical

    def __str__(self) -> str:
        return self.n3()


@dataclass(frozen=True, order=True)
class Triple:
    s: Term
    p: Term
    o: Term

    def __post_init__(self):
        if not self.s.is_iri:
            raise ValueError(f"Subject must be an IRI: {self.s}")
        if not self.p.is_iri:
            raise ValueError(f"Predicate must be an IRI: {self.p}")

    def n3(self) -> str:
        return f"{self.s.n3()} {self.p.n3()} {self.o.n3()} ."


TripleId = int
IdList = Tuple[TripleId, ...]

_EMPTY: IdList = ()


class KnowledgeGraph:
    """
    Immutable triple set with dense ids (first-occurrence order) and
    P, PO, S and O indices. Build it with `from_triples` or `parse_ntriples`.
    """

    def __init__(self, triples: Sequence[Triple]):
        self._triples: Tuple[Triple, ...] = tuple(triples)
        self._ids: Dict[Triple, TripleId] = {}
        index_p: Dict[Term, List[TripleId]] = {}
        index_po: Dict[Tuple[Term, Term], List[TripleId]] = {}
        index_s: Dict[Term, List[TripleId]] = {}
        index_o: Dict[Term, List[TripleId]] = {}

        for tid, triple in enumerate(self._triples):
            if triple in self._ids:
                raise ValueError(f"Duplicate triple: {triple.n3()}")
            self._ids[triple] = tid
            index_p.setdefault(triple.p, []).append(tid)
            index_po.setdefault((triple.p, triple.o), []).append(tid)
            index_s.setdefault(triple.s, []).append(tid)
            index_o.setdefault(triple.o, []).append(tid)

        # ids are appended in ascending order, so every list is already sorted
        self.index_p: Dict[Term, IdList] = {k: tuple(v) for k, v in index_p.items()}
        self.index_po: Dict[Tuple[Term, Term], IdList] = {k: tuple(v) for k, v in index_po.items()}
        self.index_s: Dict[Term, IdList] = {k: tuple(v) for k, v in index_s.items()}
        self.index_o: Dict[Term, IdList] = {k: tuple(v) for k, v in index_o.items()}

    @classmethod
    def from_triples(cls, triples: Iterable[Triple]) -> "KnowledgeGraph":
        """Build a graph, silently dropping repeated triples."""
        seen = set()
        unique = []
        for triple in triples:
            if triple not in seen:
                seen.add(triple)
                unique.append(triple)
        return cls(unique)

    @property
    def triples(self) -> Tuple[Triple, ...]:
        return self._triples

    def __len__(self) -> int:
        return len(self._triples)

    def __contains__(self, triple: object) -> bool:
        return triple in self._ids

    def __getitem__(self, tid: TripleId) -> Triple:
        return self._triples[tid]

    def id_of(self, triple: Triple) -> Optional[TripleId]:
        return self._ids.get(triple)

    def predicates(self) -> List[Term]:
        """Distinct predicates in first-occurrence order."""
        return list(self.index_p)

    def lookup_p(self, p: Term) -> List[TripleId]:
        return list(self.index_p.get(p, _EMPTY))

    def lookup_po(self, p: Term, o: Term) -> List[TripleId]:
        return list(self.index_po.get((p, o), _EMPTY))

    def lookup_s(self, s: Term) -> List[TripleId]:
        return list(self.index_s.get(s, _EMPTY))

    def lookup_o(self, o: Term) -> List[TripleId]:
        return list(self.index_o.get(o, _EMPTY))

    def match(self, s: Optional[Term] = None, p: Optional[Term] = None,
              o: Optional[Term] = None) -> IdList:
        """
        Ids of triples matching the bound positions (None = unbound).

        Uses the smallest applicable index and filters the rest.
        """
        candidates: List[IdList] = []
        if p is not None and o is not None:
            candidates.append(self.index_po.get((p, o), _EMPTY))
        elif p is not None:
            candidates.append(self.index_p.get(p, _EMPTY))
        if s is not None:
            candidates.append(self.index_s.get(s, _EMPTY))
        if o is not None and p is None:
            candidates.append(self.index_o.get(o, _EMPTY))

        if not candidates:
            return tuple(range(len(self._triples)))

        ids = min(candidates, key=len)
        if len(candidates) == 1:
            return ids

        triples = self._triples
        return tuple(
            tid for tid in ids
            if (s is None or triples[tid].s == s)
            and (p is None or triples[tid].p == p)
            and (o is None or triples[tid].o == o)
        )

    def subgraph(self, ids: Iterable[TripleId]) -> "KnowledgeGraph":
        """New graph holding the given triples, in ascending id order."""
        return KnowledgeGraph([self._triples[tid] for tid in sorted(set(ids))])


class _StatementSink:
    """Collects what W3CNTriplesParser reports, one statement per line."""

    def __init__(self):
        self.statements: List[Tuple[Node, Node, Node]] = []

    def triple(self, s: Node, p: Node, o: Node) -> None:
        self.statements.append((s, p, o))


def _to_term(node: Node) -> Term:
    if isinstance(node, BNode):
        raise ValueError("blank nodes are not supported")
    if isinstance(node, URIRef):
        return Term.iri(str(node))
    if isinstance(node, Literal):
        return Term.literal(node.n3())
    raise ValueError(f"unexpected term {node!r}")


def _decode(source: Union[bytes, str, BinaryIO]) -> str:
    if isinstance(source, str):
        return source
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.read()
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise NTriplesSyntaxError(data[:e.start].count(b"\n") + 1, "input is not valid UTF-8") from e


def parse_ntriples(source: Union[bytes, str, BinaryIO]) -> KnowledgeGraph:
    """
    Parse N-Triples into an indexed KnowledgeGraph.

    Duplicate triples are dropped; ids follow first occurrence.

    Raises:
        NTriplesSyntaxError: on malformed lines or blank nodes
    """
    text = _decode(source)
    sink = _StatementSink()
    parser = W3CNTriplesParser(sink)
    triples: List[Triple] = []
    for line_no, line in enumerate(io.StringIO(text), 1):
        if not line.strip():
            continue
        try:
            parser.parsestring(line)
        except ParseError as e:
            raise NTriplesSyntaxError(line_no, f"malformed triple: {line.strip()[:80]}") from e
        for s, p, o in sink.statements:
            try:
                triples.append(Triple(_to_term(s), _to_term(p), _to_term(o)))
            except ValueError as e:
                raise NTriplesSyntaxError(line_no, str(e)) from e
        sink.statements.clear()

    graph = KnowledgeGraph.from_triples(triples)
    logger.debug(f"Parsed {len(graph)} distinct triples from {len(triples)} statements")
    return graph


def serialize_ntriples(graph: KnowledgeGraph) -> str:
    """Canonical N-Triples: one triple per line in id order."""
    return "".join(f"{t.n3()}\n" for t in graph.triples)


def load_ntriples(path: Union[str, Path]) -> KnowledgeGraph:
    with open(path, "rb") as f:
        return parse_ntriples(f)


def write_ntriples(graph: KnowledgeGraph, path: Union[str, Path]) -> None:
    Path(path).write_text(serialize_ntriples(graph), encoding="utf-8")
