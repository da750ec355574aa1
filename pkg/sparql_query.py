"""
WawPart - SPARQL Query Language
Parser and serializer for SELECT queries over basic graph patterns and their
federated SERVICE form
"""

import logging
import re
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from pyparsing import ParseBaseException, ParseResults
from rdflib import BNode, Literal, URIRef, Variable
from rdflib.plugins.sparql.algebra import translateQuery
from rdflib.plugins.sparql.parser import parseQuery
from rdflib.plugins.sparql.parserutils import CompValue

from rdf_store import Term

logger = logging.getLogger(__name__)

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"

DEFAULT_PREFIXES: Dict[str, str] = {
    "rdf": "http://www.w3.org/1999/02/22-rdf-syntax-ns#",
    "rdfs": "http://www.w3.org/2000/01/rdf-schema#",
    "xsd": "http://www.w3.org/2001/XMLSchema#",
    "owl": "http://www.w3.org/2002/07/owl#",
}

UNSUPPORTED_KEYWORDS = frozenset({
    "OPTIONAL", "FILTER", "UNION", "MINUS", "GRAPH", "BIND", "VALUES",
    "ORDER", "LIMIT", "OFFSET", "GROUP", "HAVING", "CONSTRUCT", "ASK",
    "DESCRIBE", "INSERT", "DELETE", "BASE", "NAMED", "EXISTS", "NOT",
})


class QuerySyntaxError(ValueError):
    """Malformed query text; `position` is the 0-based character offset."""

    def __init__(self, message: str, position: int, text: str = ""):
        line = text.count("\n", 0, position) + 1
        column = position - (text.rfind("\n", 0, position) + 1) + 1
        super().__init__(f"{message} at line {line}, column {column}")
        self.position = position


class UnsupportedKeywordError(QuerySyntaxError):
    def __init__(self, keyword: str, position: int, text: str = ""):
        super().__init__(f"unsupported keyword {keyword}", position, text)
        self.keyword = keyword


class UndeclaredPrefixError(QuerySyntaxError):
    def __init__(self, prefix: str, position: int, text: str = ""):
        super().__init__(f"undeclared prefix '{prefix}:'", position, text)
        self.prefix = prefix


class MissingEndpointError(ValueError):
    """A shard referenced by a federated query has no endpoint IRI."""


@dataclass(frozen=True, order=True)
class Var:
    name: str

    def n3(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True, order=True)
class Const:
    term: Term

    def n3(self) -> str:
        return self.term.n3()


PatternTerm = Union[Var, Const]


@dataclass(frozen=True)
class TriplePattern:
    s: PatternTerm
    p: PatternTerm
    o: PatternTerm

    def __post_init__(self):
        if isinstance(self.s, Const) and not self.s.term.is_iri:
            raise ValueError(f"Subject must be a variable or IRI: {self.s.n3()}")
        if isinstance(self.p, Const) and not self.p.term.is_iri:
            raise ValueError(f"Predicate must be a variable or IRI: {self.p.n3()}")

    def variables(self) -> List[str]:
        return [t.name for t in (self.s, self.p, self.o) if isinstance(t, Var)]

    def n3(self) -> str:
        return f"{self.s.n3()} {self.p.n3()} {self.o.n3()}"


@dataclass(frozen=True)
class Query:
    id: str
    projected: Tuple[str, ...]
    patterns: Tuple[TriplePattern, ...]

    def __post_init__(self):
        if not self.patterns:
            raise ValueError(f"Query {self.id} has no triple patterns")
        known = set(self.variables())
        missing = [v for v in self.projected if v not in known]
        if missing:
            raise ValueError(f"Query {self.id} projects unbound variables: {missing}")

    def variables(self) -> List[str]:
        """Distinct variables in order of first appearance."""
        seen: Dict[str, None] = {}
        for pattern in self.patterns:
            for name in pattern.variables():
                seen.setdefault(name, None)
        return list(seen)


@dataclass(frozen=True)
class FederatedQuery:
    """
    A query split into per-shard pattern groups. The PPN group comes first
    and is executed inline; every other group becomes a SERVICE block.
    """
    base_query_id: str
    ppn: int
    projected: Tuple[str, ...]
    groups: Tuple[Tuple[int, Tuple[TriplePattern, ...]], ...] = field(default=())

    def __post_init__(self):
        shards = [shard for shard, _ in self.groups]
        if len(set(shards)) != len(shards):
            raise ValueError(f"Duplicate shard group in federated query {self.base_query_id}")
        if not self.groups or self.groups[0][0] != self.ppn or not self.groups[0][1]:
            raise ValueError(f"Federated query {self.base_query_id} must lead with a non-empty PPN group")

    @property
    def patterns(self) -> List[TriplePattern]:
        return [p for _, group in self.groups for p in group]

    @property
    def remote_groups(self) -> Tuple[Tuple[int, Tuple[TriplePattern, ...]], ...]:
        return self.groups[1:]


# Reading queries through rdflib's SPARQL parser and algebra

# algebra operators outside the BGP subset, with the keywords that produce them
_ALGEBRA_KEYWORDS: Dict[str, Tuple[str, ...]] = {
    "LeftJoin": ("OPTIONAL",),
    "Filter": ("FILTER", "HAVING"),
    "Union": ("UNION",),
    "Minus": ("MINUS",),
    "Graph": ("GRAPH",),
    "Extend": ("BIND", "AS"),
    "ToMultiSet": ("VALUES", "SELECT"),
    "values": ("VALUES",),
    "OrderBy": ("ORDER",),
    "Slice": ("LIMIT", "OFFSET"),
    "Group": ("GROUP",),
    "AggregateJoin": ("GROUP", "HAVING"),
}
_ALGEBRA_ALLOWED = frozenset({"SelectQuery", "Project", "Distinct", "Reduced", "BGP", "Join"})

# the same constructs as they appear inside a SERVICE block of the parse tree
_PARSE_KEYWORDS: Dict[str, str] = {
    "OptionalGraphPattern": "OPTIONAL",
    "MinusGraphPattern": "MINUS",
    "GroupOrUnionGraphPattern": "UNION",
    "GraphGraphPattern": "GRAPH",
    "Filter": "FILTER",
    "Bind": "BIND",
    "InlineData": "VALUES",
    "ServiceGraphPattern": "SERVICE",
    "SubSelect": "SELECT",
}

_QUERY_FORMS = {"ConstructQuery": "CONSTRUCT", "AskQuery": "ASK", "DescribeQuery": "DESCRIBE"}

_WORD_AT = re.compile(r"\s*([A-Za-z]+)")


def _keyword_error(candidates: Sequence[str], text: str) -> UnsupportedKeywordError:
    """Name the first candidate keyword present in the text, at its position."""
    for keyword in candidates:
        match = re.search(rf"\b{keyword}\b", text, re.IGNORECASE)
        if match:
            return UnsupportedKeywordError(keyword, match.start(), text)
    return UnsupportedKeywordError(candidates[0], 0, text)


def _parse_tree(text: str) -> ParseResults:
    try:
        return parseQuery(text)
    except ParseBaseException as e:
        word = _WORD_AT.match(text, e.loc)
        if word and word.group(1).upper() in UNSUPPORTED_KEYWORDS:
            raise UnsupportedKeywordError(word.group(1).upper(), word.start(1), text) from e
        raise QuerySyntaxError(e.msg, e.loc, text) from e


def _comp_values(tree) -> Iterator[CompValue]:
    if isinstance(tree, CompValue):
        yield tree
        for value in tree.values():
            yield from _comp_values(value)
    elif isinstance(tree, (list, tuple, ParseResults)):
        for item in tree:
            yield from _comp_values(item)


def _namespaces(parsed: ParseResults, text: str,
                prefixes: Optional[Mapping[str, str]]) -> Dict[str, str]:
    """
    Built-in, caller and declared prefixes. Every prefixed name in the query
    must resolve against them.
    """
    namespaces: Dict[str, str] = dict(DEFAULT_PREFIXES)
    if prefixes:
        namespaces.update(prefixes)
    for decl in parsed[0]:
        if decl.name == "Base":
            raise _keyword_error(("BASE",), text)
        namespaces[decl.prefix or ""] = str(decl.iri)

    for node in _comp_values(parsed[1]):
        if node.name != "pname":
            continue
        prefix = node.prefix or ""
        if prefix not in namespaces:
            match = re.search(rf"(?<![\w.-]){re.escape(prefix)}:", text)
            raise UndeclaredPrefixError(prefix, match.start() if match else 0, text)
    return namespaces


def _check_algebra(node: CompValue, text: str, allow_service: bool) -> None:
    if node.name == "ServiceGraphPattern":
        if not allow_service:
            raise _keyword_error(("SERVICE",), text)
        return
    if node.name in _ALGEBRA_KEYWORDS:
        raise _keyword_error(_ALGEBRA_KEYWORDS[node.name], text)
    if node.name not in _ALGEBRA_ALLOWED:
        raise QuerySyntaxError(f"unsupported construct {node.name}", 0, text)
    for key in ("p", "p1", "p2"):
        child = getattr(node, key)
        if isinstance(child, CompValue):
            _check_algebra(child, text, allow_service)


def _pattern_term(term, text: str) -> PatternTerm:
    if isinstance(term, Variable):
        return Var(str(term))
    if isinstance(term, URIRef):
        return Const(Term.iri(str(term)))
    if isinstance(term, Literal):
        return Const(Term.literal(term.n3()))
    if isinstance(term, BNode):
        raise QuerySyntaxError("blank nodes are not supported", 0, text)
    raise QuerySyntaxError(f"unsupported property path {term}", 0, text)


def _triple_patterns(block: CompValue, text: str) -> List[TriplePattern]:
    flat = [term for chunk in block.triples for term in chunk]
    patterns = []
    for i in range(0, len(flat), 3):
        s, p, o = (_pattern_term(term, text) for term in flat[i:i + 3])
        try:
            patterns.append(TriplePattern(s, p, o))
        except ValueError as e:
            raise QuerySyntaxError(str(e), 0, text) from e
    return patterns


def _group_items(group: CompValue, text: str, allow_service: bool,
                 endpoint: Optional[Term] = None) -> List[Tuple[Optional[Term], TriplePattern]]:
    """
    Walk a resolved group pattern in source order into (endpoint, pattern)
    pairs; endpoint is None for inline patterns.
    """
    if group.name != "GroupGraphPatternSub":
        raise _keyword_error((_PARSE_KEYWORDS.get(group.name, "SELECT"),), text)
    items: List[Tuple[Optional[Term], TriplePattern]] = []
    for part in group.part or ():
        if part.name == "TriplesBlock":
            items.extend((endpoint, pattern) for pattern in _triple_patterns(part, text))
        elif part.name == "ServiceGraphPattern" and allow_service and endpoint is None:
            if not isinstance(part.term, URIRef):
                raise QuerySyntaxError("SERVICE endpoint must be an IRI", 0, text)
            items.extend(_group_items(part.graph, text, allow_service, Term.iri(str(part.term))))
        elif part.name in _PARSE_KEYWORDS:
            raise _keyword_error((_PARSE_KEYWORDS[part.name],), text)
        else:
            raise QuerySyntaxError(f"unsupported graph pattern {part.name}", 0, text)
    return items


def _read(text: str, prefixes: Optional[Mapping[str, str]], allow_service: bool):
    """
    Parse and translate one query. Returns the projected variables (None for
    SELECT *) and the (endpoint, pattern) pairs in source order.
    """
    parsed = _parse_tree(text)
    if parsed[1].name in _QUERY_FORMS:
        raise _keyword_error((_QUERY_FORMS[parsed[1].name],), text)
    namespaces = _namespaces(parsed, text, prefixes)
    for clause in parsed[1].datasetClause or ():
        # FROM graphs are routed by shard metadata instead
        if clause.named is not None:
            raise _keyword_error(("NAMED",), text)

    try:
        algebra = translateQuery(parsed, initNs=namespaces).algebra
    except Exception as e:
        raise QuerySyntaxError(str(e), 0, text) from e
    _check_algebra(algebra, text, allow_service)

    # translateQuery resolves prefixed names and simple paths in the parse
    # tree; the algebra reorders BGP triples, the parse tree keeps them in order
    select = parsed[1]
    items = _group_items(select.where, text, allow_service)
    if not items:
        raise QuerySyntaxError("empty graph pattern", len(text), text)

    projected = None
    if select.projection:
        projected = list(dict.fromkeys(str(v.var) for v in select.projection))
    return projected, items


def _build_query(query_id: str, projected: Optional[List[str]],
                 patterns: Sequence[TriplePattern], text: str) -> Query:
    if projected is None:
        seen: Dict[str, None] = {}
        for pattern in patterns:
            for name in pattern.variables():
                seen.setdefault(name, None)
        projected = list(seen)
    try:
        return Query(query_id, tuple(projected), tuple(patterns))
    except ValueError as e:
        raise QuerySyntaxError(str(e), 0, text) from e


def parse_query(text: str, query_id: str = "Q1",
                prefixes: Optional[Mapping[str, str]] = None) -> Query:
    """
    Parse `SELECT ... WHERE { bgp }` into a Query with prefixes expanded.

    Raises:
        QuerySyntaxError: malformed text (UnsupportedKeywordError and
            UndeclaredPrefixError are subclasses)
    """
    projected, items = _read(text, prefixes, allow_service=False)
    return _build_query(query_id, projected, [pattern for _, pattern in items], text)


def parse_federated(text: str, endpoints: Mapping[int, str], ppn: int,
                    query_id: str = "Q1",
                    prefixes: Optional[Mapping[str, str]] = None) -> FederatedQuery:
    """
    Read SERVICE-form text back into a FederatedQuery. Inline patterns form
    the PPN group; SERVICE blocks naming the same endpoint merge.
    """
    projected, items = _read(text, prefixes, allow_service=True)
    by_endpoint = {iri: shard for shard, iri in endpoints.items()}
    groups: Dict[int, List[TriplePattern]] = {ppn: []}
    for endpoint, pattern in items:
        if endpoint is None:
            shard = ppn
        elif endpoint.lexical in by_endpoint:
            shard = by_endpoint[endpoint.lexical]
        else:
            raise MissingEndpointError(f"No shard is mapped to endpoint <{endpoint.lexical}>")
        groups.setdefault(shard, []).append(pattern)
    base = _build_query(query_id, projected, [pattern for _, pattern in items], text)
    return FederatedQuery(
        base_query_id=query_id,
        ppn=ppn,
        projected=base.projected,
        groups=tuple((shard, tuple(patterns)) for shard, patterns in groups.items() if patterns),
    )


def _select_line(projected: Sequence[str]) -> str:
    return "SELECT " + " ".join(f"?{name}" for name in projected) + " WHERE {\n"


def serialize_query(query: Query) -> str:
    lines = [_select_line(query.projected)]
    lines.extend(f"  {pattern.n3()} .\n" for pattern in query.patterns)
    lines.append("}\n")
    return "".join(lines)


def serialize_federated(fq: FederatedQuery, endpoints: Mapping[int, str]) -> str:
    """
    Render a federated query as SPARQL 1.1: PPN patterns inline, each remote
    group inside `SERVICE <endpoint> { ... }`.

    Raises:
        MissingEndpointError: a remote group's shard has no endpoint
    """
    lines = [_select_line(fq.projected)]
    for shard, patterns in fq.groups:
        if shard == fq.ppn:
            lines.extend(f"  {pattern.n3()} .\n" for pattern in patterns)
            continue
        if shard not in endpoints:
            raise MissingEndpointError(f"No endpoint configured for shard {shard}")
        lines.append(f"  SERVICE <{endpoints[shard]}> {{\n")
        lines.extend(f"    {pattern.n3()} .\n" for pattern in patterns)
        lines.append("  }\n")
    lines.append("}\n")
    return "".join(lines)


_ID_LINE = re.compile(r"^\s*#\s*id:\s*(\S+)\s*$")


def parse_workload(text: str, prefixes: Optional[Mapping[str, str]] = None) -> List[Query]:
    """
    Parse a workload file: queries separated by `---` lines, each optionally
    preceded by `# id: <name>` (default ids Q1, Q2, ... in file order).
    """
    blocks: List[List[str]] = [[]]
    for line in text.splitlines():
        if line.strip() == "---":
            blocks.append([])
        else:
            blocks[-1].append(line)

    named: List[Tuple[str, Optional[str]]] = []
    for block in blocks:
        if not any(line.strip() and not line.strip().startswith("#") for line in block):
            continue
        matches = (_ID_LINE.match(line) for line in block)
        explicit = next((m.group(1) for m in matches if m), None)
        body = "\n".join("" if line.lstrip().startswith("#") else line for line in block)
        named.append((body, explicit))

    # default ids follow file position but never reuse an explicit id
    taken = {explicit for _, explicit in named if explicit is not None}
    queries: List[Query] = []
    for position, (body, explicit) in enumerate(named, 1):
        query_id = explicit
        if query_id is None:
            n = position
            while f"Q{n}" in taken:
                n += 1
            query_id = f"Q{n}"
            taken.add(query_id)
        queries.append(parse_query(body, query_id, prefixes))

    ids = [q.id for q in queries]
    duplicates = sorted({i for i in ids if ids.count(i) > 1})
    if duplicates:
        raise QuerySyntaxError(f"duplicate query ids in workload: {duplicates}",
                               max(text.rfind(duplicates[0]), 0), text)
    logger.debug(f"Parsed workload with {len(queries)} queries")
    return queries


def serialize_workload(queries: Sequence[Query]) -> str:
    return "---\n".join(f"# id: {q.id}\n{serialize_query(q)}" for q in queries)
