"""Typed triple store with conjunctive pattern matching and N-Triples I/O.

Nodes are interned to dense integer ids; triples are kept with set
semantics in insertion order so that iteration is deterministic across
runs.  Objects are either node ids or typed literals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Union

LITERAL_KINDS = ("string", "integer", "decimal", "boolean")

RDF_TYPE = "rdf:type"


class KgError(Exception):
    """Base error for graph operations."""


class UnknownNodeError(KgError):
    pass


class ParseError(KgError):
    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


def render_decimal(value: float) -> str:
    """Canonical decimal form: 12 significant digits, explicit point."""
    if value != value or value in (float("inf"), float("-inf")):
        raise ValueError(f"non-finite decimal: {value!r}")
    if value == 0.0:
        return "0.0"
    s = format(value, ".12g")
    if "e" in s:
        mantissa, exponent = s.split("e")
        if "." not in mantissa:
            mantissa += ".0"
        return mantissa + "e" + exponent
    if "." not in s:
        s += ".0"
    return s


def canonical_lexical(lexical: str, kind: str) -> str:
    """Normalize a lexical form for its kind; raises ValueError if unparsable."""
    if kind == "string":
        return lexical
    if kind == "integer":
        return str(int(lexical))
    if kind == "decimal":
        return render_decimal(float(lexical))
    if kind == "boolean":
        low = lexical.strip().lower()
        if low in ("true", "1"):
            return "true"
        if low in ("false", "0"):
            return "false"
        raise ValueError(f"not a boolean lexical: {lexical!r}")
    raise ValueError(f"unknown literal kind: {kind!r}")


@dataclass(frozen=True)
class Literal:
    lexical: str
    kind: str = "string"

    def __post_init__(self):
        if self.kind not in LITERAL_KINDS:
            raise ValueError(f"unknown literal kind: {self.kind!r}")


def make_literal(lexical: str, kind: str) -> Literal:
    return Literal(canonical_lexical(lexical, kind), kind)


Object = Union[int, Literal]
Triple = tuple  # (subject id, relation id, Object)

# A pattern term is a node id, a Literal, or a "?var" string.
VAR_PREFIX = "?"


def is_var(term) -> bool:
    return isinstance(term, str) and term.startswith(VAR_PREFIX)


class KnowledgeGraph:
    """Triple set with dense node/relation registries and three indexes."""

    def __init__(self, namespace: str = ""):
        self.namespace = namespace
        self._iris: list[str] = []
        self._iri_ids: dict[str, int] = {}
        self._rel_names: list[str] = []
        self._rel_ids: dict[str, int] = {}
        self._triples: dict[Triple, None] = {}
        # insertion-ordered indexes (dict-of-dict used as ordered sets)
        self._by_subject: dict[int, dict[Triple, None]] = {}
        self._by_object: dict[Object, dict[Triple, None]] = {}
        self._by_rel_literal: dict[tuple[int, Literal], dict[Triple, None]] = {}
        self._frozen = False
        self.meta: dict = {}

    # -- registries ---------------------------------------------------------

    def add_node(self, iri: str) -> int:
        existing = self._iri_ids.get(iri)
        if existing is not None:
            return existing
        self._check_mutable()
        node_id = len(self._iris)
        self._iris.append(iri)
        self._iri_ids[iri] = node_id
        return node_id

    def node_id(self, iri: str) -> int:
        try:
            return self._iri_ids[iri]
        except KeyError:
            raise UnknownNodeError(f"unknown node iri: {iri!r}") from None

    def node_iri(self, node_id: int) -> str:
        if not 0 <= node_id < len(self._iris):
            raise UnknownNodeError(f"unknown node id: {node_id}")
        return self._iris[node_id]

    def has_node(self, iri: str) -> bool:
        return iri in self._iri_ids

    @property
    def num_nodes(self) -> int:
        return len(self._iris)

    def iris(self) -> list[str]:
        return list(self._iris)

    def add_relation(self, name: str) -> int:
        existing = self._rel_ids.get(name)
        if existing is not None:
            return existing
        self._check_mutable()
        rel_id = len(self._rel_names)
        self._rel_names.append(name)
        self._rel_ids[name] = rel_id
        return rel_id

    def relation_id(self, name: str) -> int:
        try:
            return self._rel_ids[name]
        except KeyError:
            raise KgError(f"unknown relation: {name!r}") from None

    def relation_name(self, rel_id: int) -> str:
        return self._rel_names[rel_id]

    def has_relation(self, name: str) -> bool:
        return name in self._rel_ids

    def relation_names(self) -> list[str]:
        return list(self._rel_names)

    @property
    def num_relations(self) -> int:
        return len(self._rel_names)

    # -- triples ------------------------------------------------------------

    def _check_mutable(self):
        if self._frozen:
            raise KgError("graph is frozen")

    def _check_node(self, node_id) -> None:
        if not isinstance(node_id, int) or not 0 <= node_id < len(self._iris):
            raise UnknownNodeError(f"unknown node: {node_id!r}")

    def add_triple(self, s: int, r: int, o: Object) -> bool:
        """Insert (s, r, o); returns True when newly added."""
        self._check_node(s)
        if not isinstance(o, Literal):
            self._check_node(o)
        if not 0 <= r < len(self._rel_names):
            raise KgError(f"unknown relation id: {r}")
        triple = (s, r, o)
        if triple in self._triples:
            return False
        self._check_mutable()
        self._triples[triple] = None
        self._by_subject.setdefault(s, {})[triple] = None
        self._by_object.setdefault(o, {})[triple] = None
        if isinstance(o, Literal):
            self._by_rel_literal.setdefault((r, o), {})[triple] = None
        return True

    def has_triple(self, s: int, r: int, o: Object) -> bool:
        return (s, r, o) in self._triples

    def triples(self) -> Iterator[Triple]:
        return iter(self._triples)

    def __len__(self) -> int:
        return len(self._triples)

    def freeze(self) -> "KnowledgeGraph":
        self._frozen = True
        return self

    def lookup(self, s: Optional[int] = None, r: Optional[int] = None,
               o: Optional[Object] = None) -> Iterator[Triple]:
        """Iterate triples matching the bound positions (None = wildcard)."""
        if isinstance(o, Literal) and r is not None:
            candidates = self._by_rel_literal.get((r, o), {})
        elif s is not None:
            candidates = self._by_subject.get(s, {})
        elif o is not None:
            candidates = self._by_object.get(o, {})
        else:
            candidates = self._triples
        for triple in candidates:
            if s is not None and triple[0] != s:
                continue
            if r is not None and triple[1] != r:
                continue
            if o is not None and triple[2] != o:
                continue
            yield triple

    def subjects_of(self, r: int, o: Object) -> list[int]:
        return [t[0] for t in self.lookup(r=r, o=o)]

    def objects_of(self, s: int, r: int) -> list[Object]:
        return [t[2] for t in self.lookup(s=s, r=r)]


def match_pattern(g: KnowledgeGraph, patterns) -> list[dict]:
    """Solve a conjunction of triple patterns sharing "?var" variables.

    Returns every variable binding under which all patterns are triples of
    ``g``.  Evaluated as a left-deep index-backed join in the given order;
    the result set is order-independent.
    """
    bindings: list[dict] = [{}]
    for pattern in patterns:
        if len(pattern) != 3:
            raise KgError(f"pattern must have 3 terms: {pattern!r}")
        new_bindings: list[dict] = []
        for binding in bindings:
            s, r, o = (binding.get(t, t) if is_var(t) else t for t in pattern)
            s_bound = None if is_var(s) else s
            r_bound = None if is_var(r) else r
            o_bound = None if is_var(o) else o
            if isinstance(s_bound, Literal) or isinstance(r_bound, Literal):
                continue  # a variable bound to a literal cannot be a subject/relation
            if s_bound is not None:
                g._check_node(s_bound)
            if o_bound is not None and not isinstance(o_bound, Literal):
                g._check_node(o_bound)
            for (ts, tr, to) in g.lookup(s_bound, r_bound, o_bound):
                extended = dict(binding)
                ok = True
                for term, value in ((s, ts), (r, tr), (o, to)):
                    if is_var(term):
                        if term in extended and extended[term] != value:
                            ok = False
                            break
                        extended[term] = value
                if ok:
                    new_bindings.append(extended)
        bindings = new_bindings
        if not bindings:
            return []
    return bindings


# -- N-Triples serialization -------------------------------------------------

_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}
_UNESCAPES = {"\\": "\\", '"': '"', "n": "\n", "r": "\r", "t": "\t"}


def _escape(text: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in text)


def _format_object(g: KnowledgeGraph, o: Object) -> str:
    if isinstance(o, Literal):
        body = f'"{_escape(o.lexical)}"'
        if o.kind != "string":
            body += f"^^<xsd:{o.kind}>"
        return body
    return f"<{g.node_iri(o)}>"


def serialize_ntriples(g: KnowledgeGraph) -> str:
    """One sorted line per triple: ``<subj> <rel> <obj> .``"""
    lines = [
        f"<{g.node_iri(s)}> <{g.relation_name(r)}> {_format_object(g, o)} ."
        for (s, r, o) in g.triples()
    ]
    lines.sort()
    return "\n".join(lines) + ("\n" if lines else "")


class _LineParser:
    def __init__(self, line: str, number: int):
        self.line = line
        self.pos = 0
        self.number = number

    def fail(self, message: str):
        raise ParseError(message, self.number)

    def skip_spaces(self):
        while self.pos < len(self.line) and self.line[self.pos] == " ":
            self.pos += 1

    def expect(self, ch: str):
        if self.pos >= len(self.line) or self.line[self.pos] != ch:
            self.fail(f"expected {ch!r} at column {self.pos + 1}")
        self.pos += 1

    def read_iri(self) -> str:
        self.expect("<")
        end = self.line.find(">", self.pos)
        if end < 0:
            self.fail("unterminated IRI")
        iri = self.line[self.pos:end]
        self.pos = end + 1
        return iri

    def read_literal(self) -> Literal:
        self.expect('"')
        chars = []
        while True:
            if self.pos >= len(self.line):
                self.fail("unterminated literal")
            ch = self.line[self.pos]
            self.pos += 1
            if ch == "\\":
                if self.pos >= len(self.line):
                    self.fail("dangling escape")
                esc = self.line[self.pos]
                self.pos += 1
                if esc not in _UNESCAPES:
                    self.fail(f"bad escape: \\{esc}")
                chars.append(_UNESCAPES[esc])
            elif ch == '"':
                break
            else:
                chars.append(ch)
        kind = "string"
        if self.line.startswith("^^<xsd:", self.pos):
            self.pos += len("^^<xsd:")
            end = self.line.find(">", self.pos)
            if end < 0:
                self.fail("unterminated datatype")
            kind = self.line[self.pos:end]
            if kind not in LITERAL_KINDS:
                self.fail(f"unknown literal kind: {kind!r}")
            self.pos = end + 1
        return Literal("".join(chars), kind)


def parse_ntriples(text: str, namespace: str = "",
                   relations: tuple[str, ...] = ()) -> KnowledgeGraph:
    """Parse the line format produced by :func:`serialize_ntriples`.

    ``relations`` pre-registers relation names in a fixed order so that
    graphs parsed from different files share one relation registry.
    """
    g = KnowledgeGraph(namespace=namespace)
    for name in relations:
        g.add_relation(name)
    for number, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            continue
        p = _LineParser(line, number)
        subj = p.read_iri()
        p.skip_spaces()
        rel = p.read_iri()
        p.skip_spaces()
        if p.pos < len(line) and line[p.pos] == "<":
            obj: Object = g.add_node(p.read_iri())
        elif p.pos < len(line) and line[p.pos] == '"':
            obj = p.read_literal()
        else:
            p.fail("expected object term")
        p.skip_spaces()
        p.expect(".")
        p.skip_spaces()
        if p.pos != len(line):
            p.fail("trailing content after '.'")
        s = g.add_node(subj)
        r = g.add_relation(rel)
        g.add_triple(s, r, obj)
    return g
