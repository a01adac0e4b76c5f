"""Boolean keyword queries defining propaganda items.

Grammar (keywords are case-insensitive, OR binds looser than AND)::

    expr     := and_expr ('OR' and_expr)*
    and_expr := primary ('AND' primary)*
    primary  := '(' expr ')' | "'" chars "'"

A quote inside a term is written twice (``'l''italia'``). Terms match as
case-folded substrings of the case-folded tweet text.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from pathlib import Path

from . import ConfigError, DataError
from .ingest import Corpus, normalize_text


class QuerySyntaxError(ConfigError):
    """Raised with a 1-based UTF-8 byte offset into the query source."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


@dataclass(frozen=True)
class Term:
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("empty term")


@dataclass(frozen=True)
class And:
    children: tuple

    def __post_init__(self):
        if len(self.children) < 2:
            raise ValueError("And needs at least two children")


@dataclass(frozen=True)
class Or:
    children: tuple

    def __post_init__(self):
        if len(self.children) < 2:
            raise ValueError("Or needs at least two children")


QueryAst = Term | And | Or


# -- lexer -----------------------------------------------------------------

def _tokenize(source: str):
    """Yield (kind, value, offset) with kind in LPAREN, RPAREN, TERM, AND, OR, END."""
    offsets = [0]
    for ch in source:
        offsets.append(offsets[-1] + len(ch.encode("utf-8")))

    def at(i):
        return offsets[i] + 1

    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
        elif ch == "(":
            yield "LPAREN", ch, at(i)
            i += 1
        elif ch == ")":
            yield "RPAREN", ch, at(i)
            i += 1
        elif ch == "'":
            start = i
            buf = []
            i += 1
            while True:
                if i >= n:
                    raise QuerySyntaxError("unterminated quote", at(start))
                if source[i] == "'":
                    if i + 1 < n and source[i + 1] == "'":
                        buf.append("'")
                        i += 2
                        continue
                    i += 1
                    break
                buf.append(source[i])
                i += 1
            value = "".join(buf)
            if not value.strip():
                raise QuerySyntaxError("empty term", at(start))
            yield "TERM", value, at(start)
        elif ch.isalpha():
            start = i
            while i < n and source[i].isalpha():
                i += 1
            word = source[start:i]
            if word.upper() not in ("AND", "OR"):
                raise QuerySyntaxError(f"unexpected word {word!r}", at(start))
            yield word.upper(), word, at(start)
        else:
            raise QuerySyntaxError(f"unexpected character {ch!r}", at(i))
    yield "END", "", at(n)


class _Parser:
    def __init__(self, source: str):
        self.tokens = list(_tokenize(source))
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expr(self):
        children = [self.and_expr()]
        while self.peek()[0] == "OR":
            self.take()
            children.append(self.and_expr())
        return children[0] if len(children) == 1 else Or(tuple(children))

    def and_expr(self):
        children = [self.primary()]
        while self.peek()[0] == "AND":
            self.take()
            children.append(self.primary())
        return children[0] if len(children) == 1 else And(tuple(children))

    def primary(self):
        kind, value, offset = self.take()
        if kind == "TERM":
            return Term(value)
        if kind == "LPAREN":
            node = self.expr()
            kind2, _, offset2 = self.take()
            if kind2 != "RPAREN":
                raise QuerySyntaxError("unbalanced parenthesis, expected ')'", offset2)
            return node
        if kind == "END":
            raise QuerySyntaxError("unexpected end of query", offset)
        if kind == "RPAREN":
            raise QuerySyntaxError("unbalanced parenthesis", offset)
        raise QuerySyntaxError(f"expected a term or '(' but found {value!r}", offset)


def parse_query(source: str) -> QueryAst:
    """Parse a query string into an AST, raising :class:`QuerySyntaxError`."""
    parser = _Parser(source)
    node = parser.expr()
    kind, value, offset = parser.peek()
    if kind != "END":
        if kind == "RPAREN":
            raise QuerySyntaxError("unbalanced parenthesis", offset)
        raise QuerySyntaxError(f"trailing input {value!r}", offset)
    return node


def format_query(node: QueryAst) -> str:
    """Render an AST back to query syntax; ``parse_query`` inverts this exactly."""
    if isinstance(node, Term):
        return "'" + node.text.replace("'", "''") + "'"
    op = " AND " if isinstance(node, And) else " OR "
    parts = []
    for child in node.children:
        s = format_query(child)
        parts.append(s if isinstance(child, Term) else f"({s})")
    return op.join(parts)


def _eval_folded(node: QueryAst, folded: str) -> bool:
    if isinstance(node, Term):
        return normalize_text(node.text) in folded
    if isinstance(node, And):
        return all(_eval_folded(c, folded) for c in node.children)
    return any(_eval_folded(c, folded) for c in node.children)


def eval_query(node: QueryAst, text: str) -> bool:
    return _eval_folded(node, normalize_text(text))


def query_terms(node: QueryAst) -> list[str]:
    if isinstance(node, Term):
        return [node.text]
    return [t for c in node.children for t in query_terms(c)]


# -- propaganda items ----------------------------------------------------------

@dataclass(frozen=True)
class PropagandaItem:
    id: str
    query: QueryAst
    description: str = ""

    @classmethod
    def from_source(cls, id: str, source: str, description: str = "") -> PropagandaItem:
        return cls(id, parse_query(source), description)

    def matches(self, text: str) -> bool:
        return eval_query(self.query, text)


def items_from_entries(entries: Iterable[Mapping]) -> list[PropagandaItem]:
    items, seen = [], set()
    for entry in entries:
        try:
            item_id, source = str(entry["id"]), entry["query"]
        except (KeyError, TypeError):
            raise ConfigError(f"query entry {entry!r} needs 'id' and 'query'") from None
        if item_id in seen:
            raise ConfigError(f"duplicate item id {item_id!r}")
        seen.add(item_id)
        try:
            items.append(PropagandaItem.from_source(item_id, source, entry.get("description", "")))
        except QuerySyntaxError as exc:
            raise ConfigError(f"item {item_id}: {exc}") from None
    return items


def load_items(path) -> list[PropagandaItem]:
    """Read items from a JSON list / ``{"items": [...]}`` or a TOML ``[[items]]`` file."""
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        data = tomllib.loads(raw.decode("utf-8"))
    else:
        data = json.loads(raw)
    if isinstance(data, dict):
        data = data.get("items", [])
    return items_from_entries(data)


def filter_corpus(corpus: Corpus, item: PropagandaItem) -> Corpus:
    return corpus.subset(r for r in corpus.records if item.matches(r.text))


@dataclass(frozen=True)
class Decomposition:
    exactly: dict  # k -> number of users in exactly k items
    other: int
    total: int

    def percentages(self) -> dict:
        if not self.total:
            return {**{k: 0.0 for k in self.exactly}, "other": 0.0}
        pct = {k: 100.0 * v / self.total for k, v in self.exactly.items()}
        pct["other"] = 100.0 * self.other / self.total
        return pct

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "exactly": {str(k): v for k, v in self.exactly.items()},
            "other": self.other,
            "percent": {str(k): round(v, 4) for k, v in self.percentages().items()},
        }


class ConsistencyError(DataError):
    pass


def membership_decomposition(universe: Iterable, item_users: Mapping[str, set]) -> Decomposition:
    """Count universe members by how many of the given items they take part in.

    Members in none of the items are reported as ``other``.
    """
    universe = set(universe)
    counts: dict = {}
    for item_id, users in item_users.items():
        stray = set(users) - universe
        if stray:
            raise ConsistencyError(f"item {item_id} has {len(stray)} users outside the universe")
        for u in users:
            counts[u] = counts.get(u, 0) + 1
    exactly = {k: 0 for k in range(1, len(item_users) + 1)}
    for c in counts.values():
        exactly[c] += 1
    return Decomposition(exactly, len(universe) - len(counts), len(universe))
