"""Key domains, relation schemas and sparse S-relations with a bottom default."""
from __future__ import annotations

import csv
import enum
import io
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, TextIO

from .pops import Pops, PopsError, get_pops

log = logging.getLogger(__name__)


class StoreError(Exception):
    pass


class DomainKeyError(StoreError, KeyError):
    """A key constant lies outside its declared domain."""

    def __str__(self):
        return self.args[0] if self.args else "key error"


class TableParseError(StoreError, ValueError):
    def __init__(self, msg: str, row: int | None = None, col: int | None = None, path: str | None = None):
        self.row, self.col, self.path = row, col, path
        where = ""
        if path:
            where += f"{path}:"
        if row is not None:
            where += f"{row}:"
        if col is not None:
            where += f"{col}:"
        super().__init__(f"{where} {msg}" if where else msg)


class Mode(enum.Enum):
    REPLACE = "replace"
    PLUS = "plus"


class DomainTable:
    """A finite, ordered set of interned constants.

    Integer-range domains (``0..n``) hold ints and support key arithmetic.
    """

    def __init__(self, name: str, elements: Iterable = (), int_range: tuple[int, int] | None = None):
        self.name = name
        self.int_range = int_range
        if int_range is not None:
            lo, hi = int_range
            elements = range(lo, hi + 1)
        self.elements: list = []
        self._index: dict = {}
        for e in elements:
            self.add(e)

    @property
    def is_int_range(self) -> bool:
        return self.int_range is not None

    def add(self, e) -> int:
        if e in self._index:
            return self._index[e]
        if self.int_range is not None and not (isinstance(e, int) and self.int_range[0] <= e <= self.int_range[1]):
            raise DomainKeyError(f"{e!r} is outside the integer range of domain {self.name}")
        self._index[e] = len(self.elements)
        self.elements.append(e)
        return self._index[e]

    def __contains__(self, e) -> bool:
        return e in self._index

    def __iter__(self) -> Iterator:
        return iter(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def index(self, e) -> int:
        return self._index[e]

    def clamp(self, v: int) -> int:
        lo, hi = self.int_range
        return min(max(v, lo), hi)

    def __repr__(self):
        if self.int_range:
            return f"DomainTable({self.name}, {self.int_range[0]}..{self.int_range[1]})"
        return f"DomainTable({self.name}, {self.elements!r})"


@dataclass(frozen=True)
class Schema:
    name: str
    domains: tuple[str, ...]
    pops_name: str
    kind: str = "edb"  # "edb" | "idb"

    @property
    def arity(self) -> int:
        return len(self.domains)

    @property
    def pops(self) -> Pops:
        return get_pops(self.pops_name)


def format_key(k) -> str:
    if isinstance(k, int):
        return str(k)
    s = str(k)
    if s and (s[0].isalpha() or s[0] == "_") and all(c.isalnum() or c == "_" for c in s):
        return s
    return '"' + s.replace('"', '\\"') + '"'


class Relation:
    """A sparse map from key tuples to values; absent keys read as bottom."""

    def __init__(self, schema: Schema, domains: dict[str, DomainTable] | None = None):
        self.schema = schema
        self.pops = schema.pops
        self.domains = domains
        self.entries: dict[tuple, Any] = {}
        self.frozen = False

    def _check_key(self, key: tuple):
        if len(key) != self.schema.arity:
            raise StoreError(f"{self.schema.name}: key {key!r} has arity {len(key)}, expected {self.schema.arity}")
        if self.domains is not None:
            for k, dname in zip(key, self.schema.domains):
                dom = self.domains.get(dname)
                if dom is not None and k not in dom:
                    raise DomainKeyError(f"{self.schema.name}: constant {k!r} is not in domain {dname}")

    def get(self, key: tuple):
        key = tuple(key)
        self._check_key(key)
        return self.entries.get(key, self.pops.bot)

    def put_combine(self, key: tuple, v, mode: Mode = Mode.PLUS):
        if self.frozen:
            raise StoreError(f"relation {self.schema.name} is frozen")
        key = tuple(key)
        self._check_key(key)
        self.pops.check(v)
        if mode is Mode.PLUS and key in self.entries:
            v = self.pops.add(self.entries[key], v)
        if v == self.pops.bot:
            self.entries.pop(key, None)
        else:
            self.entries[key] = v

    def freeze(self) -> "Relation":
        self.frozen = True
        return self

    def items(self):
        return self.entries.items()

    def __len__(self):
        return len(self.entries)

    def sorted_items(self) -> list[tuple[tuple, Any]]:
        return sorted(self.entries.items(), key=lambda kv: _key_order(kv[0]))

    def __repr__(self):
        body = ", ".join(f"{k}->{self.pops.format(v)}" for k, v in self.sorted_items())
        return f"Relation({self.schema.name}: {{{body}}})"


def _key_order(key: tuple):
    return tuple((0, k, "") if isinstance(k, int) else (1, 0, str(k)) for k in key)


def get(rel: Relation, key: tuple):
    return rel.get(key)


def put_combine(rel: Relation, key: tuple, v, mode: Mode = Mode.PLUS):
    rel.put_combine(key, v, mode)


def rel_equal(a: Relation, b: Relation) -> bool:
    if a.schema != b.schema:
        raise StoreError(f"cannot compare {a.schema.name} with {b.schema.name}: schemas differ")
    return a.entries == b.entries


def _parse_key(text: str, dom: DomainTable | None):
    t = text.strip()
    if len(t) >= 2 and t[0] == t[-1] and t[0] in "\"'":
        return t[1:-1]
    if dom is not None and dom.is_int_range or (t.lstrip("-").isdigit() and dom is None):
        try:
            return int(t)
        except ValueError:
            pass
    if t.lstrip("-").isdigit():
        return int(t)
    return t


def load_table(
    source,
    schema: Schema,
    domains: dict[str, DomainTable] | None = None,
    parse_value=None,
    closed: bool = True,
    mode: Mode = Mode.PLUS,
    open_domains: set | None = None,
) -> Relation:
    """Read a CSV/TSV table of ``k`` key columns followed by one value column.

    ``source`` is a path or a text stream.  A header row is recognised when
    its last field is ``value``.  With ``closed`` false, unseen constants
    are added to their (non-range) domain instead of raising;
    ``open_domains`` limits that to the named domains.
    """
    pops = schema.pops
    parse_value = parse_value or pops.parse
    path = None
    if isinstance(source, (str, os.PathLike)):
        path = str(source)
        with open(path, encoding="utf-8", newline="") as fh:
            text = fh.read()
    else:
        text = source.read()
    delim = "\t" if (path and path.endswith(".tsv")) or ("\t" in text and "," not in text) else ","
    rel = Relation(schema, domains)
    reader = csv.reader(io.StringIO(text), delimiter=delim, skipinitialspace=True)
    k = schema.arity
    for rowno, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row) or row[0].lstrip().startswith("#"):
            continue
        if rowno == 1 and row[-1].strip().lower() == "value":
            continue
        if len(row) != k + 1:
            raise TableParseError(
                f"{schema.name} expects {k} key columns and a value, got {len(row)} fields", rowno, None, path
            )
        key = []
        for col, (cell, dname) in enumerate(zip(row[:k], schema.domains), start=1):
            dom = domains.get(dname) if domains else None
            try:
                c = _parse_key(cell, dom)
            except ValueError as e:
                raise TableParseError(str(e), rowno, col, path) from None
            if dom is not None and c not in dom:
                if closed or dom.is_int_range or (open_domains is not None and dname not in open_domains):
                    raise DomainKeyError(
                        f"{path or schema.name}:{rowno}:{col}: constant {c!r} is not in domain {dname}"
                    )
                dom.add(c)
            key.append(c)
        try:
            v = parse_value(row[k])
        except (PopsError, ValueError) as e:
            raise TableParseError(str(e), rowno, k + 1, path) from None
        rel.put_combine(tuple(key), v, mode)
    return rel


def emit_table(rel: Relation, header: bool = True) -> list[list[str]]:
    """Rows of the relation sorted by key, values in the text syntax."""
    rows = []
    if header:
        rows.append([f"k{i + 1}" for i in range(rel.schema.arity)] + ["value"])
    for key, v in rel.sorted_items():
        rows.append([str(k) for k in key] + [rel.pops.format(v)])
    return rows


def write_table(rel: Relation, out: TextIO | str, header: bool = True):
    rows = emit_table(rel, header)
    if isinstance(out, str):
        with open(out, "w", encoding="utf-8", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)
    else:
        csv.writer(out, lineterminator="\n").writerows(rows)


def infer_domain(name: str, constants: Iterable) -> DomainTable:
    d = DomainTable(name)
    for c in constants:
        d.add(c)
    log.info("inferred domain %s with %d constants", name, len(d))
    return d


@dataclass
class Database:
    """Domains plus the loaded relations, keyed by relation name."""

    domains: dict[str, DomainTable] = field(default_factory=dict)
    relations: dict[str, Relation] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Relation:
        return self.relations[name]

    def __contains__(self, name: str) -> bool:
        return name in self.relations
