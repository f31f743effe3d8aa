"""Surface syntax: a hand-written tokenizer and recursive-descent parser.

``parse`` turns program text into a :class:`~datalogo.ast.Program`;
``pretty`` prints a program back so that ``parse(pretty(p)) == p``.

Inside rule bodies an identifier is a variable when it is in scope (a head
variable or a variable bound by an enclosing ``sum``) and a constant
otherwise.  Quoted strings and integers in key positions are always
constants.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .ast import (
    Arith,
    Binder,
    Body,
    Branch,
    Cases,
    CastAtom,
    CondAnd,
    CondCmp,
    CondNot,
    CondOr,
    CondRel,
    Const,
    DomainDecl,
    EqAtom,
    FnApp,
    KeyFn,
    KeyValue,
    Literal,
    PopsDecl,
    Prod,
    Program,
    RelAtom,
    RelDecl,
    Rule,
    SourceSpan,
    SumExpr,
    Var,
)


class ParseError(Exception):
    def __init__(self, message: str, span: SourceSpan, expected: tuple = ()):
        self.message = message
        self.span = span
        self.expected = tuple(expected)
        super().__init__(f"{span.line}:{span.col}: {message}")


@dataclass(frozen=True)
class Token:
    kind: str  # ID INT DEC STR SYM EOF
    text: str
    pos: int
    end: int


_SYMS = [":-", "..", "!=", "<=", ">=", "(", ")", "{", "}", "[", "]", ",", ".", ":", ";", "|", "+", "-", "*", "=", "<", ">", "/"]
_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n\f\v]+|//[^\n]*|/\*.*?\*/)
  | (?P<ID>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<DEC>\d+\.\d+)
  | (?P<INT>\d+)
  | (?P<STR>"(?:[^"\\\n]|\\.)*"|'(?:[^'\\\n]|\\.)*')
  | (?P<SYM>:-|\.\.|!=|<=|>=|[(){}\[\],.:;|+\-*=<>/])
    """,
    re.VERBOSE | re.DOTALL,
)

KEYWORDS = {"domain", "edb", "idb", "pops", "sum", "case", "else", "in", "and", "or", "not"}
VALUE_WORDS = {"true", "false", "inf", "bot", "F", "T", "U"}


class _Locator:
    def __init__(self, text: str):
        self.text = text
        self.line_starts = [0]
        for i, ch in enumerate(text):
            if ch == "\n":
                self.line_starts.append(i + 1)
        self._ascii = text.isascii()

    def byte(self, i: int) -> int:
        return i if self._ascii else len(self.text[:i].encode("utf-8", "surrogatepass"))

    def linecol(self, i: int) -> tuple[int, int]:
        lo, hi = 0, len(self.line_starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.line_starts[mid] <= i:
                lo = mid
            else:
                hi = mid - 1
        return lo + 1, i - self.line_starts[lo] + 1

    def span(self, a: int, b: int) -> SourceSpan:
        l1, c1 = self.linecol(a)
        l2, c2 = self.linecol(b)
        return SourceSpan(self.byte(a), self.byte(b), l1, c1, l2, c2)


def tokenize(text: str, loc: _Locator | None = None) -> list[Token]:
    loc = loc or _Locator(text)
    toks = []
    i, n = 0, len(text)
    while i < n:
        m = _TOKEN_RE.match(text, i)
        if m is None:
            if text.startswith("/*", i):
                raise ParseError("unterminated block comment", loc.span(i, n))
            raise ParseError(f"unexpected character {text[i]!r}", loc.span(i, i + 1))
        kind = m.lastgroup
        if kind != "ws":
            toks.append(Token(kind, m.group(), i, m.end()))
        i = m.end()
    toks.append(Token("EOF", "", n, n))
    return toks


class Parser:
    def __init__(self, text: str):
        self.text = text
        self.loc = _Locator(text)
        self.toks = tokenize(text, self.loc)
        self.i = 0

    # -- token helpers ----------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str, k: int = 0) -> bool:
        t = self.peek(k) if k else self.tok
        return t.kind in ("SYM", "ID") and t.text == text

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "EOF":
            self.i += 1
        return t

    def fail(self, expected) -> ParseError:
        t = self.tok
        found = "end of input" if t.kind == "EOF" else repr(t.text)
        exp = sorted(set(expected))
        return ParseError(
            f"expected {' or '.join(exp)}, found {found}", self.loc.span(t.pos, max(t.end, t.pos + (t.kind != 'EOF'))), exp
        )

    def expect(self, text: str) -> Token:
        if self.at(text):
            return self.advance()
        raise self.fail([repr(text)])

    def expect_kind(self, kind: str, what: str) -> Token:
        if self.tok.kind == kind:
            return self.advance()
        raise self.fail([what])

    def span_from(self, start: int) -> SourceSpan:
        prev = self.toks[self.i - 1] if self.i > 0 else self.tok
        return self.loc.span(start, max(start, prev.end))

    # -- program ----------------------------------------------------------
    def program(self) -> Program:
        items = []
        start = self.tok.pos
        while self.tok.kind != "EOF":
            t = self.tok
            if t.kind == "ID" and t.text in ("domain", "edb", "idb", "pops") and self.peek().kind == "ID":
                items.append(self.decl())
            elif t.kind == "ID":
                items.append(self.rule())
            else:
                raise self.fail(["declaration", "rule"])
        return Program(tuple(items), self.span_from(start))

    def decl(self):
        start = self.tok.pos
        kw = self.advance().text
        name = self.expect_kind("ID", "identifier").text
        if kw == "domain":
            self.expect("=")
            if self.at("{"):
                self.advance()
                elems = [self.key_const()]
                while self.at(","):
                    self.advance()
                    elems.append(self.key_const())
                self.expect("}")
                self.expect(".")
                return DomainDecl(name, tuple(elems), None, None, self.span_from(start))
            lo = self.signed_int()
            self.expect("..")
            hi = self.signed_int()
            self.expect(".")
            return DomainDecl(name, None, lo, hi, self.span_from(start))
        if kw == "pops":
            self.expect("=")
            p = self.pops_name()
            self.expect(".")
            return PopsDecl(name, p, self.span_from(start))
        self.expect("(")
        doms = []
        if not self.at(")"):
            doms.append(self.expect_kind("ID", "domain name").text)
            while self.at(","):
                self.advance()
                doms.append(self.expect_kind("ID", "domain name").text)
        self.expect(")")
        self.expect(":")
        p = self.pops_name()
        self.expect(".")
        return RelDecl(kw, name, tuple(doms), p, self.span_from(start))

    def key_const(self):
        t = self.tok
        if t.kind == "ID":
            self.advance()
            return t.text
        if t.kind == "STR":
            self.advance()
            return _unquote(t.text)
        if t.kind == "INT" or self.at("-"):
            return self.signed_int()
        raise self.fail(["constant"])

    def signed_int(self) -> int:
        neg = False
        if self.at("-"):
            self.advance()
            neg = True
        v = int(self.expect_kind("INT", "integer").text)
        return -v if neg else v

    def pops_name(self) -> str:
        name = self.expect_kind("ID", "POPS name").text
        if name == "prod" and self.at("("):
            self.advance()
            a = self.pops_name()
            self.expect(",")
            b = self.pops_name()
            self.expect(")")
            return f"prod({a},{b})"
        if self.at("("):
            self.advance()
            arg = self.number_text()
            self.expect(")")
            return f"{name}({arg})"
        return name

    def number_text(self) -> str:
        t = self.tok
        if t.kind == "INT":
            self.advance()
            if self.at("/") and self.peek().kind == "INT":
                self.advance()
                return f"{t.text}/{self.advance().text}"
            return t.text
        if t.kind == "DEC":
            self.advance()
            return t.text
        raise self.fail(["number"])

    # -- rules ------------------------------------------------------------
    def rule(self) -> Rule:
        start = self.tok.pos
        head = self.head()
        self.expect(":-")
        scope = {a.name for a in head.args if isinstance(a, Var)}
        if self.at("case"):
            body = self.cases(scope)
        else:
            body = self.body(scope)
        self.expect(".")
        return Rule(head, body, self.span_from(start))

    def head(self) -> RelAtom:
        start = self.tok.pos
        name = self.expect_kind("ID", "relation name").text
        self.expect("(")
        args = []
        if not self.at(")"):
            args.append(self.head_term())
            while self.at(","):
                self.advance()
                args.append(self.head_term())
        self.expect(")")
        return RelAtom(name, tuple(args), self.span_from(start))

    def head_term(self):
        t = self.tok
        start = t.pos
        if t.kind == "ID":
            self.advance()
            return Var(t.text, self.span_from(start))
        if t.kind == "STR":
            self.advance()
            return Const(_unquote(t.text), self.span_from(start))
        if t.kind == "INT" or self.at("-"):
            return Const(self.signed_int(), self.span_from(start))
        raise self.fail(["variable", "constant"])

    def cases(self, scope) -> Cases:
        start = self.tok.pos
        self.expect("case")
        branches = []
        else_ = None
        bstart = self.tok.pos
        c = self.cond(scope)
        self.expect(":")
        branches.append(Branch(c, self.body(scope), self.span_from(bstart)))
        while self.at(";"):
            self.advance()
            if self.at("else"):
                self.advance()
                self.expect(":")
                else_ = self.body(scope)
                break
            bstart = self.tok.pos
            c = self.cond(scope)
            self.expect(":")
            branches.append(Branch(c, self.body(scope), self.span_from(bstart)))
        return Cases(tuple(branches), else_, self.span_from(start))

    def body(self, scope) -> Body:
        start = self.tok.pos
        terms = [self.term(scope)]
        while self.at("+"):
            self.advance()
            terms.append(self.term(scope))
        return Body(tuple(terms), self.span_from(start))

    def term(self, scope) -> Prod:
        start = self.tok.pos
        fs = [self.factor(scope)]
        while self.at("*"):
            self.advance()
            fs.append(self.factor(scope))
        return Prod(tuple(fs), self.span_from(start))

    _FACTOR_EXPECT = ["atom", "value", "'sum'", "'['", "'('"]

    def factor(self, scope):
        t = self.tok
        start = t.pos
        if t.kind == "ID":
            if t.text == "sum" and self.at("(", 1):
                return self.sumexpr(scope)
            if self.at("(", 1):
                # f(R(...)) or R(...)
                if self.peek(2).kind == "ID" and self.at("(", 3):
                    name = self.advance().text
                    self.expect("(")
                    atom = self.atom(scope)
                    self.expect(")")
                    return FnApp(name, None, atom, self.span_from(start))
                return self.atom(scope)
            if self.at("<", 1):
                name = self.advance().text
                self.advance()
                param = self.value_text()
                self.expect(">")
                self.expect("(")
                atom = self.atom(scope)
                self.expect(")")
                return FnApp(name, param, atom, self.span_from(start))
            self.advance()
            if t.text in scope:
                return KeyValue(Var(t.text, self.span_from(start)), self.span_from(start))
            if t.text in VALUE_WORDS:
                return Literal(t.text, self.span_from(start))
            return KeyValue(Const(t.text, self.span_from(start)), self.span_from(start))
        if t.kind == "STR":
            self.advance()
            sp = self.span_from(start)
            return KeyValue(Const(_unquote(t.text), sp), sp)
        if t.kind in ("INT", "DEC") or (self.at("-") and self.peek().kind in ("INT", "DEC")):
            return Literal(self.value_text(), self.span_from(start))
        if self.at("-") and self.peek().kind == "ID" and self.peek().text == "inf":
            self.advance()
            self.advance()
            return Literal("-inf", self.span_from(start))
        if self.at("("):
            self.advance()
            b = self.body(scope)
            self.expect(")")
            return b
        if self.at("{"):
            return Literal(self.value_text(), self.span_from(start))
        if self.at("["):
            nxt = self.peek()
            if nxt.kind in ("INT", "DEC") or self.at("]", 1) or self.at("-", 1) or (
                nxt.kind == "ID" and nxt.text == "inf" and not self.at("=", 2)
            ):
                return Literal(self.value_text(), self.span_from(start))
            self.advance()
            if self.tok.kind == "ID" and self.at("(", 1):
                atom = self.atom(scope)
                self.expect("]")
                return CastAtom(atom, self.span_from(start))
            left = self.keyterm(scope)
            self.expect("=")
            right = self.keyterm(scope)
            self.expect("]")
            return EqAtom(left, right, self.span_from(start))
        raise self.fail(self._FACTOR_EXPECT)

    def value_text(self) -> str:
        """A value literal, returned as normalized text."""
        t = self.tok
        if self.at("-"):
            self.advance()
            if self.tok.kind == "ID" and self.tok.text == "inf":
                self.advance()
                return "-inf"
            return "-" + self.number_text()
        if t.kind in ("INT", "DEC"):
            return self.number_text()
        if t.kind == "ID" and t.text in VALUE_WORDS:
            self.advance()
            return t.text
        if self.at("[") or self.at("{"):
            close = "]" if self.at("[") else "}"
            opener = self.advance().text
            items = []
            if not self.at(close):
                items.append(self.value_text())
                while self.at(","):
                    self.advance()
                    items.append(self.value_text())
            self.expect(close)
            return opener + ",".join(items) + close
        raise self.fail(["value"])

    def sumexpr(self, scope) -> SumExpr:
        start = self.tok.pos
        self.expect("sum")
        self.expect("(")
        binders = [self.binder()]
        while self.at(","):
            self.advance()
            binders.append(self.binder())
        self.expect(")")
        inner = set(scope) | {b.var for b in binders}
        self.expect("{")
        body = self.body(inner)
        guard = None
        if self.at("|"):
            self.advance()
            guard = self.cond(inner)
        self.expect("}")
        return SumExpr(tuple(binders), body, guard, self.span_from(start))

    def binder(self) -> Binder:
        start = self.tok.pos
        v = self.expect_kind("ID", "variable").text
        if self.at("in"):
            self.advance()
            lo = self.signed_int()
            self.expect("..")
            hi = self.signed_int()
            return Binder(v, lo, hi, self.span_from(start))
        return Binder(v, None, None, self.span_from(start))

    def atom(self, scope) -> RelAtom:
        start = self.tok.pos
        name = self.expect_kind("ID", "relation name").text
        self.expect("(")
        args = []
        if not self.at(")"):
            args.append(self.keyterm(scope))
            while self.at(","):
                self.advance()
                args.append(self.keyterm(scope))
        self.expect(")")
        return RelAtom(name, tuple(args), self.span_from(start))

    def keyterm(self, scope):
        t = self.tok
        start = t.pos
        if t.kind == "ID":
            self.advance()
            if t.text in scope:
                v = Var(t.text, self.span_from(start))
                if (self.at("+") or self.at("-")) and self.peek().kind == "INT":
                    sign = 1 if self.advance().text == "+" else -1
                    k = int(self.advance().text)
                    return KeyFn(v, sign * k, self.span_from(start))
                return v
            return Const(t.text, self.span_from(start))
        if t.kind == "STR":
            self.advance()
            return Const(_unquote(t.text), self.span_from(start))
        if t.kind == "INT" or (self.at("-") and self.peek().kind == "INT"):
            return Const(self.signed_int(), self.span_from(start))
        raise self.fail(["variable", "constant"])

    # -- conditions -------------------------------------------------------
    def cond(self, scope):
        start = self.tok.pos
        items = [self.cond_and(scope)]
        while self.at("or"):
            self.advance()
            items.append(self.cond_and(scope))
        return items[0] if len(items) == 1 else CondOr(tuple(items), self.span_from(start))

    def cond_and(self, scope):
        start = self.tok.pos
        items = [self.cond_not(scope)]
        while self.at("and") or self.at(","):
            self.advance()
            items.append(self.cond_not(scope))
        return items[0] if len(items) == 1 else CondAnd(tuple(items), self.span_from(start))

    def cond_not(self, scope):
        start = self.tok.pos
        if self.at("not"):
            self.advance()
            return CondNot(self.cond_not(scope), self.span_from(start))
        return self.cond_primary(scope)

    def cond_primary(self, scope):
        start = self.tok.pos
        if self.at("("):
            self.advance()
            c = self.cond(scope)
            self.expect(")")
            return c
        if self.tok.kind == "ID" and self.at("(", 1) and self.tok.text not in scope:
            a = self.atom(scope)
            return CondRel(a, self.span_from(start))
        left = self.arith(scope)
        t = self.tok
        if not (t.kind == "SYM" and t.text in ("=", "!=", "<", "<=", ">", ">=")):
            raise self.fail(["'='", "'!='", "'<'", "'<='", "'>'", "'>='"])
        op = self.advance().text
        right = self.arith(scope)
        return CondCmp(op, left, right, self.span_from(start))

    def arith(self, scope) -> Arith:
        start = self.tok.pos
        parts = [(1, self.arith_atom(scope))]
        while (self.at("+") or self.at("-")) and self.peek().kind in ("ID", "INT", "STR"):
            sign = 1 if self.advance().text == "+" else -1
            parts.append((sign, self.arith_atom(scope)))
        return Arith(tuple(parts), self.span_from(start))

    def arith_atom(self, scope):
        t = self.tok
        start = t.pos
        if t.kind == "ID":
            self.advance()
            if t.text in scope:
                return Var(t.text, self.span_from(start))
            return Const(t.text, self.span_from(start))
        if t.kind == "STR":
            self.advance()
            return Const(_unquote(t.text), self.span_from(start))
        if t.kind == "INT" or (self.at("-") and self.peek().kind == "INT"):
            return Const(self.signed_int(), self.span_from(start))
        raise self.fail(["variable", "constant"])


def _unquote(s: str) -> str:
    body = s[1:-1]
    return re.sub(r"\\(.)", r"\1", body)


def parse(text) -> Program:
    """Parse program text.  Raises :class:`ParseError` on any malformed input."""
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    try:
        return Parser(text).program()
    except RecursionError:
        raise ParseError("input is nested too deeply", SourceSpan()) from None


def parse_file(path: str) -> Program:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


# ---------------------------------------------------------------------------
# pretty printing

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _const(v, scope=(), quote=False) -> str:
    if isinstance(v, int):
        return str(v)
    if not quote and _IDENT.match(v) and v not in scope and v not in KEYWORDS and v not in VALUE_WORDS:
        return v
    return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _term(t, scope, quote=False) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Const):
        return _const(t.value, scope, quote)
    if isinstance(t, KeyFn):
        return f"{t.var.name}{'+' if t.offset >= 0 else '-'}{abs(t.offset)}"
    raise TypeError(t)


def _atom(a: RelAtom, scope, quote=False) -> str:
    return f"{a.name}(" + ", ".join(_term(t, scope, quote) for t in a.args) + ")"


def _arith(a: Arith, scope) -> str:
    out = ""
    for i, (s, t) in enumerate(a.parts):
        txt = _term(t, scope)
        if i == 0:
            out = txt
        else:
            out += (" + " if s > 0 else " - ") + txt
    return out


def _cond(c, scope, parent: str = "") -> str:
    if isinstance(c, CondCmp):
        return f"{_arith(c.left, scope)} {c.op} {_arith(c.right, scope)}"
    if isinstance(c, CondRel):
        return _atom(c.atom, scope)
    if isinstance(c, CondNot):
        inner = _cond(c.item, scope, "not")
        return f"not {inner}"
    if isinstance(c, (CondAnd, CondOr)):
        op = " and " if isinstance(c, CondAnd) else " or "
        s = op.join(_cond(i, scope, "and" if isinstance(c, CondAnd) else "or") for i in c.items)
        return f"({s})" if parent else s
    raise TypeError(c)


def _factor(f, scope) -> str:
    if isinstance(f, RelAtom):
        return _atom(f, scope)
    if isinstance(f, EqAtom):
        return f"[{_term(f.left, scope)} = {_term(f.right, scope)}]"
    if isinstance(f, CastAtom):
        return f"[{_atom(f.atom, scope)}]"
    if isinstance(f, FnApp):
        p = f"<{f.param}>" if f.param is not None else ""
        return f"{f.name}{p}({_atom(f.atom, scope)})"
    if isinstance(f, Literal):
        return f.text
    if isinstance(f, KeyValue):
        return _term(f.term, scope)
    if isinstance(f, SumExpr):
        inner = set(scope) | {b.var for b in f.binders}
        bs = ", ".join(b.var if b.lo is None else f"{b.var} in {b.lo}..{b.hi}" for b in f.binders)
        g = f" | {_cond(f.guard, inner)}" if f.guard is not None else ""
        return f"sum({bs}){{ {_body(f.body, inner)}{g} }}"
    if isinstance(f, Body):
        return f"({_body(f, scope)})"
    raise TypeError(f)


def _body(b: Body, scope) -> str:
    return " + ".join(" * ".join(_factor(f, scope) for f in p.factors) for p in b.terms)


def pretty_rule(r: Rule) -> str:
    scope = set(r.head_vars)
    head = _atom(r.head, (), quote=True)
    if isinstance(r.body, Cases):
        parts = [f"{_cond(b.cond, scope)} : {_body(b.body, scope)}" for b in r.body.branches]
        if r.body.else_ is not None:
            parts.append(f"else : {_body(r.body.else_, scope)}")
        return f"{head} :- case " + "\n    ; ".join(parts) + "."
    return f"{head} :- {_body(r.body, scope)}."


def pretty(program: Program) -> str:
    lines = []
    for it in program.items:
        if isinstance(it, DomainDecl):
            if it.elements is not None:
                lines.append(f"domain {it.name} = {{" + ", ".join(_const(e) for e in it.elements) + "}.")
            else:
                lines.append(f"domain {it.name} = {it.lo}..{it.hi}.")
        elif isinstance(it, RelDecl):
            lines.append(f"{it.kind} {it.name}(" + ", ".join(it.domains) + f"): {it.pops}.")
        elif isinstance(it, PopsDecl):
            lines.append(f"pops {it.name} = {it.pops}.")
        elif isinstance(it, Rule):
            lines.append(pretty_rule(it))
    return "\n".join(lines) + "\n"
