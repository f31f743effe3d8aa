"""Partially ordered pre-semirings (POPS) and their values.

Each concrete instance is a small class exposing ``add``/``mul`` (the
semiring operations), ``cmp`` (the POPS partial order), the distinguished
elements ``zero``/``one``/``bot`` and a handful of algebraic flags used by
the engine to decide which evaluation strategy and which iteration cap
apply.

Values are plain Python objects:

* Bool: ``True``/``False``
* numbers (nat, nnrat, trop family, lifted carriers): ``int`` or
  ``fractions.Fraction``; ``math.inf`` is the tropical infinity
* lifted carriers use the :data:`BOT` singleton
* ``trop_p(p)``: a sorted tuple of exactly ``p + 1`` costs
* ``trop_eta(eta)``: a sorted tuple of distinct costs (a set)
* THREE: :class:`Tri`
* product POPS: a 2-tuple
"""
from __future__ import annotations

import enum
import math
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as iproduct
from typing import Any, Callable, Iterable, Sequence

INF = math.inf
_LIMIT = 2**63


class PopsError(Exception):
    """Base class for errors raised by POPS operations."""


class CarrierError(PopsError, TypeError):
    """A value does not belong to the carrier of the POPS it was used with."""


class UnsupportedOperation(PopsError):
    pass


class UnknownFunction(PopsError, KeyError):
    pass


class ArithmeticOverflow(PopsError, OverflowError):
    """An exact number left the 64-bit numerator/denominator range."""


class ValueSyntaxError(PopsError, ValueError):
    pass


class _Bot:
    __slots__ = ()
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "bot"

    def __reduce__(self):
        return (_Bot, ())


BOT = _Bot()


class Tri(enum.Enum):
    """Three-valued truth values; ``U`` is the unknown value (bottom)."""

    F = 0
    U = 1
    T = 2

    def __repr__(self):
        return self.name


class Cmp(enum.Enum):
    LESS = "<"
    EQUAL = "="
    GREATER = ">"
    INCOMPARABLE = "||"

    def flip(self) -> "Cmp":
        return {Cmp.LESS: Cmp.GREATER, Cmp.GREATER: Cmp.LESS}.get(self, self)


# ---------------------------------------------------------------------------
# exact numbers


def exact(x) -> Any:
    """Normalize an exact number: integral Fractions become ints, with a range check."""
    if x is INF or x == INF:
        return INF
    if isinstance(x, bool):
        raise CarrierError(f"boolean {x!r} is not a number")
    if isinstance(x, int):
        if -_LIMIT <= x < _LIMIT:
            return x
        raise ArithmeticOverflow(f"integer {x} exceeds 64 bits")
    if isinstance(x, Fraction):
        if x.denominator == 1:
            return exact(x.numerator)
        if abs(x.numerator) >= _LIMIT or x.denominator >= _LIMIT:
            raise ArithmeticOverflow(f"rational {x} exceeds 64-bit components")
        return x
    raise CarrierError(f"{x!r} is not an exact number")


def is_number(x) -> bool:
    return (isinstance(x, (int, Fraction)) and not isinstance(x, bool)) or x == INF and isinstance(x, float)


def is_finite_number(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


_NUM_RE = re.compile(r"^[+-]?\d+(/\d+|\.\d+)?$")


def parse_number(text: str):
    t = text.strip()
    if t in ("inf", "+inf", "∞"):
        return INF
    if not _NUM_RE.match(t):
        raise ValueSyntaxError(f"not a number: {text!r}")
    return exact(Fraction(t))


def format_number(x) -> str:
    if x == INF:
        return "inf"
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    return str(x)


def _split_top(text: str) -> list[str]:
    """Split a comma separated list, ignoring commas nested in brackets."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if cur or parts:
        parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip() != ""] if "".join(parts).strip() else []


# ---------------------------------------------------------------------------
# base class


class Pops:
    """A partially ordered pre-semiring.

    Subclasses implement ``add``, ``mul``, ``cmp``, ``contains``, ``parse``,
    ``format`` and ``sample``.  The public flag attributes describe what the
    theory allows us to do with the instance.
    """

    name: str = "?"
    zero: Any
    one: Any
    bot: Any
    strict_times: bool = True
    has_minus: bool = False
    idempotent: bool = False
    naturally_ordered: bool = True
    absorbing: bool = True
    known_stability_p: int | None = None
    rank: int | None = None
    numeric: bool = False

    # -- operations -------------------------------------------------------
    def add(self, a, b):
        raise NotImplementedError

    def mul(self, a, b):
        raise NotImplementedError

    def cmp(self, a, b) -> Cmp:
        raise NotImplementedError

    def minus(self, b, a):
        raise UnsupportedOperation(f"{self.name} is not a distributive dioid; no difference operator")

    def contains(self, v) -> bool:
        raise NotImplementedError

    def from_number(self, x):
        """Embed a (key) number as a value of this POPS."""
        raise UnsupportedOperation(f"numbers cannot be used as values of {self.name}")

    # -- text syntax ------------------------------------------------------
    def parse(self, text: str):
        raise NotImplementedError

    def format(self, v) -> str:
        raise NotImplementedError

    # -- sampling ---------------------------------------------------------
    def sample(self, rng: random.Random):
        raise NotImplementedError

    def exhaustive(self) -> list | None:
        """All carrier elements if the carrier is small, else ``None``."""
        return None

    # -- helpers ----------------------------------------------------------
    def leq(self, a, b) -> bool:
        return self.cmp(a, b) in (Cmp.LESS, Cmp.EQUAL)

    def sum(self, values: Iterable):
        acc = self.zero
        for v in values:
            acc = self.add(acc, v)
        return acc

    def prod(self, values: Iterable):
        acc = self.one
        for v in values:
            acc = self.mul(acc, v)
        return acc

    def pow(self, a, k: int):
        acc = self.one
        for _ in range(k):
            acc = self.mul(acc, a)
        return acc

    def check(self, v):
        if not self.contains(v):
            raise CarrierError(f"{v!r} is not an element of {self.name}")
        return v

    def __eq__(self, other):
        return isinstance(other, Pops) and other.name == self.name

    def __hash__(self):
        return hash(self.name)

    def __repr__(self):
        return f"<POPS {self.name}>"


# ---------------------------------------------------------------------------
# Booleans


class BoolPops(Pops):
    name = "bool"
    zero, one, bot = False, True, False
    has_minus = True
    idempotent = True
    known_stability_p = 0
    rank = 1

    def add(self, a, b):
        return a or b

    def mul(self, a, b):
        return a and b

    def cmp(self, a, b):
        if a == b:
            return Cmp.EQUAL
        return Cmp.LESS if b else Cmp.GREATER

    def minus(self, b, a):
        return b and not a

    def contains(self, v):
        return isinstance(v, bool)

    def parse(self, text):
        t = text.strip().lower()
        if t in ("true", "1", "t"):
            return True
        if t in ("false", "0", "f"):
            return False
        raise ValueSyntaxError(f"not a boolean: {text!r}")

    def format(self, v):
        return "true" if v else "false"

    def sample(self, rng):
        return rng.random() < 0.5

    def exhaustive(self):
        return [False, True]


# ---------------------------------------------------------------------------
# naturally ordered numbers: N and Q+


class NumberPops(Pops):
    """``(N, +, *, 0, 1)`` or ``(Q+, +, *, 0, 1)`` with the natural order."""

    numeric = True

    def __init__(self, integral: bool):
        self.integral = integral
        self.name = "nat" if integral else "nnrat"
        self.zero = self.bot = 0
        self.one = 1

    def add(self, a, b):
        return exact(a + b)

    def mul(self, a, b):
        return exact(a * b)

    def cmp(self, a, b):
        return Cmp.EQUAL if a == b else (Cmp.LESS if a < b else Cmp.GREATER)

    def contains(self, v):
        if not is_finite_number(v) or v < 0:
            return False
        return not self.integral or isinstance(v, int)

    def from_number(self, x):
        return self.check(exact(x))

    def parse(self, text):
        v = parse_number(text)
        if not self.contains(v):
            raise ValueSyntaxError(f"{text!r} is not an element of {self.name}")
        return v

    def format(self, v):
        return format_number(v)

    def sample(self, rng):
        if self.integral or rng.random() < 0.5:
            return rng.randint(0, 12)
        return exact(Fraction(rng.randint(0, 12), rng.randint(1, 4)))


# ---------------------------------------------------------------------------
# lifted numbers: N_bot and R_bot (exact rationals)


class LiftedPops(Pops):
    """Lifted numbers with the flat order; bottom absorbs both operations."""

    naturally_ordered = False
    absorbing = False
    # S + bot = {bot}, a one-element (hence 0-stable) semiring
    known_stability_p = 0
    rank = 1
    numeric = True

    def __init__(self, integral: bool):
        self.integral = integral
        self.name = "nat_bot" if integral else "real_bot"
        self.zero, self.one, self.bot = 0, 1, BOT

    def add(self, a, b):
        if a is BOT or b is BOT:
            return BOT
        return exact(a + b)

    def mul(self, a, b):
        if a is BOT or b is BOT:
            return BOT
        return exact(a * b)

    def cmp(self, a, b):
        if a == b:
            return Cmp.EQUAL
        if a is BOT:
            return Cmp.LESS
        if b is BOT:
            return Cmp.GREATER
        return Cmp.INCOMPARABLE

    def contains(self, v):
        if v is BOT:
            return True
        if not is_finite_number(v):
            return False
        return not self.integral or (isinstance(v, int) and v >= 0)

    def from_number(self, x):
        return self.check(exact(x))

    def parse(self, text):
        if text.strip() in ("bot", "⊥"):
            return BOT
        v = parse_number(text)
        if not self.contains(v):
            raise ValueSyntaxError(f"{text!r} is not an element of {self.name}")
        return v

    def format(self, v):
        return "bot" if v is BOT else format_number(v)

    def sample(self, rng):
        if rng.random() < 0.2:
            return BOT
        if self.integral:
            return rng.randint(0, 12)
        return exact(Fraction(rng.randint(-8, 8), rng.randint(1, 3)))


# ---------------------------------------------------------------------------
# tropical semirings


class TropPops(Pops):
    """``(R u {inf}, min, +, inf, 0)``; order: numerically greater is smaller."""

    has_minus = True
    idempotent = True
    numeric = True

    def __init__(self, nonneg: bool):
        self.nonneg = nonneg
        self.name = "tropplus" if nonneg else "trop"
        self.zero = self.bot = INF
        self.one = 0
        self.known_stability_p = 0 if nonneg else None

    def add(self, a, b):
        return a if a <= b else b

    def mul(self, a, b):
        if a == INF or b == INF:
            return INF
        return exact(a + b)

    def cmp(self, a, b):
        if a == b:
            return Cmp.EQUAL
        return Cmp.LESS if a > b else Cmp.GREATER

    def minus(self, b, a):
        # meet of {c : min(a, c) <= b}; at b == a every c qualifies, so the meet is inf
        return b if b < a else INF

    def contains(self, v):
        if v == INF and isinstance(v, float):
            return True
        if not is_finite_number(v):
            return False
        return v >= 0 or not self.nonneg

    def from_number(self, x):
        return self.check(exact(x))

    def parse(self, text):
        v = parse_number(text)
        if not self.contains(v):
            raise ValueSyntaxError(f"{text!r} is not an element of {self.name}")
        return v

    def format(self, v):
        return format_number(v)

    def sample(self, rng):
        if rng.random() < 0.15:
            return INF
        lo = 0 if self.nonneg else -5
        return rng.randint(lo, 12)


def min_p(bag: Iterable, p: int) -> tuple:
    """The ``p + 1`` smallest elements of a bag, padded with infinity."""
    s = sorted(bag)[: p + 1]
    return tuple(s) + (INF,) * (p + 1 - len(s))


def bag_sum(x: Iterable, y: Iterable) -> list:
    out = []
    for u in x:
        for v in y:
            out.append(INF if u == INF or v == INF else exact(u + v))
    return out


class TropPPops(Pops):
    """Bags of the ``p + 1`` smallest costs."""

    numeric = True

    def __init__(self, p: int):
        if p < 0:
            raise ValueError("p must be non-negative")
        self.p = p
        self.name = f"trop_p({p})"
        self.zero = self.bot = (INF,) * (p + 1)
        self.one = (0,) + (INF,) * p
        self.known_stability_p = p

    def add(self, a, b):
        return min_p(a + b, self.p)

    def mul(self, a, b):
        return min_p(bag_sum(a, b), self.p)

    def leq(self, a, b):
        # a below b iff b = min_p(a (+) z) for some bag z: b keeps a prefix of a
        # and everything in b is no larger than the first element of a it drops
        if a == b:
            return True
        n = self.p + 1
        for j in range(n):
            rest = list(b)
            ok = True
            for u in a[:j]:
                if u in rest:
                    rest.remove(u)
                else:
                    ok = False
                    break
            if ok and max(b) <= a[j]:
                return True
        return False

    def cmp(self, a, b):
        if a == b:
            return Cmp.EQUAL
        if self.leq(a, b):
            return Cmp.LESS
        if self.leq(b, a):
            return Cmp.GREATER
        return Cmp.INCOMPARABLE

    def contains(self, v):
        if not isinstance(v, tuple) or len(v) != self.p + 1:
            return False
        if not all((x == INF and isinstance(x, float)) or (is_finite_number(x) and x >= 0) for x in v):
            return False
        return list(v) == sorted(v)

    def from_number(self, x):
        x = exact(x)
        if x != INF and x < 0:
            raise CarrierError(f"negative cost {x} in {self.name}")
        return min_p([x], self.p)

    def parse(self, text):
        t = text.strip()
        if t.startswith("[") and t.endswith("]"):
            items = [parse_number(s) for s in _split_top(t[1:-1])]
            if len(items) > self.p + 1:
                raise ValueSyntaxError(f"bag {text!r} has more than {self.p + 1} elements")
            if any(x != INF and x < 0 for x in items):
                raise ValueSyntaxError(f"negative cost in {text!r}")
            return min_p(items, self.p)
        return self.from_number(parse_number(t))

    def format(self, v):
        return "[" + ",".join(format_number(x) for x in v) + "]"

    def sample(self, rng):
        k = rng.randint(0, self.p + 1)
        return min_p([rng.randint(0, 9) for _ in range(k)], self.p)


def min_eta(s: Iterable, eta) -> tuple:
    """Elements within ``eta`` of the minimum, as a sorted duplicate-free tuple."""
    xs = set(s)
    if not xs:
        return (INF,)
    m = min(xs)
    if m == INF:
        return (INF,)
    return tuple(sorted(u for u in xs if u != INF and u - m <= eta))


class TropEtaPops(Pops):
    """Sets of costs within ``eta`` of their minimum."""

    idempotent = True
    numeric = True

    def __init__(self, eta):
        eta = exact(Fraction(eta)) if not isinstance(eta, (int, Fraction)) else exact(eta)
        if eta < 0:
            raise ValueError("eta must be non-negative")
        self.eta = eta
        self.name = f"trop_eta({format_number(eta)})"
        self.zero = self.bot = (INF,)
        self.one = (0,)

    def add(self, a, b):
        return min_eta(a + b, self.eta)

    def mul(self, a, b):
        return min_eta(bag_sum(a, b), self.eta)

    def leq(self, a, b):
        m = b[0]
        if a[0] < m:
            return False
        return all(u in b for u in a if u != INF and u - m <= self.eta)

    def cmp(self, a, b):
        if a == b:
            return Cmp.EQUAL
        if self.leq(a, b):
            return Cmp.LESS
        if self.leq(b, a):
            return Cmp.GREATER
        return Cmp.INCOMPARABLE

    def contains(self, v):
        if not isinstance(v, tuple) or not v:
            return False
        if v == (INF,):
            return True
        if not all(is_finite_number(x) and x >= 0 for x in v):
            return False
        return list(v) == sorted(set(v)) and v[-1] - v[0] <= self.eta

    def from_number(self, x):
        x = exact(x)
        if x != INF and x < 0:
            raise CarrierError(f"negative cost {x} in {self.name}")
        return (x,)

    def parse(self, text):
        t = text.strip()
        if t.startswith("{") and t.endswith("}"):
            items = [parse_number(s) for s in _split_top(t[1:-1])]
            v = tuple(sorted(set(items))) or (INF,)
            if INF in v and len(v) > 1:
                v = tuple(x for x in v if x != INF)
            if not self.contains(v):
                raise ValueSyntaxError(f"{text!r} is not an element of {self.name}")
            return v
        return self.from_number(parse_number(t))

    def format(self, v):
        return "{" + ",".join(format_number(x) for x in v) + "}"

    def sample(self, rng):
        if rng.random() < 0.1:
            return (INF,)
        base = rng.randint(0, 6)
        width = int(math.floor(self.eta))
        return min_eta([base] + [base + rng.randint(0, width) for _ in range(rng.randint(0, 3))], self.eta)


# ---------------------------------------------------------------------------
# THREE


_TRUTH = {Tri.F: 0, Tri.U: 1, Tri.T: 2}


class ThreePops(Pops):
    """Three-valued logic: truth-order max/min, knowledge order for fixpoints."""

    name = "three"
    zero, one, bot = Tri.F, Tri.T, Tri.U
    strict_times = False
    naturally_ordered = False
    rank = 1

    def add(self, a, b):
        return a if _TRUTH[a] >= _TRUTH[b] else b

    def mul(self, a, b):
        return a if _TRUTH[a] <= _TRUTH[b] else b

    def cmp(self, a, b):
        if a == b:
            return Cmp.EQUAL
        if a is Tri.U:
            return Cmp.LESS
        if b is Tri.U:
            return Cmp.GREATER
        return Cmp.INCOMPARABLE

    def contains(self, v):
        return isinstance(v, Tri)

    def parse(self, text):
        t = text.strip()
        try:
            return {"F": Tri.F, "T": Tri.T, "U": Tri.U, "false": Tri.F, "true": Tri.T, "bot": Tri.U}[t]
        except KeyError:
            raise ValueSyntaxError(f"not a three-valued literal: {text!r}") from None

    def format(self, v):
        return v.name

    def sample(self, rng):
        return rng.choice([Tri.F, Tri.U, Tri.T])

    def exhaustive(self):
        return [Tri.F, Tri.U, Tri.T]


# ---------------------------------------------------------------------------
# products


class ProductPops(Pops):
    """Cartesian product with componentwise operations and order."""

    def __init__(self, left: Pops, right: Pops):
        self.left, self.right = left, right
        self.name = f"prod({left.name},{right.name})"
        self.zero = (left.zero, right.zero)
        self.one = (left.one, right.one)
        self.bot = (left.bot, right.bot)
        self.strict_times = left.strict_times and right.strict_times
        self.absorbing = left.absorbing and right.absorbing
        self.idempotent = left.idempotent and right.idempotent
        self.naturally_ordered = left.naturally_ordered and right.naturally_ordered
        self.numeric = False
        lp, rp = left.known_stability_p, right.known_stability_p
        self.known_stability_p = None if lp is None or rp is None else max(lp, rp)
        self.rank = None if left.rank is None or right.rank is None else left.rank + right.rank

    def add(self, a, b):
        return (self.left.add(a[0], b[0]), self.right.add(a[1], b[1]))

    def mul(self, a, b):
        return (self.left.mul(a[0], b[0]), self.right.mul(a[1], b[1]))

    def cmp(self, a, b):
        c1, c2 = self.left.cmp(a[0], b[0]), self.right.cmp(a[1], b[1])
        if c1 is Cmp.EQUAL:
            return c2
        if c2 is Cmp.EQUAL or c1 is c2:
            return c1
        return Cmp.INCOMPARABLE

    def contains(self, v):
        return isinstance(v, tuple) and len(v) == 2 and self.left.contains(v[0]) and self.right.contains(v[1])

    def parse(self, text):
        t = text.strip()
        if not (t.startswith("(") and t.endswith(")")):
            raise ValueSyntaxError(f"not a pair: {text!r}")
        parts = _split_top(t[1:-1])
        if len(parts) != 2:
            raise ValueSyntaxError(f"not a pair: {text!r}")
        return (self.left.parse(parts[0]), self.right.parse(parts[1]))

    def format(self, v):
        return f"({self.left.format(v[0])},{self.right.format(v[1])})"

    def sample(self, rng):
        return (self.left.sample(rng), self.right.sample(rng))

    def exhaustive(self):
        l, r = self.left.exhaustive(), self.right.exhaustive()
        if l is None or r is None:
            return None
        return list(iproduct(l, r))


# ---------------------------------------------------------------------------
# registry

BOOL = BoolPops()
NAT = NumberPops(integral=True)
NNRAT = NumberPops(integral=False)
REAL_BOT = LiftedPops(integral=False)
NAT_BOT = LiftedPops(integral=True)
TROP = TropPops(nonneg=False)
TROPPLUS = TropPops(nonneg=True)
THREE = ThreePops()

_SIMPLE = {p.name: p for p in (BOOL, NAT, NNRAT, REAL_BOT, NAT_BOT, TROP, TROPPLUS, THREE)}
_SIMPLE.update({"nonneg_rational": NNRAT, "lifted_real": REAL_BOT, "lifted_nat": NAT_BOT})


def get_pops(name: str) -> Pops:
    """Resolve a POPS name such as ``tropplus``, ``trop_p(2)`` or ``prod(bool,trop)``."""
    n = name.replace(" ", "")
    if n in _SIMPLE:
        return _SIMPLE[n]
    m = re.fullmatch(r"trop_p\((\d+)\)", n)
    if m:
        return TropPPops(int(m.group(1)))
    m = re.fullmatch(r"trop_eta\(([0-9./]+)\)", n)
    if m:
        return TropEtaPops(Fraction(m.group(1)))
    if n.startswith("prod(") and n.endswith(")"):
        parts = _split_top(n[5:-1])
        if len(parts) == 2:
            return ProductPops(get_pops(parts[0]), get_pops(parts[1]))
    raise KeyError(f"unknown POPS {name!r}")


# ---------------------------------------------------------------------------
# checked public operations


def _same(pops: Pops, *vals):
    for v in vals:
        pops.check(v)


def plus(pops: Pops, a, b):
    _same(pops, a, b)
    return pops.add(a, b)


def times(pops: Pops, a, b):
    _same(pops, a, b)
    return pops.mul(a, b)


def partial_cmp(pops: Pops, a, b) -> Cmp:
    _same(pops, a, b)
    return pops.cmp(a, b)


def minus(pops: Pops, b, a):
    _same(pops, a, b)
    return pops.minus(b, a)


def power_sum(pops: Pops, a, p: int):
    """``1 + a + a^2 + ... + a^p`` by Horner accumulation."""
    pops.check(a)
    acc = pops.one
    for _ in range(p):
        acc = pops.add(pops.one, pops.mul(a, acc))
    return acc


def element_stability_index(pops: Pops, a, cap: int) -> int | None:
    """Smallest ``p <= cap`` with ``a^(p) == a^(p+1)``, or ``None``."""
    pops.check(a)
    cur = pops.one  # a^(0)
    power = pops.one
    for p in range(cap + 1):
        power = pops.mul(power, a)
        nxt = pops.add(cur, power)
        if nxt == cur:
            return p
        cur = nxt
    return None


def cast_bool(pops: Pops, bit) -> Any:
    """The indicator cast from Booleans: ``[0] = bottom``, ``[1] = one``."""
    return pops.one if bit else pops.bot


# ---------------------------------------------------------------------------
# interpreted functions between POPS


@dataclass(frozen=True)
class UnaryFunction:
    name: str
    source: str
    target: str
    fn: Callable[[Any], Any] = field(compare=False)
    monotone: bool = True
    param: Any = None

    @property
    def source_pops(self) -> Pops | None:
        return None if self.source == "*" else get_pops(self.source)

    def accepts(self, pops_from: Pops) -> bool:
        return self.source == "*" or get_pops(self.source) == pops_from

    def __call__(self, a):
        return self.fn(a)

    @property
    def label(self) -> str:
        if self.param is None:
            return self.name
        return f"{self.name}<{format_number(self.param)}>"


def _not(a):
    return {Tri.F: Tri.T, Tri.T: Tri.F, Tri.U: Tri.U}[a]


def _neg(a):
    return BOT if a is BOT else exact(-a)


def _fin(a):
    # trop -> real_bot: numbers map to themselves, inf to bot
    return BOT if a == INF else a


def make_function(name: str, param=None, target: Pops | None = None) -> UnaryFunction:
    """Instantiate a registered interpreted function.

    ``cast`` is the Boolean indicator and needs the target POPS; ``threshold``
    needs its numeric parameter.
    """
    if name == "not":
        return UnaryFunction("not", "three", "three", _not)
    if name == "neg":
        return UnaryFunction("neg", "real_bot", "real_bot", _neg)
    if name == "threshold":
        if param is None:
            raise UnknownFunction("threshold requires a parameter, e.g. threshold<1/2>")
        theta = exact(Fraction(param))
        return UnaryFunction("threshold", "nnrat", "bool", lambda x: x > theta, param=theta)
    if name == "cast":
        if target is None:
            raise UnknownFunction("cast requires a target POPS")
        return UnaryFunction("cast", "bool", target.name, lambda b: target.one if b else target.bot)
    if name == "incl":
        # B -> N_bot inclusion; not monotone since 0 and 1 are incomparable in N_bot
        return UnaryFunction("incl", "bool", "nat_bot", lambda b: 1 if b else 0, monotone=False)
    if name == "lift":
        return UnaryFunction("lift", "nat_bot", "real_bot", lambda x: x)
    if name == "fin":
        return UnaryFunction("fin", "trop", "real_bot", _fin, monotone=False)
    raise UnknownFunction(f"unknown function {name!r}")


FUNCTION_NAMES = ("not", "neg", "threshold", "cast", "incl", "lift", "fin")


def apply_unary(pops_from: Pops, pops_to: Pops, fname: str, a, param=None):
    f = make_function(fname, param, target=pops_to)
    if not f.accepts(pops_from) or get_pops(f.target) != pops_to:
        raise UnknownFunction(f"no function {fname!r} from {pops_from.name} to {pops_to.name}")
    pops_from.check(a)
    return f(a)


# ---------------------------------------------------------------------------
# axiom verification


@dataclass
class AxiomReport:
    pops: str
    checked: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def _count(self, law: str):
        self.checked[law] = self.checked.get(law, 0) + 1

    def law(self, law: str, holds: bool, *witness):
        self._count(law)
        if not holds and len([v for v in self.violations if v[0] == law]) < 5:
            self.violations.append((law, witness))
        elif not holds:
            self.violations.append((law, None))

    def failed_laws(self) -> set[str]:
        return {v[0] for v in self.violations}

    def to_dict(self, fmt: Callable[[Any], str] = repr) -> dict:
        return {
            "pops": self.pops,
            "ok": self.ok,
            "checked": dict(self.checked),
            "violations": [
                {"law": law, "witness": None if w is None else [fmt(x) for x in w]}
                for law, w in self.violations
            ],
        }


def check_axioms(
    pops: Pops,
    samples: Sequence,
    functions: Sequence[UnaryFunction] = (),
    max_triples: int | None = None,
    rng: random.Random | None = None,
) -> AxiomReport:
    """Check the POPS laws on sampled elements.

    Pairs are checked exhaustively; triples exhaustively when there are at
    most ``max_triples`` of them, otherwise a random subset of that size.
    """
    rep = AxiomReport(pops.name)
    S = list(samples)
    if not S:
        raise ValueError("samples must be nonempty")
    add, mul, cmp = pops.add, pops.mul, pops.cmp
    z, o, b = pops.zero, pops.one, pops.bot
    rep.law("bot+bot=bot", add(b, b) == b)
    rep.law("bot*bot=bot", mul(b, b) == b)
    for x in S:
        rep.law("carrier", pops.contains(x), x)
        rep.law("zero identity", add(z, x) == x, x)
        rep.law("one identity", mul(o, x) == x, x)
        rep.law("bot least", pops.leq(b, x), x)
        rep.law("order reflexive", cmp(x, x) is Cmp.EQUAL, x)
        if pops.strict_times:
            rep.law("strict times", mul(x, b) == b, x)
    for x in S:
        for y in S:
            rep.law("plus commutative", add(x, y) == add(y, x), x, y)
            rep.law("times commutative", mul(x, y) == mul(y, x), x, y)
            c = cmp(x, y)
            rep.law("order antisymmetric", c is Cmp.EQUAL or x != y, x, y)
            rep.law("order converse", cmp(y, x) is c.flip(), x, y)
            if pops.has_minus and pops.leq(x, y):
                rep.law("a+(b-a)=b", add(x, pops.minus(y, x)) == y, x, y)
            for f in functions:
                if f.accepts(pops) and pops.leq(x, y) and f.monotone:
                    tgt = get_pops(f.target)
                    rep.law(f"{f.label} monotone", tgt.leq(f(x), f(y)), x, y)
    triples = [(x, y, w) for x in S for y in S for w in S]
    if max_triples is not None and len(triples) > max_triples:
        rng = rng or random.Random(0)
        triples = rng.sample(triples, max_triples)
    for x, y, w in triples:
        rep.law("plus associative", add(add(x, y), w) == add(x, add(y, w)), x, y, w)
        rep.law("times associative", mul(mul(x, y), w) == mul(x, mul(y, w)), x, y, w)
        rep.law("distributive", mul(x, add(y, w)) == add(mul(x, y), mul(x, w)), x, y, w)
        if pops.leq(x, y):
            rep.law("plus monotone", pops.leq(add(x, w), add(y, w)), x, y, w)
            rep.law("times monotone", pops.leq(mul(x, w), mul(y, w)), x, y, w)
            if pops.leq(y, w):
                rep.law("order transitive", pops.leq(x, w), x, y, w)
        if pops.has_minus:
            rep.law(
                "(a+b)-(a+c)=b-(a+c)",
                pops.minus(add(x, y), add(x, w)) == pops.minus(y, add(x, w)),
                x,
                y,
                w,
            )
    return rep


def samples_for(pops: Pops, n: int, rng: random.Random) -> list:
    """Distinguished elements plus ``n`` random draws (deduplicated, order kept)."""
    ex = pops.exhaustive()
    if ex is not None:
        return ex
    out = [pops.zero, pops.one, pops.bot]
    out += [pops.sample(rng) for _ in range(n)]
    seen, uniq = set(), []
    for v in out:
        if v not in seen:
            seen.add(v)
            uniq.append(v)
    return uniq


ALL_INSTANCES: tuple[Pops, ...] = (
    BOOL,
    NAT,
    NNRAT,
    REAL_BOT,
    NAT_BOT,
    TROP,
    TROPPLUS,
    TropPPops(1),
    TropPPops(2),
    TropPPops(3),
    TropEtaPops(Fraction(13, 2)),
    THREE,
    ProductPops(TROPPLUS, REAL_BOT),
)
