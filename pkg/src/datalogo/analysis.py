"""Stability laboratory: empirical indices, bound calculators and order probes."""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Sequence

from .pops import Cmp, Pops, UnsupportedOperation, check_axioms, element_stability_index, samples_for

SATURATE = 2**63


@dataclass
class UniPoly:
    """f(x) = a_0 + a_1 x + ... + a_k x^k; ``None`` marks a missing term."""

    pops: Pops
    coeffs: list

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        P = self.pops
        acc = P.zero
        power = P.one
        for i, a in enumerate(self.coeffs):
            if i > 0:
                power = P.mul(power, x)
            if a is not None:
                acc = P.add(acc, P.mul(a, power))
        return acc

    def format(self) -> str:
        parts = []
        for i, a in enumerate(self.coeffs):
            if a is None:
                continue
            v = self.pops.format(a)
            parts.append(v if i == 0 else (f"{v}*x" if i == 1 else f"{v}*x^{i}"))
        return " + ".join(parts) or self.pops.format(self.pops.zero)


def poly_stability_index(pops: Pops, f: UniPoly, cap: int) -> int | None:
    """Smallest q <= cap with f^(q+1)(bot) = f^(q)(bot), or None."""
    x = pops.bot
    for q in range(cap + 1):
        nxt = f(x)
        if nxt == x:
            return q
        x = nxt
    return None


def simple_linear_iterate(pops: Pops, a, b, q: int):
    """Value after q steps of x -> a x + b from bottom, in closed form.

    b + ab + ... + a^(q-1) b + a^q bot, for q >= 1; bottom for q = 0.
    """
    if q == 0:
        return pops.bot
    acc = pops.zero
    power = pops.one
    for _ in range(q):
        acc = pops.add(acc, pops.mul(power, b))
        power = pops.mul(power, a)
    return pops.add(acc, pops.mul(power, pops.bot))


def iterate(pops: Pops, fn, q: int):
    x = pops.bot
    for _ in range(q):
        x = fn(x)
    return x


def clone_stability_bound(p_list: Sequence[int]) -> int | None:
    """sum_k prod_{i<=k} p_i for descending p_1 >= ... >= p_n; None when it reaches 2^63."""
    ps = list(p_list)
    if any(a < b for a, b in zip(ps, ps[1:])):
        raise ValueError("stability indices must be given in descending order")
    total, prod = 0, 1
    for p in ps:
        prod *= p
        total += prod
        if total >= SATURATE:
            return None
    return total


def format_bound(b: int | None) -> str:
    return "astronomical (>=2^63)" if b is None else str(b)


def natural_order_probe(pops: Pops, samples: Sequence) -> bool:
    """Does x <= y iff exists z in samples with x + z = y, antisymmetrically, on the samples?"""
    S = list(samples)
    rel = {}
    for x in S:
        for y in S:
            rel[(x, y)] = any(pops.add(x, z) == y for z in S)
    for x in S:
        for y in S:
            if x != y and rel[(x, y)] and rel[(y, x)]:
                return False
            if rel[(x, y)] != pops.leq(x, y):
                return False
    return True


def s_plus_bot_check(pops: Pops, samples: Sequence) -> bool:
    """Is {x + bot} closed under + and * with bot and 1 + bot as identities?"""
    if not pops.strict_times:
        raise UnsupportedOperation(f"{pops.name}: S+bot is only a semiring for strict multiplication")
    B = pops.bot
    S = list({pops.add(x, B) for x in samples} | {B})
    one_b = pops.add(pops.one, B)
    lift = lambda v: pops.add(v, B)  # noqa: E731
    for x in S:
        if pops.add(x, B) != x or pops.mul(one_b, x) != x:
            return False
        for y in S:
            # x, y already in S + bot; sums and products must stay there
            if lift(pops.add(x, y)) != pops.add(x, y):
                return False
            if lift(pops.mul(x, y)) != pops.mul(x, y):
                return False
    return True


def s_plus_bot(pops: Pops, samples: Sequence) -> list:
    seen, out = set(), []
    for x in samples:
        v = pops.add(x, pops.bot)
        if v not in seen:
            seen.add(v)
            out.append(v)
    return out


def random_poly(pops: Pops, rng: random.Random, max_degree: int = 3, linear: bool = False) -> UniPoly:
    k = 1 if linear else rng.randint(0, max_degree)
    coeffs = []
    for i in range(k + 1):
        coeffs.append(None if (i > 0 and rng.random() < 0.2) else pops.sample(rng))
    return UniPoly(pops, coeffs)


@dataclass
class StabilityReport:
    pops: str
    seed: int
    samples: int
    indices: dict = field(default_factory=dict)  # formatted element -> index or None
    histogram: dict = field(default_factory=dict)
    cap: int = 0
    known_p: int | None = None
    axioms: dict | None = None
    natural_order: bool | None = None
    s_plus_bot: bool | None = None
    note: str = "element stability with a cap is a semi-decision: a missing index means none was found within the cap"

    def to_dict(self) -> dict:
        return {
            "pops": self.pops,
            "seed": self.seed,
            "samples": self.samples,
            "cap": self.cap,
            "known_stability_p": self.known_p,
            "indices": self.indices,
            "histogram": {str(k): v for k, v in self.histogram.items()},
            "axioms": self.axioms,
            "natural_order": self.natural_order,
            "s_plus_bot_semiring": self.s_plus_bot,
            "note": self.note,
        }


def stability_report(pops: Pops, seed: int = 0, n: int = 40, cap: int = 50) -> StabilityReport:
    rng = random.Random(seed)
    S = samples_for(pops, n, rng)
    rep = StabilityReport(pops.name, seed, len(S), cap=cap, known_p=pops.known_stability_p)
    for a in S:
        idx = element_stability_index(pops, a, cap)
        rep.indices[pops.format(a)] = idx
        key = "none" if idx is None else idx
        rep.histogram[key] = rep.histogram.get(key, 0) + 1
    ax = check_axioms(pops, S[: min(len(S), 25)], max_triples=2000, rng=rng)
    rep.axioms = ax.to_dict(pops.format)
    rep.natural_order = natural_order_probe(pops, S[:15])
    if pops.strict_times:
        rep.s_plus_bot = s_plus_bot_check(pops, S)
    return rep
