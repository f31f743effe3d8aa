"""Linear systems: matrix form, matrix power sums and the elimination solver.

A linear system has polynomials whose monomials mention at most one
variable, each with multiplicity one.  ``linear_lfp`` solves it by variable
elimination in O(N^3) semiring operations, given a stability index ``p``
for which the closure ``a^(p)`` of every diagonal coefficient is exact.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

from .engine import IterationCap, Solution, Status
from .ground import GroundedSystem, ico_apply
from .pops import Pops, power_sum


class LinearError(Exception):
    pass


class SemiringMatrix:
    """Dense square matrix over one POPS."""

    def __init__(self, pops: Pops, rows: Sequence[Sequence[Any]]):
        self.pops = pops
        self.rows = [list(r) for r in rows]
        self.n = len(self.rows)
        if any(len(r) != self.n for r in self.rows):
            raise LinearError("matrix must be square")

    @classmethod
    def identity(cls, pops: Pops, n: int) -> "SemiringMatrix":
        return cls(pops, [[pops.one if i == j else pops.zero for j in range(n)] for i in range(n)])

    @classmethod
    def zeros(cls, pops: Pops, n: int) -> "SemiringMatrix":
        return cls(pops, [[pops.zero] * n for _ in range(n)])

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def __eq__(self, other):
        return isinstance(other, SemiringMatrix) and self.pops == other.pops and self.rows == other.rows

    def __matmul__(self, other: "SemiringMatrix") -> "SemiringMatrix":
        P, n = self.pops, self.n
        out = []
        for i in range(n):
            row = []
            ri = self.rows[i]
            for j in range(n):
                acc = P.zero
                for k in range(n):
                    a = ri[k]
                    if P.absorbing and a == P.zero:
                        continue
                    acc = P.add(acc, P.mul(a, other.rows[k][j]))
                row.append(acc)
            out.append(row)
        return SemiringMatrix(P, out)

    def __add__(self, other: "SemiringMatrix") -> "SemiringMatrix":
        P = self.pops
        return SemiringMatrix(P, [[P.add(a, b) for a, b in zip(r1, r2)] for r1, r2 in zip(self.rows, other.rows)])

    def format(self) -> list[str]:
        return ["[" + ", ".join(self.pops.format(v) for v in r) + "]" for r in self.rows]

    def __repr__(self):
        return f"SemiringMatrix({self.pops.name}, {self.format()})"


@dataclass
class LinearSystem:
    A: SemiringMatrix
    B: list
    vars: list


def to_matrix_form(system: GroundedSystem) -> LinearSystem:
    """Write the system as F(X) = AX + B."""
    pops = system.pops_set()
    if len(pops) != 1:
        raise LinearError("matrix form needs a single POPS")
    P = pops[0]
    if not (P.absorbing and P.zero == P.bot):
        raise LinearError(f"matrix form needs an absorbing zero equal to bottom; {P.name} has neither")
    if system.has_functions():
        raise LinearError("matrix form is unavailable for systems with casts or functions")
    n = system.N
    A = SemiringMatrix.zeros(P, n)
    B = [P.zero] * n
    for k, poly in enumerate(system.polys):
        for m in poly:
            if not m.factors:
                B[k] = P.add(B[k], m.coeff)
            elif len(m.factors) == 1 and m.factors[0].mult == 1:
                i = m.factors[0].var
                A.rows[k][i] = P.add(A.rows[k][i], m.coeff)
            else:
                raise LinearError(f"{system.label(k)} has a non-linear monomial")
    return LinearSystem(A, B, list(system.vars))


def matrix_power_sum(A: SemiringMatrix, q: int) -> SemiringMatrix:
    """I + A + A^2 + ... + A^q by multiply-accumulate."""
    if q < 0:
        raise ValueError("q must be non-negative")
    acc = SemiringMatrix.identity(A.pops, A.n)
    power = SemiringMatrix.identity(A.pops, A.n)
    for _ in range(q):
        power = power @ A
        acc = acc + power
    return acc


def matrix_stability_index(A: SemiringMatrix, cap: int) -> int | None:
    """Smallest q <= cap with A^(q) = A^(q+1), or None."""
    acc = SemiringMatrix.identity(A.pops, A.n)
    power = SemiringMatrix.identity(A.pops, A.n)
    for q in range(cap + 1):
        power = power @ A
        nxt = acc + power
        if nxt == acc:
            return q
        acc = nxt
    return None


def unit_cycle(pops: Pops, n: int, weight=None) -> SemiringMatrix:
    """Adjacency matrix of the directed n-cycle 0 -> 1 -> ... -> n-1 -> 0."""
    w = pops.from_number(1) if weight is None else weight
    M = SemiringMatrix.zeros(pops, n)
    for i in range(n):
        M.rows[i][(i + 1) % n] = w
    return M


# ---------------------------------------------------------------------------
# elimination solver


def linear_eligible(system: GroundedSystem, p: int | None = None) -> str | None:
    if system.N == 0:
        return None
    pops = system.pops_set()
    if len(pops) != 1:
        return "the stratum mixes several POPS"
    if system.has_functions():
        return "the stratum contains casts or functions"
    if not system.is_linear():
        return "the stratum is not linear"
    P = pops[0]
    if p is None and P.known_stability_p is None:
        return f"no stability index is known for {P.name}"
    return None


class _LinFn:
    """A linear function: sum of coeff * x_i plus an optional constant."""

    __slots__ = ("coef", "const")

    def __init__(self, coef: dict, const):
        self.coef = coef  # var -> coefficient
        self.const = const  # None means no constant term


def linear_lfp(system: GroundedSystem, p: int | None = None) -> Solution:
    """Least fixpoint of a linear system by variable elimination.

    For the last variable, f_N = a x_N + b(x) is replaced by
    c(x) = a^(p) b(x) + bottom, substituted into the remaining functions,
    and recovered by back-substitution.  The result is checked to be a
    fixpoint; a failure means ``p`` was too small.
    """
    why = linear_eligible(system, p)
    if why:
        raise LinearError(f"linear solver unavailable: {why}")
    P = system.pops[0] if system.N else None
    if system.N == 0:
        return Solution((), 0, Status.CONVERGED, "linear", cap=IterationCap(0, "empty system"))
    if p is None:
        p = P.known_stability_p
    ops = 0

    def add(a, b):
        nonlocal ops
        ops += 1
        return P.add(a, b)

    def mul(a, b):
        nonlocal ops
        ops += 1
        return P.mul(a, b)

    fns = []
    for poly in system.polys:
        coef, const = {}, None
        for m in poly:
            if not m.factors:
                const = m.coeff if const is None else add(const, m.coeff)
            else:
                i = m.factors[0].var
                coef[i] = add(coef[i], m.coeff) if i in coef else m.coeff
        fns.append(_LinFn(coef, const))

    N = system.N
    closed: list[_LinFn | None] = [None] * N
    for k in range(N - 1, -1, -1):
        f = fns[k]
        a = f.coef.pop(k, None)
        if a is None:
            c = f
        else:
            star = power_sum(P, a, p)
            ops += 2 * p
            coef = {i: mul(star, v) for i, v in f.coef.items()}
            const = mul(star, f.const) if f.const is not None else None
            const = P.bot if const is None else add(const, P.bot)
            c = _LinFn(coef, const)
        closed[k] = c
        # substitute x_k := c into f_0 .. f_{k-1}
        for j in range(k):
            g = fns[j]
            b = g.coef.pop(k, None)
            if b is None:
                continue
            for i, v in c.coef.items():
                t = mul(b, v)
                g.coef[i] = add(g.coef[i], t) if i in g.coef else t
            if c.const is not None:
                t = mul(b, c.const)
                g.const = t if g.const is None else add(g.const, t)
    xs: list = [None] * N
    for k in range(N):
        c = closed[k]
        acc = P.zero
        for i, v in c.coef.items():
            acc = add(acc, mul(v, xs[i]))
        if c.const is not None:
            acc = add(acc, c.const)
        xs[k] = acc
    sol = tuple(xs)
    if ico_apply(system, sol) != sol:
        raise LinearError(f"elimination result is not a fixpoint; p={p} is too small for this system")
    return Solution(sol, 0, Status.CONVERGED, "linear", cap=IterationCap(None, "elimination"), ops=ops)
