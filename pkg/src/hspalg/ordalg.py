"""Ordered algebras, stable preorders and term inequations.

Relations are dense boolean matrices (tuples of tuples); carriers are tiny.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

from .errors import MalformedInput, NotStable
from .finalg import (
    DEFAULT_MAX_CARRIER, FiniteAlgebra, Homomorphism, _translation_images, closure, product, restrict,
)
from .sigterm import Signature, Term, VarSet, check_term, format_term, parse_term, variables
from .variety import SatResult, all_assignments, term_values

Relation = tuple[tuple[bool, ...], ...]


def _freeze(rel) -> Relation:
    return tuple(tuple(bool(x) for x in row) for row in rel)


def transitive_closure(rel: Sequence[Sequence[bool]]) -> Relation:
    """Warshall's algorithm; reflexivity is added as well."""
    n = len(rel)
    r = [list(row) for row in rel]
    for i in range(n):
        r[i][i] = True
    for k in range(n):
        rk = r[k]
        for i in range(n):
            if r[i][k]:
                ri = r[i]
                for j in range(n):
                    if rk[j]:
                        ri[j] = True
    return _freeze(r)


def is_monotone(A: FiniteAlgebra, rel: Sequence[Sequence[bool]]) -> bool:
    """Every operation preserves ``rel`` in each argument (hence jointly, if rel is transitive)."""
    for a in range(A.size):
        for b in range(A.size):
            if rel[a][b]:
                for u, v in _translation_images(A, a, b):
                    if not rel[u][v]:
                        return False
    return True


def _is_preorder(rel) -> bool:
    return transitive_closure(rel) == _freeze(rel)


class OrderedAlgebra:
    """A finite algebra with a partial order making all operations monotone."""

    __slots__ = ("base", "leq")

    def __init__(self, base: FiniteAlgebra, leq: Sequence[Sequence[bool]]):
        leq = _freeze(leq)
        n = base.size
        if len(leq) != n or any(len(row) != n for row in leq):
            raise MalformedInput("order matrix has the wrong shape")
        if not _is_preorder(leq):
            raise MalformedInput("order is not reflexive and transitive")
        if any(leq[a][b] and leq[b][a] for a in range(n) for b in range(n) if a != b):
            raise MalformedInput("order is not antisymmetric")
        if not is_monotone(base, leq):
            raise MalformedInput("operations are not monotone")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "leq", leq)

    def __setattr__(self, key, value):
        raise AttributeError("OrderedAlgebra is immutable")

    @classmethod
    def from_pairs(cls, base: FiniteAlgebra, pairs: Iterable[tuple[int, int]]) -> "OrderedAlgebra":
        """Order generated by ``pairs`` (reflexive-transitive closure)."""
        rel = [[False] * base.size for _ in range(base.size)]
        for a, b in pairs:
            rel[a][b] = True
        return cls(base, transitive_closure(rel))

    @classmethod
    def discrete(cls, base: FiniteAlgebra) -> "OrderedAlgebra":
        return cls.from_pairs(base, [])

    @property
    def sig(self) -> Signature:
        return self.base.sig

    @property
    def size(self) -> int:
        return self.base.size

    def __eq__(self, other):
        return isinstance(other, OrderedAlgebra) and self.base == other.base and self.leq == other.leq

    def __hash__(self):
        return hash((self.base, self.leq))

    def __repr__(self):
        return f"OrderedAlgebra(size={self.size}, sig={list(self.sig.names)})"

    def to_json(self) -> dict:
        data = self.base.to_json()
        data["leq"] = [[a, b] for a in range(self.size) for b in range(self.size)
                       if a != b and self.leq[a][b]]
        return data

    @classmethod
    def from_json(cls, data: Mapping) -> "OrderedAlgebra":
        base = FiniteAlgebra.from_json(data)
        try:
            pairs = [(int(a), int(b)) for a, b in data.get("leq", [])]
        except (TypeError, ValueError) as exc:
            raise MalformedInput(f"bad order pairs: {exc}") from exc
        if any(not (0 <= a < base.size and 0 <= b < base.size) for a, b in pairs):
            raise MalformedInput("order pair outside the carrier")
        return cls.from_pairs(base, pairs)


@dataclass(frozen=True)
class StablePreorder:
    over: OrderedAlgebra
    rel: Relation

    def __post_init__(self):
        object.__setattr__(self, "rel", _freeze(self.rel))

    def holds(self, a: int, b: int) -> bool:
        return self.rel[a][b]

    def is_valid(self) -> bool:
        A = self.over
        n = A.size
        return (
            _is_preorder(self.rel)
            and all(self.rel[a][b] for a in range(n) for b in range(n) if A.leq[a][b])
            and is_monotone(A.base, self.rel)
        )


def stable_preorder_generated(A: OrderedAlgebra, pairs: Iterable[tuple[int, int]]) -> StablePreorder:
    """Least stable preorder containing the order of A and ``pairs``.

    Alternates transitive closure and monotone propagation through one-position
    translations until nothing changes.
    """
    n = A.size
    rel = [list(row) for row in A.leq]
    for a, b in pairs:
        if not (0 <= a < n and 0 <= b < n):
            raise MalformedInput(f"pair {(a, b)} outside the carrier")
        rel[a][b] = True
    while True:
        rel = [list(row) for row in transitive_closure(rel)]
        changed = False
        for a in range(n):
            for b in range(n):
                if rel[a][b]:
                    for u, v in _translation_images(A.base, a, b):
                        if not rel[u][v]:
                            rel[u][v] = True
                            changed = True
        if not changed:
            return StablePreorder(A, _freeze(rel))


class OrderedQuotient(NamedTuple):
    algebra: OrderedAlgebra
    surjection: Homomorphism


def quotient_ordered(A: OrderedAlgebra, r: StablePreorder) -> OrderedQuotient:
    """Quotient by the equivalence r ∩ r^op, ordered by [a] <= [b] iff a r b."""
    if r.over.size != A.size or not r.is_valid():
        raise NotStable("relation is not a stable preorder on this algebra")
    n = A.size
    labels = []
    for a in range(n):
        labels.append(next(b for b in range(n) if r.rel[a][b] and r.rel[b][a]))
    reps = sorted(set(labels))
    block_of = {rep: i for i, rep in enumerate(reps)}
    m = len(reps)
    tables = {}
    for name, arity in A.sig.symbols:
        tables[name] = [
            block_of[labels[A.base.apply(name, [reps[i] for i in args])]]
            for args in itertools.product(range(m), repeat=arity)
        ]
    Q = FiniteAlgebra(A.sig, m, tables)
    leq = [[r.rel[reps[i]][reps[j]] for j in range(m)] for i in range(m)]
    QA = OrderedAlgebra(Q, leq)
    return OrderedQuotient(QA, Homomorphism(A.base, Q, tuple(block_of[l] for l in labels)))


def induced_preorder(A: OrderedAlgebra, e: Homomorphism, B: OrderedAlgebra) -> Relation:
    """a ⪯ a' iff e(a) <= e(a') in B."""
    return tuple(tuple(B.leq[e.map[a]][e.map[b]] for b in range(A.size)) for a in range(A.size))


def is_monotone_map(f: Sequence[int], A: OrderedAlgebra, B: OrderedAlgebra) -> bool:
    return all(B.leq[f[a]][f[b]] for a in range(A.size) for b in range(A.size) if A.leq[a][b])


@dataclass(frozen=True)
class TermInequation:
    vars: VarSet
    lhs: Term
    rhs: Term

    def __post_init__(self):
        n = len(self.vars)
        if any(i >= n for t in (self.lhs, self.rhs) for i in variables(t)):
            raise MalformedInput("inequation mentions a variable outside its variable set")

    def __str__(self):
        return f"{format_term(self.lhs, self.vars)} <= {format_term(self.rhs, self.vars)}"

    def to_json(self) -> dict:
        return {"vars": list(self.vars.names),
                "lhs": format_term(self.lhs, self.vars),
                "rhs": format_term(self.rhs, self.vars)}

    @classmethod
    def from_json(cls, data: Mapping, sig: Signature | None = None) -> "TermInequation":
        try:
            X = VarSet(tuple(data["vars"]))
            return cls(X, parse_term(data["lhs"], X, sig), parse_term(data["rhs"], X, sig))
        except (KeyError, TypeError) as exc:
            raise MalformedInput(f"bad inequation description: {exc}") from exc

    @classmethod
    def parse(cls, vars: Sequence[str], lhs: str, rhs: str, sig: Signature | None = None):
        X = VarSet(tuple(vars))
        return cls(X, parse_term(lhs, X, sig), parse_term(rhs, X, sig))


def satisfies_inequation(A: OrderedAlgebra, ineq: TermInequation) -> SatResult:
    """A ⊨ lhs <= rhs; on failure the least falsifying assignment is the witness."""
    for t in (ineq.lhs, ineq.rhs):
        check_term(t, A.sig, len(ineq.vars))
    if A.size == 0:
        return SatResult(True)
    hs = all_assignments(A.size, len(ineq.vars))
    cache: dict = {}
    lv = term_values(ineq.lhs, A.base, hs, cache)
    rv = term_values(ineq.rhs, A.base, hs, cache)
    for h, a, b in zip(hs, lv, rv):
        if not A.leq[a][b]:
            return SatResult(False, h)
    return SatResult(True)


def ordered_product(algebras: Sequence[OrderedAlgebra], max_size: int = DEFAULT_MAX_CARRIER):
    """Product with the componentwise order; returns (algebra, element tuples)."""
    P = product([A.base for A in algebras], sig=algebras[0].sig if algebras else None,
                max_size=max_size)
    els = P.elements
    leq = [[all(A.leq[x][y] for A, x, y in zip(algebras, s, t)) for t in els] for s in els]
    return OrderedAlgebra(P.algebra, leq), els


def ordered_subalgebra(A: OrderedAlgebra, S: Iterable[int]):
    """Subalgebra generated by S with the restricted order; returns (algebra, elements)."""
    sub = restrict(A.base, closure(A.base, S))
    els = sub.elements
    leq = [[A.leq[a][b] for b in els] for a in els]
    return OrderedAlgebra(sub.algebra, leq), els
