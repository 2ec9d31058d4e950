"""Term equations, free algebras of finitely generated varieties and HSP membership."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import MalformedInput, SignatureMismatch, SizeLimitExceeded, UnknownVariable
from .finalg import FiniteAlgebra, Homomorphism, is_homomorphism
from .sigterm import (
    App, Signature, Term, Var, VarSet, check_term, format_term, parse_term, substitute, variables,
)

DEFAULT_MAX_FREE = 20000
DEFAULT_MAX_COORDS = 4096


@dataclass(frozen=True)
class TermEquation:
    vars: VarSet
    lhs: Term
    rhs: Term

    def __post_init__(self):
        n = len(self.vars)
        for t in (self.lhs, self.rhs):
            if any(i >= n for i in variables(t)):
                raise UnknownVariable("equation mentions a variable outside its variable set")

    def flipped(self) -> "TermEquation":
        return TermEquation(self.vars, self.rhs, self.lhs)

    def check(self, sig: Signature) -> None:
        check_term(self.lhs, sig, len(self.vars))
        check_term(self.rhs, sig, len(self.vars))

    def __str__(self):
        return f"{format_term(self.lhs, self.vars)} = {format_term(self.rhs, self.vars)}"

    def to_json(self) -> dict:
        return {"vars": list(self.vars.names),
                "lhs": format_term(self.lhs, self.vars),
                "rhs": format_term(self.rhs, self.vars)}

    @classmethod
    def from_json(cls, data: Mapping, sig: Signature | None = None) -> "TermEquation":
        try:
            X = VarSet(tuple(data["vars"]))
            return cls(X, parse_term(data["lhs"], X, sig), parse_term(data["rhs"], X, sig))
        except (KeyError, TypeError) as exc:
            raise MalformedInput(f"bad equation description: {exc}") from exc

    @classmethod
    def parse(cls, vars: Sequence[str], lhs: str, rhs: str, sig: Signature | None = None):
        X = VarSet(tuple(vars))
        return cls(X, parse_term(lhs, X, sig), parse_term(rhs, X, sig))


EquationSequence = Sequence[TermEquation]


@dataclass(frozen=True)
class SatResult:
    """Outcome of a satisfaction check; falsy when a counterexample was found."""

    holds: bool
    witness: tuple[int, ...] | None = None

    def __bool__(self):
        return self.holds

    def witness_dict(self, X: VarSet) -> dict[str, int] | None:
        if self.witness is None:
            return None
        return dict(zip(X.names, self.witness))


def term_values(t: Term, A: FiniteAlgebra, assignments: Sequence[Sequence[int]],
                _cache: dict | None = None) -> list[int]:
    """Values of ``t`` under each assignment, computed subterm by subterm."""
    cache = {} if _cache is None else _cache

    def go(u: Term) -> list[int]:
        hit = cache.get(u)
        if hit is not None:
            return hit
        if isinstance(u, Var):
            try:
                vals = [h[u.index] for h in assignments]
            except IndexError:
                raise UnknownVariable(f"assignment undefined on variable {u.index}") from None
        else:
            if u.symbol not in A.sig or A.sig.arity(u.symbol) != len(u.args):
                raise SignatureMismatch(f"symbol {u.symbol!r} not interpreted by the algebra")
            table = A.table(u.symbol)
            cols = [go(a) for a in u.args]
            n = A.size
            if not cols:
                vals = [table[0]] * len(assignments)
            else:
                vals = []
                for row in zip(*cols):
                    idx = 0
                    for a in row:
                        idx = idx * n + a
                    vals.append(table[idx])
        cache[u] = vals
        return vals

    return go(t)


def all_assignments(n: int, k: int) -> list[tuple[int, ...]]:
    return list(itertools.product(range(n), repeat=k))


def satisfies_equation(A: FiniteAlgebra, eq: TermEquation) -> SatResult:
    """Check A ⊨ lhs = rhs over all |A|^|X| assignments.

    On failure the first (lexicographically least) falsifying assignment is
    returned as witness.  The empty algebra satisfies everything.
    """
    eq.check(A.sig)
    if A.size == 0:
        return SatResult(True)
    hs = all_assignments(A.size, len(eq.vars))
    cache: dict = {}
    lv = term_values(eq.lhs, A, hs, cache)
    rv = term_values(eq.rhs, A, hs, cache)
    for h, a, b in zip(hs, lv, rv):
        if a != b:
            return SatResult(False, h)
    return SatResult(True)


@dataclass(frozen=True)
class FreeAlgebraWitness:
    """The free algebra on n generators of the variety generated by ``source``.

    Element ``i`` is the function ``tuples[i]`` from assignments (in the order
    of ``itertools.product``) to the source carrier; ``witness_terms[i]`` is a
    least-depth term denoting it.
    """

    algebra: FiniteAlgebra
    generators: tuple[int, ...]
    witness_terms: tuple[Term, ...]
    tuples: tuple[tuple[int, ...], ...] = field(repr=False)
    vars: VarSet = VarSet()

    def verify(self, source: FiniteAlgebra) -> bool:
        hs = all_assignments(source.size, len(self.generators))
        for i, t in enumerate(self.witness_terms):
            if tuple(term_values(t, source, hs)) != self.tuples[i]:
                return False
            if _eval_with(t, self.algebra, self.generators) != i:
                return False
        return True


def _eval_with(t: Term, A: FiniteAlgebra, assignment: Sequence[int]) -> int:
    if isinstance(t, Var):
        return assignment[t.index]
    return A.apply(t.symbol, [_eval_with(a, A, assignment) for a in t.args])


class _Collision(Exception):
    def __init__(self, first: Term, second: Term):
        self.first, self.second = first, second


def _free_bfs(A: FiniteAlgebra, n: int, observe=None, max_elements: int = DEFAULT_MAX_FREE,
              max_coords: int = DEFAULT_MAX_COORDS):
    """Breadth-first generation of the subalgebra of A^(A^n) spanned by the projections.

    ``observe(term, index, is_new)`` is called for every generator and every
    operation application, in the fixed discovery order.
    """
    m = A.size**n
    if m > max_coords:
        raise SizeLimitExceeded(f"{A.size}^{n} = {m} coordinates exceed limit {max_coords}")
    hs = all_assignments(A.size, n)
    elements: list[tuple[int, ...]] = []
    terms: list[Term] = []
    index: dict[tuple[int, ...], int] = {}
    table_entries: dict[str, dict[tuple[int, ...], int]] = {name: {} for name in A.sig.names}

    def add(value: tuple[int, ...], term: Term) -> int:
        i = index.get(value)
        is_new = i is None
        if is_new:
            if len(elements) >= max_elements:
                raise SizeLimitExceeded(f"free algebra exceeds {max_elements} elements")
            i = index[value] = len(elements)
            elements.append(value)
            terms.append(term)
        if observe is not None:
            observe(term, i, is_new)
        return i

    generators = tuple(add(tuple(h[i] for h in hs), Var(i)) for i in range(n))
    tables = [A.table(name) for name in A.sig.names]
    level_start, depth = 0, 0
    while True:
        depth += 1
        count = len(elements)
        for (name, arity), table in zip(A.sig.symbols, tables):
            entries = table_entries[name]
            if arity == 0:
                if depth == 1:
                    entries[()] = add(tuple(table[0] for _ in range(m)), App(name))
                continue
            for args in itertools.product(range(count), repeat=arity):
                if max(args) < level_start:
                    continue
                cols = [elements[a] for a in args]
                value = []
                for j in range(m):
                    idx = 0
                    for c in cols:
                        idx = idx * A.size + c[j]
                    value.append(table[idx])
                entries[args] = add(tuple(value), App(name, [terms[a] for a in args]))
        if len(elements) == count:
            break
        level_start = count
    return generators, elements, terms, table_entries


def _assemble(A, n, generators, elements, terms, table_entries) -> FreeAlgebraWitness:
    size = len(elements)
    tables = {}
    for name, arity in A.sig.symbols:
        entries = table_entries[name]
        tables[name] = [entries[args] for args in itertools.product(range(size), repeat=arity)]
    F = FiniteAlgebra(A.sig, size, tables)
    return FreeAlgebraWitness(F, generators, tuple(terms), tuple(elements), VarSet.standard(n))


def free_algebra_in_variety(A: FiniteAlgebra, n: int, max_elements: int = DEFAULT_MAX_FREE,
                            max_coords: int = DEFAULT_MAX_COORDS) -> FreeAlgebraWitness:
    """Free algebra on ``n`` generators in HSP(A), each element tagged with a witness term."""
    if n < 0:
        raise ValueError("number of generators must be non-negative")
    parts = _free_bfs(A, n, max_elements=max_elements, max_coords=max_coords)
    return _assemble(A, n, *parts)


@dataclass(frozen=True)
class HspResult:
    """Verdict of :func:`hsp_member` with its certificate.

    A negative answer carries ``equation``, an identity of the generating
    algebra that fails in the candidate.  A positive answer carries the free
    algebra and the surjection from it onto the candidate.
    """

    member: bool
    equation: TermEquation | None = None
    free: FreeAlgebraWitness | None = None
    surjection: Homomorphism | None = None

    def __bool__(self):
        return self.member


def hsp_member(B: FiniteAlgebra, A: FiniteAlgebra, max_elements: int = DEFAULT_MAX_FREE,
               max_coords: int = DEFAULT_MAX_COORDS) -> HspResult:
    """Decide whether B lies in the variety generated by A.

    B is in HSP(A) iff the assignment sending the i-th free generator to the
    i-th element of B extends to a well-defined map on the free algebra
    F_|B|(A).  Every element of F is reached by a witness term, which is
    evaluated in B alongside; two terms naming the same element of F with
    different values in B refute membership.
    """
    if A.sig != B.sig:
        raise SignatureMismatch("algebras are over different signatures")
    n = B.size
    bval: list[int] = []  # value in B of each free element
    term_val: dict[Term, int] = {}
    first_term: list[Term] = []

    def observe(term: Term, i: int, is_new: bool):
        if isinstance(term, Var):
            v = term.index
        else:
            v = B.apply(term.symbol, [term_val[a] for a in term.args])
        term_val.setdefault(term, v)
        if is_new:
            bval.append(v)
            first_term.append(term)
        elif bval[i] != v:
            raise _Collision(first_term[i], term)

    try:
        parts = _free_bfs(A, n, observe, max_elements=max_elements, max_coords=max_coords)
    except _Collision as c:
        return HspResult(False, equation=_compact(n, c.first, c.second))
    free = _assemble(A, n, *parts)
    e = Homomorphism(free.algebra, B, tuple(bval))
    assert is_homomorphism(e.map, free.algebra, B)
    return HspResult(True, free=free, surjection=e)


def _compact(n: int, lhs: Term, rhs: Term) -> TermEquation:
    """The equation over just the generators it mentions, keeping their standard names."""
    names = VarSet.standard(n).names
    used = sorted(variables(lhs) | variables(rhs))
    ren = {i: Var(k) for k, i in enumerate(used)}
    return TermEquation(VarSet(tuple(names[i] for i in used)), substitute(lhs, ren), substitute(rhs, ren))


def eventual_satisfaction(A: FiniteAlgebra, seq: EquationSequence) -> int | None:
    """Least i0 such that A satisfies every item from index i0 on.

    The finite list stands for a prefix of an infinite sequence: if A fails
    the last item, there is no i0 and None is returned.
    """
    i0 = len(seq)
    while i0 > 0 and satisfies_equation(A, seq[i0 - 1]):
        i0 -= 1
    if seq and i0 == len(seq):
        return None
    return i0
