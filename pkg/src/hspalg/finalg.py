"""Finite algebras, homomorphisms, congruences and quotients.

Elements of an algebra of size ``n`` are the integers ``0..n-1``.  An operation
of arity ``k`` is a flat row-major table of length ``n**k``: the tuple
``(a_1, ..., a_k)`` lives at index ``sum(a_i * n**(k-i))``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

from .errors import MalformedInput, NotACongruence, SignatureMismatch, SizeLimitExceeded
from .sigterm import Signature
from .unionfind import UnionFind

DEFAULT_MAX_CARRIER = 64
DEFAULT_MAX_LATTICE = 8


class FiniteAlgebra:
    """A finite Σ-algebra given by operation tables."""

    __slots__ = ("sig", "size", "_tables", "_hash")

    def __init__(self, sig: Signature, size: int, tables: Mapping[str, Sequence[int]]):
        if size < 0:
            raise MalformedInput("carrier size must be non-negative")
        if set(tables) != set(sig.names):
            raise MalformedInput(
                f"tables for {sorted(tables)} do not match signature {list(sig.names)}"
            )
        packed = []
        for name, arity in sig.symbols:
            table = tuple(int(v) for v in tables[name])
            if len(table) != size**arity:
                raise MalformedInput(
                    f"table {name!r} has {len(table)} entries, expected {size}**{arity}"
                )
            if any(not 0 <= v < size for v in table):
                raise MalformedInput(f"table {name!r} has an entry outside 0..{size - 1}")
            packed.append(table)
        object.__setattr__(self, "sig", sig)
        object.__setattr__(self, "size", size)
        object.__setattr__(self, "_tables", tuple(packed))
        object.__setattr__(self, "_hash", hash((sig, size, self._tables)))

    def __setattr__(self, key, value):
        raise AttributeError("FiniteAlgebra is immutable")

    @classmethod
    def from_functions(cls, sig: Signature, size: int, funcs: Mapping[str, Callable[..., int]]):
        tables = {}
        for name, arity in sig.symbols:
            f = funcs[name]
            tables[name] = [f(*args) for args in itertools.product(range(size), repeat=arity)]
        return cls(sig, size, tables)

    @property
    def carrier(self) -> range:
        return range(self.size)

    @property
    def tables(self) -> dict[str, tuple[int, ...]]:
        return dict(zip(self.sig.names, self._tables))

    def table(self, name: str) -> tuple[int, ...]:
        return self._tables[self.sig.names.index(name)]

    def apply(self, name: str, args: Sequence[int]) -> int:
        table = self._tables[self.sig.names.index(name)]
        idx = 0
        n = self.size
        for a in args:
            idx = idx * n + a
        return table[idx]

    def __eq__(self, other):
        return (
            isinstance(other, FiniteAlgebra)
            and self._hash == other._hash
            and self.sig == other.sig
            and self.size == other.size
            and self._tables == other._tables
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"FiniteAlgebra(size={self.size}, sig={list(self.sig.names)})"

    def to_json(self) -> dict:
        return {
            "signature": self.sig.to_json(),
            "size": self.size,
            "tables": {name: list(t) for name, t in self.tables.items()},
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "FiniteAlgebra":
        try:
            sig = Signature(tuple((name, arity) for name, arity in data.get("signature", [])))
            return cls(sig, int(data["size"]), data.get("tables", {}))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, MalformedInput):
                raise
            raise MalformedInput(f"bad algebra description: {exc}") from exc


def _check_same_signature(*algebras: FiniteAlgebra) -> None:
    for B in algebras[1:]:
        if B.sig != algebras[0].sig:
            raise SignatureMismatch("algebras are over different signatures")


def _tuples(n: int, k: int):
    return itertools.product(range(n), repeat=k)


@dataclass(frozen=True)
class Homomorphism:
    dom: FiniteAlgebra
    cod: FiniteAlgebra
    map: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "map", tuple(self.map))
        if len(self.map) != self.dom.size or any(not 0 <= v < self.cod.size for v in self.map):
            raise MalformedInput("map is not a total function between the carriers")

    def __call__(self, a: int) -> int:
        return self.map[a]

    def then(self, other: "Homomorphism") -> "Homomorphism":
        """Composite ``other ∘ self``."""
        return Homomorphism(self.dom, other.cod, tuple(other.map[v] for v in self.map))

    def is_surjective(self) -> bool:
        return set(self.map) == set(range(self.cod.size))

    def is_injective(self) -> bool:
        return len(set(self.map)) == len(self.map)

    def is_valid(self) -> bool:
        return is_homomorphism(self.map, self.dom, self.cod)


def is_homomorphism(f: Sequence[int], A: FiniteAlgebra, B: FiniteAlgebra) -> bool:
    """True iff ``f`` commutes with every operation of A and B."""
    _check_same_signature(A, B)
    if len(f) != A.size:
        raise MalformedInput("map is not total on the domain")
    for (name, arity), ta, tb in zip(A.sig.symbols, A._tables, B._tables):
        for idx, args in enumerate(_tuples(A.size, arity)):
            j = 0
            for a in args:
                j = j * B.size + f[a]
            if f[ta[idx]] != tb[j]:
                return False
    return True


def identity(A: FiniteAlgebra) -> Homomorphism:
    return Homomorphism(A, A, tuple(A.carrier))


def trivial_algebra(sig: Signature) -> FiniteAlgebra:
    """The one-element algebra."""
    return FiniteAlgebra(sig, 1, {name: [0] for name in sig.names})


class Product(NamedTuple):
    algebra: FiniteAlgebra
    projections: list[Homomorphism]
    elements: list[tuple[int, ...]]


def product(algebras: Sequence[FiniteAlgebra], sig: Signature | None = None,
            max_size: int = DEFAULT_MAX_CARRIER) -> Product:
    """Direct product with pointwise operations.

    Element ``i`` of the product is ``elements[i]``; tuples are ordered
    lexicographically (first factor most significant).  The empty family needs
    ``sig`` and yields the one-element algebra.
    """
    algebras = list(algebras)
    if not algebras:
        if sig is None:
            raise ValueError("product of an empty family needs an explicit signature")
        return Product(trivial_algebra(sig), [], [()])
    _check_same_signature(*algebras)
    sig = algebras[0].sig
    size = 1
    for A in algebras:
        size *= A.size
    if size > max_size:
        raise SizeLimitExceeded(f"product would have {size} elements (limit {max_size})")
    elements = list(itertools.product(*(A.carrier for A in algebras)))
    index = {e: i for i, e in enumerate(elements)}
    tables = {}
    for name, arity in sig.symbols:
        table = []
        for args in _tuples(size, arity):
            comps = [elements[a] for a in args]
            table.append(index[tuple(
                A.apply(name, [c[j] for c in comps]) for j, A in enumerate(algebras)
            )])
        tables[name] = table
    P = FiniteAlgebra(sig, size, tables)
    projections = [
        Homomorphism(P, A, tuple(e[j] for e in elements)) for j, A in enumerate(algebras)
    ]
    return Product(P, projections, elements)


def power(A: FiniteAlgebra, k: int, max_size: int = DEFAULT_MAX_CARRIER) -> Product:
    return product([A] * k, sig=A.sig, max_size=max_size)


class Subalgebra(NamedTuple):
    algebra: FiniteAlgebra
    inclusion: Homomorphism
    elements: tuple[int, ...]


def closure(A: FiniteAlgebra, S: Iterable[int]) -> set[int]:
    """Least subset of A containing S and closed under all operations."""
    found = set(S)
    if any(not 0 <= a < A.size for a in found):
        raise MalformedInput("generator outside the carrier")
    frontier = True
    while frontier:
        frontier = False
        elems = sorted(found)
        for name, arity in A.sig.symbols:
            for args in itertools.product(elems, repeat=arity):
                v = A.apply(name, args)
                if v not in found:
                    found.add(v)
                    frontier = True
    return found


def restrict(A: FiniteAlgebra, elements: Sequence[int]) -> Subalgebra:
    """The subalgebra on a closed subset (re-indexed in increasing order)."""
    elements = tuple(sorted(elements))
    pos = {a: i for i, a in enumerate(elements)}
    m = len(elements)
    tables = {}
    for name, arity in A.sig.symbols:
        table = []
        for args in _tuples(m, arity):
            v = A.apply(name, [elements[i] for i in args])
            if v not in pos:
                raise MalformedInput("subset is not closed under the operations")
            table.append(pos[v])
        tables[name] = table
    S = FiniteAlgebra(A.sig, m, tables)
    return Subalgebra(S, Homomorphism(S, A, elements), elements)


def subalgebra_generated(A: FiniteAlgebra, S: Iterable[int]) -> Subalgebra:
    return restrict(A, closure(A, S))


class Congruence:
    """A congruence, stored as the least representative of each element's block."""

    __slots__ = ("over", "labels")

    def __init__(self, over: FiniteAlgebra, labels: Sequence[int]):
        labels = tuple(labels)
        if len(labels) != over.size:
            raise MalformedInput("congruence labels must cover the carrier")
        object.__setattr__(self, "over", over)
        object.__setattr__(self, "labels", _canonical(labels))

    def __setattr__(self, key, value):
        raise AttributeError("Congruence is immutable")

    @classmethod
    def from_blocks(cls, over: FiniteAlgebra, blocks: Iterable[Iterable[int]]) -> "Congruence":
        labels = [None] * over.size
        for block in blocks:
            block = list(block)
            for a in block:
                if labels[a] is not None:
                    raise MalformedInput(f"element {a} in two blocks")
                labels[a] = block[0]
        if None in labels:
            raise MalformedInput("blocks do not cover the carrier")
        return cls(over, labels)

    @classmethod
    def diagonal(cls, A: FiniteAlgebra) -> "Congruence":
        return cls(A, range(A.size))

    @classmethod
    def total(cls, A: FiniteAlgebra) -> "Congruence":
        return cls(A, [0] * A.size)

    def related(self, a: int, b: int) -> bool:
        return self.labels[a] == self.labels[b]

    def blocks(self) -> list[tuple[int, ...]]:
        out: dict[int, list[int]] = {}
        for a, r in enumerate(self.labels):
            out.setdefault(r, []).append(a)
        return [tuple(out[r]) for r in sorted(out)]

    @property
    def num_blocks(self) -> int:
        return len(set(self.labels))

    def pairs(self) -> list[tuple[int, int]]:
        return [(a, b) for a in range(len(self.labels)) for b in range(len(self.labels))
                if self.labels[a] == self.labels[b]]

    def __le__(self, other: "Congruence") -> bool:
        """Refinement: every block of self lies inside a block of other."""
        return all(other.labels[a] == other.labels[r] for a, r in enumerate(self.labels))

    def __eq__(self, other):
        return isinstance(other, Congruence) and self.over == other.over and self.labels == other.labels

    def __hash__(self):
        return hash(self.labels)

    def __repr__(self):
        return f"Congruence({self.blocks()})"

    def join(self, other: "Congruence") -> "Congruence":
        uf = UnionFind(len(self.labels))
        for a in range(len(self.labels)):
            uf.union(a, self.labels[a])
            uf.union(a, other.labels[a])
        return Congruence(self.over, uf.labels())

    def meet(self, other: "Congruence") -> "Congruence":
        firsts: dict[tuple[int, int], int] = {}
        return Congruence(self.over, [
            firsts.setdefault((r, s), a) for a, (r, s) in enumerate(zip(self.labels, other.labels))
        ])


def _canonical(labels: Sequence[int]) -> tuple[int, ...]:
    first: dict[int, int] = {}
    return tuple(first.setdefault(l, a) for a, l in enumerate(labels))


def is_congruence(A: FiniteAlgebra, labels: Sequence[int]) -> bool:
    """Whether the partition given by ``labels`` is compatible with every operation."""
    labels = _canonical(labels)
    n = A.size
    for name, arity in A.sig.symbols:
        table = A.table(name)
        seen: dict[tuple[int, ...], int] = {}
        for idx, args in enumerate(_tuples(n, arity)):
            key = tuple(labels[a] for a in args)
            v = labels[table[idx]]
            if seen.setdefault(key, v) != v:
                return False
    return True


def _translation_images(A: FiniteAlgebra, a: int, b: int):
    """Pairs (σ(..a..), σ(..b..)) obtained by placing a / b at one argument position."""
    n = A.size
    for name, arity in A.sig.symbols:
        table = A.table(name)
        for pos in range(arity):
            weight = n ** (arity - 1 - pos)
            for rest in _tuples(n, arity - 1):
                base = 0
                for j, r in enumerate(rest):
                    p = j if j < pos else j + 1
                    base += r * n ** (arity - 1 - p)
                yield table[base + a * weight], table[base + b * weight]


def congruence_generated(A: FiniteAlgebra, pairs: Iterable[tuple[int, int]],
                         max_size: int = DEFAULT_MAX_CARRIER) -> Congruence:
    """Least congruence of A containing ``pairs``.

    Each newly merged pair is pushed through every one-position translation
    ``σ(c_1, .., _, .., c_k)``; the fixpoint is compatible with all operations
    because compatibility with translations implies compatibility with full
    tuples by transitivity.
    """
    if A.size > max_size:
        raise SizeLimitExceeded(f"carrier of size {A.size} exceeds limit {max_size}")
    uf = UnionFind(A.size)
    work = []
    for a, b in pairs:
        if not (0 <= a < A.size and 0 <= b < A.size):
            raise MalformedInput(f"pair {(a, b)} outside the carrier")
        if uf.union(a, b):
            work.append((a, b))
    while work:
        a, b = work.pop()
        for u, v in _translation_images(A, a, b):
            if uf.union(u, v):
                work.append((u, v))
    return Congruence(A, uf.labels())


class Quotient(NamedTuple):
    algebra: FiniteAlgebra
    surjection: Homomorphism


def quotient(A: FiniteAlgebra, theta: Congruence) -> Quotient:
    """A/θ with blocks numbered in order of their least element."""
    if theta.over.size != A.size:
        raise NotACongruence("congruence is over a different algebra")
    if not is_congruence(A, theta.labels):
        raise NotACongruence(f"{theta!r} is not compatible with the operations")
    reps = sorted(set(theta.labels))
    block_of = {r: i for i, r in enumerate(reps)}
    m = len(reps)
    tables = {}
    for name, arity in A.sig.symbols:
        tables[name] = [
            block_of[theta.labels[A.apply(name, [reps[i] for i in args])]]
            for args in _tuples(m, arity)
        ]
    Q = FiniteAlgebra(A.sig, m, tables)
    return Quotient(Q, Homomorphism(A, Q, tuple(block_of[r] for r in theta.labels)))


def kernel(e: Homomorphism) -> Congruence:
    return Congruence(e.dom, e.map)


def all_congruences(A: FiniteAlgebra, max_size: int = DEFAULT_MAX_LATTICE) -> list[Congruence]:
    """Every congruence of A, finest first.

    Computed as the closure of the diagonal under joins with principal
    congruences.  Sorted by decreasing number of blocks, which extends the
    refinement order.
    """
    if A.size > max_size:
        raise SizeLimitExceeded(f"carrier of size {A.size} exceeds lattice limit {max_size}")
    principal = {congruence_generated(A, [(a, b)])
                 for a in range(A.size) for b in range(a + 1, A.size)}
    principal = sorted(principal, key=lambda c: c.labels)
    found = {Congruence.diagonal(A)}
    frontier = list(found)
    while frontier:
        nxt = []
        for theta in frontier:
            for pi in principal:
                j = theta.join(pi)
                if j not in found:
                    found.add(j)
                    nxt.append(j)
        frontier = nxt
    return sorted(found, key=lambda c: (-c.num_blocks, c.labels))


def factor_through(e: Homomorphism, h: Homomorphism) -> Homomorphism | None:
    """The homomorphism g with g ∘ e = h, if it exists (e must be surjective)."""
    if not e.is_surjective():
        raise ValueError("factor_through needs a surjective e")
    g: dict[int, int] = {}
    for a, b in enumerate(e.map):
        if g.setdefault(b, h.map[a]) != h.map[a]:
            return None
    return Homomorphism(e.cod, h.cod, tuple(g[b] for b in range(e.cod.size)))


def _invariants(A: FiniteAlgebra) -> list[tuple]:
    inv = [[] for _ in A.carrier]
    for name, arity in A.sig.symbols:
        table = A.table(name)
        counts = [0] * A.size
        for v in table:
            counts[v] += 1
        diag = [None] * A.size
        if arity > 0:
            for a in A.carrier:
                diag[a] = table[sum(a * A.size**i for i in range(arity))] == a
        for a in A.carrier:
            inv[a].append((counts[a], diag[a]))
    return [tuple(x) for x in inv]


def find_isomorphism(A: FiniteAlgebra, B: FiniteAlgebra) -> Homomorphism | None:
    """Backtracking search for an isomorphism A -> B, pruned by element invariants."""
    if A.sig != B.sig or A.size != B.size:
        return None
    ia, ib = _invariants(A), _invariants(B)
    if sorted(ia) != sorted(ib):
        return None
    n = A.size
    order = sorted(A.carrier, key=lambda a: ia[a])
    f = [-1] * n
    used = [False] * n
    ops = [(A.table(name), B.table(name), arity) for name, arity in A.sig.symbols]

    def consistent() -> bool:
        for ta, tb, arity in ops:
            for idx, args in enumerate(_tuples(n, arity)):
                if any(f[a] < 0 for a in args) or f[ta[idx]] < 0:
                    continue
                j = 0
                for a in args:
                    j = j * n + f[a]
                if tb[j] != f[ta[idx]]:
                    return False
        return True

    def search(k: int) -> bool:
        if k == n:
            return True
        a = order[k]
        for b in range(n):
            if not used[b] and ib[b] == ia[a]:
                f[a], used[b] = b, True
                if consistent() and search(k + 1):
                    return True
                f[a], used[b] = -1, False
        return False

    if search(0):
        return Homomorphism(A, B, tuple(f))
    return None


def is_isomorphic(A: FiniteAlgebra, B: FiniteAlgebra) -> bool:
    return find_isomorphism(A, B) is not None
