"""Quantitative algebras over exact extended rationals.

Distances are :class:`fractions.Fraction` values or ``math.inf``.  Sums and
comparisons involving ``inf`` behave as in the extended reals, and no other
float ever enters a computation, so fixpoints are reached exactly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple, Sequence, Union

from .errors import (
    AlgebraError, MalformedInput, MalformedProof, NegativeEpsilon, NotACongruence, SizeLimitExceeded,
    UnknownVariable,
)
from .finalg import (
    DEFAULT_MAX_CARRIER, Congruence, FiniteAlgebra, Homomorphism, closure, is_congruence,
    product, quotient, restrict,
)
from .sigterm import (
    App, Signature, Term, Var, VarSet, check_term, count_terms, enumerate_terms, format_term,
    parse_term, substitute, symbols_used, variables,
)
from .eqlogic import match, normalize
from .variety import SatResult, all_assignments, term_values

INF = math.inf
OMEGA = math.inf  # the cardinal parameter "every finite size"

Ext = Union[Fraction, float]

DEFAULT_MAX_UNIVERSE = 2000
DEFAULT_MAX_SECTIONS = 1_000_000


def ext(value) -> Ext:
    """Parse an extended non-negative rational: ``"inf"``, ``"3/5"``, 2, Fraction."""
    if isinstance(value, float):
        if math.isinf(value) and value > 0:
            return INF
        raise MalformedInput(f"use exact rationals, not float {value!r}")
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity", "∞"):
        return INF
    try:
        q = Fraction(value)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise MalformedInput(f"not an extended rational: {value!r}") from exc
    if q < 0:
        raise NegativeEpsilon(f"negative distance {value!r}")
    return q


def format_ext(x: Ext) -> str:
    if x == INF:
        return "inf"
    return str(Fraction(x))


def parse_c(value) -> float | int:
    if isinstance(value, str) and value.strip().lower() in ("omega", "ω", "inf"):
        return OMEGA
    try:
        c = int(value)
    except (TypeError, ValueError) as exc:
        raise MalformedInput(f"bad cluster parameter {value!r}") from exc
    if c < 2:
        raise MalformedInput("the cluster parameter c must be at least 2")
    return c


def format_c(c) -> int | str:
    return "omega" if c == OMEGA else int(c)


Matrix = tuple[tuple[Ext, ...], ...]


def _freeze(m) -> Matrix:
    return tuple(tuple(INF if x == INF else Fraction(x) for x in row) for row in m)


def _is_pseudometric(m: Matrix) -> bool:
    n = len(m)
    for a in range(n):
        if m[a][a] != 0:
            return False
        for b in range(n):
            if m[a][b] != m[b][a] or m[a][b] < 0:
                return False
    for k in range(n):
        for a in range(n):
            for b in range(n):
                if m[a][b] > m[a][k] + m[k][b]:
                    return False
    return True


@dataclass(frozen=True)
class ExtMetric:
    size: int
    d: Matrix

    def __post_init__(self):
        d = _freeze(self.d)
        object.__setattr__(self, "d", d)
        if len(d) != self.size or any(len(row) != self.size for row in d):
            raise MalformedInput("distance matrix has the wrong shape")
        if not _is_pseudometric(d):
            raise MalformedInput("distance matrix is not a pseudometric")
        if any(d[a][b] == 0 for a in range(self.size) for b in range(self.size) if a != b):
            raise MalformedInput("distinct points at distance 0")

    @classmethod
    def discrete(cls, n: int) -> "ExtMetric":
        return cls(n, [[0 if a == b else INF for b in range(n)] for a in range(n)])

    def __call__(self, a: int, b: int) -> Ext:
        return self.d[a][b]

    def to_json(self) -> dict:
        return {"size": self.size, "d": [[format_ext(x) for x in row] for row in self.d]}

    @classmethod
    def from_json(cls, data: Mapping) -> "ExtMetric":
        try:
            n = int(data["size"])
            return cls(n, _read_matrix(data["d"], n))
        except (KeyError, TypeError) as exc:
            raise MalformedInput(f"bad metric description: {exc}") from exc


def _read_matrix(rows, n: int) -> list[list[Ext]]:
    """Full rows (``None`` allowed below the diagonal) or upper-triangular rows."""
    if len(rows) != n:
        raise MalformedInput(f"expected {n} rows of distances")
    m: list[list[Ext | None]] = [[None] * n for _ in range(n)]
    for i, row in enumerate(rows):
        if len(row) == n:
            cells = enumerate(row)
        elif len(row) == n - i:
            cells = ((i + k, v) for k, v in enumerate(row))
        else:
            raise MalformedInput(f"row {i} has {len(row)} entries")
        for j, v in cells:
            if v is not None:
                m[i][j] = ext(v)
    for i in range(n):
        for j in range(n):
            if m[i][j] is None:
                m[i][j] = m[j][i] if m[j][i] is not None else (0 if i == j else None)
            elif m[j][i] is not None and m[j][i] != m[i][j]:
                raise MalformedInput(f"asymmetric distances at {(i, j)}")
            if m[i][j] is None:
                raise MalformedInput(f"missing distance at {(i, j)}")
    return m


def _tuple_pairs(n: int, arity: int):
    tuples = list(itertools.product(range(n), repeat=arity))
    return tuples


def _nonexpansive(A: FiniteAlgebra, m: Matrix) -> bool:
    n = A.size
    for name, arity in A.sig.symbols:
        table = A.table(name)
        tuples = _tuple_pairs(n, arity)
        for i, s in enumerate(tuples):
            for j in range(i + 1, len(tuples)):
                t = tuples[j]
                bound = max((m[a][b] for a, b in zip(s, t)), default=0)
                if m[table[i]][table[j]] > bound:
                    return False
    return True


class QuantAlgebra:
    """A finite algebra on an extended metric space with nonexpansive operations."""

    __slots__ = ("base", "metric")

    def __init__(self, base: FiniteAlgebra, metric: ExtMetric | Sequence[Sequence]):
        if not isinstance(metric, ExtMetric):
            metric = ExtMetric(base.size, metric)
        if metric.size != base.size:
            raise MalformedInput("metric and algebra sizes differ")
        if not _nonexpansive(base, metric.d):
            raise MalformedInput("operations are not nonexpansive")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "metric", metric)

    def __setattr__(self, key, value):
        raise AttributeError("QuantAlgebra is immutable")

    @property
    def sig(self) -> Signature:
        return self.base.sig

    @property
    def size(self) -> int:
        return self.base.size

    @property
    def d(self) -> Matrix:
        return self.metric.d

    def __eq__(self, other):
        return isinstance(other, QuantAlgebra) and self.base == other.base and self.metric == other.metric

    def __hash__(self):
        return hash((self.base, self.metric.d))

    def __repr__(self):
        return f"QuantAlgebra(size={self.size}, sig={list(self.sig.names)})"

    def to_json(self) -> dict:
        data = self.base.to_json()
        data["d"] = self.metric.to_json()["d"]
        return data

    @classmethod
    def from_json(cls, data: Mapping) -> "QuantAlgebra":
        base = FiniteAlgebra.from_json(data)
        if "d" not in data:
            raise MalformedInput("quantitative algebra needs a distance matrix 'd'")
        return cls(base, ExtMetric(base.size, _read_matrix(data["d"], base.size)))


@dataclass(frozen=True)
class QuantCongruence:
    over: QuantAlgebra
    p: Matrix

    def __post_init__(self):
        object.__setattr__(self, "p", _freeze(self.p))

    def violations(self) -> list[str]:
        A, p = self.over, self.p
        out = []
        if len(p) != A.size:
            return ["wrong shape"]
        if not _is_pseudometric(p):
            out.append("not a pseudometric")
        if any(p[a][b] > A.d[a][b] for a in range(A.size) for b in range(A.size)):
            out.append("exceeds the metric of the algebra")
        if not _nonexpansive(A.base, p):
            out.append("operations are not nonexpansive")
        return out

    def is_valid(self) -> bool:
        return not self.violations()

    def __le__(self, other: "QuantCongruence") -> bool:
        n = len(self.p)
        return all(self.p[a][b] <= other.p[a][b] for a in range(n) for b in range(n))


# --- the tightening solver ----------------------------------------------------

class _Solver:
    """Largest pseudometric below ``init`` that is nonexpansive for the given facts.

    ``facts`` lists operation applications ``(symbol, args, result)``.  With
    ``trace=True`` every improvement of an entry is recorded together with the
    rule instance that caused it, referring to the exact versions of the
    entries it used.
    """

    def __init__(self, n, init, init_why, facts, trace=False):
        self.n = n
        self.p = [list(row) for row in init]
        self.trace = trace
        # history[(a, b)] for a < b: list of (value, justification)
        self.history: dict[tuple[int, int], list] = {}
        if trace:
            for a in range(n):
                for b in range(a + 1, n):
                    self.history[(a, b)] = [(self.p[a][b], init_why[a][b])]
        by_symbol: dict[str, list] = {}
        for sym, args, res in facts:
            by_symbol.setdefault(sym, []).append((args, res))
        self.pairs = []
        for sym, fs in by_symbol.items():
            for i in range(len(fs)):
                for j in range(i + 1, len(fs)):
                    if fs[i][1] != fs[j][1]:
                        self.pairs.append((sym, fs[i], fs[j]))

    def version(self, a, b):
        if a == b:
            return 0
        key = (a, b) if a < b else (b, a)
        return len(self.history[key]) - 1

    def _set(self, a, b, value, why):
        self.p[a][b] = self.p[b][a] = value
        if self.trace:
            key = (a, b) if a < b else (b, a)
            self.history[key].append((value, why))

    def floyd_warshall(self) -> bool:
        p, n = self.p, self.n
        changed = False
        for k in range(n):
            pk = p[k]
            for i in range(n):
                pik = p[i][k]
                if pik == INF or i == k:
                    continue
                pi = p[i]
                for j in range(i + 1, n):
                    if j == k:
                        continue
                    via = pik + pk[j]
                    if via < pi[j]:
                        why = None
                        if self.trace:
                            why = ("triang", i, k, j, self.version(i, k), self.version(k, j))
                        self._set(i, j, via, why)
                        changed = True
        return changed

    def tighten_ops(self) -> bool:
        p = self.p
        changed = False
        for sym, (args1, r1), (args2, r2) in self.pairs:
            bound = max((p[a][b] for a, b in zip(args1, args2)), default=0)
            if bound < p[r1][r2]:
                why = None
                if self.trace:
                    why = ("cong", sym, args1, args2, r1, r2,
                           tuple(self.version(a, b) for a, b in zip(args1, args2)))
                self._set(r1, r2, bound, why)
                changed = True
        return changed

    def run(self):
        while True:
            a = self.floyd_warshall()
            b = self.tighten_ops()
            if not (a or b):
                return self.p


def _algebra_facts(A: FiniteAlgebra):
    for name, arity in A.sig.symbols:
        table = A.table(name)
        for idx, args in enumerate(itertools.product(range(A.size), repeat=arity)):
            yield name, args, table[idx]


def quant_congruence_generated(A: QuantAlgebra, constraints: Iterable[tuple[int, int, object]]) -> QuantCongruence:
    """Largest congruence p on A with p(a, b) <= ε for every constraint (a, b, ε).

    Starts from the pointwise minimum of the metric and the constraints, then
    alternates a full Floyd-Warshall pass with one sweep of operation
    tightening until nothing changes.
    """
    n = A.size
    init = [list(row) for row in A.d]
    for a, b, eps in constraints:
        eps = ext(eps)
        if not (0 <= a < n and 0 <= b < n):
            raise MalformedInput(f"constraint {(a, b)} outside the carrier")
        if a != b and eps < init[a][b]:
            init[a][b] = init[b][a] = eps
    p = _Solver(n, init, None, _algebra_facts(A.base)).run()
    return QuantCongruence(A, p)


class QuantHomomorphism(NamedTuple):
    dom: QuantAlgebra
    cod: QuantAlgebra
    map: tuple[int, ...]

    def is_nonexpansive(self) -> bool:
        d, e, f = self.dom.d, self.cod.d, self.map
        return all(e[f[a]][f[b]] <= d[a][b] for a in range(self.dom.size) for b in range(self.dom.size))

    def is_surjective(self) -> bool:
        return set(self.map) == set(range(self.cod.size))

    def is_homomorphism(self) -> bool:
        return Homomorphism(self.dom.base, self.cod.base, self.map).is_valid()

    def induced(self) -> Matrix:
        """The congruence p_e(a, a') = d(e(a), e(a'))."""
        e, f = self.cod.d, self.map
        return tuple(tuple(e[f[a]][f[b]] for b in range(self.dom.size)) for a in range(self.dom.size))


class QuantQuotient(NamedTuple):
    algebra: QuantAlgebra
    surjection: QuantHomomorphism


def quotient_quant(A: QuantAlgebra, p: QuantCongruence) -> QuantQuotient:
    """Quotient identifying points at p-distance 0, with metric d([a], [a']) = p(a, a')."""
    problems = p.violations() if len(p.p) == A.size else ["wrong shape"]
    if problems:
        raise NotACongruence("; ".join(problems))
    n = A.size
    labels = [next(b for b in range(n) if p.p[a][b] == 0) for a in range(n)]
    theta = Congruence(A.base, labels)
    if not is_congruence(A.base, theta.labels):
        raise NotACongruence("zero-distance relation is not compatible with the operations")
    q = quotient(A.base, theta)
    reps = sorted(set(theta.labels))
    m = len(reps)
    metric = ExtMetric(m, [[p.p[reps[i]][reps[j]] for j in range(m)] for i in range(m)])
    Q = QuantAlgebra(q.algebra, metric)
    return QuantQuotient(Q, QuantHomomorphism(A, Q, q.surjection.map))


# --- c-reflexivity ------------------------------------------------------------

@dataclass(frozen=True)
class ReflexivityResult:
    holds: bool
    failing_subset: tuple[int, ...] | None = None

    def __bool__(self):
        return self.holds


def is_c_reflexive(e: QuantHomomorphism, c, max_steps: int = DEFAULT_MAX_SECTIONS) -> ReflexivityResult:
    """Every subset of the codomain of size < c has an isometric section.

    Sections of an isometric section are isometric, so only subsets of size
    ``min(c - 1, |B|)`` need checking.
    """
    if not isinstance(c, (int, float)):
        c = parse_c(c)
    if c < 2:
        raise MalformedInput("c must be at least 2")
    if not e.is_surjective():
        raise MalformedInput("map is not surjective")
    if not e.is_nonexpansive():
        raise MalformedInput("map is not nonexpansive")
    dA, dB = e.dom.d, e.cod.d
    fibers = [[a for a in range(e.dom.size) if e.map[a] == b] for b in range(e.cod.size)]
    k = e.cod.size if c == OMEGA else min(int(c) - 1, e.cod.size)
    steps = 0

    def section(subset) -> bool:
        nonlocal steps
        chosen: list[int] = []

        def go(i):
            nonlocal steps
            if i == len(subset):
                return True
            b = subset[i]
            for a in fibers[b]:
                steps += 1
                if steps > max_steps:
                    raise SizeLimitExceeded(f"section search exceeded {max_steps} steps")
                if all(dA[a][a2] == dB[b][b2] for a2, b2 in zip(chosen, subset)):
                    chosen.append(a)
                    if go(i + 1):
                        return True
                    chosen.pop()
            return False

        return go(0)

    for subset in itertools.combinations(range(e.cod.size), k):
        if not section(subset):
            return ReflexivityResult(False, subset)
    return ReflexivityResult(True)


# --- clustered equations --------------------------------------------------------

@dataclass(frozen=True)
class ClusteredEquation:
    """Conditions x_i =_{ε_i} y_i (within clusters) entail lhs =_ε rhs."""

    vars: VarSet
    clusters: tuple[tuple[int, ...], ...]
    conditions: tuple[tuple[int, int, Ext], ...]
    lhs: Term
    rhs: Term
    eps: Ext
    c: float | int = 2

    def __post_init__(self):
        n = len(self.vars)
        clusters = tuple(tuple(cl) for cl in self.clusters)
        flat = sorted(x for cl in clusters for x in cl)
        if flat != list(range(n)):
            raise MalformedInput("clusters must partition the variables")
        if any(len(cl) >= self.c for cl in clusters):
            raise MalformedInput(f"a cluster has size >= c = {format_c(self.c)}")
        cluster_of = {x: i for i, cl in enumerate(clusters) for x in cl}
        conds = tuple((int(x), int(y), ext(eps)) for x, y, eps in self.conditions)
        for x, y, _ in conds:
            if x >= n or y >= n:
                raise UnknownVariable("condition mentions an unknown variable")
            if cluster_of[x] != cluster_of[y]:
                raise MalformedInput("condition relates variables from different clusters")
        if any(i >= n for t in (self.lhs, self.rhs) for i in variables(t)):
            raise UnknownVariable("conclusion mentions an unknown variable")
        object.__setattr__(self, "clusters", clusters)
        object.__setattr__(self, "conditions", conds)
        object.__setattr__(self, "eps", ext(self.eps))

    @classmethod
    def unconditional(cls, X: VarSet, lhs: Term, rhs: Term, eps) -> "ClusteredEquation":
        return cls(X, tuple((i,) for i in range(len(X))), (), lhs, rhs, eps, 2)

    def __str__(self):
        names = self.vars.names
        conds = ", ".join(f"{names[x]} =_{format_ext(e)} {names[y]}" for x, y, e in self.conditions)
        return (f"{conds} |- {format_term(self.lhs, self.vars)} "
                f"=_{format_ext(self.eps)} {format_term(self.rhs, self.vars)}")

    def to_json(self) -> dict:
        names = self.vars.names
        return {
            "vars": list(names),
            "clusters": [[names[x] for x in cl] for cl in self.clusters],
            "conditions": [[names[x], names[y], format_ext(e)] for x, y, e in self.conditions],
            "conclusion": [format_term(self.lhs, self.vars), format_term(self.rhs, self.vars),
                           format_ext(self.eps)],
            "c": format_c(self.c),
        }

    @classmethod
    def from_json(cls, data: Mapping, sig: Signature | None = None) -> "ClusteredEquation":
        try:
            X = VarSet(tuple(data["vars"]))
            clusters = data.get("clusters")
            if clusters is None:
                clusters = [[x] for x in X.names]
            conds = [(X.index(x), X.index(y), eps) for x, y, eps in data.get("conditions", [])]
            s, t, eps = data["conclusion"]
            c = parse_c(data.get("c", 2))
            return cls(X, tuple(tuple(X.index(x) for x in cl) for cl in clusters), tuple(conds),
                       parse_term(s, X, sig), parse_term(t, X, sig), eps, c)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, AlgebraError):
                raise
            raise MalformedInput(f"bad clustered equation: {exc}") from exc


def satisfies_clustered_equation(A: QuantAlgebra, eq: ClusteredEquation) -> SatResult:
    """Every assignment meeting the conditions keeps lhs and rhs within ε."""
    for t in (eq.lhs, eq.rhs):
        check_term(t, A.sig, len(eq.vars))
    if A.size == 0 or eq.eps == INF:
        return SatResult(True)
    d = A.d
    hs = [h for h in all_assignments(A.size, len(eq.vars))
          if all(d[h[x]][h[y]] <= eps for x, y, eps in eq.conditions)]
    cache: dict = {}
    lv = term_values(eq.lhs, A.base, hs, cache)
    rv = term_values(eq.rhs, A.base, hs, cache)
    for h, a, b in zip(hs, lv, rv):
        if d[a][b] > eq.eps:
            return SatResult(False, h)
    return SatResult(True)


# --- products and subalgebras -------------------------------------------------

def quant_product(algebras: Sequence[QuantAlgebra], max_size: int = DEFAULT_MAX_CARRIER):
    """Product with the sup metric; returns (algebra, element tuples)."""
    P = product([A.base for A in algebras], sig=algebras[0].sig if algebras else None,
                max_size=max_size)
    els = P.elements
    d = [[max((A.d[x][y] for A, x, y in zip(algebras, s, t)), default=Fraction(0))
          for t in els] for s in els]
    return QuantAlgebra(P.algebra, d), els


def quant_subalgebra(A: QuantAlgebra, S: Iterable[int]):
    """Subalgebra generated by S with the restricted metric; returns (algebra, elements)."""
    sub = restrict(A.base, closure(A.base, S))
    els = sub.elements
    return QuantAlgebra(sub.algebra, [[A.d[a][b] for b in els] for a in els]), els


# --- quantitative equational logic ---------------------------------------------

@dataclass(frozen=True)
class QuantEquation:
    """Unconditional equation lhs =_ε rhs."""

    vars: VarSet
    lhs: Term
    rhs: Term
    eps: Ext

    def __post_init__(self):
        object.__setattr__(self, "eps", ext(self.eps))
        n = len(self.vars)
        if any(i >= n for t in (self.lhs, self.rhs) for i in variables(t)):
            raise UnknownVariable("equation mentions a variable outside its variable set")

    def __str__(self):
        return (f"{format_term(self.lhs, self.vars)} =_{format_ext(self.eps)} "
                f"{format_term(self.rhs, self.vars)}")

    def as_clustered(self) -> ClusteredEquation:
        return ClusteredEquation.unconditional(self.vars, self.lhs, self.rhs, self.eps)

    def to_json(self) -> dict:
        return {"vars": list(self.vars.names), "lhs": format_term(self.lhs, self.vars),
                "rhs": format_term(self.rhs, self.vars), "eps": format_ext(self.eps)}

    @classmethod
    def from_json(cls, data: Mapping, sig: Signature | None = None) -> "QuantEquation":
        try:
            X = VarSet(tuple(data["vars"]))
            if "conclusion" in data:
                if data.get("conditions"):
                    raise MalformedInput("an unconditional equation cannot carry conditions")
                s, t, eps = data["conclusion"]
            else:
                s, t, eps = data["lhs"], data["rhs"], data["eps"]
            return cls(X, parse_term(s, X, sig), parse_term(t, X, sig), eps)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, AlgebraError):
                raise
            raise MalformedInput(f"bad quantitative equation: {exc}") from exc

    @classmethod
    def parse(cls, vars: Sequence[str], lhs: str, rhs: str, eps, sig: Signature | None = None):
        X = VarSet(tuple(vars))
        return cls(X, parse_term(lhs, X, sig), parse_term(rhs, X, sig), eps)


QUANT_RULES = ("Refl", "Sym", "Triang", "Max", "Arch", "Cong", "Subst", "Axiom")


@dataclass(frozen=True, eq=False)
class QuantProof:
    rule: str
    conclusion: QuantEquation
    children: tuple["QuantProof", ...] = ()
    symbol: str | None = None
    substitution: tuple[tuple[int, Term], ...] | None = None
    axiom: int | None = None

    def size(self) -> int:
        seen: dict[int, int] = {}

        def go(p):
            if id(p) not in seen:
                seen[id(p)] = 1 + sum(go(c) for c in p.children)
            return seen[id(p)]

        return go(self)

    def rules_used(self) -> set[str]:
        out, stack, seen = set(), [self], set()
        while stack:
            p = stack.pop()
            if id(p) in seen:
                continue
            seen.add(id(p))
            out.add(p.rule)
            stack.extend(p.children)
        return out

    def to_json(self) -> dict:
        node: dict = {"rule": self.rule, "conclusion": self.conclusion.to_json()}
        if self.symbol is not None:
            node["symbol"] = self.symbol
        if self.substitution is not None:
            premise_vars = self.children[0].conclusion.vars
            node["substitution"] = {premise_vars.names[i]: format_term(t, self.conclusion.vars)
                                    for i, t in self.substitution}
        if self.axiom is not None:
            node["axiom"] = self.axiom
        node["children"] = [c.to_json() for c in self.children]
        return node

    @classmethod
    def from_json(cls, data: Mapping, sig: Signature | None = None, _path=()) -> "QuantProof":
        try:
            rule = data["rule"]
            conclusion = QuantEquation.from_json(data["conclusion"], sig)
            kids = data.get("children", [])
            if not isinstance(kids, list):
                raise MalformedInput("children must be a list")
        except (KeyError, TypeError, AttributeError, ValueError) as exc:
            raise MalformedProof(f"bad proof node: {exc}", _path) from exc
        children = tuple(cls.from_json(c, sig, _path + (i,)) for i, c in enumerate(kids))
        sub = None
        try:
            if "substitution" in data:
                if len(children) != 1:
                    raise MalformedInput("Subst node needs exactly one child")
                pv = children[0].conclusion.vars
                sub = tuple(sorted((pv.index(k), parse_term(v, conclusion.vars, sig))
                                   for k, v in data["substitution"].items()))
        except (KeyError, TypeError, AttributeError, ValueError) as exc:
            raise MalformedProof(f"bad substitution: {exc}", _path) from exc
        return cls(rule, conclusion, children, data.get("symbol"), sub, data.get("axiom"))


def check_quant_proof(p: QuantProof, gamma: Sequence[QuantEquation],
                      sig: Signature | None = None) -> bool:
    """Node-by-node validation of a quantitative derivation.

    (Arch) is read at finite scale: it is accepted from one premise proving the
    same pair at some ε' <= ε, or with no premise when ε = ∞ (the premise set
    {s =_ε' t : ε' > ∞} is empty).
    """
    normal_gamma = [(normalize(g.lhs, g.rhs), g.eps) for g in gamma]
    memo: dict[int, bool] = {}

    def ok(node, path):
        if id(node) not in memo:
            here = local(node, path)
            below = [ok(c, path + (i,)) for i, c in enumerate(node.children)]
            memo[id(node)] = here and all(below)
        return memo[id(node)]

    def need(node, n, path):
        if len(node.children) != n:
            raise MalformedProof(f"{node.rule} needs {n} premise(s), got {len(node.children)}", path)

    def local(node, path) -> bool:
        c = node.conclusion
        ks = [k.conclusion for k in node.children]
        rule = node.rule
        if rule not in QUANT_RULES:
            raise MalformedProof(f"unknown rule {rule!r}", path)
        if rule == "Refl":
            need(node, 0, path)
            return c.lhs == c.rhs and c.eps == 0
        if rule == "Sym":
            need(node, 1, path)
            k = ks[0]
            return k.vars == c.vars and k.lhs == c.rhs and k.rhs == c.lhs and k.eps == c.eps
        if rule == "Triang":
            need(node, 2, path)
            k1, k2 = ks
            return (k1.vars == c.vars == k2.vars and k1.lhs == c.lhs and k1.rhs == k2.lhs
                    and k2.rhs == c.rhs and c.eps == k1.eps + k2.eps)
        if rule == "Max":
            need(node, 1, path)
            k = ks[0]
            return k.vars == c.vars and k.lhs == c.lhs and k.rhs == c.rhs and c.eps > k.eps
        if rule == "Arch":
            if not node.children:
                return c.eps == INF
            need(node, 1, path)
            k = ks[0]
            return k.vars == c.vars and k.lhs == c.lhs and k.rhs == c.rhs and k.eps <= c.eps
        if rule == "Cong":
            if node.symbol is None:
                raise MalformedProof("Cong node without a symbol", path)
            if sig is not None and node.symbol in sig:
                need(node, sig.arity(node.symbol), path)
            if not (isinstance(c.lhs, App) and isinstance(c.rhs, App)):
                return False
            if c.lhs.symbol != node.symbol or c.rhs.symbol != node.symbol:
                return False
            need(node, len(c.lhs.args), path)
            if len(c.rhs.args) != len(ks):
                return False
            return all(k.vars == c.vars and k.lhs == s and k.rhs == t and k.eps == c.eps
                       for k, s, t in zip(ks, c.lhs.args, c.rhs.args))
        if rule == "Subst":
            need(node, 1, path)
            if node.substitution is None:
                raise MalformedProof("Subst node without a substitution", path)
            sub = dict(node.substitution)
            k = ks[0]
            try:
                return (substitute(k.lhs, sub) == c.lhs and substitute(k.rhs, sub) == c.rhs
                        and k.eps == c.eps)
            except UnknownVariable:
                return False
        need(node, 0, path)
        if node.axiom is None or not 0 <= node.axiom < len(gamma):
            raise MalformedProof(f"axiom index {node.axiom!r} out of range", path)
        return (normalize(c.lhs, c.rhs), c.eps) == normal_gamma[node.axiom]

    return ok(p, ())


@dataclass(frozen=True)
class QuantVerdict:
    """``proved`` (with proof), ``bound`` (best ε found is too large) or ``unknown``."""

    status: str
    best: Ext = INF
    proof: QuantProof | None = None
    bounds: dict = field(default_factory=dict)
    countermodel: QuantAlgebra | None = None
    assignment: tuple[int, ...] | None = None

    @property
    def proved(self) -> bool:
        return self.status == "proved"


class _QuantExplainer:
    def __init__(self, solver: _Solver, terms, X, gamma):
        self.s = solver
        self.terms = terms
        self.X = X
        self.gamma = gamma
        self.memo: dict = {}

    def eq(self, a, b, eps) -> QuantEquation:
        return QuantEquation(self.X, self.terms[a], self.terms[b], eps)

    def prove(self, a: int, b: int, version: int) -> QuantProof:
        """Proof of terms[a] =_v terms[b] for the value v of the given version."""
        key = (a, b, version)
        if key in self.memo:
            return self.memo[key]
        if a == b:
            proof = QuantProof("Refl", self.eq(a, a, Fraction(0)))
        else:
            hkey = (a, b) if a < b else (b, a)
            value, why = self.s.history[hkey][version]
            proof, (u, v) = self._justify(value, why, hkey)
            if (u, v) != (a, b):
                proof = QuantProof("Sym", self.eq(a, b, value), (proof,))
        self.memo[key] = proof
        return proof

    def _raise_to(self, proof: QuantProof, eps) -> QuantProof:
        c = proof.conclusion
        if c.eps == eps:
            return proof
        return QuantProof("Max", QuantEquation(c.vars, c.lhs, c.rhs, eps), (proof,))

    def _justify(self, value, why, hkey):
        kind = why[0]
        if kind == "top":
            a, b = hkey
            return QuantProof("Arch", self.eq(a, b, INF)), (a, b)
        if kind == "axiom":
            _, gi, sub, l, r = why
            ax = QuantProof("Axiom", self.gamma[gi], axiom=gi)
            return QuantProof("Subst", self.eq(l, r, value), (ax,), substitution=sub), (l, r)
        if kind == "triang":
            _, i, k, j, v1, v2 = why
            left = self.prove(i, k, v1)
            right = self.prove(k, j, v2)
            return QuantProof("Triang", self.eq(i, j, value), (left, right)), (i, j)
        _, sym, args1, args2, r1, r2, versions = why
        kids = tuple(self._raise_to(self.prove(x, y, ver), value)
                     for x, y, ver in zip(args1, args2, versions))
        return QuantProof("Cong", self.eq(r1, r2, value), kids, symbol=sym), (r1, r2)


def quant_entails(gamma: Sequence[QuantEquation], goal: QuantEquation, depth: int,
                  sig: Signature | None = None,
                  max_universe: int = DEFAULT_MAX_UNIVERSE) -> QuantVerdict:
    """Bounded search for a quantitative derivation of ``goal`` from ``gamma``.

    The term universe U (depth-bounded, over the goal's variables) is treated
    as a discrete space; every instance of a hypothesis inside U becomes a
    distance constraint and the largest congruence below them is computed with
    a full trace, from which the proof is read back.
    """
    if sig is None:
        used = symbols_used([t for e in list(gamma) + [goal] for t in (e.lhs, e.rhs)])
        sig = Signature(tuple(used.items()))
    for e in list(gamma) + [goal]:
        check_term(e.lhs, sig, len(e.vars))
        check_term(e.rhs, sig, len(e.vars))
    need = max(goal.lhs.depth, goal.rhs.depth)
    if depth < need:
        raise ValueError(f"depth {depth} is below the goal's term depth {need}")
    bounds = {"depth": depth}
    X = goal.vars
    if goal.lhs == goal.rhs:
        return QuantVerdict("proved", Fraction(0),
                            _lift(QuantProof("Refl", QuantEquation(X, goal.lhs, goal.lhs, 0)), goal.eps),
                            bounds)
    size = count_terms(sig, len(X), depth)
    if size > max_universe:
        raise SizeLimitExceeded(f"term universe of depth {depth} has {size} terms (limit {max_universe})")
    terms = enumerate_terms(sig, X, depth)
    index = {t: i for i, t in enumerate(terms)}
    n = len(terms)
    init = [[Fraction(0) if a == b else INF for b in range(n)] for a in range(n)]
    why = [[("top",)] * n for _ in range(n)]
    for gi, g in enumerate(gamma):
        lhs_vars = variables(g.lhs)
        free = sorted((variables(g.lhs) | variables(g.rhs)) - lhs_vars)
        for u in terms:
            base: dict[int, Term] = {}
            if not match(g.lhs, u, base):
                continue
            for extra in itertools.product(terms, repeat=len(free)):
                sub = dict(base)
                sub.update(zip(free, extra))
                j = index.get(substitute(g.rhs, sub))
                i = index[u]
                if j is None or i == j:
                    continue
                if g.eps < init[i][j]:
                    init[i][j] = init[j][i] = g.eps
                    why[i][j] = why[j][i] = ("axiom", gi, tuple(sorted(sub.items())), i, j)
    facts = [(t.symbol, tuple(index[a] for a in t.args), i)
             for i, t in enumerate(terms) if isinstance(t, App) and t.args]
    solver = _Solver(n, init, why, facts, trace=True)
    p = solver.run()
    s, t = index[goal.lhs], index[goal.rhs]
    best = p[s][t]
    if best > goal.eps:
        status = "unknown" if best == INF else "bound"
        return QuantVerdict(status, best, None, bounds)
    explainer = _QuantExplainer(solver, terms, X, gamma)
    proof = explainer.prove(s, t, solver.version(s, t))
    return QuantVerdict("proved", best, _lift(proof, goal.eps), bounds)


def _lift(proof: QuantProof, eps) -> QuantProof:
    c = proof.conclusion
    if c.eps == eps:
        return proof
    return QuantProof("Max", QuantEquation(c.vars, c.lhs, c.rhs, eps), (proof,))


# --- countermodels --------------------------------------------------------------

def _candidate_distances(eqs: Sequence[QuantEquation]) -> list[Ext]:
    """Distances worth trying: every ε in play, half of each, and ∞."""
    finite = {e.eps for e in eqs if e.eps != INF}
    vals = set(finite) | {q / 2 for q in finite} | {q + 1 for q in finite} | {Fraction(1)}
    vals.discard(Fraction(0))
    return sorted(vals) + [INF]


def find_quant_countermodel(gamma: Sequence[QuantEquation], goal: QuantEquation,
                            sig: Signature, max_model_size: int = 2,
                            max_tables: int = 1_000_000):
    """Least small quantitative algebra satisfying gamma but not goal, or None.

    Tables run over isomorphism representatives; metrics over all symmetric
    matrices with entries drawn from the distances mentioned by the problem.
    Returns (algebra, witness assignment).
    """
    from .eqlogic import canonical_models

    values = _candidate_distances(list(gamma) + [goal])
    hyps = [g.as_clustered() for g in gamma]
    target = goal.as_clustered()
    for size in range(1, max_model_size + 1):
        cells = [(a, b) for a in range(size) for b in range(a + 1, size)]
        metrics = []
        for choice in itertools.product(values, repeat=len(cells)):
            m = [[Fraction(0)] * size for _ in range(size)]
            for (a, b), v in zip(cells, choice):
                m[a][b] = m[b][a] = v
            if _is_pseudometric(_freeze(m)):
                metrics.append(_freeze(m))
        for base in canonical_models(sig, size, max_tables):
            for m in metrics:
                if not _nonexpansive(base, m):
                    continue
                A = QuantAlgebra(base, m)
                if all(satisfies_clustered_equation(A, h) for h in hyps):
                    res = satisfies_clustered_equation(A, target)
                    if not res:
                        return A, res.witness
    return None


def quant_semantic_entails(gamma: Sequence[QuantEquation], goal: QuantEquation, depth: int | None = None,
                           sig: Signature | None = None, max_model_size: int = 2,
                           max_universe: int = DEFAULT_MAX_UNIVERSE) -> QuantVerdict:
    """Countermodel search, then :func:`quant_entails`; statuses proved / refuted / bound / unknown."""
    if sig is None:
        used = symbols_used([t for e in list(gamma) + [goal] for t in (e.lhs, e.rhs)])
        sig = Signature(tuple(used.items()))
    if depth is None:
        depth = max(goal.lhs.depth, goal.rhs.depth)
    found = find_quant_countermodel(gamma, goal, sig, max_model_size)
    if found is not None:
        A, h = found
        return QuantVerdict("refuted", bounds={"depth": depth, "max_model_size": max_model_size},
                            countermodel=A, assignment=h)
    v = quant_entails(gamma, goal, depth, sig, max_universe)
    return QuantVerdict(v.status, v.best, v.proof, {**v.bounds, "max_model_size": max_model_size})
