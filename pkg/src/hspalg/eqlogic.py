"""Birkhoff's equational logic: proof trees, a checker, bounded proof search and
finite countermodel search.

Proof search works on a finite term universe U (all terms up to a depth).  It
closes U under the axiom instances that fit inside U and under congruence,
recording for each merge the rule instance that justified it.  When the goal's
sides end up in one class, a proof tree is read back from those records.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

from .errors import MalformedInput, MalformedProof, SizeLimitExceeded, UnknownVariable
from .finalg import FiniteAlgebra
from .sigterm import (
    App, Signature, Term, Var, VarSet, count_terms, enumerate_terms, first_occurrence_order,
    format_term, parse_term, substitute, symbols_used, variables,
)
from .variety import TermEquation, satisfies_equation

DEFAULT_MAX_UNIVERSE = 20000
DEFAULT_MAX_MODEL = 3
DEFAULT_MAX_INSTANCES = 2_000_000
DEFAULT_MAX_TABLES = 1_000_000

RULES = ("Refl", "Sym", "Trans", "Cong", "Subst", "Axiom")


@dataclass(frozen=True, eq=False)
class Proof:
    """A derivation tree node.

    ``substitution`` (Subst only) maps variable indices of the premise to terms
    over the conclusion's variables.  ``axiom`` (Axiom only) indexes the list of
    hypotheses.
    """

    rule: str
    conclusion: TermEquation
    children: tuple["Proof", ...] = ()
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

    def to_json(self) -> dict:
        node: dict = {"rule": self.rule, "conclusion": self.conclusion.to_json()}
        if self.symbol is not None:
            node["symbol"] = self.symbol
        if self.substitution is not None:
            premise_vars = self.children[0].conclusion.vars
            node["substitution"] = {
                premise_vars.names[i]: format_term(t, self.conclusion.vars)
                for i, t in self.substitution
            }
        if self.axiom is not None:
            node["axiom"] = self.axiom
        node["children"] = [c.to_json() for c in self.children]
        return node

    @classmethod
    def from_json(cls, data: Mapping, sig: Signature | None = None, _path=()) -> "Proof":
        """Load a proof; defects are reported as :class:`MalformedProof` with the node path."""
        try:
            rule = data["rule"]
            conclusion = TermEquation.from_json(data["conclusion"], sig)
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
                premise_vars = children[0].conclusion.vars
                sub = tuple(sorted(
                    (premise_vars.index(k), parse_term(v, conclusion.vars, sig))
                    for k, v in data["substitution"].items()
                ))
        except (KeyError, TypeError, AttributeError, ValueError) as exc:
            raise MalformedProof(f"bad substitution: {exc}", _path) from exc
        return cls(rule, conclusion, children, data.get("symbol"), sub, data.get("axiom"))


def normalize(lhs: Term, rhs: Term) -> tuple[Term, Term]:
    """Rename variables to 0, 1, ... in order of first occurrence."""
    order = first_occurrence_order(lhs, rhs)
    ren = {v: Var(i) for i, v in enumerate(order)}
    return substitute(lhs, ren), substitute(rhs, ren)


def alpha_equal(e1: TermEquation, e2: TermEquation) -> bool:
    return normalize(e1.lhs, e1.rhs) == normalize(e2.lhs, e2.rhs)


def check_proof(p: Proof, gamma: Sequence[TermEquation], sig: Signature | None = None) -> bool:
    """True iff every node of ``p`` is a correct rule instance over hypotheses ``gamma``.

    Structural defects (unknown rule, wrong number of premises, missing rule
    parameters) raise :class:`MalformedProof` carrying the node path.
    """
    normal_gamma = [normalize(g.lhs, g.rhs) for g in gamma]
    memo: dict[int, bool] = {}

    def ok(node: Proof, path: tuple[int, ...]) -> bool:
        key = id(node)
        if key in memo:
            return memo[key]
        # visit every child so structural defects surface wherever they are
        here = local(node, path)
        below = [ok(c, path + (i,)) for i, c in enumerate(node.children)]
        result = here and all(below)
        memo[key] = result
        return result

    def expect_children(node, n, path):
        if len(node.children) != n:
            raise MalformedProof(
                f"{node.rule} needs {n} premise(s), got {len(node.children)}", path)

    def local(node: Proof, path) -> bool:
        c = node.conclusion
        kids = [k.conclusion for k in node.children]
        rule = node.rule
        if rule not in RULES:
            raise MalformedProof(f"unknown rule {rule!r}", path)
        if rule == "Refl":
            expect_children(node, 0, path)
            return c.lhs == c.rhs
        if rule == "Sym":
            expect_children(node, 1, path)
            k = kids[0]
            return k.vars == c.vars and k.lhs == c.rhs and k.rhs == c.lhs
        if rule == "Trans":
            expect_children(node, 2, path)
            k1, k2 = kids
            return (k1.vars == c.vars == k2.vars and k1.rhs == k2.lhs
                    and k1.lhs == c.lhs and k2.rhs == c.rhs)
        if rule == "Cong":
            if node.symbol is None:
                raise MalformedProof("Cong node without a symbol", path)
            if sig is not None and node.symbol in sig:
                expect_children(node, sig.arity(node.symbol), path)
            if not (isinstance(c.lhs, App) and isinstance(c.rhs, App)):
                return False
            if c.lhs.symbol != node.symbol or c.rhs.symbol != node.symbol:
                return False
            expect_children(node, len(c.lhs.args), path)
            if len(c.rhs.args) != len(kids):
                return False
            return all(k.vars == c.vars and k.lhs == s and k.rhs == t
                       for k, s, t in zip(kids, c.lhs.args, c.rhs.args))
        if rule == "Subst":
            expect_children(node, 1, path)
            if node.substitution is None:
                raise MalformedProof("Subst node without a substitution", path)
            sub = dict(node.substitution)
            k = kids[0]
            try:
                return substitute(k.lhs, sub) == c.lhs and substitute(k.rhs, sub) == c.rhs
            except UnknownVariable:
                return False
        # Axiom
        expect_children(node, 0, path)
        if node.axiom is None or not 0 <= node.axiom < len(gamma):
            raise MalformedProof(f"axiom index {node.axiom!r} out of range", path)
        return normalize(c.lhs, c.rhs) == normal_gamma[node.axiom]

    return ok(p, ())


# --- proof search -------------------------------------------------------------

def match(pattern: Term, term: Term, sub: dict[int, Term]) -> bool:
    """Extend ``sub`` so that pattern instantiates to term; False if impossible."""
    if isinstance(pattern, Var):
        bound = sub.get(pattern.index)
        if bound is None:
            sub[pattern.index] = term
            return True
        return bound == term
    if not isinstance(term, App) or term.symbol != pattern.symbol or len(term.args) != len(pattern.args):
        return False
    return all(match(p, t, sub) for p, t in zip(pattern.args, term.args))


def _balanced_trans(steps: list[Proof], X: VarSet) -> Proof:
    if len(steps) == 1:
        return steps[0]
    mid = len(steps) // 2
    left = _balanced_trans(steps[:mid], X)
    right = _balanced_trans(steps[mid:], X)
    return Proof("Trans", TermEquation(X, left.conclusion.lhs, right.conclusion.rhs), (left, right))


class _Closure:
    """Proof-producing congruence closure over a fixed, subterm-closed term list."""

    def __init__(self, terms: list[Term], X: VarSet):
        self.X = X
        self.terms = terms
        self.id = {t: i for i, t in enumerate(terms)}
        n = len(terms)
        self.parent = list(range(n))
        self.members = [[i] for i in range(n)]
        self.uses: list[list[int]] = [[] for _ in range(n)]
        self.sig_table: dict[tuple, int] = {}
        self.adj: list[list[tuple[int, tuple]]] = [[] for _ in range(n)]
        self.children: list[tuple[int, ...] | None] = [None] * n
        for i, t in enumerate(terms):
            if isinstance(t, App):
                kids = tuple(self.id[a] for a in t.args)
                self.children[i] = kids
                for k in set(kids):
                    self.uses[k].append(i)
                key = (t.symbol, kids)
                self.sig_table.setdefault(key, i)
        self.pending: deque = deque()

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def _key(self, i: int):
        return (self.terms[i].symbol, tuple(self.find(k) for k in self.children[i]))

    def merge(self, a: int, b: int, why: tuple) -> None:
        self.pending.append((a, b, why))
        while self.pending:
            a, b, why = self.pending.popleft()
            ra, rb = self.find(a), self.find(b)
            if ra == rb:
                continue
            self.adj[a].append((b, why))
            self.adj[b].append((a, why))
            if len(self.members[ra]) < len(self.members[rb]):
                ra, rb = rb, ra
            # rb is absorbed into ra; re-signature the users of rb's members
            affected = [u for m in self.members[rb] for u in self.uses[m]]
            self.parent[rb] = ra
            self.members[ra].extend(self.members[rb])
            self.members[rb] = []
            for u in affected:
                key = self._key(u)
                other = self.sig_table.setdefault(key, u)
                if self.find(other) != self.find(u):
                    self.pending.append((u, other, ("cong", u, other)))

    def path(self, a: int, b: int) -> list[tuple[int, int, tuple]]:
        """Edges of the unique forest path from a to b."""
        prev: dict[int, tuple[int, tuple]] = {a: (a, ())}
        queue = deque([a])
        while queue:
            x = queue.popleft()
            if x == b:
                break
            for y, why in self.adj[x]:
                if y not in prev:
                    prev[y] = (x, why)
                    queue.append(y)
        edges = []
        x = b
        while x != a:
            px, why = prev[x]
            edges.append((px, x, why))
            x = px
        edges.reverse()
        return edges


class _Explainer:
    def __init__(self, closure: _Closure, gamma: Sequence[TermEquation]):
        self.cc = closure
        self.gamma = gamma
        self.memo: dict[tuple[int, int], Proof] = {}

    def explain(self, a: int, b: int) -> Proof:
        X = self.cc.X
        if (a, b) in self.memo:
            return self.memo[(a, b)]
        terms = self.cc.terms
        if a == b:
            proof = Proof("Refl", TermEquation(X, terms[a], terms[a]))
        else:
            steps = [self.edge(u, v, why) for u, v, why in self.cc.path(a, b)]
            proof = _balanced_trans(steps, X)
        self.memo[(a, b)] = proof
        return proof

    def edge(self, u: int, v: int, why: tuple) -> Proof:
        X = self.cc.X
        terms = self.cc.terms
        if why[0] == "cong":
            _, p, q = why
            if (u, v) == (q, p):
                p, q = q, p
            kids = tuple(self.explain(s, t) for s, t in zip(self.cc.children[p], self.cc.children[q]))
            return Proof("Cong", TermEquation(X, terms[p], terms[q]), kids, symbol=terms[p].symbol)
        _, idx, sub, lhs_id, rhs_id = why
        g = self.gamma[idx]
        axiom = Proof("Axiom", g, axiom=idx)
        inst = Proof("Subst", TermEquation(X, terms[lhs_id], terms[rhs_id]), (axiom,),
                     substitution=sub)
        if (u, v) == (lhs_id, rhs_id):
            return inst
        return Proof("Sym", TermEquation(X, terms[rhs_id], terms[lhs_id]), (inst,))


def _signature_for(gamma, goal, sig):
    if sig is not None:
        return sig
    used = symbols_used([t for e in list(gamma) + [goal] for t in (e.lhs, e.rhs)])
    return Signature(tuple(used.items()))


def _instances(gamma, universe, index, max_instances):
    """Axiom instances s(lhs) = s(rhs) with both sides inside the universe."""
    produced = 0
    for gi, g in enumerate(gamma):
        occurring = sorted(variables(g.lhs) | variables(g.rhs))
        lhs_vars = variables(g.lhs)
        free = [x for x in occurring if x not in lhs_vars]
        for u in universe:
            base: dict[int, Term] = {}
            if not match(g.lhs, u, base):
                continue
            for extra in itertools.product(universe, repeat=len(free)):
                produced += 1
                if produced > max_instances:
                    raise SizeLimitExceeded(f"more than {max_instances} axiom instances")
                sub = dict(base)
                sub.update(zip(free, extra))
                r = substitute(g.rhs, sub)
                j = index.get(r)
                if j is None:
                    continue
                yield gi, tuple(sorted(sub.items())), index[u], j


def derive(gamma: Sequence[TermEquation], goal: TermEquation, depth: int,
           sig: Signature | None = None, max_universe: int = DEFAULT_MAX_UNIVERSE,
           max_instances: int = DEFAULT_MAX_INSTANCES) -> Proof | None:
    """Search for a proof of ``goal`` from ``gamma`` inside the depth-bounded universe.

    Sound and complete relative to the universe: returns a checkable proof iff
    the goal's sides are identified by the congruence on U generated by the
    axiom instances lying in U.  None does not mean the goal is not entailed.
    """
    sig = _signature_for(gamma, goal, sig)
    for e in list(gamma) + [goal]:
        e.check(sig)
    needed = max(goal.lhs.depth, goal.rhs.depth)
    if depth < needed:
        raise ValueError(f"depth {depth} is below the goal's term depth {needed}")
    X = goal.vars
    if goal.lhs == goal.rhs:
        return Proof("Refl", goal)
    size = count_terms(sig, len(X), depth)
    if size > max_universe:
        raise SizeLimitExceeded(f"term universe of depth {depth} has {size} terms (limit {max_universe})")
    universe = enumerate_terms(sig, X, depth)
    cc = _Closure(universe, X)
    for gi, sub, a, b in _instances(gamma, universe, cc.id, max_instances):
        cc.merge(a, b, ("ax", gi, sub, a, b))
    a, b = cc.id[goal.lhs], cc.id[goal.rhs]
    if cc.find(a) != cc.find(b):
        return None
    return _Explainer(cc, gamma).explain(a, b)


# --- countermodels ------------------------------------------------------------

def _flat(args, n):
    idx = 0
    for a in args:
        idx = idx * n + a
    return idx


@lru_cache(maxsize=64)
def canonical_models(sig: Signature, size: int, max_tables: int = DEFAULT_MAX_TABLES) -> tuple[FiniteAlgebra, ...]:
    """One representative per isomorphism class of algebras of the given size.

    Tables are concatenated in signature order; a table is kept iff it is
    lexicographically least among all its relabelings by carrier permutations.
    """
    arities = [a for _, a in sig.symbols]
    lengths = [size**a for a in arities]
    total = sum(lengths)
    if size**total > max_tables:
        raise SizeLimitExceeded(f"{size}^{total} candidate tables at size {size} (limit {max_tables})")
    # for each permutation, position j of the relabeled table reads position src[j]
    perms = []
    for pi in itertools.permutations(range(size)):
        if list(pi) == list(range(size)):
            continue
        inv = [0] * size
        for a, b in enumerate(pi):
            inv[b] = a
        src = []
        offset = 0
        for arity, length in zip(arities, lengths):
            for args in itertools.product(range(size), repeat=arity):
                src.append(offset + _flat([inv[a] for a in args], size))
            offset += length
        perms.append((pi, src))
    models = []
    for flat in itertools.product(range(size), repeat=total):
        if _is_least(flat, perms):
            tables, offset = {}, 0
            for (name, _), length in zip(sig.symbols, lengths):
                tables[name] = flat[offset:offset + length]
                offset += length
            models.append(FiniteAlgebra(sig, size, tables))
    return tuple(models)


def _is_least(flat, perms) -> bool:
    for pi, src in perms:
        for j, s in enumerate(src):
            v = pi[flat[s]]
            if v != flat[j]:
                if v < flat[j]:
                    return False
                break
    return True


@dataclass(frozen=True)
class EntailmentVerdict:
    """Outcome of :func:`semantic_entails`: ``proved``, ``refuted`` or ``unknown``."""

    status: str
    proof: Proof | None = None
    countermodel: FiniteAlgebra | None = None
    assignment: tuple[int, ...] | None = None
    bounds: dict = field(default_factory=dict)

    @property
    def proved(self) -> bool:
        return self.status == "proved"

    @property
    def refuted(self) -> bool:
        return self.status == "refuted"


def find_countermodel(gamma: Sequence[TermEquation], goal: TermEquation, sig: Signature,
                      max_model_size: int = DEFAULT_MAX_MODEL,
                      max_tables: int = DEFAULT_MAX_TABLES):
    """Least algebra (by size, then table order) satisfying gamma but not goal."""
    for size in range(1, max_model_size + 1):
        for A in canonical_models(sig, size, max_tables):
            if all(satisfies_equation(A, g) for g in gamma):
                res = satisfies_equation(A, goal)
                if not res:
                    return A, res.witness
    return None


def semantic_entails(gamma: Sequence[TermEquation], goal: TermEquation,
                     max_model_size: int = DEFAULT_MAX_MODEL, depth: int | None = None,
                     sig: Signature | None = None, max_universe: int = DEFAULT_MAX_UNIVERSE,
                     max_tables: int = DEFAULT_MAX_TABLES) -> EntailmentVerdict:
    """Three-valued entailment check: countermodel search first, then proof search."""
    if max_model_size < 1:
        raise ValueError("max_model_size must be at least 1")
    sig = _signature_for(gamma, goal, sig)
    if depth is None:
        depth = max(goal.lhs.depth, goal.rhs.depth)
    bounds = {"max_model_size": max_model_size, "depth": depth}
    found = find_countermodel(gamma, goal, sig, max_model_size, max_tables)
    if found is not None:
        A, h = found
        return EntailmentVerdict("refuted", countermodel=A, assignment=h, bounds=bounds)
    proof = derive(gamma, goal, depth, sig, max_universe=max_universe)
    if proof is not None:
        return EntailmentVerdict("proved", proof=proof, bounds=bounds)
    return EntailmentVerdict("unknown", bounds=bounds)
