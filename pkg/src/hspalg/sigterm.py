"""Signatures, variables and terms.

Terms are immutable trees.  A variable is stored as an index into an ordered
:class:`VarSet`; the names only matter for parsing and printing.  Text syntax
is prefix application ``f(t1,...,tn)``.  A bare identifier is a variable
unless the signature declares it as a constant.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import ArityMismatch, MalformedInput, SignatureMismatch, UnknownVariable


@dataclass(frozen=True)
class Signature:
    symbols: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        symbols = tuple((str(name), int(arity)) for name, arity in self.symbols)
        object.__setattr__(self, "symbols", symbols)
        names = [name for name, _ in symbols]
        if len(set(names)) != len(names):
            raise MalformedInput(f"duplicate operation symbol in {names}")
        for name, arity in symbols:
            if arity < 0:
                raise MalformedInput(f"negative arity for {name!r}")
            if not name or _BAD_NAME.search(name):
                raise MalformedInput(f"illegal symbol name {name!r}")
        object.__setattr__(self, "_arity", dict(symbols))

    @classmethod
    def of(cls, *symbols: tuple[str, int]) -> "Signature":
        return cls(tuple(symbols))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.symbols)

    def arity(self, name: str) -> int:
        try:
            return self._arity[name]
        except KeyError:
            raise SignatureMismatch(f"symbol {name!r} not in signature") from None

    def __contains__(self, name) -> bool:
        return name in self._arity

    def __len__(self) -> int:
        return len(self.symbols)

    def constants(self) -> tuple[str, ...]:
        return tuple(name for name, arity in self.symbols if arity == 0)

    def to_json(self) -> list:
        return [[name, arity] for name, arity in self.symbols]


@dataclass(frozen=True)
class VarSet:
    names: tuple[str, ...] = ()

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        object.__setattr__(self, "names", names)
        if len(set(names)) != len(names):
            raise MalformedInput(f"duplicate variable name in {names}")
        for name in names:
            if not name or _BAD_NAME.search(name):
                raise MalformedInput(f"illegal variable name {name!r}")

    @classmethod
    def of(cls, *names: str) -> "VarSet":
        return cls(tuple(names))

    @classmethod
    def standard(cls, n: int) -> "VarSet":
        """Variables ``x, y, z, u, v, w`` for n <= 6, else ``x0 .. x{n-1}``."""
        if n <= len(_STANDARD_NAMES):
            return cls(tuple(_STANDARD_NAMES[:n]))
        return cls(tuple(f"x{i}" for i in range(n)))

    @property
    def size(self) -> int:
        return len(self.names)

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownVariable(f"unknown variable {name!r}") from None

    def var(self, name: str) -> "Var":
        return Var(self.index(name))

    def vars(self) -> tuple["Var", ...]:
        return tuple(Var(i) for i in range(len(self.names)))


_STANDARD_NAMES = "xyzuvw"
_BAD_NAME = re.compile(r"[\s(),]")


class Term:
    """Base class of :class:`Var` and :class:`App`."""

    __slots__ = ()

    def __lt__(self, other):
        return term_key(self) < term_key(other)


class Var(Term):
    __slots__ = ("index",)

    def __init__(self, index: int):
        object.__setattr__(self, "index", int(index))

    def __setattr__(self, key, value):
        raise AttributeError("terms are immutable")

    def __eq__(self, other):
        return isinstance(other, Var) and other.index == self.index

    def __hash__(self):
        return hash(("var", self.index))

    def __repr__(self):
        return f"Var({self.index})"

    @property
    def depth(self) -> int:
        return 0


class App(Term):
    __slots__ = ("symbol", "args", "depth", "_hash")

    def __init__(self, symbol: str, args: Iterable[Term] = ()):
        args = tuple(args)
        for a in args:
            if not isinstance(a, Term):
                raise MalformedInput(f"argument {a!r} of {symbol!r} is not a term")
        object.__setattr__(self, "symbol", symbol)
        object.__setattr__(self, "args", args)
        object.__setattr__(self, "depth", 1 + max((a.depth for a in args), default=0))
        object.__setattr__(self, "_hash", hash((symbol, args)))

    def __setattr__(self, key, value):
        raise AttributeError("terms are immutable")

    def __eq__(self, other):
        if self is other:
            return True
        return (
            isinstance(other, App)
            and self._hash == other._hash
            and self.symbol == other.symbol
            and self.args == other.args
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        if not self.args:
            return f"App({self.symbol!r})"
        return f"App({self.symbol!r}, {list(self.args)!r})"


def term_key(t: Term):
    """A total order key on terms (variables before applications)."""
    if isinstance(t, Var):
        return (0, t.index)
    return (1, t.depth, t.symbol, tuple(term_key(a) for a in t.args))


def check_term(t: Term, sig: Signature, nvars: int | None = None) -> None:
    """Raise unless ``t`` is well formed over ``sig`` (and ``nvars`` variables)."""
    if isinstance(t, Var):
        if nvars is not None and not 0 <= t.index < nvars:
            raise UnknownVariable(f"variable index {t.index} outside the variable set")
        return
    if not isinstance(t, App):
        raise MalformedInput(f"{t!r} is not a term")
    if t.symbol not in sig:
        raise SignatureMismatch(f"symbol {t.symbol!r} not in signature")
    if sig.arity(t.symbol) != len(t.args):
        raise ArityMismatch(
            f"{t.symbol!r} has arity {sig.arity(t.symbol)} but got {len(t.args)} arguments"
        )
    for a in t.args:
        check_term(a, sig, nvars)


def variables(t: Term) -> frozenset[int]:
    """Indices of the variables occurring in ``t``."""
    if isinstance(t, Var):
        return frozenset((t.index,))
    out: set[int] = set()
    stack = [t]
    while stack:
        u = stack.pop()
        if isinstance(u, Var):
            out.add(u.index)
        else:
            stack.extend(u.args)
    return frozenset(out)


def first_occurrence_order(*terms: Term) -> list[int]:
    """Variable indices in order of first (left-to-right, depth-first) occurrence."""
    seen: dict[int, None] = {}

    def walk(u):
        if isinstance(u, Var):
            seen.setdefault(u.index)
        else:
            for a in u.args:
                walk(a)

    for t in terms:
        walk(t)
    return list(seen)


def subterms(t: Term) -> Iterable[Term]:
    yield t
    if isinstance(t, App):
        for a in t.args:
            yield from subterms(a)


def substitute(t: Term, sub: Mapping[int, Term] | Sequence[Term]) -> Term:
    """Replace every variable ``Var(i)`` of ``t`` by ``sub[i]``.

    ``sub`` may be a mapping from variable indices or a sequence indexed by them.
    Raises :class:`UnknownVariable` if ``sub`` misses a variable of ``t``.
    """
    cache: dict[Term, Term] = {}

    def go(u: Term) -> Term:
        if isinstance(u, Var):
            try:
                return sub[u.index]
            except (KeyError, IndexError):
                raise UnknownVariable(f"substitution undefined on variable {u.index}") from None
        hit = cache.get(u)
        if hit is None:
            hit = cache[u] = App(u.symbol, [go(a) for a in u.args])
        return hit

    return go(t)


def compose(s1: Mapping[int, Term], s2: Mapping[int, Term]) -> dict[int, Term]:
    """The substitution ``x -> substitute(s1[x], s2)`` (first s1, then s2)."""
    return {x: substitute(t, s2) for x, t in s1.items()}


def evaluate(t: Term, algebra, assignment: Mapping[int, int] | Sequence[int]) -> int:
    """Value of ``t`` in ``algebra`` under the variable assignment.

    The assignment maps variable indices to carrier elements; its homomorphic
    extension is computed bottom-up.
    """
    if isinstance(t, Var):
        try:
            return assignment[t.index]
        except (KeyError, IndexError):
            raise UnknownVariable(f"assignment undefined on variable {t.index}") from None
    if t.symbol not in algebra.sig:
        raise SignatureMismatch(f"symbol {t.symbol!r} not interpreted by the algebra")
    if algebra.sig.arity(t.symbol) != len(t.args):
        raise ArityMismatch(f"{t.symbol!r} applied to {len(t.args)} arguments")
    return algebra.apply(t.symbol, [evaluate(a, algebra, assignment) for a in t.args])


def enumerate_terms(sig: Signature, X: VarSet | int, max_depth: int) -> list[Term]:
    """All terms over ``X`` of depth at most ``max_depth``, without duplicates.

    Order: variables first (in ``X`` order), then depth level by depth level;
    within a level by symbol order, then lexicographically on the positions of
    the children in the list built so far.  Hence the list for depth d is a
    prefix of the list for depth d + 1.
    """
    if max_depth < 0:
        raise ValueError("max_depth must be non-negative")
    nvars = X if isinstance(X, int) else len(X)
    terms: list[Term] = [Var(i) for i in range(nvars)]
    level_start = 0  # first index of terms with the previous level's depth
    for depth in range(1, max_depth + 1):
        count = len(terms)
        new: list[Term] = []
        for name, arity in sig.symbols:
            if arity == 0:
                if depth == 1:
                    new.append(App(name))
                continue
            for idx in itertools.product(range(count), repeat=arity):
                # at least one child from the previous level
                if max(idx) < level_start:
                    continue
                new.append(App(name, [terms[i] for i in idx]))
        level_start = count
        terms.extend(new)
    return terms


def count_terms(sig: Signature, nvars: int, max_depth: int) -> int:
    """Number of terms :func:`enumerate_terms` would return, without building them."""
    total = nvars
    for _ in range(max_depth):
        total = nvars + sum(total**arity if arity else 1 for _, arity in sig.symbols)
    return total


# --- text syntax -----------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<punct>[(),])|(?P<name>[^\s(),]+))")


def _tokens(text: str):
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise MalformedInput(f"cannot tokenize {text[pos:]!r}")
        pos = m.end()
        yield m.group("punct") or m.group("name")


def parse_term(text: str, X: VarSet, sig: Signature | None = None) -> Term:
    """Parse prefix syntax.

    With ``sig`` given, applications are checked against it and declared
    constants win over variable names.  With ``sig=None`` any symbol is
    accepted; bare identifiers must then be variables of ``X`` or are read as
    constants.
    """
    toks = list(_tokens(text))
    pos = 0

    def peek():
        return toks[pos] if pos < len(toks) else None

    def parse():
        nonlocal pos
        tok = peek()
        if tok is None or tok in "(),":
            raise MalformedInput(f"unexpected {tok!r} in term {text!r}")
        pos += 1
        if peek() == "(":
            pos += 1
            args = []
            if peek() == ")":
                pos += 1
            else:
                while True:
                    args.append(parse())
                    nxt = peek()
                    pos += 1
                    if nxt == ")":
                        break
                    if nxt != ",":
                        raise MalformedInput(f"expected ',' or ')' in term {text!r}")
            if sig is not None:
                if tok not in sig:
                    raise SignatureMismatch(f"symbol {tok!r} not in signature")
                if sig.arity(tok) != len(args):
                    raise ArityMismatch(f"{tok!r} expects {sig.arity(tok)} arguments, got {len(args)}")
            return App(tok, args)
        if sig is not None and tok in sig:
            if sig.arity(tok) != 0:
                raise ArityMismatch(f"{tok!r} expects {sig.arity(tok)} arguments")
            return App(tok)
        if tok in X.names:
            return Var(X.index(tok))
        if sig is None:
            return App(tok)
        raise UnknownVariable(f"unknown variable {tok!r} in term {text!r}")

    term = parse()
    if pos != len(toks):
        raise MalformedInput(f"trailing input in term {text!r}")
    return term


def format_term(t: Term, X: VarSet | None = None) -> str:
    if isinstance(t, Var):
        if X is None:
            return f"_{t.index}"
        try:
            return X.names[t.index]
        except IndexError:
            raise UnknownVariable(f"variable index {t.index} outside {X.names}") from None
    if not t.args:
        return t.symbol
    return f"{t.symbol}({','.join(format_term(a, X) for a in t.args)})"


def symbols_used(terms: Iterable[Term]) -> dict[str, int]:
    """Symbol -> arity for every application occurring in ``terms``."""
    found: dict[str, int] = {}
    for t in terms:
        for u in subterms(t):
            if isinstance(u, App):
                if found.setdefault(u.symbol, len(u.args)) != len(u.args):
                    raise ArityMismatch(f"symbol {u.symbol!r} used with two arities")
    return found
