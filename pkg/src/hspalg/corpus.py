"""Small named algebras used by the tests, the CLI demos and the docs."""

from __future__ import annotations

from fractions import Fraction

from .finalg import FiniteAlgebra, trivial_algebra
from .sigterm import Signature

ADD = Signature.of(("+", 2))
MUL = Signature.of(("*", 2))
EMPTY = Signature()


def cyclic_group(n: int, symbol: str = "+") -> FiniteAlgebra:
    """({0..n-1}, addition mod n)."""
    return FiniteAlgebra.from_functions(Signature.of((symbol, 2)), n, {symbol: lambda a, b: (a + b) % n})


def Z2(symbol: str = "+") -> FiniteAlgebra:
    return cyclic_group(2, symbol)


def Z3(symbol: str = "+") -> FiniteAlgebra:
    return cyclic_group(3, symbol)


def Z4(symbol: str = "+") -> FiniteAlgebra:
    return cyclic_group(4, symbol)


def left_zero(n: int = 2) -> FiniteAlgebra:
    """x * y = x."""
    return FiniteAlgebra.from_functions(MUL, n, {"*": lambda a, b: a})


def right_zero(n: int = 2) -> FiniteAlgebra:
    """x * y = y."""
    return FiniteAlgebra.from_functions(MUL, n, {"*": lambda a, b: b})


def chain_semilattice(n: int = 2) -> FiniteAlgebra:
    """({0..n-1}, min): the meet semilattice of an n-chain."""
    return FiniteAlgebra.from_functions(MUL, n, {"*": min})


def null_semigroup(n: int = 2) -> FiniteAlgebra:
    """x * y = 0."""
    return FiniteAlgebra.from_functions(MUL, n, {"*": lambda a, b: 0})


def squag3() -> FiniteAlgebra:
    """Idempotent quasigroup on Z3: x * y = -(x + y) mod 3."""
    return FiniteAlgebra.from_functions(MUL, 3, {"*": lambda a, b: (-(a + b)) % 3})


def discrete_set(n: int) -> FiniteAlgebra:
    """A bare n-element set (empty signature)."""
    return FiniteAlgebra(EMPTY, n, {})


def hsp_corpus() -> dict[str, FiniteAlgebra]:
    """Ten groupoids of size <= 3 over the signature {*/2}."""
    return {
        "trivial": trivial_algebra(MUL),
        "Z2": Z2("*"),
        "Z3": Z3("*"),
        "LZ2": left_zero(2),
        "RZ2": right_zero(2),
        "SL2": chain_semilattice(2),
        "SL3": chain_semilattice(3),
        "LZ3": left_zero(3),
        "N2": null_semigroup(2),
        "SQ3": squag3(),
    }


def line_metric(points) -> list[list[Fraction]]:
    """Distance matrix |p - q| of rational points on the line."""
    pts = [Fraction(p) for p in points]
    return [[abs(p - q) for q in pts] for p in pts]
