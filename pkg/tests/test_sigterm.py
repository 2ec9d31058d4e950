import itertools

import pytest
from hypothesis import given, settings, strategies as st

from hspalg.errors import ArityMismatch, MalformedInput, SignatureMismatch, UnknownVariable
from hspalg.sigterm import (
    App, Signature, Var, VarSet, check_term, compose, count_terms, enumerate_terms, evaluate,
    first_occurrence_order, format_term, parse_term, subterms, substitute, symbols_used, variables,
)
from hspalg.corpus import Z2, left_zero

MUL = Signature.of(("*", 2))
XY = VarSet.of("x", "y")


def test_signature_basics():
    sig = Signature.of(("*", 2), ("e", 0))
    assert sig.arity("*") == 2
    assert "e" in sig and "f" not in sig
    assert sig.constants() == ("e",)
    with pytest.raises(SignatureMismatch):
        sig.arity("f")


def test_signature_rejects_duplicates_and_bad_names():
    with pytest.raises(MalformedInput):
        Signature.of(("f", 1), ("f", 2))
    with pytest.raises(MalformedInput):
        Signature.of(("f(", 1))
    with pytest.raises(MalformedInput):
        Signature.of(("f", -1))


def test_standard_varsets():
    assert VarSet.standard(3).names == ("x", "y", "z")
    assert VarSet.standard(8).names[0] == "x0"
    with pytest.raises(UnknownVariable):
        XY.index("z")


def test_enumerate_depth_one_single_binary():
    # x, y, then *(x,x), *(x,y), *(y,x), *(y,y)
    terms = enumerate_terms(MUL, XY, 1)
    assert terms[:2] == [Var(0), Var(1)]
    assert len(terms) == 6
    assert [format_term(t, XY) for t in terms[2:]] == ["*(x,x)", "*(x,y)", "*(y,x)", "*(y,y)"]


def test_enumerate_counts():
    assert len(enumerate_terms(MUL, XY, 2)) == 38
    assert count_terms(MUL, 2, 2) == 38
    assert len(enumerate_terms(Signature(), XY, 5)) == 2
    assert len(enumerate_terms(Signature.of(("c", 0)), 0, 3)) == 1


def _brute_terms(sig, nvars, depth):
    """All terms by naive recursion on depth; independent of the level scheme."""
    level = {Var(i) for i in range(nvars)}
    for _ in range(depth):
        new = set(level)
        for name, ar in sig.symbols:
            for args in itertools.product(sorted(level, key=repr), repeat=ar):
                new.add(App(name, args))
        level = new
    return level


@pytest.mark.parametrize("sig", [MUL, Signature.of(("f", 1), ("c", 0)), Signature.of(("g", 2), ("h", 1))])
@pytest.mark.parametrize("nvars,depth", [(1, 2), (2, 2), (0, 3)])
def test_enumerate_matches_naive_oracle(sig, nvars, depth):
    got = enumerate_terms(sig, nvars, depth)
    assert len(got) == len(set(got))
    assert set(got) == _brute_terms(sig, nvars, depth)
    assert count_terms(sig, nvars, depth) == len(got)
    assert all(t.depth <= depth for t in got)


def test_enumeration_is_prefix_stable():
    sig = Signature.of(("f", 1), ("*", 2))
    short = enumerate_terms(sig, 2, 1)
    assert enumerate_terms(sig, 2, 2)[:len(short)] == short


def test_depth_convention():
    assert Var(0).depth == 0
    assert App("c").depth == 1
    assert parse_term("f(f(x))", VarSet.of("x")).depth == 2


def test_parse_and_format_round_trip():
    sig = Signature.of(("*", 2), ("e", 0), ("i", 1))
    X = VarSet.of("x", "y")
    t = parse_term(" *( i(x) , *(e,y) ) ", X, sig)
    assert t == App("*", [App("i", [Var(0)]), App("*", [App("e"), Var(1)])])
    assert parse_term(format_term(t, X), X, sig) == t


def test_declared_constant_wins_over_variable():
    sig = Signature.of(("x", 0), ("f", 1))
    X = VarSet.of("x", "y")
    assert parse_term("f(x)", X, sig) == App("f", [App("x")])


def test_parse_errors():
    X = VarSet.of("x")
    with pytest.raises(MalformedInput):
        parse_term("f(x", X)
    with pytest.raises(MalformedInput):
        parse_term("f(x) y", X)
    with pytest.raises(ArityMismatch):
        parse_term("*(x)", X, MUL)
    with pytest.raises(SignatureMismatch):
        parse_term("g(x)", X, MUL)
    with pytest.raises(UnknownVariable):
        parse_term("*(x,q)", X, MUL)


def test_check_term():
    check_term(parse_term("*(x,y)", XY), MUL, 2)
    with pytest.raises(UnknownVariable):
        check_term(Var(3), MUL, 2)
    with pytest.raises(ArityMismatch):
        check_term(App("*", [Var(0)]), MUL)


def test_substitution_and_composition():
    t = parse_term("*(x,y)", XY)
    s1 = {0: parse_term("*(y,y)", XY), 1: Var(0)}
    assert format_term(substitute(t, s1), XY) == "*(*(y,y),x)"
    assert substitute(Var(0), {0: Var(1)}) == Var(1)
    f = Signature.of(("f", 1))
    fx = parse_term("f(x)", XY, f)
    assert substitute(fx, {0: fx}) == parse_term("f(f(x))", XY, f)
    # compose(s1, s2): first s1 then s2
    s2 = {0: Var(1), 1: parse_term("*(x,x)", XY)}
    c = compose(s1, s2)
    assert substitute(t, c) == substitute(substitute(t, s1), s2)


def test_partial_substitution_is_rejected():
    with pytest.raises(UnknownVariable):
        substitute(parse_term("*(x,y)", XY), {0: Var(1)})


def test_variables_and_occurrence_order():
    t = parse_term("*(y,*(x,y))", XY)
    assert variables(t) == {0, 1}
    assert first_occurrence_order(t) == [1, 0]
    assert len(list(subterms(t))) == 5
    assert symbols_used([t]) == {"*": 2}


def test_evaluate():
    A = Z2()
    t = parse_term("+(x,+(x,y))", XY)
    assert evaluate(t, A, [1, 0]) == 0
    assert evaluate(t, A, {0: 1, 1: 1}) == 1
    with pytest.raises(UnknownVariable):
        evaluate(t, A, [1])
    with pytest.raises(SignatureMismatch):
        evaluate(parse_term("*(x,y)", XY), A, [0, 0])


def test_terms_are_immutable_and_hashable():
    t = App("f", [Var(0)])
    with pytest.raises(AttributeError):
        t.symbol = "g"
    assert hash(t) == hash(App("f", [Var(0)]))
    assert sorted([t, Var(1), Var(0)]) == [Var(0), Var(1), t]


@st.composite
def terms(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return Var(draw(st.integers(0, 1)))
    name = draw(st.sampled_from(["*", "f"]))
    ar = 2 if name == "*" else 1
    return App(name, [draw(terms(depth - 1)) for _ in range(ar)])


@given(terms())
@settings(max_examples=200, deadline=None)
def test_parse_format_round_trip_property(t):
    sig = Signature.of(("*", 2), ("f", 1))
    assert parse_term(format_term(t, XY), XY, sig) == t


@given(terms(), terms(), terms())
@settings(max_examples=100, deadline=None)
def test_substitution_is_a_homomorphism(t, a, b):
    # evaluating h(t) equals evaluating t under the composed assignment
    A = left_zero(3)
    from hspalg.finalg import FiniteAlgebra
    B = FiniteAlgebra.from_functions(Signature.of(("*", 2), ("f", 1)), 3,
                                     {"*": lambda p, q: (p + 2 * q) % 3, "f": lambda p: (p * p + 1) % 3})
    h = {0: a, 1: b}
    for env in itertools.product(range(3), repeat=2):
        inner = [evaluate(a, B, env), evaluate(b, B, env)]
        assert evaluate(substitute(t, h), B, env) == evaluate(t, B, inner)
