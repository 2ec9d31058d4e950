import itertools
import random

import pytest
from hypothesis import given, settings

from hspalg.corpus import ADD, MUL, Z2, Z4, chain_semilattice, discrete_set, left_zero
from hspalg.errors import MalformedInput, NotACongruence, SignatureMismatch, SizeLimitExceeded
from hspalg.finalg import (
    Congruence, FiniteAlgebra, Homomorphism, all_congruences, closure, congruence_generated,
    factor_through, find_isomorphism, identity, is_congruence, is_homomorphism, is_isomorphic,
    kernel, power, product, quotient, restrict, subalgebra_generated, trivial_algebra,
)
from hspalg.sigterm import Signature

from conftest import algebras, random_algebra
from oracles import (
    brute_congruences, brute_isomorphic, brute_least_congruence, partition_is_congruence,
    set_partitions,
)

MOD2 = (0, 1, 0, 1)


def test_table_validation():
    with pytest.raises(MalformedInput):
        FiniteAlgebra(MUL, 2, {"*": [0, 1, 2, 0]})
    with pytest.raises(MalformedInput):
        FiniteAlgebra(MUL, 2, {"*": [0, 1, 0]})
    with pytest.raises(MalformedInput):
        FiniteAlgebra(MUL, 2, {})


def test_flat_index_convention():
    A = FiniteAlgebra(Signature.of(("f", 2)), 3, {"f": [(7 * i + 2) % 3 for i in range(9)]})
    # f(a1, a2) sits at a1 * 3 + a2
    for a, b in itertools.product(range(3), repeat=2):
        assert A.apply("f", [a, b]) == A.table("f")[a * 3 + b]


def test_json_round_trip():
    A = Z4()
    assert FiniteAlgebra.from_json(A.to_json()) == A
    with pytest.raises(MalformedInput):
        FiniteAlgebra.from_json({"signature": [["*", 2]], "tables": {"*": [0]}})


def test_homomorphism_examples():
    assert is_homomorphism(list(range(4)), Z4(), Z4())
    assert is_homomorphism(MOD2, Z4(), Z2())
    assert not is_homomorphism((1, 0), Z2(), Z2())
    with pytest.raises(SignatureMismatch):
        is_homomorphism((0, 0), Z2(), left_zero(2))


def test_product_examples():
    P = product([], sig=ADD)
    assert P.algebra.size == 1
    P = product([Z2(), Z2()])
    assert P.algebra.size == 4
    for pr in P.projections:
        assert is_homomorphism(pr.map, pr.dom, pr.cod)
    i10, i01, i11 = (P.elements.index(t) for t in [(1, 0), (0, 1), (1, 1)])
    assert P.algebra.apply("+", [i10, i01]) == i11
    with pytest.raises(SizeLimitExceeded):
        product([Z4()] * 4, max_size=64)
    assert power(Z2(), 3).algebra.size == 8


def test_subalgebra_examples():
    assert subalgebra_generated(Z4(), {0, 1, 2, 3}).algebra == Z4()
    S = subalgebra_generated(Z4(), {2})
    assert S.elements == (0, 2)
    assert is_homomorphism(S.inclusion.map, S.algebra, Z4())
    assert subalgebra_generated(Z2(), set()).algebra.size == 0
    with_const = FiniteAlgebra.from_functions(Signature.of(("e", 0), ("+", 2)), 4,
                                              {"e": lambda: 1, "+": lambda a, b: (a + b) % 4})
    assert subalgebra_generated(with_const, set()).algebra.size == 4


def test_congruence_generated_examples():
    A = Z4()
    assert congruence_generated(A, []) == Congruence.diagonal(A)
    assert congruence_generated(A, [(0, 2)]).blocks() == [(0, 2), (1, 3)]
    assert congruence_generated(A, [(0, 1)]) == Congruence.total(A)


def test_quotient_examples():
    A = Z4()
    Q = quotient(A, Congruence.from_blocks(A, [[0, 2], [1, 3]]))
    assert Q.algebra.size == 2
    assert brute_isomorphic(Q.algebra, Z2())
    assert Q.algebra == Z2()
    assert quotient(A, Congruence.total(A)).algebra.size == 1
    assert brute_isomorphic(quotient(A, Congruence.diagonal(A)).algebra, A)
    with pytest.raises(NotACongruence):
        quotient(A, Congruence.from_blocks(A, [[0, 1], [2], [3]]))


def test_kernel_examples():
    A = Z4()
    assert kernel(identity(A)) == Congruence.diagonal(A)
    assert kernel(Homomorphism(A, Z2(), MOD2)).blocks() == [(0, 2), (1, 3)]
    T = trivial_algebra(ADD)
    assert kernel(Homomorphism(A, T, (0,) * 4)) == Congruence.total(A)


def test_all_congruences_examples():
    assert len(all_congruences(discrete_set(2))) == 2
    Z = all_congruences(Z4())
    assert [c.blocks() for c in Z] == [[(0,), (1,), (2,), (3,)], [(0, 2), (1, 3)], [(0, 1, 2, 3)]]
    assert len(all_congruences(trivial_algebra(MUL))) == 1
    assert len(all_congruences(discrete_set(4))) == 15  # every partition of a bare set
    with pytest.raises(SizeLimitExceeded):
        all_congruences(discrete_set(9))


def test_set_partition_oracle_counts():
    assert [len(set_partitions(n)) for n in range(6)] == [1, 1, 2, 5, 15, 52]


def test_all_congruences_match_brute_force_on_random_algebras():
    rng = random.Random(7)
    for _ in range(60):
        A = random_algebra(rng, max_size=5)
        got = sorted(c.labels for c in all_congruences(A))
        assert got == sorted(brute_congruences(A))


def test_congruence_lattice_sorted_by_refinement():
    A = chain_semilattice(3)
    cs = all_congruences(A)
    for i, c in enumerate(cs):
        for d in cs[:i]:
            assert not (c <= d and c != d)


def test_join_and_meet():
    A = discrete_set(4)
    a = Congruence.from_blocks(A, [[0, 1], [2], [3]])
    b = Congruence.from_blocks(A, [[1, 2], [0], [3]])
    assert a.join(b).blocks() == [(0, 1, 2), (3,)]
    assert a.meet(b) == Congruence.diagonal(A)
    assert a <= a.join(b) and a.meet(b) <= a


@given(algebras(max_size=4))
@settings(max_examples=80, deadline=None)
def test_exactness_both_ways(A):
    for theta in all_congruences(A):
        Q = quotient(A, theta)
        assert Q.surjection.is_surjective()
        assert is_homomorphism(Q.surjection.map, A, Q.algebra)
        assert kernel(Q.surjection) == theta


@given(algebras(max_size=4))
@settings(max_examples=60, deadline=None)
def test_image_of_surjection_is_quotient_by_kernel(A):
    # surjections out of A, sampled as quotients of quotients
    for theta in all_congruences(A):
        e = quotient(A, theta).surjection
        image = e.cod
        assert is_isomorphic(quotient(A, kernel(e)).algebra, image)


def test_homomorphism_theorem_on_random_instances():
    rng = random.Random(11)
    for _ in range(40):
        A = random_algebra(rng, max_size=4, max_ops=1)
        cs = all_congruences(A)
        for theta in cs:
            e = quotient(A, theta).surjection
            for phi in cs:
                h = quotient(A, phi).surjection
                g = factor_through(e, h)
                assert (g is not None) == (theta <= phi)
                if g is not None:
                    assert is_homomorphism(g.map, g.dom, g.cod)
                    assert e.then(g).map == h.map


def test_congruence_generated_random_pairs():
    rng = random.Random(3)
    for _ in range(80):
        A = random_algebra(rng, max_size=5)
        pairs = [(rng.randrange(A.size), rng.randrange(A.size)) for _ in range(rng.randint(0, 3))]
        theta = congruence_generated(A, pairs)
        assert all(theta.related(a, b) for a, b in pairs)
        assert partition_is_congruence(A, theta.labels)
        assert is_congruence(A, theta.labels)
        assert theta.labels == brute_least_congruence(A, pairs)


def test_quotient_composed_with_inclusion_is_homomorphism():
    A = Z4()
    S = subalgebra_generated(A, {2})
    e = quotient(A, congruence_generated(A, [(0, 2)])).surjection
    comp = S.inclusion.then(e)
    assert is_homomorphism(comp.map, S.algebra, e.cod)


def test_isomorphism_search():
    A = left_zero(3)
    perm = (2, 0, 1)
    B = FiniteAlgebra.from_functions(MUL, 3, {"*": lambda a, b: a})
    iso = find_isomorphism(A, B)
    assert iso is not None and is_homomorphism(iso.map, A, B)
    assert not is_isomorphic(Z4(), product([Z2(), Z2()]).algebra)
    assert find_isomorphism(Z2(), chain_semilattice(2)) is None


def test_closure_and_restrict():
    A = Z4()
    assert closure(A, [1]) == {0, 1, 2, 3}
    with pytest.raises(MalformedInput):
        restrict(A, [1])


def test_algebras_are_immutable():
    A = Z2()
    with pytest.raises(AttributeError):
        A.size = 3
    assert hash(A) == hash(Z2())
