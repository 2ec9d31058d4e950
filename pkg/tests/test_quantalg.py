import itertools
import json
import random
from fractions import Fraction as F

import pytest

from hspalg.corpus import discrete_set, line_metric
from hspalg.errors import MalformedInput, MalformedProof, NegativeEpsilon, NotACongruence
from hspalg.finalg import FiniteAlgebra, is_homomorphism
from hspalg.quantalg import (
    INF, OMEGA, ClusteredEquation, ExtMetric, QuantAlgebra, QuantCongruence, QuantEquation,
    QuantHomomorphism, QuantProof, check_quant_proof, ext, find_quant_countermodel, format_ext,
    is_c_reflexive, parse_c, quant_congruence_generated, quant_entails, quant_product,
    quant_semantic_entails, quant_subalgebra, quotient_quant, satisfies_clustered_equation,
)
from hspalg.sigterm import Signature, VarSet, parse_term

from oracles import brute_c_reflexive, derivation_oracle
from qcorpus import MEET, UNARY, line_algebra, random_constraints, random_quant, small_corpus

M3 = QuantAlgebra(discrete_set(3), [[0, 1, 2], [1, 0, 1], [2, 1, 0]])
LINE = QuantAlgebra(discrete_set(3), line_metric([0, F(1, 2), 1]))
XY = VarSet.of("x", "y")
F1 = Signature.of(("f", 1))
ABC = Signature.of(("a", 0), ("b", 0), ("c", 0), ("*", 2))


def qe(lhs, rhs, eps, vars="xy", sig=None):
    return QuantEquation.parse(list(vars), lhs, rhs, eps, sig)


# --- values and metrics ---------------------------------------------------------------

def test_extended_rationals():
    assert ext("3/5") == F(3, 5)
    assert ext("inf") == INF and ext(2) == 2
    assert format_ext(INF) == "inf" and format_ext(F(6, 5)) == "6/5"
    assert INF + F(1) == INF
    with pytest.raises(NegativeEpsilon):
        ext("-1/5")
    with pytest.raises(MalformedInput):
        ext(0.5)
    assert parse_c("omega") == OMEGA and parse_c(3) == 3
    with pytest.raises(MalformedInput):
        parse_c(1)


def test_metric_validation_and_loading():
    with pytest.raises(MalformedInput):
        ExtMetric(3, [[0, 1, 5], [1, 0, 1], [5, 1, 0]])  # triangle fails
    with pytest.raises(MalformedInput):
        ExtMetric(2, [[0, 0], [0, 0]])
    m = ExtMetric.from_json({"size": 3, "d": [["0", "1", "2"], ["0", "1"], ["0"]]})
    assert m.d == M3.d
    assert ExtMetric.from_json(m.to_json()) == m
    with pytest.raises(NegativeEpsilon):
        ExtMetric.from_json({"size": 2, "d": [["0", "-1"], ["0"]]})


def test_nonexpansiveness_is_checked():
    base = FiniteAlgebra(Signature.of(("f", 1)), 2, {"f": [0, 1]})
    QuantAlgebra(base, [[0, 1], [1, 0]])
    stretch = FiniteAlgebra(Signature.of(("f", 1)), 3, {"f": [0, 2, 2]})
    with pytest.raises(MalformedInput):
        QuantAlgebra(stretch, line_metric([0, F(1, 2), 1]))


def test_quant_algebra_json_round_trip():
    A = line_algebra(random.Random(1), 3, "min")
    assert QuantAlgebra.from_json(json.loads(json.dumps(A.to_json()))) == A


# --- congruences ------------------------------------------------------------------------

def test_congruence_examples():
    assert quant_congruence_generated(M3, []).p == M3.d
    assert quant_congruence_generated(M3, [(0, 1, INF), (1, 2, "inf")]).p == M3.d
    p = quant_congruence_generated(M3, [(0, 1, F(1, 5))])
    assert p.p[0][1] == F(1, 5) and p.p[1][2] == 1 and p.p[0][2] == F(6, 5)
    assert p.is_valid()


def test_quotient_examples():
    q = quotient_quant(M3, quant_congruence_generated(M3, []))
    assert q.algebra == M3
    two = QuantAlgebra(discrete_set(2), [[0, 1], [1, 0]])
    q = quotient_quant(two, quant_congruence_generated(two, [(0, 1, 0)]))
    assert q.algebra.size == 1
    q = quotient_quant(M3, quant_congruence_generated(M3, [(0, 1, F(1, 5))]))
    assert q.algebra.size == 3 and q.algebra.d[0][1] == F(1, 5)
    with pytest.raises(NotACongruence):
        quotient_quant(M3, QuantCongruence(M3, [[0, 5, 0], [5, 0, 0], [0, 0, 0]]))


def test_congruence_matches_bounded_derivation_oracle():
    rng = random.Random(2024)
    for _ in range(100):
        A = random_quant(rng)
        cons = random_constraints(rng, A)
        p = quant_congruence_generated(A, cons)
        assert p.is_valid()
        assert all(p.p[a][b] <= e for a, b, e in cons)
        hist = derivation_oracle(A, cons, rounds=4 * A.size * A.size + 4)
        assert hist[-1] == hist[-2], "oracle did not reach its fixpoint"
        for k in hist:
            assert all(p.p[a][b] <= k[a][b] for a in range(A.size) for b in range(A.size))
        assert p.p == hist[-1]
        q = quotient_quant(A, p)
        assert q.surjection.induced() == p.p
        assert q.surjection.is_homomorphism() and q.surjection.is_nonexpansive()


def test_quantitative_homomorphism_theorem():
    rng = random.Random(77)
    checked = 0
    for _ in range(60):
        A = random_quant(rng, max_size=4)
        p = quant_congruence_generated(A, random_constraints(rng, A))
        q = quant_congruence_generated(A, random_constraints(rng, A))
        e, f = quotient_quant(A, p).surjection, quotient_quant(A, q).surjection
        g = {}
        ok = True
        for a in range(A.size):
            if g.setdefault(e.map[a], f.map[a]) != f.map[a]:
                ok = False
        if ok:
            h = QuantHomomorphism(e.cod, f.cod, tuple(g[b] for b in range(e.cod.size)))
            ok = h.is_nonexpansive() and is_homomorphism(h.map, e.cod.base, f.cod.base)
        below = all(q.p[a][b] <= p.p[a][b] for a in range(A.size) for b in range(A.size))
        assert ok == below
        checked += below
    assert checked > 0


# --- c-reflexivity ----------------------------------------------------------------------

def _surjections(rng, count=40):
    out = []
    for _ in range(count):
        A = random_quant(rng)
        p = quant_congruence_generated(A, random_constraints(rng, A))
        out.append(quotient_quant(A, p).surjection)
    return out


def test_c_reflexive_examples():
    inf2 = QuantAlgebra(discrete_set(2), [[0, INF], [INF, 0]])
    one2 = QuantAlgebra(discrete_set(2), [[0, 1], [1, 0]])
    e = QuantHomomorphism(inf2, one2, (0, 1))
    assert is_c_reflexive(e, 2)
    res = is_c_reflexive(e, 3)
    assert not res and res.failing_subset == (0, 1)
    assert not is_c_reflexive(e, OMEGA)
    ident = QuantHomomorphism(M3, M3, (0, 1, 2))
    assert all(is_c_reflexive(ident, c) for c in (2, 3, 4, 7, OMEGA))


def test_c_reflexive_matches_brute_force_and_is_monotone():
    rng = random.Random(8)
    for e in _surjections(rng, 60):
        assert is_c_reflexive(e, 2)
        answers = []
        for c in (2, 3, 4, 5, OMEGA):
            got = bool(is_c_reflexive(e, c))
            assert got == brute_c_reflexive(e.dom.d, e.cod.d, e.map, c)
            answers.append(got)
        # once false, false for every larger c
        assert answers == sorted(answers, reverse=True)


def test_c_reflexive_rejects_non_surjections():
    e = QuantHomomorphism(M3, M3, (0, 0, 0))
    with pytest.raises(MalformedInput):
        is_c_reflexive(e, 2)


# --- clustered equations ------------------------------------------------------------------

def test_clustered_examples():
    assert satisfies_clustered_equation(LINE, ClusteredEquation.unconditional(XY, parse_term("x", XY), parse_term("y", XY), INF))
    cond = ClusteredEquation(XY, ((0, 1),), ((0, 1, F(1, 2)),), parse_term("x", XY), parse_term("y", XY), F(3, 5), 3)
    assert satisfies_clustered_equation(LINE, cond)
    res = satisfies_clustered_equation(LINE, ClusteredEquation.unconditional(XY, parse_term("x", XY), parse_term("y", XY), F(1, 2)))
    assert not res and res.witness_dict(XY) == {"x": 0, "y": 2}


def test_clustered_validation_and_json():
    data = {"vars": ["x", "y"], "clusters": [["x", "y"]], "conditions": [["x", "y", "1/5"]],
            "conclusion": ["x", "y", "2/5"], "c": 3}
    e = ClusteredEquation.from_json(data)
    assert e.to_json() == data
    with pytest.raises(MalformedInput):
        ClusteredEquation.from_json({**data, "c": 2})  # a cluster of size 2 needs c >= 3
    with pytest.raises(MalformedInput):
        ClusteredEquation.from_json({**data, "clusters": [["x"], ["y"]]})
    with pytest.raises(NegativeEpsilon):
        ClusteredEquation.from_json({**data, "conclusion": ["x", "y", "-1"]})
    assert ClusteredEquation.from_json({**data, "c": "omega"}).c == OMEGA


CLUSTERED = [
    ClusteredEquation.unconditional(XY, parse_term("*(x,y)", XY), parse_term("*(y,x)", XY), 0),
    ClusteredEquation.unconditional(XY, parse_term("*(x,y)", XY), parse_term("x", XY), F(1, 2)),
    ClusteredEquation(XY, ((0, 1),), ((0, 1, F(1, 3)),), parse_term("*(x,y)", XY), parse_term("x", XY), F(1, 3), 3),
    ClusteredEquation(XY, ((0, 1),), ((0, 1, F(1, 4)),), parse_term("*(x,x)", XY), parse_term("*(y,y)", XY), F(1, 4), 3),
    ClusteredEquation(XY, ((0, 1),), ((0, 1, 0),), parse_term("x", XY), parse_term("y", XY), 0, 3),
]


def test_clustered_closure_properties():
    algs = small_corpus(MEET, seed=3, count=25)
    for A in algs:
        for e in CLUSTERED:
            if not satisfies_clustered_equation(A, e):
                continue
            for S in ([0], [A.size - 1], list(range(A.size))):
                sub, _ = quant_subalgebra(A, S)
                assert satisfies_clustered_equation(sub, e)
            for B in algs[:8]:
                if satisfies_clustered_equation(B, e):
                    P, _ = quant_product([A, B])
                    assert satisfies_clustered_equation(P, e)
            rng = random.Random(A.size)
            for _ in range(4):
                p = quant_congruence_generated(A, random_constraints(rng, A))
                q = quotient_quant(A, p)
                if is_c_reflexive(q.surjection, e.c):
                    assert satisfies_clustered_equation(q.algebra, e)


# --- proofs ------------------------------------------------------------------------------

def test_check_quant_proof_examples():
    X3 = VarSet.of("x", "y", "z")
    refl = QuantProof("Refl", qe("x", "x", 0, "x"))
    assert check_quant_proof(refl, [])
    g = [qe("x", "y", "3/10", "xyz"), qe("y", "z", "2/5", "xyz")]
    left, right = QuantProof("Axiom", g[0], axiom=0), QuantProof("Axiom", g[1], axiom=1)
    tri = QuantProof("Triang", qe("x", "z", "7/10", "xyz"), (left, right))
    assert check_quant_proof(tri, g)
    wrong = QuantProof("Triang", qe("x", "z", "3/5", "xyz"), (left, right))
    assert not check_quant_proof(wrong, g)
    down = QuantProof("Max", qe("x", "y", "1/5", "xyz"), (left,))
    assert not check_quant_proof(down, g)
    up = QuantProof("Max", qe("x", "y", "1/2", "xyz"), (left,))
    assert check_quant_proof(up, g)
    same = QuantProof("Max", qe("x", "y", "3/10", "xyz"), (left,))
    assert not check_quant_proof(same, g)


def test_arch_at_finite_scale():
    g = [qe("x", "y", "1/5")]
    ax = QuantProof("Axiom", g[0], axiom=0)
    assert check_quant_proof(QuantProof("Arch", qe("x", "y", "1/5"), (ax,)), g)
    assert check_quant_proof(QuantProof("Arch", qe("x", "y", "1/2"), (ax,)), g)
    assert not check_quant_proof(QuantProof("Arch", qe("x", "y", "1/10"), (ax,)), g)
    assert check_quant_proof(QuantProof("Arch", qe("x", "y", "inf")), [])
    assert not check_quant_proof(QuantProof("Arch", qe("x", "y", "1")), [])


def test_quant_proof_structural_errors():
    g = [qe("x", "y", "1/5")]
    with pytest.raises(MalformedProof) as err:
        check_quant_proof(QuantProof("Sym", qe("y", "x", "1/5"), (QuantProof("Axiom", g[0], axiom=4),)), g)
    assert err.value.path == (0,)
    with pytest.raises(MalformedProof):
        QuantProof.from_json({"rule": "Refl"})


def test_quant_entails_examples():
    v = quant_entails([], qe("*(x,y)", "*(x,y)", 0), 1)
    assert v.proved and v.proof.rule == "Refl"
    # axioms between variables are universal, so Subst alone gives x =_{1/5} z
    g = [qe("x", "y", "1/5", "xy"), qe("y", "z", "1/5", "yz")]
    v = quant_entails(g, qe("x", "z", "2/5", "xyz"), 0)
    assert v.proved and check_quant_proof(v.proof, g)
    g = [qe("a", "b", "1/5", "", ABC), qe("b", "c", "1/5", "", ABC)]
    v = quant_entails(g, qe("a", "c", "2/5", "", ABC), 1, ABC)
    assert v.proved and "Triang" in v.proof.rules_used() and check_quant_proof(v.proof, g, ABC)
    g = [qe("x", "y", "1/5", sig=F1)]
    v = quant_entails(g, qe("f(x)", "f(y)", "1/5", sig=F1), 1, F1)
    assert v.proved and check_quant_proof(v.proof, g, F1)


def test_quant_entails_weakening_and_bounds():
    g = [qe("x", "y", "1/5")]
    v = quant_entails(g, qe("x", "y", "1/2"), 0)
    assert v.proved and v.proof.rule == "Max" and check_quant_proof(v.proof, g)
    v = quant_entails(g, qe("x", "y", "1/10"), 0)
    assert v.status == "bound" and v.best == F(1, 5)
    v = quant_entails([], qe("x", "y", "1"), 0)
    assert v.status == "unknown"
    v = quant_entails([], qe("x", "y", "inf"), 0)
    assert v.proved and check_quant_proof(v.proof, [])


def test_cong_proof_reconstruction():
    S = ABC
    g = [qe("a", "b", "1/5", "", S), qe("b", "c", "1/3", "", S)]
    goal = qe("*(a,b)", "*(b,c)", "1/3", "", S)
    v = quant_entails(g, goal, 2, S)
    assert v.proved
    assert {"Cong", "Max"} <= v.proof.rules_used()
    assert check_quant_proof(v.proof, g, S)
    data = json.loads(json.dumps(v.proof.to_json()))
    assert check_quant_proof(QuantProof.from_json(data, S), g, S)


def test_quant_countermodels():
    g = [qe("x", "y", "1/5", sig=F1)]
    v = quant_semantic_entails(g, qe("f(x)", "f(y)", "1/10", sig=F1), 1, F1)
    assert v.status == "refuted"
    A = v.countermodel
    assert all(satisfies_clustered_equation(A, h.as_clustered()) for h in g)
    assert not satisfies_clustered_equation(A, qe("f(x)", "f(y)", "1/10", sig=F1).as_clustered())
    assert find_quant_countermodel(g, qe("f(x)", "f(y)", "1/5", sig=F1), F1) is None


QUANT_CASES = [
    ([qe("x", "y", "1/5", "xy"), qe("y", "z", "1/5", "yz")], qe("x", "z", "2/5", "xyz"), 0, Signature()),
    ([qe("x", "y", "1/4")], qe("*(x,x)", "*(y,y)", "1/4"), 1, MEET),
    ([qe("x", "y", "1/4")], qe("*(x,y)", "*(y,x)", "1/4"), 1, MEET),
    ([qe("*(x,y)", "x", "1/3")], qe("*(*(x,y),y)", "x", "2/3"), 2, MEET),
    ([qe("f(x)", "x", "1/6", "x", UNARY)], qe("f(f(x))", "x", "1/3", "x", UNARY), 2, UNARY),
    ([qe("x", "y", "1/2")], qe("f(x)", "f(y)", "1", "xy", UNARY), 1, UNARY),
]


@pytest.mark.parametrize("gamma,goal,depth,sig", QUANT_CASES)
def test_quant_entails_soundness_on_corpus(gamma, goal, depth, sig):
    v = quant_entails(gamma, goal, depth, sig)
    assert v.proved
    assert check_quant_proof(v.proof, gamma, sig)
    for A in small_corpus(sig, seed=11, count=40):
        if all(satisfies_clustered_equation(A, g.as_clustered()) for g in gamma):
            assert satisfies_clustered_equation(A, goal.as_clustered())
