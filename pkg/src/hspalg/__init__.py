"""Finite universal algebra: congruences, varieties, equational logic, ordered and quantitative algebras."""

from .errors import (
    AlgebraError, ArityMismatch, MalformedInput, MalformedProof, NegativeEpsilon, NotACongruence,
    NotStable, SignatureMismatch, SizeLimitExceeded, UnknownVariable,
)
from .sigterm import (
    App, Signature, Term, Var, VarSet, count_terms, enumerate_terms, evaluate, format_term,
    parse_term, substitute,
)
from .finalg import (
    Congruence, FiniteAlgebra, Homomorphism, all_congruences, closure, congruence_generated,
    find_isomorphism, is_congruence, is_homomorphism, is_isomorphic, kernel, power, product,
    quotient, subalgebra_generated,
)
from .variety import (
    FreeAlgebraWitness, HspResult, SatResult, TermEquation, eventual_satisfaction,
    free_algebra_in_variety, hsp_member, satisfies_equation,
)
from .eqlogic import EntailmentVerdict, Proof, check_proof, derive, semantic_entails
from .ordalg import (
    OrderedAlgebra, StablePreorder, TermInequation, quotient_ordered, satisfies_inequation,
    stable_preorder_generated,
)
from .quantalg import (
    INF, OMEGA, ClusteredEquation, ExtMetric, QuantAlgebra, QuantCongruence, QuantEquation,
    QuantHomomorphism, QuantProof, QuantVerdict, check_quant_proof, is_c_reflexive,
    quant_congruence_generated, quant_entails, quant_semantic_entails, quotient_quant,
    satisfies_clustered_equation,
)

__version__ = "0.1.0"
