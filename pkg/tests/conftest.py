import random
from pathlib import Path

import pytest
from hypothesis import strategies as st

from hspalg.finalg import FiniteAlgebra
from hspalg.sigterm import Signature

FIXTURES = Path(__file__).parent / "fixtures"


def random_algebra(rng: random.Random, max_size=5, max_ops=2, max_arity=2, size=None):
    n = size or rng.randint(1, max_size)
    k = rng.randint(1, max_ops)
    sig = Signature(tuple((f"f{i}", rng.randint(0 if i else 1, max_arity)) for i in range(k)))
    tables = {name: [rng.randrange(n) for _ in range(n**ar)] for name, ar in sig.symbols}
    return FiniteAlgebra(sig, n, tables)


@st.composite
def algebras(draw, max_size=4, sig=None):
    if sig is None:
        sig = draw(st.sampled_from([
            Signature.of(("*", 2)),
            Signature.of(("f", 1)),
            Signature.of(("f", 1), ("c", 0)),
            Signature.of(("*", 2), ("g", 1)),
        ]))
    n = draw(st.integers(1, max_size))
    tables = {name: draw(st.lists(st.integers(0, n - 1), min_size=n**ar, max_size=n**ar))
              for name, ar in sig.symbols}
    return FiniteAlgebra(sig, n, tables)


@pytest.fixture
def fixtures():
    return FIXTURES
