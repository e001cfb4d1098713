import itertools

import numpy as np
import pytest

from ec3r.model import WORKED_ORDER_1, WORKED_ORDER_2, UNSAT_4


def enumerate_solutions(n, clauses):
    """Plain itertools enumeration, independent of the vectorized oracle."""
    out = []
    for bits in itertools.product((0, 1), repeat=n):
        if all(sum(bits[q - 1] for q in c) == 1 for c in clauses):
            out.append("".join(map(str, bits)))
    return out


@pytest.fixture
def worked1():
    return WORKED_ORDER_1


@pytest.fixture
def worked2():
    return WORKED_ORDER_2


@pytest.fixture
def unsat4():
    return UNSAT_4


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_state(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)
