import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ec3r.errors import CouplingGuardError, DimensionError
from ec3r.model import Clause
from ec3r.operators import (apply_hamiltonian, clause_diagonal, clause_hamiltonian,
                            dense_matrix, dump_dense, full_hamiltonian, load_dense,
                            register_diagonal)

from conftest import random_state

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def kron_oracle(clause, n, omega, c):
    """Full operator assembled term by term from Pauli matrices and explicit projectors."""
    big_n = 2 ** n
    hc = np.zeros((big_n, big_n))
    for z in range(big_n):
        bits = [(z >> (n - 1 - q)) & 1 for q in range(n)]
        hc[z, z] = 0.0 if sum(bits[q - 1] for q in clause) == 1 else 1.0
    p0 = np.diag([1.0, 0.0])
    p1 = np.diag([0.0, 1.0])
    h_r = -np.kron(p0, np.eye(big_n)) + np.kron(p1, hc)
    return (-0.5 * omega * np.kron(SZ, np.eye(2 * big_n))
            + np.kron(np.eye(2), h_r)
            + c * np.kron(np.kron(SX, SX), np.eye(big_n)))


def test_clause_diagonal_n3():
    d = clause_diagonal(Clause(1, 2, 3), 3)
    # z = 000 .. 111; zeros at 001, 010, 100
    assert d.tolist() == [1, 0, 0, 1, 0, 1, 1, 1]
    assert d.sum() == 5


def test_clause_diagonal_worked_first_clause():
    assert np.count_nonzero(clause_diagonal(Clause(1, 2, 8), 8) == 0) == 96


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 10), st.data())
def test_clause_diagonal_zero_count(n, data):
    idx = data.draw(st.lists(st.integers(1, n), min_size=3, max_size=3, unique=True))
    d = clause_diagonal(Clause(*idx), n)
    assert np.count_nonzero(d == 0) == 3 * 2 ** (n - 3)
    assert set(np.unique(d)) <= {0.0, 1.0}


def test_register_diagonal_layout():
    r = register_diagonal(clause_diagonal(Clause(1, 2, 3), 3))
    assert r[:8].tolist() == [-1] * 8
    assert r[8:].tolist() == [1, 0, 0, 1, 0, 1, 1, 1]
    assert r.min() == -1 and r.max() <= 1


def test_register_diagonal_rejects_bad_length():
    with pytest.raises(DimensionError):
        register_diagonal(np.zeros(6))


def test_resonance_gap_is_omega():
    h = clause_hamiltonian(Clause(1, 2, 3), 3)
    # |1,0,j>  vs  |0,1,j_sol>  (index 001 satisfies the clause)
    gap = h.diagonal[(1 << 4) | 1] - h.diagonal[(1 << 3) | 1]
    assert gap == 0.0
    assert register_diagonal(clause_diagonal(Clause(1, 2, 3), 3))[8 + 1] - (-1) == 1.0


def test_coupling_guard():
    reg = register_diagonal(clause_diagonal(Clause(1, 2, 3), 3))
    full_hamiltonian(reg, 1.0, 0.02)
    with pytest.raises(CouplingGuardError):
        full_hamiltonian(reg, 1.0, 0.5)
    full_hamiltonian(reg, 1.0, 0.5, allow_strong_coupling=True)
    for omega, c in [(0.0, 0.02), (1.0, 0.0), (1.0, -0.1)]:
        with pytest.raises(CouplingGuardError):
            full_hamiltonian(reg, omega, c)


@pytest.mark.parametrize("n, clause", [(3, (1, 2, 3)), (4, (1, 3, 4)), (4, (2, 3, 4))])
@pytest.mark.parametrize("omega, c", [(1.0, 0.02), (1.3, 0.1)])
def test_dense_equivalence(n, clause, omega, c, rng):
    h = clause_hamiltonian(Clause(*clause), n, omega, c)
    oracle = kron_oracle(clause, n, omega, c)
    assert np.allclose(dense_matrix(h), oracle, atol=1e-14, rtol=0)
    for _ in range(4):
        v = random_state(rng, h.dim)
        assert np.max(np.abs(apply_hamiltonian(h, v) - oracle @ v)) < 1e-14


def test_apply_examples():
    n, c = 3, 0.02
    h = clause_hamiltonian(Clause(1, 2, 3), n, 1.0, c)
    size = 2 ** n

    def basis(qp, qa, j):
        v = np.zeros(4 * size, dtype=complex)
        v[(2 * qp + qa) * size + j] = 1
        return v

    j_sol, j_non = 0b001, 0b011
    out = apply_hamiltonian(h, basis(1, 0, 5))
    assert np.allclose(out, -0.5 * basis(1, 0, 5) + c * basis(0, 1, 5))
    out = apply_hamiltonian(h, basis(0, 1, j_sol))
    assert np.allclose(out, -0.5 * basis(0, 1, j_sol) + c * basis(1, 0, j_sol))
    out = apply_hamiltonian(h, basis(0, 1, j_non))
    assert np.allclose(out, 0.5 * basis(0, 1, j_non) + c * basis(1, 0, j_non))


def test_apply_dimension_mismatch():
    h = clause_hamiltonian(Clause(1, 2, 3), 3)
    with pytest.raises(DimensionError):
        apply_hamiltonian(h, np.zeros(16))


def test_dense_guard():
    with pytest.raises(DimensionError):
        dense_matrix(clause_hamiltonian(Clause(1, 2, 3), 5))


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 9), st.integers(0, 2 ** 31 - 1))
def test_hermitian_and_linear(n, seed):
    rng = np.random.default_rng(seed)
    clause = Clause(*(rng.choice(n, 3, replace=False) + 1).tolist())
    h = clause_hamiltonian(clause, n, 1.0, 0.05)
    u, v = random_state(rng, h.dim), random_state(rng, h.dim)
    assert abs(np.vdot(u, apply_hamiltonian(h, v))
               - np.conj(np.vdot(v, apply_hamiltonian(h, u)))) < 1e-12
    a, b = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
    lhs = apply_hamiltonian(h, a * u + b * v)
    rhs = a * apply_hamiltonian(h, u) + b * apply_hamiltonian(h, v)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_block_structure(rng):
    n = 4
    h = clause_hamiltonian(Clause(1, 2, 4), n)
    size = 2 ** n
    dense = dense_matrix(h).real
    sector = lambda i: i // size  # (qp, qa) as 0..3
    for i, j in zip(*np.nonzero(dense)):
        if i != j:
            assert {sector(i), sector(j)} in ({2, 1}, {0, 3})
    # the diagonal part keeps the protocol sector (1,0)/(0,1) in place
    v = np.zeros(h.dim, dtype=complex)
    v[2 * size:3 * size] = random_state(rng, size)
    d = h.diagonal * v
    assert np.all(d[:size] == 0) and np.all(d[3 * size:] == 0)


def test_partner_is_involution():
    h = clause_hamiltonian(Clause(1, 2, 3), 5)
    assert np.array_equal(h.partner[h.partner], np.arange(h.dim))
    assert np.all(h.partner != np.arange(h.dim))


def test_pair_spectrum_matches_dense():
    h = clause_hamiltonian(Clause(1, 3, 4), 4)
    ours = np.sort(h.spectrum.eigenvalues())
    assert np.allclose(ours, np.linalg.eigvalsh(dense_matrix(h)), atol=1e-13)


def test_dense_dump_roundtrip(tmp_path):
    h = clause_hamiltonian(Clause(1, 2, 3), 3)
    path = tmp_path / "h.bin"
    dump_dense(h, path)
    raw = np.fromfile(path, dtype="<f8")
    assert raw.size == 2 * h.dim ** 2
    dense = dense_matrix(h)
    assert raw[0] == dense[0, 0].real and raw[1] == dense[0, 0].imag
    assert np.array_equal(load_dense(path, 3), dense)
