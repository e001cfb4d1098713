import math

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply

from ec3r.engine import (SubspaceDecomposition, embed, energy, evolve_exact, evolve_krylov,
                         evolve_trotter, measure_probe, probe_ground_population,
                         subspace_decompose, trial_rng, write_timeseries)
from ec3r.errors import (DegenerateCollapseError, DimensionError, KrylovConvergenceError,
                         NumericalError)
from ec3r.model import Clause
from ec3r.operators import clause_hamiltonian, dense_matrix
from ec3r.protocol import prepare_round_input, round_oracle, uniform_state
from ec3r.reduced import ReducedParams, exact_round_amplitudes, offres_decay

from conftest import random_state

C = 0.02


def sparse_oracle(clause, n, omega=1.0, c=C):
    """Sparse Kronecker build of the full operator for scipy's expm_multiply."""
    big_n = 2 ** n
    z = np.arange(big_n)
    ones = sum((z >> (n - q)) & 1 for q in clause)
    hc = sp.diags((ones != 1).astype(float))
    eye = sp.identity(big_n, format="csr")
    sx = sp.csr_matrix([[0, 1], [1, 0]])
    sz = sp.csr_matrix([[1, 0], [0, -1]])
    h_r = sp.block_diag([-eye, hc])
    return (-0.5 * omega * sp.kron(sz, sp.identity(2 * big_n))
            + sp.kron(sp.identity(2), h_r)
            + c * sp.kron(sp.kron(sx, sx), eye)).tocsr().astype(complex)


@pytest.fixture
def round1_worked(worked1):
    h = clause_hamiltonian(worked1.clauses[0], 8, 1.0, C)
    return h, prepare_round_input(uniform_state(8))


# -- exact evolution -----------------------------------------------------------

@pytest.mark.parametrize("n, clause", [(3, (1, 2, 3)), (4, (1, 2, 4))])
@pytest.mark.parametrize("t", [0.7, 13.0, 250.0])
def test_eig_matches_dense_expm(n, clause, t, rng):
    h = clause_hamiltonian(Clause(*clause), n, 1.0, 0.05)
    v = random_state(rng, h.dim)
    ref = expm(-1j * dense_matrix(h) * t) @ v
    assert np.max(np.abs(evolve_exact(h, v, t, "eig") - ref)) < 1e-10


def test_eig_matches_sparse_expm_multiply_n8(round1_worked):
    h, psi0 = round1_worked
    ref = expm_multiply(-1j * 128.25 * sparse_oracle((1, 2, 8), 8), psi0)
    assert np.max(np.abs(evolve_exact(h, psi0, 128.25) - ref)) < 1e-9


def test_t_zero_identity(rng):
    h = clause_hamiltonian(Clause(1, 2, 3), 5)
    v = random_state(rng, h.dim)
    assert np.array_equal(evolve_exact(h, v, 0.0), v)
    assert np.allclose(evolve_krylov(h, v, 0.0), v, atol=1e-14)


@pytest.mark.parametrize("method", ["eig", "krylov"])
def test_unitarity_energy_composition(method, rng):
    h = clause_hamiltonian(Clause(2, 3, 5), 6, 1.0, 0.05)
    v = random_state(rng, h.dim)
    e0 = energy(h, v)
    for t in (0.3, 17.0, 140.0):
        out = evolve_exact(h, v, t, method)
        assert abs(np.linalg.norm(out) - 1) < 1e-10
        assert abs(energy(h, out) - e0) < 1e-9
    two = evolve_exact(h, evolve_exact(h, v, 31.0, method), 52.0, method)
    assert np.max(np.abs(two - evolve_exact(h, v, 83.0, method))) < 1e-8


def test_krylov_matches_eig_random_state(rng):
    h = clause_hamiltonian(Clause(1, 4, 7), 7, 1.0, 0.05)
    v = random_state(rng, h.dim)
    for t in (5.0, 60.0):
        assert np.max(np.abs(evolve_krylov(h, v, t) - evolve_exact(h, v, t, "eig"))) < 1e-9


def test_auto_switches_to_krylov_above_4096(rng):
    n = 11
    h = clause_hamiltonian(Clause(1, 5, 11), n, 1.0, C)
    assert h.dim == 8192
    v = random_state(rng, h.dim)
    ref = expm_multiply(-1j * 40.0 * sparse_oracle((1, 5, 11), n), v)
    assert np.max(np.abs(evolve_exact(h, v, 40.0) - ref)) < 1e-9
    psi0 = prepare_round_input(uniform_state(n))
    out = evolve_exact(h, psi0, 300.0)
    assert np.max(np.abs(out - evolve_exact(h, psi0, 300.0, "eig"))) < 1e-9


def test_krylov_failure_is_explicit(rng):
    h = clause_hamiltonian(Clause(1, 2, 3), 5, 1.0, 0.05)
    v = random_state(rng, h.dim)
    with pytest.raises(KrylovConvergenceError):
        evolve_krylov(h, v, 1e14, max_dim=2)


def test_round1_decay_follows_two_block_dynamics(round1_worked):
    # the resonant register states swap at rate c; the rest stay detuned by 1
    h, psi0 = round1_worked
    p = 3 / 8
    for t in (math.pi / (2 * C * math.sqrt(p)), math.pi / (2 * C), 300.0):
        expected = p * math.sin(C * t) ** 2 + (1 - p) * offres_decay(C, t)
        assert abs(probe_ground_population(evolve_exact(h, psi0, t)) - expected) < 1e-12
    # at the three-level resonance time only ~11% of the probe population has decayed
    t_res = math.pi / (2 * C * math.sqrt(p))
    assert probe_ground_population(evolve_exact(h, psi0, t_res)) == pytest.approx(0.1124, abs=1e-3)


# -- Trotter -------------------------------------------------------------------

def test_trotter_exact_without_coupling(rng):
    h = clause_hamiltonian(Clause(1, 2, 3), 4, 1.0, 1e-300)
    v = random_state(rng, h.dim)
    for order in (1, 2):
        out = evolve_trotter(h, v, 77.0, 3, order)
        assert np.max(np.abs(out - evolve_exact(h, v, 77.0))) < 1e-12


def _slope(steps, errs):
    return np.polyfit(np.log(steps), np.log(errs), 1)[0]


@pytest.mark.parametrize("order, slope", [(1, -1.0), (2, -2.0)])
def test_trotter_order(order, slope, round1_worked):
    h, psi0 = round1_worked
    t = 128.25
    ref = evolve_exact(h, psi0, t)
    steps = [256, 512, 1024, 2048]
    errs = [np.max(np.abs(evolve_trotter(h, psi0, t, s, order) - ref)) for s in steps]
    assert abs(_slope(steps, errs) - slope) < 0.2


def test_trotter_long_time(round1_worked):
    h, psi0 = round1_worked
    ref = evolve_exact(h, psi0, 408.1)
    err = np.max(np.abs(evolve_trotter(h, psi0, 408.1, 4096, 2) - ref))
    assert err < 1e-5
    err2 = np.max(np.abs(evolve_trotter(h, psi0, 408.1, 8192, 2) - ref))
    assert 3.5 < err / err2 < 4.5


def test_trotter_unitary_and_validates(rng):
    h = clause_hamiltonian(Clause(1, 2, 3), 4)
    v = random_state(rng, h.dim)
    assert abs(np.linalg.norm(evolve_trotter(h, v, 50.0, 7, 2)) - 1) < 1e-12
    with pytest.raises(ValueError):
        evolve_trotter(h, v, 1.0, 0)
    with pytest.raises(ValueError):
        evolve_trotter(h, v, 1.0, 4, order=3)
    with pytest.raises(DimensionError):
        evolve_trotter(h, v[:8], 1.0, 4)


# -- measurement ---------------------------------------------------------------

def test_probe_population_examples(rng):
    phi = uniform_state(3)
    assert probe_ground_population(embed(phi, 1, 0)) == 0.0
    assert probe_ground_population(embed(phi, 0, 1)) == pytest.approx(1.0)
    mixed = (embed(phi, 0, 1) + embed(random_state(rng, 8), 1, 1)) / math.sqrt(2)
    assert probe_ground_population(mixed) == pytest.approx(0.5)


def test_measure_deterministic_cases():
    phi = uniform_state(3)
    up, down = embed(phi, 1, 0), embed(phi, 0, 1)
    for i in range(20):
        m = measure_probe(down, trial_rng(0, 0, i))
        assert m.outcome == 0 and np.allclose(m.collapsed, down)
        assert m.prob_of_outcome == pytest.approx(1)
        assert measure_probe(up, trial_rng(0, 0, i)).outcome == 1


def test_measure_statistics():
    phi = uniform_state(3)
    v = (embed(phi, 0, 1) + embed(phi, 1, 0)) / math.sqrt(2)
    draws = [measure_probe(v, trial_rng(7, 1, i)).outcome for i in range(10_000)]
    assert abs(draws.count(0) / 10_000 - 0.5) < 0.02


def test_collapse_idempotent(rng):
    v = random_state(rng, 32)
    for i in range(50):
        first = measure_probe(v, trial_rng(1, 2, i))
        again = measure_probe(first.collapsed, trial_rng(3, 4, i))
        assert again.outcome == first.outcome and again.prob_of_outcome == pytest.approx(1)


def test_degenerate_collapse():
    class Zero:
        def random(self):
            return 0.0
    v = embed(uniform_state(3), 1, 0)
    v[0] = 1e-9  # probe-ground weight 1e-18
    with pytest.raises(DegenerateCollapseError):
        measure_probe(v / np.linalg.norm(v), Zero())


def test_trial_rng_reproducible():
    a = trial_rng(5, 2, 9).random(4)
    assert np.array_equal(a, trial_rng(5, 2, 9).random(4))
    assert not np.array_equal(a, trial_rng(5, 2, 10).random(4))


# -- decomposition -------------------------------------------------------------

def test_decompose_basis_state(worked1):
    o = round_oracle(worked1, 1)
    d = subspace_decompose(embed(o.phi_prev, 1, 0), o.phi_prev, o.phi_sol, o.phi_nonsol)
    assert d.c0 == pytest.approx(1) and abs(d.c1) < 1e-15 and d.leakage < 1e-12


def test_decompose_rejects_non_orthogonal(worked1):
    o = round_oracle(worked1, 1)
    with pytest.raises(NumericalError):
        subspace_decompose(embed(o.phi_prev, 1, 0), o.phi_prev, o.phi_sol, o.phi_sol)


def test_decomposition_matches_closed_form_sweep(worked1, round1_worked):
    h, psi0 = round1_worked
    o = round_oracle(worked1, 1)
    ts = np.linspace(0, 1200, 61)
    expected = exact_round_amplitudes(ReducedParams(C, 3 / 8), ts)
    for t, row in zip(ts, expected):
        d = subspace_decompose(evolve_exact(h, psi0, t), o.phi_prev, o.phi_sol, o.phi_nonsol)
        assert np.max(np.abs(np.array([d.c0, d.c1, d.c2]) - row)) < 1e-12
        assert abs(sum(d.populations) + d.leakage - 1) < 1e-9


def test_ratio_at_decay_peak(worked1, round1_worked):
    h, psi0 = round1_worked
    o = round_oracle(worked1, 1)
    d = subspace_decompose(evolve_exact(h, psi0, math.pi / (2 * C)), o.phi_prev, o.phi_sol,
                           o.phi_nonsol)
    c1_sq, c2_sq = d.populations[1:]
    assert c1_sq / c2_sq > 9


def test_timeseries_csv(tmp_path):
    path = tmp_path / "ts.csv"
    d = SubspaceDecomposition(1, 0, 0, 0.0)
    write_timeseries(path, [(0.0, *d.populations, d.leakage, 0.0)])
    lines = path.read_text().splitlines()
    assert lines[0] == "t,c0_sq,c1_sq,c2_sq,leakage,probe_ground"
    assert lines[1] == "0,1,0,0,0,0"
