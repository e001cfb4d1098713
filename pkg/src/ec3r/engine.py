"""Time evolution, probe measurement and 3-level diagnostics on full states."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import (DegenerateCollapseError, DimensionError, KrylovConvergenceError,
                     NumericalError)
from .io import write_csv
from .operators import StructuredHamiltonian, apply_hamiltonian

EIG_MAX_DIM = 4096
KRYLOV_TOL = 1e-10
KRYLOV_MAX_DIM = 64
KRYLOV_MAX_SPLITS = 40
COLLAPSE_MIN_PROB = 1e-15
GRAM_TOL = 1e-9

TIMESERIES_HEADER = ("t", "c0_sq", "c1_sq", "c2_sq", "leakage", "probe_ground")


def trial_rng(master_seed: int, round_index: int, trial_index: int,
              stream: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (seed, round, trial, stream)."""
    seq = np.random.SeedSequence([int(master_seed), int(round_index), int(trial_index),
                                  int(stream)])
    return np.random.Generator(np.random.Philox(seq))


def _check(h: StructuredHamiltonian, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128)
    if v.shape != (h.dim,):
        raise DimensionError(f"state has shape {v.shape}, Hamiltonian needs ({h.dim},)")
    return v


def energy(h: StructuredHamiltonian, v: np.ndarray) -> float:
    return float(np.vdot(v, apply_hamiltonian(h, v)).real)


# -- exact evolution ----------------------------------------------------------

def _evolve_pairs(h: StructuredHamiltonian, v: np.ndarray, t: float) -> np.ndarray:
    sp = h.spectrum
    x, y = v[sp.lower], v[sp.upper]
    cs, sn = sp.cos_th, sp.sin_th
    plus = (cs * x + sn * y) * np.exp(-1j * sp.lam_plus * t)
    minus = (-sn * x + cs * y) * np.exp(-1j * sp.lam_minus * t)
    out = np.empty_like(v)
    out[sp.lower] = cs * plus - sn * minus
    out[sp.upper] = sn * plus + cs * minus
    return out


def _lanczos_exp(h, v, dt, tol, max_dim):
    """One Krylov step of exp(-i H dt) v; None when ``max_dim`` is not enough."""
    beta = np.linalg.norm(v)
    if beta == 0.0:
        return v.copy()
    basis = [v / beta]
    alphas, betas = [], []
    for j in range(max_dim):
        w = apply_hamiltonian(h, basis[j])
        alphas.append(float(np.vdot(basis[j], w).real))
        # two passes of full reorthogonalization
        for _ in range(2):
            q = np.array(basis)
            w = w - q.T @ (q.conj() @ w)
        b = float(np.linalg.norm(w))
        evals, evecs = eigh_tridiagonal(np.array(alphas), np.array(betas))
        small = evecs @ (np.exp(-1j * evals * dt) * evecs[0].conj())
        breakdown = b < 1e-13 * max(1.0, abs(alphas[-1]))
        if breakdown or beta * b * abs(small[-1]) < tol:
            return beta * (np.array(basis).T @ small)
        betas.append(b)
        basis.append(w / b)
    return None


def evolve_krylov(h: StructuredHamiltonian, v, t: float, tol: float = KRYLOV_TOL,
                  max_dim: int = KRYLOV_MAX_DIM) -> np.ndarray:
    v = _check(h, v)
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    remaining, dt, splits = float(t), float(t), 0
    out = v.copy()
    while remaining > 0.0:
        dt = min(dt, remaining)
        step = _lanczos_exp(h, out, dt, tol, max_dim)
        if step is None:
            splits += 1
            if splits > KRYLOV_MAX_SPLITS:
                raise KrylovConvergenceError(
                    f"Krylov did not reach residual {tol} with subspace {max_dim} "
                    f"after {KRYLOV_MAX_SPLITS} time-step splits")
            dt *= 0.5
            continue
        out = step
        remaining -= dt
    return out


def evolve_exact(h: StructuredHamiltonian, v, t: float, method: str = "auto") -> np.ndarray:
    """exp(-i H t) v.

    ``method`` is ``"eig"`` (pairwise Hermitian eigendecomposition),
    ``"krylov"`` (Lanczos) or ``"auto"``, which picks eig up to dimension 4096.
    """
    v = _check(h, v)
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if t == 0:
        return v.copy()
    if method == "auto":
        method = "eig" if h.dim <= EIG_MAX_DIM else "krylov"
    if method == "eig":
        return _evolve_pairs(h, v, t)
    if method == "krylov":
        return evolve_krylov(h, v, t)
    raise ValueError(f"unknown method {method!r}")


def evolve_trotter(h: StructuredHamiltonian, v, t: float, steps: int,
                   order: int = 2) -> np.ndarray:
    """Split H = D + C with D diagonal and C = c X(x)X(x)I; order 2 is Strang D/2 C D/2."""
    v = _check(h, v)
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    dt = t / steps
    cc, ss = np.cos(h.c * dt), np.sin(h.c * dt)
    partner = h.partner
    out = v.copy()
    if order == 1:
        phase = np.exp(-1j * h.diagonal * dt)
        for _ in range(steps):
            out = phase * out
            out = cc * out - 1j * ss * out[partner]
        return out
    half = np.exp(-0.5j * h.diagonal * dt)
    full = half * half
    out = half * out
    for s in range(steps):
        out = cc * out - 1j * ss * out[partner]
        out = (half if s == steps - 1 else full) * out
    return out


# -- measurement --------------------------------------------------------------

def probe_ground_population(v: np.ndarray) -> float:
    v = np.asarray(v)
    half = v.size // 2
    return float(np.clip(np.sum(np.abs(v[:half]) ** 2), 0.0, 1.0))


class Measurement(NamedTuple):
    outcome: int
    collapsed: np.ndarray
    prob_of_outcome: float


def measure_probe(v: np.ndarray, rng: np.random.Generator) -> Measurement:
    v = np.asarray(v, dtype=np.complex128)
    p0 = probe_ground_population(v)
    outcome = 0 if rng.random() < p0 else 1
    prob = p0 if outcome == 0 else 1.0 - p0
    if prob < COLLAPSE_MIN_PROB:
        raise DegenerateCollapseError(
            f"projecting onto probe outcome {outcome} of probability {prob:.3e}")
    half = v.size // 2
    collapsed = np.zeros_like(v)
    keep = slice(0, half) if outcome == 0 else slice(half, None)
    collapsed[keep] = v[keep]
    collapsed /= np.linalg.norm(collapsed)
    return Measurement(outcome, collapsed, prob)


# -- 3-level diagnostics ------------------------------------------------------

def embed(register_state: np.ndarray, probe: int, ancilla: int) -> np.ndarray:
    """|probe>|ancilla>|register_state> as a full state vector."""
    reg = np.asarray(register_state, dtype=np.complex128)
    out = np.zeros(4 * reg.size, dtype=np.complex128)
    start = (2 * probe + ancilla) * reg.size
    out[start:start + reg.size] = reg
    return out


def register_block(v: np.ndarray, probe: int, ancilla: int) -> np.ndarray:
    size = np.asarray(v).size // 4
    start = (2 * probe + ancilla) * size
    return np.asarray(v)[start:start + size]


@dataclass(frozen=True)
class SubspaceDecomposition:
    c0: complex
    c1: complex
    c2: complex
    leakage: float

    @property
    def populations(self) -> tuple[float, float, float]:
        return (abs(self.c0) ** 2, abs(self.c1) ** 2, abs(self.c2) ** 2)

    def as_dict(self) -> dict:
        p0, p1, p2 = self.populations
        return {"c0_sq": p0, "c1_sq": p1, "c2_sq": p2, "leakage": self.leakage}


def subspace_decompose(v: np.ndarray, phi_prev: np.ndarray, phi_sol: np.ndarray,
                       phi_nonsol: np.ndarray) -> SubspaceDecomposition:
    """Amplitudes on |1>|0>|phi_prev>, |0>|1>|phi_sol>, |0>|1>|phi_nonsol>."""
    regs = [np.asarray(r, dtype=np.complex128) for r in (phi_prev, phi_sol, phi_nonsol)]
    v = np.asarray(v, dtype=np.complex128)
    if any(r.size * 4 != v.size for r in regs):
        raise DimensionError("register states do not match the full state dimension")
    # an empty sector (N_k = 0 or N_k = N_{k-1}) is passed as the zero vector
    norms = [np.linalg.norm(r) for r in regs]
    for name, r, nrm in zip(("phi_prev", "phi_sol", "phi_nonsol"), regs, norms):
        if nrm > 0 and abs(nrm - 1.0) > GRAM_TOL:
            raise NumericalError(f"{name} is not normalized (norm {nrm})")
    if abs(np.vdot(regs[1], regs[2])) > GRAM_TOL:
        raise NumericalError("phi_sol and phi_nonsol are not orthogonal")
    c0 = complex(np.vdot(regs[0], register_block(v, 1, 0)))
    c1 = complex(np.vdot(regs[1], register_block(v, 0, 1)))
    c2 = complex(np.vdot(regs[2], register_block(v, 0, 1)))
    total = float(np.vdot(v, v).real)
    leakage = total - abs(c0) ** 2 - abs(c1) ** 2 - abs(c2) ** 2
    return SubspaceDecomposition(c0, c1, c2, max(leakage, 0.0))


def write_timeseries(path, rows) -> None:
    """rows: iterables matching ``TIMESERIES_HEADER``."""
    write_csv(path, TIMESERIES_HEADER, rows)
