"""Clause/register diagonals and the structured probe-coupled Hamiltonian.

Basis index layout for the full (n+2)-qubit state: probe bit is the most
significant, the ancilla next, then z1..zn.  The full operator

    H = -(omega/2) Z (x) I (x) I_N  +  I (x) H_R  +  c X (x) X (x) I_N

is diagonal apart from the X(x)X term, which pairs every amplitude
``(q_p, q_a, j)`` with ``(1-q_p, 1-q_a, j)``.  The operator therefore splits
into 2^(n+1) independent 2x2 blocks, which both ``apply_hamiltonian`` and the
exact propagator exploit.  No dense 2^(n+2) square matrix is built outside the
test-only helpers.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import CouplingGuardError, DimensionError
from .model import Clause, satisfied_mask

DEFAULT_OMEGA = 1.0
DEFAULT_C = 0.02
COUPLING_RATIO = 0.1
DENSE_MAX_N = 4


def clause_diagonal(clause: Clause, n: int) -> np.ndarray:
    """h_C(z) for every basis index z, as float64 of length 2^n."""
    return (~satisfied_mask(clause, n)).astype(np.float64)


def register_diagonal(clause_diag: np.ndarray) -> np.ndarray:
    clause_diag = np.asarray(clause_diag, dtype=np.float64)
    size = clause_diag.size
    if clause_diag.ndim != 1 or size < 1 or size & (size - 1):
        raise DimensionError(f"clause diagonal length must be a power of two, got {size}")
    return np.concatenate([-np.ones(size), clause_diag])


@dataclass(frozen=True, eq=False)
class PairSpectrum:
    """Eigen-decomposition of every 2x2 block.

    Block ``b`` couples ``lower[b]`` with ``upper[b]``; its eigenvectors are
    ``(cos th, sin th)`` and ``(-sin th, cos th)`` with eigenvalues ``lam_plus``
    and ``lam_minus``.
    """

    lower: np.ndarray
    upper: np.ndarray
    lam_plus: np.ndarray
    lam_minus: np.ndarray
    cos_th: np.ndarray
    sin_th: np.ndarray

    def eigenvalues(self) -> np.ndarray:
        return np.concatenate([self.lam_plus, self.lam_minus])


@dataclass(frozen=True, eq=False)
class StructuredHamiltonian:
    omega: float
    c: float
    register_diag: np.ndarray
    n: int

    @property
    def dim(self) -> int:
        return 4 << self.n

    @cached_property
    def diagonal(self) -> np.ndarray:
        """Full diagonal: (2 q_p - 1) omega/2 + H_R[q_a, j]."""
        return np.concatenate([
            -0.5 * self.omega + self.register_diag,
            0.5 * self.omega + self.register_diag,
        ])

    @cached_property
    def partner(self) -> np.ndarray:
        """Index of the amplitude each entry is coupled to (an involution)."""
        return np.arange(self.dim) ^ (3 << self.n)

    @cached_property
    def spectrum(self) -> PairSpectrum:
        lower = np.arange(2 << self.n)  # probe = 0 half
        upper = lower ^ (3 << self.n)
        a = self.diagonal[lower]
        b = self.diagonal[upper]
        mean = 0.5 * (a + b)
        half_gap = 0.5 * (a - b)
        radius = np.hypot(half_gap, self.c)
        # angle of the (a, b) rotation that diagonalizes [[a, c], [c, b]]
        theta = 0.5 * np.arctan2(self.c, half_gap)
        return PairSpectrum(lower, upper, mean + radius, mean - radius,
                            np.cos(theta), np.sin(theta))


def full_hamiltonian(register_diag: np.ndarray, omega: float = DEFAULT_OMEGA,
                     c: float = DEFAULT_C, allow_strong_coupling: bool = False,
                     coupling_ratio: float = COUPLING_RATIO) -> StructuredHamiltonian:
    register_diag = np.asarray(register_diag, dtype=np.float64)
    size = register_diag.size
    if size < 4 or size & (size - 1):
        raise DimensionError(f"register diagonal length must be 2^(n+1), got {size}")
    if not omega > 0 or not c > 0:
        raise CouplingGuardError(f"omega and c must be positive, got omega={omega} c={c}")
    if not allow_strong_coupling and c > coupling_ratio * omega:
        raise CouplingGuardError(
            f"c={c} violates weak coupling c <= {coupling_ratio} * omega; "
            "pass allow_strong_coupling=True to override")
    n = size.bit_length() - 2
    return StructuredHamiltonian(float(omega), float(c), register_diag, n)


def clause_hamiltonian(clause: Clause, n: int, omega: float = DEFAULT_OMEGA,
                       c: float = DEFAULT_C, **kwargs) -> StructuredHamiltonian:
    return full_hamiltonian(register_diagonal(clause_diagonal(clause, n)), omega, c, **kwargs)


def _check_dim(h: StructuredHamiltonian, v: np.ndarray):
    if v.shape != (h.dim,):
        raise DimensionError(f"state has shape {v.shape}, Hamiltonian needs ({h.dim},)")


def apply_hamiltonian(h: StructuredHamiltonian, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    _check_dim(h, v)
    return h.diagonal * v + h.c * v[h.partner]


def dense_matrix(h: StructuredHamiltonian) -> np.ndarray:
    """Literal Kronecker construction; test-only, n <= 4."""
    if h.n > DENSE_MAX_N:
        raise DimensionError(f"dense materialization is limited to n <= {DENSE_MAX_N}")
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    sz = np.array([[1.0, 0.0], [0.0, -1.0]])
    big_n = 1 << h.n
    eye_rest = np.eye(2 * big_n)
    probe = -0.5 * h.omega * np.kron(sz, eye_rest)
    register = np.kron(np.eye(2), np.diag(h.register_diag))
    coupling = h.c * np.kron(np.kron(sx, sx), np.eye(big_n))
    return (probe + register + coupling).astype(np.complex128)


def dump_dense(h: StructuredHamiltonian, path: str | Path) -> None:
    """Row-major (re, im) pairs as little-endian float64."""
    np.ascontiguousarray(dense_matrix(h), dtype="<c16").tofile(str(path))


def load_dense(path: str | Path, n: int) -> np.ndarray:
    dim = 4 << n
    return np.fromfile(str(path), dtype="<c16").reshape(dim, dim)
