"""Closed-form few-level models of a single round.

``propagate3`` (eigendecomposition of the 3x3 round Hamiltonian) is the
reference for everything else in this module.  ``c1_analytic`` evaluates the
closed-form residue sum and is only ever cross-checked against it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DegeneracyError, NumericalError

NORM_TOL = 1e-9
FIG_C = 0.02
FIG_P = Fraction(1, 27)
FIG4_EPS0 = 0.1
FIG4_M_MAX = 20


@dataclass(frozen=True)
class ReducedParams:
    c: float
    p: float | Fraction

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not 0 <= self.p <= 1:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")

    @property
    def root_p(self) -> float:
        return math.sqrt(float(self.p))

    @property
    def root_q(self) -> float:
        return math.sqrt(1.0 - float(self.p))


@dataclass(frozen=True)
class ReducedState:
    c0: complex
    c1: complex
    c2: complex

    @property
    def populations(self) -> tuple[float, float, float]:
        return (abs(self.c0) ** 2, abs(self.c1) ** 2, abs(self.c2) ** 2)

    def as_array(self) -> np.ndarray:
        return np.array([self.c0, self.c1, self.c2])


def h3(params: ReducedParams) -> np.ndarray:
    c = params.c
    g1, g2 = c * params.root_p, c * params.root_q
    return np.array([[-0.5, g1, g2],
                     [g1, -0.5, 0.0],
                     [g2, 0.0, 0.5]])


def _propagate(hmat: np.ndarray, t, start=None) -> np.ndarray:
    """exp(-i H t) start for scalar or array t; rows indexed by t."""
    evals, evecs = np.linalg.eigh(hmat)
    start = np.eye(len(hmat))[0] if start is None else start
    coeff = evecs.conj().T @ start
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    phases = np.exp(-1j * np.outer(ts, evals))
    return (phases * coeff) @ evecs.T


def amplitudes3(params: ReducedParams, t) -> np.ndarray:
    """(len(t), 3) amplitudes starting from (1, 0, 0)."""
    return _propagate(h3(params), t)


def propagate3(params: ReducedParams, t: float) -> ReducedState:
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    a = amplitudes3(params, t)[0]
    return ReducedState(complex(a[0]), complex(a[1]), complex(a[2]))


def c1_analytic(params: ReducedParams, t: float) -> complex:
    """Residue sum 2c sqrt(p) sum_x (1 - 2x) e^{-ixt} / (-12x^2 - 4x + 4c^2 + 1)."""
    c = params.c
    if params.p == 0:
        return 0j
    x = np.linalg.eigvalsh(h3(params))
    if np.min(np.diff(np.sort(x))) < 1e-10:
        raise DegeneracyError(f"eigenvalues {x} are (near-)degenerate")
    phase = np.exp(-1j * x * t)
    terms = (phase - 2 * x * phase) / (-12 * x ** 2 - 4 * x + 4 * c ** 2 + 1)
    return complex(2 * c * params.root_p * terms.sum())


def offres_decay(c, t):
    """Decay probability 4c^2 sin^2(sqrt(1/4 + c^2) t) / (1 + 4c^2); vectorized."""
    c = np.asarray(c, dtype=float)
    t = np.asarray(t, dtype=float)
    out = 4 * c ** 2 * np.sin(np.sqrt(0.25 + c ** 2) * t) ** 2 / (1 + 4 * c ** 2)
    return float(out) if out.ndim == 0 else out


def offres_ceiling(c: float) -> float:
    return 4 * c ** 2 / (1 + 4 * c ** 2)


def h3_purify(c: float, c1_prev: complex, c2_prev: complex) -> np.ndarray:
    norm = abs(c1_prev) ** 2 + abs(c2_prev) ** 2
    if abs(norm - 1.0) > NORM_TOL:
        raise NumericalError(f"|c1|^2 + |c2|^2 = {norm}, expected 1")
    g1, g2 = c * c1_prev, c * c2_prev
    return np.array([[-0.5, g1, g2],
                     [np.conj(g1), -0.5, 0.0],
                     [np.conj(g2), 0.0, 0.5]], dtype=np.complex128)


@dataclass(frozen=True)
class PurificationTrace:
    """``epsilons[0]`` is the post-first-decay |c2|^2; ``epsilons[m]`` follows m purification successes."""

    epsilons: list[float]
    c1_track: list[complex]
    decay_probs: list[float]

    @property
    def eps0(self) -> float:
        return self.epsilons[0]


def resonance_time(p, c: float) -> float:
    p = float(p)
    if p <= 0:
        raise ValueError("resonance time is undefined for p = 0")
    return math.pi / (2 * c * math.sqrt(p))


def purification_trace(params: ReducedParams, successes: int, t0: float | None = None,
                       t_first: float | None = None) -> PurificationTrace:
    if successes < 1:
        raise ValueError(f"successes must be >= 1, got {successes}")
    c = params.c
    t0 = math.pi / (2 * c) if t0 is None else t0
    if t0 <= 0:
        raise ValueError(f"t0 must be positive, got {t0}")
    t_first = resonance_time(params.p, c) if t_first is None else t_first

    def condition(amps):
        decay = float(np.sum(np.abs(amps[1:]) ** 2))
        if decay < 1e-12:
            raise NumericalError(f"decay probability {decay:.3e} too small to condition on")
        pair = amps[1:] / math.sqrt(decay)
        return pair, decay

    pair, decay = condition(amplitudes3(params, t_first)[0])
    eps, track, probs = [abs(pair[1]) ** 2], [complex(pair[0])], [decay]
    for _ in range(successes):
        amps = _propagate(h3_purify(c, pair[0], pair[1]), t0)[0]
        pair, decay = condition(amps)
        eps.append(abs(pair[1]) ** 2)
        track.append(complex(pair[0]))
        probs.append(decay)
    return PurificationTrace(eps, track, probs)


def success_prob(eps0: float, m: int) -> float:
    if not 0 <= eps0 <= 1:
        raise ValueError(f"eps0 must lie in [0, 1], got {eps0}")
    if m < 1:
        raise ValueError(f"M must be >= 1, got {m}")
    return (1.0 - eps0 ** m) ** m


def exact_round_amplitudes(params: ReducedParams, t) -> np.ndarray:
    """Full-dynamics projections (c0, c1, c2) for a round started in |1>|0>|phi_prev>.

    Under the full operator every register basis state evolves in its own
    two-level block, resonant (detuning 0) for states satisfying the clause and
    detuned by 1 otherwise.  Returns an array of shape (len(t), 3).
    """
    c = params.c
    p, q = float(params.p), 1.0 - float(params.p)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    # resonant block [[-1/2, c], [c, -1/2]]
    res_stay = np.exp(0.5j * ts) * np.cos(c * ts)
    res_move = -1j * np.exp(0.5j * ts) * np.sin(c * ts)
    # detuned block [[-1/2, c], [c, 1/2]]
    r = math.sqrt(0.25 + c * c)
    off_stay = np.cos(r * ts) + 0.5j * np.sin(r * ts) / r
    off_move = -1j * c * np.sin(r * ts) / r
    c0 = p * res_stay + q * off_stay
    c1 = math.sqrt(p) * res_move
    c2 = math.sqrt(q) * off_move
    return np.stack([c0, c1, c2], axis=1)


def exact_round_leakage(params: ReducedParams, t) -> np.ndarray:
    amps = exact_round_amplitudes(params, t)
    return np.clip(1.0 - np.sum(np.abs(amps) ** 2, axis=1), 0.0, None)


def emit_figure_data(figure_id: int, params: ReducedParams | None = None,
                     t_grid=None) -> tuple[tuple[str, ...], list[tuple]]:
    """(header, rows): resonance curves (t, |c1|^2, |c2|^2) for ids 2 and 3, success curve (M, P_succ) for id 4."""
    if figure_id == 4:
        rows = [(m, success_prob(FIG4_EPS0, m)) for m in range(1, FIG4_M_MAX + 1)]
        return ("M", "P_succ"), rows
    if figure_id in (2, 3):
        params = params or ReducedParams(FIG_C, FIG_P)
        if t_grid is None:
            t_grid = np.linspace(0.0, 1200.0, 2001)
        pops = np.abs(amplitudes3(params, t_grid)) ** 2
        rows = [(float(t), float(a), float(b))
                for t, a, b in zip(t_grid, pops[:, 1], pops[:, 2])]
        return ("t", "c1_sq", "c2_sq"), rows
    raise ValueError(f"figure id must be 2, 3 or 4, got {figure_id}")
