"""Multi-round resonance protocol: prepare, evolve, measure, purify, repeat.

The simulator can read exact amplitudes, which a device cannot.  Anything
derived that way (scan profiles, decay probabilities, subspace populations)
is reported as diagnostics and only feeds control flow where a real run would
use a sampled estimate of the same quantity.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .engine import (SubspaceDecomposition, embed, evolve_exact, evolve_trotter,
                     measure_probe, probe_ground_population, register_block,
                     subspace_decompose, trial_rng)
from .errors import DimensionError, NumericalError
from .model import Assignment, Clause, Ec3Instance, eval_clause, satisfying_indices
from .operators import DEFAULT_C, DEFAULT_OMEGA, StructuredHamiltonian, clause_hamiltonian
from .reduced import resonance_time

ORACLE_INFORMED = "oracle_informed"
TIME_SCAN = "time_scan"
T_MODES = (ORACLE_INFORMED, TIME_SCAN)

PROJECTED = "projected"
ZERO_PK = "zero_pk"
BUDGET_EXHAUSTED = "budget_exhausted"

SAT = "sat"
UNSAT_DETECTED = "unsat_detected"
INCONCLUSIVE = "inconclusive"

P_MIN = Fraction(1, 27)
CEILING_SLACK = 1e-6
REPORT_VERSION = 1

# decay probability is a device-observable rate; the rest is amplitude read-off
SIMULATOR_ONLY_FIELDS = ("scan_max_decay", "decay_prob_at_t", "purification.c1_sq",
                         "purification.c2_sq", "final_decomposition", "p_k",
                         "solutions.weight")


@dataclass(frozen=True)
class ProtocolParams:
    omega: float = DEFAULT_OMEGA
    c: float = DEFAULT_C
    t_mode: str = TIME_SCAN
    purify_successes: int | None = None  # None -> number of clauses
    max_trials_per_round: int = 2000
    max_purify_trials: int = 1000
    seed: int = 0
    t_max: float | None = None
    t_points: int = 600
    evolve_method: str = "auto"
    trotter_steps: int | None = None
    trotter_order: int = 2
    diagnostics: bool = True
    extract_threshold: float = 0.5
    p_min: Fraction = P_MIN

    def __post_init__(self):
        if self.t_mode not in T_MODES:
            raise ValueError(f"t_mode must be one of {T_MODES}, got {self.t_mode!r}")
        if self.purify_successes is not None and self.purify_successes < 0:
            raise ValueError("purify_successes must be >= 0")
        if self.max_trials_per_round < 1 or self.max_purify_trials < 1:
            raise ValueError("trial budgets must be >= 1")
        if not self.c > 0 or not self.omega > 0:
            raise ValueError("c and omega must be positive")
        if self.t_points < 1 or (self.t_max is not None and not self.t_max > 0):
            raise ValueError("time grid needs t_points >= 1 and t_max > 0")
        if self.trotter_steps is not None and self.trotter_steps < 1:
            raise ValueError("trotter_steps must be >= 1")
        if self.trotter_order not in (1, 2):
            raise ValueError("trotter_order must be 1 or 2")
        if not 0 < self.extract_threshold < 1:
            raise ValueError("extract_threshold must lie in (0, 1)")
        if not 0 < self.p_min <= 1:
            raise ValueError("p_min must lie in (0, 1]")
        if self.t_mode == ORACLE_INFORMED and not self.diagnostics:
            raise ValueError("oracle_informed mode needs oracle access (diagnostics=True)")

    @property
    def t0(self) -> float:
        return math.pi / (2 * self.c)

    @property
    def zero_pk_trials(self) -> int:
        return math.ceil(3 / self.p_min)

    def scan_grid(self) -> np.ndarray:
        t_max = self.t_max
        if t_max is None:
            t_max = 1.1 * resonance_time(self.p_min, self.c)
        return np.linspace(0.0, t_max, self.t_points)

    def to_json(self) -> dict:
        out = asdict(self)
        out["p_min"] = str(self.p_min)
        return out


@dataclass(frozen=True)
class RoundOracle:
    """Classically computed round data; simulation-only."""

    p_k: Fraction | None
    phi_prev: np.ndarray
    phi_sol: np.ndarray
    phi_nonsol: np.ndarray


@dataclass
class PurifyStep:
    trial: int
    success: bool
    c1_sq: float | None = None
    c2_sq: float | None = None


@dataclass
class PurifyResult:
    state: np.ndarray
    iterations: list[PurifyStep]
    successes: int
    trials: int
    complete: bool


@dataclass
class TimeScan:
    times: np.ndarray
    decay: np.ndarray

    @property
    def t_best(self) -> float:
        return float(self.times[int(np.argmax(self.decay))])

    @property
    def max_decay(self) -> float:
        return float(np.max(self.decay))


@dataclass
class RoundRecord:
    k: int
    clause: Clause
    p_k: Fraction | None
    t_used: float
    scan_max_decay: float | None
    decay_prob_at_t: float
    trials: int
    trials_to_first_decay: int | None
    purification: list[PurifyStep] = field(default_factory=list)
    purify_trials: int = 0
    purify_complete: bool = True
    final_decomposition: SubspaceDecomposition | None = None
    ancilla_discarded: float = 0.0
    verdict: str = BUDGET_EXHAUSTED
    oracle_agrees: bool | None = None

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "clause": list(self.clause.indices),
            "p_k": None if self.p_k is None else str(self.p_k),
            "t_used": self.t_used,
            "scan_max_decay": self.scan_max_decay,
            "decay_prob_at_t": self.decay_prob_at_t,
            "trials": self.trials,
            "trials_to_first_decay": self.trials_to_first_decay,
            "purification": [asdict(s) for s in self.purification],
            "purify_trials": self.purify_trials,
            "purify_complete": self.purify_complete,
            "final_decomposition": (None if self.final_decomposition is None
                                    else self.final_decomposition.as_dict()),
            "ancilla_discarded": self.ancilla_discarded,
            "verdict": self.verdict,
            "oracle_agrees": self.oracle_agrees,
        }


@dataclass
class RoundResult:
    record: RoundRecord
    next_problem_state: np.ndarray | None
    full_state: np.ndarray


@dataclass
class RunResult:
    records: list[RoundRecord]
    final_state: np.ndarray
    solutions: list[tuple[Assignment, float]]
    status: str

    @property
    def total_search_trials(self) -> int:
        return sum(r.trials_to_first_decay or 0 for r in self.records)


# -- building blocks ----------------------------------------------------------

def uniform_state(n: int) -> np.ndarray:
    size = 1 << n
    return np.full(size, 1 / math.sqrt(size), dtype=np.complex128)


def indicator_state(indices: np.ndarray, n: int) -> np.ndarray:
    """Uniform superposition over the given basis indices; zero vector if empty."""
    out = np.zeros(1 << n, dtype=np.complex128)
    if len(indices):
        out[indices] = 1 / math.sqrt(len(indices))
    return out


def round_oracle(instance: Ec3Instance, k: int) -> RoundOracle:
    """Ideal round-k register states built from the brute-force prefix sets."""
    n = instance.n
    prev = satisfying_indices(instance, k - 1)
    cur = satisfying_indices(instance, k)
    non = np.setdiff1d(prev, cur, assume_unique=True)
    p_k = Fraction(len(cur), len(prev)) if len(prev) else None
    return RoundOracle(p_k, indicator_state(prev, n), indicator_state(cur, n),
                       indicator_state(non, n))


def prepare_round_input(problem_state: np.ndarray) -> np.ndarray:
    problem_state = np.asarray(problem_state, dtype=np.complex128)
    size = problem_state.size
    if problem_state.ndim != 1 or size < 8 or size & (size - 1):
        raise DimensionError(f"problem state must have length 2^n (n >= 3), got {size}")
    norm = np.linalg.norm(problem_state)
    if abs(norm - 1.0) > 1e-9:
        raise NumericalError(f"problem state is not normalized (norm {norm})")
    return embed(problem_state, probe=1, ancilla=0)


def resonance_evolution_time(p_k, c: float) -> float:
    return resonance_time(p_k, c)


def decay_ceiling(c: float, omega: float = DEFAULT_OMEGA) -> float:
    """Largest decay probability when no register state is resonant (h = 1 everywhere)."""
    detuning = omega - 2.0
    return 4 * c * c / (4 * c * c + detuning * detuning)


def _evolver(params: ProtocolParams) -> Callable:
    if params.trotter_steps is not None:
        return lambda h, v, t: evolve_trotter(h, v, t, params.trotter_steps,
                                              params.trotter_order)
    return lambda h, v, t: evolve_exact(h, v, t, params.evolve_method)


def time_scan(state: np.ndarray, h: StructuredHamiltonian, t_grid,
              evolve: Callable | None = None) -> TimeScan:
    times = np.asarray(t_grid, dtype=float)
    if times.size == 0:
        raise ValueError("t_grid is empty")
    if np.any(np.diff(times) < 0):
        raise ValueError("t_grid must be ascending")
    evolve = evolve or evolve_exact
    decay = np.array([probe_ground_population(evolve(h, state, float(t))) for t in times])
    return TimeScan(times, decay)


def purify(state: np.ndarray, h: StructuredHamiltonian, t0: float, successes_target: int,
           max_trials: int, seed: int = 0, round_index: int = 0,
           oracle: RoundOracle | None = None, evolve: Callable | None = None) -> PurifyResult:
    """Repeated re-prepare / evolve t0 / measure on a post-decay full state.

    A failed measurement leaves the register as it was; each success replaces
    the register with the last-n-qubit state of the collapsed system.
    """
    evolve = evolve or evolve_exact
    if successes_target <= 0:
        return PurifyResult(state, [], 0, 0, True)
    current = state
    register = _register_after_decay(state)[0]
    evolved = None
    steps: list[PurifyStep] = []
    successes = trials = 0
    while successes < successes_target and trials < max_trials:
        trials += 1
        if evolved is None:
            evolved = evolve(h, embed(register, 1, 0), t0)
        result = measure_probe(evolved, trial_rng(seed, round_index, trials, stream=1))
        if result.outcome == 1:
            steps.append(PurifyStep(trials, False))
            continue
        successes += 1
        current = result.collapsed
        register = _register_after_decay(current)[0]
        evolved = None
        c1_sq = c2_sq = None
        if oracle is not None:
            c1_sq = float(abs(np.vdot(oracle.phi_sol, register)) ** 2)
            c2_sq = float(abs(np.vdot(oracle.phi_nonsol, register)) ** 2)
        steps.append(PurifyStep(trials, True, c1_sq, c2_sq))
    return PurifyResult(current, steps, successes, trials, successes >= successes_target)


def _register_after_decay(full_state: np.ndarray) -> tuple[np.ndarray, float]:
    """Problem register from the ancilla = 1 block of a probe = 0 state."""
    reg = register_block(full_state, 0, 1).copy()
    stray = float(np.linalg.norm(register_block(full_state, 0, 0)) ** 2)
    norm = np.linalg.norm(reg)
    if norm < 1e-12:
        raise NumericalError("post-decay state has no weight in the ancilla = 1 block")
    return reg / norm, stray


def run_round(problem_state: np.ndarray, clause: Clause, params: ProtocolParams,
              round_index: int = 1, oracle: RoundOracle | None = None,
              purify_successes: int = 1) -> RoundResult:
    n = int(problem_state.size).bit_length() - 1
    h = clause_hamiltonian(clause, n, params.omega, params.c)
    evolve = _evolver(params)
    psi0 = prepare_round_input(problem_state)
    grid = params.scan_grid()
    p_k = oracle.p_k if oracle is not None else None

    scan = None
    if params.t_mode == ORACLE_INFORMED:
        if oracle is None:
            raise ValueError("oracle_informed mode needs the round oracle")
        t = resonance_evolution_time(p_k, params.c) if p_k else params.t0
    else:
        scan = time_scan(psi0, h, grid, evolve)
        t = scan.t_best

    evolved = evolve(h, psi0, t)
    decay_prob = probe_ground_population(evolved)
    ceiling = decay_ceiling(params.c, params.omega) + CEILING_SLACK

    record = RoundRecord(k=round_index, clause=clause, p_k=p_k, t_used=t,
                         scan_max_decay=None, decay_prob_at_t=decay_prob,
                         trials=0, trials_to_first_decay=None)
    decayed = None
    quiet = 0
    for trial in range(1, params.max_trials_per_round + 1):
        record.trials = trial
        m = measure_probe(evolved, trial_rng(params.seed, round_index, trial))
        if m.outcome == 0:
            decayed = m.collapsed
            record.trials_to_first_decay = trial
            break
        quiet += 1
        if quiet >= params.zero_pk_trials:
            if scan is None:
                scan = time_scan(psi0, h, grid, evolve)
            if scan.max_decay <= ceiling:
                record.verdict = ZERO_PK
                break
    record.scan_max_decay = None if scan is None else scan.max_decay

    if decayed is None:
        if record.verdict == ZERO_PK and p_k is not None:
            record.oracle_agrees = p_k == 0
        return RoundResult(record, None, evolved)

    full = decayed
    pres = purify(full, h, params.t0, purify_successes, params.max_purify_trials,
                  params.seed, round_index, oracle, evolve)
    full = pres.state
    register, stray = _register_after_decay(full)
    record.purification = pres.iterations
    record.purify_trials = pres.trials
    record.purify_complete = pres.complete
    record.ancilla_discarded = stray
    record.verdict = PROJECTED
    if oracle is not None:
        record.final_decomposition = subspace_decompose(full, oracle.phi_prev, oracle.phi_sol,
                                                        oracle.phi_nonsol)
        record.oracle_agrees = bool(p_k)
    return RoundResult(record, register, full)


def extract_assignments(final_state: np.ndarray, n: int,
                        threshold: float = 0.5) -> list[tuple[Assignment, float]]:
    """Basis states of the last n qubits with weight >= threshold * max weight."""
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    v = np.asarray(final_state)
    size = 1 << n
    if v.size == 4 * size:
        weights = np.sum(np.abs(v.reshape(4, size)) ** 2, axis=0)
    elif v.size == size:
        weights = np.abs(v) ** 2
    else:
        raise DimensionError(f"state of length {v.size} does not match n={n}")
    top = weights.max()
    if top <= 0:
        return []
    keep = np.flatnonzero(weights >= threshold * top)
    order = sorted(keep, key=lambda i: (-weights[i], i))
    return [(Assignment.from_index(int(i), n), float(weights[i])) for i in order]


def verify_assignment(instance: Ec3Instance, assignment: Assignment) -> bool:
    return all(eval_clause(c, assignment).satisfied for c in instance.clauses)


def run_full(instance: Ec3Instance, params: ProtocolParams) -> RunResult:
    n = instance.n
    targets = instance.m if params.purify_successes is None else params.purify_successes
    state = uniform_state(n)
    full = embed(state, 1, 0)
    records: list[RoundRecord] = []
    status = SAT
    for k, clause in enumerate(instance.clauses, start=1):
        oracle = round_oracle(instance, k) if params.diagnostics else None
        result = run_round(state, clause, params, k, oracle, targets)
        records.append(result.record)
        full = result.full_state
        if result.record.verdict == ZERO_PK:
            status = UNSAT_DETECTED
            break
        if result.record.verdict == BUDGET_EXHAUSTED:
            status = INCONCLUSIVE
            break
        state = result.next_problem_state

    solutions: list[tuple[Assignment, float]] = []
    if status == SAT:
        if not instance.clauses:
            full = embed(state, 0, 1)
        candidates = extract_assignments(full, n, params.extract_threshold)
        solutions = [(a, w) for a, w in candidates if verify_assignment(instance, a)]
        if not solutions:
            status = INCONCLUSIVE
    return RunResult(records, full, solutions, status)


def build_report(instance: Ec3Instance, params: ProtocolParams, result: RunResult,
                 elapsed: float | None = None) -> dict:
    return {
        "report_version": REPORT_VERSION,
        "instance": {"n": instance.n, "m": instance.m,
                     "clauses": [list(c.indices) for c in instance.clauses]},
        "params": params.to_json(),
        "records": [r.to_json() for r in result.records],
        "status": result.status,
        "solutions": [{"assignment": str(a), "weight": w, "verified": True}
                      for a, w in result.solutions],
        "total_search_trials": result.total_search_trials,
        "simulator_only": list(SIMULATOR_ONLY_FIELDS),
        "timing": {"elapsed_s": elapsed},
    }


def timed_run(instance: Ec3Instance, params: ProtocolParams) -> tuple[RunResult, float]:
    start = time.perf_counter()
    result = run_full(instance, params)
    return result, time.perf_counter() - start
