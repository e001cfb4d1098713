"""EC3 instances, clause evaluation and the exact classical oracle.

Bit convention: ``z1`` is the leftmost character of an assignment string and
the most significant bit of the basis index, so assignment ``00010111`` on
eight bits is basis index 23.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InfeasibleError, InstanceError, OracleGuardError, ParseError
from .parallel import ordered_map

BRUTE_FORCE_MAX_N = 30
_CHUNK = 1 << 20


@dataclass(frozen=True, order=True)
class Clause:
    """Three distinct 1-based bit indices, stored ascending."""

    i: int
    j: int
    k: int

    def __post_init__(self):
        idx = (self.i, self.j, self.k)
        if any(not isinstance(x, (int, np.integer)) or isinstance(x, bool) for x in idx):
            raise InstanceError(f"clause indices must be integers, got {idx}")
        if len(set(idx)) != 3:
            raise InstanceError(f"repeated index within clause {idx}")
        if min(idx) < 1:
            raise InstanceError(f"clause indices are 1-based, got {idx}")
        a, b, c = sorted(int(x) for x in idx)
        object.__setattr__(self, "i", a)
        object.__setattr__(self, "j", b)
        object.__setattr__(self, "k", c)

    @property
    def indices(self) -> tuple[int, int, int]:
        return (self.i, self.j, self.k)

    def __iter__(self):
        return iter(self.indices)

    def __str__(self):
        return f"{self.i} {self.j} {self.k}"


@dataclass(frozen=True)
class Assignment:
    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise InstanceError(f"assignment bits must be 0/1, got {self.bits}")
        object.__setattr__(self, "bits", bits)

    @property
    def n(self) -> int:
        return len(self.bits)

    @property
    def index(self) -> int:
        value = 0
        for b in self.bits:
            value = (value << 1) | b
        return value

    @classmethod
    def from_index(cls, index: int, n: int) -> Assignment:
        if not 0 <= index < (1 << n):
            raise InstanceError(f"index {index} out of range for n={n}")
        return cls(tuple((index >> (n - 1 - q)) & 1 for q in range(n)))

    @classmethod
    def from_string(cls, text: str) -> Assignment:
        if not text or set(text) - {"0", "1"}:
            raise InstanceError(f"not a bit string: {text!r}")
        return cls(tuple(int(ch) for ch in text))

    def __str__(self):
        return "".join(str(b) for b in self.bits)


@dataclass(frozen=True)
class Ec3Instance:
    n: int
    clauses: tuple[Clause, ...] = field(default_factory=tuple)

    def __post_init__(self):
        clauses = tuple(c if isinstance(c, Clause) else Clause(*c) for c in self.clauses)
        object.__setattr__(self, "clauses", clauses)
        if self.n < 3:
            raise InstanceError(f"need n >= 3, got {self.n}")
        for pos, c in enumerate(clauses, start=1):
            if c.k > self.n:
                raise InstanceError(f"clause {pos} ({c}) addresses bit {c.k} > n={self.n}")
        dups = self.duplicate_clauses()
        if dups:
            warnings.warn(
                f"instance repeats clause(s) {', '.join(str(c) for c in dups)}; "
                "repeated rounds have p_k = 1",
                stacklevel=2,
            )

    @property
    def m(self) -> int:
        return len(self.clauses)

    def duplicate_clauses(self) -> list[Clause]:
        seen, dups = set(), []
        for c in self.clauses:
            if c in seen and c not in dups:
                dups.append(c)
            seen.add(c)
        return dups


class ClauseEval(NamedTuple):
    satisfied: bool
    h: int


@dataclass(frozen=True)
class ProbabilitySequence:
    """Exact ``p_k = N_k / N_{k-1}``; ``None`` marks values undefined after UNSAT."""

    values: tuple[Fraction | None, ...]
    counts: tuple[int, ...]

    @property
    def unsat_round(self) -> int | None:
        """First k with N_k = 0, or None."""
        for k, count in enumerate(self.counts):
            if count == 0:
                return k
        return None

    def product(self) -> Fraction:
        out = Fraction(1)
        for v in self.values:
            if v is None:
                break
            out *= v
        return out


class Bound(NamedTuple):
    """Lower bound on p_k: ``exact`` pins the value, otherwise p_k is 0 or >= value."""

    value: Fraction
    exact: bool = False
    may_be_zero: bool = False

    def admits(self, p: Fraction) -> bool:
        if self.exact:
            return p == self.value
        if p == 0:
            return self.may_be_zero
        return p >= self.value


_LOWER_BOUNDS = {
    0: Bound(Fraction(3, 8), exact=True),
    1: Bound(Fraction(1, 4)),
    2: Bound(Fraction(1, 18), may_be_zero=True),
    3: Bound(Fraction(1, 27), may_be_zero=True),
}


def eval_clause(clause: Clause, assignment: Assignment) -> ClauseEval:
    if clause.k > assignment.n:
        raise InstanceError(f"clause ({clause}) out of range for {assignment.n}-bit assignment")
    ones = sum(assignment.bits[q - 1] for q in clause)
    ok = ones == 1
    return ClauseEval(ok, 0 if ok else 1)


def satisfied_mask(clause: Clause, n: int, indices: np.ndarray | None = None) -> np.ndarray:
    """Boolean mask over basis indices (all 2^n when ``indices`` is None)."""
    if clause.k > n:
        raise InstanceError(f"clause ({clause}) out of range for n={n}")
    if indices is None:
        indices = np.arange(1 << n, dtype=np.int64)
    ones = sum(((indices >> (n - q)) & 1) for q in clause)
    return ones == 1


def _prefix_mask(instance: Ec3Instance, k: int, indices: np.ndarray) -> np.ndarray:
    mask = np.ones(indices.shape, dtype=bool)
    for clause in instance.clauses[:k]:
        mask &= satisfied_mask(clause, instance.n, indices)
    return mask


def _chunks(n: int):
    total = 1 << n
    return [(lo, min(lo + _CHUNK, total)) for lo in range(0, total, _CHUNK)]


def _guard(instance: Ec3Instance):
    if instance.n > BRUTE_FORCE_MAX_N:
        raise OracleGuardError(
            f"brute-force oracle is exponential; refusing n={instance.n} > {BRUTE_FORCE_MAX_N}"
        )


def prefix_counts(instance: Ec3Instance) -> list[int]:
    """``[N_0, N_1, ..., N_M]`` in one pass over the 2^n assignments."""
    _guard(instance)

    def count_chunk(bounds):
        lo, hi = bounds
        idx = np.arange(lo, hi, dtype=np.int64)
        mask = np.ones(idx.shape, dtype=bool)
        out = [int(mask.size)]
        for clause in instance.clauses:
            mask &= satisfied_mask(clause, instance.n, idx)
            out.append(int(mask.sum()))
        return out

    parts = ordered_map(count_chunk, _chunks(instance.n))
    return [sum(col) for col in zip(*parts)]


def count_satisfying_prefix(instance: Ec3Instance, k: int) -> int:
    if not 0 <= k <= instance.m:
        raise InstanceError(f"k={k} outside 0..{instance.m}")
    if k == 0:
        return 1 << instance.n
    return prefix_counts(Ec3Instance(instance.n, instance.clauses[:k]))[k]


def satisfying_indices(instance: Ec3Instance, k: int | None = None) -> np.ndarray:
    """Ascending basis indices satisfying the first ``k`` clauses (all when None)."""
    _guard(instance)
    k = instance.m if k is None else k
    if not 0 <= k <= instance.m:
        raise InstanceError(f"k={k} outside 0..{instance.m}")

    def chunk(bounds):
        idx = np.arange(*bounds, dtype=np.int64)
        return idx[_prefix_mask(instance, k, idx)]

    return np.concatenate(ordered_map(chunk, _chunks(instance.n)))


def brute_force_solutions(instance: Ec3Instance) -> list[Assignment]:
    return [Assignment.from_index(int(i), instance.n) for i in satisfying_indices(instance)]


def p_sequence(instance: Ec3Instance) -> ProbabilitySequence:
    counts = prefix_counts(instance)
    values: list[Fraction | None] = []
    for prev, cur in zip(counts, counts[1:]):
        values.append(Fraction(cur, prev) if prev > 0 else None)
    return ProbabilitySequence(tuple(values), tuple(counts))


def shared_bits_S(clause: Clause, priors: Sequence[Clause]) -> int:
    if not priors:
        raise InstanceError("shared_bits_S needs at least one prior clause")
    seen = set()
    for c in priors:
        seen.update(c.indices)
    return len(seen.intersection(clause.indices))


def p_lower_bound(s: int) -> Bound:
    try:
        return _LOWER_BOUNDS[s]
    except KeyError:
        raise InstanceError(f"S must be 0..3, got {s}") from None


# -- instance text format ---------------------------------------------------

def parse_instance(text: str) -> Ec3Instance:
    n = m = None
    clauses: list[Clause] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line == "c" or line.startswith("c "):
            continue
        tokens = line.split()
        if tokens[0] == "p":
            if n is not None:
                raise ParseError("duplicate header", lineno)
            if len(tokens) != 4 or tokens[1] != "ec3":
                raise ParseError(f"malformed header {line!r}; expected 'p ec3 <n> <m>'", lineno)
            try:
                n, m = int(tokens[2]), int(tokens[3])
            except ValueError:
                raise ParseError(f"non-numeric header field in {line!r}", lineno) from None
            if n < 3 or m < 0:
                raise ParseError(f"header needs n >= 3 and m >= 0, got n={n} m={m}", lineno)
            continue
        if n is None:
            raise ParseError("clause line before 'p ec3' header", lineno)
        if len(tokens) != 3:
            raise ParseError(f"clause line needs 3 indices, got {len(tokens)}", lineno)
        try:
            idx = [int(t) for t in tokens]
        except ValueError:
            raise ParseError(f"non-numeric token in {line!r}", lineno) from None
        if any(x < 1 or x > n for x in idx):
            raise ParseError(f"index out of range 1..{n} in {line!r}", lineno)
        if len(set(idx)) != 3:
            raise ParseError(f"repeated index within clause {line!r}", lineno)
        clauses.append(Clause(*idx))
    if n is None:
        raise ParseError("missing 'p ec3 <n> <m>' header")
    if len(clauses) != m:
        raise ParseError(f"header declares {m} clauses, found {len(clauses)}")
    return Ec3Instance(n, tuple(clauses))


def serialize_instance(instance: Ec3Instance) -> str:
    lines = [f"p ec3 {instance.n} {instance.m}"]
    lines += [str(c) for c in instance.clauses]
    return "\n".join(lines) + "\n"


def random_instance(n: int, m: int, seed: int, require_satisfiable: bool = False,
                    max_draws: int = 100_000) -> Ec3Instance:
    """Seeded instance of ``m`` distinct clauses.

    With ``require_satisfiable`` a planted assignment is drawn first and clauses
    are rejection-sampled until each one is satisfied by it.
    """
    if n < 3 or m < 1:
        raise InstanceError(f"need n >= 3 and m >= 1, got n={n} m={m}")
    total = math.comb(n, 3)
    if m > total:
        raise InfeasibleError(f"m={m} exceeds binom({n}, 3) = {total} distinct clauses")
    rng = np.random.default_rng(seed)
    if not require_satisfiable:
        picks = rng.choice(total, size=m, replace=False)
        all_triples = list(itertools.combinations(range(1, n + 1), 3))
        return Ec3Instance(n, tuple(Clause(*all_triples[int(p)]) for p in picks))

    for _ in range(64):
        planted = (rng.random(n) < 1 / 3).astype(int)
        ones = int(planted.sum())
        if ones * math.comb(n - ones, 2) >= m:
            break
    else:
        raise InfeasibleError(f"could not plant an assignment admitting {m} clauses on n={n}")

    chosen: list[Clause] = []
    seen = set()
    draws = 0
    while len(chosen) < m:
        if draws >= max_draws:
            raise InfeasibleError(f"rejection budget of {max_draws} draws exhausted")
        draws += 1
        triple = rng.choice(n, size=3, replace=False) + 1
        clause = Clause(*(int(x) for x in triple))
        if clause in seen or sum(planted[q - 1] for q in clause) != 1:
            continue
        seen.add(clause)
        chosen.append(clause)
    return Ec3Instance(n, tuple(chosen))


# Worked 8-bit example, in the two clause orders discussed alongside it.
WORKED_ORDER_1 = Ec3Instance(8, tuple(Clause(*c) for c in [
    (1, 2, 8), (2, 3, 6), (2, 3, 7), (2, 4, 5), (2, 5, 6), (3, 5, 8)]))
WORKED_ORDER_2 = Ec3Instance(8, tuple(Clause(*c) for c in [
    (2, 3, 6), (2, 3, 7), (2, 5, 6), (2, 4, 5), (3, 5, 8), (1, 2, 8)]))
UNSAT_4 = Ec3Instance(4, tuple(Clause(*c) for c in [
    (1, 2, 3), (1, 2, 4), (1, 3, 4), (2, 3, 4)]))
