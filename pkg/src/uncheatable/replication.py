"""Pipelined task replication experiments.

Tasks run in rounds split into interleaved sequences.  A check copy of a
task is either sent in the same round as the original (colluders see both
copies and forge only when safe) or in a later round of the same sequence,
after the original answer is committed (colluders must decide blind).

The simulations are vectorised with numpy and use separate PCG64 streams
for task placement, cheating decisions and duplication, so a run is
reproducible per seed and the cheating decisions never depend on where
duplicates go.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .economics import sybil_replication_prob

CHUNK = 1_000_000


@dataclass
class SimMetrics:
    mode: str
    seed: int
    population: int
    coalition_size: int
    tasks_total: int = 0
    tasks_forged: int = 0
    forged_caught: int = 0
    forged_undetected: int = 0
    false_accusations: int = 0
    duplicates_issued: int = 0
    third_copies: int = 0
    misresolved: int = 0
    forged_checks: int = 0
    schedule_violations: int = 0
    replication_prob: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def coalition_fraction(self) -> float:
        return self.coalition_size / self.population

    @property
    def empirical_catch_rate(self) -> float | None:
        return self.forged_caught / self.tasks_forged if self.tasks_forged else None

    @property
    def replication_overhead(self) -> float:
        return self.duplicates_issued / self.tasks_total if self.tasks_total else 0.0

    @property
    def undetected_fraction(self) -> float:
        return self.forged_undetected / self.tasks_total if self.tasks_total else 0.0

    def catch_rate_stderr(self) -> float | None:
        rate = self.empirical_catch_rate
        if rate is None:
            return None
        return math.sqrt(rate * (1 - rate) / self.tasks_forged)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "population": self.population,
            "coalition_size": self.coalition_size,
            "coalition_fraction": self.coalition_fraction,
            "replication_prob": self.replication_prob,
            "tasks_total": self.tasks_total,
            "tasks_forged": self.tasks_forged,
            "forged_caught": self.forged_caught,
            "forged_undetected": self.forged_undetected,
            "false_accusations": self.false_accusations,
            "duplicates_issued": self.duplicates_issued,
            "third_copies": self.third_copies,
            "misresolved": self.misresolved,
            "forged_checks": self.forged_checks,
            "schedule_violations": self.schedule_violations,
            "empirical_catch_rate": self.empirical_catch_rate,
            "replication_overhead": self.replication_overhead,
            "undetected_fraction": self.undetected_fraction,
            **self.extra,
        }


# -- schedule --------------------------------------------------------------------


@dataclass(frozen=True)
class RoundInfo:
    index: int
    sequence_id: int
    originals: tuple[int, ...]
    duplicates: tuple[int, ...]


@dataclass
class PipelineSchedule:
    """Global round of every original and duplicate; round ``r`` belongs to sequence ``r % interleave``."""

    interleave: int
    task_round: np.ndarray
    dup_task: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    dup_round: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def sequence_of(self, round_index: int) -> int:
        return round_index % self.interleave

    def add_duplicates(self, task_ids) -> np.ndarray:
        """Place check copies in the next round of each original's sequence."""
        task_ids = np.asarray(task_ids, dtype=np.int64)
        rounds = self.task_round[task_ids] + self.interleave
        self.dup_task = np.concatenate([self.dup_task, task_ids])
        self.dup_round = np.concatenate([self.dup_round, rounds])
        return rounds

    def violations(self) -> int:
        """Duplicates not strictly after their original's round in the same sequence."""
        orig = self.task_round[self.dup_task]
        bad = (self.dup_round <= orig) | ((self.dup_round - orig) % self.interleave != 0)
        return int(bad.sum())

    @property
    def rounds(self) -> list[RoundInfo]:
        last = int(max(self.task_round.max(initial=-1), self.dup_round.max(initial=-1)))
        out = []
        for r in range(last + 1):
            originals = tuple(np.flatnonzero(self.task_round == r).tolist())
            dups = tuple(self.dup_task[self.dup_round == r].tolist())
            out.append(RoundInfo(r, self.sequence_of(r), originals, dups))
        return out


def pipeline_schedule(n_tasks: int, rounds: int, interleave: int = 2, seed=None) -> PipelineSchedule:
    """Deal ``n_tasks`` (in shuffled order) round-robin over ``rounds`` global rounds."""
    if rounds < 1:
        raise ValueError("need at least one round")
    if interleave < 1:
        raise ValueError("interleave must be positive")
    order = np.random.default_rng(seed).permutation(n_tasks)
    task_round = np.empty(n_tasks, dtype=np.int64)
    task_round[order] = np.arange(n_tasks) % rounds
    return PipelineSchedule(interleave, task_round)


# -- helpers ---------------------------------------------------------------------


def _coalition(population: int, coalition_fraction: float, rng: np.random.Generator) -> np.ndarray:
    if not 0 <= coalition_fraction <= 1:
        raise ValueError("coalition_fraction must lie in [0, 1]")
    if population < 3:
        raise ValueError("population must be at least 3")
    size = int(round(coalition_fraction * population))
    mask = np.zeros(population, dtype=bool)
    mask[rng.permutation(population)[:size]] = True
    return mask


def _other(rng: np.random.Generator, population: int, exclude: np.ndarray) -> np.ndarray:
    """Uniform participant different from ``exclude`` (elementwise)."""
    r = rng.integers(0, population - 1, size=exclude.shape[0])
    return r + (r >= exclude)


def _third(rng: np.random.Generator, population: int, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Uniform participant different from both ``a`` and ``b`` (which differ)."""
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    r = rng.integers(0, population - 2, size=a.shape[0])
    r = r + (r >= lo)
    return r + (r >= hi)


def _chunks(n: int):
    done = 0
    while done < n:
        size = min(CHUNK, n - done)
        yield done, size
        done += size


# -- experiments -----------------------------------------------------------------


def run_same_round_duplication(population: int, coalition_fraction: float, n_tasks: int,
                               seed: int = 0) -> SimMetrics:
    """Full duplication with both copies sent in the same round.

    The coalition sees both holders and forges exactly when both copies land
    with members; those forgeries always agree and are never detected.
    """
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]
    coal = _coalition(population, coalition_fraction, streams[0])
    m = SimMetrics("same_round", seed, population, int(coal.sum()), replication_prob=1.0)
    for _, size in _chunks(n_tasks):
        owner = streams[1].integers(0, population, size=size)
        checker = _other(streams[2], population, owner)
        forged = coal[owner] & coal[checker]
        m.tasks_total += size
        m.duplicates_issued += size
        m.tasks_forged += int(forged.sum())
    m.forged_undetected = m.tasks_forged
    return m


def run_delayed_duplication(population: int, coalition_fraction: float, replication_prob: float,
                            n_tasks: int, seed: int = 0, cheat_prob: float = 1.0,
                            tasks_per_round: int | None = None, duplication_seed: int | None = None,
                            return_decisions: bool = False):
    """Duplicate each task with probability ``replication_prob`` in a later round.

    Coalition members decide to forge before any duplicate exists.  A check
    copy that lands with a member is forged too (so it matches a forged
    original).  On a mismatch a third copy goes to another random
    participant and the majority wins; a colluding third copy therefore
    accepts the forgery and gets the honest checker flagged.

    ``duplication_seed`` re-seeds only the duplication and checker streams,
    which is how the blind-commitment property is tested.
    """
    if not 0 <= replication_prob <= 1:
        raise ValueError("replication_prob must lie in [0, 1]")
    base = np.random.SeedSequence(seed).spawn(5)
    coal_rng, owner_rng, decide_rng = (np.random.default_rng(s) for s in base[:3])
    dup_base = base[3:] if duplication_seed is None else np.random.SeedSequence([seed, duplication_seed]).spawn(2)
    dup_rng, check_rng = (np.random.default_rng(s) for s in dup_base)

    coal = _coalition(population, coalition_fraction, coal_rng)
    per_round = tasks_per_round or population
    m = SimMetrics("delayed", seed, population, int(coal.sum()), replication_prob=replication_prob)
    decisions = []
    for start, size in _chunks(n_tasks):
        owner = owner_rng.integers(0, population, size=size)
        forged = coal[owner] & (decide_rng.random(size) < cheat_prob)
        # check copies forge with the same blind rate; their draws come from the same stream
        checker_forges_draw = decide_rng.random(size) < cheat_prob
        third_forges_draw = decide_rng.random(size) < cheat_prob
        if return_decisions:
            decisions.append(forged)

        dup = dup_rng.random(size) < replication_prob
        idx = np.flatnonzero(dup)
        checker = _other(check_rng, population, owner[idx])
        third = _third(check_rng, population, owner[idx], checker)

        orig_round = (start + idx) // per_round
        dup_round = orig_round + 2
        m.schedule_violations += int(np.sum(dup_round <= orig_round))

        f_orig = forged[idx]
        f_check = coal[checker] & checker_forges_draw[idx]
        mismatch = f_orig != f_check
        f_third = coal[third] & third_forges_draw[idx]
        # majority of three; forged answers all agree within the coalition
        forged_wins = (f_orig.astype(int) + f_check + f_third) >= 2

        m.tasks_total += size
        m.tasks_forged += int(forged.sum())
        m.duplicates_issued += int(idx.size)
        m.forged_caught += int(np.sum(f_orig & mismatch))
        m.forged_checks += int(f_check.sum())
        m.third_copies += int(mismatch.sum())
        m.misresolved += int(np.sum(mismatch & forged_wins))
        # honest answers on the losing side of a resolved mismatch
        honest_orig_flagged = mismatch & ~f_orig & forged_wins
        honest_check_flagged = mismatch & ~f_check & forged_wins
        m.false_accusations += int(honest_orig_flagged.sum() + honest_check_flagged.sum())

    m.forged_undetected = m.tasks_forged - m.forged_caught
    if return_decisions:
        return m, (np.concatenate(decisions) if decisions else np.empty(0, dtype=bool))
    return m


@dataclass
class SybilTrace:
    """Replication probability applied to each task of each identity, in order."""

    probabilities: dict[int, list[float]]
    cheater: dict[int, bool]
    caught_after: dict[int, int]
    attempts: dict[int, int]

    def caught_within(self, k: int) -> float | None:
        """Fraction of cheating identities caught within ``k`` attempts (censored ones excluded)."""
        decided = [i for i, cheat in self.cheater.items()
                   if cheat and (i in self.caught_after or self.attempts.get(i, 0) >= k)]
        if not decided:
            return None
        hits = sum(1 for i in decided if self.caught_after.get(i, k + 1) <= k)
        return hits / len(decided)


def run_sybil_ramp(population: int, coalition_fraction: float, P: float, G: float,
                   n_tasks: int, seed: int = 0, ramp: int = 20,
                   initial_completed: int = 0, fresh_identity_completed: int = 0,
                   keep_traces: bool = True) -> tuple[SimMetrics, SybilTrace]:
    """Per-user duplication at ``max(1 - t/ramp, P/G)`` with identity churn.

    Every colluding identity forges every task.  A caught identity is
    removed and its slot is re-entered under a new identity (a Sybil) with
    ``fresh_identity_completed`` completed tasks.  Checks are delayed, so a
    forgery is caught iff it is duplicated to a non-member.
    """
    if P > G:
        raise ValueError(f"P ({P}) must not exceed G ({G})")
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)]
    coal = _coalition(population, coalition_fraction, streams[0])
    m = SimMetrics("sybil", seed, population, int(coal.sum()), replication_prob=P / G)

    identity = list(range(population))
    completed = [initial_completed] * population
    next_identity = population
    probs: dict[int, list[float]] = {}
    cheater = {i: bool(coal[i]) for i in range(population)}
    caught_after: dict[int, int] = {}
    attempts: dict[int, int] = {}
    coal_list = coal.tolist()

    for _, size in _chunks(n_tasks):
        slots = streams[1].integers(0, population, size=size).tolist()
        dup_draw = streams[2].random(size).tolist()
        checkers = _other(streams[3], population, np.asarray(slots)).tolist()
        for slot, u, chk in zip(slots, dup_draw, checkers):
            ident = identity[slot]
            q = sybil_replication_prob(completed[slot], P, G, ramp)
            if keep_traces:
                probs.setdefault(ident, []).append(q)
            dup = u < q
            m.tasks_total += 1
            m.duplicates_issued += dup
            if coal_list[slot]:
                m.tasks_forged += 1
                attempts[ident] = attempts.get(ident, 0) + 1
                if dup and not coal_list[chk]:
                    m.forged_caught += 1
                    caught_after[ident] = attempts[ident]
                    identity[slot] = next_identity
                    cheater[next_identity] = True
                    completed[slot] = fresh_identity_completed
                    next_identity += 1
                    continue
            completed[slot] += 1

    m.forged_undetected = m.tasks_forged - m.forged_caught
    m.extra["identities_created"] = next_identity - population
    return m, SybilTrace(probs, cheater, caught_after, attempts)


def binomial_interval(successes: int, trials: int, z: float = 3.0) -> tuple[float, float, float]:
    """Mean and ``z``-sigma normal-approximation bounds for a binomial rate."""
    if trials == 0:
        return float("nan"), float("nan"), float("nan")
    p = successes / trials
    half = z * math.sqrt(p * (1 - p) / trials)
    return p, max(0.0, p - half), min(1.0, p + half)
