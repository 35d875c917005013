"""Round-based simulator that services the supervisor's test requests.

The engine owns ground truth (participant profiles, coalitions, honest task
values).  Protocols talk to it only through :meth:`GridEngine.commit` and
:meth:`GridEngine.run_round`, which hand back :class:`Response` objects.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

import numpy as np

from .adversary import STRATEGIES, AdversaryKnowledge, Coalition, KnowledgeMode
from .grid_model import (
    Assignment,
    Behavior,
    Kind,
    ParticipantProfile,
    Response,
    TaskSpec,
    derive_key,
    evaluate,
    generate_tasks,
    prf,
)


@dataclass
class Scenario:
    """Participant population for a diagnosis run.

    Cheaters are picked uniformly at random (from ``seed``) and dealt
    round-robin into ``coalitions`` groups, or into groups of the explicit
    ``coalition_sizes``.
    """

    participants: int
    cheaters: int = 0
    coalitions: int = 1
    coalition_sizes: list[int] | None = None
    traitors: int = 0
    strategy: str = "consistent_collusion"
    strategy_params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.participants < 1:
            raise ValueError("participants must be positive")
        if self.cheaters < 0 or self.traitors < 0:
            raise ValueError("cheater and traitor counts must be non-negative")
        if self.cheaters + self.traitors > self.participants:
            raise ValueError("more cheaters and traitors than participants")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {sorted(STRATEGIES)}")
        if self.coalition_sizes is not None:
            if sum(self.coalition_sizes) != self.cheaters + self.traitors:
                raise ValueError("coalition_sizes must sum to cheaters + traitors")
            if any(s < 1 for s in self.coalition_sizes):
                raise ValueError("coalition sizes must be positive")
        elif self.coalitions < 1:
            raise ValueError("need at least one coalition")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Scenario:
        data = dict(data)
        known = {f for f in cls.__dataclass_fields__}
        if "cheater_fraction" in data:
            if "cheaters" in data:
                raise ValueError("give either cheaters or cheater_fraction, not both")
            frac = float(data.pop("cheater_fraction"))
            data["cheaters"] = int(frac * int(data["participants"]) + 1e-9)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class CommitRecord:
    """Supervisor view after the commit round: who holds which task, and the answers."""

    task_of: dict[int, int]
    responses: dict[int, Response]

    @property
    def participants(self) -> list[int]:
        return sorted(self.task_of)


class GridEngine:
    def __init__(self, tasks: Iterable[TaskSpec], profiles: Iterable[ParticipantProfile], coalitions: Iterable[Coalition] = ()):
        self.tasks = {t.task_id: t for t in tasks}
        self.profiles = {p.participant_id: p for p in profiles}
        self.coalitions = {c.coalition_id: c for c in coalitions}
        for p in self.profiles.values():
            if p.is_bad and p.coalition_id not in self.coalitions:
                raise ValueError(f"participant {p.participant_id} refers to missing coalition {p.coalition_id}")
        self.virtual: set[int] = set()
        self.round_index = 0
        self.task_of: dict[int, int] = {}
        self.committed: dict[int, Response] = {}
        self.test_counts: Counter[int] = Counter()
        self.history: list[Assignment] = []

    # -- supervisor-facing -----------------------------------------------------

    def commit(self, task_of: Mapping[int, int]) -> CommitRecord:
        """Commit round: each participant answers its own task."""
        self.round_index = 0
        for pid, tid in task_of.items():
            a = Assignment(tid, pid, 0, Kind.ORIGINAL)
            self.task_of[pid] = tid
            self.committed[tid] = self._answer(a, AdversaryKnowledge(round_index=0, phase="commit"))
            self.history.append(a)
        return CommitRecord(dict(self.task_of), {pid: self.committed[tid] for pid, tid in self.task_of.items()})

    def add_virtual_participants(self, count: int) -> CommitRecord:
        """Pad with known-good participants holding supervisor-checked dummy tasks."""
        start_pid = max(self.profiles, default=-1) + 1
        start_tid = max(self.tasks, default=-1) + 1
        key = derive_key("virtual", start_pid, start_tid)
        task_of = {}
        for i in range(count):
            pid, tid = start_pid + i, start_tid + i
            self.tasks[tid] = TaskSpec(tid, prf(key, tid))
            self.profiles[pid] = ParticipantProfile(pid)
            self.virtual.add(pid)
            task_of[pid] = tid
        return self.commit(task_of) if task_of else CommitRecord({}, {})

    def run_round(self, tests: Iterable[tuple[int, int]], phase: str = "test") -> list[Response]:
        """One round of tests; each ``(tester, task_id)`` pair yields a response."""
        self.round_index += 1
        owner_of = {tid: pid for pid, tid in self.task_of.items()}
        batch = [
            Assignment(tid, tester, self.round_index, Kind.TEST, owner_of[tid])
            for tester, tid in tests
        ]
        self.history.extend(batch)
        knowledge = AdversaryKnowledge(
            mode=KnowledgeMode.SAME_ROUND,
            round_index=self.round_index,
            phase=phase,
            visible_assignments=tuple(batch),
            committed={tid: r.value for tid, r in self.committed.items()},
        )
        out = []
        for a in batch:
            self.test_counts[a.task_id] += 1
            out.append(self._answer(a, knowledge))
        return out

    # -- ground truth (scoring only) -----------------------------------------

    def _answer(self, a: Assignment, knowledge: AdversaryKnowledge) -> Response:
        profile = self.profiles[a.participant_id]
        coalition = self.coalitions.get(profile.coalition_id) if profile.coalition_id is not None else None
        return evaluate(profile, a, self.tasks[a.task_id], knowledge, coalition)

    def is_bad(self, pid: int) -> bool:
        return self.profiles[pid].is_bad

    def forged_tasks(self) -> set[int]:
        return {tid for tid, r in self.committed.items() if r.value != self.tasks[tid].true_value}

    @property
    def real_participants(self) -> list[int]:
        return sorted(p for p in self.task_of if p not in self.virtual)

    def real_task_ids(self) -> list[int]:
        return sorted(self.task_of[p] for p in self.real_participants)


def build_engine(scenario: Scenario) -> GridEngine:
    """Profiles, coalitions and tasks for ``scenario``; participant i holds task i."""
    n = scenario.participants
    rng = np.random.default_rng([scenario.seed, 0xC0A1])
    order = rng.permutation(n).tolist()
    bad = order[: scenario.cheaters + scenario.traitors]
    traitor_ids = set(bad[scenario.cheaters:])

    if scenario.coalition_sizes is not None:
        groups, start = [], 0
        for size in scenario.coalition_sizes:
            groups.append(bad[start:start + size])
            start += size
    else:
        k = min(scenario.coalitions, max(1, len(bad)))
        groups = [bad[i::k] for i in range(k)]
    groups = [g for g in groups if g]

    params = dict(scenario.strategy_params)
    params.setdefault("seed", scenario.seed)
    coalitions = [
        Coalition(cid, frozenset(members), scenario.strategy, params, derive_key("coalition", scenario.seed, cid))
        for cid, members in enumerate(groups)
    ]
    coalition_of = {pid: c.coalition_id for c in coalitions for pid in c.members}
    profiles = []
    for pid in range(n):
        if pid in coalition_of:
            behavior = Behavior.TRAITOR if pid in traitor_ids else Behavior.CHEATER
            profiles.append(ParticipantProfile(pid, behavior, coalition_of[pid]))
        else:
            profiles.append(ParticipantProfile(pid))
    return GridEngine(generate_tasks(n, scenario.seed), profiles, coalitions)
