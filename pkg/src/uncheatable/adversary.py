"""Coalition strategies for answering test assignments.

A strategy decides what a coalition member returns when it is handed a copy
of somebody else's task.  All strategies are pure functions of the
coalition, the assignment, the task and the adversary's knowledge, so runs
replay exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from .grid_model import (
    Assignment,
    Kind,
    TaskSpec,
    derive_key,
    forged_value,
    prf,
    value_avoiding,
)


class KnowledgeMode(str, enum.Enum):
    SAME_ROUND = "same_round"
    DELAYED = "delayed"


@dataclass(frozen=True)
class Coalition:
    coalition_id: int
    members: frozenset[int]
    strategy: str = "consistent_collusion"
    params: Mapping[str, Any] = field(default_factory=dict, hash=False, compare=False)
    coalition_key: bytes = b""

    def __post_init__(self) -> None:
        object.__setattr__(self, "members", frozenset(self.members))
        if not self.coalition_key:
            object.__setattr__(self, "coalition_key", derive_key("coalition", self.coalition_id))
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {sorted(STRATEGIES)}")

    @property
    def garbage_key(self) -> bytes:
        return self.coalition_key[:-1] + bytes([self.coalition_key[-1] ^ 1])


@dataclass(frozen=True)
class AdversaryKnowledge:
    """What a coalition may condition on when answering.

    ``committed`` maps task ids to the committed responses the coalition has
    seen.  ``phase`` names the protocol stage (``"grouping"`` for the
    intra-group rounds, ``"graph"`` for the resilient-graph round,
    ``"final"`` for the last round).
    """

    mode: KnowledgeMode = KnowledgeMode.SAME_ROUND
    round_index: int = 0
    phase: str = "test"
    visible_assignments: tuple[Assignment, ...] = ()
    committed: Mapping[int, int] = field(default_factory=dict, hash=False, compare=False)

    def visible(self) -> tuple[Assignment, ...]:
        """Assignments the coalition can see; the current round is hidden in delayed mode."""
        if self.mode is KnowledgeMode.DELAYED:
            return tuple(a for a in self.visible_assignments if a.round_index < self.round_index)
        return tuple(a for a in self.visible_assignments if a.round_index <= self.round_index)


def _subject_value(coalition: Coalition, assignment: Assignment, task: TaskSpec, knowledge: AdversaryKnowledge) -> int | None:
    if assignment.task_id in knowledge.committed:
        return knowledge.committed[assignment.task_id]
    if assignment.owner in coalition.members:
        return forged_value(coalition.coalition_key, task)
    return None


def _corroborate(coalition, assignment, task, knowledge) -> int:
    value = _subject_value(coalition, assignment, task, knowledge)
    return forged_value(coalition.coalition_key, task) if value is None else value


def _garbage(coalition, assignment, task, knowledge) -> int:
    forbidden = {task.true_value}
    subject = _subject_value(coalition, assignment, task, knowledge)
    if subject is not None:
        forbidden.add(subject)
    return value_avoiding(coalition.garbage_key, task.task_id, forbidden)


def consistent_collusion(coalition, member, assignment, task, knowledge) -> int:
    if assignment.owner in coalition.members:
        return _corroborate(coalition, assignment, task, knowledge)
    return _garbage(coalition, assignment, task, knowledge)


def frame_good(coalition, member, assignment, task, knowledge) -> int:
    return _garbage(coalition, assignment, task, knowledge)


def martyr(coalition, member, assignment, task, knowledge) -> int:
    early = coalition.params.get("early_phases", ("grouping",))
    if knowledge.phase in early and assignment.owner in coalition.members:
        return _garbage(coalition, assignment, task, knowledge)
    return consistent_collusion(coalition, member, assignment, task, knowledge)


def oracle_collusion(coalition, member, assignment, task, knowledge) -> int:
    if assignment.owner in coalition.members:
        return _corroborate(coalition, assignment, task, knowledge)
    return task.true_value


def random_answers(coalition, member, assignment, task, knowledge) -> int:
    # Seeded fuzzer: each answer is one of honest / echo / own forgery / garbage.
    key = derive_key("fuzz", coalition.params.get("seed", 0), coalition.coalition_id)
    pick = prf(key, member, task.task_id, knowledge.round_index) % 4
    if pick == 0:
        return task.true_value
    if pick == 1:
        return _corroborate(coalition, assignment, task, knowledge)
    if pick == 2:
        return forged_value(coalition.coalition_key, task)
    return _garbage(coalition, assignment, task, knowledge)


Strategy = Callable[[Coalition, int, Assignment, TaskSpec, AdversaryKnowledge], int]

STRATEGIES: dict[str, Strategy] = {
    "consistent_collusion": consistent_collusion,
    "frame_good": frame_good,
    "martyr": martyr,
    "oracle_collusion": oracle_collusion,
    "random": random_answers,
}

BUILTIN_STRATEGIES = ("consistent_collusion", "frame_good", "martyr", "oracle_collusion")


def strategy_response(
    coalition: Coalition,
    member: int,
    assignment: Assignment,
    task: TaskSpec,
    knowledge: AdversaryKnowledge,
) -> int:
    """Value returned by coalition ``member`` on a test assignment."""
    if member not in coalition.members:
        raise ValueError(f"participant {member} is not in coalition {coalition.coalition_id}")
    if assignment.kind is not Kind.TEST:
        raise ValueError("strategies only answer test assignments")
    try:
        strategy = STRATEGIES[coalition.strategy]
    except KeyError:
        raise ValueError(f"unknown strategy {coalition.strategy!r}") from None
    return strategy(coalition, member, assignment, task, knowledge)


def decides_to_cheat(coalition: Coalition, member: int, task_id: int, knowledge: AdversaryKnowledge) -> bool:
    """Whether ``member`` forges its original answer for ``task_id``.

    With same-round knowledge the coalition forges only when every visible
    copy of the task is held by a member, i.e. when forging is safe.  In
    delayed mode no copies are visible yet, so the choice is a fixed
    pseudorandom draw at rate ``params["cheat_prob"]`` (default 1).
    """
    if member not in coalition.members:
        raise ValueError(f"participant {member} is not in coalition {coalition.coalition_id}")
    if knowledge.mode is KnowledgeMode.SAME_ROUND:
        holders = {a.participant_id for a in knowledge.visible() if a.task_id == task_id}
        holders.add(member)
        return holders <= coalition.members
    rate = float(coalition.params.get("cheat_prob", 1.0))
    draw = prf(derive_key("cheat", coalition.coalition_id), member, task_id) / 2**64
    return draw < rate
