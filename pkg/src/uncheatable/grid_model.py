"""Tasks, participants and responses.

Task values are opaque 64-bit integers.  The honest result ``g(t)`` and each
coalition's forged result are keyed BLAKE2b pseudorandom functions of the
task id, so every run is reproducible from its seed.  The supervisor side of
the code only ever sees responses and :func:`compare`; ground truth stays in
the simulator.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .adversary import AdversaryKnowledge, Coalition

MASK64 = (1 << 64) - 1


def derive_key(*parts: object) -> bytes:
    """Deterministic 32-byte key from arbitrary printable parts."""
    text = "\x1f".join(str(p) for p in parts).encode()
    return hashlib.blake2b(text, digest_size=32).digest()


def prf(key: bytes, *words: int) -> int:
    """Keyed pseudorandom 64-bit value of a tuple of non-negative ints."""
    h = hashlib.blake2b(key=key, digest_size=8)
    for w in words:
        h.update((w & MASK64).to_bytes(8, "little"))
    return int.from_bytes(h.digest(), "little")


def value_avoiding(key: bytes, task_id: int, forbidden: set[int] | frozenset[int]) -> int:
    """``prf(key, task_id, salt)`` for the first salt whose value is not forbidden."""
    salt = 0
    while True:
        v = prf(key, task_id, salt)
        if v not in forbidden:
            return v
        salt += 1


class Behavior(str, enum.Enum):
    GOOD = "good"
    CHEATER = "cheater"
    TRAITOR = "traitor"


class Kind(str, enum.Enum):
    ORIGINAL = "original"
    TEST = "test"


class Match(str, enum.Enum):
    MATCH = "match"
    MISMATCH = "mismatch"


@dataclass(frozen=True)
class TaskSpec:
    task_id: int
    true_value: int


@dataclass(frozen=True)
class ParticipantProfile:
    participant_id: int
    behavior: Behavior = Behavior.GOOD
    coalition_id: int | None = None

    def __post_init__(self) -> None:
        if self.behavior is Behavior.GOOD and self.coalition_id is not None:
            raise ValueError("good participants do not belong to a coalition")
        if self.behavior is not Behavior.GOOD and self.coalition_id is None:
            raise ValueError(f"{self.behavior.value} participants need a coalition")

    @property
    def is_bad(self) -> bool:
        return self.behavior is not Behavior.GOOD


@dataclass(frozen=True)
class Assignment:
    """A task handed to a participant.

    ``owner`` is the participant whose committed response the task checks
    (for originals, the participant itself).
    """

    task_id: int
    participant_id: int
    round_index: int = 0
    kind: Kind = Kind.ORIGINAL
    owner: int | None = None

    def __post_init__(self) -> None:
        owner = self.participant_id if self.owner is None else self.owner
        object.__setattr__(self, "owner", owner)
        if self.kind is Kind.TEST and owner == self.participant_id:
            raise ValueError("a participant cannot test its own response")
        if self.kind is Kind.ORIGINAL and owner != self.participant_id:
            raise ValueError("an original assignment is owned by its performer")


@dataclass(frozen=True)
class Response:
    assignment: Assignment
    value: int

    @property
    def task_id(self) -> int:
        return self.assignment.task_id


def generate_tasks(n: int, seed: int) -> list[TaskSpec]:
    """``n`` tasks with ids ``0..n-1`` and values ``prf(run_key, id)``."""
    if n < 1:
        raise ValueError("need at least one task")
    key = derive_key("run", seed)
    return [TaskSpec(i, prf(key, i)) for i in range(n)]


def forged_value(coalition_key: bytes, task: TaskSpec) -> int:
    """The coalition's false function; never equal to the honest value."""
    return value_avoiding(coalition_key, task.task_id, {task.true_value})


def evaluate(
    profile: ParticipantProfile,
    assignment: Assignment,
    task: TaskSpec,
    knowledge: AdversaryKnowledge | None = None,
    coalition: Coalition | None = None,
) -> Response:
    """What ``profile`` answers for ``assignment``."""
    if assignment.participant_id != profile.participant_id:
        raise ValueError("assignment targets a different participant")
    if assignment.task_id != task.task_id:
        raise ValueError("assignment and task disagree on task id")

    if profile.behavior is Behavior.GOOD:
        return Response(assignment, task.true_value)
    if coalition is None or coalition.coalition_id != profile.coalition_id:
        raise ValueError(f"participant {profile.participant_id} needs its coalition to answer")

    if assignment.kind is Kind.ORIGINAL:
        if profile.behavior is Behavior.TRAITOR:
            return Response(assignment, task.true_value)
        return Response(assignment, forged_value(coalition.coalition_key, task))

    from .adversary import AdversaryKnowledge, strategy_response

    if knowledge is None:
        knowledge = AdversaryKnowledge()
    value = strategy_response(coalition, profile.participant_id, assignment, task, knowledge)
    return Response(assignment, value)


def compare(a: Response, b: Response) -> Match:
    """The supervisor's only detection primitive."""
    if a.task_id != b.task_id:
        raise ValueError(f"cannot compare responses to tasks {a.task_id} and {b.task_id}")
    return Match.MATCH if a.value == b.value else Match.MISMATCH
