import random

import numpy as np
import pytest

from uncheatable.adversary import (
    BUILTIN_STRATEGIES,
    STRATEGIES,
    AdversaryKnowledge,
    Coalition,
    KnowledgeMode,
    decides_to_cheat,
    strategy_response,
)
from uncheatable.diagnosis import score, three_round_protocol
from uncheatable.grid_model import Assignment, Kind, TaskSpec, forged_value

from helpers import engine_with, first_cycle

TASK = TaskSpec(4, 987654321)


def test_registry():
    assert set(BUILTIN_STRATEGIES) < set(STRATEGIES)
    assert "random" in STRATEGIES
    with pytest.raises(ValueError):
        Coalition(0, frozenset({1}), "bribery")


def member_test(owner, tester=2):
    return Assignment(TASK.task_id, tester, 1, Kind.TEST, owner=owner)


def test_consistent_collusion_echoes_member_commitment():
    c = Coalition(0, frozenset({1, 2}), "consistent_collusion")
    committed = {TASK.task_id: forged_value(c.coalition_key, TASK)}
    k = AdversaryKnowledge(committed=committed)
    assert strategy_response(c, 2, member_test(owner=1), TASK, k) == committed[TASK.task_id]


def test_consistent_collusion_contradicts_good_participants():
    c = Coalition(0, frozenset({1, 2}), "consistent_collusion")
    k = AdversaryKnowledge(committed={TASK.task_id: TASK.true_value})
    assert strategy_response(c, 2, member_test(owner=7), TASK, k) != TASK.true_value


def test_frame_good_always_mismatches():
    c = Coalition(0, frozenset({1, 2}), "frame_good")
    for owner, committed in ((7, TASK.true_value), (1, forged_value(c.coalition_key, TASK))):
        k = AdversaryKnowledge(committed={TASK.task_id: committed})
        assert strategy_response(c, 2, member_test(owner), TASK, k) != committed


def test_oracle_collusion_is_honest_on_good_tasks():
    c = Coalition(0, frozenset({1, 2}), "oracle_collusion")
    assert strategy_response(c, 2, member_test(owner=7), TASK, AdversaryKnowledge()) == TASK.true_value


def test_martyr_sacrifices_members_only_early():
    c = Coalition(0, frozenset({1, 2}), "martyr")
    forged = forged_value(c.coalition_key, TASK)
    early = AdversaryKnowledge(phase="grouping", committed={TASK.task_id: forged})
    late = AdversaryKnowledge(phase="graph", committed={TASK.task_id: forged})
    assert strategy_response(c, 2, member_test(owner=1), TASK, early) != forged
    assert strategy_response(c, 2, member_test(owner=1), TASK, late) == forged


def test_martyr_cycle_is_discarded_and_still_caught():
    rng_seed = 31
    bad = first_cycle(80, rng_seed)
    eng, committed = engine_with(80, [bad], "martyr")
    result = three_round_protocol(committed, eng, rng=np.random.default_rng(rng_seed))
    assert set(bad) <= set(result.discarded)
    assert result.forged == set(bad)
    assert score(result, eng).exact_match


def test_strategy_rejects_outsiders_and_originals():
    c = Coalition(0, frozenset({1, 2}))
    with pytest.raises(ValueError):
        strategy_response(c, 9, member_test(owner=1, tester=9), TASK, AdversaryKnowledge())
    with pytest.raises(ValueError):
        strategy_response(c, 2, Assignment(TASK.task_id, 2), TASK, AdversaryKnowledge())


def test_random_strategy_is_seeded():
    c1 = Coalition(0, frozenset({1, 2}), "random", {"seed": 5})
    c2 = Coalition(0, frozenset({1, 2}), "random", {"seed": 5})
    k = AdversaryKnowledge(round_index=2)
    tasks = [TaskSpec(i, 1000 + i) for i in range(50)]
    a = [strategy_response(c1, 2, Assignment(t.task_id, 2, 2, Kind.TEST, owner=9), t, k) for t in tasks]
    b = [strategy_response(c2, 2, Assignment(t.task_id, 2, 2, Kind.TEST, owner=9), t, k) for t in tasks]
    assert a == b
    # the fuzzer mixes honest and dishonest answers
    assert 0 < sum(v == t.true_value for v, t in zip(a, tasks)) < len(tasks)


def test_same_round_cheats_only_when_all_holders_collude():
    c = Coalition(0, frozenset({1, 2}))
    inside = (Assignment(5, 1, 0), Assignment(5, 2, 0, Kind.TEST, owner=1))
    outside = (Assignment(5, 1, 0), Assignment(5, 3, 0, Kind.TEST, owner=1))
    assert decides_to_cheat(c, 1, 5, AdversaryKnowledge(visible_assignments=inside))
    assert not decides_to_cheat(c, 1, 5, AdversaryKnowledge(visible_assignments=outside))
    with pytest.raises(ValueError):
        decides_to_cheat(c, 3, 5, AdversaryKnowledge())


def test_delayed_mode_hides_current_round():
    now = (Assignment(5, 3, 4, Kind.TEST, owner=1),)
    past = (Assignment(6, 3, 2, Kind.TEST, owner=1),)
    k = AdversaryKnowledge(KnowledgeMode.DELAYED, round_index=4, visible_assignments=now + past)
    assert k.visible() == past
    assert AdversaryKnowledge(round_index=4, visible_assignments=now + past).visible() == now + past


def test_delayed_decisions_ignore_current_round_assignments():
    c = Coalition(0, frozenset(range(10)), params={"cheat_prob": 0.5})
    rng = random.Random(3)
    past = tuple(Assignment(t, rng.randrange(10, 40), 1, Kind.TEST, owner=rng.randrange(10)) for t in range(30))
    decisions = None
    for _ in range(20):
        # reshuffle who tests what in the current round
        now = tuple(Assignment(t, rng.randrange(40), 3, Kind.TEST, owner=rng.randrange(40, 80)) for t in range(30))
        k = AdversaryKnowledge(KnowledgeMode.DELAYED, round_index=3, visible_assignments=past + now)
        got = [decides_to_cheat(c, m, t, k) for m in range(10) for t in range(30)]
        assert decisions is None or got == decisions
        decisions = got
    assert 0.35 < sum(decisions) / len(decisions) < 0.65


@pytest.mark.parametrize("strategy", list(STRATEGIES))
def test_delayed_strategy_outputs_ignore_current_round(strategy):
    c = Coalition(0, frozenset({1, 2, 3}), strategy, {"seed": 1})
    committed = {TASK.task_id: forged_value(c.coalition_key, TASK)}
    answers = set()
    for shuffle in range(5):
        now = tuple(Assignment(TASK.task_id + 1 + i, 10 + (i + shuffle) % 7, 2, Kind.TEST, owner=20 + i)
                    for i in range(6))
        k = AdversaryKnowledge(KnowledgeMode.DELAYED, 2, "graph", now, committed)
        answers.add(strategy_response(c, 2, Assignment(TASK.task_id, 2, 2, Kind.TEST, owner=1), TASK, k))
    assert len(answers) == 1
