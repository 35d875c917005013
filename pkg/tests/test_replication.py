import numpy as np
import pytest

from uncheatable.replication import (
    binomial_interval,
    pipeline_schedule,
    run_delayed_duplication,
    run_same_round_duplication,
    run_sybil_ramp,
)


def within_3se(observed, expected, trials):
    se = np.sqrt(expected * (1 - expected) / trials)
    return abs(observed - expected) <= 3 * se


# -- schedule -------------------------------------------------------------------


def test_schedule_alternates_sequences():
    s = pipeline_schedule(4, 2, seed=0)
    assert [r.sequence_id for r in s.rounds] == [0, 1]
    assert sorted(t for r in s.rounds for t in r.originals) == [0, 1, 2, 3]


def test_duplicates_follow_their_originals():
    s = pipeline_schedule(100, 10, seed=3)
    s.add_duplicates(np.arange(0, 100, 3))
    assert s.violations() == 0
    for r in s.rounds:
        for t in r.duplicates:
            assert s.task_round[t] < r.index
            assert s.sequence_of(s.task_round[t]) == r.sequence_id


def test_violations_are_detected():
    s = pipeline_schedule(10, 4, seed=1)
    s.dup_task = np.array([0])
    s.dup_round = np.array([s.task_round[0]])
    assert s.violations() == 1


def test_schedule_is_deterministic():
    a, b = pipeline_schedule(100, 10, seed=5), pipeline_schedule(100, 10, seed=5)
    assert np.array_equal(a.task_round, b.task_round)
    with pytest.raises(ValueError):
        pipeline_schedule(10, 0)


# -- same-round duplication -----------------------------------------------------


def test_same_round_leak_rate():
    m = run_same_round_duplication(10_000, 0.05, 1_000_000, seed=1)
    expected = 500 * 499 / (10_000 * 9_999)
    assert within_3se(m.undetected_fraction, expected, m.tasks_total)
    assert m.forged_caught == 0
    assert m.replication_overhead == 1


def test_same_round_extremes():
    none = run_same_round_duplication(100, 0, 10_000, seed=0)
    assert none.tasks_forged == 0 and none.forged_undetected == 0
    everyone = run_same_round_duplication(100, 1, 10_000, seed=0)
    assert everyone.tasks_forged == everyone.forged_undetected == 10_000


# -- delayed duplication --------------------------------------------------------


def test_delayed_catch_rate_one_percent():
    m = run_delayed_duplication(10_000, 0.01, 1.0, 11_000_000, seed=2)
    assert m.tasks_forged >= 100_000
    assert within_3se(m.empirical_catch_rate, 0.99, m.tasks_forged)


def test_delayed_catch_rate_follows_product_law():
    m = run_delayed_duplication(10_000, 0.05, 0.5 / 0.95, 2_000_000, seed=3)
    assert m.empirical_catch_rate == pytest.approx(0.5, abs=0.01)


def test_delayed_without_duplication_catches_nothing():
    m = run_delayed_duplication(1_000, 0.1, 0.0, 100_000, seed=4)
    assert m.tasks_forged > 0 and m.forged_caught == 0 and m.duplicates_issued == 0


def test_delayed_accounting_and_schedule():
    m = run_delayed_duplication(1_000, 0.2, 0.7, 200_000, seed=5, cheat_prob=0.6)
    assert m.forged_caught + m.forged_undetected == m.tasks_forged
    assert m.schedule_violations == 0
    assert m.misresolved <= m.third_copies


def test_no_false_accusations_with_honest_third_checkers():
    m = run_delayed_duplication(1_000, 0.0, 1.0, 50_000, seed=6)
    assert m.false_accusations == 0 and m.tasks_forged == 0
    # with colluders around, a colluding third copy can outvote an honest checker
    m = run_delayed_duplication(100, 0.3, 1.0, 50_000, seed=6)
    assert m.false_accusations > 0


def test_decisions_are_blind_to_duplication():
    _, base = run_delayed_duplication(500, 0.1, 0.5, 100_000, seed=7, cheat_prob=0.5, return_decisions=True)
    for dup_seed in (1, 2, 3):
        m, other = run_delayed_duplication(500, 0.1, 0.5, 100_000, seed=7, cheat_prob=0.5,
                                           duplication_seed=dup_seed, return_decisions=True)
        assert np.array_equal(base, other)


def test_delayed_rejects_bad_probability():
    with pytest.raises(ValueError):
        run_delayed_duplication(100, 0.1, 1.5, 10)
    with pytest.raises(ValueError):
        run_delayed_duplication(100, 1.5, 0.5, 10)
    with pytest.raises(ValueError):
        run_delayed_duplication(2, 0.1, 0.5, 10)


def test_runs_are_deterministic():
    a = run_delayed_duplication(1_000, 0.05, 0.5, 100_000, seed=9).to_dict()
    b = run_delayed_duplication(1_000, 0.05, 0.5, 100_000, seed=9).to_dict()
    assert a == b


# -- Sybil ramp ----------------------------------------------------------------


def test_sybil_new_users_fully_checked():
    _, trace = run_sybil_ramp(200, 0.05, 0.5, 0.95, 5_000, seed=1)
    for probs in trace.probabilities.values():
        assert probs[0] == 1.0
        assert all(b <= a for a, b in zip(probs, probs[1:]))


def test_sybil_veterans_settle_at_floor():
    _, trace = run_sybil_ramp(100, 0.0, 0.5, 0.95, 5_000, seed=2, initial_completed=20)
    assert all(p == pytest.approx(0.5 / 0.95) for probs in trace.probabilities.values() for p in probs)


def test_sybil_repeat_cheater_caught_within_ten():
    # every identity starts as a veteran so each attempt is caught with probability P
    m, trace = run_sybil_ramp(1_000, 0.05, 0.5, 0.95, 200_000, seed=3, initial_completed=20,
                              fresh_identity_completed=20)
    assert m.empirical_catch_rate == pytest.approx(0.5, abs=0.02)
    assert trace.caught_within(10) == pytest.approx(1 - 2 ** -10, abs=0.005)
    assert m.extra["identities_created"] == m.forged_caught


def test_sybil_rejects_p_above_g():
    with pytest.raises(ValueError):
        run_sybil_ramp(100, 0.05, 0.96, 0.95, 10)


def test_binomial_interval():
    p, lo, hi = binomial_interval(50, 100)
    assert p == 0.5 and lo == pytest.approx(0.35) and hi == pytest.approx(0.65)
    assert np.isnan(binomial_interval(0, 0)[0])
