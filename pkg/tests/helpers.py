"""Hand-built populations for protocol tests."""

import numpy as np

from uncheatable.adversary import Coalition
from uncheatable.engine import GridEngine
from uncheatable.grid_model import Behavior, ParticipantProfile, derive_key, generate_tasks


def engine_with(n, coalitions, strategy="consistent_collusion", seed=0, params=None):
    """Engine where ``coalitions`` is a list of member lists; participant i holds task i."""
    profiles = {p: ParticipantProfile(p) for p in range(n)}
    coals = []
    for cid, members in enumerate(coalitions):
        for p in members:
            profiles[p] = ParticipantProfile(p, Behavior.CHEATER, cid)
        coals.append(Coalition(cid, frozenset(members), strategy, dict(params or {}),
                               derive_key("coalition", seed, cid)))
    eng = GridEngine(generate_tasks(n, seed), profiles.values(), coals)
    committed = eng.commit({p: p for p in range(n)})
    return eng, committed


def first_cycle(n, rng_seed):
    """Members of the first round-one group the protocol will form with this rng seed."""
    return np.random.default_rng(rng_seed).permutation(n)[:4].tolist()
