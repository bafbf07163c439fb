import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from kgfactcheck.complex_embed import complex_score
from kgfactcheck.kg_store import ClaimSample, Triple, valid_actions
from kgfactcheck.mdp_env import (
    EnvContractError,
    encode_state,
    initial_state,
    path_verdict,
    reward,
    state_dim,
    transition,
)

from conftest import random_embedding


@pytest.fixture
def star(write_graph):
    # A has three neighbours via r, one via s; D is a dead end except inverses
    return write_graph([("A", "r", "B"), ("A", "r", "C"), ("A", "r", "D"), ("A", "s", "B"), ("B", "q", "C")])


@pytest.fixture
def emb(star):
    return random_embedding(np.random.default_rng(0), star.entity_count, star.relation_count, 20)


def _slots(vec, dim):
    return vec.reshape(-1, 2 * dim)


def test_initial_state(star):
    claim = Triple(0, 0, 2)
    s = initial_state(claim, star)
    assert s.current == 0 and s.step == 0 and s.hops == ()
    with pytest.raises(EnvContractError):
        initial_state(Triple(0, 0, 99), star)


def test_encoding_step0_layout(star, emb):
    s = initial_state(Triple(0, 0, 2), star)
    v = encode_state(s, emb)
    assert v.shape == (360,) == (state_dim(20, 3),)
    assert not v[120:].any()
    nonzero_slots = [i for i, slot in enumerate(_slots(v, 20)) if slot.any()]
    assert nonzero_slots == [0, 1, 2]
    np.testing.assert_array_equal(_slots(v, 20)[1], np.concatenate([emb.relation_re[0], emb.relation_im[0]]))


def test_claim_visible_in_state(star, emb):
    a = encode_state(initial_state(Triple(0, 0, 1), star), emb)
    b = encode_state(initial_state(Triple(0, 0, 2), star), emb)
    assert initial_state(Triple(0, 0, 1)).current == initial_state(Triple(0, 0, 2)).current
    assert not np.array_equal(a, b)


def test_hop_slots(star, emb):
    s = initial_state(Triple(0, 0, 2), star)
    s1 = transition(s, star.relation_id("s"), star, emb)
    v = _slots(encode_state(s1, emb), 20)
    np.testing.assert_array_equal(v[3], emb.relation_vector(star.relation_id("s")))
    np.testing.assert_array_equal(v[4], emb.entity_vector(star.entity_id("B")))
    assert not v[5:].any()


def test_self_loop_hop(star, emb):
    s = initial_state(Triple(0, 0, 2), star)
    s1 = transition(s, star.self_loop, star, emb)
    assert s1.current == s.current and s1.step == 1
    v = _slots(encode_state(s1, emb), 20)
    assert not v[3].any()
    np.testing.assert_array_equal(v[4], emb.entity_vector(0))


def test_single_neighbour(star, emb):
    B = star.entity_id("B")
    s = initial_state(Triple(B, 0, 0), star)
    s1 = transition(s, star.relation_id("q"), star, emb)
    assert s1.current == star.entity_id("C")


def test_argmax_over_three_neighbours(star):
    rng = np.random.default_rng(1)
    for _ in range(20):
        emb = random_embedding(rng, star.entity_count, star.relation_count, 4)
        claim = Triple(0, star.relation_id("s"), 3)
        s1 = transition(initial_state(claim, star), 0, star, emb)
        cands = star.neighbors(0, 0)
        best = max(cands, key=lambda c: (complex_score(emb, 0, claim.relation, c), -c))
        assert s1.current == best


def test_argmax_tie_lowest_id(star):
    emb = random_embedding(np.random.default_rng(2), star.entity_count, star.relation_count, 4)
    for a in emb.arrays():
        a[:] = 0.0
    s1 = transition(initial_state(Triple(0, 1, 2), star), 0, star, emb)
    assert s1.current == min(star.neighbors(0, 0))


def test_illegal_and_exhausted(star, emb):
    s = initial_state(Triple(0, 0, 2), star)
    with pytest.raises(EnvContractError):
        transition(s, star.relation_id("q"), star, emb)
    for _ in range(3):
        s = transition(s, star.self_loop, star, emb)
    with pytest.raises(EnvContractError):
        transition(s, star.self_loop, star, emb)


def test_reward_cases(star, emb):
    s = initial_state(Triple(0, 0, 2), star)
    with pytest.raises(EnvContractError):
        reward(s, ClaimSample(Triple(0, 0, 2), True, 2))
    stay = s
    for _ in range(3):
        stay = transition(stay, star.self_loop, star, emb)
    assert reward(stay, ClaimSample(Triple(0, 0, 2), True, 2)) == 0.0
    assert reward(stay, ClaimSample(Triple(0, 0, 0), True, 0)) == 1.0
    # negative claim whose claimed tail is reached earns nothing
    neg = ClaimSample(Triple(0, 0, 0), False, 2)
    assert reward(stay, neg) == 0.0
    assert path_verdict(stay) == (stay.current == stay.claim.tail)


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.lists(st.integers(0, 50), min_size=3, max_size=3), st.integers(0, 3), st.integers(0, 3))
def test_random_walks_are_legal(star, emb, picks, head, tail):
    s = initial_state(Triple(head, 0, tail), star)
    for k in picks:
        legal = valid_actions(star, s.current)
        prev = s.current
        s = transition(s, legal[k % len(legal)], star, emb)
        r, e = s.hops[-1]
        if r == star.self_loop:
            assert e == prev
        else:
            assert e in star.neighbors(prev, r)
        v = encode_state(s, emb)
        assert not v[(3 + 2 * s.step) * 40 :].any()
    sample = ClaimSample(Triple(head, 0, tail), True, tail)
    assert reward(s, sample) in (0.0, 1.0)
