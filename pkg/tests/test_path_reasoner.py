import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgfactcheck.kg_store import KnowledgeGraph, Triple
from kgfactcheck.mdp_env import state_dim
from kgfactcheck.path_reasoner import (
    EvidentialPath,
    beam_heuristic,
    beam_search,
    check_claim,
    format_verdict,
    render_path,
    verdict_json,
    vote,
)
from kgfactcheck.policy_net import PolicyParams, init_policy

from conftest import random_embedding, random_graph
from oracles import enumerate_paths, exhaustive_ranking

GOLDENS = Path(__file__).parent / "goldens"


@pytest.mark.parametrize(
    "prob, score, step, want",
    [(0.5, 1.0, 2, 1.5), (0.0, 0.5, 3, 0.125), (0.3, -0.5, 2, 0.55), (0.2, -2.0, 3, -7.8)],
)
def test_heuristic_examples(prob, score, step, want):
    assert beam_heuristic(prob, score, step) == pytest.approx(want, abs=1e-12)


def _setup(seed, n_ent=6, n_rel=2, n_triples=6, dim=4, hidden=5):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n_ent, n_rel, n_triples)
    emb = random_embedding(rng, n_ent, g.relation_count, dim)
    params = init_policy(state_dim(dim), g.relation_count, seed=seed, hidden=hidden)
    params.b2[:] = rng.normal(0, 1, g.relation_count)
    claim = Triple(int(rng.integers(n_ent)), int(rng.integers(n_rel)), int(rng.integers(n_ent)))
    return g, emb, params, claim


def _assert_same_ranking(paths, oracle):
    assert [p.hops for p in paths] == [hops for hops, _, _ in oracle]
    for p, (_, cum, last) in zip(paths, oracle):
        assert p.cumulative == pytest.approx(cum, abs=1e-12)
        assert p.weight == pytest.approx(last, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_wide_beam_equals_exhaustive(seed):
    g, emb, params, claim = _setup(seed)
    oracle = exhaustive_ranking(claim, params, g, emb)
    paths = beam_search(claim, params, g, emb, width=len(oracle) + 3)
    _assert_same_ranking(paths, oracle)


def test_width_one_is_greedy():
    for seed in range(10):
        g, emb, params, claim = _setup(seed)
        oracle = exhaustive_ranking(claim, params, g, emb)
        # greedy: best one-step prefix, then best extension of it, and so on
        prefix = ()
        for k in range(1, 4):
            best = {}
            for hops, _, _ in oracle:
                if hops[: k - 1] == prefix:
                    best.setdefault(hops[:k], None)
            prefix = min(best, key=lambda h: (-_prefix_cum(claim, params, g, emb, h), h))
        [path] = beam_search(claim, params, g, emb, width=1)
        assert path.hops == prefix


def _prefix_cum(claim, params, g, emb, hops):
    rows = exhaustive_ranking(claim, params, g, emb, steps=len(hops))
    return next(cum for h, cum, _ in rows if h == hops)


def test_zero_models_deterministic():
    g = random_graph(np.random.default_rng(0), 5, 2, 6)
    emb = random_embedding(np.random.default_rng(0), 5, g.relation_count, 3)
    for a in emb.arrays():
        a[:] = 0.0
    sd = state_dim(3)
    params = PolicyParams(np.zeros((4, sd)), np.zeros(4), np.zeros((g.relation_count, 4)), np.zeros(g.relation_count))
    runs = [beam_search(Triple(0, 0, 1), params, g, emb, 5) for _ in range(2)]
    assert runs[0] == runs[1]
    assert len({p.hops for p in runs[0]}) == len(runs[0])


def test_beam_properties():
    for seed in range(20):
        g, emb, params, claim = _setup(seed, n_ent=8, n_triples=10)
        total = len(enumerate_paths(g, claim.head))
        for width in (1, 3, 10):
            paths = beam_search(claim, params, g, emb, width)
            assert len(paths) == min(width, total)
            assert len({p.hops for p in paths}) == len(paths)
            for p in paths:
                assert p.weight == beam_heuristic(p.final_prob, p.final_score, 3)
                assert p.final_entity == p.hops[-1][1]


def test_bad_width():
    g, emb, params, claim = _setup(0)
    with pytest.raises(ValueError):
        beam_search(claim, params, g, emb, 0)


def _path(final, weight):
    return EvidentialPath(0, ((0, final),), final, weight, weight, 0.0, 0.0)


def test_vote_sums_beat_single_heavy_path():
    winner, w = vote([_path(1, 0.4), _path(1, 0.4), _path(2, 0.7)])
    assert winner == 1 and w[1] == pytest.approx(0.8)


def test_vote_tie_lowest_id():
    winner, _ = vote([_path(7, 0.5), _path(3, 0.5)])
    assert winner == 3


def test_vote_totals():
    rng = np.random.default_rng(4)
    for _ in range(20):
        paths = [_path(int(rng.integers(5)), float(rng.normal())) for _ in range(int(rng.integers(1, 12)))]
        winner, w = vote(paths)
        assert sum(w.values()) == pytest.approx(sum(p.weight for p in paths))
        assert w[winner] == max(w.values())
    with pytest.raises(ValueError):
        vote([])


def test_check_claim_label_follows_winner():
    for seed in range(10):
        g, emb, params, claim = _setup(seed)
        v = check_claim(claim, params, g, emb, 5)
        assert v.label == (v.winner == claim.tail)
        assert v.winner == vote(list(v.paths))[0]
        rec = json.loads(verdict_json(v, g, true_tail=claim.tail))
        assert rec["verdict"] == v.label and len(rec["paths"]) == len(v.paths)
        text = format_verdict(v, g)
        assert text.startswith("Claim: ") and ("TRUE" in text or "FALSE" in text)


def _golden_graph():
    ents = [
        "Brendan Shanahan", "the Devils", "Hockey", "sportsteam Buccaneers",
        "Coach John Gruden", "Amir Taheri", "Kylie Minogue", "Melbourne", "Australia",
    ]
    rels = ["plays for team", "team plays sport", "organization hired person", "place of birth", "contains"]
    e = {name: i for i, name in enumerate(ents)}
    r = {name: i for i, name in enumerate(rels)}
    base = [
        (e["Brendan Shanahan"], r["plays for team"], e["the Devils"]),
        (e["the Devils"], r["team plays sport"], e["Hockey"]),
        (e["sportsteam Buccaneers"], r["organization hired person"], e["Coach John Gruden"]),
        (e["Kylie Minogue"], r["place of birth"], e["Melbourne"]),
        (e["Australia"], r["contains"], e["Melbourne"]),
    ]
    return KnowledgeGraph.build(ents, rels, base), e, r


def test_render_goldens():
    g, e, r = _golden_graph()
    nb, loop = g.base_relation_count, g.self_loop
    inv = lambda rel: rel + nb  # noqa: E731
    cases = [
        (e["Brendan Shanahan"], [(r["plays for team"], e["the Devils"]), (r["team plays sport"], e["Hockey"]), (loop, e["Hockey"])]),
        (e["Coach John Gruden"], [(inv(r["organization hired person"]), e["sportsteam Buccaneers"]), (loop, e["sportsteam Buccaneers"]), (loop, e["sportsteam Buccaneers"])]),
        (e["Amir Taheri"], [(loop, e["Amir Taheri"])] * 3),
        (e["Kylie Minogue"], [(r["place of birth"], e["Melbourne"]), (inv(r["contains"]), e["Australia"]), (loop, e["Australia"])]),
        (e["Kylie Minogue"], [(loop, e["Kylie Minogue"]), (r["place of birth"], e["Melbourne"]), (loop, e["Melbourne"])]),
    ]
    rendered = "".join(
        render_path(EvidentialPath(head, tuple(hops), hops[-1][1], 0.0, 0.0, 0.0, 0.0), g) + "\n" for head, hops in cases
    )
    assert rendered.encode("utf-8") == (GOLDENS / "render.txt").read_bytes()
