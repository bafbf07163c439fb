"""Test-time beam search over evidential paths, weighted voting and path rendering."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .complex_embed import ComplexEmbedding, score_tails
from .kg_store import KnowledgeGraph, Triple, valid_actions
from .mdp_env import PathState, encode_state, initial_state
from .policy_net import PolicyParams, mask_renormalize, policy_forward

# en dash U+2013, arrows U+2192 / U+2190
FWD = "\u2013{rel}\u2192"
BWD = "\u2190{rel}\u2013"
STAY = "\u2192"


@dataclass(frozen=True)
class BeamEntry:
    state: PathState
    step_heuristics: tuple[float, ...]
    cumulative: float
    last_prob: float = 0.0
    last_score: float = 0.0


@dataclass(frozen=True)
class EvidentialPath:
    head: int
    hops: tuple[tuple[int, int], ...]
    final_entity: int
    weight: float
    cumulative: float
    final_prob: float
    final_score: float


@dataclass(frozen=True)
class Verdict:
    claim: Triple
    winner: int
    vote_weights: dict[int, float]
    label: bool
    paths: tuple[EvidentialPath, ...]


def beam_heuristic(prob: float, score: float, step: int) -> float:
    """Policy probability plus the claim score raised to the (1-based) step."""
    return prob + score**step


def _expand(entry: BeamEntry, step: int, params, graph, emb) -> list[BeamEntry]:
    state = entry.state
    claim = state.claim
    legal = valid_actions(graph, state.current)
    masked = mask_renormalize(policy_forward(params, encode_state(state, emb)), legal)
    out = []
    for rel in legal:
        cands = (state.current,) if rel == graph.self_loop else graph.neighbors(state.current, rel)
        scores = score_tails(emb, claim.head, claim.relation, cands)
        prob = float(masked[rel])
        for dest, score in zip(cands, scores):
            score = float(score)
            h = beam_heuristic(prob, score, step)
            out.append(
                BeamEntry(
                    PathState(claim, state.hops + ((rel, dest),), dest, state.max_steps),
                    entry.step_heuristics + (h,),
                    entry.cumulative + h,
                    prob,
                    score,
                )
            )
    return out


def beam_search(
    claim: Triple,
    params: PolicyParams,
    graph: KnowledgeGraph,
    emb: ComplexEmbedding,
    width: int,
    max_steps: int = 3,
) -> list[EvidentialPath]:
    """Keep the ``width`` best partial paths by cumulative heuristic at every step.

    Ties rank by the hop sequence, lexicographically ascending.
    """
    if width < 1:
        raise ValueError("beam width must be >= 1")
    beam = [BeamEntry(initial_state(claim, graph, max_steps), (), 0.0)]
    for step in range(1, max_steps + 1):
        expansions = [x for entry in beam for x in _expand(entry, step, params, graph, emb)]
        expansions.sort(key=lambda x: (-x.cumulative, x.state.hops))
        beam, seen = [], set()
        for x in expansions:
            if x.state.hops in seen:
                continue
            seen.add(x.state.hops)
            beam.append(x)
            if len(beam) == width:
                break
    return [
        EvidentialPath(
            claim.head, x.state.hops, x.state.current, x.step_heuristics[-1],
            x.cumulative, x.last_prob, x.last_score,
        )
        for x in beam
    ]


def vote(paths: list[EvidentialPath]) -> tuple[int, dict[int, float]]:
    if not paths:
        raise ValueError("cannot vote without paths")
    weights: dict[int, float] = {}
    for p in paths:
        weights[p.final_entity] = weights.get(p.final_entity, 0.0) + p.weight
    winner = min(weights, key=lambda e: (-weights[e], e))
    return winner, weights


def check_claim(
    claim: Triple,
    params: PolicyParams,
    graph: KnowledgeGraph,
    emb: ComplexEmbedding,
    width: int,
    max_steps: int = 3,
) -> Verdict:
    paths = beam_search(claim, params, graph, emb, width, max_steps)
    winner, weights = vote(paths)
    return Verdict(Triple(*claim), winner, weights, winner == claim[2], tuple(paths))


def render_path(path: EvidentialPath, graph: KnowledgeGraph) -> str:
    """Arrow notation; inverse edges point backwards and self-loops are dropped."""
    ent = graph.entity_labels
    parts = [ent[path.head]]
    for rel, dest in path.hops:
        if rel == graph.self_loop:
            continue
        if graph.is_inverse(rel):
            arrow = BWD.format(rel=graph.relation_labels[graph.inverse_of(rel)])
        else:
            arrow = FWD.format(rel=graph.relation_labels[rel])
        parts += [arrow, ent[dest]]
    if len(parts) == 1:
        parts += [STAY, ent[path.head]]
    return " ".join(parts)


def verdict_record(verdict: Verdict, graph: KnowledgeGraph, true_tail: int | None = None) -> dict:
    ent, rel = graph.entity_labels, graph.relation_labels
    h, r, t = verdict.claim
    rec = {
        "claim": [ent[h], rel[r], ent[t]],
        "verdict": verdict.label,
        "winner": ent[verdict.winner],
    }
    if true_tail is not None:
        rec["true_tail"] = ent[true_tail]
    rec["paths"] = [
        {"path": render_path(p, graph), "final_entity": ent[p.final_entity], "weight": p.weight}
        for p in verdict.paths
    ]
    return rec


def verdict_json(verdict: Verdict, graph: KnowledgeGraph, true_tail: int | None = None) -> str:
    return json.dumps(verdict_record(verdict, graph, true_tail), ensure_ascii=False)


def format_verdict(verdict: Verdict, graph: KnowledgeGraph) -> str:
    ent, rel = graph.entity_labels, graph.relation_labels
    h, r, t = verdict.claim
    lines = [
        f"Claim: {ent[h]} {rel[r]} {ent[t]}",
        f"Verdict: {'TRUE' if verdict.label else 'FALSE'} (winner: {ent[verdict.winner]}, "
        f"weight {verdict.vote_weights[verdict.winner]:.6g})",
    ]
    ranked = sorted(verdict.paths, key=lambda p: -p.weight)
    for i, p in enumerate(ranked, start=1):
        lines.append(f"Path {i}: {render_path(p, graph)}  [weight {p.weight:.6g}]")
    return "\n".join(lines)
