"""Path-walking environment: states, encoding, transitions and terminal reward."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .complex_embed import ComplexEmbedding, score_tails
from .kg_store import ClaimSample, KnowledgeGraph, Triple, valid_actions


class EnvContractError(RuntimeError):
    pass


@dataclass
class EnvConfig:
    max_steps: int = 3

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass(frozen=True)
class PathState:
    claim: Triple
    hops: tuple[tuple[int, int], ...]
    current: int
    max_steps: int = 3

    @property
    def step(self) -> int:
        return len(self.hops)

    @property
    def done(self) -> bool:
        return self.step >= self.max_steps


def state_dim(dim: int, max_steps: int = 3) -> int:
    return (3 + 2 * max_steps) * 2 * dim


def initial_state(claim: Triple, graph: KnowledgeGraph | None = None, max_steps: int = 3) -> PathState:
    if graph is not None:
        h, r, t = claim
        if not (0 <= h < graph.entity_count and 0 <= t < graph.entity_count and 0 <= r < graph.relation_count):
            raise EnvContractError(f"claim {claim} has ids outside the graph")
    return PathState(Triple(*claim), (), claim[0], max_steps)


def encode_state(state: PathState, emb: ComplexEmbedding) -> np.ndarray:
    """Claim (head, relation, tail) then one (relation, entity) pair per hop, zero padded.

    Each slot is the ``[re || im]`` vector; the self-loop row is zero, so a
    self-loop hop contributes an all-zero relation slot.
    """
    width = 2 * emb.dim
    out = np.zeros(state_dim(emb.dim, state.max_steps))
    h, r, t = state.claim
    out[0:width] = emb.entity_vector(h)
    out[width : 2 * width] = emb.relation_vector(r)
    out[2 * width : 3 * width] = emb.entity_vector(t)
    for i, (rel, ent) in enumerate(state.hops):
        base = (3 + 2 * i) * width
        out[base : base + width] = emb.relation_vector(rel)
        out[base + width : base + 2 * width] = emb.entity_vector(ent)
    return out


def transition(state: PathState, action: int, graph: KnowledgeGraph, emb: ComplexEmbedding) -> PathState:
    """Follow ``action`` to the neighbour scoring highest as the claim's tail."""
    if state.done:
        raise EnvContractError(f"no steps left (step {state.step} of {state.max_steps})")
    if action not in valid_actions(graph, state.current):
        raise EnvContractError(f"relation {action} is not legal at entity {state.current}")
    if action == graph.self_loop:
        dest = state.current
    else:
        cands = graph.neighbors(state.current, action)
        scores = score_tails(emb, state.claim.head, state.claim.relation, cands)
        dest = cands[int(np.argmax(scores))]  # candidates ascend, argmax keeps the first max
    return PathState(state.claim, state.hops + ((action, dest),), dest, state.max_steps)


def reward(final_state: PathState, sample: ClaimSample) -> float:
    if not final_state.done:
        raise EnvContractError("reward requested before the final step")
    return 1.0 if final_state.current == sample.true_tail else 0.0


def path_verdict(final_state: PathState) -> bool:
    """Single-path verdict: the walk ends on the claimed tail."""
    return final_state.current == final_state.claim.tail
