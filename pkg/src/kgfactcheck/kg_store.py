"""Knowledge graph loading, indexing, task extraction and negative claims."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

logger = logging.getLogger(__name__)

INVERSE_SUFFIX = "_inv"
SELF_LOOP_LABEL = "SELF_LOOP"
MIN_TASK_TRIPLES = 5


class TripleFormatError(ValueError):
    pass


class Triple(NamedTuple):
    head: int
    relation: int
    tail: int


@dataclass(frozen=True, eq=False)
class KnowledgeGraph:
    """Immutable triple store with inverse closure and an adjacency index.

    Relation ids are laid out as ``[base relations | inverses | self-loop]``,
    so ``inverse_of(r) == r + base_relation_count`` for a base relation.
    """

    entity_labels: tuple[str, ...]
    relation_labels: tuple[str, ...]
    base_relation_count: int
    triples: frozenset[Triple]
    adjacency: dict[tuple[int, int], tuple[int, ...]] = field(repr=False)
    _actions: dict[int, tuple[int, ...]] = field(repr=False)

    @classmethod
    def build(
        cls,
        entity_labels: Sequence[str],
        base_relation_labels: Sequence[str],
        base_triples: Iterable[tuple[int, int, int]],
    ) -> "KnowledgeGraph":
        nb = len(base_relation_labels)
        relation_labels = (
            tuple(base_relation_labels)
            + tuple(label + INVERSE_SUFFIX for label in base_relation_labels)
            + (SELF_LOOP_LABEL,)
        )
        triples: set[Triple] = set()
        for h, r, t in base_triples:
            if not 0 <= r < nb:
                raise ValueError(f"relation id {r} is not a base relation")
            triples.add(Triple(h, r, t))
            triples.add(Triple(t, r + nb, h))
        adj: dict[tuple[int, int], list[int]] = defaultdict(list)
        for h, r, t in triples:
            adj[(h, r)].append(t)
        adjacency = {key: tuple(sorted(tails)) for key, tails in adj.items()}
        per_entity: dict[int, list[int]] = defaultdict(list)
        for h, r in adjacency:
            per_entity[h].append(r)
        self_loop = 2 * nb
        actions = {e: tuple(sorted(rs)) + (self_loop,) for e, rs in per_entity.items()}
        return cls(
            entity_labels=tuple(entity_labels),
            relation_labels=relation_labels,
            base_relation_count=nb,
            triples=frozenset(triples),
            adjacency=adjacency,
            _actions=actions,
        )

    @property
    def entity_count(self) -> int:
        return len(self.entity_labels)

    @property
    def relation_count(self) -> int:
        """Size of the full relation universe (base + inverse + self-loop)."""
        return len(self.relation_labels)

    @property
    def self_loop(self) -> int:
        return 2 * self.base_relation_count

    @property
    def fact_count(self) -> int:
        return sum(1 for tr in self.triples if tr.relation < self.base_relation_count)

    def inverse_of(self, relation: int) -> int:
        nb = self.base_relation_count
        if relation < nb:
            return relation + nb
        if relation < 2 * nb:
            return relation - nb
        raise ValueError("the self-loop relation has no inverse")

    def is_inverse(self, relation: int) -> bool:
        return self.base_relation_count <= relation < 2 * self.base_relation_count

    def base_triples(self) -> list[Triple]:
        return sorted(tr for tr in self.triples if tr.relation < self.base_relation_count)

    def neighbors(self, entity: int, relation: int) -> tuple[int, ...]:
        return self.adjacency.get((entity, relation), ())

    def with_base_triples(self, base_triples: Iterable[tuple[int, int, int]]) -> "KnowledgeGraph":
        """A new graph over the same vocabularies holding only ``base_triples``."""
        return KnowledgeGraph.build(
            self.entity_labels, self.relation_labels[: self.base_relation_count], base_triples
        )

    def entity_id(self, label: str) -> int:
        return self._entity_index[label]

    def relation_id(self, label: str) -> int:
        return self._relation_index[label]

    @property
    def _entity_index(self) -> dict[str, int]:
        idx = self.__dict__.get("_eidx")
        if idx is None:
            idx = {label: i for i, label in enumerate(self.entity_labels)}
            object.__setattr__(self, "_eidx", idx)
        return idx

    @property
    def _relation_index(self) -> dict[str, int]:
        idx = self.__dict__.get("_ridx")
        if idx is None:
            idx = {label: i for i, label in enumerate(self.relation_labels)}
            object.__setattr__(self, "_ridx", idx)
        return idx

    def summary(self) -> str:
        return (
            f"entities={self.entity_count} relations={self.base_relation_count} "
            f"facts={self.fact_count}"
        )


def valid_actions(graph: KnowledgeGraph, at: int) -> tuple[int, ...]:
    """Relations with at least one edge leaving ``at``, plus the self-loop, ascending."""
    return graph._actions.get(at, (graph.self_loop,))


def load_triples(file_path: str | Path) -> KnowledgeGraph:
    """Read a ``head<TAB>relation<TAB>tail`` file into a :class:`KnowledgeGraph`.

    Lines whose relation label ends in ``_inv`` and whose base label also
    occurs in the file are read as inverse edges of that base relation.
    """
    rows: list[tuple[str, str, str]] = []
    with open(file_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise TripleFormatError(
                    f"{file_path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}"
                )
            rows.append((parts[0], parts[1], parts[2]))
    if not rows:
        raise TripleFormatError(f"{file_path}: no triples found")

    labels = {r for _, r, _ in rows}

    def split_label(rel: str) -> tuple[str, bool]:
        if rel.endswith(INVERSE_SUFFIX) and rel[: -len(INVERSE_SUFFIX)] in labels:
            return rel[: -len(INVERSE_SUFFIX)], True
        return rel, False

    entities: dict[str, int] = {}
    relations: dict[str, int] = {}
    base: list[tuple[int, int, int]] = []
    for h, rel, t in rows:
        hid = entities.setdefault(h, len(entities))
        tid = entities.setdefault(t, len(entities))
        name, inverted = split_label(rel)
        rid = relations.setdefault(name, len(relations))
        base.append((tid, rid, hid) if inverted else (hid, rid, tid))
    graph = KnowledgeGraph.build(list(entities), list(relations), base)
    logger.info("loaded %s: %s", file_path, graph.summary())
    return graph


def dump_vocab(labels: Sequence[str], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, label in enumerate(labels):
            fh.write(f"{i}\t{label}\n")


# -- reasoning tasks ---------------------------------------------------------


@dataclass(frozen=True)
class ClaimSample:
    claim: Triple
    label: bool
    true_tail: int

    def __post_init__(self):
        if self.label != (self.claim.tail == self.true_tail):
            raise ValueError(f"inconsistent claim sample {self}")


@dataclass(frozen=True, eq=False)
class TaskDataset:
    query_relations: tuple[int, ...]
    train: tuple[ClaimSample, ...]
    test: tuple[ClaimSample, ...]
    pruned_graph: KnowledgeGraph

    @property
    def query_relation(self) -> int:
        return self.query_relations[0]

    @property
    def size(self) -> int:
        return len(self.train) + len(self.test)


def extract_task(
    graph: KnowledgeGraph, query_relation: int, split_ratio: float = 0.8, seed: int = 0
) -> TaskDataset:
    """Remove the query relation (and its inverse) and split its triples."""
    if not 0 <= query_relation < graph.base_relation_count:
        raise ValueError(f"relation id {query_relation} is not a base relation")
    name = graph.relation_labels[query_relation]
    positives = sorted(tr for tr in graph.triples if tr.relation == query_relation)
    if len(positives) < MIN_TASK_TRIPLES:
        raise ValueError(
            f"relation {name!r} has {len(positives)} triples; at least {MIN_TASK_TRIPLES} needed"
        )
    order = np.random.default_rng(seed).permutation(len(positives))
    shuffled = [positives[i] for i in order]
    n_train = min(len(shuffled) - 1, max(1, int(round(split_ratio * len(shuffled)))))
    samples = [ClaimSample(tr, True, tr.tail) for tr in shuffled]
    pruned = graph.with_base_triples(
        tr for tr in graph.base_triples() if tr.relation != query_relation
    )
    return TaskDataset((query_relation,), tuple(samples[:n_train]), tuple(samples[n_train:]), pruned)


def generate_negatives(
    task: TaskDataset, graph: KnowledgeGraph, ratio: int = 10, seed: int = 0
) -> TaskDataset:
    """Add ``ratio`` tail-corrupted false claims after each positive claim.

    Corrupted tails come from entities seen as tails of the same relation in
    ``graph`` (falling back to every entity), never from a true tail of the
    claim's (head, relation). Draws are without replacement while the pool
    allows it.
    """
    if ratio < 1:
        raise ValueError("ratio must be >= 1")
    rng = np.random.default_rng(seed)
    tails_of: dict[int, set[int]] = defaultdict(set)
    true_tails: dict[tuple[int, int], set[int]] = defaultdict(set)
    for h, r, t in graph.triples:
        tails_of[r].add(t)
        true_tails[(h, r)].add(t)

    def corrupt(sample: ClaimSample) -> list[ClaimSample]:
        h, r, t = sample.claim
        banned = true_tails[(h, r)] | {t}
        pool = sorted(tails_of[r] - banned)
        if not pool:
            pool = sorted(set(range(graph.entity_count)) - banned)
        if not pool:
            raise ValueError(f"no negative tail available for claim {sample.claim}")
        picks = rng.choice(len(pool), size=ratio, replace=len(pool) < ratio)
        return [ClaimSample(Triple(h, r, pool[i]), False, t) for i in picks]

    def expand(split: Sequence[ClaimSample]) -> tuple[ClaimSample, ...]:
        out: list[ClaimSample] = []
        for sample in split:
            out.append(sample)
            if sample.label:
                out.extend(corrupt(sample))
        return tuple(out)

    return TaskDataset(task.query_relations, expand(task.train), expand(task.test), task.pruned_graph)


def combine_tasks(graph: KnowledgeGraph, tasks: Sequence[TaskDataset]) -> TaskDataset:
    """Union of several single-relation tasks over a graph pruned of all their relations."""
    rels = tuple(r for task in tasks for r in task.query_relations)
    pruned = graph.with_base_triples(tr for tr in graph.base_triples() if tr.relation not in rels)
    train = tuple(s for task in tasks for s in task.train)
    test = tuple(s for task in tasks for s in task.test)
    return TaskDataset(rels, train, test, pruned)


def embedding_graph(task: TaskDataset) -> KnowledgeGraph:
    """The pruned graph plus the task's training positives (no test claims)."""
    g = task.pruned_graph
    extra = [s.claim for s in task.train if s.label]
    return g.with_base_triples(list(g.base_triples()) + extra)


def write_claims(samples: Iterable[ClaimSample], graph: KnowledgeGraph, path: str | Path) -> None:
    ent, rel = graph.entity_labels, graph.relation_labels
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in samples:
            h, r, t = s.claim
            fh.write(f"{ent[h]}\t{rel[r]}\t{ent[t]}\t{int(s.label)}\t{ent[s.true_tail]}\n")


def read_claims(graph: KnowledgeGraph, path: str | Path) -> list[ClaimSample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\r\n").split("\t")
            if len(parts) != 5 or parts[3] not in ("0", "1"):
                raise TripleFormatError(f"{path}:{lineno}: malformed claim line")
            h, r, t = graph.entity_id(parts[0]), graph.relation_id(parts[1]), graph.entity_id(parts[2])
            out.append(ClaimSample(Triple(h, r, t), parts[3] == "1", graph.entity_id(parts[4])))
    return out
