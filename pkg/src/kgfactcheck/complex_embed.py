"""ComplEx embeddings: scoring, logistic loss with L3 penalty, analytic gradients,
Adam training and a little-endian binary file format."""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .kg_store import KnowledgeGraph
from .optim import AdamState, adam_step

logger = logging.getLogger(__name__)

EMB_MAGIC = b"CPLX"
EMB_VERSION = 1
_EMB_HEADER = struct.Struct("<4sIQQQ")


class EmbeddingFormatError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    pass


@dataclass(eq=False)
class ComplexEmbedding:
    """Real and imaginary parts of entity and relation vectors.

    The last relation row is the self-loop; it stays zero.
    """

    entity_re: np.ndarray
    entity_im: np.ndarray
    relation_re: np.ndarray
    relation_im: np.ndarray

    @property
    def dim(self) -> int:
        return self.entity_re.shape[1]

    @property
    def entity_count(self) -> int:
        return self.entity_re.shape[0]

    @property
    def relation_count(self) -> int:
        return self.relation_re.shape[0]

    def arrays(self) -> list[np.ndarray]:
        return [self.entity_re, self.entity_im, self.relation_re, self.relation_im]

    def entity_vector(self, e: int) -> np.ndarray:
        """``[re || im]`` for one entity."""
        return np.concatenate([self.entity_re[e], self.entity_im[e]])

    def relation_vector(self, r: int) -> np.ndarray:
        return np.concatenate([self.relation_re[r], self.relation_im[r]])

    def astype(self, dtype) -> "ComplexEmbedding":
        return ComplexEmbedding(*(a.astype(dtype) for a in self.arrays()))

    def copy(self) -> "ComplexEmbedding":
        return ComplexEmbedding(*(a.copy() for a in self.arrays()))

    def equals(self, other: "ComplexEmbedding") -> bool:
        return all(
            a.dtype == b.dtype and a.shape == b.shape and a.tobytes() == b.tobytes()
            for a, b in zip(self.arrays(), other.arrays())
        )


@dataclass
class EmbedTrainConfig:
    dim: int = 20
    epochs: int = 1000
    batch_size: int = 50
    learning_rate: float = 1e-4
    l3_strength: float = 1e-5
    negatives_per_positive: int = 10
    seed: int = 0


def init_embeddings(entity_count: int, relation_count: int, dim: int, seed: int = 0) -> ComplexEmbedding:
    rng = np.random.default_rng(seed)
    e_re = rng.uniform(-0.05, 0.05, (entity_count, dim))
    e_im = rng.uniform(-0.05, 0.05, (entity_count, dim))
    r_re = rng.uniform(-0.05, 0.05, (relation_count, dim))
    r_im = rng.uniform(-0.05, 0.05, (relation_count, dim))
    r_re[-1] = 0.0
    r_im[-1] = 0.0
    return ComplexEmbedding(e_re, e_im, r_re, r_im).astype(np.float32)


def _scores(emb: ComplexEmbedding, h, r, t) -> np.ndarray:
    hr, hi = emb.entity_re[h], emb.entity_im[h]
    tr, ti = emb.entity_re[t], emb.entity_im[t]
    rr, ri = emb.relation_re[r], emb.relation_im[r]
    return np.sum(rr * (hr * tr + hi * ti) + ri * (hr * ti - hi * tr), axis=-1)


def complex_score(emb: ComplexEmbedding, head: int, relation: int, tail: int) -> float:
    """Re(<r, h, conj(t)>)."""
    return float(_scores(emb, head, relation, tail))


def score_tails(emb: ComplexEmbedding, head: int, relation: int, tails: Sequence[int]) -> np.ndarray:
    """Scores of ``(head, relation, c)`` for every candidate tail ``c`` (float64)."""
    tails = np.asarray(tails, dtype=np.int64)
    return _scores(emb, head, relation, tails).astype(np.float64)


def _as_arrays(batch) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(batch, tuple) and len(batch) == 4 and isinstance(batch[0], np.ndarray):
        return batch
    if not batch:
        raise ValueError("empty batch")
    h = np.array([tr[0] for tr, _ in batch], dtype=np.int64)
    r = np.array([tr[1] for tr, _ in batch], dtype=np.int64)
    t = np.array([tr[2] for tr, _ in batch], dtype=np.int64)
    y = np.array([y for _, y in batch], dtype=np.float64)
    return h, r, t, y


def _l3(emb: ComplexEmbedding) -> float:
    return float(sum(np.sum(np.abs(a.astype(np.float64)) ** 3) for a in emb.arrays()))


def embed_loss(emb: ComplexEmbedding, batch, l3_strength: float) -> float:
    """Mean of log(1 + exp(-y * score)) plus ``l3_strength * sum |p|^3``.

    ``batch`` is a list of ``(Triple, y)`` with ``y`` in {+1, -1}, or a tuple of
    ``(heads, relations, tails, ys)`` arrays.
    """
    h, r, t, y = _as_arrays(batch)
    phi = _scores(emb, h, r, t)
    return float(np.mean(np.logaddexp(0.0, -y * phi))) + l3_strength * _l3(emb)


def embed_grad(emb: ComplexEmbedding, batch, l3_strength: float) -> ComplexEmbedding:
    """Exact gradient of :func:`embed_loss`, shaped like ``emb``."""
    h, r, t, y = _as_arrays(batch)
    phi = _scores(emb, h, r, t)
    # d/dphi of softplus(-y*phi) = -y * sigmoid(-y*phi)
    dphi = (-y * np.exp(-np.logaddexp(0.0, y * phi)) / len(y))[:, None]

    hr, hi = emb.entity_re[h], emb.entity_im[h]
    tr, ti = emb.entity_re[t], emb.entity_im[t]
    rr, ri = emb.relation_re[r], emb.relation_im[r]

    d = emb.dim
    ent = _scatter_rows(
        emb.entity_count,
        np.concatenate([h, t]),
        np.concatenate(
            [
                np.hstack([rr * tr + ri * ti, rr * ti - ri * tr]),
                np.hstack([rr * hr - ri * hi, rr * hi + ri * hr]),
            ]
        ) * np.concatenate([dphi, dphi]),
    )
    rel = _scatter_rows(emb.relation_count, r, dphi * np.hstack([hr * tr + hi * ti, hr * ti - hi * tr]))
    g = ComplexEmbedding(
        ent[:, :d].astype(emb.entity_re.dtype, copy=False),
        ent[:, d:].astype(emb.entity_im.dtype, copy=False),
        rel[:, :d].astype(emb.relation_re.dtype, copy=False),
        rel[:, d:].astype(emb.relation_im.dtype, copy=False),
    )
    for ga, a in zip(g.arrays(), emb.arrays()):
        ga += l3_strength * 3.0 * a * np.abs(a)
    g.relation_re[-1] = 0.0
    g.relation_im[-1] = 0.0
    return g


def _scatter_rows(n_rows: int, idx: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """Row-wise ``out[idx] += vals`` with a fixed summation order."""
    out = np.zeros((n_rows, vals.shape[1]), dtype=vals.dtype)
    order = np.argsort(idx, kind="stable")
    sidx = idx[order]
    uniq, starts = np.unique(sidx, return_index=True)
    out[uniq] = np.add.reduceat(vals[order], starts, axis=0)
    return out


def _corrupt(rng, h, r, t, n, entity_count, relation_count, true_keys):
    """``n`` head-or-tail corruptions per positive; true triples are redrawn, then dropped."""
    ch, cr, ct = np.repeat(h, n), np.repeat(r, n), np.repeat(t, n)
    pending = np.arange(len(ch))
    corrupt_head = rng.random(len(ch)) < 0.5
    for _ in range(100):
        draw = rng.integers(0, entity_count, len(pending))
        ch[pending] = np.where(corrupt_head[pending], draw, np.repeat(h, n)[pending])
        ct[pending] = np.where(corrupt_head[pending], np.repeat(t, n)[pending], draw)
        keys = (ch[pending] * relation_count + cr[pending]) * entity_count + ct[pending]
        pending = pending[_isin_sorted(keys, true_keys)]
        if len(pending) == 0:
            break
    keep = np.ones(len(ch), dtype=bool)
    keep[pending] = False
    return ch[keep], cr[keep], ct[keep]


def _isin_sorted(keys: np.ndarray, sorted_keys: np.ndarray) -> np.ndarray:
    pos = np.searchsorted(sorted_keys, keys)
    pos = np.minimum(pos, len(sorted_keys) - 1)
    return sorted_keys[pos] == keys


def train_embeddings(graph: KnowledgeGraph, config: EmbedTrainConfig) -> ComplexEmbedding:
    """Fit ComplEx to every stored triple of ``graph`` (base and inverse)."""
    if not graph.triples:
        raise ValueError("cannot train embeddings on an empty graph")
    E, R = graph.entity_count, graph.relation_count
    init = init_embeddings(E, R, config.dim, config.seed)
    if config.epochs == 0:
        return init
    rng = np.random.default_rng(config.seed)
    emb = init.astype(np.float64)
    params = emb.arrays()
    state = AdamState.zeros_like(params)

    pos = np.array(sorted(graph.triples), dtype=np.int64)
    true_keys = np.sort((pos[:, 0] * R + pos[:, 1]) * E + pos[:, 2])
    n_neg = config.negatives_per_positive
    for epoch in range(config.epochs):
        order = rng.permutation(len(pos))
        for b, start in enumerate(range(0, len(pos), config.batch_size)):
            chunk = pos[order[start : start + config.batch_size]]
            h, r, t = chunk[:, 0], chunk[:, 1], chunk[:, 2]
            nh, nr, nt = _corrupt(rng, h, r, t, n_neg, E, R, true_keys)
            batch = (
                np.concatenate([h, nh]),
                np.concatenate([r, nr]),
                np.concatenate([t, nt]),
                np.concatenate([np.ones(len(h)), -np.ones(len(nh))]),
            )
            grad = embed_grad(emb, batch, config.l3_strength)
            adam_step(params, grad.arrays(), state, config.learning_rate)
            if not all(np.isfinite(p).all() for p in params):
                loss = embed_loss(emb, batch, config.l3_strength)
                raise TrainingDiverged(f"non-finite parameters (loss={loss}) at epoch {epoch} batch {b}")
        if (epoch + 1) % max(1, config.epochs // 10) == 0:
            logger.info("embedding epoch %d/%d", epoch + 1, config.epochs)
    return emb.astype(np.float32)


def save_embeddings(emb: ComplexEmbedding, path: str | Path) -> None:
    E, R, d = emb.entity_count, emb.relation_count, emb.dim
    with open(path, "wb") as fh:
        fh.write(_EMB_HEADER.pack(EMB_MAGIC, EMB_VERSION, E, R, d))
        for a in emb.arrays():
            fh.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def load_embeddings(
    path: str | Path,
    entity_count: int | None = None,
    relation_count: int | None = None,
    dim: int | None = None,
) -> ComplexEmbedding:
    """Read an embedding file; optional expected shapes are checked against its header."""
    data = Path(path).read_bytes()
    if len(data) < _EMB_HEADER.size:
        raise EmbeddingFormatError(f"{path}: file too short for header ({len(data)} bytes)")
    magic, version, E, R, d = _EMB_HEADER.unpack_from(data)
    if magic != EMB_MAGIC:
        raise EmbeddingFormatError(f"{path}: bad magic {magic!r}, expected {EMB_MAGIC!r}")
    if version != EMB_VERSION:
        raise EmbeddingFormatError(f"{path}: unsupported format version {version}")
    for name, want, got in (("entity_count", entity_count, E), ("relation_count", relation_count, R), ("dim", dim, d)):
        if want is not None and want != got:
            raise EmbeddingFormatError(f"{path}: {name} mismatch, file has {got}, expected {want}")
    expected = _EMB_HEADER.size + 4 * 2 * d * (E + R)
    if len(data) != expected:
        raise EmbeddingFormatError(
            f"{path}: shape mismatch, header ({E} entities, {R} relations, dim {d}) "
            f"needs {expected} bytes, file has {len(data)}"
        )
    off = _EMB_HEADER.size
    arrays = []
    for rows in (E, E, R, R):
        n = rows * d
        arrays.append(np.frombuffer(data, dtype="<f4", count=n, offset=off).reshape(rows, d).astype(np.float32))
        off += 4 * n
    return ComplexEmbedding(*arrays)
