"""Two-layer softmax policy over relations, trained with REINFORCE."""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .complex_embed import ComplexEmbedding
from .kg_store import ClaimSample, KnowledgeGraph, TaskDataset, valid_actions
from .mdp_env import EnvConfig, encode_state, initial_state, reward, transition
from .optim import AdamState, adam_step

logger = logging.getLogger(__name__)

POL_MAGIC = b"POLN"
POL_VERSION = 1
_POL_HEADER = struct.Struct("<4sIQQQ")


class PolicyFormatError(ValueError):
    pass


class PolicyDiverged(RuntimeError):
    pass


@dataclass(eq=False)
class PolicyParams:
    w1: np.ndarray  # hidden x state_dim
    b1: np.ndarray
    w2: np.ndarray  # action_count x hidden
    b2: np.ndarray

    @property
    def state_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    @property
    def action_count(self) -> int:
        return self.w2.shape[0]

    def arrays(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]

    def copy(self) -> "PolicyParams":
        return PolicyParams(*(a.copy() for a in self.arrays()))

    def equals(self, other: "PolicyParams") -> bool:
        return all(
            a.shape == b.shape and a.tobytes() == b.tobytes()
            for a, b in zip(self.arrays(), other.arrays())
        )


@dataclass
class PolicyTrainConfig:
    episodes: int = 100_000
    learning_rate: float = 0.001
    top_k_sampling: int = 3
    seed: int = 0
    hidden: int = 128
    optimizer: str = "adam"  # or "sgd"
    log_every: int = 1000

    def __post_init__(self):
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrajectoryStep:
    state_vector: np.ndarray
    action: int
    prob: float
    legal: tuple[int, ...]


@dataclass
class Trajectory:
    steps: list[TrajectoryStep] = field(default_factory=list)
    reward: float = 0.0
    final_entity: int = -1


def init_policy(state_dim: int, action_count: int, seed: int = 0, hidden: int = 128) -> PolicyParams:
    """Xavier-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    bound1 = np.sqrt(6.0 / (state_dim + hidden))
    bound2 = np.sqrt(6.0 / (hidden + action_count))
    w1 = rng.uniform(-bound1, bound1, (hidden, state_dim))
    w2 = rng.uniform(-bound2, bound2, (action_count, hidden))
    return PolicyParams(w1, np.zeros(hidden), w2, np.zeros(action_count))


def _logits(params: PolicyParams, sv: np.ndarray):
    z1 = params.w1 @ sv + params.b1
    a1 = np.maximum(z1, 0.0)
    return z1, a1, params.w2 @ a1 + params.b2


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - np.max(z))
    return e / e.sum()


def policy_forward(params: PolicyParams, sv: np.ndarray) -> np.ndarray:
    if sv.shape != (params.state_dim,):
        raise ValueError(f"state vector has shape {sv.shape}, expected ({params.state_dim},)")
    probs = _softmax(_logits(params, sv)[2])
    if not np.all(np.isfinite(probs)):
        raise PolicyDiverged("policy produced non-finite probabilities")
    return probs


def mask_renormalize(probs: np.ndarray, legal: Sequence[int]) -> np.ndarray:
    legal = np.asarray(legal, dtype=np.int64)
    out = np.zeros_like(probs)
    mass = probs[legal].sum()
    if mass > 0.0 and np.isfinite(mass):
        out[legal] = probs[legal] / mass
    if not (mass > 0.0) or not np.all(np.isfinite(out)):
        out[:] = 0.0
        out[legal] = 1.0 / len(legal)
    return out


def top_k_distribution(masked: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """The ``k`` most probable positive entries (ties to the lower index), renormalized."""
    if k < 1:
        raise ValueError("k must be >= 1")
    positive = np.flatnonzero(masked > 0.0)
    order = positive[np.lexsort((positive, -masked[positive]))]
    top = order[:k]
    q = masked[top]
    return top, q / q.sum()


def sample_top_k(masked: np.ndarray, k: int, rng: np.random.Generator) -> int:
    top, q = top_k_distribution(masked, k)
    cdf = np.cumsum(q)
    i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return int(top[min(i, len(top) - 1)])


def run_episode(
    sample: ClaimSample,
    params: PolicyParams,
    graph: KnowledgeGraph,
    emb: ComplexEmbedding,
    config: PolicyTrainConfig,
    rng: np.random.Generator,
    env: EnvConfig | None = None,
) -> Trajectory:
    env = env or EnvConfig()
    state = initial_state(sample.claim, graph, env.max_steps)
    traj = Trajectory()
    while not state.done:
        sv = encode_state(state, emb)
        legal = valid_actions(graph, state.current)
        masked = mask_renormalize(policy_forward(params, sv), legal)
        action = sample_top_k(masked, config.top_k_sampling, rng)
        traj.steps.append(TrajectoryStep(sv, action, float(masked[action]), legal))
        state = transition(state, action, graph, emb)
    traj.reward = reward(state, sample)
    traj.final_entity = state.current
    return traj


def _masked_log_prob(z2: np.ndarray, action: int, legal: Sequence[int]):
    legal = np.asarray(legal, dtype=np.int64)
    zl = z2[legal]
    m = zl.max()
    lse = m + np.log(np.exp(zl - m).sum())
    p = np.zeros_like(z2)
    p[legal] = np.exp(zl - lse)
    return z2[action] - lse, p


def episode_loss(params: PolicyParams, trajectory: Trajectory) -> float:
    """-reward * sum of log masked probabilities of the chosen actions."""
    total = 0.0
    for st in trajectory.steps:
        logp, _ = _masked_log_prob(_logits(params, st.state_vector)[2], st.action, st.legal)
        total += logp
    return -trajectory.reward * total


def policy_grad(params: PolicyParams, trajectory: Trajectory) -> PolicyParams:
    """Gradient of :func:`episode_loss` through masking, softmax and both layers."""
    sv = np.stack([st.state_vector for st in trajectory.steps])
    z1 = sv @ params.w1.T + params.b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ params.w2.T + params.b2
    dz2 = np.empty_like(z2)
    for i, st in enumerate(trajectory.steps):
        _, p = _masked_log_prob(z2[i], st.action, st.legal)
        p[st.action] -= 1.0
        dz2[i] = p
    dz2 *= trajectory.reward
    dz1 = (dz2 @ params.w2) * (z1 > 0.0)
    return PolicyParams(dz1.T @ sv, dz1.sum(axis=0), dz2.T @ a1, dz2.sum(axis=0))


def reinforce_update(
    params: PolicyParams,
    trajectory: Trajectory,
    learning_rate: float,
    optimizer: AdamState | None = None,
) -> PolicyParams:
    """One REINFORCE step. Plain gradient descent unless an Adam state is given.

    Zero-reward episodes leave parameters and optimizer state untouched.
    """
    new = params.copy()
    if trajectory.reward == 0.0:
        return new
    grad = policy_grad(params, trajectory)
    if not all(np.isfinite(a).all() for a in grad.arrays()):
        raise PolicyDiverged("non-finite policy gradient")
    if optimizer is None:
        for p, gp in zip(new.arrays(), grad.arrays()):
            p -= learning_rate * gp
    else:
        adam_step(new.arrays(), grad.arrays(), optimizer, learning_rate)
    return new


def train_policy(
    task: TaskDataset,
    params: PolicyParams,
    graph: KnowledgeGraph,
    emb: ComplexEmbedding,
    config: PolicyTrainConfig,
    env: EnvConfig | None = None,
    on_progress: Callable[[int, float], None] | None = None,
) -> PolicyParams:
    """Run ``config.episodes`` REINFORCE episodes on claims drawn from the train split.

    Every ``log_every`` episodes ``on_progress(episode, mean reward over the window)``
    is called.
    """
    if not task.train:
        raise ValueError("task has an empty train split")
    rng = np.random.default_rng(config.seed)
    params = params.copy()
    adam = AdamState.zeros_like(params.arrays()) if config.optimizer == "adam" else None
    window: list[float] = []
    every = max(1, min(config.log_every, config.episodes))
    for ep in range(config.episodes):
        sample = task.train[int(rng.integers(len(task.train)))]
        traj = run_episode(sample, params, graph, emb, config, rng, env)
        try:
            params = reinforce_update(params, traj, config.learning_rate, adam)
        except PolicyDiverged as exc:
            raise PolicyDiverged(f"{exc} at episode {ep}") from None
        window.append(traj.reward)
        if len(window) == every:
            avg = float(np.mean(window))
            logger.info("episode %d avg_reward %.4f", ep, avg)
            if on_progress is not None:
                on_progress(ep, avg)
            window.clear()
    return params


def save_policy(params: PolicyParams, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(_POL_HEADER.pack(POL_MAGIC, POL_VERSION, params.state_dim, params.hidden, params.action_count))
        for a in params.arrays():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_policy(
    path: str | Path, state_dim: int | None = None, action_count: int | None = None
) -> PolicyParams:
    data = Path(path).read_bytes()
    if len(data) < _POL_HEADER.size:
        raise PolicyFormatError(f"{path}: file too short for header ({len(data)} bytes)")
    magic, version, sd, hid, ac = _POL_HEADER.unpack_from(data)
    if magic != POL_MAGIC:
        raise PolicyFormatError(f"{path}: bad magic {magic!r}, expected {POL_MAGIC!r}")
    if version != POL_VERSION:
        raise PolicyFormatError(f"{path}: unsupported format version {version}")
    for name, want, got in (("state_dim", state_dim, sd), ("action_count", action_count, ac)):
        if want is not None and want != got:
            raise PolicyFormatError(f"{path}: {name} mismatch, file has {got}, expected {want}")
    shapes = [(hid, sd), (hid,), (ac, hid), (ac,)]
    expected = _POL_HEADER.size + 8 * sum(int(np.prod(s)) for s in shapes)
    if len(data) != expected:
        raise PolicyFormatError(
            f"{path}: shape mismatch, header (state_dim {sd}, hidden {hid}, actions {ac}) "
            f"needs {expected} bytes, file has {len(data)}"
        )
    off = _POL_HEADER.size
    arrays = []
    for s in shapes:
        n = int(np.prod(s))
        arrays.append(np.frombuffer(data, dtype="<f8", count=n, offset=off).reshape(s).astype(np.float64))
        off += 8 * n
    return PolicyParams(*arrays)
