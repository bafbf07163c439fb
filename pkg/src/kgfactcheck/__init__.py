"""Explainable fact checking over knowledge graphs with a path-walking RL agent."""

from .complex_embed import ComplexEmbedding, EmbedTrainConfig, complex_score, train_embeddings
from .kg_store import ClaimSample, KnowledgeGraph, TaskDataset, Triple, load_triples
from .mdp_env import EnvConfig, PathState
from .path_reasoner import EvidentialPath, Verdict, beam_search, check_claim, render_path, vote
from .policy_net import PolicyParams, PolicyTrainConfig, init_policy, train_policy

__version__ = "0.1.0"
