"""Hits@k and weighted-vote accuracy over a task grid, plus model/report files."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .complex_embed import ComplexEmbedding, load_embeddings, save_embeddings, train_embeddings
from .config import RunConfig, TaskSpec
from .kg_store import (
    ClaimSample,
    KnowledgeGraph,
    TaskDataset,
    combine_tasks,
    embedding_graph,
    extract_task,
    generate_negatives,
)
from .mdp_env import state_dim
from .path_reasoner import Verdict, check_claim, verdict_json
from .policy_net import PolicyParams, init_policy, load_policy, save_policy, train_policy

logger = logging.getLogger(__name__)

REPORT_HEADER = "task\tsize\twidth\thits\tvoting_acc\thits_pos"


@dataclass(frozen=True)
class SampleRecord:
    sample: ClaimSample
    reached: bool
    winner: int
    correct: bool
    verdict: Verdict


@dataclass
class EvalReport:
    task: str
    dataset_size: int
    beam_width: int
    hits: float
    hits_positive: float
    voting_accuracy: float
    records: list[SampleRecord]

    def row(self) -> str:
        return (
            f"{self.task}\t{self.dataset_size}\t{self.beam_width}\t{self.hits:.6f}\t"
            f"{self.voting_accuracy:.6f}\t{self.hits_positive:.6f}"
        )


def _mean(xs: Sequence[bool]) -> float:
    return sum(xs) / len(xs) if xs else 0.0


def evaluate(
    task: TaskDataset,
    params: PolicyParams,
    emb: ComplexEmbedding,
    width: int,
    name: str = "task",
    max_steps: int = 3,
) -> EvalReport:
    """Beam-search every test claim once; both metrics target the true tail."""
    if not task.test:
        raise ValueError("task has an empty test split")
    graph = task.pruned_graph
    records = []
    for s in task.test:
        v = check_claim(s.claim, params, graph, emb, width, max_steps)
        reached = any(p.final_entity == s.true_tail for p in v.paths)
        records.append(SampleRecord(s, reached, v.winner, v.winner == s.true_tail, v))
    return EvalReport(
        task=name,
        dataset_size=task.size,
        beam_width=width,
        hits=_mean([r.reached for r in records]),
        hits_positive=_mean([r.reached for r in records if r.sample.label]),
        voting_accuracy=_mean([r.correct for r in records]),
        records=records,
    )


def eval_hits(task: TaskDataset, params: PolicyParams, emb: ComplexEmbedding, width: int, max_steps: int = 3) -> float:
    return evaluate(task, params, emb, width, max_steps=max_steps).hits


def eval_voting(task: TaskDataset, params: PolicyParams, emb: ComplexEmbedding, width: int, max_steps: int = 3) -> float:
    return evaluate(task, params, emb, width, max_steps=max_steps).voting_accuracy


# -- pipeline ----------------------------------------------------------------


def build_task(graph: KnowledgeGraph, spec: TaskSpec, cfg: RunConfig) -> TaskDataset:
    tasks = []
    for label in spec.relations:
        try:
            rid = graph.relation_id(label)
        except KeyError:
            raise KeyError(f"unknown relation label {label!r}") from None
        t = extract_task(graph, rid, cfg.split_ratio, cfg.seed)
        tasks.append(generate_negatives(t, graph, cfg.negative_ratio, cfg.seed))
    return tasks[0] if len(tasks) == 1 else combine_tasks(graph, tasks)


def model_paths(cfg: RunConfig, name: str) -> tuple[Path, Path]:
    d = Path(cfg.model_dir)
    return d / f"{name}.emb", d / f"{name}.pol"


def fit_embeddings(task: TaskDataset, cfg: RunConfig, name: str) -> ComplexEmbedding:
    emb = train_embeddings(embedding_graph(task), cfg.embedding)
    path = model_paths(cfg, name)[0]
    path.parent.mkdir(parents=True, exist_ok=True)
    save_embeddings(emb, path)
    return emb


def fit_policy(task: TaskDataset, emb: ComplexEmbedding, cfg: RunConfig, name: str) -> PolicyParams:
    graph = task.pruned_graph
    params = init_policy(
        state_dim(emb.dim, cfg.env.max_steps), graph.relation_count, cfg.policy.seed, cfg.policy.hidden
    )
    path = model_paths(cfg, name)[1]
    path.parent.mkdir(parents=True, exist_ok=True)
    log_path = path.with_suffix(".log")
    with open(log_path, "w", encoding="utf-8", newline="\n") as log:
        params = train_policy(
            task, params, graph, emb, cfg.policy, cfg.env,
            on_progress=lambda ep, avg: log.write(f"{ep}\t{avg:.6f}\n"),
        )
    save_policy(params, path)
    return params


def load_models(task: TaskDataset, cfg: RunConfig, name: str) -> tuple[ComplexEmbedding, PolicyParams]:
    emb_path, pol_path = model_paths(cfg, name)
    for p in (emb_path, pol_path):
        if not p.exists():
            raise FileNotFoundError(f"missing model file: {p}")
    g = task.pruned_graph
    emb = load_embeddings(emb_path, g.entity_count, g.relation_count)
    params = load_policy(pol_path, state_dim(emb.dim, cfg.env.max_steps), g.relation_count)
    return emb, params


def write_report(reports: Sequence[EvalReport], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(REPORT_HEADER + "\n")
        for rep in reports:
            fh.write(rep.row() + "\n")


def write_details(report: EvalReport, graph: KnowledgeGraph, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in report.records:
            fh.write(verdict_json(rec.verdict, graph, rec.sample.true_tail) + "\n")


def run_experiment(
    graph: KnowledgeGraph, specs: Sequence[TaskSpec], cfg: RunConfig, train: bool = True
) -> list[EvalReport]:
    """Every (task, beam width) cell; models are trained or loaded from ``cfg.model_dir``."""
    reports = []
    report_dir = Path(cfg.report_dir)
    report_dir.mkdir(parents=True, exist_ok=True)
    for spec in specs:
        task = build_task(graph, spec, cfg)
        if train:
            emb = fit_embeddings(task, cfg, spec.name)
            params = fit_policy(task, emb, cfg, spec.name)
        else:
            emb, params = load_models(task, cfg, spec.name)
        for width in cfg.widths:
            rep = evaluate(task, params, emb, width, spec.name, cfg.env.max_steps)
            logger.info("%s", rep.row())
            write_details(rep, task.pruned_graph, report_dir / f"{spec.name}.w{width}.jsonl")
            reports.append(rep)
    write_report(reports, report_dir / "report.tsv")
    return reports
