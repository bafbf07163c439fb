"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import difflib
import logging
import sys
from pathlib import Path

from .complex_embed import TrainingDiverged, load_embeddings
from .config import ConfigError, RunConfig, TaskSpec, load_config
from .eval_harness import build_task, fit_embeddings, fit_policy, load_models, model_paths, run_experiment
from .kg_store import KnowledgeGraph, Triple, TripleFormatError, dump_vocab, load_triples, write_claims
from .path_reasoner import check_claim, format_verdict
from .policy_net import PolicyDiverged

logger = logging.getLogger("kgfactcheck")


class UsageError(Exception):
    pass


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.set_seed(args.seed)
    if args.model_dir is not None:
        cfg.model_dir = args.model_dir
    for name in ("triples", "report_dir"):
        if getattr(args, name, None) is not None:
            setattr(cfg, name, getattr(args, name))
    if getattr(args, "relations", None):
        cfg.relations = [r.strip() for r in args.relations.split(",") if r.strip()]
    if getattr(args, "epochs", None) is not None:
        cfg.embedding.epochs = args.epochs
    if getattr(args, "episodes", None) is not None:
        cfg.policy.episodes = args.episodes
    return cfg


def _graph(cfg: RunConfig) -> KnowledgeGraph:
    if not cfg.triples:
        raise UsageError("no triples file given (set [data] triples or pass --triples)")
    if not Path(cfg.triples).exists():
        raise UsageError(f"triples file not found: {cfg.triples}")
    return load_triples(cfg.triples)


def _specs(cfg: RunConfig, only: str | None = None) -> list[TaskSpec]:
    specs = cfg.task_specs()
    if not specs:
        raise UsageError("no task relations configured ([task] relations)")
    if only is not None:
        specs = [s for s in specs if s.name == only]
        if not specs:
            raise UsageError(f"unknown task {only!r}; configured: {', '.join(s.name for s in cfg.task_specs())}")
    return specs


def _lookup(kind: str, label: str, index: dict[str, int]) -> int:
    if label in index:
        return index[label]
    near = difflib.get_close_matches(label, list(index), n=5)
    hint = f"; nearest matches: {', '.join(near)}" if near else ""
    raise UsageError(f"unknown {kind} label {label!r}{hint}")


def cmd_ingest(args) -> int:
    cfg = _config(args)
    graph = _graph(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_vocab(graph.entity_labels, out / "entities.tsv")
    dump_vocab(graph.relation_labels, out / "relations.tsv")
    summary = graph.summary()
    (out / "summary.txt").write_text(summary + "\n", encoding="utf-8")
    print(summary)
    return 0


def cmd_generate_negatives(args) -> int:
    cfg = _config(args)
    graph = _graph(cfg)
    out = Path(cfg.model_dir)
    out.mkdir(parents=True, exist_ok=True)
    for spec in _specs(cfg, args.task):
        task = build_task(graph, spec, cfg)
        write_claims(task.train, graph, out / f"{spec.name}.train.tsv")
        write_claims(task.test, graph, out / f"{spec.name}.test.tsv")
        print(f"{spec.name}: {len(task.train)} train, {len(task.test)} test claims")
    return 0


def cmd_train_embeddings(args) -> int:
    cfg = _config(args)
    graph = _graph(cfg)
    for spec in _specs(cfg, args.task):
        fit_embeddings(build_task(graph, spec, cfg), cfg, spec.name)
        print(f"wrote {model_paths(cfg, spec.name)[0]}")
    return 0


def cmd_train_policy(args) -> int:
    cfg = _config(args)
    graph = _graph(cfg)
    for spec in _specs(cfg, args.task):
        emb_path = model_paths(cfg, spec.name)[0]
        if not emb_path.exists():
            raise UsageError(f"missing model file: {emb_path} (run train-embeddings first)")
        task = build_task(graph, spec, cfg)
        emb = load_embeddings(emb_path, graph.entity_count, graph.relation_count)
        fit_policy(task, emb, cfg, spec.name)
        print(f"wrote {model_paths(cfg, spec.name)[1]}")
    return 0


def cmd_check(args) -> int:
    cfg = _config(args)
    graph = _graph(cfg)
    spec = _specs(cfg, args.task)[0]
    claim = Triple(
        _lookup("entity", args.head, graph._entity_index),
        _lookup("relation", args.relation, graph._relation_index),
        _lookup("entity", args.tail, graph._entity_index),
    )
    task = build_task(graph, spec, cfg)
    try:
        emb, params = load_models(task, cfg, spec.name)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from None
    verdict = check_claim(claim, params, task.pruned_graph, emb, args.width, cfg.env.max_steps)
    print(format_verdict(verdict, task.pruned_graph))
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    graph = _graph(cfg)
    try:
        reports = run_experiment(graph, _specs(cfg, args.task), cfg, train=False)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from None
    for rep in reports:
        print(rep.row())
    print(f"wrote {Path(cfg.report_dir) / 'report.tsv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI-style run configuration")
    common.add_argument("--seed", type=int, help="override every seed")
    common.add_argument("--model-dir", dest="model_dir")
    common.add_argument("--triples", help="triple file (overrides [data] triples)")
    common.add_argument("--relations", help="comma-separated task relation labels")
    common.add_argument("--task", help="restrict to one configured task by name")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="kgfactcheck", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", parents=[common], help="load a triple file, dump vocabularies")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("generate-negatives", parents=[common], help="write task claim files")
    s.set_defaults(func=cmd_generate_negatives)

    s = sub.add_parser("train-embeddings", parents=[common])
    s.add_argument("--epochs", type=int)
    s.set_defaults(func=cmd_train_embeddings)

    s = sub.add_parser("train-policy", parents=[common])
    s.add_argument("--episodes", type=int)
    s.set_defaults(func=cmd_train_policy)

    s = sub.add_parser("check", parents=[common], help="verify one claim and print its paths")
    s.add_argument("head")
    s.add_argument("relation")
    s.add_argument("tail")
    s.add_argument("--width", type=int, default=10)
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("evaluate", parents=[common], help="hits@k / voting accuracy grid")
    s.add_argument("--report-dir", dest="report_dir")
    s.set_defaults(func=cmd_evaluate)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except (UsageError, ConfigError, TripleFormatError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 2
    except (TrainingDiverged, PolicyDiverged, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
