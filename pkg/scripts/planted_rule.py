"""Train and evaluate on the synthetic planted-rule graph.

    python3 scripts/planted_rule.py --out runs/planted --episodes 20000
"""

import argparse
import logging
from pathlib import Path

from kgfactcheck.config import RunConfig
from kgfactcheck.eval_harness import REPORT_HEADER, run_experiment
from kgfactcheck.kg_store import load_triples
from kgfactcheck.synthetic import QUERY, planted_rule_triples, write_triples


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/planted")
    ap.add_argument("--episodes", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    triples = write_triples(planted_rule_triples(seed=args.seed), out / "planted.tsv")
    cfg = RunConfig(
        triples=str(triples), model_dir=str(out / "models"), report_dir=str(out / "reports"), relations=[QUERY]
    )
    cfg.policy.episodes = args.episodes
    cfg.set_seed(args.seed)
    graph = load_triples(triples)
    print(graph.summary())
    print(REPORT_HEADER)
    for rep in run_experiment(graph, cfg.task_specs(), cfg):
        print(rep.row())


if __name__ == "__main__":
    main()
