import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kgfactcheck.complex_embed import ComplexEmbedding  # noqa: E402
from kgfactcheck.kg_store import load_triples  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def write_graph(tmp_path):
    def _write(lines, name="g.tsv"):
        p = tmp_path / name
        p.write_text("".join(f"{h}\t{r}\t{t}\n" for h, r, t in lines), encoding="utf-8")
        return load_triples(p)

    return _write


def random_embedding(rng, n_ent, n_rel, dim, scale=1.0, dtype=np.float64) -> ComplexEmbedding:
    emb = ComplexEmbedding(
        rng.normal(0, scale, (n_ent, dim)),
        rng.normal(0, scale, (n_ent, dim)),
        rng.normal(0, scale, (n_rel, dim)),
        rng.normal(0, scale, (n_rel, dim)),
    )
    emb.relation_re[-1] = 0.0
    emb.relation_im[-1] = 0.0
    return emb.astype(dtype)


def random_graph(rng, n_ent, n_rel, n_triples):
    from kgfactcheck.kg_store import KnowledgeGraph

    triples = [
        (int(rng.integers(n_ent)), int(rng.integers(n_rel)), int(rng.integers(n_ent)))
        for _ in range(n_triples)
    ]
    return KnowledgeGraph.build([f"e{i}" for i in range(n_ent)], [f"r{i}" for i in range(n_rel)], triples)
