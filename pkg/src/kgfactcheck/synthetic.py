"""Small synthetic graphs with a planted rule, used by tests and scripts."""

from __future__ import annotations

from pathlib import Path

import numpy as np

QUERY = "rq"
RULE = "rsyn"


def planted_rule_triples(
    n_people: int = 40, n_places: int = 10, n_things: int = 10, seed: int = 0
) -> list[tuple[str, str, str]]:
    """``rq(x, y)`` holds exactly when ``rsyn(x, y)`` holds.

    Decoys: every person also ``visited`` a different place and ``knows`` two
    other people; places ``border`` each other and things sit ``in`` places.
    """
    rng = np.random.default_rng(seed)
    people = [f"person{i}" for i in range(n_people)]
    places = [f"place{i}" for i in range(n_places)]
    things = [f"thing{i}" for i in range(n_things)]
    out: list[tuple[str, str, str]] = []
    for i, p in enumerate(people):
        home = int(rng.integers(n_places))
        out.append((p, RULE, places[home]))
        out.append((p, QUERY, places[home]))
        other = (home + 1 + int(rng.integers(n_places - 1))) % n_places
        out.append((p, "visited", places[other]))
        for j in rng.choice([k for k in range(n_people) if k != i], size=2, replace=False):
            out.append((p, "knows", people[int(j)]))
        out.append((p, "owns", things[int(rng.integers(n_things))]))
    for j in range(n_places):
        out.append((places[j], "borders", places[(j + 1) % n_places]))
    for k, t in enumerate(things):
        out.append((t, "in", places[int(rng.integers(n_places))]))
    return out


def write_triples(triples, path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for h, r, t in triples:
            fh.write(f"{h}\t{r}\t{t}\n")
    return path
