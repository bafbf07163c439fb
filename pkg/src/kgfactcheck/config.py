"""Run configuration: published defaults, INI-style config files and flag overrides."""

from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path

from .complex_embed import EmbedTrainConfig
from .mdp_env import EnvConfig
from .policy_net import PolicyTrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    triples: str | None = None
    model_dir: str = "models"
    report_dir: str = "reports"
    relations: list[str] = field(default_factory=list)
    combined: bool = False
    negative_ratio: int = 10
    split_ratio: float = 0.8
    seed: int = 0
    widths: list[int] = field(default_factory=lambda: [3, 5, 10])
    embedding: EmbedTrainConfig = field(default_factory=EmbedTrainConfig)
    policy: PolicyTrainConfig = field(default_factory=PolicyTrainConfig)
    env: EnvConfig = field(default_factory=EnvConfig)

    def set_seed(self, seed: int) -> None:
        self.seed = seed
        self.embedding.seed = seed
        self.policy.seed = seed

    def task_specs(self) -> list["TaskSpec"]:
        specs = [TaskSpec(task_name(r), (r,)) for r in self.relations]
        if self.combined and len(self.relations) > 1:
            specs.append(TaskSpec("combined", tuple(self.relations)))
        return specs


@dataclass(frozen=True)
class TaskSpec:
    name: str
    relations: tuple[str, ...]


def task_name(relation_label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", relation_label).strip("_") or "task"


# section -> (target attribute or None for top level, allowed keys)
_SECTIONS = {
    "data": (None, ("triples", "model_dir", "report_dir")),
    "task": (None, ("relations", "combined", "negative_ratio", "split_ratio", "seed")),
    "eval": (None, ("widths",)),
    "embedding": ("embedding", tuple(f.name for f in dataclasses.fields(EmbedTrainConfig))),
    "policy": ("policy", tuple(f.name for f in dataclasses.fields(PolicyTrainConfig))),
    "env": ("env", tuple(f.name for f in dataclasses.fields(EnvConfig))),
}


def _coerce(current, raw: str, key: str):
    raw = raw.strip()
    try:
        if isinstance(current, bool):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(current, int):
            return int(raw.replace("_", ""))
        if isinstance(current, float):
            return float(raw)
        if isinstance(current, list):
            items = [x.strip() for x in raw.split(",") if x.strip()]
            return [int(x) for x in items] if key == "widths" else items
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def apply_settings(cfg: RunConfig, section: str, values: dict[str, str]) -> None:
    if section not in _SECTIONS:
        raise ConfigError(f"unknown config section [{section}]")
    attr, allowed = _SECTIONS[section]
    target = cfg if attr is None else getattr(cfg, attr)
    for key, raw in values.items():
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in section [{section}]")
        setattr(target, key, _coerce(getattr(target, key), raw, key))
    if hasattr(target, "__post_init__"):
        target.__post_init__()  # re-validate


def load_config(path: str | Path | None = None) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for section in parser.sections():
        apply_settings(cfg, section, dict(parser.items(section)))
    if parser.defaults():
        raise ConfigError(f"{path}: keys outside a section are not allowed")
    return cfg
