"""Run configuration: one JSON file, strict keys, flag overrides win."""

from __future__ import annotations

import hashlib
import json
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .model import HyperParams, VariantFlags
from .nn.store import OptimizerConfig

PATH_KEYS = (
    "corpus",
    "dataset",
    "train",
    "dev",
    "test",
    "vocab",
    "rules",
    "checkpoint",
    "audit_store",
    "out_dir",
    "ui_dir",
)


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    paths: dict[str, str] = field(default_factory=dict)
    hyperparams: HyperParams = field(default_factory=HyperParams)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    variants: VariantFlags = field(default_factory=VariantFlags)
    seeds: list[int] = field(default_factory=lambda: [0])
    epsilon: float = 0.01
    max_iters: int = 10

    def to_record(self) -> dict:
        return {
            "paths": dict(self.paths),
            "hyperparams": asdict(self.hyperparams),
            "optimizer": asdict(self.optimizer),
            "variants": asdict(self.variants),
            "seeds": list(self.seeds),
            "epsilon": self.epsilon,
            "max_iters": self.max_iters,
        }


def _check_keys(record: dict, allowed: tuple[str, ...], where: str) -> None:
    unknown = set(record) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")


def load_config(path) -> RunConfig:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    _check_keys(
        raw,
        ("paths", "hyperparams", "optimizer", "variants", "seeds", "epsilon", "max_iters"),
        "config",
    )
    paths = raw.get("paths", {})
    _check_keys(paths, PATH_KEYS, "paths")
    hp_raw = raw.get("hyperparams", {})
    _check_keys(hp_raw, tuple(HyperParams.__dataclass_fields__), "hyperparams")
    opt_raw = raw.get("optimizer", {})
    _check_keys(opt_raw, tuple(OptimizerConfig.__dataclass_fields__), "optimizer")
    var_raw = raw.get("variants", {})
    _check_keys(var_raw, tuple(VariantFlags.__dataclass_fields__), "variants")
    try:
        return RunConfig(
            paths={k: str(v) for k, v in paths.items()},
            hyperparams=HyperParams(**hp_raw),
            optimizer=OptimizerConfig(**opt_raw),
            variants=VariantFlags(**var_raw),
            seeds=[int(s) for s in raw.get("seeds", [0])],
            epsilon=float(raw.get("epsilon", 0.01)),
            max_iters=int(raw.get("max_iters", 10)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def config_hash(config: RunConfig) -> str:
    canonical = json.dumps(config.to_record(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def run_record(config: RunConfig, seed: int) -> dict:
    """Reproducibility record written next to every long-running command's output."""
    from . import __version__

    digest = config_hash(config)
    return {
        "config": config.to_record(),
        "config_hash": digest,
        "seed": seed,
        "provenance": f"nerforge/{__version__}/{digest}/seed{seed}",
        "versions": {
            "nerforge": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
    }


def make_run_dir(base, config: RunConfig) -> Path:
    stamp = time.strftime("%Y%m%d-%H%M%S")
    run_dir = Path(base) / f"{stamp}-{config_hash(config)}"
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir
