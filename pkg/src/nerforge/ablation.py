"""Variant matrix experiments: train each model variant over several seeds."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .corpus import LabeledSentence, extract_entities, spans_from_tags
from .encoder import ReferenceEncoder
from .metrics import bre_ratio, entity_prf
from .model import BoundaryRevisedTagger, HyperParams, VariantFlags
from .nn.store import OptimizerConfig
from .training import AlternateTrainer

log = logging.getLogger(__name__)

# Row order and semantics of the standard ablation. "no_gated_ignoring"
# removes the whole mechanism (both the sigmoid gate scaling and the random
# control); "no_random_probability" removes only the stochastic skip.
ABLATION_VARIANTS: dict[str, VariantFlags] = {
    "no_boundary_detection": VariantFlags(disable_bd=True),
    "no_revision": VariantFlags(disable_revision=True),
    "no_gated_ignoring": VariantFlags(disable_gate=True, disable_random=True),
    "no_random_probability": VariantFlags(disable_random=True),
    "full": VariantFlags(),
}


@dataclass
class VariantRun:
    seed: int
    precision: float
    recall: float
    f1: float
    bre: float

    def to_record(self) -> dict:
        return {
            "seed": self.seed,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "bre": self.bre,
        }


@dataclass
class VariantResult:
    variant: str
    runs: list[VariantRun]
    error: str | None = None

    @property
    def mean_f1(self) -> float:
        return float(np.mean([r.f1 for r in self.runs])) if self.runs else 0.0

    @property
    def mean_precision(self) -> float:
        return float(np.mean([r.precision for r in self.runs])) if self.runs else 0.0

    @property
    def mean_recall(self) -> float:
        return float(np.mean([r.recall for r in self.runs])) if self.runs else 0.0

    @property
    def mean_bre(self) -> float:
        return float(np.mean([r.bre for r in self.runs])) if self.runs else 0.0

    def to_record(self) -> dict:
        return {
            "variant": self.variant,
            "runs": [r.to_record() for r in self.runs],
            "mean_precision": self.mean_precision,
            "mean_recall": self.mean_recall,
            "mean_f1": self.mean_f1,
            "mean_bre": self.mean_bre,
            "error": self.error,
        }


def train_and_score(
    train: Sequence[LabeledSentence],
    test: Sequence[LabeledSentence],
    hp: HyperParams,
    opt_config: OptimizerConfig,
    variants: VariantFlags,
    seed: int,
    epochs: int | None = None,
) -> VariantRun:
    """One training run plus entity PRF / boundary-error scoring on test."""
    hp_run = replace(hp, seed=seed)
    vocab = sorted({t for s in train for t in s.tokens})
    encoder = ReferenceEncoder(vocab, d_emb=hp.d_emb, d_hidden=hp.d_hidden)
    tagger = BoundaryRevisedTagger(encoder, hp_run, variants)
    trainer = AlternateTrainer(tagger, opt_config)
    trainer.fit(list(train), epochs=epochs, log_progress=False)
    gold = [extract_entities(s) for s in test]
    pred = [spans_from_tags(tagger.predict_tags(s.tokens)) for s in test]
    prf = entity_prf(gold, pred)
    bre = bre_ratio(gold, pred)
    return VariantRun(seed, prf.precision, prf.recall, prf.f1, bre.bre_ratio)


def ablation_run(
    train: Sequence[LabeledSentence],
    test: Sequence[LabeledSentence],
    hp: HyperParams,
    opt_config: OptimizerConfig,
    seeds: Sequence[int],
    variants: dict[str, VariantFlags] | None = None,
    epochs: int | None = None,
) -> list[VariantResult]:
    """Train/evaluate every variant per seed; a failed variant is reported, not fatal."""
    results: list[VariantResult] = []
    for name, flags in (variants or ABLATION_VARIANTS).items():
        result = VariantResult(variant=name, runs=[])
        for seed in seeds:
            try:
                run = train_and_score(train, test, hp, opt_config, flags, seed, epochs)
            except Exception as exc:
                log.exception("variant %s failed at seed %d", name, seed)
                result.error = f"seed {seed}: {exc}"
                break
            result.runs.append(run)
            log.info("%s seed=%d f1=%.4f bre=%.4f", name, seed, run.f1, run.bre)
        results.append(result)
    return results


def render_table(results: Sequence[VariantResult]) -> str:
    header = f"{'variant':<26} {'P':>8} {'R':>8} {'F1':>8} {'BRE':>8}"
    lines = [header, "-" * len(header)]
    for r in results:
        if r.error:
            lines.append(f"{r.variant:<26} FAILED: {r.error}")
            continue
        lines.append(
            f"{r.variant:<26} {r.mean_precision:>8.4f} {r.mean_recall:>8.4f} "
            f"{r.mean_f1:>8.4f} {r.mean_bre:>8.4f}"
        )
    return "\n".join(lines) + "\n"
