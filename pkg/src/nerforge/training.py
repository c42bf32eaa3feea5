"""Alternate training of the boundary and tagging objectives."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import LabeledSentence
from .model import BoundaryRevisedTagger
from .nn.store import Optimizer, OptimizerConfig
from .nn.tensor import Tensor

log = logging.getLogger(__name__)


@dataclass
class EpochRecord:
    epoch: int
    mean_bd_loss: float | None
    mean_ner_loss: float | None
    seconds: float


class AlternateTrainer:
    """Strictly alternating optimizer steps, boundary phase first.

    Each mini-batch feeds exactly one phase.  The shared encoder and both
    task projections receive gradients from both phases; the single-task
    (boundary-disabled) variant trains the tagging objective on every batch.
    The trainer owns the RNG used for shuffling and the revision draws.
    """

    def __init__(
        self,
        tagger: BoundaryRevisedTagger,
        opt_config: OptimizerConfig,
        seed: int | None = None,
    ):
        self.tagger = tagger
        self.optimizer = Optimizer(opt_config)
        self.rng = np.random.default_rng(tagger.hp.seed if seed is None else seed)
        self._step_index = 0

    def next_phase(self) -> str:
        if self.tagger.variants.disable_bd:
            return "ner"
        return "bd" if self._step_index % 2 == 0 else "ner"

    def train_step(
        self,
        batch: Sequence[LabeledSentence],
        phase: str | None = None,
        frozen: frozenset[str] = frozenset(),
    ) -> tuple[str, float]:
        """One optimizer step on one mini-batch; returns (phase, mean loss)."""
        if phase is None:
            phase = self.next_phase()
        if phase not in ("bd", "ner"):
            raise ValueError(f"unknown phase {phase!r}")
        if phase == "bd" and self.tagger.variants.disable_bd:
            raise ValueError("boundary phase is disabled for this variant")
        self._step_index += 1
        store = self.tagger.store
        store.zero_grads()
        total: Tensor | None = None
        for sentence in batch:
            trace = self.tagger.forward(
                sentence.tokens, mode="train", rng=self.rng, for_phase=phase
            )
            if phase == "bd":
                loss = self.tagger.loss_boundary(trace, sentence)
            else:
                loss = self.tagger.loss_ner(trace, sentence)
            total = loss if total is None else total + loss
        if total is None:
            raise ValueError("empty batch")
        mean = total / len(batch)
        mean.backward()
        self.optimizer.step(store, frozen=frozen)
        return phase, float(mean.data)

    def fit(
        self,
        train: Sequence[LabeledSentence],
        epochs: int | None = None,
        batch_size: int | None = None,
        log_progress: bool = True,
    ) -> list[EpochRecord]:
        hp = self.tagger.hp
        epochs = hp.epochs if epochs is None else epochs
        batch_size = hp.batch_size if batch_size is None else batch_size
        history: list[EpochRecord] = []
        for epoch in range(epochs):
            t0 = time.monotonic()
            order = self.rng.permutation(len(train))
            bd_losses: list[float] = []
            ner_losses: list[float] = []
            for lo in range(0, len(train), batch_size):
                batch = [train[i] for i in order[lo : lo + batch_size]]
                phase, loss = self.train_step(batch)
                (bd_losses if phase == "bd" else ner_losses).append(loss)
            record = EpochRecord(
                epoch=epoch,
                mean_bd_loss=float(np.mean(bd_losses)) if bd_losses else None,
                mean_ner_loss=float(np.mean(ner_losses)) if ner_losses else None,
                seconds=time.monotonic() - t0,
            )
            history.append(record)
            if log_progress:
                log.info(
                    "epoch %d: bd=%s ner=%s (%.1fs)",
                    epoch,
                    "-" if record.mean_bd_loss is None else f"{record.mean_bd_loss:.4f}",
                    "-" if record.mean_ner_loss is None else f"{record.mean_ner_loss:.4f}",
                    record.seconds,
                )
        return history


def predict_dataset(
    tagger: BoundaryRevisedTagger, sentences: Sequence[LabeledSentence]
) -> list[list[int]]:
    """Predicted, repaired tag sequences for every sentence."""
    return [tagger.predict_tags(s.tokens) for s in sentences]
