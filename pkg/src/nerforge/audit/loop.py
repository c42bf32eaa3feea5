"""Iterative dataset optimization: train, self-predict, audit, merge, repeat."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Sequence

from ..corpus import LabeledSentence, extract_entities, spans_from_tags
from ..encoder import ReferenceEncoder
from ..metrics import entity_prf
from ..model import BoundaryRevisedTagger, HyperParams, VariantFlags
from ..nn.store import OptimizerConfig
from ..training import AlternateTrainer, predict_dataset
from .store import AuditItem, AuditStore

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IterationReport:
    iteration: int
    dev_metrics: dict | None
    disagreement_count: int
    disagreement_rate: float
    audited_count: int
    converged: bool

    def to_record(self) -> dict:
        return {
            "iteration": self.iteration,
            "dev_metrics": self.dev_metrics,
            "disagreement_count": self.disagreement_count,
            "disagreement_rate": self.disagreement_rate,
            "audited_count": self.audited_count,
            "converged": self.converged,
        }


def run_iteration(
    dataset: Sequence[LabeledSentence],
    hp: HyperParams,
    opt_config: OptimizerConfig,
    variants: VariantFlags | None = None,
    dev: Sequence[LabeledSentence] | None = None,
    seed: int | None = None,
) -> tuple[list[list[int]], BoundaryRevisedTagger]:
    """Train a fresh model on all sentences, then predict the same sentences.

    Returns the per-sentence predicted tag sequences and the trained model;
    disagreement bookkeeping is the caller's job.
    """
    if not dataset:
        raise ValueError("cannot run an iteration on an empty dataset")
    train_seed = hp.seed if seed is None else seed
    hp_iter = replace(hp, seed=train_seed)
    vocab = sorted({t for s in dataset for t in s.tokens})
    encoder = ReferenceEncoder(vocab, d_emb=hp.d_emb, d_hidden=hp.d_hidden)
    tagger = BoundaryRevisedTagger(encoder, hp_iter, variants)
    trainer = AlternateTrainer(tagger, opt_config)
    trainer.fit(list(dataset), log_progress=False)
    predictions = predict_dataset(tagger, dataset)
    return predictions, tagger


def dev_metrics_record(
    tagger: BoundaryRevisedTagger, dev: Sequence[LabeledSentence]
) -> dict:
    gold = [extract_entities(s) for s in dev]
    pred = [spans_from_tags(tagger.predict_tags(s.tokens)) for s in dev]
    return entity_prf(gold, pred).to_record()


def enqueue_conflicts(
    store: AuditStore,
    dataset: Sequence[LabeledSentence],
    predictions: Sequence[Sequence[int]],
) -> list[AuditItem]:
    """Queue one pending item per disagreeing sentence.

    A sentence resolved in an earlier iteration re-enters only if the new
    prediction differs from its recorded resolution; open items are never
    duplicated.
    """
    if len(dataset) != len(predictions):
        raise ValueError("predictions are not aligned with the dataset")
    created: list[AuditItem] = []
    for sentence, predicted in zip(dataset, predictions):
        predicted = tuple(predicted)
        if predicted == tuple(sentence.ner_tags):
            continue
        existing = store.items_for_sentence(sentence.id)
        if any(i.status != "resolved" for i in existing):
            continue
        resolved = [i for i in existing if i.status == "resolved"]
        if resolved and resolved[-1].resolution == predicted:
            continue
        created.append(
            store.enqueue(sentence.id, sentence.tokens, sentence.ner_tags, predicted)
        )
    return created


def merge_resolved(
    dataset: Sequence[LabeledSentence], items: Sequence[AuditItem]
) -> list[LabeledSentence]:
    """Replace each resolved sentence's tags with its resolution (idempotent)."""
    resolutions: dict[str, tuple[int, ...]] = {}
    for item in items:
        if item.status == "resolved" and item.resolution is not None:
            resolutions[item.sentence_id] = item.resolution
    merged = []
    for sentence in dataset:
        resolution = resolutions.get(sentence.id)
        if resolution is not None and tuple(sentence.ner_tags) != resolution:
            merged.append(sentence.with_tags(resolution, provenance="audited"))
        else:
            merged.append(sentence)
    return merged


def check_convergence(
    history: Sequence[IterationReport | dict], epsilon: float, max_iters: int
) -> bool:
    """Converged iff the latest disagreement rate is under epsilon or the
    iteration budget is spent."""
    if not history:
        raise ValueError("need at least one iteration report")
    latest = history[-1]
    rate = latest["disagreement_rate"] if isinstance(latest, dict) else latest.disagreement_rate
    if rate < epsilon:
        return True
    if len(history) >= max_iters:
        log.warning("stopping at max_iters=%d with disagreement rate %.4f", max_iters, rate)
        return True
    return False


class AuditLoop:
    """Driver owning the dataset, the audit store and the loop settings."""

    def __init__(
        self,
        dataset: list[LabeledSentence],
        store: AuditStore,
        hp: HyperParams,
        opt_config: OptimizerConfig,
        variants: VariantFlags | None = None,
        dev: list[LabeledSentence] | None = None,
        epsilon: float = 0.01,
        max_iters: int = 10,
    ):
        self.dataset = list(dataset)
        self.store = store
        self.hp = hp
        self.opt_config = opt_config
        self.variants = variants
        self.dev = dev
        self.epsilon = epsilon
        self.max_iters = max_iters

    @property
    def history(self) -> list[dict]:
        return self.store.reports

    def iterate(self) -> IterationReport:
        """One pass: merge resolutions, retrain, self-predict, queue conflicts."""
        self.dataset = merge_resolved(self.dataset, self.store.items("resolved"))
        iteration = len(self.history)
        predictions, tagger = run_iteration(
            self.dataset,
            self.hp,
            self.opt_config,
            self.variants,
            seed=self.hp.seed + iteration,
        )
        disagreements = sum(
            1
            for sentence, predicted in zip(self.dataset, predictions)
            if tuple(predicted) != tuple(sentence.ner_tags)
        )
        enqueue_conflicts(self.store, self.dataset, predictions)
        rate = disagreements / len(self.dataset)
        report = IterationReport(
            iteration=iteration,
            dev_metrics=dev_metrics_record(tagger, self.dev) if self.dev else None,
            disagreement_count=disagreements,
            disagreement_rate=rate,
            audited_count=len(self.store.items("resolved")),
            converged=False,
        )
        converged = check_convergence(
            self.history + [report.to_record()], self.epsilon, self.max_iters
        )
        report = replace(report, converged=converged)
        self.store.append_report(report.to_record())
        return report
