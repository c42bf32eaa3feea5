"""Multi-task NER tagger with boundary detection and gated label revision.

One shared encoder feeds two task projections.  The boundary branch predicts
per-token start/end flags, pairs them greedily into spans and classifies each
span 4-ways.  The tagging branch predicts per-token 7-way labels.  At the
join, span probabilities are slot-mapped onto the 7-way label space and added
onto the tagging probabilities, scaled by a per-token sigmoid gate; during
training a random draw against a threshold decides whether the revision is
applied at all, which keeps early boundary mistakes from poisoning the main
task.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import (
    DEFAULT_TAG_SET,
    EmptySentenceError,
    EntitySpan,
    LabeledSentence,
    NER_LABELS,
    SPAN_TAGS,
    derive_boundary_targets,
    derive_span_tag_targets,
    pair_boundary_flags,
    repair_bio2,
    spans_from_tags,
)
from .encoder import EncoderInterface, ReferenceEncoder
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.store import ParameterStore
from .nn.tensor import (
    Tensor,
    affine,
    ce_rows_mean,
    cross_entropy,
    mean_rows,
    normalize_rows,
    place,
    scale_rows,
    sigmoid,
    slice_rows,
    softmax,
    squeeze_col,
    stack_rows,
    tanh,
)

log = logging.getLogger(__name__)

# Slot maps from the 4-way span distribution [PER, LOC, ORG, O] onto the
# 7-way label space: first tokens feed the B- slots, later tokens the
# I- slots; the remaining slots stay exactly zero.
FIRST_TOKEN_SLOTS = (0, 2, 4, 6)  # B-PER, B-LOC, B-ORG, O
INSIDE_TOKEN_SLOTS = (1, 3, 5, 6)  # I-PER, I-LOC, I-ORG, O

BOUNDARY_HEAD_PARAMS = frozenset({"bd.start.W", "bd.start.b", "bd.end.W", "bd.end.b"})


@dataclass(frozen=True)
class HyperParams:
    d_emb: int = 32
    d_hidden: int = 32
    d_task: int = 32
    w1: float = 0.5
    alpha: float = 0.5
    learning_rate: float = 2e-3
    epochs: int = 20
    batch_size: int = 8
    seed: int = 0
    max_len: int = 128

    def __post_init__(self):
        if not 0.0 <= self.w1 <= 1.0:
            raise ValueError("w1 must lie in [0, 1]")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")


@dataclass(frozen=True)
class VariantFlags:
    """Ablation switches; all False is the full model."""

    disable_bd: bool = False
    disable_revision: bool = False
    disable_gate: bool = False
    disable_random: bool = False


@dataclass
class ForwardTrace:
    """Every intermediate quantity of one forward pass."""

    tokens: tuple[str, ...]
    H: Tensor
    H_bd: Tensor | None
    H_ner: Tensor
    p_s: Tensor | None
    p_e: Tensor | None
    spans: list[tuple[int, int]]
    v_sp: list[Tensor]
    p_sp: list[Tensor]
    p_new_sp: Tensor | None
    gate: Tensor | None
    p_ner: Tensor
    p_ner_rev: Tensor | None
    p_final: Tensor
    mode: str
    revised: bool
    draw: float | None


def pair_boundaries(p_s: np.ndarray, p_e: np.ndarray) -> list[tuple[int, int]]:
    """Greedy span pairing from per-token boundary probabilities.

    Class 1 is "is a boundary"; flags are per-token argmaxes and pairing is
    left-to-right nearest-end-before-next-start.
    """
    start_flags = (p_s.argmax(axis=1) == 1).astype(int)
    end_flags = (p_e.argmax(axis=1) == 1).astype(int)
    return pair_boundary_flags(start_flags, end_flags)


def transform_span_probs(
    spans: Sequence[tuple[int, int]], p_sp: Sequence[Tensor], length: int
) -> Tensor:
    """Slot-map per-span 4-way distributions onto the 7-way label space.

    First tokens of a span fill (B-PER, B-LOC, B-ORG, O) and zero the I-
    slots; other span tokens fill (I-PER, I-LOC, I-ORG, O) and zero the B-
    slots.  Tokens outside every span get an all-zero row.
    """
    owner: dict[int, tuple[int, bool]] = {}
    for k, (i, j) in enumerate(spans):
        for t in range(i, j + 1):
            owner[t] = (k, t == i)
    rows = []
    for t in range(length):
        if t in owner:
            k, is_first = owner[t]
            slots = FIRST_TOKEN_SLOTS if is_first else INSIDE_TOKEN_SLOTS
            rows.append(place(p_sp[k], slots, len(NER_LABELS)))
        else:
            rows.append(Tensor(np.zeros(len(NER_LABELS))))
    return stack_rows(rows)


def bi_revise(p_ner: Tensor, gate: Tensor | None, p_new_sp: Tensor) -> Tensor:
    """Add the gate-scaled transformed span probabilities onto the tag probabilities."""
    if gate is None:
        return p_ner + p_new_sp
    return p_ner + scale_rows(p_new_sp, gate)


def gated_select(
    p_ner: Tensor,
    p_ner_rev: Tensor,
    alpha: float,
    mode: str,
    rng: np.random.Generator | None = None,
) -> tuple[Tensor, bool, float | None]:
    """Choose between unrevised and revised probabilities.

    In train mode one uniform draw p in (0, 1) is taken per sentence; p >
    alpha keeps the unrevised probabilities, otherwise the revised ones.  At
    inference the revision is always applied (the randomness is a training-
    time regularizer).  Revised rows are renormalized so they are proper
    distributions before loss or decoding.
    """
    if mode == "train":
        if rng is None:
            raise ValueError("train mode needs an rng for the revision draw")
        draw = float(rng.random())
        while draw == 0.0:  # keep the draw inside the open interval (0, 1)
            draw = float(rng.random())
        if draw > alpha:
            return p_ner, False, draw
        return normalize_rows(p_ner_rev), True, draw
    return normalize_rows(p_ner_rev), True, None


def combine_losses(l_bd: float | Tensor, l_sp: float | Tensor, w1: float):
    """Weighted boundary-task loss: w1 * l_bd + (1 - w1) * l_sp."""
    return w1 * l_bd + (1.0 - w1) * l_sp


def span_soft_target(span: tuple[int, int], gold_span_tags: Sequence[int]) -> np.ndarray:
    """Mean of the one-hot 4-way gold tags over the span's tokens."""
    i, j = span
    target = np.zeros(len(SPAN_TAGS))
    for t in range(i, j + 1):
        target[gold_span_tags[t]] += 1.0
    return target / (j - i + 1)


class BoundaryRevisedTagger:
    """The multi-task model over one ParameterStore."""

    def __init__(
        self,
        encoder: EncoderInterface,
        hp: HyperParams,
        variants: VariantFlags | None = None,
        store: ParameterStore | None = None,
    ):
        self.encoder = encoder
        self.hp = hp
        self.variants = variants or VariantFlags()
        if store is None:
            store = ParameterStore(seed=hp.seed)
            encoder.register(store)
            self._register_heads(store, encoder.d_out, hp.d_task)
        self.store = store

    @staticmethod
    def _register_heads(store: ParameterStore, d_enc: int, d_task: int) -> None:
        store.add("proj.bd.W", (d_task, d_enc))
        store.add("proj.bd.b", (d_task,))
        store.add("proj.ner.W", (d_task, d_enc))
        store.add("proj.ner.b", (d_task,))
        store.add("bd.start.W", (2, d_task))
        store.add("bd.start.b", (2,))
        store.add("bd.end.W", (2, d_task))
        store.add("bd.end.b", (2,))
        store.add("span.W", (len(SPAN_TAGS), d_task))
        store.add("span.b", (len(SPAN_TAGS),))
        store.add("ner.W", (len(NER_LABELS), d_task))
        store.add("ner.b", (len(NER_LABELS),))
        store.add("gate.W", (1, d_task))
        store.add("gate.b", (1,))

    # -- forward ---------------------------------------------------------
    def forward(
        self,
        tokens: Sequence[str],
        mode: str = "infer",
        rng: np.random.Generator | None = None,
        for_phase: str | None = None,
    ) -> ForwardTrace:
        """Run the model on one sentence.

        ``for_phase="bd"`` skips the tagging branch (used by the boundary
        training phase); ``mode="train"`` enables the random revision draw,
        which needs ``rng``.
        """
        if len(tokens) == 0:
            raise EmptySentenceError("cannot encode an empty sentence")
        if len(tokens) > self.hp.max_len:
            log.warning("truncating %d-token sentence to max_len=%d", len(tokens), self.hp.max_len)
            tokens = tokens[: self.hp.max_len]
        tokens = tuple(tokens)
        store = self.store
        v = self.variants
        L = len(tokens)

        H = self.encoder.encode(tokens, store)
        H_ner = tanh(affine(H, store.tensor("proj.ner.W"), store.tensor("proj.ner.b")))

        H_bd = None
        p_s = p_e = None
        spans: list[tuple[int, int]] = []
        v_sp: list[Tensor] = []
        p_sp: list[Tensor] = []
        if not v.disable_bd:
            H_bd = tanh(affine(H, store.tensor("proj.bd.W"), store.tensor("proj.bd.b")))
            p_s = softmax(affine(H_bd, store.tensor("bd.start.W"), store.tensor("bd.start.b")))
            p_e = softmax(affine(H_bd, store.tensor("bd.end.W"), store.tensor("bd.end.b")))
            spans = pair_boundaries(p_s.data, p_e.data)
            for i, j in spans:
                rep = mean_rows(slice_rows(H_bd, i, j + 1))
                v_sp.append(rep)
                p_sp.append(softmax(affine(rep, store.tensor("span.W"), store.tensor("span.b"))))

        if for_phase == "bd":
            p_ner = softmax(affine(H_ner, store.tensor("ner.W"), store.tensor("ner.b")))
            return ForwardTrace(
                tokens, H, H_bd, H_ner, p_s, p_e, spans, v_sp, p_sp,
                None, None, p_ner, None, p_ner, mode, False, None,
            )

        p_ner = softmax(affine(H_ner, store.tensor("ner.W"), store.tensor("ner.b")))

        revision_possible = not (v.disable_bd or v.disable_revision)
        gate = None
        p_new_sp = None
        p_ner_rev = None
        revised = False
        draw = None

        if revision_possible:
            if not v.disable_gate:
                gate = squeeze_col(
                    sigmoid(affine(H_ner, store.tensor("gate.W"), store.tensor("gate.b")))
                )
            p_new_sp = transform_span_probs(spans, p_sp, L)
            p_ner_rev = bi_revise(p_ner, gate, p_new_sp)
            if mode == "train" and not v.disable_random:
                p_final, revised, draw = gated_select(p_ner, p_ner_rev, self.hp.alpha, mode, rng)
            else:
                p_final, revised = normalize_rows(p_ner_rev), True
        else:
            p_final = p_ner

        return ForwardTrace(
            tokens, H, H_bd, H_ner, p_s, p_e, spans, v_sp, p_sp,
            p_new_sp, gate, p_ner, p_ner_rev, p_final, mode, revised, draw,
        )

    # -- losses ------------------------------------------------------------
    def loss_boundary(self, trace: ForwardTrace, sentence: LabeledSentence) -> Tensor:
        """Weighted sum of the start/end boundary CE and the span-tag CE."""
        if trace.p_s is None or trace.H_bd is None:
            raise ValueError("boundary loss needs the boundary branch")
        L = len(trace.tokens)
        targets = derive_boundary_targets(sentence)
        start = np.eye(2)[list(targets.start_flags[:L])]
        end = np.eye(2)[list(targets.end_flags[:L])]
        l_bd = ce_rows_mean(trace.p_s, start) + ce_rows_mean(trace.p_e, end)

        gold_span_tags = derive_span_tag_targets(sentence)
        if trace.spans:
            total = None
            for span, p in zip(trace.spans, trace.p_sp):
                term = cross_entropy(p, span_soft_target(span, gold_span_tags))
                total = term if total is None else total + term
            l_sp = total / len(trace.spans)
        else:
            l_sp = Tensor(0.0)
        return combine_losses(l_bd, l_sp, self.hp.w1)

    def loss_ner(self, trace: ForwardTrace, sentence: LabeledSentence) -> Tensor:
        """Mean token-level CE of the final probabilities against gold tags."""
        L = len(trace.tokens)
        gold = np.eye(len(NER_LABELS))[list(sentence.ner_tags[:L])]
        return ce_rows_mean(trace.p_final, gold)

    # -- inference -----------------------------------------------------------
    def predict_tags(self, tokens: Sequence[str]) -> list[int]:
        trace = self.forward(tokens, mode="infer")
        raw = trace.p_final.data.argmax(axis=1).tolist()
        return repair_bio2(raw)

    def predict_sentence(self, tokens: Sequence[str]) -> list[EntitySpan]:
        return spans_from_tags(self.predict_tags(tokens))


def save_model(path, tagger: BoundaryRevisedTagger, extra: dict | None = None) -> None:
    """Write the binary checkpoint plus the JSON sidecar config next to it."""
    path = Path(path)
    save_checkpoint(path, tagger.store, DEFAULT_TAG_SET, extra=extra)
    encoder = tagger.encoder
    sidecar = {
        "hyperparams": asdict(tagger.hp),
        "variants": asdict(tagger.variants),
        "tag_set": DEFAULT_TAG_SET.to_record(),
        "encoder": {
            "kind": encoder.kind,
            "d_emb": getattr(encoder, "d_emb", None),
            "d_hidden": getattr(encoder, "d_hidden", None),
            "vocab": getattr(encoder, "vocab", None),
        },
    }
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_model(path) -> BoundaryRevisedTagger:
    """Rebuild a tagger from a checkpoint and its sidecar config."""
    path = Path(path)
    sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text(encoding="utf-8"))
    hp = HyperParams(**sidecar["hyperparams"])
    variants = VariantFlags(**sidecar["variants"])
    enc_rec = sidecar["encoder"]
    if enc_rec["kind"] != "birnn":
        raise ValueError(f"cannot rebuild encoder kind {enc_rec['kind']!r} from a sidecar")
    vocab = [t for t in enc_rec["vocab"] if t != "<unk>"]
    encoder = ReferenceEncoder(vocab, d_emb=enc_rec["d_emb"], d_hidden=enc_rec["d_hidden"])
    tagger = BoundaryRevisedTagger(encoder, hp, variants)
    load_checkpoint(path, tagger.store)
    return tagger
