"""Sentence, tag and span data model for BIO2 NER corpora.

Everything downstream (bootstrapping, training, evaluation, auditing)
moves data around as ``LabeledSentence`` values.  Tag indices follow the
fixed ``TagSet`` order so that probability vectors line up across modules.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

NER_LABELS = ("B-PER", "I-PER", "B-LOC", "I-LOC", "B-ORG", "I-ORG", "O")
SPAN_TAGS = ("PER", "LOC", "ORG", "O")
ENTITY_TYPES = ("PER", "LOC", "ORG")
O_INDEX = NER_LABELS.index("O")
SPAN_O_INDEX = SPAN_TAGS.index("O")

PROVENANCES = ("homologous", "rule", "audited", "synthetic", "external")

_SEPARATOR = re.compile(r"[ \t]+")


class CorpusError(Exception):
    """Base class for corpus and data-format errors."""


class UnknownTagError(CorpusError):
    def __init__(self, tag: str, line_no: int | None = None):
        loc = f" (line {line_no})" if line_no is not None else ""
        super().__init__(f"unknown tag {tag!r}{loc}")
        self.tag = tag
        self.line_no = line_no


class IllegalTransitionError(CorpusError):
    def __init__(self, tag: str, previous: str, line_no: int | None = None):
        loc = f" (line {line_no})" if line_no is not None else ""
        super().__init__(f"{tag!r} cannot follow {previous!r}{loc}")
        self.tag = tag
        self.previous = previous
        self.line_no = line_no


class EmptySentenceError(CorpusError):
    pass


class Bio2FormatError(CorpusError):
    def __init__(self, message: str, line_no: int | None = None):
        loc = f" (line {line_no})" if line_no is not None else ""
        super().__init__(f"{message}{loc}")
        self.line_no = line_no


class TooFewSentencesError(CorpusError):
    pass


@dataclass(frozen=True)
class TagSet:
    """The frozen global tag orders.

    Index 0 of ``ner_labels`` is B-PER and index 6 is O; index 0 of
    ``span_tags`` is PER and index 3 is O.  All probability vectors in the
    system use these orders.
    """

    ner_labels: tuple[str, ...] = NER_LABELS
    span_tags: tuple[str, ...] = SPAN_TAGS

    def ner_index(self, label: str) -> int:
        try:
            return self.ner_labels.index(label)
        except ValueError:
            raise UnknownTagError(label) from None

    def span_index(self, tag: str) -> int:
        try:
            return self.span_tags.index(tag)
        except ValueError:
            raise UnknownTagError(tag) from None

    def b_index(self, etype: str) -> int:
        return self.ner_index(f"B-{etype}")

    def i_index(self, etype: str) -> int:
        return self.ner_index(f"I-{etype}")

    def to_record(self) -> dict:
        return {"ner_labels": list(self.ner_labels), "span_tags": list(self.span_tags)}


DEFAULT_TAG_SET = TagSet()


def label_parts(tag_index: int) -> tuple[str, str | None]:
    """Split a tag index into its (prefix, entity type); O maps to ("O", None)."""
    label = NER_LABELS[tag_index]
    if label == "O":
        return "O", None
    prefix, etype = label.split("-", 1)
    return prefix, etype


def validate_tag_sequence(tags: Sequence[int]) -> None:
    """Raise unless ``tags`` is a well-formed BIO2 index sequence."""
    previous = O_INDEX
    for pos, tag in enumerate(tags):
        if not 0 <= tag < len(NER_LABELS):
            raise UnknownTagError(str(tag), line_no=pos + 1)
        prefix, etype = label_parts(tag)
        if prefix == "I":
            prev_prefix, prev_type = label_parts(previous)
            if prev_type != etype:
                raise IllegalTransitionError(
                    NER_LABELS[tag], NER_LABELS[previous], line_no=pos + 1
                )
        previous = tag


@dataclass(frozen=True)
class LabeledSentence:
    """One tokenized sentence with per-token BIO2 tag indices."""

    id: str
    tokens: tuple[str, ...]
    ner_tags: tuple[int, ...]
    provenance: str = "external"

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "ner_tags", tuple(self.ner_tags))
        if len(self.tokens) == 0:
            raise EmptySentenceError(f"sentence {self.id!r} has no tokens")
        if len(self.tokens) != len(self.ner_tags):
            raise CorpusError(
                f"sentence {self.id!r}: {len(self.tokens)} tokens vs "
                f"{len(self.ner_tags)} tags"
            )
        if self.provenance not in PROVENANCES:
            raise CorpusError(f"unknown provenance {self.provenance!r}")
        validate_tag_sequence(self.ner_tags)

    def __len__(self) -> int:
        return len(self.tokens)

    def tag_labels(self) -> list[str]:
        return [NER_LABELS[t] for t in self.ner_tags]

    def with_tags(self, tags: Sequence[int], provenance: str | None = None) -> "LabeledSentence":
        return replace(
            self,
            ner_tags=tuple(tags),
            provenance=provenance if provenance is not None else self.provenance,
        )


@dataclass(frozen=True)
class EntitySpan:
    """Inclusive token span [start, end] of one entity mention."""

    start: int
    end: int
    etype: str

    def __post_init__(self):
        if not 0 <= self.start <= self.end:
            raise CorpusError(f"bad span ({self.start}, {self.end})")
        if self.etype not in ENTITY_TYPES:
            raise CorpusError(f"bad entity type {self.etype!r}")

    def overlaps(self, other: "EntitySpan") -> bool:
        return self.start <= other.end and other.start <= self.end


@dataclass(frozen=True)
class BoundaryTargets:
    """Per-token start/end flags; a single-token entity sets both at one index."""

    start_flags: tuple[int, ...]
    end_flags: tuple[int, ...]


@dataclass(frozen=True)
class DatasetStats:
    sentence_count: int
    token_count: int
    entity_counts: dict[str, int] = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "sentence_count": self.sentence_count,
            "token_count": self.token_count,
            "entity_counts": dict(self.entity_counts),
        }

    def to_text_report(self) -> str:
        lines = [
            f"sentences : {self.sentence_count}",
            f"tokens    : {self.token_count}",
        ]
        for etype in ENTITY_TYPES:
            lines.append(f"{etype:<10}: {self.entity_counts.get(etype, 0)}")
        return "\n".join(lines) + "\n"


def parse_bio2(text: str, source: str = "doc") -> list[LabeledSentence]:
    """Parse a BIO2 document: one "token<ws>tag" per line, blank line between sentences.

    The separator may be any run of horizontal whitespace.  Sentence ids are
    assigned as ``source:ordinal`` and survive the whole pipeline.
    """
    sentences: list[LabeledSentence] = []
    tokens: list[str] = []
    tags: list[int] = []

    def flush():
        nonlocal tokens, tags
        if tokens:
            sentences.append(
                LabeledSentence(
                    id=f"{source}:{len(sentences)}",
                    tokens=tuple(tokens),
                    ner_tags=tuple(tags),
                )
            )
            tokens, tags = [], []

    for line_no, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            flush()
            continue
        parts = _SEPARATOR.split(line.strip())
        if len(parts) != 2:
            raise Bio2FormatError(
                f"expected 'token<ws>tag', got {line!r}", line_no=line_no
            )
        token, tag = parts
        if tag not in NER_LABELS:
            raise UnknownTagError(tag, line_no=line_no)
        tag_idx = NER_LABELS.index(tag)
        prefix, etype = label_parts(tag_idx)
        if prefix == "I":
            prev = tags[-1] if tags else O_INDEX
            _, prev_type = label_parts(prev)
            if prev_type != etype:
                raise IllegalTransitionError(tag, NER_LABELS[prev], line_no=line_no)
        tokens.append(token)
        tags.append(tag_idx)
    flush()
    return sentences


def serialize_bio2(sentences: Iterable[LabeledSentence]) -> str:
    """Emit BIO2 text: one tab separator, LF endings, blank line after each sentence."""
    chunks = []
    for s in sentences:
        for token, tag in zip(s.tokens, s.ner_tags):
            chunks.append(f"{token}\t{NER_LABELS[tag]}\n")
        chunks.append("\n")
    return "".join(chunks)


def load_bio2(path) -> list[LabeledSentence]:
    from pathlib import Path

    p = Path(path)
    return parse_bio2(p.read_text(encoding="utf-8"), source=p.name)


def save_bio2(path, sentences: Iterable[LabeledSentence]) -> None:
    from pathlib import Path

    Path(path).write_text(serialize_bio2(sentences), encoding="utf-8")


def spans_from_tags(tags: Sequence[int]) -> list[EntitySpan]:
    """Decode maximal B-X (I-X)* runs from a valid BIO2 index sequence."""
    spans: list[EntitySpan] = []
    start = None
    current_type = None
    for i, tag in enumerate(tags):
        prefix, etype = label_parts(tag)
        if prefix == "B":
            if start is not None:
                spans.append(EntitySpan(start, i - 1, current_type))
            start, current_type = i, etype
        elif prefix == "I":
            continue
        else:
            if start is not None:
                spans.append(EntitySpan(start, i - 1, current_type))
                start, current_type = None, None
    if start is not None:
        spans.append(EntitySpan(start, len(tags) - 1, current_type))
    return spans


def extract_entities(sentence: LabeledSentence) -> list[EntitySpan]:
    return spans_from_tags(sentence.ner_tags)


def derive_boundary_targets(sentence: LabeledSentence) -> BoundaryTargets:
    """Start/end flags for the boundary-detection task."""
    L = len(sentence)
    start = [0] * L
    end = [0] * L
    for span in extract_entities(sentence):
        start[span.start] = 1
        end[span.end] = 1
    return BoundaryTargets(tuple(start), tuple(end))


def derive_span_tag_targets(sentence: LabeledSentence) -> list[int]:
    """Per-token 4-way tag (PER/LOC/ORG/O): the entity type inside entities, O outside."""
    out = [SPAN_O_INDEX] * len(sentence)
    for span in extract_entities(sentence):
        for i in range(span.start, span.end + 1):
            out[i] = SPAN_TAGS.index(span.etype)
    return out


def pair_boundary_flags(
    start_flags: Sequence[int], end_flags: Sequence[int]
) -> list[tuple[int, int]]:
    """Left-to-right greedy pairing of start/end flags into spans.

    Each start index is matched with the nearest end at or after it that
    precedes the next start; unmatched starts and ends are discarded, so the
    result never overlaps.
    """
    starts = [i for i, f in enumerate(start_flags) if f]
    ends = [i for i, f in enumerate(end_flags) if f]
    spans: list[tuple[int, int]] = []
    e = 0
    for k, s in enumerate(starts):
        next_start = starts[k + 1] if k + 1 < len(starts) else None
        while e < len(ends) and ends[e] < s:
            e += 1
        if e < len(ends) and (next_start is None or ends[e] < next_start):
            spans.append((s, ends[e]))
            e += 1
    return spans


def reconstruct_tags(targets: BoundaryTargets, span_tags: Sequence[int]) -> list[int]:
    """Rebuild BIO2 indices from boundary targets plus per-token span tags.

    Inverse of (derive_boundary_targets, derive_span_tag_targets) on valid
    sentences; used as a consistency check.
    """
    L = len(targets.start_flags)
    out = [O_INDEX] * L
    for i, j in pair_boundary_flags(targets.start_flags, targets.end_flags):
        etype = SPAN_TAGS[span_tags[i]]
        if etype == "O":
            continue
        out[i] = NER_LABELS.index(f"B-{etype}")
        for t in range(i + 1, j + 1):
            out[t] = NER_LABELS.index(f"I-{etype}")
    return out


def repair_bio2(tags: Sequence[int]) -> list[int]:
    """Coerce a raw per-token index sequence into valid BIO2.

    An I-X with no legal predecessor becomes B-X.  Idempotent; the output
    always validates.
    """
    out: list[int] = []
    previous = O_INDEX
    for tag in tags:
        prefix, etype = label_parts(tag)
        if prefix == "I":
            _, prev_type = label_parts(previous)
            if prev_type != etype:
                tag = NER_LABELS.index(f"B-{etype}")
        out.append(tag)
        previous = tag
    return out


def split_dataset(
    dataset: Sequence[LabeledSentence], seed: int
) -> tuple[list[LabeledSentence], list[LabeledSentence], list[LabeledSentence]]:
    """Seeded uniform shuffle, then contiguous 80/10/10 slices.

    Sizes are floor(0.8 n) / floor(0.1 n) / remainder; deterministic per seed.
    """
    n = len(dataset)
    if n < 10:
        raise TooFewSentencesError(f"need at least 10 sentences, got {n}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_train = (8 * n) // 10
    n_dev = n // 10
    shuffled = [dataset[i] for i in order]
    return (
        shuffled[:n_train],
        shuffled[n_train : n_train + n_dev],
        shuffled[n_train + n_dev :],
    )


def dataset_stats(dataset: Sequence[LabeledSentence]) -> DatasetStats:
    counts: Counter[str] = Counter({etype: 0 for etype in ENTITY_TYPES})
    tokens = 0
    for s in dataset:
        tokens += len(s)
        for span in extract_entities(s):
            counts[span.etype] += 1
    return DatasetStats(
        sentence_count=len(dataset), token_count=tokens, entity_counts=dict(counts)
    )
