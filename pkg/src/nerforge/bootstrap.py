"""Preliminary dataset construction: dictionary filtering and rule tagging.

Two sources feed the seed dataset: labeled sentences from a closely related
language that survive a target-language dictionary test, and unlabeled
target-language sentences tagged by a declarative rule engine (lexical
triggers plus gazetteer longest match).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import ENTITY_TYPES, NER_LABELS, LabeledSentence

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)

RULE_POSITIONS = ("precedes_entity", "follows_entity", "is_prefix_token")


class RuleConflictError(Exception):
    """Two rules assigned different types to the same token span."""


def tokenize(text: str) -> list[str]:
    """Whitespace plus punctuation tokenization: word runs and single marks."""
    return _TOKEN_RE.findall(text)


def _is_punct(token: str) -> bool:
    return not any(ch.isalnum() for ch in token)


def _is_exempt(token: str) -> bool:
    # Punctuation and pure-digit tokens always count as in-vocabulary,
    # otherwise nearly every real sentence fails the dictionary test.
    return token.isdigit() or _is_punct(token)


@dataclass(frozen=True)
class Vocabulary:
    """A token set with a declared normalization policy."""

    tokens: frozenset[str]
    case_fold: bool = True

    def normalize(self, token: str) -> str:
        return token.casefold() if self.case_fold else token

    def __contains__(self, token: str) -> bool:
        return self.normalize(token) in self.tokens

    def __len__(self) -> int:
        return len(self.tokens)

    def save(self, path) -> None:
        Path(path).write_text(
            "".join(f"{t}\n" for t in sorted(self.tokens)), encoding="utf-8"
        )

    @classmethod
    def load(cls, path, case_fold: bool = True) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        tokens = {line.strip() for line in lines if line.strip()}
        if case_fold:
            tokens = {t.casefold() for t in tokens}
        return cls(tokens=frozenset(tokens), case_fold=case_fold)


def build_vocab(corpus: Iterable[str], case_fold: bool = True) -> Vocabulary:
    """Collect every distinct normalized token of the plain-text corpus."""
    tokens: set[str] = set()
    for document in corpus:
        for token in tokenize(document):
            tokens.add(token.casefold() if case_fold else token)
    tokens.discard("")
    return Vocabulary(tokens=frozenset(tokens), case_fold=case_fold)


def filter_by_vocab(
    source: Sequence[LabeledSentence], vocab: Vocabulary
) -> list[LabeledSentence]:
    """Keep sentences whose every token passes the dictionary test.

    Punctuation and pure-digit tokens are exempt.  Retained sentences keep
    their labels and get provenance "homologous".
    """
    kept = []
    for s in source:
        if all(_is_exempt(t) or t in vocab for t in s.tokens):
            kept.append(s.with_tags(s.ner_tags, provenance="homologous"))
    return kept


@dataclass(frozen=True)
class Rule:
    """One lexical trigger rule.

    position semantics:
      precedes_entity -- the trigger marks the following token run,
      follows_entity  -- the trigger marks the preceding token run,
      is_prefix_token -- the trigger is itself the first token of the entity.
    """

    rule_id: str
    trigger: tuple[str, ...]
    position: str
    assigned_type: str
    capitalization_required: bool = True
    max_span_len: int = 3

    def __post_init__(self):
        object.__setattr__(self, "trigger", tuple(self.trigger))
        if not self.trigger or any(not t for t in self.trigger):
            raise ValueError(f"rule {self.rule_id!r}: trigger lexemes must be non-empty")
        if self.position not in RULE_POSITIONS:
            raise ValueError(f"rule {self.rule_id!r}: bad position {self.position!r}")
        if self.assigned_type not in ENTITY_TYPES:
            raise ValueError(f"rule {self.rule_id!r}: bad type {self.assigned_type!r}")
        if self.max_span_len < 1:
            raise ValueError(f"rule {self.rule_id!r}: max_span_len must be >= 1")


class Gazetteer:
    """Multi-token surface forms mapped to entity types; longest match wins."""

    def __init__(self, entries: dict[tuple[str, ...], str] | None = None, case_fold: bool = True):
        self.case_fold = case_fold
        self.entries: dict[tuple[str, ...], str] = {}
        self.max_len = 0
        for surface, etype in (entries or {}).items():
            self.add(surface, etype)

    def normalize(self, token: str) -> str:
        return token.casefold() if self.case_fold else token

    def add(self, surface: Sequence[str] | str, etype: str) -> None:
        if isinstance(surface, str):
            surface = tuple(surface.split())
        key = tuple(self.normalize(t) for t in surface)
        if not key:
            raise ValueError("empty gazetteer surface form")
        if etype not in ENTITY_TYPES:
            raise ValueError(f"bad gazetteer type {etype!r}")
        if key in self.entries and self.entries[key] != etype:
            raise ValueError(f"conflicting gazetteer types for {' '.join(key)!r}")
        self.entries[key] = etype
        self.max_len = max(self.max_len, len(key))

    def __len__(self) -> int:
        return len(self.entries)

    def longest_match(self, tokens: Sequence[str], i: int) -> tuple[int, str] | None:
        """Longest entry starting at token i, as (length, type), or None."""
        normalized = [self.normalize(t) for t in tokens[i : i + self.max_len]]
        for length in range(len(normalized), 0, -1):
            key = tuple(normalized[:length])
            if key in self.entries:
                return length, self.entries[key]
        return None


def _is_capitalized(token: str) -> bool:
    return bool(token) and token[0].isupper()


def _entity_run(tokens: Sequence[str], start: int, step: int, cap_required: bool, limit: int) -> int:
    """Length of the maximal entity-like run from ``start`` in direction ``step``."""
    n = 0
    i = start
    while 0 <= i < len(tokens) and n < limit:
        tok = tokens[i]
        ok = _is_capitalized(tok) if cap_required else not _is_punct(tok)
        if not ok:
            break
        n += 1
        i += step
    return n


def apply_rules(
    tokens: Sequence[str],
    rules: Sequence[Rule],
    gazetteer: Gazetteer | None = None,
    sent_id: str = "rule:0",
    case_fold: bool = True,
) -> LabeledSentence | None:
    """Tag one unlabeled sentence with the gazetteer and trigger rules.

    Gazetteer matches claim tokens first; rule spans then fill the rest,
    overlaps resolved earliest-start-then-longest.  Returns None when nothing
    fires.  Raises RuleConflictError when two rules assign different types to
    the same span.
    """
    tokens = list(tokens)
    if not tokens:
        raise ValueError("tokens must be non-empty")
    L = len(tokens)

    def norm(t: str) -> str:
        return t.casefold() if case_fold else t

    normalized = [norm(t) for t in tokens]

    taken = [False] * L
    spans: list[tuple[int, int, str]] = []

    if gazetteer is not None and len(gazetteer) > 0:
        i = 0
        while i < L:
            hit = gazetteer.longest_match(tokens, i)
            if hit is not None:
                length, etype = hit
                spans.append((i, i + length - 1, etype))
                for t in range(i, i + length):
                    taken[t] = True
                i += length
            else:
                i += 1

    candidates: list[tuple[int, int, str, str]] = []
    for rule in rules:
        trigger = {norm(t) for t in rule.trigger}
        for k in range(L):
            if normalized[k] not in trigger:
                continue
            if rule.position == "precedes_entity":
                run = _entity_run(tokens, k + 1, +1, rule.capitalization_required, rule.max_span_len)
                if run > 0:
                    candidates.append((k + 1, k + run, rule.assigned_type, rule.rule_id))
            elif rule.position == "follows_entity":
                run = _entity_run(tokens, k - 1, -1, rule.capitalization_required, rule.max_span_len)
                if run > 0:
                    candidates.append((k - run, k - 1, rule.assigned_type, rule.rule_id))
            else:  # is_prefix_token: the trigger token starts the entity
                if rule.capitalization_required and not _is_capitalized(tokens[k]):
                    continue
                run = _entity_run(
                    tokens, k + 1, +1, rule.capitalization_required, rule.max_span_len - 1
                )
                candidates.append((k, k + run, rule.assigned_type, rule.rule_id))

    by_span: dict[tuple[int, int], tuple[str, str]] = {}
    for start, end, etype, rule_id in candidates:
        seen = by_span.get((start, end))
        if seen is not None and seen[0] != etype:
            raise RuleConflictError(
                f"rules {seen[1]!r} and {rule_id!r} assign {seen[0]}/{etype} "
                f"to span ({start}, {end})"
            )
        by_span.setdefault((start, end), (etype, rule_id))

    ordered = sorted(by_span.items(), key=lambda kv: (kv[0][0], -(kv[0][1] - kv[0][0])))
    for (start, end), (etype, _rule_id) in ordered:
        if any(taken[t] for t in range(start, end + 1)):
            continue
        spans.append((start, end, etype))
        for t in range(start, end + 1):
            taken[t] = True

    if not spans:
        return None

    tags = [NER_LABELS.index("O")] * L
    for start, end, etype in sorted(spans):
        tags[start] = NER_LABELS.index(f"B-{etype}")
        for t in range(start + 1, end + 1):
            tags[t] = NER_LABELS.index(f"I-{etype}")
    return LabeledSentence(id=sent_id, tokens=tuple(tokens), ner_tags=tuple(tags), provenance="rule")


def assemble_seed(
    homologous: Sequence[LabeledSentence], rule_tagged: Sequence[LabeledSentence]
) -> list[LabeledSentence]:
    """Concatenate both sources, dropping exact token-sequence duplicates (first wins)."""
    seen: set[tuple[str, ...]] = set()
    out: list[LabeledSentence] = []
    for s in list(homologous) + list(rule_tagged):
        if s.tokens in seen:
            continue
        seen.add(s.tokens)
        out.append(s)
    return out


def load_rules_config(path) -> tuple[list[Rule], Gazetteer, bool]:
    """Load the rules/gazetteer config file.

    Format (JSON)::

        {
          "case_fold": true,
          "rules": [
            {"rule_id": "title-per", "trigger": ["encik", "datuk"],
             "position": "precedes_entity", "assigned_type": "PER",
             "capitalization_required": true, "max_span_len": 3}
          ],
          "gazetteer": [
            {"surface": "Kuala Lumpur", "type": "LOC"}
          ]
        }
    """
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    unknown = set(raw) - {"case_fold", "rules", "gazetteer"}
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    case_fold = bool(raw.get("case_fold", True))
    rules = []
    for record in raw.get("rules", []):
        unknown = set(record) - {
            "rule_id", "trigger", "position", "assigned_type",
            "capitalization_required", "max_span_len",
        }
        if unknown:
            raise ValueError(f"unknown rule keys: {sorted(unknown)}")
        rules.append(
            Rule(
                rule_id=record["rule_id"],
                trigger=tuple(record["trigger"]),
                position=record["position"],
                assigned_type=record["assigned_type"],
                capitalization_required=record.get("capitalization_required", True),
                max_span_len=record.get("max_span_len", 3),
            )
        )
    gaz = Gazetteer(case_fold=case_fold)
    for record in raw.get("gazetteer", []):
        unknown = set(record) - {"surface", "type"}
        if unknown:
            raise ValueError(f"unknown gazetteer keys: {sorted(unknown)}")
        gaz.add(record["surface"], record["type"])
    return rules, gaz, case_fold
