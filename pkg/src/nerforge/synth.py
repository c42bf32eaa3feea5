"""Seeded synthetic corpus for end-to-end experiments.

A small invented language: lowercase function words plus capitalized entity
surface forms drawn from gazetteer lexicons.  Entities vary in length and
share tokens across types (organization names embed place names, person
surnames double as given names elsewhere), so span boundaries carry real
signal instead of being readable off single tokens.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import (
    NER_LABELS,
    LabeledSentence,
    extract_entities,
    repair_bio2,
    save_bio2,
    split_dataset,
)

_GIVEN = [
    "Arel", "Bomin", "Cadek", "Darno", "Elvet", "Fasul", "Girat", "Hamel",
    "Ilona", "Jurek", "Kalum", "Lonek", "Mirat", "Nadul", "Orlan", "Pavek",
    "Qusel", "Rinot", "Sabel", "Tovan",
]
_SURNAME = [
    "Makar", "Nolev", "Ostin", "Pirel", "Ramet", "Savol", "Tarek", "Ulman",
    "Varek", "Wilor", "Arel", "Darno", "Kalum",
]
_PLACE = [
    "Valdor", "Westim", "Xanek", "Yarbel", "Zubin", "Aldova", "Brenik",
    "Cordel", "Dovern", "Estrel", "Fermon", "Gandor",
]
_PLACE_SUFFIX = ["Utara", "Selat", "Baru", "Lembah"]
_ORG_HEAD = ["Konzil", "Madran", "Senhor", "Teknika", "Vortal", "Zentrum"]
_ORG_TAIL = ["Group", "Fond", "Liga"]

_FILLER = [
    "za", "lomir", "beno", "takel", "vron", "sulat", "mekor", "dai", "polem",
    "ruskat", "enil", "gato", "prem", "oste", "lunek", "takar", "velem",
    "sardo", "kel", "minor", "brel", "havat", "norim", "selko", "turan",
]
_VERBS = ["varek", "tumal", "serog", "plenat", "grodim", "maskel"]

TEMPLATES = [
    ("{F} {PER} {V} za {LOC} .", None),
    ("{PER} {V} {F} {F} za {LOC} .", None),
    ("{F} {F} {ORG} {V} {PER} .", None),
    ("{ORG} {V} za {LOC} {F} .", None),
    ("{PER} {F} {PER} {V} {F} .", None),
    ("{F} {LOC} {F} {ORG} {V} .", None),
    ("{PER} {V} {ORG} {F} {F} .", None),
    ("{F} {V} {F} {LOC} {F} {PER} .", None),
    ("{LOC} {F} {F} {V} {F} .", None),
    ("{F} {PER} {F} {V} {LOC} {F} {ORG} .", None),
    ("{V} {F} {PER} {F} {F} .", None),
    ("{F} {F} {V} {ORG} .", None),
]


@dataclass(frozen=True)
class SynthManifest:
    seed: int
    size: int
    files: dict[str, str]
    entity_surface_counts: dict[str, int]

    def to_record(self) -> dict:
        return {
            "seed": self.seed,
            "size": self.size,
            "files": dict(self.files),
            "entity_surface_counts": dict(self.entity_surface_counts),
        }


def _entity_surfaces(rng: np.random.Generator) -> dict[str, list[tuple[str, ...]]]:
    """All entity surface forms per type; shared tokens are deliberate."""
    per: list[tuple[str, ...]] = []
    for given in _GIVEN:
        per.append((given,))
    for given in _GIVEN:
        for surname in rng.choice(len(_SURNAME), size=3, replace=False):
            per.append((given, _SURNAME[surname]))
    loc: list[tuple[str, ...]] = [(p,) for p in _PLACE]
    for p in _PLACE:
        for sfx in rng.choice(len(_PLACE_SUFFIX), size=2, replace=False):
            loc.append((p, _PLACE_SUFFIX[sfx]))
    org: list[tuple[str, ...]] = []
    for head in _ORG_HEAD:
        for p in _PLACE:  # org names embed place names: boundary ambiguity
            org.append((head, p))
        for tail in _ORG_TAIL:
            org.append((head, tail))
        for pi in rng.choice(len(_PLACE), size=4, replace=False):
            tail = _ORG_TAIL[int(rng.integers(len(_ORG_TAIL)))]
            org.append((head, _PLACE[pi], tail))
    return {"PER": per, "LOC": loc, "ORG": org}


def generate_sentences(size: int, seed: int) -> tuple[list[LabeledSentence], dict[str, list[tuple[str, ...]]]]:
    """Deterministically generate ``size`` labeled sentences."""
    rng = np.random.default_rng(seed)
    surfaces = _entity_surfaces(rng)
    sentences: list[LabeledSentence] = []
    for idx in range(size):
        template = TEMPLATES[int(rng.integers(len(TEMPLATES)))][0]
        tokens: list[str] = []
        tags: list[int] = []
        for part in template.split():
            if part == "{F}":
                tokens.append(_FILLER[int(rng.integers(len(_FILLER)))])
                tags.append(NER_LABELS.index("O"))
            elif part == "{V}":
                tokens.append(_VERBS[int(rng.integers(len(_VERBS)))])
                tags.append(NER_LABELS.index("O"))
            elif part in ("{PER}", "{LOC}", "{ORG}"):
                etype = part[1:-1]
                pool = surfaces[etype]
                surface = pool[int(rng.integers(len(pool)))]
                tokens.extend(surface)
                tags.append(NER_LABELS.index(f"B-{etype}"))
                tags.extend([NER_LABELS.index(f"I-{etype}")] * (len(surface) - 1))
            else:
                tokens.append(part)
                tags.append(NER_LABELS.index("O"))
        sentences.append(
            LabeledSentence(
                id=f"synth:{idx}", tokens=tuple(tokens), ner_tags=tuple(tags),
                provenance="synthetic",
            )
        )
    return sentences, surfaces


def add_boundary_noise(
    sentences: list[LabeledSentence], frac: float, seed: int
) -> list[LabeledSentence]:
    """Corrupt a fraction of entity mentions by clipping or overrunning one
    boundary token, the typical damage in rule-bootstrapped labels."""
    rng = np.random.default_rng(seed)
    o_idx = NER_LABELS.index("O")
    noisy = []
    for s in sentences:
        tags = list(s.ner_tags)
        for span in extract_entities(s):
            if rng.random() >= frac:
                continue
            if span.end > span.start and rng.random() < 0.5:
                tags[span.end] = o_idx
            elif span.end + 1 < len(tags) and tags[span.end + 1] == o_idx:
                tags[span.end + 1] = NER_LABELS.index(f"I-{span.etype}")
            elif span.end > span.start:
                tags[span.start] = o_idx
        noisy.append(s.with_tags(repair_bio2(tags)))
    return noisy


def write_corpus(
    out_dir, size: int = 2400, seed: int = 13, noise: float = 0.15
) -> SynthManifest:
    """Generate the corpus, write splits, gazetteer/rules config and vocab.

    Besides the clean splits, a ``train_noisy`` file carries seeded boundary
    noise on the training sentences only; evaluation splits stay clean.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sentences, surfaces = generate_sentences(size, seed)
    train, dev, test = split_dataset(sentences, seed=seed)

    files = {}
    parts = [
        ("full", sentences),
        ("train", train),
        ("train_noisy", add_boundary_noise(train, noise, seed + 1)),
        ("dev", dev),
        ("test", test),
    ]
    for name, part in parts:
        path = out / f"{name}.bio2"
        save_bio2(path, part)
        files[name] = str(path)

    gazetteer = [
        {"surface": " ".join(surface), "type": etype}
        for etype, pool in surfaces.items()
        for surface in sorted(set(pool))
    ]
    rules_config = {
        "case_fold": True,
        "rules": [
            {
                "rule_id": "org-head",
                "trigger": sorted({head.casefold() for head in _ORG_HEAD}),
                "position": "is_prefix_token",
                "assigned_type": "ORG",
                "capitalization_required": True,
                "max_span_len": 3,
            }
        ],
        "gazetteer": gazetteer,
    }
    rules_path = out / "rules.json"
    rules_path.write_text(json.dumps(rules_config, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    files["rules"] = str(rules_path)

    vocab_tokens = sorted({t.casefold() for s in sentences for t in s.tokens})
    vocab_path = out / "vocab.txt"
    vocab_path.write_text("".join(f"{t}\n" for t in vocab_tokens), encoding="utf-8")
    files["vocab"] = str(vocab_path)

    manifest = SynthManifest(
        seed=seed,
        size=size,
        files=files,
        entity_surface_counts={k: len(set(v)) for k, v in surfaces.items()},
    )
    (out / "manifest.json").write_text(
        json.dumps(manifest.to_record(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest
