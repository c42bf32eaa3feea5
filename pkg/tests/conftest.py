"""Shared fixtures and generators."""

from __future__ import annotations

import random

import pytest
from hypothesis import strategies as st

from nerforge.corpus import ENTITY_TYPES, NER_LABELS, LabeledSentence

_WORD_CHARS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789éñü'-"


@st.composite
def tokens_strategy(draw, min_size=1, max_size=10):
    return draw(
        st.lists(
            st.text(alphabet=_WORD_CHARS, min_size=1, max_size=8),
            min_size=min_size,
            max_size=max_size,
        )
    )


@st.composite
def labeled_sentence(draw, max_len=12, sent_id="gen:0"):
    """A random valid BIO2 sentence built from entity/gap segments."""
    tags: list[int] = []
    while len(tags) < 1 or (len(tags) < max_len and draw(st.booleans())):
        if draw(st.booleans()):
            tags.append(NER_LABELS.index("O"))
        else:
            etype = draw(st.sampled_from(ENTITY_TYPES))
            length = draw(st.integers(min_value=1, max_value=3))
            tags.append(NER_LABELS.index(f"B-{etype}"))
            tags.extend([NER_LABELS.index(f"I-{etype}")] * (length - 1))
    tags = tags[:max_len]
    # a truncated I-run is still valid BIO2 (its B- opener survives)
    toks = draw(
        st.lists(
            st.text(alphabet=_WORD_CHARS, min_size=1, max_size=8),
            min_size=len(tags),
            max_size=len(tags),
        )
    )
    return LabeledSentence(id=sent_id, tokens=tuple(toks), ner_tags=tuple(tags))


def random_sentence(rng: random.Random, max_len: int = 12, sent_id: str = "r:0") -> LabeledSentence:
    """Plain-random valid sentence for high-volume (non-hypothesis) property runs."""
    tags: list[int] = []
    target = rng.randint(1, max_len)
    while len(tags) < target:
        if rng.random() < 0.5:
            tags.append(NER_LABELS.index("O"))
        else:
            etype = rng.choice(ENTITY_TYPES)
            length = rng.randint(1, 3)
            tags.append(NER_LABELS.index(f"B-{etype}"))
            tags.extend([NER_LABELS.index(f"I-{etype}")] * (length - 1))
    tags = tags[:target]
    toks = tuple("w%d%s" % (i, rng.choice("abcdef")) for i in range(len(tags)))
    return LabeledSentence(id=sent_id, tokens=toks, ner_tags=tuple(tags))


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240817)
