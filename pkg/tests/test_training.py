import numpy as np

from nerforge.corpus import LabeledSentence, NER_LABELS
from nerforge.encoder import ReferenceEncoder
from nerforge.model import BOUNDARY_HEAD_PARAMS, BoundaryRevisedTagger, HyperParams, VariantFlags
from nerforge.nn.store import OptimizerConfig
from nerforge.training import AlternateTrainer, predict_dataset


def tag(label):
    return NER_LABELS.index(label)


def memorization_set():
    people = ["Ana", "Bo", "Cy", "Dee", "Eda"]
    places = ["Kota", "Lima", "Mira", "Nusa", "Oslo"]
    sentences = []
    for i in range(20):
        p = people[i % 5]
        q = places[(i * 3) % 5]
        sentences.append(
            LabeledSentence(
                f"m:{i}",
                (p, "went", "to", q, "today"),
                (tag("B-PER"), tag("O"), tag("O"), tag("B-LOC"), tag("O")),
            )
        )
    return sentences


def make_trainer(variants=None, seed=0, lr=5e-3):
    data = memorization_set()
    vocab = sorted({t for s in data for t in s.tokens})
    hp = HyperParams(d_emb=12, d_hidden=8, d_task=12, seed=seed, batch_size=10)
    tagger = BoundaryRevisedTagger(ReferenceEncoder(vocab, 12, 8), hp, variants)
    return AlternateTrainer(tagger, OptimizerConfig(kind="adam", learning_rate=lr)), data


class TestSchedule:
    def test_phases_alternate_starting_bd(self):
        trainer, data = make_trainer()
        phases = [trainer.train_step(data[:4])[0] for _ in range(4)]
        assert phases == ["bd", "ner", "bd", "ner"]

    def test_disable_bd_always_ner(self):
        trainer, data = make_trainer(variants=VariantFlags(disable_bd=True))
        phases = [trainer.train_step(data[:4])[0] for _ in range(3)]
        assert phases == ["ner", "ner", "ner"]

    def test_explicit_bd_phase_rejected_when_disabled(self):
        trainer, data = make_trainer(variants=VariantFlags(disable_bd=True))
        import pytest

        with pytest.raises(ValueError):
            trainer.train_step(data[:2], phase="bd")


class TestLearning:
    def test_memorization_under_alternate_steps(self):
        trainer, data = make_trainer()
        last_ner = None
        for _ in range(200):
            phase, loss = trainer.train_step(data)
            if phase == "ner":
                last_ner = loss
        assert last_ner is not None and last_ner < 0.1

    def test_frozen_boundary_head_is_bitwise_unchanged(self):
        trainer, data = make_trainer()
        before = {name: trainer.tagger.store.values[name].copy() for name in BOUNDARY_HEAD_PARAMS}
        trainer.train_step(data[:6], phase="ner", frozen=BOUNDARY_HEAD_PARAMS)
        for name in BOUNDARY_HEAD_PARAMS:
            assert np.array_equal(trainer.tagger.store.values[name], before[name]), name

    def test_fit_history_and_determinism(self):
        t1, data = make_trainer(seed=5)
        h1 = t1.fit(data, epochs=2, log_progress=False)
        t2, _ = make_trainer(seed=5)
        h2 = t2.fit(data, epochs=2, log_progress=False)
        assert [r.mean_ner_loss for r in h1] == [r.mean_ner_loss for r in h2]
        assert [r.mean_bd_loss for r in h1] == [r.mean_bd_loss for r in h2]
        for a, b in zip(t1.tagger.store.values.values(), t2.tagger.store.values.values()):
            assert np.array_equal(a, b)

    def test_predict_dataset_shapes(self):
        trainer, data = make_trainer()
        preds = predict_dataset(trainer.tagger, data[:3])
        assert [len(p) for p in preds] == [len(s) for s in data[:3]]
