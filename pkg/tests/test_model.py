import logging
import math

import numpy as np
import pytest

from nerforge.corpus import EmptySentenceError, LabeledSentence, NER_LABELS
from nerforge.encoder import PrecomputedEncoder, ReferenceEncoder
from nerforge.model import (
    BoundaryRevisedTagger,
    HyperParams,
    VariantFlags,
    bi_revise,
    combine_losses,
    gated_select,
    load_model,
    pair_boundaries,
    save_model,
    span_soft_target,
    transform_span_probs,
)
from nerforge.nn.tensor import Tensor

TOKENS = ("Ana", "met", "Bo", "Corp", "team")
VOCAB = tuple(t.lower() for t in TOKENS) + TOKENS
SENT = LabeledSentence(
    "t:0",
    TOKENS,
    (NER_LABELS.index("B-PER"), NER_LABELS.index("O"), NER_LABELS.index("B-ORG"),
     NER_LABELS.index("I-ORG"), NER_LABELS.index("O")),
)


def make_tagger(seed=0, variants=None, alpha=0.5, **hp_kwargs):
    hp = HyperParams(d_emb=8, d_hidden=4, d_task=8, seed=seed, alpha=alpha, **hp_kwargs)
    enc = ReferenceEncoder(VOCAB, d_emb=8, d_hidden=4)
    return BoundaryRevisedTagger(enc, hp, variants)


def zero_params(store):
    for v in store.values.values():
        v[...] = 0.0


class TestEncode:
    def test_deterministic(self):
        t = make_tagger(seed=2)
        a = t.encoder.encode(TOKENS, t.store)
        b = t.encoder.encode(TOKENS, t.store)
        assert np.array_equal(a.data, b.data)

    def test_shape(self):
        t = make_tagger()
        assert t.encoder.encode(TOKENS, t.store).shape == (5, 8)

    def test_unrelated_vocab_rows_do_not_matter(self):
        t = make_tagger(seed=4)
        before = t.encoder.encode(TOKENS, t.store).data.copy()
        used = {t.encoder.token_ids.get(tok, 0) for tok in TOKENS}
        free = [i for i in range(len(t.encoder.token_ids)) if i not in used]
        emb = t.store.values["enc.emb"]
        emb[[free[0], free[1]]] = emb[[free[1], free[0]]]
        after = t.encoder.encode(TOKENS, t.store).data
        assert np.array_equal(before, after)

    def test_unknown_token_maps_to_unk_row(self):
        t = make_tagger(seed=1)
        a = t.encoder.encode(("zzzz",), t.store).data
        b = t.encoder.encode(("qqqq",), t.store).data
        assert np.array_equal(a, b)

    def test_empty_sentence_rejected(self):
        with pytest.raises(EmptySentenceError):
            make_tagger().forward(())

    def test_truncation_warns(self, caplog):
        t = make_tagger(max_len=3)
        with caplog.at_level(logging.WARNING):
            trace = t.forward(TOKENS)
        assert len(trace.tokens) == 3
        assert any("truncat" in r.message for r in caplog.records)

    def test_precomputed_encoder_adapter(self):
        vecs = {"a": np.ones(4), "<unk>": np.zeros(4)}
        enc = PrecomputedEncoder(vecs, d=4)
        from nerforge.nn.store import ParameterStore

        H = enc.encode(["a", "b"], ParameterStore(0))
        np.testing.assert_array_equal(H.data, [[1, 1, 1, 1], [0, 0, 0, 0]])


class TestProjectionsAndHeads:
    def test_zero_parameters_give_neutral_outputs(self):
        t = make_tagger()
        zero_params(t.store)
        trace = t.forward(TOKENS)
        assert np.array_equal(trace.H_bd.data, np.zeros((5, 8)))
        assert np.array_equal(trace.H_ner.data, np.zeros((5, 8)))
        np.testing.assert_allclose(trace.p_s.data, 0.5, atol=1e-15)
        np.testing.assert_allclose(trace.p_e.data, 0.5, atol=1e-15)
        np.testing.assert_allclose(trace.p_ner.data, 1 / 7, atol=1e-15)

    def test_probability_rows_sum_to_one(self):
        trace = make_tagger(seed=6).forward(TOKENS)
        for p in (trace.p_s, trace.p_e, trace.p_ner):
            np.testing.assert_allclose(p.data.sum(axis=1), 1.0, atol=1e-9)

    def test_hand_set_boundary_logits(self):
        t = make_tagger()
        zero_params(t.store)
        t.store.values["bd.start.b"][:] = [math.log(1.0), math.log(3.0)]
        trace = t.forward(TOKENS)
        np.testing.assert_allclose(trace.p_s.data, [[0.25, 0.75]] * 5, atol=1e-12)

    def test_hand_set_span_logits(self):
        t = make_tagger()
        zero_params(t.store)
        t.store.values["bd.start.b"][:] = [0.0, 1.0]  # every token a start
        t.store.values["bd.end.b"][:] = [0.0, 1.0]  # every token an end
        t.store.values["span.b"][:] = [math.log(1.0)] * 3 + [math.log(5.0)]
        trace = t.forward(TOKENS)
        assert trace.spans == [(i, i) for i in range(5)]
        np.testing.assert_allclose(trace.p_sp[0].data, [0.125, 0.125, 0.125, 0.625], atol=1e-12)

    def test_gate_zero_weights_is_half(self):
        t = make_tagger()
        zero_params(t.store)
        t.store.values["bd.start.b"][:] = [0.0, 1.0]
        t.store.values["bd.end.b"][:] = [0.0, 1.0]
        trace = t.forward(TOKENS)
        np.testing.assert_allclose(trace.gate.data, 0.5, atol=1e-15)

    def test_gate_closed_form(self):
        t = make_tagger()
        zero_params(t.store)
        t.store.values["bd.start.b"][:] = [0.0, 1.0]
        t.store.values["bd.end.b"][:] = [0.0, 1.0]
        t.store.values["gate.b"][:] = math.log(3.0)
        trace = t.forward(TOKENS)
        np.testing.assert_allclose(trace.gate.data, 0.75, atol=1e-12)


class TestPairBoundaries:
    @staticmethod
    def probs(flags):
        return np.array([[0.1, 0.9] if f else [0.9, 0.1] for f in flags])

    def test_simple_pair(self):
        assert pair_boundaries(self.probs([0, 1, 0, 0]), self.probs([0, 0, 0, 1])) == [(1, 3)]

    def test_two_pairs(self):
        spans = pair_boundaries(self.probs([0, 1, 0, 0, 1, 0]), self.probs([0, 0, 1, 0, 0, 1]))
        assert spans == [(1, 2), (4, 5)]

    def test_unmatched_start_discarded(self):
        assert pair_boundaries(self.probs([0, 0, 1]), self.probs([0, 0, 0])) == []


class TestSpanRepresentation:
    def test_mean_rows(self):
        from nerforge.nn.tensor import mean_rows, slice_rows

        H = Tensor(np.array([[1.0, 3.0], [3.0, 5.0], [9.0, 9.0]]))
        v = mean_rows(slice_rows(H, 0, 2))
        np.testing.assert_array_equal(v.data, [2.0, 4.0])

    def test_soft_target_pure(self):
        assert span_soft_target((0, 1), [0, 0, 3]).tolist() == [1.0, 0, 0, 0]

    def test_soft_target_mixed(self):
        assert span_soft_target((0, 1), [0, 3]).tolist() == [0.5, 0, 0, 0.5]


class TestTransform:
    def test_first_token_mapping(self):
        p_sp = [Tensor(np.array([0.7, 0.1, 0.1, 0.1]))]
        out = transform_span_probs([(0, 1)], p_sp, 3).data
        np.testing.assert_allclose(out[0], [0.7, 0, 0.1, 0, 0.1, 0, 0.1], atol=1e-15)

    def test_inside_token_mapping(self):
        p_sp = [Tensor(np.array([0.7, 0.1, 0.1, 0.1]))]
        out = transform_span_probs([(0, 1)], p_sp, 3).data
        np.testing.assert_allclose(out[1], [0, 0.7, 0, 0.1, 0, 0.1, 0.1], atol=1e-15)

    def test_outside_tokens_all_zero(self):
        p_sp = [Tensor(np.array([0.7, 0.1, 0.1, 0.1]))]
        out = transform_span_probs([(0, 1)], p_sp, 3).data
        assert np.array_equal(out[2], np.zeros(7))

    def test_mass_preserved(self, rng):
        for _ in range(200):
            L = rng.randint(1, 10)
            spans = []
            cursor = 0
            while cursor < L and rng.random() < 0.6:
                j = min(L - 1, cursor + rng.randint(0, 2))
                spans.append((cursor, j))
                cursor = j + 2
            p_sp = [Tensor(np.random.default_rng(rng.randint(0, 9999)).dirichlet(np.ones(4)))
                    for _ in spans]
            out = transform_span_probs(spans, p_sp, L).data
            covered = {t for i, j in spans for t in range(i, j + 1)}
            for token in range(L):
                if token in covered:
                    assert abs(out[token].sum() - 1.0) < 1e-12
                else:
                    assert out[token].sum() == 0.0


class TestReviseAndSelect:
    def test_hand_arithmetic(self):
        p_ner = Tensor(np.array([[0.5, 0.1, 0.1, 0.1, 0.1, 0.05, 0.05]]))
        p_new = Tensor(np.array([[0.7, 0.0, 0.1, 0.0, 0.1, 0.0, 0.1]]))
        gate = Tensor(np.array([0.2]))
        out = bi_revise(p_ner, gate, p_new).data
        np.testing.assert_allclose(
            out[0], [0.64, 0.1, 0.12, 0.1, 0.12, 0.05, 0.07], atol=1e-12
        )

    def test_zero_row_leaves_row_unchanged(self):
        p_ner = Tensor(np.array([[0.3, 0.1, 0.1, 0.1, 0.1, 0.1, 0.2]]))
        p_new = Tensor(np.zeros((1, 7)))
        gate = Tensor(np.array([0.9]))
        assert np.array_equal(bi_revise(p_ner, gate, p_new).data, p_ner.data)

    def test_gate_to_zero_limit(self):
        rng = np.random.default_rng(3)
        p_ner = Tensor(rng.dirichlet(np.ones(7), size=4))
        p_new = Tensor(rng.dirichlet(np.ones(7), size=4))
        out = bi_revise(p_ner, Tensor(np.zeros(4)), p_new).data
        np.testing.assert_allclose(out, p_ner.data, atol=1e-15)

    def test_alpha_zero_never_revises_in_train(self):
        rng = np.random.default_rng(0)
        p_ner = Tensor(np.full((2, 7), 1 / 7))
        p_rev = Tensor(np.full((2, 7), 2 / 7))
        for _ in range(200):
            out, revised, draw = gated_select(p_ner, p_rev, alpha=0.0, mode="train", rng=rng)
            assert not revised and out is p_ner and draw > 0.0

    def test_alpha_one_always_revises_in_train(self):
        rng = np.random.default_rng(0)
        p_ner = Tensor(np.full((2, 7), 1 / 7))
        p_rev = Tensor(np.full((2, 7), 2 / 7))
        for _ in range(200):
            out, revised, _ = gated_select(p_ner, p_rev, alpha=1.0, mode="train", rng=rng)
            assert revised
            np.testing.assert_allclose(out.data.sum(axis=1), 1.0, atol=1e-12)

    def test_fixed_draw_point_nine_keeps_unrevised(self):
        class FixedRng:
            def random(self):
                return 0.9

        p_ner = Tensor(np.full((1, 7), 1 / 7))
        p_rev = Tensor(np.full((1, 7), 3.0))
        out, revised, draw = gated_select(p_ner, p_rev, alpha=0.5, mode="train", rng=FixedRng())
        assert draw == 0.9 and not revised and out is p_ner

    def test_infer_mode_always_revises(self):
        p_ner = Tensor(np.full((1, 7), 1 / 7))
        p_rev = Tensor(np.full((1, 7), 2.0))
        out, revised, draw = gated_select(p_ner, p_rev, alpha=0.5, mode="infer")
        assert revised and draw is None
        np.testing.assert_allclose(out.data.sum(axis=1), 1.0, atol=1e-12)

    def test_renormalization_preserves_argmax(self, rng):
        for _ in range(200):
            g = np.random.default_rng(rng.randint(0, 10**6))
            p_ner = g.dirichlet(np.ones(7), size=3)
            p_new = np.zeros((3, 7))
            for i in range(3):
                if g.random() < 0.7:
                    slots = [0, 2, 4, 6] if g.random() < 0.5 else [1, 3, 5, 6]
                    p_new[i, slots] = g.dirichlet(np.ones(4))
            gate = g.uniform(size=3)
            revised = p_ner + gate[:, None] * p_new
            normalized = revised / revised.sum(axis=1, keepdims=True)
            assert np.array_equal(revised.argmax(axis=1), normalized.argmax(axis=1))


class TestLosses:
    def test_combine_exact(self):
        assert combine_losses(1.0, 2.0, 0.5) == 1.5

    def test_w1_one_ignores_span_loss(self):
        assert combine_losses(1.0, 123.0, 1.0) == 1.0

    def test_uniform_rows_give_log7(self):
        t = make_tagger()
        zero_params(t.store)
        trace = t.forward(TOKENS)
        loss = t.loss_ner(trace, SENT)
        assert abs(float(loss.data) - math.log(7)) < 1e-12

    def test_perfect_predictions_zero_loss(self):
        from nerforge.nn.tensor import ce_rows_mean

        p = np.eye(7)[list(SENT.ner_tags)]
        assert float(ce_rows_mean(Tensor(p), p).data) == 0.0

    def test_boundary_loss_no_spans_drops_span_term(self):
        t = make_tagger()
        zero_params(t.store)  # no boundaries predicted -> no spans
        trace = t.forward(TOKENS, for_phase="bd")
        assert trace.spans == []
        loss = float(t.loss_boundary(trace, SENT).data)
        # w1 * (CE(0.5) * 2) + (1 - w1) * 0 = 0.5 * 2 ln 2
        assert abs(loss - 0.5 * 2 * math.log(2)) < 1e-12


class TestVariants:
    def test_disable_bd_is_pure_ner_path(self):
        t = make_tagger(seed=7, variants=VariantFlags(disable_bd=True))
        before = [t.predict_tags(TOKENS), t.predict_tags(("Bo", "met"))]
        rng = np.random.default_rng(0)
        for name in ("proj.bd.W", "bd.start.W", "bd.end.W", "span.W", "gate.W"):
            t.store.values[name] += rng.normal(size=t.store.values[name].shape)
        after = [t.predict_tags(TOKENS), t.predict_tags(("Bo", "met"))]
        assert before == after

    def test_disable_revision_final_equals_ner(self):
        t = make_tagger(seed=8, variants=VariantFlags(disable_revision=True))
        trace = t.forward(TOKENS)
        assert trace.p_final is trace.p_ner
        assert trace.p_ner_rev is None

    def test_gradients_do_not_reach_bd_heads_without_revision(self):
        t = make_tagger(seed=9, variants=VariantFlags(disable_revision=True))
        t.store.zero_grads()
        trace = t.forward(TOKENS)
        t.loss_ner(trace, SENT).backward()
        for name in ("proj.bd.W", "proj.bd.b", "bd.start.W", "bd.end.W", "span.W"):
            assert np.all(t.store.grads[name] == 0.0), name
        assert np.any(t.store.grads["proj.ner.W"] != 0.0)

    def test_forced_tiny_gate_equals_no_revision_predictions(self):
        seeds = [s for s in range(30)
                 if make_tagger(seed=s).forward(TOKENS).spans]
        seed = seeds[0]
        gated = make_tagger(seed=seed)
        gated.store.values["gate.W"][:] = 0.0
        gated.store.values["gate.b"][:] = -60.0  # gate ~ 8.8e-27
        plain = make_tagger(seed=seed, variants=VariantFlags(disable_revision=True))
        plain.store.load_values(
            {k: v for k, v in gated.store.clone_values().items()}
        )
        sentences = [TOKENS, ("Bo", "Corp", "met"), ("team", "Ana")]
        for tokens in sentences:
            assert gated.predict_tags(tokens) == plain.predict_tags(tokens)

    def test_disable_gate_revises_unscaled(self):
        t = make_tagger(seed=0, variants=VariantFlags(disable_gate=True))
        trace = t.forward(TOKENS)
        assert trace.gate is None
        if trace.spans:
            expected = trace.p_ner.data + trace.p_new_sp.data
            np.testing.assert_allclose(trace.p_ner_rev.data, expected, atol=1e-15)


class TestDeterminismAndIO:
    def test_same_seed_same_forward_bits(self):
        a = make_tagger(seed=11).forward(TOKENS)
        b = make_tagger(seed=11).forward(TOKENS)
        assert np.array_equal(a.p_final.data, b.p_final.data)

    def test_save_load_round_trip(self, tmp_path):
        t = make_tagger(seed=12)
        path = tmp_path / "model.ckpt"
        save_model(path, t)
        loaded = load_model(path)
        assert loaded.predict_tags(TOKENS) == t.predict_tags(TOKENS)
        assert loaded.hp == t.hp
        assert loaded.variants == t.variants

    def test_predict_all_o_with_forced_bias(self):
        t = make_tagger(variants=VariantFlags(disable_bd=True))
        zero_params(t.store)
        t.store.values["ner.b"][NER_LABELS.index("O")] = 50.0
        assert t.predict_sentence(TOKENS) == []
