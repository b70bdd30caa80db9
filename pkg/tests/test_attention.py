import io
import math

import numpy as np
import pytest

from evadebench.attention import (
    AttentionConfig, AttentionModel, EmptyDocument, _loss_and_grads,
    attention_predict, attention_weights, load_model, save_model,
    train_attention,
)
from evadebench.text_core import Document, Label
from conftest import make_store

STORE = make_store({"bad": [1.0, 0.0, 0.5], "vile": [0.8, 0.3, 0.1],
                    "good": [-1.0, 0.2, 0.0], "nice": [-0.7, -0.4, 0.2],
                    "the": [0.0, 0.1, -0.1]})


def _model(u=None, w=None, b=0.0):
    dim = STORE.dimension
    return AttentionModel(np.zeros(dim) if u is None else np.array(u, float),
                          np.zeros(dim) if w is None else np.array(w, float),
                          b, STORE)


def _doc(text, label=None):
    return Document.from_text("d", text, label)


class TestAttentionWeights:
    def test_zero_direction_gives_uniform(self):
        weights = attention_weights(_model(), _doc("bad good the"))
        assert np.allclose(weights, [1 / 3] * 3)

    def test_single_token(self):
        assert attention_weights(_model(u=[1, 2, 3]), _doc("bad")) == \
            pytest.approx([1.0])

    def test_hand_computed_softmax(self):
        u = [1.0, 0.0, 0.0]
        doc = _doc("bad vile good")
        logits = [1.0, 0.8, -1.0]
        exp = np.exp(logits)
        expect = exp / exp.sum()
        assert attention_weights(_model(u=u), doc) == \
            pytest.approx(expect, abs=1e-6)

    def test_weights_sum_to_one_and_positive(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            u = rng.normal(size=3) * 10
            doc = _doc("bad vile good nice the")
            w = attention_weights(_model(u=u), doc)
            assert w.sum() == pytest.approx(1.0, abs=1e-9)
            assert (w > 0).all()

    def test_oov_token_gets_zero_logit(self):
        weights = attention_weights(_model(u=[1, 0, 0]), _doc("bad zzz"))
        exp = np.exp([1.0, 0.0])
        assert weights == pytest.approx(exp / exp.sum())

    def test_empty_doc_rejected(self):
        with pytest.raises(EmptyDocument):
            attention_weights(_model(), _doc(""))

    def test_ordering_equals_logit_ordering(self):
        rng = np.random.default_rng(4)
        doc = _doc("bad vile good nice the")
        embeds = np.array([STORE.vector(t.lowered) for t in doc.tokens])
        for _ in range(20):
            u = rng.normal(size=3)
            logits = embeds @ u
            weights = attention_weights(_model(u=u), doc)
            assert list(np.argsort(-logits, kind="stable")) == \
                list(np.argsort(-weights, kind="stable"))

    def test_shift_invariance(self):
        # adding a constant to every logit leaves the softmax unchanged
        doc = _doc("bad vile good")
        u = np.array([0.5, -1.0, 2.0])
        embeds = np.array([STORE.vector(t.lowered) for t in doc.tokens])
        base = attention_weights(_model(u=u), doc)
        from evadebench.attention import _softmax
        shifted = _softmax(embeds @ u + 3.7)
        assert shifted == pytest.approx(base, abs=1e-12)


class TestAttentionPredict:
    def test_zero_readout_gives_half(self):
        assert attention_predict(_model(), _doc("bad good")) == 0.5

    def test_large_bias_saturates(self):
        assert attention_predict(_model(b=20.0), _doc("bad")) > 0.999

    def test_matches_independent_forward_pass(self):
        u = np.array([1.0, -0.5, 0.2])
        w = np.array([0.3, 0.7, -1.0])
        b = 0.25
        doc = _doc("bad vile good nice")
        embeds = np.array([STORE.vector(t.lowered) for t in doc.tokens])
        logits = embeds @ u
        exp = np.exp(logits - logits.max())
        attn = exp / exp.sum()
        z = float((attn[:, None] * embeds).sum(axis=0) @ w) + b
        expect = 1.0 / (1.0 + math.exp(-z))
        assert attention_predict(_model(u=u, w=w, b=b), doc) == \
            pytest.approx(expect, abs=1e-8)


class TestTraining:
    DOCS = [_doc("bad vile", Label.OFFENSIVE), _doc("bad the", Label.OFFENSIVE),
            _doc("good nice", Label.NOT_OFFENSIVE),
            _doc("the nice", Label.NOT_OFFENSIVE)]

    def test_separable_fixture_full_accuracy(self):
        model = train_attention(self.DOCS, STORE,
                                AttentionConfig(epochs=300, seed=1))
        for doc in self.DOCS:
            predicted = attention_predict(model, doc) >= 0.5
            assert predicted == (doc.label is Label.OFFENSIVE)

    def test_epochs_zero_keeps_initialization(self):
        m0 = train_attention(self.DOCS, STORE, AttentionConfig(epochs=0, seed=9))
        rng = np.random.default_rng(9)
        assert np.allclose(m0.score_vector, rng.normal(scale=0.1, size=3))
        assert np.allclose(m0.classifier_vector, rng.normal(scale=0.1, size=3))
        assert m0.bias == 0.0

    def test_deterministic(self):
        cfg = AttentionConfig(epochs=50, seed=3)
        m1 = train_attention(self.DOCS, STORE, cfg)
        m2 = train_attention(self.DOCS, STORE, cfg)
        assert np.array_equal(m1.score_vector, m2.score_vector)
        assert np.array_equal(m1.classifier_vector, m2.classifier_vector)
        assert m1.bias == m2.bias

    def test_requires_both_classes(self):
        with pytest.raises(ValueError):
            train_attention(self.DOCS[:2], STORE)

    @pytest.mark.parametrize("seed", range(5))
    def test_gradients_match_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        u = rng.normal(size=3)
        w = rng.normal(size=3)
        b = float(rng.normal())
        embeds = rng.normal(size=(4, 3))
        y = float(rng.integers(0, 2))
        loss, g_u, g_w, g_b = _loss_and_grads(u, w, b, embeds, y)
        h = 1e-5

        def fd(vec, idx, setter):
            vec2 = vec.copy()
            vec2[idx] += h
            up = setter(vec2)
            vec2[idx] -= 2 * h
            down = setter(vec2)
            return (up - down) / (2 * h)

        for i in range(3):
            got = fd(u, i, lambda v: _loss_and_grads(v, w, b, embeds, y)[0])
            assert g_u[i] == pytest.approx(got, rel=1e-4, abs=1e-8)
            got = fd(w, i, lambda v: _loss_and_grads(u, v, b, embeds, y)[0])
            assert g_w[i] == pytest.approx(got, rel=1e-4, abs=1e-8)
        up = _loss_and_grads(u, w, b + h, embeds, y)[0]
        down = _loss_and_grads(u, w, b - h, embeds, y)[0]
        assert g_b == pytest.approx((up - down) / (2 * h), rel=1e-4, abs=1e-8)


def test_model_serialization_roundtrip():
    model = _model(u=[1.0, 2.0, 3.0], w=[-1.0, 0.5, 0.0], b=0.75)
    buf = io.StringIO()
    save_model(model, buf)
    buf.seek(0)
    loaded = load_model(buf, STORE)
    assert np.array_equal(loaded.score_vector, model.score_vector)
    assert np.array_equal(loaded.classifier_vector, model.classifier_vector)
    assert loaded.bias == model.bias


def test_model_dimension_mismatch():
    model = _model()
    buf = io.StringIO()
    save_model(model, buf)
    buf.seek(0)
    other = make_store({"a": [1.0]})
    with pytest.raises(ValueError):
        load_model(buf, other)
