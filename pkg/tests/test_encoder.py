"""Sentence-encoder tests: lookups, LSTM recurrence, shared parameters."""

import math

import numpy as np
import pytest

from docgraph import autodiff as ad
from docgraph import encoder
from docgraph.autodiff import Tensor
from docgraph.corpus import Document
from docgraph.errors import ShapeError

from test_autodiff import fd_grad, max_rel_err


@pytest.fixture
def params():
    return encoder.EncoderParams.init(np.random.default_rng(0), vocab_size=12,
                                      embed_dim=4, hidden_dim=4)


class TestEmbed:
    def test_single_lookup(self, params):
        out = encoder.embed([5], params.embedding)
        assert np.array_equal(out.values, params.embedding.values[[5]])

    def test_tied_lookup_gradients_sum(self, params):
        with ad.Tape() as tape:
            out = encoder.embed([5, 5], params.embedding)
            loss = ad.sum_all(out)
        assert np.array_equal(out.values[0], out.values[1])
        ad.backward(tape, loss)
        assert np.array_equal(params.embedding.grad[5], 2.0 * np.ones(4))

    def test_out_of_range(self, params):
        with pytest.raises(ShapeError):
            encoder.embed([12], params.embedding)

    def test_gradient_matches_finite_differences(self, params):
        emb = params.embedding
        with ad.Tape() as tape:
            loss = ad.sum_all(encoder.embed([2, 7], emb))
        ad.backward(tape, loss)
        f = fd_grad(lambda v: float(v[[2, 7]].sum()), emb.values.copy())
        assert max_rel_err(emb.grad, f) < 1e-6


class TestLstm:
    def test_zero_weights_give_zero_hidden(self):
        zero = lambda r, c: Tensor(np.zeros((r, c)), requires_grad=True)
        params = encoder.EncoderParams(
            embedding=zero(5, 3),
            gates={g: (zero(3, 2), zero(2, 2), Tensor(np.zeros(2), requires_grad=True))
                   for g in encoder.GATES},
        )
        out = encoder.lstm_last_hidden(Tensor(np.ones((4, 3))), params)
        assert np.array_equal(out.values, np.zeros(2))

    def test_single_step_matches_hand_computation(self):
        # straight-line recomputation of one LSTM cell with 2-d weights
        wx = {
            "i": [[0.1, 0.2], [0.3, -0.1]],
            "f": [[0.2, 0.0], [0.1, 0.4]],
            "g": [[0.3, -0.2], [0.05, 0.15]],
            "o": [[-0.1, 0.25], [0.2, 0.1]],
        }
        bias = {"i": [0.05, -0.05], "f": [1.0, 1.0], "g": [0.0, 0.0], "o": [0.1, -0.1]}
        params = encoder.EncoderParams(
            embedding=Tensor(np.zeros((2, 2))),
            gates={
                g: (Tensor(wx[g]), Tensor([[0.7, -0.3], [0.2, 0.9]]), Tensor(bias[g]))
                for g in encoder.GATES
            },
        )
        x = [1.0, -1.0]
        out = encoder.lstm_last_hidden(Tensor([x]), params)

        def sig(v):
            return 1.0 / (1.0 + math.exp(-v))

        expected = []
        for j in range(2):
            pre = {g: x[0] * wx[g][0][j] + x[1] * wx[g][1][j] + bias[g][j]
                   for g in encoder.GATES}
            c1 = sig(pre["f"]) * 0.0 + sig(pre["i"]) * math.tanh(pre["g"])
            expected.append(sig(pre["o"]) * math.tanh(c1))
        assert np.allclose(out.values, expected, atol=1e-12)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(3)
        params = encoder.EncoderParams.init(rng, vocab_size=4, embed_dim=3, hidden_dim=2)
        x_vals = rng.normal(size=(3, 3))
        w = rng.normal(size=2)

        def loss_value():
            with ad.Tape() as tape:
                out = encoder.lstm_last_hidden(Tensor(x_vals), params)
                loss = ad.sum_all(ad.mul(out, Tensor(w)))
            return tape, loss

        tape, loss = loss_value()
        ad.backward(tape, loss)
        for name, tensor in params.named_tensors().items():
            if name == "embedding":
                continue
            analytic = tensor.grad

            def f(v, tensor=tensor):
                saved = tensor.values
                tensor.values = v
                out = encoder.lstm_last_hidden(Tensor(x_vals), params)
                tensor.values = saved
                return float(np.sum(w * out.values))

            numeric = fd_grad(f, tensor.values.copy())
            assert max_rel_err(analytic, numeric) < 1e-5, name


class TestEncodeDocument:
    def test_identical_sentences_identical_rows(self, params):
        doc = Document("d", 0, ((1, 2, 3), (1, 2, 3)))
        out = encoder.encode_document(doc, params)
        assert out.shape == (2, 4)
        assert np.array_equal(out.values[0], out.values[1])

    def test_single_sentence_shape(self, params):
        out = encoder.encode_document(Document("d", 0, ((4, 5),)), params)
        assert out.shape == (1, 4)

    def test_permutation_permutes_rows_exactly(self, params):
        sentences = ((1, 2), (3, 4, 5), (6,), (7, 8))
        perm = (2, 0, 3, 1)
        s = encoder.encode_document(Document("d", 0, sentences), params)
        s_perm = encoder.encode_document(
            Document("d", 0, tuple(sentences[i] for i in perm)), params)
        assert np.array_equal(s_perm.values, s.values[list(perm)])

    def test_shared_parameter_gradients_accumulate(self, params):
        doc = Document("d", 0, ((1, 2), (1, 2)))
        single = Document("d", 0, ((1, 2),))
        with ad.Tape() as tape:
            loss = ad.sum_all(encoder.encode_document(doc, params))
        ad.backward(tape, loss)
        double_grad = params.embedding.grad.copy()
        ad.zero_grads(params.named_tensors())
        with ad.Tape() as tape:
            loss = ad.sum_all(encoder.encode_document(single, params))
        ad.backward(tape, loss)
        assert np.allclose(double_grad, 2.0 * params.embedding.grad, atol=1e-12)
