"""Language model contracts: encoding, objectives, training, framing."""

import numpy as np
import pytest

from draftkit import lm
from draftkit import store
from draftkit import tensor as T
from draftkit.errors import InvalidArgumentError, SequenceLengthError
from draftkit.optim import grad_check
from draftkit.vocab import SPECIAL_TOKENS, Vocab


@pytest.fixture()
def vocab():
    return Vocab(list(SPECIAL_TOKENS) + list("abcd"))


@pytest.fixture()
def model(vocab):
    return lm.LmModel(vocab, d=16, n_layers=1, n_heads=2, l_max=16, seed=3)


class TestEncode:
    def test_single_token_shape_and_finite(self, model, vocab):
        h = model.encode(vocab.encode(["a"]))
        assert h.shape == (1, 16)
        assert np.all(np.isfinite(h.data))

    def test_causality(self, model, vocab):
        base = model.encode(vocab.encode(list("abcd"))).data
        perturbed = model.encode(vocab.encode(list("abdd"))).data
        np.testing.assert_array_equal(base[:2], perturbed[:2])
        assert not np.array_equal(base[2], perturbed[2])

    def test_suffix_truncation_preserves_prefix_rows(self, model, vocab):
        # Equality up to 1e-12: different sequence lengths may take different
        # BLAS kernel paths, so cross-length runs agree only to rounding.
        ids = vocab.encode(list("abcd"))
        full = model.encode(ids).data
        for j in range(1, len(ids)):
            head = model.encode(ids[:j]).data
            np.testing.assert_allclose(full[:j], head, rtol=0, atol=1e-12)

    def test_deterministic(self, model, vocab):
        ids = vocab.encode(list("abc"))
        assert np.array_equal(model.encode(ids).data, model.encode(ids).data)

    def test_overlong_rejected(self, model):
        with pytest.raises(SequenceLengthError):
            model.encode([0] * 17)

    def test_unknown_id_rejected(self, model, vocab):
        with pytest.raises(InvalidArgumentError):
            model.encode([len(vocab)])

    def test_empty_rejected(self, model):
        with pytest.raises(InvalidArgumentError):
            model.encode([])


class TestNextDist:
    def test_zero_projection_uniform(self, model, vocab):
        model.out_proj.data[:] = 0.0
        probs = model.next_dist(vocab.encode(["a"]))
        np.testing.assert_allclose(probs, 1.0 / len(vocab))

    def test_simplex(self, model, vocab):
        probs = model.next_dist(vocab.encode(list("abc")))
        assert np.all(probs >= 0)
        assert abs(probs.sum() - 1.0) < 1e-9

    def test_bigram_learned(self):
        corpus = [list("abababab")] * 40
        cfg = lm.TrainConfig(
            objective="mle", epochs=30, batch_size=8, seed=1,
            learning_rate=5e-3, d=16, n_layers=1, n_heads=2, l_max=16,
        )
        model = lm.train(corpus, cfg)
        probs = model.next_dist(model.vocab.encode(list("aba")))
        assert probs[model.vocab.index["b"]] > 0.9


class TestLossMle:
    def test_uniform_is_log_vocab(self, model, vocab):
        model.out_proj.data[:] = 0.0
        loss = lm.loss_mle(model, [vocab.encode(list("abc"))])
        assert abs(float(loss.data) - np.log(len(vocab))) < 1e-12

    def test_near_one_hot_model_near_zero_loss(self):
        # A model fit to a deterministic sequence drives the loss toward 0.
        cfg = lm.TrainConfig(
            objective="mle", epochs=60, batch_size=4, seed=5,
            learning_rate=5e-3, d=16, n_layers=1, n_heads=2, l_max=16,
        )
        trained = lm.train([list("ababab")] * 10, cfg)
        loss = lm.loss_mle(trained, [trained.vocab.encode(list("ababab"))])
        assert float(loss.data) < 0.05

    def test_matches_hand_rolled_log_prob_sum(self, model, vocab):
        ids = vocab.encode(list("abca"))
        loss = float(lm.loss_mle(model, [ids]).data)
        total = 0.0
        for t in range(1, len(ids)):
            probs = model.next_dist(ids[:t])
            total -= np.log(probs[ids[t]])
        assert abs(loss - total / (len(ids) - 1)) < 1e-10

    def test_batch_average(self, model, vocab):
        s1, s2 = vocab.encode(list("ab")), vocab.encode(list("dcba"))
        both = float(lm.loss_mle(model, [s1, s2]).data)
        separate = (
            float(lm.loss_mle(model, [s1]).data) + float(lm.loss_mle(model, [s2]).data)
        ) / 2
        assert abs(both - separate) < 1e-10

    def test_length_one_rejected(self, model, vocab):
        with pytest.raises(InvalidArgumentError):
            lm.loss_mle(model, [vocab.encode(["a"])])


class TestLossCl:
    def test_rho_zero_is_zero(self, model, vocab):
        loss = lm.loss_cl(model, [vocab.encode(list("abcd"))], rho=0.0)
        assert float(loss.data) == 0.0

    def test_identical_rows_give_rho(self, vocab):
        model = lm.LmModel(vocab, d=8, n_layers=1, n_heads=2, l_max=8, seed=2)
        rho = 0.7
        hidden = T.Tensor(np.tile([1.0, 2.0, 3.0, 4.0], (3, 1)))
        loss = lm._cl_from_hidden(
            [np.array([0, 1, 2])], T.reshape(hidden, (1, 3, 4)), rho
        )
        assert abs(float(loss.data) - rho) < 1e-12

    def test_orthogonal_rows_zero_at_half_margin(self, vocab):
        hidden = T.Tensor(np.eye(3))
        loss = lm._cl_from_hidden(
            [np.array([0, 1, 2])], T.reshape(hidden, (1, 3, 3)), 0.5
        )
        assert float(loss.data) == 0.0

    def test_nonnegative(self, model, vocab):
        for rho in (-1.0, -0.25, 0.3, 1.0):
            loss = lm.loss_cl(model, [vocab.encode(list("abca"))], rho)
            assert float(loss.data) >= 0.0

    def test_rho_range_enforced(self, model, vocab):
        with pytest.raises(InvalidArgumentError):
            lm.loss_cl(model, [vocab.encode(list("ab"))], rho=1.5)


class TestLossCombined:
    def test_rho_zero_equals_mle_bitwise(self, model, vocab):
        batch = [vocab.encode(list("abca")), vocab.encode(list("dcd"))]
        a = float(lm.loss_mle(model, batch).data)
        b = float(lm.loss_combined(model, batch, rho=0.0).data)
        assert a == b

    def test_equals_component_sum(self, model, vocab):
        batch = [vocab.encode(list("abcd"))]
        total = float(lm.loss_combined(model, batch, rho=0.6).data)
        parts = float(lm.loss_mle(model, batch).data) + float(
            lm.loss_cl(model, batch, 0.6).data
        )
        assert total == parts

    def test_gradient_matches_finite_differences(self, vocab):
        model = lm.LmModel(vocab, d=8, n_layers=1, n_heads=2, l_max=8, seed=9)
        batch = [vocab.encode(list("abca"))]
        err = grad_check(
            lambda: lm.loss_combined(model, batch, 0.5),
            model.params,
            h=1e-5,
            seed=4,
            max_coords_per_param=4,
        )
        assert err < 1e-4


class TestTrain:
    def test_loss_drops_on_repetitive_corpus(self):
        corpus = [list("abcd")] * 50
        cfg = lm.TrainConfig(
            objective="mle", epochs=40, batch_size=16, seed=2,
            learning_rate=5e-3, d=16, n_layers=1, n_heads=2, l_max=8,
        )
        model = lm.train(corpus, cfg)
        assert model.training_log["final_loss"] < 0.1
        assert model.training_log["final_loss"] <= model.training_log["initial_loss"]

    def test_deterministic_given_config(self, tmp_path):
        corpus = [list("abcab"), list("bca")] * 4
        cfg = lm.TrainConfig(
            objective="contrastive", rho=0.5, epochs=3, batch_size=4, seed=10,
            learning_rate=1e-3, d=16, n_layers=1, n_heads=2, l_max=8,
        )
        m1 = lm.train(corpus, cfg)
        m2 = lm.train(corpus, cfg)
        store.save(m1, tmp_path / "m1.efd")
        store.save(m2, tmp_path / "m2.efd")
        assert (tmp_path / "m1.efd").read_bytes() == (tmp_path / "m2.efd").read_bytes()

    def test_seed_changes_parameters(self):
        corpus = [list("abc")] * 4
        base = dict(
            objective="mle", epochs=1, batch_size=4,
            learning_rate=1e-3, d=16, n_layers=1, n_heads=2, l_max=8,
        )
        m1 = lm.train(corpus, lm.TrainConfig(seed=1, **base))
        m2 = lm.train(corpus, lm.TrainConfig(seed=2, **base))
        assert not np.array_equal(m1.out_proj.data, m2.out_proj.data)

    def test_empty_corpus_rejected(self):
        with pytest.raises(InvalidArgumentError):
            lm.train([], lm.TrainConfig())


class TestVocabFile:
    def test_round_trip(self, vocab, tmp_path):
        path = tmp_path / "vocab.txt"
        vocab.save(path)
        loaded = lm.Vocab.load(path)
        assert loaded.tokens == vocab.tokens
        assert loaded.specials == vocab.specials

    def test_header_required(self, tmp_path):
        path = tmp_path / "vocab.txt"
        path.write_text("just\ntokens\n", encoding="utf-8")
        with pytest.raises(InvalidArgumentError):
            lm.Vocab.load(path)


class TestConditionalFormat:
    def test_two_part_frame(self):
        out = lm.conditional_format((["t1", "t2"], ["s1"]), lm.FRAME_T_SEP_S_CLS)
        assert out == ["t1", "t2", "[SEP]", "s1", "[CLS]"]

    def test_prefix_frame(self):
        out = lm.conditional_format((["t1", "t2"],), lm.FRAME_PREFIX_SEP)
        assert out == ["t1", "t2", "[SEP]"]

    def test_round_trip(self):
        parts = (["a", "b"], ["c"])
        framed = lm.conditional_format(parts, lm.FRAME_T_SEP_S_CLS)
        assert lm.conditional_unformat(framed, lm.FRAME_T_SEP_S_CLS) == parts

    def test_specials_in_parts_rejected(self):
        with pytest.raises(InvalidArgumentError):
            lm.conditional_format((["a", "[SEP]"],), lm.FRAME_PREFIX_SEP)
