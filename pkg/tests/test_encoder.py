"""Encoder forward contracts, pooling, gradients, and checkpointing."""

import numpy as np
import pytest

from fdcheck import check_grads

from melbert import autodiff as ad
from melbert.autodiff import Tape, Tensor
from melbert.bpe import train_bpe
from melbert.checkpoint import load_checkpoint, save_checkpoint
from melbert.data import Instance
from melbert.encoder import Encoder, EncoderConfig, pool_span
from melbert.errors import ConfigError, ContractError, FormatError, VocabError
from melbert.inputs import SentenceInput, TargetInput, build_sentence_input, build_target_input
from melbert.rng import Rng


@pytest.fixture(scope="module")
def vocab():
    return train_bpe(["the cat sat on the mat", "the dog ran to the cat"], vocab_size=120)


def small_cfg(vocab, **kw):
    defaults = dict(vocab_size=len(vocab), num_layers=2, num_heads=2, hidden_dim=16, ffn_dim=32)
    defaults.update(kw)
    return EncoderConfig(**defaults)


def sentence_input(vocab, tokens=("the", "cat", "sat"), target=1):
    inst = Instance("s", tuple(tokens), target, 0.0, "NOUN")
    return build_sentence_input(inst, vocab)


class TestConfig:
    """Constructor validation."""

    def test_head_divisibility(self):
        with pytest.raises(ConfigError):
            EncoderConfig(vocab_size=10, hidden_dim=10, num_heads=3)

    def test_dropout_range(self):
        with pytest.raises(ConfigError):
            EncoderConfig(vocab_size=10, dropout=1.0)

    def test_round_trip_dict(self):
        cfg = EncoderConfig(vocab_size=50, num_layers=1)
        assert EncoderConfig.from_dict(cfg.to_dict()) == cfg


class TestInit:
    """Parameter initialization policy."""

    def test_truncated_normal_bounds(self, vocab):
        cfg = small_cfg(vocab, init_std=0.02)
        enc = Encoder(cfg, Rng(0, "init"))
        w = enc.params["layer0.attn.q.w"].data
        assert np.abs(w).max() <= 2 * 0.02 + 1e-12
        assert w.std() > 0.005  # actually random, not degenerate

    def test_layer_norm_identity_init(self, vocab):
        enc = Encoder(small_cfg(vocab), Rng(0, "init"))
        np.testing.assert_array_equal(enc.params["layer0.ln1.g"].data, np.ones(16))
        np.testing.assert_array_equal(enc.params["layer0.ln1.b"].data, np.zeros(16))

    def test_biases_zero(self, vocab):
        enc = Encoder(small_cfg(vocab), Rng(0, "init"))
        np.testing.assert_array_equal(enc.params["layer0.attn.q.b"].data, np.zeros(16))

    def test_same_seed_same_params(self, vocab):
        a = Encoder(small_cfg(vocab), Rng(5, "init"))
        b = Encoder(small_cfg(vocab), Rng(5, "init"))
        for k in a.params:
            assert a.params[k].data.tobytes() == b.params[k].data.tobytes()


class TestForward:
    """Output shapes, determinism, attention rows, input kinds."""

    def test_output_shapes(self, vocab):
        enc = Encoder(small_cfg(vocab), Rng(0, "init"))
        inp = sentence_input(vocab)
        out = enc.encode(inp)
        L = len(inp.ids)
        assert out.positions.shape == (L, 16)
        assert out.cls.shape == (16,)
        np.testing.assert_array_equal(out.cls.data, out.positions.data[0])

    def test_eval_deterministic_bitwise(self, vocab):
        enc = Encoder(small_cfg(vocab), Rng(1, "init"))
        inp = sentence_input(vocab)
        a = enc.encode(inp).positions.data
        b = enc.encode(inp).positions.data
        assert a.tobytes() == b.tobytes()

    def test_train_mode_dropout_differs(self, vocab):
        enc = Encoder(small_cfg(vocab), Rng(1, "init"))
        inp = sentence_input(vocab)
        rng = Rng(3, "drop")
        a = enc.encode(inp, mode="train", rng=rng).positions.data
        b = enc.encode(inp, mode="train", rng=rng).positions.data
        assert a.tobytes() != b.tobytes()

    def test_zero_dropout_train_equals_eval(self, vocab):
        enc = Encoder(small_cfg(vocab, dropout=0.0), Rng(1, "init"))
        inp = sentence_input(vocab)
        a = enc.encode(inp, mode="train", rng=Rng(0)).positions.data
        b = enc.encode(inp, mode="eval").positions.data
        assert a.tobytes() == b.tobytes()

    def test_attention_rows_are_distributions(self, vocab):
        enc = Encoder(small_cfg(vocab), Rng(2, "init"))
        out = enc.encode(sentence_input(vocab), keep_attention=True)
        assert len(out.attentions) == 2  # one per layer
        for a in out.attentions:
            assert a.shape[0] == 2  # heads
            assert (a >= 0).all()
            np.testing.assert_allclose(a.sum(axis=-1), np.ones(a.shape[:2]), atol=1e-6)

    def test_target_input_ignores_position_and_segment_tables(self, vocab):
        enc = Encoder(small_cfg(vocab), Rng(4, "init"))
        inst = Instance("s", ("the", "cat"), 1, 0.0, "NOUN")
        tgt = build_target_input(inst, vocab)
        sent = build_sentence_input(inst, vocab)
        t_before = enc.encode(tgt).positions.data.copy()
        s_before = enc.encode(sent).positions.data.copy()
        enc.params["emb.pos"].data += 7.0
        enc.params["emb.seg"].data -= 3.0
        assert enc.encode(tgt).positions.data.tobytes() == t_before.tobytes()
        assert enc.encode(sent).positions.data.tobytes() != s_before.tobytes()

    def test_length_overflow(self, vocab):
        enc = Encoder(small_cfg(vocab, max_positions=4), Rng(0, "init"))
        with pytest.raises(ContractError):
            enc.encode(sentence_input(vocab, tokens=("the", "cat", "sat", "on", "mat"), target=1))

    def test_id_out_of_range(self, vocab):
        enc = Encoder(small_cfg(vocab), Rng(0, "init"))
        bad = TargetInput(ids=(2, len(vocab) + 10, 3), target_span=(1, 2))
        with pytest.raises(VocabError):
            enc.encode(bad)

    def test_bad_mode(self, vocab):
        enc = Encoder(small_cfg(vocab), Rng(0, "init"))
        with pytest.raises(ContractError):
            enc.encode(sentence_input(vocab), mode="test")

    def test_train_without_rng(self, vocab):
        enc = Encoder(small_cfg(vocab), Rng(0, "init"))
        with pytest.raises(ContractError):
            enc.encode(sentence_input(vocab), mode="train")


class TestPooling:
    """Span mean pooling and the cls alternative."""

    def test_mean_matches_hand_average(self, vocab):
        enc = Encoder(small_cfg(vocab), Rng(6, "init"))
        inp = sentence_input(vocab, tokens=("the", "big", "cat", "sat"), target=2)
        out = enc.encode(inp)
        s, e = inp.target_span
        got = pool_span(out, (s, e)).data
        want = out.positions.data[s:e].mean(axis=0)
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_cls_pooling_returns_cls(self, vocab):
        enc = Encoder(small_cfg(vocab), Rng(6, "init"))
        out = enc.encode(sentence_input(vocab))
        np.testing.assert_array_equal(pool_span(out, (1, 2), pooling="cls").data, out.cls.data)

    def test_empty_span_rejected(self, vocab):
        enc = Encoder(small_cfg(vocab), Rng(6, "init"))
        out = enc.encode(sentence_input(vocab))
        with pytest.raises(ContractError):
            pool_span(out, (2, 2))
        with pytest.raises(ContractError):
            pool_span(out, (1, 99))


class TestEncoderGradients:
    """Full-encoder finite-difference check (1 layer, eval mode)."""

    def test_gradients_match_central_differences(self, vocab):
        cfg = small_cfg(vocab, num_layers=1, hidden_dim=8, ffn_dim=16, dropout=0.0)
        enc = Encoder(cfg, Rng(8, "init"))
        inp = sentence_input(vocab)
        names = sorted(enc.params)
        arrays = [enc.params[n].data.copy() for n in names]
        proj = np.random.default_rng(0).standard_normal((len(inp.ids), 8))

        def build(*tensors):
            for n, t in zip(names, tensors):
                enc.params[n] = t
            out = enc.encode(inp)
            return ad.tsum(ad.mul(out.positions, Tensor(proj)))

        check_grads(build, arrays, n_probes=60, rng=np.random.default_rng(9))


class TestCheckpointFile:
    """The binary container format."""

    def test_round_trip_values(self, tmp_path):
        arrays = {
            "a.w": np.arange(6.0).reshape(2, 3),
            "b": np.array(3.5),  # scalar block
        }
        meta = {"kind": "test", "n": 2}
        path = tmp_path / "ck.bin"
        save_checkpoint(path, meta, arrays)
        meta2, arrays2 = load_checkpoint(path)
        assert meta2 == meta
        assert set(arrays2) == set(arrays)
        for k in arrays:
            assert arrays2[k].tobytes() == arrays[k].tobytes()
            assert arrays2[k].shape == arrays[k].shape

    def test_save_load_save_bit_exact(self, tmp_path):
        rng = np.random.default_rng(5)
        arrays = {f"p{i}": rng.standard_normal((3, 4)) for i in range(4)}
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        save_checkpoint(p1, {"v": 1}, arrays)
        meta, loaded = load_checkpoint(p1)
        save_checkpoint(p2, meta, loaded)
        assert p1.read_bytes() == p2.read_bytes()

    def test_header_checked(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"not a checkpoint")
        with pytest.raises(FormatError):
            load_checkpoint(path)

    def test_truncated_block_rejected(self, tmp_path):
        path = tmp_path / "ck.bin"
        save_checkpoint(path, {}, {"w": np.ones((4, 4))})
        path.write_bytes(path.read_bytes()[:-40])
        with pytest.raises(FormatError):
            load_checkpoint(path)

    def test_encoder_restore_reproduces_outputs(self, vocab, tmp_path):
        cfg = small_cfg(vocab)
        enc = Encoder(cfg, Rng(11, "init"))
        inp = sentence_input(vocab)
        want = enc.encode(inp).positions.data.copy()
        path = tmp_path / "enc.bin"
        save_checkpoint(path, {"kind": "encoder", **cfg.to_dict()},
                        {k: t.data for k, t in enc.params.items()})
        meta, arrays = load_checkpoint(path)
        enc2 = Encoder(EncoderConfig.from_dict({k: meta[k] for k in cfg.to_dict()}), Rng(99, "other"))
        enc2.load_arrays(arrays)
        got = enc2.encode(inp).positions.data
        assert got.tobytes() == want.tobytes()
