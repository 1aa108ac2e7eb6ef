"""Backbone contracts: LoRA algebra, transformer encoding, padding
isolation, static embeddings, freeze policy."""

import numpy as np
import pytest

from seke import autodiff as ad
from seke import backbone as bb
from seke import nn
from seke.errors import ConfigError, DataError


def _transformer(rng, vocab_size=12, **overrides):
    defaults = dict(
        d_model=8, num_layers=1, num_heads=2, d_ff=16, max_len=10,
        lora_rank=2, lora_alpha=2.0, lora_dropout_p=0.0,
    )
    defaults.update(overrides)
    cfg = bb.ToyTransformerConfig(**defaults)
    store = nn.ParamStore()
    bb.init_transformer_params(store, "backbone", cfg, vocab_size, rng, np.float64)
    return cfg, store


class TestLoraApply:
    def _adapter(self, rng, d, r, alpha, zero_b=True):
        b = np.zeros((d, r)) if zero_b else rng.normal(0, 0.3, (d, r))
        return bb.LoRAAdapter(
            ad.constant(rng.normal(0, 0.3, (r, d))), ad.constant(b), r, alpha
        )

    def test_zero_b_identity(self, rng):
        w = ad.constant(rng.normal(0, 1, (6, 6)))
        lora = self._adapter(rng, 6, 2, 16.0)
        assert np.array_equal(bb.lora_apply(w, lora).value, w.value)

    def test_zero_alpha_identity(self, rng):
        w = ad.constant(rng.normal(0, 1, (6, 6)))
        lora = self._adapter(rng, 6, 2, 0.0, zero_b=False)
        assert np.allclose(bb.lora_apply(w, lora).value, w.value)

    def test_rank_one_unit_perturbation(self):
        d = 4
        w = ad.constant(np.zeros((d, d)))
        a = np.zeros((1, d))
        a[0, 0] = 1.0
        b = np.zeros((d, 1))
        b[0, 0] = 1.0
        lora = bb.LoRAAdapter(ad.constant(a), ad.constant(b), 1, 1.0)
        out = bb.lora_apply(w, lora).value
        expected = np.zeros((d, d))
        expected[0, 0] = 1.0
        assert np.array_equal(out, expected)

    def test_rank_exceeding_dim_rejected(self, rng):
        w = ad.constant(np.zeros((2, 2)))
        lora = bb.LoRAAdapter(
            ad.constant(np.zeros((5, 2))), ad.constant(np.zeros((2, 5))), 5, 1.0
        )
        with pytest.raises(ConfigError):
            bb.lora_apply(w, lora)

    def test_scaling_convention(self, rng):
        """Effective delta is (alpha / r) * B A."""
        d, r, alpha = 4, 2, 6.0
        w = ad.constant(np.zeros((d, d)))
        a = rng.normal(0, 1, (r, d))
        b = rng.normal(0, 1, (d, r))
        lora = bb.LoRAAdapter(ad.constant(a), ad.constant(b), r, alpha)
        assert np.allclose(bb.lora_apply(w, lora).value, (alpha / r) * (b @ a))


class TestTransformerEncode:
    def test_single_token_attention_is_self_only(self, rng):
        """With one token the attention distribution is a point mass, so the
        output is invariant to the query/key projections."""
        cfg, store = _transformer(rng)
        ids = np.array([3])
        out1 = bb.transformer_encode(ids, cfg, store.leaves(), "backbone")
        store["backbone.l0.attn.wq"].value[...] = rng.normal(0, 1, (8, 8))
        store["backbone.l0.attn.wk"].value[...] = rng.normal(0, 1, (8, 8))
        out2 = bb.transformer_encode(ids, cfg, store.leaves(), "backbone")
        assert np.abs(out1.value - out2.value).max() < 1e-12

    def test_zero_lora_matches_adapter_free(self, rng):
        cfg, store = _transformer(rng)
        ids = np.array([2, 3, 4, 5])
        with_adapters = bb.transformer_encode(ids, cfg, store.leaves(), "backbone")
        zeroed = bb.ToyTransformerConfig(
            d_model=8, num_layers=1, num_heads=2, d_ff=16, max_len=10,
            lora_rank=2, lora_alpha=0.0, lora_dropout_p=0.0,
        )
        without = bb.transformer_encode(ids, zeroed, store.leaves(), "backbone")
        assert np.abs(with_adapters.value - without.value).max() < 1e-7

    def test_unknown_ids_never_error(self, rng):
        cfg, store = _transformer(rng, vocab_size=5)
        out = bb.transformer_encode(np.array([1, 1, 1]), cfg, store.leaves(), "backbone")
        assert np.isfinite(out.value).all()

    def test_padding_isolated_from_real_tokens(self, rng):
        """Rows of a padded batch match the same document encoded alone."""
        cfg, store = _transformer(rng)
        ids_solo = np.array([2, 3, 4])
        solo = bb.transformer_encode(ids_solo, cfg, store.leaves(), "backbone")
        grid = np.zeros((2, 5), dtype=np.intp)
        grid[0, :3] = ids_solo
        grid[1] = [5, 6, 7, 8, 9]
        batched = bb.transformer_encode_grid(
            grid, [3, 5], cfg, store.leaves(), "backbone"
        )
        assert np.abs(batched.value[:3] - solo.value).max() < 1e-9

    def test_exceeding_max_len_rejected(self, rng):
        cfg, store = _transformer(rng, max_len=4)
        with pytest.raises(ConfigError):
            bb.transformer_encode(np.arange(5), cfg, store.leaves(), "backbone")

    def test_gradcheck_one_layer(self, rng):
        cfg, store = _transformer(rng)
        # nonzero LoRA B so the adapter path carries gradient both ways
        store["backbone.l0.attn.lora_q.b"].value[...] = rng.normal(0, 0.2, (8, 2))
        store["backbone.l0.attn.lora_v.b"].value[...] = rng.normal(0, 0.2, (8, 2))
        ids = np.array([2, 5, 7])

        def f(s):
            out = bb.transformer_encode(ids, cfg, s.leaves(), "backbone")
            return ad.sum_all(ad.tanh(out))

        assert nn.grad_check(f, store, eps=1e-5) < 1e-4


class TestVocab:
    def test_build_and_encode(self):
        vocab = bb.Vocab.build([["Deep", "learning"], ["deep", "nets"]])
        assert vocab.size == 5  # pad, unk, deep, learning, nets
        ids = vocab.encode(["DEEP", "unseen"])
        assert ids[0] >= 2 and ids[1] == bb.UNK_ID


class TestStaticEmbeddings:
    def _write_table(self, tmp_path, lines):
        path = tmp_path / "emb.txt"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    def test_lookup_and_unknowns(self, tmp_path):
        path = self._write_table(
            tmp_path, ["2 3", "alpha 1 2 3", "beta 0.5 0.25 0"]
        )
        table = bb.load_embedding_table(path)
        out = bb.static_encode(["Alpha", "gamma", "alpha"], table)
        assert np.allclose(out[0], [1, 2, 3])
        assert np.allclose(out[1], 0.0)
        assert np.array_equal(out[0], out[2])

    def test_malformed_line_reports_number(self, tmp_path):
        path = self._write_table(tmp_path, ["2 3", "alpha 1 2 3", "beta 1 2"])
        with pytest.raises(DataError) as exc:
            bb.load_embedding_table(path)
        assert ":3:" in str(exc.value)

    def test_bad_header(self, tmp_path):
        path = self._write_table(tmp_path, ["3", "alpha 1 2 3"])
        with pytest.raises(DataError) as exc:
            bb.load_embedding_table(path)
        assert ":1:" in str(exc.value)

    def test_count_mismatch(self, tmp_path):
        path = self._write_table(tmp_path, ["3 2", "alpha 1 2"])
        with pytest.raises(DataError):
            bb.load_embedding_table(path)


class TestFreezePolicy:
    def _store(self, rng):
        cfg, store = _transformer(rng)
        from seke import moe, recurrent

        moe.init_moe_params(
            store, "moe", moe.MoEConfig(d_model=8, n_experts=2, top_k=1), rng
        )
        recurrent.init_encoder_params(
            store, "encoder", recurrent.EncoderConfig(d_model=8), rng
        )
        store.register("classifier.w", rng.normal(0, 0.1, (8, 3)))
        store.register("classifier.b", np.zeros(3))
        return store

    def test_lora_mode_freezes_base_projections(self, rng):
        store = self._store(rng)
        bb.freeze_policy(store, "lora")
        assert not store["backbone.l0.attn.wq"].trainable
        assert not store["backbone.l0.attn.wv"].trainable
        assert not store["backbone.tok_emb"].trainable
        assert store["backbone.l0.attn.lora_q.a"].trainable
        assert store["backbone.l0.attn.lora_v.b"].trainable

    def test_lora_mode_trains_head(self, rng):
        store = self._store(rng)
        bb.freeze_policy(store, "lora")
        for name in ("moe.gate.w", "encoder.l0.fwd.w_ih", "classifier.w"):
            assert store[name].trainable

    def test_frozen_mode_head_only(self, rng):
        store = self._store(rng)
        bb.freeze_policy(store, "frozen")
        assert not store["backbone.l0.attn.lora_q.a"].trainable
        assert store["classifier.w"].trainable

    def test_full_mode_everything(self, rng):
        store = self._store(rng)
        bb.freeze_policy(store, "full")
        assert all(p.trainable for _, p in store.items())

    def test_unknown_mode(self, rng):
        with pytest.raises(ConfigError):
            bb.freeze_policy(self._store(rng), "half")

    def test_frozen_params_bit_identical_across_step(self, rng):
        store = self._store(rng)
        bb.freeze_policy(store, "frozen")
        before = {
            name: p.value.copy() for name, p in store.items() if not p.trainable
        }
        for _, p in store.items():
            p.grad[...] = rng.normal(0, 1, p.grad.shape)
        nn.adam_step(store, nn.AdamState(lr=0.5))
        for name, old in before.items():
            assert np.array_equal(store[name].value, old)
