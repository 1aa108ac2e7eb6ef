"""Gating and dispatch contracts for the expert-mixture layer."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seke import autodiff as ad
from seke import moe, nn
from seke.autodiff import NEG_INF
from seke.errors import ConfigError


def _router(rng, d, n, dtype=np.float64):
    return moe.RouterParams(
        ad.constant(rng.normal(0, 0.6, (d, n)), dtype),
        ad.constant(rng.normal(0, 0.6, (d, n)), dtype),
    )


def _experts(rng, n, d, h, dtype=np.float64):
    return [
        moe.ExpertParams(
            ad.constant(rng.normal(0, 0.6, (d, h)), dtype),
            ad.constant(rng.normal(0, 0.6, (h, h)), dtype),
            ad.constant(rng.normal(0, 0.6, (h, d)), dtype),
        )
        for _ in range(n)
    ]


def _dense_reference(x, params, cfg):
    """All-experts weighted sum with masked softmax weights."""
    logits = x @ params.router.w_gate.value
    out = np.zeros_like(x)
    for t in range(x.shape[0]):
        row = logits[t]
        kept = np.argsort(-row, kind="stable")[: cfg.top_k]
        masked = np.full_like(row, NEG_INF)
        masked[kept] = row[kept]
        e = np.exp(masked - masked.max())
        weights = e / e.sum()
        for j in range(cfg.n_experts):
            if weights[j] == 0.0:
                continue
            h = np.maximum(x[t] @ params.experts[j].w1.value, 0.0)
            h = h @ params.experts[j].w2.value
            out[t] += weights[j] * (h @ params.experts[j].w3.value)
    return out


class TestConfig:
    def test_top_k_bounds(self):
        with pytest.raises(ConfigError):
            moe.MoEConfig(d_model=4, n_experts=2, top_k=3)

    def test_hidden_defaults_to_model_width(self):
        cfg = moe.MoEConfig(d_model=6, n_experts=2, top_k=1)
        assert cfg.d_hidden == 6


class TestGateLogits:
    def test_zero_gate_no_noise(self, rng):
        router = moe.RouterParams(
            ad.constant(np.zeros((4, 3))), ad.constant(rng.normal(0, 1, (4, 3)))
        )
        x = ad.constant(rng.normal(0, 1, (5, 4)))
        out = moe.gate_logits(x, router, None, training=False)
        assert np.allclose(out.value, 0.0)

    def test_large_negative_noise_rows_vanish(self, rng):
        router = moe.RouterParams(
            ad.constant(rng.normal(0, 1, (4, 3))),
            ad.constant(np.full((4, 3), -40.0)),
        )
        xv = np.abs(rng.normal(1, 0.2, (5, 4)))  # keep x @ W_noise very negative
        x = ad.constant(xv)
        noisy = moe.gate_logits(x, router, np.random.default_rng(0), training=True)
        clean = xv @ router.w_gate.value
        assert np.abs(noisy.value - clean).max() < 1e-9

    def test_noise_std_matches_softplus_scale(self):
        """Sample std of the injected noise tracks softplus(x W_noise)."""
        d, n, t = 3, 4, 100_000
        rng = np.random.default_rng(5)
        xv = np.tile(rng.normal(0, 1, (1, d)), (t, 1))
        router = _router(rng, d, n)
        x = ad.constant(xv)
        noisy = moe.gate_logits(x, router, np.random.default_rng(99), training=True)
        clean = xv @ router.w_gate.value
        expected = np.log1p(np.exp(xv[0] @ router.w_noise.value))
        sample_std = (noisy.value - clean).std(axis=0, ddof=1)
        assert (np.abs(sample_std - expected) / expected).max() < 0.05

    def test_no_noise_at_inference(self, rng):
        router = _router(rng, 4, 3)
        x = ad.constant(rng.normal(0, 1, (5, 4)))
        a = moe.gate_logits(x, router, np.random.default_rng(0), training=False)
        b = moe.gate_logits(x, router, np.random.default_rng(1), training=False)
        assert np.array_equal(a.value, b.value)


class TestKeepTopK:
    def test_basic(self):
        out = moe.keep_top_k(ad.constant(np.array([[0.1, 0.9, 0.5]])), 2)
        assert out.value[0, 0] == NEG_INF
        assert out.value[0, 1] == 0.9 and out.value[0, 2] == 0.5

    def test_k_equals_n_identity(self, rng):
        xv = rng.normal(0, 1, (4, 5))
        out = moe.keep_top_k(ad.constant(xv), 5)
        assert np.array_equal(out.value, xv)

    def test_tie_breaks_to_lower_index(self):
        out = moe.keep_top_k(ad.constant(np.array([[1.0, 1.0, 0.0]])), 1)
        assert out.value[0, 0] == 1.0
        assert out.value[0, 1] == NEG_INF and out.value[0, 2] == NEG_INF

    def test_k_out_of_range(self):
        with pytest.raises(ConfigError):
            moe.keep_top_k(ad.constant(np.zeros((1, 3))), 4)


class TestGate:
    def _decide(self, logits, n, k):
        d = 3
        w = np.zeros((d, n))
        w[0] = logits
        router = moe.RouterParams(ad.constant(w), ad.constant(np.zeros((d, n))))
        cfg = moe.MoEConfig(d_model=d, n_experts=n, top_k=k, noise_enabled_training=False)
        x = ad.constant(np.eye(1, d))  # picks out the first row of w_gate
        return moe.gate(x, router, cfg, None, training=False)[0]

    def test_single_survivor(self):
        d = self._decide([1.0, 3.0], 2, 1)
        assert d.indices == [1]
        assert np.allclose(d.weights, [1.0])

    def test_two_survivors_closed_form(self):
        d = self._decide([0.0, np.log(2.0), -5.0], 3, 2)
        assert sorted(d.indices) == [0, 1]
        w = dict(zip(d.indices, d.weights))
        assert abs(w[1] - 2.0 / 3.0) < 1e-9 and abs(w[0] - 1.0 / 3.0) < 1e-9

    def test_equal_logits_uniform(self):
        d = self._decide([0.0, 0.0, 0.0, 0.0], 4, 4)
        assert np.allclose(d.weights, 0.25)
        assert d.indices == [0, 1, 2, 3]


class TestExpertForward:
    def test_zero_weights_zero_output(self, rng):
        e = moe.ExpertParams(
            ad.constant(np.zeros((4, 4))),
            ad.constant(np.zeros((4, 4))),
            ad.constant(np.zeros((4, 4))),
        )
        out = moe.expert_forward(ad.constant(rng.normal(0, 1, (3, 4))), e)
        assert np.allclose(out.value, 0.0)

    def test_identity_weights_on_nonnegative_input(self, rng):
        eye = np.eye(4)
        e = moe.ExpertParams(ad.constant(eye), ad.constant(eye), ad.constant(eye))
        xv = np.abs(rng.normal(0, 1, (3, 4)))
        out = moe.expert_forward(ad.constant(xv), e)
        assert np.allclose(out.value, xv)

    def test_matches_straight_line_reference(self, rng):
        e = _experts(rng, 1, 5, 7)[0]
        xv = rng.normal(0, 1, (6, 5))
        out = moe.expert_forward(ad.constant(xv), e)
        ref = np.maximum(xv @ e.w1.value, 0.0) @ e.w2.value @ e.w3.value
        assert np.abs(out.value - ref).max() < 1e-6


class TestMoEForward:
    def _params(self, rng, d, n, h=None):
        return moe.MoEParams(_router(rng, d, n), _experts(rng, n, d, h or d))

    def test_k1_equals_selected_expert(self, rng):
        d, n = 4, 3
        params = self._params(rng, d, n)
        cfg = moe.MoEConfig(d_model=d, n_experts=n, top_k=1, noise_enabled_training=False)
        xv = rng.normal(0, 1, (5, d))
        y, decisions = moe.moe_forward(ad.constant(xv), params, cfg)
        for t, dec in enumerate(decisions):
            e = dec.indices[0]
            ref = moe.expert_forward(ad.constant(xv[t : t + 1]), params.experts[e])
            assert np.abs(y.value[t] - ref.value[0]).max() < 1e-9

    def test_identical_experts_convexity(self, rng):
        d, n = 4, 3
        shared = _experts(rng, 1, d, d)[0]
        params = moe.MoEParams(_router(rng, d, n), [shared] * n)
        cfg = moe.MoEConfig(d_model=d, n_experts=n, top_k=n, noise_enabled_training=False)
        xv = rng.normal(0, 1, (5, d))
        y, _ = moe.moe_forward(ad.constant(xv), params, cfg)
        ref = moe.expert_forward(ad.constant(xv), shared)
        assert np.abs(y.value - ref.value).max() < 1e-9

    def test_sparse_equals_dense_reference(self, rng):
        d, n, k = 6, 4, 2
        params = self._params(rng, d, n)
        cfg = moe.MoEConfig(d_model=d, n_experts=n, top_k=k, noise_enabled_training=False)
        xv = rng.normal(0, 1, (5, d))
        y, _ = moe.moe_forward(ad.constant(xv), params, cfg)
        assert np.abs(y.value - _dense_reference(xv, params, cfg)).max() < 1e-6

    @settings(max_examples=60)
    @given(
        seed=st.integers(0, 10_000),
        n=st.integers(1, 6),
        t=st.integers(1, 8),
        d=st.integers(2, 6),
    )
    def test_gate_invariants_random(self, seed, n, t, d):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(1, n + 1))
        params = moe.MoEParams(_router(rng, d, n), _experts(rng, n, d, d))
        cfg = moe.MoEConfig(d_model=d, n_experts=n, top_k=k, noise_enabled_training=False)
        xv = rng.normal(0, 1, (t, d))
        y, decisions = moe.moe_forward(ad.constant(xv), params, cfg)
        probs = nn.softmax(
            moe.keep_top_k(ad.constant(xv @ params.router.w_gate.value), k)
        ).value
        for dec in decisions:
            assert abs(sum(dec.weights) - 1.0) < 1e-6
            assert len(set(dec.indices)) == k
            assert (probs[dec.token_index] == 0).sum() == n - k
        assert np.abs(y.value - _dense_reference(xv, params, cfg)).max() < 1e-6

    def test_permutation_equivariance(self, rng):
        d, n, k = 5, 4, 2
        params = self._params(rng, d, n)
        cfg = moe.MoEConfig(d_model=d, n_experts=n, top_k=k, noise_enabled_training=False)
        xv = rng.normal(0, 1, (7, d))
        y1, dec1 = moe.moe_forward(ad.constant(xv), params, cfg)
        perm = np.array([2, 0, 3, 1])
        permuted = moe.MoEParams(
            moe.RouterParams(
                ad.constant(params.router.w_gate.value[:, perm]),
                ad.constant(params.router.w_noise.value[:, perm]),
            ),
            [params.experts[e] for e in perm],
        )
        y2, dec2 = moe.moe_forward(ad.constant(xv), permuted, cfg)
        assert np.abs(y1.value - y2.value).max() < 1e-9
        inverse = np.argsort(perm)
        for a, b in zip(dec1, dec2):
            assert [int(inverse[i]) for i in a.indices] == b.indices

    def test_inference_determinism(self, rng):
        d, n = 4, 3
        params = self._params(rng, d, n)
        cfg = moe.MoEConfig(d_model=d, n_experts=n, top_k=2)
        xv = rng.normal(0, 1, (5, d))
        y1, d1 = moe.moe_forward(ad.constant(xv), params, cfg, np.random.default_rng(0), False)
        y2, d2 = moe.moe_forward(ad.constant(xv), params, cfg, np.random.default_rng(9), False)
        assert np.array_equal(y1.value, y2.value)
        assert all(a.indices == b.indices for a, b in zip(d1, d2))

    def test_gradcheck_through_dispatch(self, rng):
        d, n, k = 4, 3, 2
        store = nn.ParamStore()
        init = np.random.default_rng(3)
        cfg = moe.MoEConfig(
            d_model=d, n_experts=n, top_k=k, d_hidden=4, noise_enabled_training=False
        )
        moe.init_moe_params(store, "moe", cfg, init, dtype=np.float64)
        xv = init.normal(0, 1, (5, d))

        def f(s):
            params = moe.bind_moe_params(s.leaves(), "moe", cfg)
            y, _ = moe.moe_forward(ad.constant(xv), params, cfg)
            return ad.sum_all(ad.tanh(y))

        assert nn.grad_check(f, store, eps=1e-6) < 1e-5
