"""Gradient and graph-mechanics checks for the autodiff core."""

import numpy as np
import pytest

from seke import autodiff as ad
from seke import nn
from seke.errors import DegenerateRowError, ShapeError


def _fd_check(build, store, tol=1e-7):
    err = nn.grad_check(build, store, eps=1e-6)
    assert err < tol, f"max relative error {err}"


def _store_with(rng, **arrays):
    store = nn.ParamStore()
    for name, shape in arrays.items():
        store.register(name, rng.normal(0.0, 0.6, shape))
    return store


def test_matmul_add_grads(rng):
    store = _store_with(rng, w=(5, 4), b=(4,))
    x = rng.normal(0, 1, (3, 5))

    def f(s):
        lv = s.leaves()
        return ad.sum_all(ad.add(ad.matmul(ad.constant(x), lv["w"]), lv["b"]))

    _fd_check(f, store)


def test_matmul_shape_error(rng):
    a = ad.constant(rng.normal(0, 1, (3, 5)))
    b = ad.constant(rng.normal(0, 1, (4, 2)))
    with pytest.raises(ShapeError) as exc:
        ad.matmul(a, b)
    assert "(3, 5)" in str(exc.value) and "(4, 2)" in str(exc.value)


def test_mul_sub_broadcast_grads(rng):
    store = _store_with(rng, a=(4, 3), b=(3,))
    x = rng.normal(0, 1, (4, 3))

    def f(s):
        lv = s.leaves()
        y = ad.mul(lv["a"], ad.constant(x))
        return ad.sum_all(ad.sub(y, lv["b"]))

    _fd_check(f, store)


@pytest.mark.parametrize("op", [ad.relu, ad.sigmoid, ad.tanh, ad.softplus])
def test_elementwise_grads(rng, op):
    store = _store_with(rng, a=(6, 5))

    def f(s):
        return ad.sum_all(op(s.leaves()["a"]))

    # relu has kinks; random values stay away from 0 almost surely
    _fd_check(f, store, tol=1e-6)


def test_softmax_grad(rng):
    store = _store_with(rng, a=(5, 4), w=(4, 2))

    def f(s):
        lv = s.leaves()
        return ad.sum_all(ad.matmul(ad.row_softmax(lv["a"]), lv["w"]))

    _fd_check(f, store)


def test_softmax_neg_inf_exact_zero():
    x = ad.constant(np.array([[5.0, ad.NEG_INF, ad.NEG_INF]]))
    s = ad.row_softmax(x)
    assert s.value[0, 0] == 1.0
    assert s.value[0, 1] == 0.0 and s.value[0, 2] == 0.0


def test_softmax_degenerate_row():
    x = ad.constant(np.array([[ad.NEG_INF, ad.NEG_INF]]))
    with pytest.raises(DegenerateRowError):
        ad.row_softmax(x)


def test_mask_fill_blocks_gradient(rng):
    store = _store_with(rng, a=(3, 4))
    keep = np.array([[True, False, True, False]] * 3)

    def f(s):
        return ad.sum_all(ad.mask_fill(s.leaves()["a"], keep, 0.0))

    _fd_check(f, store)
    store.zero_grads()
    loss = f(store)
    ad.backward(loss)
    assert (store["a"].grad[:, 1] == 0).all() and (store["a"].grad[:, 3] == 0).all()


def test_indexing_grads(rng):
    store = _store_with(rng, a=(6, 4))
    idx = np.array([0, 2, 2, 5])

    def f(s):
        lv = s.leaves()
        g = ad.take_rows(lv["a"], idx)
        back = ad.scatter_rows(g, np.array([1, 3, 4, 0]), 6)
        elems = ad.take_elems(lv["a"], np.array([0, 1, 2]), np.array([3, 0, 1]))
        return ad.add(ad.sum_all(back), ad.sum_all(elems))

    _fd_check(f, store)


def test_slicing_and_concat_grads(rng):
    store = _store_with(rng, a=(5, 6))

    def f(s):
        a = s.leaves()["a"]
        left = ad.slice_cols(a, 0, 3)
        right = ad.slice_cols(a, 3, 6)
        rows = ad.slice_rows(a, 1, 4)
        joined = ad.concat_cols([right, left])
        stacked = ad.concat_rows([rows, rows])
        return ad.add(ad.sum_all(ad.tanh(joined)), ad.sum_all(ad.tanh(stacked)))

    _fd_check(f, store)


def test_layer_norm_grad(rng):
    store = _store_with(rng, x=(4, 6), g=(6,), b=(6,))

    def f(s):
        lv = s.leaves()
        return ad.sum_all(ad.tanh(ad.layer_norm(lv["x"], lv["g"], lv["b"])))

    _fd_check(f, store, tol=1e-6)


def test_cross_entropy_rows_grad(rng):
    store = _store_with(rng, logits=(6, 3))
    targets = rng.integers(0, 3, 6)
    mask = np.array([True, True, False, True, False, True])

    def f(s):
        return ad.cross_entropy_rows(s.leaves()["logits"], targets, mask)

    _fd_check(f, store)
    store.zero_grads()
    loss = f(store)
    ad.backward(loss)
    assert (store["logits"].grad[2] == 0).all()
    assert (store["logits"].grad[4] == 0).all()


def test_lstm_sequence_grad(rng):
    store = _store_with(rng, x=(8, 5), wi=(5, 12), wh=(3, 12), b=(12,))
    rows = np.arange(8).reshape(4, 2)  # T=4, two interleaved sequences

    def f(s):
        lv = s.leaves()
        out = ad.lstm_sequence(lv["x"], rows, lv["wi"], lv["wh"], lv["b"])
        return ad.sum_all(ad.tanh(out))

    _fd_check(f, store, tol=1e-6)


def test_diamond_fanout_gradient(rng):
    """Residual-style reuse of one node must accumulate both branches."""
    store = _store_with(rng, w=(3, 3))
    x = rng.normal(0, 1, (2, 3))

    def f(s):
        w = s.leaves()["w"]
        h = ad.matmul(ad.constant(x), w)
        y = ad.add(h, ad.tanh(ad.matmul(h, w)))
        return ad.sum_all(y)

    _fd_check(f, store)


def test_deep_chain_no_recursion_limit(rng):
    store = _store_with(rng, a=(1, 4))

    def f(s):
        v = s.leaves()["a"]
        for _ in range(3000):
            v = ad.scale(v, 1.0001)
        return ad.sum_all(v)

    loss = f(store)
    ad.backward(loss)
    assert store["a"].grad is not None


def test_dropout_mask_scaling(rng):
    x = ad.constant(np.ones((200, 50)))
    out = ad.dropout_mask(x, 0.5, np.random.default_rng(0))
    kept = out.value[out.value != 0]
    assert np.allclose(kept, 2.0)
