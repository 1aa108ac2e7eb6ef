"""Reverse-mode differentiation over numpy arrays, limited to the ops this
model family needs (dense algebra, gating softmax, dispatch gathers, LSTM).

A ``Var`` wraps one ndarray plus its accumulated gradient. Ops build a DAG;
``backward`` runs an iterative topological sweep (sequences are long enough
that recursion would overflow). Dtype follows the inputs: float32 for
training, float64 when a caller wants tight finite-difference agreement.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateRowError, ShapeError

NEG_INF = -np.inf


class Var:
    __slots__ = ("value", "grad", "_parents", "_backward")

    def __init__(self, value, parents=(), backward=None):
        self.value = value
        self.grad = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.value.shape

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Var(shape={self.value.shape}, dtype={self.value.dtype})"


def constant(x, dtype=None) -> Var:
    """Leaf with no gradient sinks (inputs, frozen embeddings)."""
    return Var(np.asarray(x, dtype=dtype))


def _accum(node: Var, g: np.ndarray) -> None:
    if node.grad is None:
        node.grad = np.zeros_like(node.value)
    node.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def backward(root: Var) -> None:
    """Accumulate d(root)/d(leaf) into every reachable Var's .grad."""
    # iterative post-order; nodes are marked visited at first pop (not at
    # push) so fan-out diamonds still emit producers after all consumers
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, emitted = stack.pop()
        if emitted:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    root.grad = np.ones_like(root.value)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------- arithmetic


def add(a: Var, b: Var) -> Var:
    out = Var(a.value + b.value, (a, b))

    def bwd(g):
        _accum(a, _unbroadcast(g, a.value.shape))
        _accum(b, _unbroadcast(g, b.value.shape))

    out._backward = bwd
    return out


def sub(a: Var, b: Var) -> Var:
    out = Var(a.value - b.value, (a, b))

    def bwd(g):
        _accum(a, _unbroadcast(g, a.value.shape))
        _accum(b, _unbroadcast(-g, b.value.shape))

    out._backward = bwd
    return out


def mul(a: Var, b: Var) -> Var:
    out = Var(a.value * b.value, (a, b))

    def bwd(g):
        _accum(a, _unbroadcast(g * b.value, a.value.shape))
        _accum(b, _unbroadcast(g * a.value, b.value.shape))

    out._backward = bwd
    return out


def scale(a: Var, s: float) -> Var:
    out = Var(a.value * s, (a,))
    out._backward = lambda g: _accum(a, g * s)
    return out


def mul_const(a: Var, c: np.ndarray) -> Var:
    """Elementwise product with a non-differentiable array (noise draws)."""
    out = Var(a.value * c, (a,))
    out._backward = lambda g: _accum(a, _unbroadcast(g * c, a.value.shape))
    return out


def matmul(a: Var, b: Var) -> Var:
    if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[1] != b.value.shape[0]:
        raise ShapeError(
            f"matmul: incompatible shapes {a.value.shape} and {b.value.shape}"
        )
    out = Var(a.value @ b.value, (a, b))

    def bwd(g):
        _accum(a, g @ b.value.T)
        _accum(b, a.value.T @ g)

    out._backward = bwd
    return out


def transpose(a: Var) -> Var:
    out = Var(a.value.T, (a,))
    out._backward = lambda g: _accum(a, g.T)
    return out


def sum_all(a: Var) -> Var:
    out = Var(np.asarray(a.value.sum(), dtype=a.value.dtype), (a,))
    out._backward = lambda g: _accum(a, np.broadcast_to(g, a.value.shape).copy())
    return out


def mean_all(a: Var) -> Var:
    return scale(sum_all(a), 1.0 / a.value.size)


# ---------------------------------------------------------------- activations


def relu(a: Var) -> Var:
    keep = a.value > 0
    out = Var(np.where(keep, a.value, 0.0), (a,))
    out._backward = lambda g: _accum(a, g * keep)
    return out


def sigmoid(a: Var) -> Var:
    s = _sigmoid(a.value)
    out = Var(s, (a,))
    out._backward = lambda g: _accum(a, g * s * (1.0 - s))
    return out


def tanh(a: Var) -> Var:
    t = np.tanh(a.value)
    out = Var(t, (a,))
    out._backward = lambda g: _accum(a, g * (1.0 - t * t))
    return out


def softplus(a: Var) -> Var:
    out = Var(_softplus(a.value), (a,))
    out._backward = lambda g: _accum(a, g * _sigmoid(a.value))
    return out


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form: overflow-free and a single ufunc call
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def _softplus(x: np.ndarray) -> np.ndarray:
    # ln(1 + e^x); returns x directly past 30 where the two agree to 1e-13
    return np.where(x > 30.0, x, np.log1p(np.exp(np.minimum(x, 30.0))))


# ---------------------------------------------------------------- softmax


def row_softmax(a: Var) -> Var:
    """Softmax over the last axis of a 2-D array.

    Entries equal to -inf map to exactly zero weight and receive no
    gradient; a row with no finite entry is an error.
    """
    x = a.value
    if np.isnan(x).any() or np.isposinf(x).any():
        raise DegenerateRowError("softmax input contains NaN or +inf")
    m = x.max(axis=-1, keepdims=True)
    if np.isneginf(m).any():
        raise DegenerateRowError("softmax row with all entries -inf")
    e = np.exp(x - m)
    s = e / e.sum(axis=-1, keepdims=True)
    out = Var(s, (a,))

    def bwd(g):
        dot = (g * s).sum(axis=-1, keepdims=True)
        _accum(a, (g - dot) * s)

    out._backward = bwd
    return out


def mask_fill(a: Var, keep: np.ndarray, fill: float) -> Var:
    """Replace entries where ``keep`` is False by ``fill``; gradient flows
    only through kept entries."""
    out = Var(np.where(keep, a.value, fill), (a,))
    out._backward = lambda g: _accum(a, g * keep)
    return out


# ---------------------------------------------------------------- dropout


def dropout_mask(a: Var, p: float, rng: np.random.Generator) -> Var:
    """Inverted dropout with a freshly drawn mask; caller gates on training."""
    keep = rng.random(a.value.shape) >= p
    factor = (keep / (1.0 - p)).astype(a.value.dtype)
    return mul_const(a, factor)


# ---------------------------------------------------------------- indexing


def take_rows(a: Var, idx: np.ndarray) -> Var:
    out = Var(a.value[idx], (a,))

    def bwd(g):
        if a.grad is None:
            a.grad = np.zeros_like(a.value)
        np.add.at(a.grad, idx, g)

    out._backward = bwd
    return out


def scatter_rows(a: Var, idx: np.ndarray, n_rows: int) -> Var:
    """Place rows of ``a`` at positions ``idx`` of a zero [n_rows, d] array."""
    val = np.zeros((n_rows,) + a.value.shape[1:], dtype=a.value.dtype)
    val[idx] = a.value
    out = Var(val, (a,))
    out._backward = lambda g: _accum(a, g[idx])
    return out


def take_elems(a: Var, row_idx: np.ndarray, col_idx) -> Var:
    """Gather a[row_idx, col_idx] as a column vector [n, 1]."""
    out = Var(a.value[row_idx, col_idx][:, None], (a,))

    def bwd(g):
        if a.grad is None:
            a.grad = np.zeros_like(a.value)
        np.add.at(a.grad, (row_idx, col_idx), g[:, 0])

    out._backward = bwd
    return out


def slice_rows(a: Var, start: int, stop: int) -> Var:
    out = Var(a.value[start:stop], (a,))

    def bwd(g):
        if a.grad is None:
            a.grad = np.zeros_like(a.value)
        a.grad[start:stop] += g

    out._backward = bwd
    return out


def slice_cols(a: Var, start: int, stop: int) -> Var:
    out = Var(a.value[:, start:stop], (a,))

    def bwd(g):
        if a.grad is None:
            a.grad = np.zeros_like(a.value)
        a.grad[:, start:stop] += g

    out._backward = bwd
    return out


def concat_cols(parts: list[Var]) -> Var:
    out = Var(np.concatenate([p.value for p in parts], axis=1), tuple(parts))
    widths = [p.value.shape[1] for p in parts]

    def bwd(g):
        ofs = 0
        for p, w in zip(parts, widths):
            _accum(p, g[:, ofs : ofs + w])
            ofs += w

    out._backward = bwd
    return out


def concat_rows(parts: list[Var]) -> Var:
    out = Var(np.concatenate([p.value for p in parts], axis=0), tuple(parts))
    heights = [p.value.shape[0] for p in parts]

    def bwd(g):
        ofs = 0
        for p, h in zip(parts, heights):
            _accum(p, g[ofs : ofs + h])
            ofs += h

    out._backward = bwd
    return out


# ---------------------------------------------------------------- fused losses


def cross_entropy_rows(logits: Var, targets: np.ndarray, mask: np.ndarray) -> Var:
    """Mean negative log-likelihood over masked-in rows; fused softmax grad."""
    x = logits.value
    n = int(mask.sum())
    m = x.max(axis=-1, keepdims=True)
    z = x - m
    lse = np.log(np.exp(z).sum(axis=-1)) + m[:, 0]
    nll = lse - x[np.arange(x.shape[0]), targets]
    loss = np.asarray((nll * mask).sum() / n, dtype=x.dtype)
    out = Var(loss, (logits,))

    def bwd(g):
        p = np.exp(z)
        p /= p.sum(axis=-1, keepdims=True)
        p[np.arange(x.shape[0]), targets] -= 1.0
        p *= (mask / n)[:, None]
        _accum(logits, p * g)

    out._backward = bwd
    return out


def layer_norm(x: Var, gamma: Var, beta: Var, eps: float = 1e-5) -> Var:
    """Row-wise layer normalization over the last axis."""
    mu = x.value.mean(axis=-1, keepdims=True)
    xc = x.value - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = Var(xhat * gamma.value + beta.value, (x, gamma, beta))

    def bwd(g):
        _accum(gamma, (g * xhat).sum(axis=0))
        _accum(beta, g.sum(axis=0))
        dxhat = g * gamma.value
        dx = (
            dxhat - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        ) * inv
        _accum(x, dx)

    out._backward = bwd
    return out


# ---------------------------------------------------------------- fused LSTM


def lstm_sequence(
    x: Var, rows: np.ndarray, w_ih: Var, w_hh: Var, b: Var
) -> Var:
    """Run one LSTM direction over a row-indexed grid with zero initial state.

    ``rows[t]`` gives, for step t, the row in ``x`` holding each sequence's
    t-th input; outputs land on the same rows of a zero [n, h] array, so rows
    never referenced stay zero. Gate order in the 4h blocks: input, forget,
    cell candidate, output. Backward is hand-rolled BPTT, fused into one node
    to keep graph overhead off the per-timestep path.
    """
    n_steps, batch = rows.shape
    hidden = w_hh.value.shape[0]
    xv, wi, wh, bv = x.value, w_ih.value, w_hh.value, b.value
    h = np.zeros((batch, hidden), dtype=xv.dtype)
    c = np.zeros((batch, hidden), dtype=xv.dtype)
    gates = np.empty((n_steps, batch, 4 * hidden), dtype=xv.dtype)
    h_all = np.zeros((n_steps + 1, batch, hidden), dtype=xv.dtype)
    c_all = np.zeros((n_steps + 1, batch, hidden), dtype=xv.dtype)
    tc_all = np.empty((n_steps, batch, hidden), dtype=xv.dtype)
    out_val = np.zeros((xv.shape[0], hidden), dtype=xv.dtype)
    g_lo, g_hi = 2 * hidden, 3 * hidden
    x_steps = xv[rows.reshape(-1)].reshape(n_steps, batch, xv.shape[1])
    x_wi = (x_steps.reshape(n_steps * batch, -1) @ wi).reshape(
        n_steps, batch, 4 * hidden
    )
    for t in range(n_steps):
        z = x_wi[t] + h @ wh
        z += bv
        # one fused sigmoid over all four gate blocks, candidate overwritten
        act = _sigmoid(z)
        act[:, g_lo:g_hi] = np.tanh(z[:, g_lo:g_hi])
        c = act[:, hidden:g_lo] * c + act[:, :hidden] * act[:, g_lo:g_hi]
        tc = np.tanh(c)
        h = act[:, g_hi:] * tc
        gates[t] = act
        h_all[t + 1] = h
        c_all[t + 1] = c
        tc_all[t] = tc
        out_val[rows[t]] = h
    out = Var(out_val, (x, w_ih, w_hh, b))

    def bwd(g_out):
        dz_all = np.empty((n_steps, batch, 4 * hidden), dtype=xv.dtype)
        dh_next = np.zeros((batch, hidden), dtype=xv.dtype)
        dc_next = np.zeros((batch, hidden), dtype=xv.dtype)
        wh_t = wh.T
        for t in range(n_steps - 1, -1, -1):
            act = gates[t]
            i = act[:, :hidden]
            f = act[:, hidden:g_lo]
            g_ = act[:, g_lo:g_hi]
            o = act[:, g_hi:]
            tc = tc_all[t]
            dh = g_out[rows[t]] + dh_next
            dc = dh * o * (1.0 - tc * tc)
            dc += dc_next
            dz = dz_all[t]
            dz[:, :hidden] = (dc * g_) * i * (1.0 - i)
            dz[:, hidden:g_lo] = (dc * c_all[t]) * f * (1.0 - f)
            dz[:, g_lo:g_hi] = (dc * i) * (1.0 - g_ * g_)
            dz[:, g_hi:] = (dh * tc) * o * (1.0 - o)
            dh_next = dz @ wh_t
            dc_next = dc * f
        # weight and input gradients batched over all timesteps at once
        dz_flat = dz_all.reshape(n_steps * batch, 4 * hidden)
        _accum(w_ih, x_steps.reshape(n_steps * batch, -1).T @ dz_flat)
        _accum(w_hh, h_all[:-1].reshape(n_steps * batch, hidden).T @ dz_flat)
        _accum(b, dz_flat.sum(axis=0))
        if x.grad is None:
            x.grad = np.zeros_like(xv)
        np.add.at(x.grad, rows.reshape(-1), dz_flat @ wi.T)

    out._backward = bwd
    return out
