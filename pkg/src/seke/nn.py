"""Parameter store, seeded RNG streams, layer-level ops, Adam, and the
finite-difference gradient checker.

Layer ops take and return autodiff ``Var`` nodes; backward passes accumulate
into the owning ``ParamStore`` through the leaf hooks installed by
``ParamStore.leaves``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Var
from .errors import ConfigError, DataError, ShapeError


class RngStream:
    """Named, independently seeded random substreams.

    The same (seed, label) pair always yields the same draw sequence; labels
    derive child seeds through a stable hash, so adding a new substream never
    perturbs existing ones.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._streams: dict[str, np.random.Generator] = {}

    def stream(self, label: str) -> np.random.Generator:
        gen = self._streams.get(label)
        if gen is None:
            digest = hashlib.blake2s(label.encode("utf-8"), digest_size=8).digest()
            key = int.from_bytes(digest, "little")
            ss = np.random.SeedSequence(
                entropy=self.seed, spawn_key=(key & 0xFFFFFFFF, key >> 32)
            )
            gen = np.random.default_rng(ss)
            self._streams[label] = gen
        return gen


@dataclass
class Param:
    value: np.ndarray
    grad: np.ndarray
    trainable: bool = True


class ParamStore:
    """Named parameters with gradients and a trainable flag.

    One training context owns and mutates a store; concurrent use is limited
    to read-only forward passes.
    """

    def __init__(self):
        self._params: dict[str, Param] = {}

    def register(self, name: str, value: np.ndarray, trainable: bool = True) -> None:
        if name in self._params:
            raise ConfigError(f"duplicate parameter name {name!r}")
        value = np.asarray(value)
        self._params[name] = Param(value, np.zeros_like(value), trainable)

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __getitem__(self, name: str) -> Param:
        return self._params[name]

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def leaves(self) -> dict[str, Var]:
        """Fresh graph leaves for one forward pass; backward lands each
        leaf's gradient in the corresponding Param.grad."""
        out = {}
        for name, p in self._params.items():
            v = Var(p.value)
            if p.trainable:
                v._backward = _leaf_hook(p)
            out[name] = v
        return out

    def zero_grads(self) -> None:
        for p in self._params.values():
            p.grad[...] = 0.0

    def set_trainable(self, predicate: Callable[[str], bool]) -> None:
        for name, p in self._params.items():
            p.trainable = bool(predicate(name))


def _leaf_hook(p: Param):
    def hook(g):
        p.grad += g

    return hook


def glorot_uniform(shape: tuple[int, int], rng: np.random.Generator, dtype) -> np.ndarray:
    fan_in, fan_out = shape[0], shape[1]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


# ----------------------------------------------------------------- layer ops


def _check_finite(x: np.ndarray, what: str) -> None:
    if not np.isfinite(x).all():
        raise ShapeError(f"{what} contains non-finite values")


def dense_forward(x: Var, w: Var, b: Var | None = None) -> Var:
    """y = x @ w (+ b). Shapes must agree on the inner dimension."""
    if x.value.shape[-1] != w.value.shape[0]:
        raise ShapeError(
            f"dense: input shape {x.value.shape} does not match weight shape {w.value.shape}"
        )
    _check_finite(x.value, "dense input")
    y = ad.matmul(x, w)
    if b is not None:
        y = ad.add(y, b)
    return y


_ACTIVATIONS = {
    "relu": ad.relu,
    "softplus": ad.softplus,
    "sigmoid": ad.sigmoid,
    "tanh": ad.tanh,
}


def activation(kind: str, x: Var) -> Var:
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ConfigError(f"unknown activation {kind!r}") from None
    _check_finite(x.value, "activation input")
    return fn(x)


def softmax(x: Var) -> Var:
    """Row softmax; -inf entries map to exactly zero weight."""
    return ad.row_softmax(x)


def dropout(x: Var, p: float, rng: np.random.Generator, training: bool) -> Var:
    """Inverted dropout: identity at inference or p == 0."""
    if p >= 1.0 or p < 0.0:
        raise ConfigError(f"dropout probability {p} outside [0, 1)")
    if not training or p == 0.0:
        return x
    return ad.dropout_mask(x, p, rng)


def cross_entropy(logits: Var, targets: np.ndarray, mask: np.ndarray) -> Var:
    """Mean token-level NLL over masked-in positions."""
    targets = np.asarray(targets)
    mask = np.asarray(mask, dtype=bool)
    if targets.shape[0] != logits.value.shape[0] or mask.shape[0] != targets.shape[0]:
        raise ShapeError(
            f"cross_entropy: logits {logits.value.shape}, targets {targets.shape}, mask {mask.shape}"
        )
    if not mask.any():
        raise DataError("cross_entropy over an empty mask")
    _check_finite(logits.value, "cross_entropy logits")
    return ad.cross_entropy_rows(logits, targets, mask)


# ----------------------------------------------------------------- optimizer


@dataclass
class AdamState:
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(store: ParamStore, state: AdamState) -> None:
    """Bias-corrected Adam update on trainable entries; grads then zeroed."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for name, p in store.items():
        if not p.trainable:
            continue
        g = p.grad
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.value)
        v = state.v.get(name)
        if v is None:
            v = state.v[name] = np.zeros_like(p.value)
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.value -= (state.lr / c1) * m / (np.sqrt(v / c2) + state.eps)
    store.zero_grads()


# ----------------------------------------------------------------- grad check


def grad_check(
    f: Callable[[ParamStore], Var],
    store: ParamStore,
    eps: float = 1e-5,
) -> float:
    """Max relative disagreement between f's analytic gradients and central
    finite differences, over all trainable parameter entries.

    ``f`` must be deterministic (dropout and gating noise disabled) and build
    its graph from ``store.leaves()``.
    """
    store.zero_grads()
    loss = f(store)
    ad.backward(loss)
    analytic = {name: p.grad.copy() for name, p in store.items() if p.trainable}

    worst = 0.0
    for name, p in store.items():
        if not p.trainable:
            continue
        flat = p.value.reshape(-1)
        ana = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = float(f(store).value)
            flat[i] = orig - eps
            f_minus = float(f(store).value)
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            denom = max(abs(ana[i]), abs(numeric), 1e-12)
            worst = max(worst, abs(ana[i] - numeric) / denom)
    store.zero_grads()
    return worst
