"""Mixture-of-experts layer: noisy top-k gating, three-layer expert MLPs,
sparse dispatch, and the weighted recombination of expert outputs.

Routing keeps only the k largest gate logits per token (masking the rest to
-inf before the softmax), so non-selected experts never enter the graph.
Gaussian gate noise, scaled by a learned softplus term, is applied during
training only; inference routing is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import nn
from .autodiff import NEG_INF, Var
from .errors import ConfigError


@dataclass
class MoEConfig:
    d_model: int
    n_experts: int = 8
    top_k: int = 2
    d_hidden: int | None = None
    dropout_p: float = 0.0
    noise_enabled_training: bool = True

    def __post_init__(self):
        if self.d_hidden is None:
            self.d_hidden = self.d_model
        if self.n_experts < 1 or self.d_model < 1 or self.d_hidden < 1:
            raise ConfigError("MoE dimensions must be positive")
        if not 1 <= self.top_k <= self.n_experts:
            raise ConfigError(
                f"top_k={self.top_k} outside [1, n_experts={self.n_experts}]"
            )


@dataclass
class RouterParams:
    w_gate: Var
    w_noise: Var


@dataclass
class ExpertParams:
    w1: Var
    w2: Var
    w3: Var


@dataclass
class MoEParams:
    router: RouterParams
    experts: list[ExpertParams]


@dataclass
class GateDecision:
    token_index: int
    indices: list[int]
    weights: list[float]
    logits_raw: np.ndarray


def init_moe_params(
    store: nn.ParamStore,
    prefix: str,
    cfg: MoEConfig,
    rng: np.random.Generator,
    dtype=np.float32,
) -> None:
    store.register(
        f"{prefix}.gate.w", nn.glorot_uniform((cfg.d_model, cfg.n_experts), rng, dtype)
    )
    store.register(
        f"{prefix}.noise.w", nn.glorot_uniform((cfg.d_model, cfg.n_experts), rng, dtype)
    )
    for e in range(cfg.n_experts):
        store.register(
            f"{prefix}.expert{e}.w1",
            nn.glorot_uniform((cfg.d_model, cfg.d_hidden), rng, dtype),
        )
        store.register(
            f"{prefix}.expert{e}.w2",
            nn.glorot_uniform((cfg.d_hidden, cfg.d_hidden), rng, dtype),
        )
        store.register(
            f"{prefix}.expert{e}.w3",
            nn.glorot_uniform((cfg.d_hidden, cfg.d_model), rng, dtype),
        )


def bind_moe_params(leaves: dict[str, Var], prefix: str, cfg: MoEConfig) -> MoEParams:
    router = RouterParams(leaves[f"{prefix}.gate.w"], leaves[f"{prefix}.noise.w"])
    experts = [
        ExpertParams(
            leaves[f"{prefix}.expert{e}.w1"],
            leaves[f"{prefix}.expert{e}.w2"],
            leaves[f"{prefix}.expert{e}.w3"],
        )
        for e in range(cfg.n_experts)
    ]
    return MoEParams(router, experts)


def gate_logits(
    x: Var,
    router: RouterParams,
    rng: np.random.Generator | None,
    training: bool,
    noise_enabled: bool = True,
) -> Var:
    """Per-token gate logits: x @ W_gate, plus N(0,1) noise scaled by
    softplus(x @ W_noise) during training."""
    clean = nn.dense_forward(x, router.w_gate)
    if training and noise_enabled:
        noise_scale = ad.softplus(nn.dense_forward(x, router.w_noise))
        rnd = rng.standard_normal(clean.value.shape).astype(clean.value.dtype)
        return ad.add(clean, ad.mul_const(noise_scale, rnd))
    return clean


def top_k_indices(values: np.ndarray, k: int) -> np.ndarray:
    """Per-row indices of the k largest entries, ties toward the lower index."""
    order = np.argsort(-values, axis=-1, kind="stable")
    return order[..., :k]


def keep_top_k(v: Var, k: int) -> Var:
    """Keep the k largest entries per row verbatim, mask the rest to -inf."""
    n = v.value.shape[-1]
    if not 1 <= k <= n:
        raise ConfigError(f"top_k={k} outside [1, {n}]")
    idx = top_k_indices(v.value, k)
    keep = np.zeros(v.value.shape, dtype=bool)
    np.put_along_axis(keep, idx, True, axis=-1)
    return ad.mask_fill(v, keep, NEG_INF)


def _gate_full(
    x: Var,
    router: RouterParams,
    cfg: MoEConfig,
    rng: np.random.Generator | None,
    training: bool,
) -> tuple[Var, list[GateDecision]]:
    logits = gate_logits(
        x, router, rng, training, noise_enabled=cfg.noise_enabled_training
    )
    masked = keep_top_k(logits, cfg.top_k)
    probs = nn.softmax(masked)
    idx = top_k_indices(logits.value, cfg.top_k)
    decisions = [
        GateDecision(
            token_index=t,
            indices=[int(e) for e in idx[t]],
            weights=[float(probs.value[t, e]) for e in idx[t]],
            logits_raw=logits.value[t].copy(),
        )
        for t in range(x.value.shape[0])
    ]
    return probs, decisions


def gate(
    x: Var,
    router: RouterParams,
    cfg: MoEConfig,
    rng: np.random.Generator | None = None,
    training: bool = False,
) -> list[GateDecision]:
    """Routing result per token: softmax(KeepTopK(logits, k)) restricted to
    the surviving expert indices."""
    return _gate_full(x, router, cfg, rng, training)[1]


def expert_forward(
    x: Var,
    e: ExpertParams,
    dropout_p: float = 0.0,
    rng: np.random.Generator | None = None,
    training: bool = False,
) -> Var:
    """Three sequential dense layers: Dropout(ReLU(x W1) W2) W3."""
    h = ad.relu(nn.dense_forward(x, e.w1))
    h = nn.dense_forward(h, e.w2)
    h = nn.dropout(h, dropout_p, rng, training)
    return nn.dense_forward(h, e.w3)


def moe_forward(
    x: Var,
    params: MoEParams,
    cfg: MoEConfig,
    rng: np.random.Generator | None = None,
    training: bool = False,
) -> tuple[Var, list[GateDecision]]:
    """Weighted sum of the top-k experts' outputs per token.

    Tokens are gathered per selected expert, run through that expert once,
    and scattered back in input order; experts with no routed tokens are
    skipped entirely.
    """
    n_tokens = x.value.shape[0]
    probs, decisions = _gate_full(x, params.router, cfg, rng, training)

    token_lists: list[list[int]] = [[] for _ in range(cfg.n_experts)]
    for d in decisions:
        for e in d.indices:
            token_lists[e].append(d.token_index)

    evals_per_token = np.zeros(n_tokens, dtype=np.int64)
    y: Var | None = None
    for e, tokens in enumerate(token_lists):
        if not tokens:
            continue
        idx = np.asarray(tokens, dtype=np.intp)
        evals_per_token[idx] += 1
        x_e = ad.take_rows(x, idx)
        out_e = expert_forward(x_e, params.experts[e], cfg.dropout_p, rng, training)
        w_e = ad.take_elems(probs, idx, e)
        contrib = ad.scatter_rows(ad.mul(out_e, w_e), idx, n_tokens)
        y = contrib if y is None else ad.add(y, contrib)

    assert (evals_per_token <= cfg.top_k).all(), "token dispatched past top_k"
    return y, decisions
