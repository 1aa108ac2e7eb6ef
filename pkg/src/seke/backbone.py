"""Per-token context encoders feeding the classification head.

Two interchangeable backbones emit [T, d_model] rows: a small trainable
transformer (learned positions, pre-norm blocks, low-rank adapters on the
query and value projections) and a frozen static-embedding lookup for tests
and tiny corpora.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import nn
from .autodiff import NEG_INF, Var
from .errors import ConfigError, DataError

PAD_ID = 0
UNK_ID = 1


@dataclass
class Vocab:
    token_to_id: dict[str, int] = field(default_factory=dict)

    @classmethod
    def build(cls, token_iterables) -> "Vocab":
        mapping: dict[str, int] = {}
        for tokens in token_iterables:
            for tok in tokens:
                key = tok.lower()
                if key not in mapping:
                    mapping[key] = len(mapping) + 2
        return cls(mapping)

    @property
    def size(self) -> int:
        return len(self.token_to_id) + 2

    def encode(self, tokens: list[str]) -> np.ndarray:
        return np.asarray(
            [self.token_to_id.get(t.lower(), UNK_ID) for t in tokens], dtype=np.intp
        )


@dataclass
class ToyTransformerConfig:
    d_model: int = 128
    num_layers: int = 2
    num_heads: int = 4
    d_ff: int | None = None
    max_len: int = 256
    lora_rank: int = 16
    lora_alpha: float = 16.0
    lora_dropout_p: float = 0.1

    def __post_init__(self):
        if self.d_ff is None:
            self.d_ff = 4 * self.d_model
        if self.d_model % self.num_heads != 0:
            raise ConfigError(
                f"d_model={self.d_model} not divisible by num_heads={self.num_heads}"
            )
        if self.lora_rank > self.d_model:
            raise ConfigError(
                f"lora rank {self.lora_rank} exceeds d_model {self.d_model}"
            )


@dataclass
class LoRAAdapter:
    a: Var
    b: Var
    rank: int
    alpha: float


def init_transformer_params(
    store: nn.ParamStore,
    prefix: str,
    cfg: ToyTransformerConfig,
    vocab_size: int,
    rng: np.random.Generator,
    dtype=np.float32,
) -> None:
    d = cfg.d_model
    store.register(f"{prefix}.tok_emb", nn.glorot_uniform((vocab_size, d), rng, dtype))
    store.register(f"{prefix}.pos_emb", nn.glorot_uniform((cfg.max_len, d), rng, dtype))
    for layer in range(cfg.num_layers):
        base = f"{prefix}.l{layer}"
        for ln in ("ln1", "ln2"):
            store.register(f"{base}.{ln}.g", np.ones(d, dtype=dtype))
            store.register(f"{base}.{ln}.b", np.zeros(d, dtype=dtype))
        for proj in ("wq", "wk", "wv", "wo"):
            store.register(f"{base}.attn.{proj}", nn.glorot_uniform((d, d), rng, dtype))
            if proj != "wk":
                # a key bias shifts every attention row uniformly (softmax
                # cancels it), so it is omitted
                store.register(f"{base}.attn.{proj}_b", np.zeros(d, dtype=dtype))
        for target in ("q", "v"):
            store.register(
                f"{base}.attn.lora_{target}.a",
                nn.glorot_uniform((cfg.lora_rank, d), rng, dtype),
            )
            store.register(
                f"{base}.attn.lora_{target}.b",
                np.zeros((d, cfg.lora_rank), dtype=dtype),
            )
        store.register(f"{base}.ffn.w1", nn.glorot_uniform((d, cfg.d_ff), rng, dtype))
        store.register(f"{base}.ffn.b1", np.zeros(cfg.d_ff, dtype=dtype))
        store.register(f"{base}.ffn.w2", nn.glorot_uniform((cfg.d_ff, d), rng, dtype))
        store.register(f"{base}.ffn.b2", np.zeros(d, dtype=dtype))


def bind_adapter(
    leaves: dict[str, Var], name: str, cfg: ToyTransformerConfig
) -> LoRAAdapter:
    return LoRAAdapter(
        leaves[f"{name}.a"], leaves[f"{name}.b"], cfg.lora_rank, cfg.lora_alpha
    )


def lora_apply(w: Var, lora: LoRAAdapter) -> Var:
    """Effective weight W + (alpha / r) * B A; the base stays frozen."""
    d = w.value.shape[0]
    if lora.rank > d:
        raise ConfigError(f"lora rank {lora.rank} exceeds weight dim {d}")
    delta = ad.scale(ad.matmul(lora.b, lora.a), lora.alpha / lora.rank)
    return ad.add(w, delta)


def _lora_linear(
    x: Var,
    w: Var,
    bias: Var,
    lora: LoRAAdapter | None,
    dropout_p: float,
    rng: np.random.Generator | None,
    training: bool,
) -> Var:
    y = nn.dense_forward(x, w, bias)
    if lora is None:
        return y
    xd = nn.dropout(x, dropout_p, rng, training)
    delta = ad.matmul(ad.matmul(xd, lora.b), lora.a)
    return ad.add(y, ad.scale(delta, lora.alpha / lora.rank))


def transformer_encode_grid(
    ids: np.ndarray,
    lengths: list[int],
    cfg: ToyTransformerConfig,
    leaves: dict[str, Var],
    prefix: str = "backbone",
    rng: np.random.Generator | None = None,
    training: bool = False,
) -> Var:
    """Encode a [batch, t_max] id grid into [batch * t_max, d_model] rows.

    Attention is computed per document with padded key positions masked to
    -inf; every other stage is row-wise, so pad rows stay inert.
    """
    batch, t_max = ids.shape
    if t_max > cfg.max_len:
        raise ConfigError(f"sequence length {t_max} exceeds max_len {cfg.max_len}")
    d, heads = cfg.d_model, cfg.num_heads
    d_head = d // heads
    flat_ids = ids.reshape(-1)
    pos_ids = np.tile(np.arange(t_max, dtype=np.intp), batch)
    x = ad.add(
        ad.take_rows(leaves[f"{prefix}.tok_emb"], flat_ids),
        ad.take_rows(leaves[f"{prefix}.pos_emb"], pos_ids),
    )
    inv_sqrt = 1.0 / np.sqrt(d_head)
    for layer in range(cfg.num_layers):
        base = f"{prefix}.l{layer}"
        xn = ad.layer_norm(x, leaves[f"{base}.ln1.g"], leaves[f"{base}.ln1.b"])
        lora_q = bind_adapter(leaves, f"{base}.attn.lora_q", cfg)
        lora_v = bind_adapter(leaves, f"{base}.attn.lora_v", cfg)
        q = _lora_linear(
            xn, leaves[f"{base}.attn.wq"], leaves[f"{base}.attn.wq_b"],
            lora_q, cfg.lora_dropout_p, rng, training,
        )
        k = nn.dense_forward(xn, leaves[f"{base}.attn.wk"])
        v = _lora_linear(
            xn, leaves[f"{base}.attn.wv"], leaves[f"{base}.attn.wv_b"],
            lora_v, cfg.lora_dropout_p, rng, training,
        )
        doc_ctx = []
        for bi in range(batch):
            lo, hi = bi * t_max, (bi + 1) * t_max
            keep_keys = np.zeros((1, t_max), dtype=bool)
            keep_keys[0, : lengths[bi]] = True
            head_ctx = []
            for h in range(heads):
                c0, c1 = h * d_head, (h + 1) * d_head
                qh = ad.slice_cols(ad.slice_rows(q, lo, hi), c0, c1)
                kh = ad.slice_cols(ad.slice_rows(k, lo, hi), c0, c1)
                vh = ad.slice_cols(ad.slice_rows(v, lo, hi), c0, c1)
                scores = ad.scale(ad.matmul(qh, ad.transpose(kh)), inv_sqrt)
                probs = ad.row_softmax(ad.mask_fill(scores, keep_keys, NEG_INF))
                head_ctx.append(ad.matmul(probs, vh))
            doc_ctx.append(ad.concat_cols(head_ctx))
        ctx = doc_ctx[0] if batch == 1 else ad.concat_rows(doc_ctx)
        attn_out = nn.dense_forward(
            ctx, leaves[f"{base}.attn.wo"], leaves[f"{base}.attn.wo_b"]
        )
        x = ad.add(x, attn_out)
        xn2 = ad.layer_norm(x, leaves[f"{base}.ln2.g"], leaves[f"{base}.ln2.b"])
        hidden = ad.relu(
            nn.dense_forward(xn2, leaves[f"{base}.ffn.w1"], leaves[f"{base}.ffn.b1"])
        )
        ffn_out = nn.dense_forward(
            hidden, leaves[f"{base}.ffn.w2"], leaves[f"{base}.ffn.b2"]
        )
        x = ad.add(x, ffn_out)
    return x


def transformer_encode(
    ids: np.ndarray,
    cfg: ToyTransformerConfig,
    leaves: dict[str, Var],
    prefix: str = "backbone",
    rng: np.random.Generator | None = None,
    training: bool = False,
) -> Var:
    """Single-sequence [T] ids to [T, d_model] rows; caller truncates to max_len."""
    ids = np.asarray(ids, dtype=np.intp)
    t = ids.shape[0]
    return transformer_encode_grid(
        ids.reshape(1, t), [t], cfg, leaves, prefix, rng, training
    )


# ----------------------------------------------------------- static embeddings


@dataclass
class EmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray]


def load_embedding_table(path) -> EmbeddingTable:
    """Text format: first line "<count> <dim>", then token plus dim floats."""
    vectors: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2:
            raise DataError(f"{path}:1: expected '<count> <dim>' header")
        try:
            count, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise DataError(f"{path}:1: non-integer header fields") from None
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != dim + 1:
                raise DataError(
                    f"{path}:{lineno}: expected token plus {dim} floats, got "
                    f"{len(fields)} fields"
                )
            try:
                vec = np.asarray([float(f) for f in fields[1:]], dtype=np.float32)
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric vector entry") from None
            vectors[fields[0]] = vec
    if count != len(vectors):
        raise DataError(
            f"{path}: header declares {count} vectors, file has {len(vectors)}"
        )
    return EmbeddingTable(dim, vectors)


def static_encode(tokens: list[str], table: EmbeddingTable, dtype=np.float32) -> np.ndarray:
    """Frozen per-token lookup on the lowercased surface; unknown tokens map
    to the zero vector."""
    out = np.zeros((len(tokens), table.dim), dtype=dtype)
    for i, tok in enumerate(tokens):
        vec = table.vectors.get(tok.lower())
        if vec is not None:
            out[i] = vec
    return out


# ----------------------------------------------------------- freeze policy


FREEZE_MODES = ("lora", "full", "frozen")
HEAD_PREFIXES = ("moe.", "encoder.", "classifier.")


def freeze_policy(store: nn.ParamStore, mode: str) -> None:
    """Set trainable flags: 'lora' trains adapters plus the head, 'frozen'
    trains the head only, 'full' trains everything."""
    if mode not in FREEZE_MODES:
        raise ConfigError(f"unknown freeze mode {mode!r}; expected one of {FREEZE_MODES}")
    if mode == "full":
        store.set_trainable(lambda name: True)
        return

    def predicate(name: str) -> bool:
        if name.startswith(HEAD_PREFIXES):
            return True
        return mode == "lora" and ".lora_" in name

    store.set_trainable(predicate)
