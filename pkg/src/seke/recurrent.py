"""Two-layer bidirectional LSTM encoder whose output is summed element-wise
with the sequence it reads.

Each direction uses hidden size d_model/2 so the concatenated output keeps
the input width. Sequences always start from zero states; the batched grid
path indexes rows per timestep so padding never bleeds into real tokens.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import nn
from .autodiff import Var
from .errors import ConfigError, ShapeError

NUM_LAYERS = 2


@dataclass
class EncoderConfig:
    d_model: int
    dropout_p: float = 0.0
    num_layers: int = NUM_LAYERS

    def __post_init__(self):
        if self.d_model % 2 != 0:
            raise ConfigError(f"d_model={self.d_model} must be even for two directions")
        if self.num_layers != NUM_LAYERS:
            raise ConfigError("encoder depth is fixed at two layers")

    @property
    def hidden(self) -> int:
        return self.d_model // 2


@dataclass
class LSTMCellParams:
    w_ih: Var
    w_hh: Var
    b: Var


def init_encoder_params(
    store: nn.ParamStore,
    prefix: str,
    cfg: EncoderConfig,
    rng: np.random.Generator,
    dtype=np.float32,
) -> None:
    h = cfg.hidden
    for layer in range(cfg.num_layers):
        for direction in ("fwd", "bwd"):
            name = f"{prefix}.l{layer}.{direction}"
            store.register(
                f"{name}.w_ih", nn.glorot_uniform((cfg.d_model, 4 * h), rng, dtype)
            )
            store.register(f"{name}.w_hh", nn.glorot_uniform((h, 4 * h), rng, dtype))
            store.register(f"{name}.b", np.zeros(4 * h, dtype=dtype))


def bind_cell(leaves: dict[str, Var], name: str) -> LSTMCellParams:
    return LSTMCellParams(
        leaves[f"{name}.w_ih"], leaves[f"{name}.w_hh"], leaves[f"{name}.b"]
    )


def lstm_cell_step(
    x_t: Var, h_prev: Var, c_prev: Var, p: LSTMCellParams
) -> tuple[Var, Var]:
    """One LSTM step; gate order input, forget, cell candidate, output."""
    h = h_prev.value.shape[-1]
    z = ad.add(ad.add(ad.matmul(x_t, p.w_ih), ad.matmul(h_prev, p.w_hh)), p.b)
    i = ad.sigmoid(ad.slice_cols(z, 0, h))
    f = ad.sigmoid(ad.slice_cols(z, h, 2 * h))
    g = ad.tanh(ad.slice_cols(z, 2 * h, 3 * h))
    o = ad.sigmoid(ad.slice_cols(z, 3 * h, 4 * h))
    c = ad.add(ad.mul(f, c_prev), ad.mul(i, g))
    h_new = ad.mul(o, ad.tanh(c))
    return h_new, c


def grid_rows(lengths: list[int], t_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Row schedules for a [sum-of-slots, d] grid padded to t_max per doc.

    Forward: step t reads/writes row b*t_max + t. Backward: step t maps to
    each doc's (len-1-t)-th token while t < len, and to the doc's own pad
    slot afterwards, so reversed state evolution never crosses documents.
    """
    batch = len(lengths)
    fwd = np.empty((t_max, batch), dtype=np.intp)
    bwd = np.empty((t_max, batch), dtype=np.intp)
    for b, n in enumerate(lengths):
        base = b * t_max
        for t in range(t_max):
            fwd[t, b] = base + t
            bwd[t, b] = base + (n - 1 - t if t < n else t)
    return fwd, bwd


def encoder_forward_grid(
    x: Var,
    lengths: list[int],
    t_max: int,
    cfg: EncoderConfig,
    leaves: dict[str, Var],
    prefix: str,
    rng: np.random.Generator | None = None,
    training: bool = False,
) -> Var:
    """Dropout, then two bidirectional layers with dropout in between; the
    grid layout is row b*t_max + t."""
    if x.value.shape[0] != len(lengths) * t_max:
        raise ShapeError(
            f"encoder grid: input shape {x.value.shape} does not cover "
            f"{len(lengths)} x {t_max} slots"
        )
    rows_fwd, rows_bwd = grid_rows(lengths, t_max)
    h = x
    for layer in range(cfg.num_layers):
        h = nn.dropout(h, cfg.dropout_p, rng, training)
        cells = {
            direction: bind_cell(leaves, f"{prefix}.l{layer}.{direction}")
            for direction in ("fwd", "bwd")
        }
        out_f = ad.lstm_sequence(
            h, rows_fwd, cells["fwd"].w_ih, cells["fwd"].w_hh, cells["fwd"].b
        )
        out_b = ad.lstm_sequence(
            h, rows_bwd, cells["bwd"].w_ih, cells["bwd"].w_hh, cells["bwd"].b
        )
        h = ad.concat_cols([out_f, out_b])
    return h


def encoder_forward(
    x: Var,
    cfg: EncoderConfig,
    leaves: dict[str, Var],
    prefix: str = "encoder",
    rng: np.random.Generator | None = None,
    training: bool = False,
) -> Var:
    """Single-sequence [T, d_model] encoder pass."""
    t = x.value.shape[0]
    if t < 1:
        raise ShapeError("encoder requires at least one timestep")
    return encoder_forward_grid(x, [t], t, cfg, leaves, prefix, rng, training)


def residual_combine(moe_out: Var, enc_out: Var) -> Var:
    """Element-wise sum of the expert-mixture sequence and encoder sequence."""
    if moe_out.value.shape != enc_out.value.shape:
        raise ShapeError(
            f"residual sum: shapes {moe_out.value.shape} and {enc_out.value.shape} differ"
        )
    return ad.add(moe_out, enc_out)
