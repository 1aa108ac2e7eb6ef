"""Full keyword-extraction model: pluggable backbone, optional expert
mixture, optional residual BiLSTM encoder, and the three-class token
classifier, plus batching and inference helpers.

Head order: backbone -> expert mixture -> recurrent encoder summed onto the
mixture output -> classifier. Batches are laid out as a [batch * t_max, d]
row grid; padded rows stay inert through every stage and are dropped before
decoding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import backbone as bb
from . import labeling, moe, nn, recurrent
from .autodiff import Var
from .data import Document
from .errors import ConfigError, DataError

N_CLASSES = 3


@dataclass
class ModelConfig:
    d_model: int = 128
    backbone: str = "transformer"
    num_layers: int = 2
    num_heads: int = 4
    d_ff: int | None = None
    max_len: int = 256
    lora_rank: int = 16
    lora_alpha: float = 16.0
    lora_dropout_p: float = 0.1
    moe_enabled: bool = True
    rnn_enabled: bool = True
    n_experts: int = 8
    top_k: int = 2
    d_hidden: int | None = None
    moe_noise: bool = True
    dropout_p: float = 0.1
    embedding_path: str | None = None

    def __post_init__(self):
        if self.backbone not in ("transformer", "static"):
            raise ConfigError(f"unknown backbone {self.backbone!r}")

    def transformer_config(self) -> bb.ToyTransformerConfig:
        return bb.ToyTransformerConfig(
            d_model=self.d_model,
            num_layers=self.num_layers,
            num_heads=self.num_heads,
            d_ff=self.d_ff,
            max_len=self.max_len,
            lora_rank=self.lora_rank,
            lora_alpha=self.lora_alpha,
            lora_dropout_p=self.lora_dropout_p,
        )

    def moe_config(self) -> moe.MoEConfig:
        return moe.MoEConfig(
            d_model=self.d_model,
            n_experts=self.n_experts,
            top_k=self.top_k,
            d_hidden=self.d_hidden,
            dropout_p=self.dropout_p,
            noise_enabled_training=self.moe_noise,
        )

    def encoder_config(self) -> recurrent.EncoderConfig:
        return recurrent.EncoderConfig(d_model=self.d_model, dropout_p=self.dropout_p)


@dataclass
class Batch:
    doc_ids: list[str]
    surfaces: list[list[str]]
    ids: np.ndarray          # [batch, t_max] vocab ids, 0-padded
    lengths: list[int]
    t_max: int
    targets: np.ndarray      # [batch * t_max] class ids
    mask: np.ndarray         # [batch * t_max] True on real tokens


class KeywordExtractor:
    """Owns the parameter store and wires the stages into one forward pass."""

    def __init__(
        self,
        cfg: ModelConfig,
        vocab: bb.Vocab,
        init_rng: np.random.Generator | None = None,
        dtype=np.float32,
        embedding_table: bb.EmbeddingTable | None = None,
    ):
        self.cfg = cfg
        self.vocab = vocab
        self.dtype = dtype
        self.store = nn.ParamStore()
        self.embedding_table = embedding_table
        if cfg.backbone == "static":
            if embedding_table is None:
                raise ConfigError("static backbone requires an embedding table")
            if embedding_table.dim != cfg.d_model:
                raise ConfigError(
                    f"embedding width {embedding_table.dim} != d_model {cfg.d_model}"
                )
        rng = init_rng if init_rng is not None else np.random.default_rng(0)
        if cfg.backbone == "transformer":
            bb.init_transformer_params(
                self.store, "backbone", cfg.transformer_config(), vocab.size, rng, dtype
            )
        if cfg.moe_enabled:
            moe.init_moe_params(self.store, "moe", cfg.moe_config(), rng, dtype)
        if cfg.rnn_enabled:
            recurrent.init_encoder_params(
                self.store, "encoder", cfg.encoder_config(), rng, dtype
            )
        self.store.register(
            "classifier.w", nn.glorot_uniform((cfg.d_model, N_CLASSES), rng, dtype)
        )
        self.store.register("classifier.b", np.zeros(N_CLASSES, dtype=dtype))

    # ------------------------------------------------------------- batching

    def prepare_batch(self, docs: list[Document]) -> Batch:
        """Tokenize, truncate to max_len, project gold keyphrases to labels,
        and pad to the longest document in the batch."""
        surfaces, lengths, labels = [], [], []
        for doc in docs:
            tokens = labeling.tokenize(doc.text)[: self.cfg.max_len]
            surfaces.append([t.surface for t in tokens])
            lengths.append(len(tokens))
            labels.append(labeling.annotate_bio(tokens, doc.keywords))
        t_max = max(max(lengths), 1)
        batch_n = len(docs)
        ids = np.zeros((batch_n, t_max), dtype=np.intp)
        targets = np.zeros(batch_n * t_max, dtype=np.intp)
        mask = np.zeros(batch_n * t_max, dtype=bool)
        for b, (surf, lab) in enumerate(zip(surfaces, labels)):
            n = lengths[b]
            if n:
                ids[b, :n] = self.vocab.encode(surf)
                targets[b * t_max : b * t_max + n] = lab
                mask[b * t_max : b * t_max + n] = True
        return Batch([d.id for d in docs], surfaces, ids, lengths, t_max, targets, mask)

    # -------------------------------------------------------------- forward

    def forward(
        self,
        batch: Batch,
        rngs: nn.RngStream | None = None,
        training: bool = False,
    ) -> tuple[Var, list[moe.GateDecision] | None, dict[str, Var]]:
        """Token logits over the batch grid, plus gate decisions when the
        expert mixture is enabled."""
        leaves = self.store.leaves()
        drop_rng = rngs.stream("dropout") if rngs is not None else None
        if self.cfg.backbone == "transformer":
            x = bb.transformer_encode_grid(
                batch.ids,
                batch.lengths,
                self.cfg.transformer_config(),
                leaves,
                "backbone",
                drop_rng,
                training,
            )
        else:
            rows = np.zeros(
                (len(batch.lengths) * batch.t_max, self.cfg.d_model), dtype=self.dtype
            )
            for b, surf in enumerate(batch.surfaces):
                if surf:
                    rows[b * batch.t_max : b * batch.t_max + len(surf)] = (
                        bb.static_encode(surf, self.embedding_table, self.dtype)
                    )
            x = ad.constant(rows)

        decisions = None
        if self.cfg.moe_enabled:
            params = moe.bind_moe_params(leaves, "moe", self.cfg.moe_config())
            moe_rng = rngs.stream("moe") if rngs is not None else None
            x, decisions = moe.moe_forward(
                x, params, self.cfg.moe_config(), moe_rng, training
            )
        if self.cfg.rnn_enabled:
            enc = recurrent.encoder_forward_grid(
                x,
                batch.lengths,
                batch.t_max,
                self.cfg.encoder_config(),
                leaves,
                "encoder",
                drop_rng,
                training,
            )
            x = recurrent.residual_combine(x, enc)
        logits = nn.dense_forward(x, leaves["classifier.w"], leaves["classifier.b"])
        return logits, decisions, leaves

    # ------------------------------------------------------------- inference

    def predict_docs(
        self, docs: list[Document], batch_size: int = 16, jobs: int = 1
    ) -> dict[str, tuple[labeling.LabeledSequence, labeling.KeyphrasePrediction]]:
        """Deterministic inference (noise and dropout off): labels, per-token
        class probabilities, decoded and post-processed keyphrases."""
        out: dict[str, tuple] = {}
        batches = [docs[i : i + batch_size] for i in range(0, len(docs), batch_size)]

        def run(batch_docs):
            return self._predict_batch(batch_docs)

        if jobs > 1 and len(batches) > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(run, batches))
        else:
            results = [run(b) for b in batches]
        for partial in results:
            out.update(partial)
        return out

    def _predict_batch(self, docs: list[Document]) -> dict[str, tuple]:
        out = {}
        doc_tokens = {d.id: labeling.tokenize(d.text)[: self.cfg.max_len] for d in docs}
        nonempty = [d for d in docs if doc_tokens[d.id]]
        for d in docs:
            if not doc_tokens[d.id]:
                out[d.id] = (
                    labeling.LabeledSequence([], []),
                    labeling.KeyphrasePrediction([]),
                )
        if not nonempty:
            return out
        batch = self.prepare_batch(nonempty)
        logits, _, _ = self.forward(batch, rngs=None, training=False)
        probs = _softmax_rows(logits.value)
        for b, doc in enumerate(nonempty):
            n = batch.lengths[b]
            lo = b * batch.t_max
            doc_probs = probs[lo : lo + n]
            labels = doc_probs.argmax(axis=1).tolist()
            seq = labeling.LabeledSequence(doc_tokens[doc.id], labels, doc_probs)
            raw = labeling.decode_keyphrases(seq)
            out[doc.id] = (seq, labeling.postprocess(raw))
        return out

    def trace_batch(
        self, docs: list[Document]
    ) -> list[tuple[str, list[str], list[int], list[str], list[list[float]]]]:
        """Per document: surfaces, top expert per real token, predicted BIO
        label names, and the top-k gate weights."""
        if not self.cfg.moe_enabled:
            raise ConfigError("expert tracing requires the expert mixture head")
        batch = self.prepare_batch(docs)
        logits, decisions, _ = self.forward(batch, rngs=None, training=False)
        probs = _softmax_rows(logits.value)
        traces = []
        for b, doc in enumerate(docs):
            n = batch.lengths[b]
            lo = b * batch.t_max
            experts = [decisions[lo + i].indices[0] for i in range(n)]
            weights = [decisions[lo + i].weights for i in range(n)]
            labels = [
                labeling.LABEL_NAMES[c] for c in probs[lo : lo + n].argmax(axis=1)
            ]
            traces.append((doc.id, batch.surfaces[b], experts, labels, weights))
        return traces


def _softmax_rows(x: np.ndarray) -> np.ndarray:
    m = x.max(axis=1, keepdims=True)
    e = np.exp(x - m)
    return e / e.sum(axis=1, keepdims=True)
