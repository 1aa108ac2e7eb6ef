"""Supervised fine-tuning loop: shuffled mini-batches, masked token
cross-entropy, Adam, per-epoch validation with stemmed F1@k selection, early
stopping on patience, and best-epoch checkpointing.

Everything is seeded through one RngStream so identical (config, seed, data)
reproduce identical histories and checkpoints.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import autodiff as ad
from . import backbone as bb
from . import evaluation, labeling, nn
from .checkpoint import Checkpoint, checkpoint_from_model
from .data import Document
from .errors import ConfigError, DataError, DivergenceError
from .model import KeywordExtractor, ModelConfig


@dataclass
class TrainConfig:
    lr: float = 2e-4
    max_epochs: int = 20
    patience: int = 3
    batch_size: int = 8
    seed: int = 0
    freeze_mode: str = "lora"
    selection_k: int = 10
    early_stopping: bool = True

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_metric: float
    wall_time: float


@dataclass
class TrainHistory:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0

    def to_dict(self) -> dict:
        return {"epochs": [asdict(e) for e in self.epochs], "best_epoch": self.best_epoch}


class EarlyStopping:
    """Strict-improvement tracker: stop once `patience` epochs pass without a
    new best; ties keep the earlier epoch."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best_metric = -np.inf
        self.best_epoch = 0

    def update(self, epoch: int, metric: float) -> bool:
        if metric > self.best_metric:
            self.best_metric = metric
            self.best_epoch = epoch
        return (epoch - self.best_epoch) >= self.patience


def split_validation(
    docs: list[Document], seed: int
) -> tuple[list[Document], list[Document]]:
    """Deterministic shuffle, then first 80 percent (floored) for training
    and the remainder for validation."""
    if len(docs) < 5:
        raise DataError(f"need at least 5 documents to split, got {len(docs)}")
    order = nn.RngStream(seed).stream("split").permutation(len(docs))
    shuffled = [docs[i] for i in order]
    cut = int(len(docs) * 0.8)
    return shuffled[:cut], shuffled[cut:]


def train(
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    train_docs: list[Document],
    dev_docs: list[Document],
    init: Checkpoint | None = None,
    embedding_table: bb.EmbeddingTable | None = None,
) -> tuple[Checkpoint, TrainHistory]:
    """Fit the head (and adapters, per freeze mode) and return the best
    epoch's checkpoint by validation F1@k."""
    if not train_docs or not dev_docs:
        raise DataError("training and validation sets must be nonempty")
    rngs = nn.RngStream(train_cfg.seed)

    if init is not None:
        if init.config["model"] != asdict(model_cfg):
            raise ConfigError("warm-start checkpoint config differs from model config")
        model = init.build_model(embedding_table)
        vocab = model.vocab
    else:
        vocab = bb.Vocab.build(
            [t.surface for t in labeling.tokenize(doc.text)] for doc in train_docs
        )
        model = KeywordExtractor(
            model_cfg, vocab, rngs.stream("init"), embedding_table=embedding_table
        )
    bb.freeze_policy(model.store, train_cfg.freeze_mode)
    adam = nn.AdamState(lr=train_cfg.lr)
    shuffle_rng = rngs.stream("shuffle")

    golds = {d.id: d.keywords for d in dev_docs if d.keywords}
    history = TrainHistory()
    stopper = EarlyStopping(train_cfg.patience)
    best_ckpt: Checkpoint | None = None
    config_echo = {"model": asdict(model_cfg), "train": asdict(train_cfg)}

    for epoch in range(1, train_cfg.max_epochs + 1):
        t0 = time.perf_counter()
        order = shuffle_rng.permutation(len(train_docs))
        losses = []
        for b0 in range(0, len(order), train_cfg.batch_size):
            batch_idx = order[b0 : b0 + train_cfg.batch_size]
            batch = model.prepare_batch([train_docs[i] for i in batch_idx])
            logits, _, _ = model.forward(batch, rngs, training=True)
            loss = nn.cross_entropy(logits, batch.targets, batch.mask)
            if not np.isfinite(loss.value):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}, batch {b0 // train_cfg.batch_size}"
                )
            ad.backward(loss)
            nn.adam_step(model.store, adam)
            losses.append(float(loss.value))

        preds = model.predict_docs(dev_docs)
        report = evaluation.evaluate_corpus(
            {i: p for i, (_, p) in preds.items()}, golds, [train_cfg.selection_k]
        )
        metric = report.macro[train_cfg.selection_k]["f1"]
        history.epochs.append(
            EpochRecord(epoch, float(np.mean(losses)), metric, time.perf_counter() - t0)
        )
        should_stop = stopper.update(epoch, metric)
        if stopper.best_epoch == epoch:
            best_ckpt = checkpoint_from_model(model, config_echo, train_cfg.seed)
        if train_cfg.early_stopping and should_stop:
            break

    history.best_epoch = stopper.best_epoch
    return best_ckpt, history


def predict(
    ckpt: Checkpoint,
    docs: list[Document],
    jobs: int = 1,
    embedding_table: bb.EmbeddingTable | None = None,
):
    """Deterministic inference from a checkpoint: per document the labeled
    sequence and the ranked keyphrase prediction."""
    model = ckpt.build_model(embedding_table)
    return model.predict_docs(docs, jobs=jobs)


