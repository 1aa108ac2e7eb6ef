"""Binary checkpoint format.

Layout: magic "SEKE", little-endian u32 format version, u32 header length,
UTF-8 JSON header (config echo, vocab, seed, tensor directory with
name/shape/offset/trainable), raw little-endian float32 payloads in
directory order, and a trailing u32 CRC32 over everything before it.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from . import backbone as bb
from .errors import ConfigError, DataError
from .model import KeywordExtractor, ModelConfig

MAGIC = b"SEKE"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    config: dict
    vocab: bb.Vocab
    seed: int
    tensors: dict[str, np.ndarray]
    trainable: dict[str, bool]

    def build_model(self, embedding_table: bb.EmbeddingTable | None = None) -> KeywordExtractor:
        cfg = ModelConfig(**self.config["model"])
        if cfg.backbone == "static" and embedding_table is None and cfg.embedding_path:
            embedding_table = bb.load_embedding_table(cfg.embedding_path)
        model = KeywordExtractor(cfg, self.vocab, embedding_table=embedding_table)
        for name in model.store.names():
            if name not in self.tensors:
                raise ConfigError(f"checkpoint missing tensor {name!r}")
            p = model.store[name]
            if p.value.shape != self.tensors[name].shape:
                raise ConfigError(
                    f"checkpoint tensor {name!r} has shape "
                    f"{self.tensors[name].shape}, model expects {p.value.shape}"
                )
            p.value[...] = self.tensors[name]
            p.trainable = self.trainable.get(name, True)
        extra = set(self.tensors) - set(model.store.names())
        if extra:
            raise ConfigError(f"checkpoint has unexpected tensors: {sorted(extra)[:5]}")
        return model


def checkpoint_from_model(model: KeywordExtractor, config: dict, seed: int) -> Checkpoint:
    tensors = {name: p.value.copy() for name, p in model.store.items()}
    trainable = {name: p.trainable for name, p in model.store.items()}
    return Checkpoint(config, model.vocab, seed, tensors, trainable)


def save(ckpt: Checkpoint, path) -> None:
    directory = []
    payload = bytearray()
    for name, arr in ckpt.tensors.items():
        data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        directory.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "offset": len(payload),
                "nbytes": len(data),
                "trainable": bool(ckpt.trainable.get(name, True)),
            }
        )
        payload.extend(data)
    header = json.dumps(
        {
            "format_version": FORMAT_VERSION,
            "config": ckpt.config,
            "vocab": ckpt.vocab.token_to_id,
            "seed": ckpt.seed,
            "tensors": directory,
        },
        sort_keys=True,
    ).encode("utf-8")
    blob = bytearray()
    blob.extend(MAGIC)
    blob.extend(struct.pack("<I", FORMAT_VERSION))
    blob.extend(struct.pack("<I", len(header)))
    blob.extend(header)
    blob.extend(payload)
    blob.extend(struct.pack("<I", zlib.crc32(bytes(blob))))
    with open(path, "wb") as fh:
        fh.write(blob)


def load(path) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise DataError(f"{path}: not a checkpoint file (bad magic)")
    stored_crc = struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(blob[:-4]) != stored_crc:
        raise DataError(f"{path}: checksum mismatch, file corrupt")
    version = struct.unpack("<I", blob[4:8])[0]
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported format version {version}")
    header_len = struct.unpack("<I", blob[8:12])[0]
    header = json.loads(blob[12 : 12 + header_len].decode("utf-8"))
    base = 12 + header_len
    tensors: dict[str, np.ndarray] = {}
    trainable: dict[str, bool] = {}
    for entry in header["tensors"]:
        start = base + entry["offset"]
        raw = blob[start : start + entry["nbytes"]]
        tensors[entry["name"]] = np.frombuffer(raw, dtype="<f4").reshape(
            entry["shape"]
        ).copy()
        trainable[entry["name"]] = entry.get("trainable", True)
    vocab = bb.Vocab({t: int(i) for t, i in header["vocab"].items()})
    return Checkpoint(header["config"], vocab, int(header["seed"]), tensors, trainable)


__all__ = ["Checkpoint", "checkpoint_from_model", "save", "load", "MAGIC", "FORMAT_VERSION"]
