"""Mixture-of-experts keyword extraction.

A noisy top-k expert-mixture token-classification head with a residual
bidirectional LSTM encoder on a pluggable backbone, plus BIO labeling,
stemmed F1@k evaluation, and expert-specialization analysis.
"""

from .analysis import (
    ContingencyTable,
    ExpertTrace,
    build_contingency,
    cramers_v,
    cramers_v_corrected,
    specialization_report,
    trace_experts,
)
from .backbone import LoRAAdapter, ToyTransformerConfig, Vocab, lora_apply
from .checkpoint import Checkpoint
from .data import Document, gen_synthetic, load_jsonl
from .evaluation import EvalReport, aggregate_runs, evaluate_corpus, f1_at_k, match_key
from .labeling import (
    KeyphrasePrediction,
    LabeledSequence,
    Token,
    annotate_bio,
    decode_keyphrases,
    postprocess,
    tokenize,
)
from .model import KeywordExtractor, ModelConfig
from .moe import GateDecision, MoEConfig
from .nn import AdamState, ParamStore, RngStream, adam_step, grad_check
from .porter import porter_stem
from .recurrent import EncoderConfig
from .training import TrainConfig, TrainHistory, predict, split_validation, train

__all__ = [
    "AdamState",
    "Checkpoint",
    "ContingencyTable",
    "Document",
    "EncoderConfig",
    "EvalReport",
    "ExpertTrace",
    "GateDecision",
    "KeyphrasePrediction",
    "KeywordExtractor",
    "LabeledSequence",
    "LoRAAdapter",
    "ModelConfig",
    "MoEConfig",
    "ParamStore",
    "RngStream",
    "Token",
    "ToyTransformerConfig",
    "TrainConfig",
    "TrainHistory",
    "Vocab",
    "adam_step",
    "aggregate_runs",
    "annotate_bio",
    "build_contingency",
    "cramers_v",
    "cramers_v_corrected",
    "decode_keyphrases",
    "evaluate_corpus",
    "f1_at_k",
    "gen_synthetic",
    "grad_check",
    "load_jsonl",
    "lora_apply",
    "match_key",
    "porter_stem",
    "postprocess",
    "predict",
    "specialization_report",
    "split_validation",
    "tokenize",
    "trace_experts",
    "train",
]

__version__ = "0.1.0"
