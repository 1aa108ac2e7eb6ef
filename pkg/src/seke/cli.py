"""Command-line surface: train, predict, eval, analyze, ablate,
gen-synthetic.

Configuration comes from an optional JSON file (schema-validated, unknown
keys rejected) with command-line flags taking precedence. Reports are
dual-emitted: an aligned table on stdout and JSON at --out. Wall-clock
timings go to a ``<out>.meta.json`` sidecar so repeated runs produce
byte-identical primary artifacts.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime
failure (including divergence).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import analysis, checkpoint, data, evaluation, training
from .errors import ConfigError, DataError, SekeError
from .model import ModelConfig
from .training import TrainConfig


@dataclasses.dataclass
class RunConfig:
    model: ModelConfig = dataclasses.field(default_factory=ModelConfig)
    train: TrainConfig = dataclasses.field(default_factory=TrainConfig)
    eval_ks: list[int] = dataclasses.field(default_factory=lambda: [5, 10])


def load_run_config(path: str | None, overrides: dict) -> RunConfig:
    payload = {}
    if path:
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    unknown = set(payload) - {"model", "train", "eval_ks"}
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
    model_payload = dict(payload.get("model", {}))
    train_payload = dict(payload.get("train", {}))
    for key, value in overrides.items():
        if value is None:
            continue
        section, name = key.split(".", 1)
        (model_payload if section == "model" else train_payload)[name] = value
    cfg = RunConfig(
        model=_build(ModelConfig, model_payload, "model"),
        train=_build(TrainConfig, train_payload, "train"),
        eval_ks=[int(k) for k in payload.get("eval_ks", [5, 10])],
    )
    return cfg


def _build(cls, payload: dict, where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(payload) - names
    if unknown:
        raise ConfigError(f"unknown config key(s) in {where}: {sorted(unknown)}")
    try:
        return cls(**payload)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _write_json(path: str | None, payload: dict) -> None:
    if path:
        Path(path).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def _write_sidecar(path: str | None, payload: dict) -> None:
    if path:
        Path(str(path) + ".meta.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


# ---------------------------------------------------------------- commands


def cmd_gen_synthetic(args) -> int:
    docs, annotations = data.gen_synthetic(args.n_docs, args.seed, args.rule)
    data.save_jsonl(docs, args.out_docs)
    if args.out_annotations:
        data.save_annotations(annotations, args.out_annotations)
    print(f"wrote {len(docs)} documents to {args.out_docs}")
    return 0


def _load_split(args, cfg: RunConfig):
    if args.train_data and args.dev_data:
        return data.load_jsonl(args.train_data), data.load_jsonl(args.dev_data)
    if args.data:
        docs = data.load_jsonl(args.data)
        return training.split_validation(docs, args.seed if args.seed is not None else cfg.train.seed)
    raise ConfigError("provide either --data or both --train-data and --dev-data")


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    train_docs, dev_docs = _load_split(args, cfg)
    ckpt, history = training.train(cfg.model, cfg.train, train_docs, dev_docs)
    checkpoint.save(ckpt, args.checkpoint_out)
    best = history.epochs[history.best_epoch - 1]
    summary = {
        "best_epoch": history.best_epoch,
        "dev_metric": best.dev_metric,
        "selection_k": cfg.train.selection_k,
        "epochs_run": len(history.epochs),
        "train_loss": [e.train_loss for e in history.epochs],
        "dev_metrics": [e.dev_metric for e in history.epochs],
    }
    _write_json(args.out, summary)
    _write_sidecar(args.out or args.checkpoint_out, {
        "wall_time_per_epoch": [e.wall_time for e in history.epochs],
    })
    print(
        f"trained {len(history.epochs)} epoch(s); best epoch {history.best_epoch} "
        f"with dev F1@{cfg.train.selection_k} = {best.dev_metric:.4f}"
    )
    print(f"checkpoint written to {args.checkpoint_out}")
    return 0


def cmd_predict(args) -> int:
    ckpt = checkpoint.load(args.checkpoint)
    docs = data.load_jsonl(args.data)
    preds = training.predict(ckpt, docs, jobs=args.jobs)
    with open(args.out, "w", encoding="utf-8") as fh:
        for doc in docs:
            _, kp = preds[doc.id]
            fh.write(
                json.dumps(
                    {
                        "id": doc.id,
                        "keyphrases": [
                            {"text": p.text, "score": round(p.score, 6)}
                            for p in kp.phrases
                        ],
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    print(f"wrote predictions for {len(docs)} documents to {args.out}")
    return 0


def cmd_eval(args) -> int:
    golds = {d.id: d.keywords for d in data.load_jsonl(args.gold)}
    preds: dict[str, list[str]] = {}
    with open(args.pred, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{args.pred}:{lineno}: malformed JSON ({exc.msg})") from None
            preds[str(obj["id"])] = [p["text"] for p in obj.get("keyphrases", [])]
    ks = [int(k) for k in args.ks.split(",")]
    report = evaluation.evaluate_corpus(preds, golds, ks)
    print(report.to_table())
    _write_json(args.out, report.to_dict())
    return 0


def cmd_analyze(args) -> int:
    ckpt = checkpoint.load(args.checkpoint)
    model = ckpt.build_model()
    docs = data.load_jsonl(args.data)
    annotations = analysis.ingest_annotations(args.annotations) if args.annotations else None
    report = analysis.specialization_report(model, docs, annotations)
    if args.trace_out:
        analysis.dump_traces(analysis.trace_experts(model, docs), args.trace_out)
    print(report.to_table())
    for notice in report.notices:
        print(f"note: {notice}")
    _write_json(args.out, report.to_dict())
    return 0


ABLATION_ROWS = (
    ("base", False, False),
    ("moe", True, False),
    ("rnn", False, True),
    ("moe+rnn", True, True),
)


def cmd_ablate(args) -> int:
    cfg = _config_from_args(args)
    train_docs, dev_docs = _load_split(args, cfg)
    seeds = [int(s) for s in args.seeds.split(",")]
    ks = cfg.eval_ks
    golds = {d.id: d.keywords for d in dev_docs if d.keywords}
    table: dict[str, dict[int, tuple[float, float]]] = {}
    detail: dict[str, dict[str, list[float]]] = {}
    for row_name, moe_on, rnn_on in ABLATION_ROWS:
        reports = []
        for seed in seeds:
            model_cfg = dataclasses.replace(
                cfg.model, moe_enabled=moe_on, rnn_enabled=rnn_on
            )
            train_cfg = dataclasses.replace(cfg.train, seed=seed)
            ckpt, _ = training.train(model_cfg, train_cfg, train_docs, dev_docs)
            preds = training.predict(ckpt, dev_docs, jobs=args.jobs)
            reports.append(
                evaluation.evaluate_corpus(
                    {i: p for i, (_, p) in preds.items()}, golds, ks
                )
            )
        agg = evaluation.aggregate_runs(reports)
        table[row_name] = {k: agg[k]["f1"] for k in ks}
        detail[row_name] = {
            f"f1@{k}": [r.macro[k]["f1"] for r in reports] for k in ks
        }
    header = f"{'configuration':<14}" + "".join(f"  {'F1@' + str(k):>14}" for k in ks)
    print(header)
    for row_name, _, _ in ABLATION_ROWS:
        cells = "".join(
            f"  {table[row_name][k][0]:7.4f}±{table[row_name][k][1]:5.4f}" for k in ks
        )
        print(f"{row_name:<14}{cells}")
    _write_json(
        args.out,
        {
            "seeds": seeds,
            "ks": ks,
            "mean_std_f1": {
                row: {str(k): list(v) for k, v in cols.items()}
                for row, cols in table.items()
            },
            "per_seed": detail,
        },
    )
    return 0


def _config_from_args(args) -> RunConfig:
    overrides = {
        "model.d_model": args.d_model,
        "model.backbone": args.backbone,
        "model.n_experts": args.n_experts,
        "model.top_k": args.top_k,
        "model.moe_enabled": args.moe,
        "model.rnn_enabled": args.rnn,
        "model.num_layers": args.num_layers,
        "model.num_heads": args.num_heads,
        "model.dropout_p": args.dropout,
        "train.lr": args.lr,
        "train.max_epochs": args.max_epochs,
        "train.patience": args.patience,
        "train.batch_size": args.batch_size,
        "train.seed": args.seed,
        "train.freeze_mode": args.freeze_mode,
        "train.selection_k": args.selection_k,
    }
    return load_run_config(args.config, overrides)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--d-model", dest="d_model", type=int)
    p.add_argument("--backbone", choices=["transformer", "static"])
    p.add_argument("--n-experts", dest="n_experts", type=int)
    p.add_argument("--top-k", dest="top_k", type=int)
    p.add_argument("--num-layers", dest="num_layers", type=int)
    p.add_argument("--num-heads", dest="num_heads", type=int)
    p.add_argument("--dropout", type=float)
    moe_group = p.add_mutually_exclusive_group()
    moe_group.add_argument("--moe", action="store_const", const=True, default=None)
    moe_group.add_argument("--no-moe", dest="moe", action="store_const", const=False)
    rnn_group = p.add_mutually_exclusive_group()
    rnn_group.add_argument("--rnn", action="store_const", const=True, default=None)
    rnn_group.add_argument("--no-rnn", dest="rnn", action="store_const", const=False)
    p.add_argument("--lr", type=float)
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--freeze-mode", dest="freeze_mode", choices=["lora", "full", "frozen"])
    p.add_argument("--selection-k", dest="selection_k", type=int)
    p.add_argument("--data", help="single JSONL dataset, split 80/20 internally")
    p.add_argument("--train-data", dest="train_data")
    p.add_argument("--dev-data", dest="dev_data")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seke",
        description="Mixture-of-experts keyword extraction pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="generate a synthetic corpus")
    p.add_argument("--rule", choices=["marker", "vocabsplit"], required=True)
    p.add_argument("--n-docs", dest="n_docs", type=int, required=True)
    p.add_argument("--out-docs", dest="out_docs", required=True)
    p.add_argument("--out-annotations", dest="out_annotations")
    p.set_defaults(fn=cmd_gen_synthetic)

    p = sub.add_parser("train", help="fine-tune a model")
    _add_config_flags(p)
    p.add_argument("--checkpoint-out", dest="checkpoint_out", required=True)
    p.add_argument("--out", help="metrics JSON path")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("predict", help="run inference from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("eval", help="score predictions against gold keyphrases")
    p.add_argument("--pred", required=True, help="predictions JSONL")
    p.add_argument("--gold", required=True, help="gold documents JSONL")
    p.add_argument("--ks", default="5,10")
    p.add_argument("--out", help="report JSON path")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("analyze", help="expert-specialization report")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--annotations")
    p.add_argument("--trace-out", dest="trace_out")
    p.add_argument("--out", help="report JSON path")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("ablate", help="train the four head configurations")
    _add_config_flags(p)
    p.add_argument("--seeds", default="1,2,3,4,5")
    p.add_argument("--out", help="comparison JSON path")
    p.set_defaults(fn=cmd_ablate)

    for name, sp in sub.choices.items():
        sp.add_argument("--seed", type=int, default=None if name not in ("gen-synthetic",) else 0)
        sp.add_argument("--jobs", type=int, default=1)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return 2
    except DataError as exc:
        print(json.dumps({"error": "data", "message": str(exc)}), file=sys.stderr)
        return 3
    except SekeError as exc:
        print(json.dumps({"error": "runtime", "message": str(exc)}), file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
