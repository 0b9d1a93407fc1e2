"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Errors are printed
to stderr as a single JSON object.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .corpus import Instance, MoralLabel, RationaleAnnotation, corpus_stats, load_corpus, read_corpus, split_dataset
from .errors import ConfigError, NoAttention
from .evaluation import (
    DumpHeader,
    agreement_by_class,
    evaluate_dump,
    format_table,
    read_dump,
    write_dump,
)
from .evaluation.agreement import annotators_of
from .evaluation.rationale import dice, iou
from .llm.harness import OpenAICompatibleClient, run_eval, write_result
from .llm.templates import TEMPLATE_IDS
from .models import ATTENTION_KINDS, KINDS
from .trainer import TrainConfig, TrainedModel, evaluate_checkpoint, train

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


_TRAIN_HELP = {
    "batch_size": "mini-batch size",
    "lr": "AdamW learning rate",
    "max_len": "sequence length including [CLS] and [SEP]",
    "epochs": "training epochs (0 returns the initialized model)",
    "alpha": "weight of the attention alignment term; 0 disables it",
    "weight_decay": "AdamW weight decay",
    "seed": "seed for initialization and batch order",
    "task": "hate (binary) or moral (six moral labels)",
    "model_kind": f"one of {', '.join(KINDS)}",
    "encoder_id": "HuggingFace model id or local path (transformer only)",
    "embed_dim": "embedding size for non-transformer models",
    "rnn_hidden": "LSTM hidden size per direction",
    "cnn_filters": "filters per CNN kernel width",
    "min_freq": "minimum token count for the word vocabulary",
    "grad_clip": "max gradient norm; 'none' disables clipping",
    "alignment_target": "normalized (mask / sum) or binary alignment target",
    "use_alignment": "build with the alignment term (off gives a plain baseline)",
}

# evaluation options honoured by train and eval, with defaults
_EVAL_OPTIONS = {
    "ratios": ((0.8, 0.1, 0.1), "train/validation/test ratios"),
    "split_seed": (0, "seed of the stratified split"),
    "rationale_strategy": ("threshold", "threshold (a_i >= 1/V) or topk"),
    "top_k": (None, "tokens kept by the topk strategy"),
    "erasure": ("delete", "delete rationale tokens or substitute a mask token"),
}


def _optional_float(value: str):
    return None if value.lower() in ("none", "null") else float(value)


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("training configuration (flags override --config)")
    defaults = TrainConfig()
    types = {"grad_clip": _optional_float, "lr": float, "alpha": float, "weight_decay": float}
    for f in fields(TrainConfig):
        default = getattr(defaults, f.name)
        flag = "--" + f.name.replace("_", "-")
        help_ = f"{f.name}: {_TRAIN_HELP[f.name]} (default: {default})"
        if f.name == "use_alignment":
            g.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction,
                           default=argparse.SUPPRESS, help=help_)
        else:
            kind = types.get(f.name, type(default) if default is not None else str)
            kwargs = {"choices": ("hate", "moral")} if f.name == "task" else {}
            if f.name == "model_kind":
                kwargs = {"choices": KINDS}
            g.add_argument(flag, dest=f.name, type=kind, default=argparse.SUPPRESS, help=help_, **kwargs)


def _add_eval_flags(p: argparse.ArgumentParser, with_split: bool = True) -> None:
    g = p.add_argument_group("evaluation options")
    if with_split:
        g.add_argument("--ratios", type=float, nargs=3, default=argparse.SUPPRESS,
                       help="ratios: " + _EVAL_OPTIONS["ratios"][1] + " (default: 0.8 0.1 0.1)")
        g.add_argument("--split-seed", dest="split_seed", type=int, default=argparse.SUPPRESS,
                       help="split_seed: " + _EVAL_OPTIONS["split_seed"][1] + " (default: 0)")
    g.add_argument("--rationale-strategy", dest="rationale_strategy", choices=("threshold", "topk"),
                   default=argparse.SUPPRESS, help="rationale_strategy: " + _EVAL_OPTIONS["rationale_strategy"][1])
    g.add_argument("--top-k", dest="top_k", type=int, default=argparse.SUPPRESS,
                   help="top_k: " + _EVAL_OPTIONS["top_k"][1])
    g.add_argument("--erasure", choices=("delete", "substitute"), default=argparse.SUPPRESS,
                   help="erasure: " + _EVAL_OPTIONS["erasure"][1] + " (default: delete)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rationale-attention",
                                     description="Rationale-supervised attention: training and evaluation.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--log-level", default="WARNING", help="logging level (default: WARNING)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a corpus against the instance schema")
    p.add_argument("corpus", help="JSONL corpus")
    p.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("stats", help="label, rationale and metadata counts")
    p.add_argument("corpus", help="JSONL corpus")
    p.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("train", help="train a model and evaluate it on the test split")
    p.add_argument("--corpus", required=True, help="JSONL corpus")
    p.add_argument("--output-dir", required=True, help="directory for all artifacts")
    p.add_argument("--config", help="flat YAML file of configuration keys")
    _add_train_flags(p)
    _add_eval_flags(p)

    p = sub.add_parser("eval", help="score a prediction dump or a checkpoint")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--dump", help="prediction dump (JSONL) to score")
    src.add_argument("--checkpoint", help="checkpoint directory written by train")
    p.add_argument("--corpus", help="corpus to predict on (with --checkpoint)")
    p.add_argument("--split", choices=("train", "validation", "test", "all"), default="test",
                   help="split to evaluate with --checkpoint (default: test)")
    p.add_argument("--output-dir", help="write report.json and predictions.jsonl here")
    p.add_argument("--config", help="flat YAML file of evaluation keys")
    p.add_argument("--mode", choices=("strict", "adapted"), help="macro F1 mode (default: by task)")
    p.add_argument("--iou-strict", action="store_true", help="count IoU > 0.5 instead of >= 0.5")
    p.add_argument("--power", type=float, default=-5.0, help="GMB power (default: -5)")
    p.add_argument("--subgroups", nargs="+", help="subgroup tags, e.g. gender:female party:left")
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    _add_eval_flags(p)

    p = sub.add_parser("explain", help="attention and extracted rationale for one text")
    p.add_argument("--checkpoint", required=True, help="checkpoint directory")
    what = p.add_mutually_exclusive_group(required=True)
    what.add_argument("--id", help="instance id (requires --corpus)")
    what.add_argument("--text", help="free text")
    p.add_argument("--corpus", help="corpus holding --id")
    p.add_argument("--json", action="store_true", help="print a prediction dump (header + record)")
    _add_eval_flags(p, with_split=False)

    p = sub.add_parser("prompt-eval", help="score a chat model under one prompt template")
    p.add_argument("--template", required=True, choices=TEMPLATE_IDS, help="prompt template id")
    p.add_argument("--model", required=True, help="model id sent to the endpoint")
    p.add_argument("--corpus", required=True, help="JSONL corpus")
    p.add_argument("--cache-dir", help="response cache (default: <output-dir>/cache)")
    p.add_argument("--output-dir", default=".", help="directory for predictions and scores")
    p.add_argument("--offline", action="store_true", help="replay cached responses only")
    p.add_argument("--max-in-flight", type=int, default=4, help="concurrent requests (default: 4)")
    p.add_argument("--limit", type=int, help="only the first N instances")

    p = sub.add_parser("agreement", help="quadratic weighted kappa per annotation class")
    p.add_argument("corpus", help="JSONL corpus with all_annotators")
    p.add_argument("--annotators", nargs=2, help="annotator ids (default: first two found)")
    p.add_argument("--k", type=int, default=len(MoralLabel), help="number of label codes (default: 6)")
    p.add_argument("--classes", nargs="+", default=["A", "B", "C"], choices=("A", "B", "C"),
                   help="classes to score (A/B/C = first/second/third salience slot)")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    return parser


# ---------------------------------------------------------------------------
# configuration


def _read_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise UsageError(f"cannot parse config file {path}: {exc}") from None
    if not isinstance(data, dict) or any(isinstance(v, dict) for v in data.values()):
        raise UsageError("config file must be a flat mapping of keys to values")
    return data


def resolve_config(args: argparse.Namespace, train_keys: bool = True) -> tuple[TrainConfig | None, dict]:
    """Merge defaults < config file < explicit flags."""
    file_values = _read_config_file(getattr(args, "config", None))
    known = set(_EVAL_OPTIONS) | ({f.name for f in fields(TrainConfig)} if train_keys else set())
    unknown = set(file_values) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    flags = {k: v for k, v in vars(args).items() if k in known}
    merged = {**file_values, **flags}

    opts = {k: merged.get(k, default) for k, (default, _) in _EVAL_OPTIONS.items()}
    ratios = tuple(float(r) for r in opts["ratios"])
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1) > 1e-6:
        raise UsageError(f"--ratios must be three positive numbers summing to 1, got {list(ratios)}")
    opts["ratios"] = list(ratios)
    if opts["rationale_strategy"] == "topk" and not opts["top_k"]:
        raise UsageError("--rationale-strategy topk needs --top-k")

    config = None
    if train_keys:
        try:
            config = TrainConfig(**{k: v for k, v in merged.items() if k not in _EVAL_OPTIONS})
        except (ConfigError, TypeError) as exc:
            raise UsageError(str(exc)) from None
    return config, opts


def _dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args) -> int:
    instances, errors = read_corpus(args.corpus)
    if args.json:
        print(json.dumps({"valid": len(instances), "errors": [
            {"line": e.line, "path": e.path, "message": str(e)} for e in errors]}, ensure_ascii=False))
    else:
        for e in errors:
            print(e)
        print(f"{len(instances)} valid instance(s), {len(errors)} error(s)")
    return EXIT_OK if not errors else EXIT_FAILURE


def cmd_stats(args) -> int:
    stats = corpus_stats(load_corpus(args.corpus))
    if args.json:
        print(json.dumps(stats.to_dict(), indent=2, sort_keys=True, ensure_ascii=False))
        return EXIT_OK
    d = stats.to_dict()
    print(f"instances: {d['n']}")
    print("hate labels: " + ", ".join(f"{k}={v}" for k, v in d["hate_counts"].items()))
    for label, ranks in d["moral_counts"].items():
        print(f"  {label}: " + ", ".join(f"rank {r}={c}" for r, c in ranks.items()))
    print(f"rationale coverage: {d['rationale_coverage']:.3f}")
    for key, counts in d["metadata_marginals"].items():
        if counts:
            print(f"{key}: " + ", ".join(f"{k}={v}" for k, v in counts.items()))
    return EXIT_OK


def _split(instances, opts):
    try:
        return split_dataset(instances, opts["ratios"], opts["split_seed"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_train(args) -> int:
    config, opts = resolve_config(args)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json({"corpus": str(args.corpus), "train": config.to_dict(), "eval": opts}, out / "config.json")

    instances = load_corpus(args.corpus)
    split = _split(instances, opts)
    trained, history = train(config, split)
    ckpt = trained.save(out / "checkpoint")
    _dump_json({"ratios": opts["ratios"], "seed": opts["split_seed"]}, ckpt / "split.json")
    history.write_jsonl(out / "history.jsonl")
    history.write_steps(out / "train_log.jsonl")

    header, records = evaluate_checkpoint(trained, split.test, opts["rationale_strategy"], opts["top_k"],
                                          opts["erasure"])
    write_dump(out / "predictions.jsonl", header, records)
    report = evaluate_dump(records, header)
    (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    print(format_table(report, config.model_kind))
    return EXIT_OK


def cmd_eval(args) -> int:
    _, opts = resolve_config(args, train_keys=False)
    if args.dump:
        header, records = read_dump(args.dump)
    else:
        if not args.corpus:
            raise UsageError("--checkpoint needs --corpus")
        trained = TrainedModel.load(args.checkpoint)
        instances = load_corpus(args.corpus)
        if args.split != "all":
            saved = Path(args.checkpoint) / "split.json"
            if saved.exists() and "ratios" not in vars(args) and "split_seed" not in vars(args):
                s = json.loads(saved.read_text(encoding="utf-8"))
                opts["ratios"], opts["split_seed"] = s["ratios"], s["seed"]
            instances = getattr(_split(instances, opts), args.split)
        header, records = evaluate_checkpoint(trained, instances, opts["rationale_strategy"], opts["top_k"],
                                              opts["erasure"])
    if not records:
        raise UsageError("nothing to evaluate")
    report = evaluate_dump(records, header, mode=args.mode, subgroups=args.subgroups, power=args.power,
                           iou_strict=args.iou_strict)
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
        if not args.dump:
            write_dump(out / "predictions.jsonl", header, records)
    print(report.to_json() if args.json else format_table(report, header.model_kind or "model"))
    return EXIT_OK


def cmd_explain(args) -> int:
    _, opts = resolve_config(args, train_keys=False)
    trained = TrainedModel.load(args.checkpoint)
    if trained.config.model_kind not in ATTENTION_KINDS:
        raise NoAttention(f"model kind {trained.config.model_kind!r} has no attention to explain")
    if args.id is not None:
        if not args.corpus:
            raise UsageError("--id needs --corpus")
        matches = [i for i in load_corpus(args.corpus) if i.id == args.id]
        if not matches:
            raise UsageError(f"no instance with id {args.id!r}")
        inst, has_gold = matches[0], True
    else:
        inst = Instance("text", args.text, "NonHate", (RationaleAnnotation(MoralLabel.NN, 1, ()),))
        has_gold = False

    header, (rec,) = evaluate_checkpoint(trained, [inst], opts["rationale_strategy"], opts["top_k"],
                                         faithfulness=False)
    metrics = None
    if has_gold:
        m, h = np.asarray(rec.model_mask), np.asarray(rec.gold_mask)
        metrics = {"iou": iou(m, h), "token_f1": dice(m, h)}
    else:
        rec.gold_hate = rec.gold_moral_primary = None
        rec.gold_moral_set = []
        rec.gold_mask = []

    if args.json:
        header.extra = {"per_instance": {rec.id: metrics}} if metrics else {}
        header.n = 1
        print(json.dumps(header.to_dict(), ensure_ascii=False))
        print(json.dumps(rec.to_dict(), ensure_ascii=False))
        return EXIT_OK

    print(f"prediction: {rec.prediction}  probs: " + " ".join(f"{p:.3f}" for p in rec.class_probs))
    cols = f"{'token':<20}{'attention':>10}{'M':>4}" + (f"{'H':>4}" if has_gold else "")
    print(cols)
    for j, tok in enumerate(rec.tokens):
        line = f"{tok:<20}{rec.attention[j]:>10.4f}{rec.model_mask[j]:>4}"
        if has_gold:
            line += f"{rec.gold_mask[j]:>4}"
        print(line)
    if metrics:
        print(f"IoU: {metrics['iou']:.4f}  Token-F1: {metrics['token_f1']:.4f}")
    return EXIT_OK


def cmd_prompt_eval(args) -> int:
    instances = load_corpus(args.corpus)
    if args.limit is not None:
        instances = instances[: args.limit]
    out = Path(args.output_dir)
    cache_dir = Path(args.cache_dir) if args.cache_dir else out / "cache"
    client = None if args.offline else OpenAICompatibleClient()
    result = run_eval(client, instances, args.template, cache_dir, args.model, max_in_flight=args.max_in_flight)
    write_result(result, out)
    print(json.dumps({**result.scores(), "missing": len(result.missing)}, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_agreement(args) -> int:
    instances = load_corpus(args.corpus)
    names = list(args.annotators) if args.annotators else annotators_of(instances)
    if len(names) < 2:
        raise UsageError("agreement needs a corpus with at least two annotators (all_annotators)")
    if args.k < 2:
        raise UsageError("--k must be at least 2")
    scores = agreement_by_class(instances, names, k=args.k, classes=args.classes)
    if args.json:
        print(json.dumps({"annotators": names[:2], "k": args.k, "kappa": scores}, sort_keys=True))
        return EXIT_OK
    print(f"annotators: {names[0]} vs {names[1]}")
    for cls, value in scores.items():
        shown = "undefined (degenerate marginals)" if value is None else f"{value:.3f}"
        print(f"Class {cls}: {shown}")
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "stats": cmd_stats,
    "train": cmd_train,
    "eval": cmd_eval,
    "explain": cmd_explain,
    "prompt-eval": cmd_prompt_eval,
    "agreement": cmd_agreement,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(json.dumps({"error": "usage", "message": str(exc)}), file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - every failure becomes a structured exit
        logger.debug("command failed", exc_info=True)
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}, ensure_ascii=False),
              file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
