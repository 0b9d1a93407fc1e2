"""Full-scale run: fine-tune a pretrained encoder with rationale supervision
on the released corpus and compare test Macro F1 with a reference value.

Environment-dependent: needs the full corpus file, a downloadable (or local)
pretrained checkpoint and, realistically, a GPU-class machine. Not part of
the test suite.

    python scripts/reproduce_full.py --corpus corpus.jsonl
        --encoder neuralmind/bert-base-portuguese-cased --output-dir runs/full
"""

import argparse
import json
import sys
from pathlib import Path

from rationale_attention.corpus import load_corpus, split_dataset
from rationale_attention.evaluation import evaluate_dump, format_table, write_dump
from rationale_attention.trainer import TrainConfig, evaluate_checkpoint, train


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--corpus", required=True, help="full JSONL corpus")
    p.add_argument("--encoder", required=True, help="pretrained encoder id or path")
    p.add_argument("--output-dir", default="runs/full", help="artifact directory")
    p.add_argument("--task", default="hate", choices=("hate", "moral"))
    p.add_argument("--alpha", type=float, default=0.001, help="alignment weight (default: 0.001)")
    p.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target", type=float, default=0.9114, help="reference Macro F1 (default: 0.9114)")
    p.add_argument("--tolerance", type=float, default=0.02, help="allowed deviation (default: 0.02)")
    args = p.parse_args(argv)

    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    split = split_dataset(load_corpus(args.corpus), seed=args.seed)
    config = TrainConfig(model_kind="transformer", encoder_id=args.encoder, task=args.task,
                         alpha=args.alpha, epochs=args.epochs, seed=args.seed)
    trained, history = train(config, split)
    trained.save(out / "checkpoint")
    history.write_jsonl(out / "history.jsonl")
    header, records = evaluate_checkpoint(trained, split.test)
    write_dump(out / "predictions.jsonl", header, records)
    report = evaluate_dump(records, header)
    (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    print(format_table(report, "transformer"))

    ok = abs(report.macro_f1 - args.target) <= args.tolerance
    print(json.dumps({"macro_f1": report.macro_f1, "target": args.target,
                      "tolerance": args.tolerance, "within": ok}))
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
