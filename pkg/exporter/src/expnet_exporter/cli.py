"""Command-line interface for trace export.

Exit codes: 0 success, 1 export/validation failure, 2 runtime errors.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .export import ExportJob, export
from .synthetic import SynthSpec, generate_dataset, generate_synthetic
from .tracefile import ExportError, write_manifest_from_traces


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="expnet-export",
        description="Produce attention-trace files for the expnet-kit toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="run a classifier checkpoint and export traces")
    p.add_argument("--checkpoint", required=True, help="model/tokenizer checkpoint directory")
    p.add_argument("--data", required=True, help="annotated dataset file")
    p.add_argument("--data-format", default="generic", choices=["generic", "hatexplain"])
    p.add_argument("--dataset-id", required=True)
    p.add_argument("--out", required=True, help="trace file to write")
    p.add_argument("--max-len", type=int, default=128, help="skip longer examples")
    p.add_argument("--device", default="cpu")

    p = sub.add_parser("synth", help="generate a planted-rule synthetic trace file")
    p.add_argument("--n", type=int, required=True, help="number of examples")
    p.add_argument("--heads", type=int, default=12)
    p.add_argument("--vocab-size", type=int, default=30)
    p.add_argument("--vocab-prefix", default="word")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--dataset-id", default="synthetic")
    p.add_argument("--out", required=True)

    p = sub.add_parser(
        "synth-dataset", help="generate train/test trace files plus a manifest"
    )
    p.add_argument("--n-train", type=int, required=True)
    p.add_argument("--n-test", type=int, required=True)
    p.add_argument("--heads", type=int, default=12)
    p.add_argument("--vocab-size", type=int, default=30)
    p.add_argument("--vocab-prefix", default="word")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--dataset-id", required=True)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("manifest", help="assemble a manifest from existing trace files")
    p.add_argument("--dataset-id", required=True)
    p.add_argument("--train", nargs="+", required=True, help="train trace files (relative to --out's directory)")
    p.add_argument("--test", nargs="*", default=[], help="test trace files")
    p.add_argument("--validation", nargs="*", default=[], help="validation trace files")
    p.add_argument("--out", required=True, help="manifest path to write")

    return parser


def _vocab(prefix: str, size: int) -> list[str]:
    return [f"{prefix}{i:02d}" for i in range(size)]


def _cmd_export(args) -> int:
    job = ExportJob(
        model_ref=args.checkpoint,
        data_path=args.data,
        data_format=args.data_format,
        dataset_id=args.dataset_id,
        output_path=args.out,
        max_sequence_length=args.max_len,
        device=args.device,
    )
    stats = export(job)
    print(
        f"exported {stats.n_exported} traces to {args.out} "
        f"(heads={stats.num_heads}, skipped {stats.n_skipped_too_long} over length)"
    )
    return 0


def _cmd_synth(args) -> int:
    spec = SynthSpec(
        n_examples=args.n,
        num_heads=args.heads,
        vocab=_vocab(args.vocab_prefix, args.vocab_size),
        rule_seed=args.seed,
        dataset_id=args.dataset_id,
    )
    n = generate_synthetic(spec, args.out)
    print(f"wrote {n} synthetic traces to {args.out}")
    return 0


def _cmd_synth_dataset(args) -> int:
    manifest = generate_dataset(
        args.out_dir,
        args.dataset_id,
        n_train=args.n_train,
        n_test=args.n_test,
        num_heads=args.heads,
        vocab=_vocab(args.vocab_prefix, args.vocab_size),
        rule_seed=args.seed,
    )
    print(f"wrote dataset {args.dataset_id} with manifest {manifest}")
    return 0


def _cmd_manifest(args) -> int:
    splits = {"train": args.train}
    if args.test:
        splits["test"] = args.test
    if args.validation:
        splits["validation"] = args.validation
    manifest = write_manifest_from_traces(args.out, args.dataset_id, splits)
    print(
        f"wrote manifest {args.out} "
        f"(K={manifest['avg_rationale_k']}, positive_rate={manifest['positive_rate']:.4f})"
    )
    return 0


_COMMANDS = {
    "export": _cmd_export,
    "synth": _cmd_synth,
    "synth-dataset": _cmd_synth_dataset,
    "manifest": _cmd_manifest,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return _COMMANDS[args.command](args)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def console_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_entry()
