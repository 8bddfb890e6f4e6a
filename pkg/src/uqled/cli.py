"""Batch command-line front end.

Six subcommands bind the library into file-in/file-out workflows:
inject (corrupt labels), detect (flag suspects), evaluate (score flags
against a mask), stats (correlation significance), experiment (the full
synthetic benchmark), validate (tensor file checks). Output is JSON by
default, `--format table` renders aligned text. Exit codes: 0 success,
1 usage error, 2 data or validation error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .ensembles import AlgorithmId, EnsembleConfig, detect
from .metrics import correlation_report, detection_metrics
from .noise import flip_profile, inject_noise, profile_from_json, similarity_scores
from .synthlab import ExperimentConfig, run_pipeline
from .tensors import (
    CorruptionMask,
    FlagSet,
    LabelVector,
    McdStack,
    ProbMatrix,
    TensorIOError,
    read_tensor,
    validate_prob_matrix,
    write_tensor,
)

__all__ = ["run_command", "main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; this artifact reserves 2 for data
    # errors, so route usage problems through exit code 1 instead
    def error(self, message):
        raise _UsageError(message)


def _fmt_of(path: str) -> str:
    return "csv" if Path(path).suffix.lower() == ".csv" else "binary"


def _load_matrix(path: str) -> ProbMatrix:
    value = read_tensor(path, _fmt_of(path))
    if not isinstance(value, ProbMatrix):
        raise TensorIOError(f"{path}: expected a probability matrix")
    return value


def _load_stack(path: str) -> McdStack:
    value = read_tensor(path, _fmt_of(path))
    if not isinstance(value, McdStack):
        raise TensorIOError(f"{path}: expected an MCD stack")
    return value


def _load_labels(path: str, num_classes: int | None = None) -> LabelVector:
    value = read_tensor(path, _fmt_of(path), num_classes=num_classes)
    if not isinstance(value, LabelVector):
        raise TensorIOError(f"{path}: expected a label vector")
    return value


def _require_valid_rows(name: str, P: ProbMatrix) -> None:
    violations = validate_prob_matrix(P)
    if violations:
        rows = ", ".join(f"{r} (sum {s:.6g})" for r, s in violations[:5])
        more = "" if len(violations) <= 5 else f" and {len(violations) - 5} more"
        raise ValueError(f"{name}: {len(violations)} invalid rows: {rows}{more}")


def _emit(payload: dict, args, table_lines=None) -> None:
    if getattr(args, "out", None):
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n")
    if args.format == "table" and table_lines is not None:
        print("\n".join(table_lines))
    else:
        print(json.dumps(payload, indent=2))


def _kv_lines(payload: dict) -> list[str]:
    width = max(len(k) for k in payload)
    lines = []
    for k, v in payload.items():
        if isinstance(v, float):
            v = f"{v:.6f}"
        lines.append(f"{k:<{width}}  {v}")
    return lines


# --- subcommands -------------------------------------------------------------

def _cmd_inject(args) -> int:
    if args.profile:
        profile, _ = profile_from_json(Path(args.profile).read_text())
    elif args.probs and args.test_labels:
        P_test = _load_matrix(args.probs)
        _require_valid_rows(args.probs, P_test)
        y_test = _load_labels(args.test_labels, num_classes=P_test.c)
        profile = flip_profile(similarity_scores(P_test, y_test))
    else:
        raise _UsageError("inject needs --profile, or --probs with --test-labels")

    labels = _load_labels(args.labels, num_classes=profile.num_classes)
    noisy, mask = inject_noise(labels, profile, args.tau, args.seed)

    payload = {
        "n": labels.n,
        "tau": args.tau,
        "seed": args.seed,
        "flipped_count": mask.num_flipped,
    }
    if args.out_labels:
        write_tensor(noisy, args.out_labels, _fmt_of(args.out_labels))
        payload["out_labels"] = args.out_labels
    else:
        payload["labels"] = noisy.labels.tolist()
    mask_payload = {
        "n": mask.n,
        "num_classes": labels.num_classes,
        "flipped": mask.flipped_indices.tolist(),
        "original_labels": labels.labels.tolist(),
    }
    if args.out_mask:
        Path(args.out_mask).write_text(json.dumps(mask_payload, indent=2) + "\n")
        payload["out_mask"] = args.out_mask
    else:
        payload["mask"] = mask_payload
    print(json.dumps(payload, indent=2))
    return 0


def _cmd_detect(args) -> int:
    probs = stack = None
    c = None
    if args.probs:
        probs = _load_matrix(args.probs)
        _require_valid_rows(args.probs, probs)
        c = probs.c
    if args.stack:
        stack = _load_stack(args.stack)
        for f in range(stack.num_passes):
            _require_valid_rows(f"{args.stack} (pass {f})", stack[f])
        c = stack.c if c is None else c
    if probs is None and stack is None:
        raise _UsageError("detect needs --probs and/or --stack")
    labels = _load_labels(args.labels, num_classes=c)

    cfg = None
    if args.m is not None:
        if stack is None:
            raise _UsageError("--m requires --stack")
        cfg = EnsembleConfig(m=args.m, member_count=stack.num_passes)
    flags = detect(AlgorithmId(args.alg), probs, stack, labels, cfg)

    payload = {
        "algorithm": args.alg,
        "n": labels.n,
        "count": len(flags),
        "flags": flags.indices.tolist(),
    }
    table = _kv_lines({"algorithm": args.alg, "n": labels.n, "count": len(flags)})
    table.append("flags  " + " ".join(str(i) for i in flags.indices))
    _emit(payload, args, table)
    return 0


def _read_flags_json(path: str) -> FlagSet:
    payload = json.loads(Path(path).read_text())
    return FlagSet(np.asarray(payload["flags"], dtype=np.int64))


def _read_mask_json(path: str) -> CorruptionMask:
    payload = json.loads(Path(path).read_text())
    originals = LabelVector(
        np.asarray(payload["original_labels"], dtype=np.int64),
        num_classes=int(payload["num_classes"]),
    )
    flipped = np.zeros(int(payload["n"]), dtype=bool)
    flipped[np.asarray(payload["flipped"], dtype=np.int64)] = True
    return CorruptionMask(flipped=flipped, original_labels=originals)


def _cmd_evaluate(args) -> int:
    flags = _read_flags_json(args.flags)
    mask = _read_mask_json(args.mask)
    scored = detection_metrics(flags, mask)
    payload = scored.to_dict()
    _emit(payload, args, _kv_lines(payload))
    return 0


def _cmd_stats(args) -> int:
    xs, ys = [], []
    for line in Path(args.pairs).read_text().strip().splitlines():
        parts = line.split(",")
        try:
            x, y = float(parts[0]), float(parts[1])
        except (ValueError, IndexError):
            if not xs:
                continue  # tolerate a single header line
            raise ValueError(f"{args.pairs}: malformed pair line {line!r}")
        xs.append(x)
        ys.append(y)
    report = correlation_report(xs, ys, alpha=args.alpha)
    payload = report.to_dict()
    _emit(payload, args, _kv_lines(payload))
    return 0


def _cmd_experiment(args) -> int:
    cfg = ExperimentConfig.from_dict(json.loads(Path(args.config).read_text()))
    report = run_pipeline(cfg)
    payload = report.to_dict()

    lines = [f"initial_accuracy_mean  {report.aggregates['initial_accuracy_mean']:.4f}"]
    for entry in report.aggregates["by_tau"]:
        lines.append("")
        lines.append(
            f"tau={entry['tau']:g}  noisy_accuracy_mean={entry['noisy_accuracy_mean']:.4f}"
        )
        lines.append(
            f"{'algorithm':<12} {'f1':>7} {'prec':>7} {'recall':>7} "
            f"{'removed':>8} {'clean_acc':>10}"
        )
        for alg, row in entry["algorithms"].items():
            lines.append(
                f"{alg:<12} {row['f1_mean']:>7.4f} {row['precision_mean']:>7.4f} "
                f"{row['recall_mean']:>7.4f} {row['removed_mean']:>8.1f} "
                f"{row['clean_accuracy_mean']:>10.4f}"
            )
    _emit(payload, args, lines)
    return 0


def _cmd_validate(args) -> int:
    value = read_tensor(args.file, _fmt_of(args.file))
    violations = []
    if isinstance(value, ProbMatrix):
        kind, shape = "matrix", [value.n, value.c]
        violations = validate_prob_matrix(value)
    elif isinstance(value, McdStack):
        kind, shape = "stack", [value.num_passes, value.n, value.c]
        for f in range(value.num_passes):
            violations.extend(
                (f, row, s) for row, s in validate_prob_matrix(value[f])
            )
    else:
        kind, shape = "labels", [value.n, value.num_classes]
    payload = {
        "file": args.file,
        "kind": kind,
        "shape": shape,
        "valid": not violations,
        "violations": [list(v) for v in violations],
    }
    print(json.dumps(payload, indent=2))
    return 0 if not violations else 2


# --- parser ------------------------------------------------------------------

def _build_parser() -> _Parser:
    parser = _Parser(prog="uqled", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--format", choices=("json", "table"), default="json")
        return p

    p = add("inject", _cmd_inject, "corrupt labels with class-dependent noise")
    p.add_argument("--labels", required=True, help="labels file to corrupt")
    p.add_argument("--profile", help="flip-profile JSON")
    p.add_argument("--probs", help="held-out probability matrix (for a fresh profile)")
    p.add_argument("--test-labels", help="labels aligned with --probs")
    p.add_argument("--tau", type=float, required=True, help="noise rate in [0,1]")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-labels", help="write noisy labels here")
    p.add_argument("--out-mask", help="write corruption mask JSON here")

    p = add("detect", _cmd_detect, "flag likely label errors")
    p.add_argument("--alg", required=True, choices=[a.value for a in AlgorithmId])
    p.add_argument("--probs", help="softmax probability matrix file")
    p.add_argument("--stack", help="MCD stack file")
    p.add_argument("--labels", required=True)
    p.add_argument("--m", type=int, help="vote threshold for cl-mcd-ens")
    p.add_argument("--out", help="write flag JSON here")

    p = add("evaluate", _cmd_evaluate, "score flags against a corruption mask")
    p.add_argument("--flags", required=True, help="flag JSON from detect")
    p.add_argument("--mask", required=True, help="mask JSON from inject")
    p.add_argument("--out")

    p = add("stats", _cmd_stats, "correlation significance test on x,y pairs")
    p.add_argument("--pairs", required=True, help="CSV of x,y rows")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out")

    p = add("experiment", _cmd_experiment, "run the synthetic benchmark")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out")

    p = add("validate", _cmd_validate, "check a tensor file")
    p.add_argument("--file", required=True)

    return parser


def run_command(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (TensorIOError, ValueError, KeyError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
