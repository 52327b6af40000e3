"""Command-line entry point: ``gbnc {train,predict,eval,synth}``.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from pathlib import Path
from typing import Sequence


from gbnc import model_io
from gbnc.baselines import BaselineModel, predict_baseline_bundle
from gbnc.dataset import load_csv, save_csv
from gbnc.errors import GbncError, SchemaMismatch
from gbnc.evaluation import METHODS, cross_validate, generate_synthetic, random_synthetic_spec
from gbnc.inference import predict_bundle
from gbnc.local_learners import LearnerConfig
from gbnc.model import train
from gbnc.scorer import write_score_tables
from gbnc.structure import format_dag, to_dag

log = logging.getLogger("gbnc")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits with 2 by default
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _learner(args) -> LearnerConfig:
    kwargs = {"family": args.learner}
    if args.l2 is not None:
        kwargs["l2_strength"] = args.l2
    if args.smoothing is not None:
        kwargs["smoothing"] = args.smoothing
    return LearnerConfig(**kwargs)


def _add_learning_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--learner", choices=("lr", "gnb", "cmle"), default="lr")
    p.add_argument("--l2", type=float, default=None, help="L2 strength for lr (default 1.0)")
    p.add_argument("--smoothing", type=float, default=None, help="pseudo-count for gnb/cmle (default 1.0)")
    p.add_argument("--max-parents", type=int, default=3)
    p.add_argument("--pruning", choices=("none", "safe", "heuristic"), default="safe")
    p.add_argument("--penalty", choices=("bic", "none"), default="bic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gbnc", description="Generalized Bayesian network classifiers for multi-dimensional classification")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="learn a model from a tagged CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True, help="output model file")
    p.add_argument("--out", help="directory for the score table and DAG exports")
    _add_learning_flags(p)

    p = sub.add_parser("predict", help="Bayes-optimal predictions for a CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--loss", choices=("hamming", "subset", "both"), default="both")
    p.add_argument("--marginals", action="store_true", help="also write per-variable marginal probabilities")
    p.add_argument("--out", help="output CSV (default stdout)")

    p = sub.add_parser("eval", help="k-fold cross-validation of several methods")
    p.add_argument("--data", required=True)
    p.add_argument("--methods", default="bnc,br,cp,cc", help=f"comma-separated subset of {','.join(METHODS)}")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--cc-orders", type=int, default=11)
    p.add_argument("--out", help="directory for report.json, report.txt and timings.json")
    _add_learning_flags(p)

    p = sub.add_parser("synth", help="sample a synthetic dataset from a random class network")
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--class-card", type=int, default=2)
    p.add_argument("--discrete", type=int, default=2)
    p.add_argument("--continuous", type=int, default=4)
    p.add_argument("--edges", default=None, help="class edges like '0-1,1-2' (default: a chain)")
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    return parser


def cmd_train(args) -> int:
    bundle = load_csv(args.data)
    result = train(bundle, _learner(args), args.max_parents, args.pruning, args.penalty, max(1, args.threads), args.seed)
    model_io.save_model(result.model, args.model)
    dag = format_dag(to_dag(result.model.assignment))
    scored = sum(len(t) for t in result.tables.values())
    pruned = sum(result.prune_counts.values())
    print(f"trained on {bundle.n_rows} rows: {scored} parent sets scored, {pruned} pruned")
    print(f"score {result.model.score!r}")
    print(dag, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "scores.tsv").open("w", encoding="utf-8") as fh:
            write_score_tables(result.tables, fh)
        (out / "dag.txt").write_text(dag, encoding="utf-8")
    return 0


def _prediction_table(model, bundle, loss: str, with_marginals: bool) -> str:
    schema = model.schema
    if isinstance(model, BaselineModel):
        pred = predict_baseline_bundle(model, bundle, loss)
        preds = {k: pred[k] for k in ("hamming", "subset") if k in pred}
        margs = pred["marginals"]
    else:
        batch = predict_bundle(model, bundle, loss)
        preds = {k: getattr(batch, k) for k in ("hamming", "subset") if getattr(batch, k) is not None}
        margs = batch.marginals
    header: list[str] = []
    cols: list[list[str]] = []
    for key, mat in preds.items():
        prefix = "y" if loss != "both" else key
        for k, v in enumerate(schema.classes):
            header.append(f"{prefix}:{v.name}")
            cols.append([v.states[s] for s in mat[:, k]])
    if with_marginals:
        for k, v in enumerate(schema.classes):
            for s, label in enumerate(v.states):
                header.append(f"p:{v.name}={label}")
                cols.append([repr(float(x)) for x in margs[k][:, s]])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(zip(*cols))
    return buf.getvalue()


def cmd_predict(args) -> int:
    model = model_io.load_model(args.model)
    bundle = load_csv(args.data, schema=model.schema, require_classes=False)
    text = _prediction_table(model, bundle.without_classes(), args.loss, args.marginals)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_eval(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise UsageError(f"unknown methods {bad}; choose from {','.join(METHODS)}")
    bundle = load_csv(args.data)
    report = cross_validate(
        bundle, methods, args.folds, args.seed, _learner(args), args.max_parents, args.pruning, args.penalty,
        args.cc_orders, max(1, args.threads),
    )
    table = report.format_table()
    print(table, end="")
    if args.out:
        import json

        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(report.to_json(), encoding="utf-8")
        (out / "report.txt").write_text(table, encoding="utf-8")
        (out / "timings.json").write_text(json.dumps(report.timings, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def _parse_edges(text: str | None, k: int) -> list[tuple[int, int]]:
    if text is None:
        return [(i, i + 1) for i in range(k - 1)]
    edges = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        a, _, b = part.partition("-")
        try:
            edges.append((int(a), int(b)))
        except ValueError:
            raise UsageError(f"bad edge {part!r}; expected 'parent-child'") from None
    return edges


def cmd_synth(args) -> int:
    spec = random_synthetic_spec(
        [args.class_card] * args.classes,
        _parse_edges(args.edges, args.classes),
        args.discrete,
        args.continuous,
        args.n,
        args.seed,
        separation=args.separation,
    )
    bundle, truth = generate_synthetic(spec)
    save_csv(bundle, args.out)
    print(f"wrote {bundle.n_rows} rows to {args.out}")
    print(f"bayes hamming risk {truth.bayes_hamming_risk(bundle):.6f}")
    print(f"bayes subset risk {truth.bayes_subset_risk(bundle):.6f}")
    return 0


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "eval": cmd_eval, "synth": cmd_synth}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"gbnc {args.command}: usage error: {exc}", file=sys.stderr)
        return 1
    except SchemaMismatch as exc:
        print(f"gbnc {args.command}: schema mismatch: {exc}", file=sys.stderr)
        return 2
    except (GbncError, FileNotFoundError, OSError, ValueError) as exc:
        print(f"gbnc {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
