"""Cross-validate every method on one or more tagged CSV files and print a rank table.

Usage:
    python3 scripts/run_cv.py data/a.csv data/b.csv --folds 10 --out results/
"""

import argparse
from pathlib import Path

from gbnc.dataset import load_csv
from gbnc.evaluation import METHODS, average_ranks_across, cross_validate
from gbnc.local_learners import LearnerConfig


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("data", nargs="+")
    ap.add_argument("--methods", default=",".join(METHODS))
    ap.add_argument("--folds", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--learner", default="lr", choices=["lr", "gnb", "cmle"])
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()
    methods = [m for m in args.methods.split(",") if m]
    reports = []
    for path in args.data:
        report = cross_validate(load_csv(path), methods, args.folds, args.seed, LearnerConfig(args.learner))
        reports.append(report)
        print(report.format_table())
        if args.out:
            args.out.mkdir(parents=True, exist_ok=True)
            (args.out / f"{Path(path).stem}.json").write_text(report.to_json(), encoding="utf-8")
    if len(reports) > 1 and len(methods) > 1:
        for loss in ("hamming", "subset"):
            ranks = average_ranks_across(reports, loss)
            print(f"average {loss} rank: " + "  ".join(f"{m} {r:.2f}" for m, r in ranks.items()))


if __name__ == "__main__":
    main()
