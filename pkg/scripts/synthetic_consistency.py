"""Compare BNC-H and BR hamming loss against the Bayes risk on synthetic data.

Usage:
    python3 scripts/synthetic_consistency.py --seeds 10 --n 5000
    python3 scripts/synthetic_consistency.py --ladder 1000 5000 20000
"""

import argparse

import numpy as np

from gbnc.baselines import fit_br, predict_baseline_bundle
from gbnc.evaluation import generate_synthetic, random_synthetic_spec
from gbnc.inference import predict_bundle
from gbnc.local_learners import LearnerConfig
from gbnc.losses import mean_hamming
from gbnc.model import fit_gbnc


def run(seed: int, n: int, n_test: int, learner: LearnerConfig) -> dict[str, float]:
    spec = random_synthetic_spec([2, 2, 2], [(0, 1), (1, 2)], 2, 4, n, seed=seed)
    train, _ = generate_synthetic(spec)
    test, truth = generate_synthetic(spec.with_rows(n_test, seed + 1000))
    x = test.without_classes()
    bnc = predict_bundle(fit_gbnc(train, learner), x, "hamming").hamming
    br = predict_baseline_bundle(fit_br(train, learner), x, "hamming")["hamming"]
    return {
        "bayes": truth.bayes_hamming_risk(test),
        "bnc": mean_hamming(test.y, bnc),
        "br": mean_hamming(test.y, br),
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--n-test", type=int, default=5000)
    ap.add_argument("--ladder", type=int, nargs="*", help="training sizes to sweep instead of --n")
    ap.add_argument("--learner", default="lr", choices=["lr", "gnb"])
    args = ap.parse_args()
    learner = LearnerConfig(args.learner)
    sizes = args.ladder or [args.n]
    print(f"{'n':>7} {'bayes':>8} {'bnc-h':>8} {'br':>8} {'gap':>8}")
    for n in sizes:
        rows = [run(s, n, args.n_test, learner) for s in range(args.seeds)]
        mean = {k: float(np.mean([r[k] for r in rows])) for k in rows[0]}
        print(f"{n:>7} {mean['bayes']:8.4f} {mean['bnc']:8.4f} {mean['br']:8.4f} {mean['bnc'] - mean['bayes']:+8.4f}")


if __name__ == "__main__":
    main()
