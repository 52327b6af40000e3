"""Cross-validation harness, synthetic generator with exact posteriors, rank summaries."""

from __future__ import annotations

import itertools
import json
import math
import time
import zlib
from dataclasses import asdict, dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.special import logsumexp
from scipy.stats import rankdata

from gbnc.dataset import DatasetBundle, make_bundle, make_folds
from gbnc.errors import InvalidSpec, TooFewMethods
from gbnc.local_learners import LearnerConfig
from gbnc.losses import mean_hamming, mean_subset
from gbnc.structure import topological_order

METHODS = ("bnc", "br", "cp", "cc")
LOSSES = ("hamming", "subset")


def derive_seed(seed: int, stream: str, *extra: int) -> int:
    """Independent named sub-stream of a single run seed."""
    ss = np.random.SeedSequence([seed, zlib.crc32(stream.encode()), *extra])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ClassConditional:
    """p(Y | parents, x_c) for one class variable.

    Parent configurations are flattened in C order over the discrete feature
    parents followed by the class parents. ``prior`` has shape (configs, M).
    With ``means`` of shape (configs, M, Q) the link is a class-conditional
    unit-variance Gaussian, p(y | pi, x) proportional to
    prior[pi, y] * exp(-|x - means[pi, y]|^2 / 2); without it the table is
    used as is and x_c is ignored.
    """

    prior: np.ndarray
    means: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class SyntheticSpec:
    class_cards: tuple[int, ...]
    class_edges: tuple[tuple[int, int], ...]
    discrete_cards: tuple[int, ...]
    n_continuous: int
    feature_parents: tuple[tuple[int, ...], ...]
    conditionals: tuple[ClassConditional, ...]
    discrete_priors: tuple[np.ndarray, ...]
    n_rows: int
    seed: int

    @property
    def n_classes(self) -> int:
        return len(self.class_cards)

    def class_parents(self, k: int) -> tuple[int, ...]:
        return tuple(p for p, c in self.class_edges if c == k)

    def topological(self) -> tuple[int, ...]:
        names = [str(i) for i in range(self.n_classes)]
        try:
            order = topological_order(names, [(str(p), str(c)) for p, c in self.class_edges])
        except Exception as exc:
            raise InvalidSpec(f"class edges are not acyclic: {self.class_edges}") from exc
        return tuple(int(o) for o in order)

    def validate(self) -> None:
        k = self.n_classes
        if k < 1 or any(c < 2 for c in self.class_cards) or any(c < 2 for c in self.discrete_cards):
            raise InvalidSpec("need K >= 1 and all cardinalities >= 2")
        if any(not (0 <= p < k and 0 <= c < k) or p == c for p, c in self.class_edges):
            raise InvalidSpec(f"bad class edge in {self.class_edges}")
        self.topological()
        if len(self.feature_parents) != k or len(self.conditionals) != k:
            raise InvalidSpec("one feature-parent tuple and one conditional per class variable")
        if len(self.discrete_priors) != len(self.discrete_cards):
            raise InvalidSpec("one prior per discrete feature")
        for pr, c in zip(self.discrete_priors, self.discrete_cards):
            if pr.shape != (c,) or not np.isclose(pr.sum(), 1.0) or np.any(pr < 0):
                raise InvalidSpec("discrete feature priors must be normalized vectors")
        for j in range(k):
            configs = self.parent_count(j)
            cond = self.conditionals[j]
            if cond.prior.shape != (configs, self.class_cards[j]):
                raise InvalidSpec(f"conditional {j} prior has shape {cond.prior.shape}, expected {(configs, self.class_cards[j])}")
            if np.any(cond.prior < 0) or not np.allclose(cond.prior.sum(axis=1), 1.0):
                raise InvalidSpec(f"conditional {j} prior rows must be normalized")
            if cond.means is not None and cond.means.shape != (configs, self.class_cards[j], self.n_continuous):
                raise InvalidSpec(f"conditional {j} means have shape {cond.means.shape}")
            if any(not 0 <= f < len(self.discrete_cards) for f in self.feature_parents[j]):
                raise InvalidSpec(f"feature parent out of range for class {j}")
        if self.n_rows < 1:
            raise InvalidSpec("n_rows must be positive")

    def parent_cards(self, k: int) -> tuple[int, ...]:
        return tuple(self.discrete_cards[f] for f in self.feature_parents[k]) + tuple(
            self.class_cards[p] for p in self.class_parents(k)
        )

    def parent_count(self, k: int) -> int:
        return math.prod(self.parent_cards(k))

    def with_rows(self, n_rows: int, seed: int) -> "SyntheticSpec":
        return SyntheticSpec(
            self.class_cards, self.class_edges, self.discrete_cards, self.n_continuous,
            self.feature_parents, self.conditionals, self.discrete_priors, n_rows, seed,
        )


def random_synthetic_spec(
    class_cards: Sequence[int],
    class_edges: Sequence[tuple[int, int]],
    n_discrete: int,
    n_continuous: int,
    n_rows: int,
    seed: int,
    discrete_card: int = 2,
    feature_parents: Sequence[Sequence[int]] | None = None,
    separation: float = 1.0,
    concentration: float = 1.0,
    link: Literal["gaussian", "categorical"] = "gaussian",
) -> SyntheticSpec:
    """Draw random conditionals for a given class DAG.

    By default every class variable has every discrete feature as a parent.
    """
    rng = np.random.default_rng(seed)
    k = len(class_cards)
    if feature_parents is None:
        feature_parents = [tuple(range(n_discrete))] * k
    discrete_cards = (discrete_card,) * n_discrete
    priors = tuple(rng.dirichlet(np.full(discrete_card, 5.0)) for _ in range(n_discrete))
    proto = SyntheticSpec(
        tuple(class_cards), tuple(map(tuple, class_edges)), discrete_cards, n_continuous,
        tuple(tuple(fp) for fp in feature_parents), (), priors, n_rows, seed,
    )
    conds = []
    for j in range(k):
        configs = proto.parent_count(j)
        prior = rng.dirichlet(np.full(class_cards[j], concentration), size=configs)
        means = None
        if link == "gaussian" and n_continuous:
            means = rng.normal(0.0, separation, size=(configs, class_cards[j], n_continuous))
        conds.append(ClassConditional(prior, means))
    spec = SyntheticSpec(
        proto.class_cards, proto.class_edges, discrete_cards, n_continuous,
        proto.feature_parents, tuple(conds), priors, n_rows, seed,
    )
    spec.validate()
    return spec


class SyntheticTruth:
    """Exact p(y | x) of a synthetic generator."""

    def __init__(self, spec: SyntheticSpec):
        self.spec = spec

    def _config_index(self, k: int, x_d: np.ndarray, classes: np.ndarray) -> np.ndarray:
        spec = self.spec
        cols = [x_d[:, f] for f in spec.feature_parents[k]] + [classes[:, p] for p in spec.class_parents(k)]
        cards = spec.parent_cards(k)
        if not cols:
            return np.zeros(x_d.shape[0], dtype=np.int64)
        return np.ravel_multi_index(tuple(cols), cards)

    def conditional_log_probs(self, k: int, x_c: np.ndarray, x_d: np.ndarray, classes: np.ndarray) -> np.ndarray:
        """log p(Y^k | parents, x_c) per row, shape (n, M_k)."""
        cond = self.spec.conditionals[k]
        idx = self._config_index(k, x_d, classes)
        with np.errstate(divide="ignore"):
            logits = np.log(cond.prior[idx])
        if cond.means is not None:
            diff = x_c[:, None, :] - cond.means[idx]
            logits = logits - 0.5 * np.sum(diff * diff, axis=2)
        return logits - logsumexp(logits, axis=1, keepdims=True)

    def log_posterior(self, bundle: DatasetBundle) -> np.ndarray:
        """log p(y | x) for every row and every class vector, shape (n, *cards)."""
        spec = self.spec
        n = bundle.n_rows
        cards = spec.class_cards
        out = np.zeros((n, *cards))
        grid = np.array(list(itertools.product(*(range(c) for c in cards))), dtype=np.int64)
        flat = out.reshape(n, -1)
        for g, y in enumerate(grid):
            ys = np.broadcast_to(y, (n, len(cards)))
            total = np.zeros(n)
            for k in range(spec.n_classes):
                lp = self.conditional_log_probs(k, bundle.x_c, bundle.x_d, ys)
                total += lp[:, y[k]]
            flat[:, g] = total
        return out

    def posterior_marginals(self, bundle: DatasetBundle) -> list[np.ndarray]:
        joint = np.exp(self.log_posterior(bundle))
        k = self.spec.n_classes
        return [joint.sum(axis=tuple(1 + a for a in range(k) if a != i)) for i in range(k)]

    def bayes_hamming_risk(self, bundle: DatasetBundle) -> float:
        """Expected Hamming loss of the Bayes-optimal predictor, averaged over rows."""
        margs = self.posterior_marginals(bundle)
        return float(np.mean([1.0 - m.max(axis=1) for m in margs]))

    def bayes_subset_risk(self, bundle: DatasetBundle) -> float:
        joint = np.exp(self.log_posterior(bundle)).reshape(bundle.n_rows, -1)
        return float(np.mean(1.0 - joint.max(axis=1)))

    def bayes_hamming_predictions(self, bundle: DatasetBundle) -> np.ndarray:
        return np.stack([m.argmax(axis=1) for m in self.posterior_marginals(bundle)], axis=1)


def generate_synthetic(spec: SyntheticSpec) -> tuple[DatasetBundle, SyntheticTruth]:
    """Ancestral sampling: features from their priors, then classes in topological order."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n = spec.n_rows
    x_d = np.zeros((n, len(spec.discrete_cards)), dtype=np.int64)
    for j, prior in enumerate(spec.discrete_priors):
        x_d[:, j] = rng.choice(len(prior), size=n, p=prior)
    x_c = rng.normal(size=(n, spec.n_continuous))
    truth = SyntheticTruth(spec)
    y = np.zeros((n, spec.n_classes), dtype=np.int64)
    for k in spec.topological():
        probs = np.exp(truth.conditional_log_probs(k, x_c, x_d, y))
        u = rng.random(n)
        cdf = np.cumsum(probs, axis=1)
        y[:, k] = np.minimum((u[:, None] > cdf).sum(axis=1), spec.class_cards[k] - 1)
    bundle = make_bundle(
        x_c,
        x_d,
        y,
        continuous=[f"x{j}" for j in range(spec.n_continuous)],
        discrete=[(f"d{j}", c) for j, c in enumerate(spec.discrete_cards)],
        classes=[(f"Y{k + 1}", c) for k, c in enumerate(spec.class_cards)],
    )
    return bundle, truth


# ---------------------------------------------------------------------------
# cross-validation
# ---------------------------------------------------------------------------


@dataclass
class EvalReport:
    dataset: str
    methods: tuple[str, ...]
    fold_count: int
    seed: int
    learner: dict
    test_sizes: list[int]
    hamming: dict[str, list[float]]
    subset: dict[str, list[float]]
    fallbacks: dict[str, list[int]] = field(default_factory=dict)
    timings: dict[str, dict[str, float]] = field(default_factory=dict)

    def losses(self, loss: str) -> dict[str, list[float]]:
        if loss not in LOSSES:
            raise ValueError(f"unknown loss {loss!r}")
        return self.hamming if loss == "hamming" else self.subset

    def mean(self, method: str, loss: str) -> float:
        return float(np.mean(self.losses(loss)[method]))

    def std(self, method: str, loss: str) -> float:
        return float(np.std(self.losses(loss)[method]))

    def to_dict(self, include_timings: bool = False) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        d["summary"] = {
            m: {loss: {"mean": self.mean(m, loss), "std": self.std(m, loss)} for loss in LOSSES} for m in self.methods
        }
        d["ranks"] = {loss: _ranks_or_ones(self, loss) for loss in LOSSES}
        if not include_timings:
            d.pop("timings")
        return d

    def to_json(self, include_timings: bool = False) -> str:
        return json.dumps(self.to_dict(include_timings), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        d = json.loads(text)
        for key in ("summary", "ranks"):
            d.pop(key, None)
        d["methods"] = tuple(d["methods"])
        return cls(**d)

    def format_table(self) -> str:
        """Percent-scaled ``mean ± std (rank)`` table, one row per method."""
        ranks = {loss: _ranks_or_ones(self, loss) for loss in LOSSES}
        width = max(len(m) for m in self.methods + ("method",))
        lines = [f"{self.dataset}: {self.fold_count}-fold CV, seed {self.seed}"]
        lines.append(f"{'method':<{width}}  {'hamming %':>22}  {'subset 0/1 %':>22}")
        for m in self.methods:
            cells = []
            for loss in LOSSES:
                cells.append(f"{100 * self.mean(m, loss):6.2f} ± {100 * self.std(m, loss):5.2f} ({ranks[loss][m]:.1f})")
            lines.append(f"{m:<{width}}  {cells[0]:>22}  {cells[1]:>22}")
        return "\n".join(lines) + "\n"


def _ranks_or_ones(report: EvalReport, loss: str) -> dict[str, float]:
    if len(report.methods) < 2:
        return {m: 1.0 for m in report.methods}
    return average_ranks(report, loss)


def average_ranks(report: EvalReport, loss: str = "hamming") -> dict[str, float]:
    """Rank methods per fold by ascending loss (ties share the mean rank), then average."""
    if len(report.methods) < 2:
        raise TooFewMethods("ranking needs at least two methods")
    table = np.array([report.losses(loss)[m] for m in report.methods])
    ranks = np.array([rankdata(table[:, f]) for f in range(table.shape[1])])
    return {m: float(r) for m, r in zip(report.methods, ranks.mean(axis=0))}


def average_ranks_across(reports: Sequence[EvalReport], loss: str = "hamming") -> dict[str, float]:
    """Rank methods per dataset by mean loss and average over datasets."""
    methods = reports[0].methods
    if len(methods) < 2:
        raise TooFewMethods("ranking needs at least two methods")
    table = np.array([[r.mean(m, loss) for m in methods] for r in reports])
    ranks = np.array([rankdata(row) for row in table])
    return {m: float(v) for m, v in zip(methods, ranks.mean(axis=0))}


def fit_and_predict(
    method: str,
    train: DatasetBundle,
    test: DatasetBundle,
    learner: LearnerConfig,
    max_parents: int = 3,
    pruning: str = "safe",
    penalty: str = "bic",
    seed: int = 0,
    cc_orders: int = 11,
    threads: int = 1,
) -> tuple[dict[str, np.ndarray], dict[str, float], int]:
    """Train one method and predict both losses on ``test``."""
    from gbnc.baselines import fit_br, fit_cc, fit_cp, predict_baseline_bundle
    from gbnc.inference import predict_bundle
    from gbnc.model import train as train_gbnc

    t0 = time.perf_counter()
    fallback = 0
    if method == "bnc":
        model = train_gbnc(train, learner, max_parents, pruning, penalty, threads, seed).model
        t1 = time.perf_counter()
        pred = predict_bundle(model, test.without_classes(), "both")
        out = {"hamming": pred.hamming, "subset": pred.subset}
        fallback = int(pred.fallback.sum())
    else:
        if method == "br":
            model = fit_br(train, learner)
        elif method == "cp":
            model = fit_cp(train, learner)
        elif method == "cc":
            model = fit_cc(train, learner, orders=cc_orders, seed=seed)
        else:
            raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
        t1 = time.perf_counter()
        out = predict_baseline_bundle(model, test.without_classes(), "both")
    t2 = time.perf_counter()
    return out, {"train": t1 - t0, "predict": t2 - t1}, fallback


def cross_validate(
    bundle: DatasetBundle,
    methods: Sequence[str] = ("bnc", "br"),
    folds: int = 10,
    seed: int = 0,
    learner: LearnerConfig | None = None,
    max_parents: int = 3,
    pruning: str = "safe",
    penalty: str = "bic",
    cc_orders: int = 11,
    threads: int = 1,
) -> EvalReport:
    """k-fold CV; each GBNC is trained once per fold and scored under both decision rules."""
    learner = learner or LearnerConfig()
    methods = tuple(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; expected one of {METHODS}")
    plan = make_folds(bundle, folds, derive_seed(seed, "folds"))
    report = EvalReport(
        dataset=bundle.source,
        methods=methods,
        fold_count=folds,
        seed=seed,
        learner=asdict(learner),
        test_sizes=plan.sizes(),
        hamming={m: [] for m in methods},
        subset={m: [] for m in methods},
        fallbacks={m: [] for m in methods},
        timings={m: {"train": 0.0, "predict": 0.0} for m in methods},
    )
    for f in range(folds):
        train = bundle.subset(plan.train_rows(f))
        test = bundle.subset(plan.test_rows(f))
        for m in methods:
            pred, timing, fallback = fit_and_predict(
                m, train, test, learner, max_parents, pruning, penalty, derive_seed(seed, m, f), cc_orders, threads
            )
            report.hamming[m].append(mean_hamming(test.y, pred["hamming"]))
            report.subset[m].append(mean_subset(test.y, pred["subset"]))
            report.fallbacks[m].append(fallback)
            for phase, t in timing.items():
                report.timings[m][phase] += t
    return report
