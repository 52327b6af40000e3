"""Problem-transformation competitors trained on the one-hot feature view.

BR fits one classifier per class variable, CP one classifier over the class
combinations seen in training, CC a chain whose links also see one-hot
encodings of earlier class values (true values when fitting, predicted ones
at inference).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from gbnc.dataset import DatasetBundle, FeatureSchema, Instance, one_hot_matrix
from gbnc.losses import hamming_loss, subset_loss
from gbnc.inference import Loss, Prediction
from gbnc.local_learners import LearnerConfig, LocalModel, fit_arrays, predict_proba

Kind = Literal["br", "cp", "cc"]


@dataclass(frozen=True, eq=False)
class BaselineModel:
    kind: Kind
    schema: FeatureSchema
    models: tuple[LocalModel, ...]
    combos: np.ndarray | None = None
    order: tuple[int, ...] | None = None
    meta: dict = field(default_factory=dict)


def _require(bundle: DatasetBundle) -> None:
    if bundle.n_rows == 0 or not bundle.has_classes:
        raise ValueError("baselines need a non-empty training bundle with class columns")


def fit_br(bundle: DatasetBundle, learner: LearnerConfig) -> BaselineModel:
    _require(bundle)
    X = one_hot_matrix(bundle)
    models = tuple(
        fit_arrays(X, bundle.y[:, k], v.cardinality, learner, target=v.name)
        for k, v in enumerate(bundle.schema.classes)
    )
    return BaselineModel("br", bundle.schema, models)


def fit_cp(bundle: DatasetBundle, learner: LearnerConfig) -> BaselineModel:
    _require(bundle)
    combos, labels = np.unique(bundle.y, axis=0, return_inverse=True)
    labels = labels.reshape(-1)
    X = one_hot_matrix(bundle)
    if len(combos) == 1:
        # a single observed combination is predicted with certainty
        model = fit_arrays(X, labels, 2, LearnerConfig("cmle", smoothing=0.0), target="powerset")
    else:
        model = fit_arrays(X, labels, len(combos), learner, target="powerset")
    return BaselineModel("cp", bundle.schema, (model,), combos=combos)


def _chain_inputs(X: np.ndarray, labels: np.ndarray, cards: Sequence[int]) -> np.ndarray:
    blocks = [X] + [np.eye(c)[labels[:, j]] for j, c in enumerate(cards)]
    return np.hstack(blocks)


def _fit_chain(X: np.ndarray, Y: np.ndarray, schema: FeatureSchema, order: Sequence[int], learner: LearnerConfig) -> tuple[LocalModel, ...]:
    cards = schema.class_cards
    models = []
    for pos, k in enumerate(order):
        prev = list(order[:pos])
        inputs = _chain_inputs(X, Y[:, prev], [cards[j] for j in prev])
        models.append(fit_arrays(inputs, Y[:, k], cards[k], learner, target=schema.class_names[k]))
    return tuple(models)


def _run_chain(models: Sequence[LocalModel], order: Sequence[int], X: np.ndarray, cards: Sequence[int]) -> tuple[np.ndarray, list[np.ndarray]]:
    n = X.shape[0]
    pred = np.zeros((n, len(cards)), dtype=np.int64)
    probs: list[np.ndarray] = [None] * len(cards)  # type: ignore[list-item]
    for pos, k in enumerate(order):
        prev = list(order[:pos])
        p = predict_proba(models[pos], _chain_inputs(X, pred[:, prev], [cards[j] for j in prev]))
        pred[:, k] = np.argmax(p, axis=1)
        probs[k] = p
    return pred, probs


def candidate_orders(k: int, orders: int, rng: np.random.Generator) -> list[tuple[int, ...]]:
    """Schema order followed by ``orders - 1`` random permutations, duplicates removed."""
    out = [tuple(range(k))]
    for _ in range(orders - 1):
        perm = tuple(int(v) for v in rng.permutation(k))
        if perm not in out:
            out.append(perm)
    return out


def fit_cc(
    bundle: DatasetBundle,
    learner: LearnerConfig,
    orders: int = 11,
    split: float = 0.8,
    seed: int = 0,
    loss: Loss = "subset",
) -> BaselineModel:
    """Classifier chain whose order is picked on a held-out validation split."""
    _require(bundle)
    if orders < 2:
        raise ValueError("orders must be >= 2")
    rng = np.random.default_rng(seed)
    k = bundle.schema.n_classes
    cands = candidate_orders(k, orders, rng)
    X = one_hot_matrix(bundle)
    Y = np.asarray(bundle.y)
    cards = bundle.schema.class_cards
    scores = []
    if len(cands) > 1:
        perm = rng.permutation(bundle.n_rows)
        cut = max(1, min(bundle.n_rows - 1, int(round(split * bundle.n_rows))))
        tr, va = perm[:cut], perm[cut:]
        lossf = subset_loss if loss == "subset" else hamming_loss
        for order in cands:
            models = _fit_chain(X[tr], Y[tr], bundle.schema, order, learner)
            pred, _ = _run_chain(models, order, X[va], cards)
            scores.append(float(np.mean([lossf(a, b) for a, b in zip(Y[va], pred)])))
        best = int(np.argmin(scores))
    else:
        best = 0
    order = cands[best]
    models = _fit_chain(X, Y, bundle.schema, order, learner)
    return BaselineModel("cc", bundle.schema, models, order=order, meta={"orders": [list(o) for o in cands], "validation_loss": scores})


def baseline_distributions(model: BaselineModel, bundle: DatasetBundle) -> dict[str, object]:
    X = one_hot_matrix(bundle)
    cards = model.schema.class_cards
    if model.kind == "br":
        margs = [predict_proba(m, X) for m in model.models]
        pred = np.stack([np.argmax(p, axis=1) for p in margs], axis=1)
        return {"hamming": pred, "subset": pred, "marginals": margs}
    if model.kind == "cp":
        joint = predict_proba(model.models[0], X)[:, : len(model.combos)]
        subset = model.combos[np.argmax(joint, axis=1)]
        margs = []
        for k, c in enumerate(cards):
            onehot = np.eye(c)[model.combos[:, k]]
            margs.append(joint @ onehot)
        hamming = np.stack([np.argmax(p, axis=1) for p in margs], axis=1)
        return {"hamming": hamming, "subset": subset, "marginals": margs, "joint": joint}
    pred, probs = _run_chain(model.models, model.order, X, cards)
    return {"hamming": pred, "subset": pred, "marginals": probs}


def predict_baseline_bundle(model: BaselineModel, bundle: DatasetBundle, loss: str = "both") -> dict[str, np.ndarray]:
    out = baseline_distributions(model, bundle)
    keys = ("hamming", "subset") if loss == "both" else (loss,)
    return {k: np.asarray(out[k], dtype=np.int64) for k in keys} | {"marginals": out["marginals"]}


def predict_baseline(model: BaselineModel, instance: Instance, loss: Loss = "hamming") -> Prediction:
    bundle = DatasetBundle(
        model.schema,
        np.asarray(instance.x_c, dtype=np.float64).reshape(1, -1),
        np.asarray(instance.x_d, dtype=np.int64).reshape(1, -1),
        None,
    )
    out = baseline_distributions(model, bundle)
    y_hat = tuple(int(v) for v in out[loss][0])
    if model.kind == "cp":
        hit = np.flatnonzero((model.combos == np.array(y_hat)).all(axis=1))
        prob = float(out["joint"][0, hit[0]]) if hit.size else 0.0
    else:
        prob = float(np.prod([m[0, v] for m, v in zip(out["marginals"], y_hat)]))
    margs = tuple(m[0] for m in out["marginals"]) if loss == "hamming" else None
    return Prediction(y_hat, loss, prob, margs)
