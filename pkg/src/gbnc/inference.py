"""Per-instance class networks and Bayes-optimal predictions.

For a test instance the learned model induces a Bayesian network over the
class variables alone: the CPT row of ``Y`` under a class-parent
configuration is the local model selected by the instance's discrete
features together with that configuration, evaluated at the instance's
continuous features. Hamming loss is minimized by per-variable marginal
argmaxes, subset 0/1 loss by the most probable explanation (MPE).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.special import logsumexp

from gbnc.dataset import Configuration, DatasetBundle, Instance
from gbnc.errors import DimensionMismatch
from gbnc.local_learners import predict_proba
from gbnc.model import GbncModel

Loss = Literal["hamming", "subset"]
EXHAUSTIVE_LIMIT = 4096
ORACLE_LIMIT = 1_000_000


@dataclass(frozen=True, eq=False)
class ClassNetwork:
    """Bayesian network over class variables with explicit CPT arrays.

    ``cpts[i]`` has one axis per class parent of node ``i`` (in
    ``parents[i]`` order) followed by the node's own axis.
    """

    nodes: tuple[str, ...]
    cards: tuple[int, ...]
    parents: tuple[tuple[int, ...], ...]
    cpts: tuple[np.ndarray, ...]
    fallback_count: int = 0
    evaluations: int = 0

    def __post_init__(self) -> None:
        for i, cpt in enumerate(self.cpts):
            expected = tuple(self.cards[p] for p in self.parents[i]) + (self.cards[i],)
            if cpt.shape != expected:
                raise DimensionMismatch(f"CPT of {self.nodes[i]!r} has shape {cpt.shape}, expected {expected}")

    @property
    def size(self) -> int:
        return math.prod(self.cards)

    @classmethod
    def from_tables(cls, nodes: Sequence[str], cards: Sequence[int], parents: dict[str, Sequence[str]], cpts: dict[str, np.ndarray]) -> "ClassNetwork":
        idx = {n: i for i, n in enumerate(nodes)}
        return cls(
            tuple(nodes),
            tuple(cards),
            tuple(tuple(idx[p] for p in parents.get(n, ())) for n in nodes),
            tuple(np.asarray(cpts[n], dtype=np.float64) for n in nodes),
        )


@dataclass(frozen=True)
class Prediction:
    y_hat: tuple[int, ...]
    loss: Loss
    joint_prob: float
    marginals: tuple[np.ndarray, ...] | None = None
    fallback_count: int = 0


# ---------------------------------------------------------------------------
# building networks
# ---------------------------------------------------------------------------


@dataclass
class CptBatch:
    """CPTs for a batch of rows.

    ``cpts`` holds one array per class variable of shape
    ``(n, *class_parent_cards, M)``; ``fallback`` counts, per row, the CPT
    rows that fell back to uniform and ``evaluations`` the CPT rows filled
    (one local-model lookup each).
    """

    cpts: list[np.ndarray]
    fallback: np.ndarray
    evaluations: np.ndarray


def batch_cpts(model: GbncModel, bundle: DatasetBundle) -> CptBatch:
    """Materialize the class-network CPTs of every row of ``bundle``."""
    schema = model.schema
    if bundle.schema.continuous != schema.continuous or bundle.schema.discrete != schema.discrete:
        raise DimensionMismatch("instance schema does not match the model schema")
    n = bundle.n_rows
    fallback = np.zeros(n, dtype=np.int64)
    evaluations = np.zeros(n, dtype=np.int64)
    out = []
    for t in schema.class_names:
        delta = model.parents(t)
        m = schema.variable(t).cardinality
        feat = [p for p in delta if not schema.is_class(p)]
        cls = [p for p in delta if schema.is_class(p)]
        cls_cards = [schema.variable(p).cardinality for p in cls]
        cpt = np.empty((n, *cls_cards, m))
        feat_states = bundle.columns(feat)
        keys, inverse = np.unique(feat_states, axis=0, return_inverse=True) if feat else (np.zeros((1, 0), dtype=np.int64), np.zeros(n, dtype=np.int64))
        inverse = inverse.reshape(-1)
        models = model.local_models[t]
        for g, key in enumerate(keys):
            rows = np.flatnonzero(inverse == g)
            fixed = dict(zip(feat, (int(s) for s in key)))
            for combo in itertools.product(*(range(c) for c in cls_cards)):
                fixed.update(zip(cls, combo))
                conf = Configuration(delta, tuple(fixed[p] for p in delta))
                local = models.get(conf)
                evaluations[rows] += 1
                if local is None:
                    cpt[(rows, *combo)] = 1.0 / m
                    fallback[rows] += 1
                else:
                    cpt[(rows, *combo)] = predict_proba(local, bundle.x_c[rows])
        out.append(cpt)
    return CptBatch(out, fallback, evaluations)


def _network_for_row(model: GbncModel, batch: CptBatch, r: int) -> ClassNetwork:
    schema = model.schema
    idx = {n: i for i, n in enumerate(schema.class_names)}
    parents = tuple(tuple(idx[p] for p in model.class_parents(t)) for t in schema.class_names)
    return ClassNetwork(
        schema.class_names,
        schema.class_cards,
        parents,
        tuple(c[r] for c in batch.cpts),
        int(batch.fallback[r]),
        int(batch.evaluations[r]),
    )


def _as_bundle(model: GbncModel, instance: Instance) -> DatasetBundle:
    x_c = np.asarray(instance.x_c, dtype=np.float64).reshape(1, -1)
    x_d = np.asarray(instance.x_d, dtype=np.int64).reshape(1, -1)
    if x_c.shape[1] != len(model.schema.continuous) or x_d.shape[1] != len(model.schema.discrete):
        raise DimensionMismatch(
            f"instance has {x_c.shape[1]} continuous / {x_d.shape[1]} discrete values, "
            f"model expects {len(model.schema.continuous)} / {len(model.schema.discrete)}"
        )
    return DatasetBundle(model.schema, x_c, x_d, None)


def instantiate_class_network(model: GbncModel, instance: Instance) -> ClassNetwork:
    return _network_for_row(model, batch_cpts(model, _as_bundle(model, instance)), 0)


# ---------------------------------------------------------------------------
# exhaustive routines (also the oracles)
# ---------------------------------------------------------------------------


def log_joint_table(net: ClassNetwork, limit: int = ORACLE_LIMIT) -> np.ndarray:
    """Log joint over all class vectors, axes in node order."""
    if net.size > limit:
        raise ValueError(f"joint space of size {net.size} exceeds enumeration limit {limit}")
    k = len(net.nodes)
    total = np.zeros(net.cards)
    with np.errstate(divide="ignore"):
        for i in range(k):
            axes = net.parents[i] + (i,)
            table = np.log(net.cpts[i])
            order = np.argsort(axes)
            table = np.transpose(table, order)
            shape = [1] * k
            for a in axes:
                shape[a] = net.cards[a]
            total = total + table.reshape(shape)
    return total


def joint_prob(net: ClassNetwork, y: Sequence[int]) -> float:
    """Product of CPT lookups for one class vector."""
    y = tuple(int(v) for v in y)
    if len(y) != len(net.nodes):
        raise DimensionMismatch(f"expected {len(net.nodes)} class states, got {len(y)}")
    logp = 0.0
    for i, cpt in enumerate(net.cpts):
        p = cpt[tuple(y[q] for q in net.parents[i]) + (y[i],)]
        if p <= 0.0:
            return 0.0
        logp += math.log(p)
    return math.exp(logp)


def mpe_exhaustive(net: ClassNetwork, limit: int = ORACLE_LIMIT) -> tuple[int, ...]:
    flat = int(np.argmax(log_joint_table(net, limit)))
    return tuple(int(v) for v in np.unravel_index(flat, net.cards))


def marginals_exhaustive(net: ClassNetwork, limit: int = ORACLE_LIMIT) -> list[np.ndarray]:
    joint = np.exp(log_joint_table(net, limit))
    k = len(net.nodes)
    out = []
    for i in range(k):
        m = joint.sum(axis=tuple(a for a in range(k) if a != i))
        out.append(m / m.sum())
    return out


# ---------------------------------------------------------------------------
# variable elimination in log space
# ---------------------------------------------------------------------------


@dataclass
class _Factor:
    scope: tuple[int, ...]
    table: np.ndarray


def _factors(net: ClassNetwork) -> list[_Factor]:
    out = []
    with np.errstate(divide="ignore"):
        for i, cpt in enumerate(net.cpts):
            out.append(_Factor(net.parents[i] + (i,), np.log(cpt)))
    return out


def _product(factors: list[_Factor], cards: Sequence[int]) -> _Factor:
    scope = tuple(sorted({v for f in factors for v in f.scope}))
    total = np.zeros([cards[v] for v in scope])
    for f in factors:
        perm = np.argsort(f.scope)
        table = np.transpose(f.table, perm)
        shape = [cards[v] if v in f.scope else 1 for v in scope]
        total = total + table.reshape(shape)
    return _Factor(scope, total)


def min_fill_order(net: ClassNetwork, keep: Sequence[int] = ()) -> list[int]:
    """Greedy min-fill elimination order over the moral graph, skipping ``keep``."""
    k = len(net.nodes)
    adj = {i: set() for i in range(k)}
    for i in range(k):
        fam = net.parents[i] + (i,)
        for a in fam:
            adj[a].update(b for b in fam if b != a)
    remaining = [i for i in range(k) if i not in keep]
    order = []
    while remaining:
        def fill(v: int) -> int:
            nb = list(adj[v])
            return sum(1 for a, b in itertools.combinations(nb, 2) if b not in adj[a])

        v = min(remaining, key=lambda u: (fill(u), u))
        nb = list(adj[v])
        for a, b in itertools.combinations(nb, 2):
            adj[a].add(b)
            adj[b].add(a)
        for a in nb:
            adj[a].discard(v)
        del adj[v]
        remaining.remove(v)
        order.append(v)
    return order


def induced_width(net: ClassNetwork, order: Sequence[int]) -> int:
    k = len(net.nodes)
    adj = {i: set() for i in range(k)}
    for i in range(k):
        fam = net.parents[i] + (i,)
        for a in fam:
            adj[a].update(b for b in fam if b != a)
    width = 0
    for v in order:
        nb = adj.pop(v)
        width = max(width, len(nb))
        for a in nb:
            adj[a].discard(v)
            adj[a].update(nb - {a})
    return width


def marginals_ve(net: ClassNetwork) -> list[np.ndarray]:
    """Sum-product elimination, once per query variable."""
    out = []
    for q in range(len(net.nodes)):
        factors = _factors(net)
        for v in min_fill_order(net, keep=(q,)):
            touching = [f for f in factors if v in f.scope]
            factors = [f for f in factors if v not in f.scope]
            prod = _product(touching, net.cards)
            axis = prod.scope.index(v)
            factors.append(_Factor(prod.scope[:axis] + prod.scope[axis + 1 :], logsumexp(prod.table, axis=axis)))
        final = _product(factors, net.cards)
        logm = final.table - logsumexp(final.table)
        m = np.exp(logm)
        out.append(m / m.sum())
    return out


def mpe_ve(net: ClassNetwork) -> tuple[int, ...]:
    """Max-product elimination in reverse node order with back-pointers.

    Eliminating the last node first means every back-pointer depends only on
    earlier nodes, so decoding front to back with first-index argmaxes yields
    the lexicographically smallest maximizer.
    """
    k = len(net.nodes)
    factors = _factors(net)
    pointers: dict[int, _Factor] = {}
    for v in reversed(range(k)):
        touching = [f for f in factors if v in f.scope]
        factors = [f for f in factors if v not in f.scope]
        prod = _product(touching, net.cards)
        axis = prod.scope.index(v)
        rest = prod.scope[:axis] + prod.scope[axis + 1 :]
        pointers[v] = _Factor(rest, np.argmax(prod.table, axis=axis))
        factors.append(_Factor(rest, np.max(prod.table, axis=axis)))
    y = [0] * k
    for v in range(k):
        bp = pointers[v]
        y[v] = int(bp.table[tuple(y[u] for u in bp.scope)])
    return tuple(y)


def mpe(net: ClassNetwork) -> tuple[int, ...]:
    if net.size <= EXHAUSTIVE_LIMIT:
        return mpe_exhaustive(net)
    return mpe_ve(net)


def marginals(net: ClassNetwork) -> list[np.ndarray]:
    if net.size <= EXHAUSTIVE_LIMIT:
        return marginals_exhaustive(net)
    return marginals_ve(net)


# ---------------------------------------------------------------------------
# predictions
# ---------------------------------------------------------------------------


@dataclass
class BatchPrediction:
    hamming: np.ndarray | None = None
    subset: np.ndarray | None = None
    marginals: list[np.ndarray] | None = None
    fallback: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def for_loss(self, loss: Loss) -> np.ndarray:
        out = self.hamming if loss == "hamming" else self.subset
        if out is None:
            raise ValueError(f"no {loss} predictions were computed")
        return out


def _losses(loss: str) -> tuple[bool, bool]:
    if loss not in ("hamming", "subset", "both"):
        raise ValueError(f"loss must be hamming, subset or both, got {loss!r}")
    return loss in ("hamming", "both"), loss in ("subset", "both")


def predict_bundle(model: GbncModel, bundle: DatasetBundle, loss: str = "both", chunk: int = 256) -> BatchPrediction:
    """Bayes-optimal predictions for every row of ``bundle`` without retraining."""
    want_h, want_s = _losses(loss)
    schema = model.schema
    k = schema.n_classes
    cards = schema.class_cards
    n = bundle.n_rows
    batch = batch_cpts(model, bundle)
    cpts = batch.cpts
    out = BatchPrediction(fallback=batch.fallback)
    margs = [np.empty((n, c)) for c in cards]
    subset = np.empty((n, k), dtype=np.int64)
    if math.prod(cards) <= EXHAUSTIVE_LIMIT:
        idx = {t: i for i, t in enumerate(schema.class_names)}
        axes = [tuple(idx[p] for p in model.class_parents(t)) + (i,) for i, t in enumerate(schema.class_names)]
        for start in range(0, n, chunk):
            sl = slice(start, min(n, start + chunk))
            m = sl.stop - sl.start
            total = np.zeros((m, *cards))
            with np.errstate(divide="ignore"):
                for i in range(k):
                    table = np.log(cpts[i][sl])
                    order = np.argsort(axes[i])
                    table = np.transpose(table, (0, *(1 + order)))
                    shape = [m] + [1] * k
                    for a in axes[i]:
                        shape[1 + a] = cards[a]
                    total = total + table.reshape(shape)
            flat = total.reshape(m, -1)
            subset[sl] = np.stack(np.unravel_index(np.argmax(flat, axis=1), cards), axis=1)
            joint = np.exp(total)
            for i in range(k):
                mi = joint.sum(axis=tuple(1 + a for a in range(k) if a != i))
                margs[i][sl] = mi / mi.sum(axis=1, keepdims=True)
    else:
        for r in range(n):
            net = _network_for_row(model, batch, r)
            subset[r] = mpe_ve(net)
            for i, mi in enumerate(marginals_ve(net)):
                margs[i][r] = mi
    out.marginals = margs
    if want_h:
        out.hamming = np.stack([np.argmax(m, axis=1) for m in margs], axis=1).astype(np.int64)
    if want_s:
        out.subset = subset
    return out


def predict(model: GbncModel, instance: Instance, loss: Loss = "hamming") -> Prediction:
    """Hamming BOP (marginal argmaxes) or subset 0/1 BOP (MPE) for one instance."""
    if loss not in ("hamming", "subset"):
        raise ValueError(f"loss must be hamming or subset, got {loss!r}")
    bundle = _as_bundle(model, instance)
    batch = predict_bundle(model, bundle, loss)
    y_hat = tuple(int(v) for v in batch.for_loss(loss)[0])
    net = _network_for_row(model, batch_cpts(model, bundle), 0)
    margs = tuple(m[0] for m in batch.marginals) if loss == "hamming" else None
    return Prediction(y_hat, loss, joint_prob(net, y_hat), margs, int(batch.fallback[0]))


def predict_network(net: ClassNetwork, loss: Loss) -> tuple[int, ...]:
    if loss == "subset":
        return mpe(net)
    return tuple(int(np.argmax(m)) for m in marginals(net))
