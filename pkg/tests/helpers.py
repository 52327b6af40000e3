"""Independent oracles and small generators shared by the test modules.

Nothing here calls into the inference or structure code under test; the
oracles enumerate directly with itertools so they can serve as references.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from gbnc.dataset import make_bundle
from gbnc.inference import ClassNetwork


def random_cpt(rng: np.random.Generator, shape: tuple[int, ...], alpha: float = 1.0) -> np.ndarray:
    table = rng.gamma(alpha, size=shape) + 1e-3
    return table / table.sum(axis=-1, keepdims=True)


def random_network(rng: np.random.Generator, k: int | None = None, max_card: int = 4, edge_p: float = 0.5) -> ClassNetwork:
    """Random DAG over ``k`` nodes (edges only from lower to higher index after a shuffle)."""
    k = k or int(rng.integers(1, 5))
    cards = tuple(int(c) for c in rng.integers(2, max_card + 1, size=k))
    perm = rng.permutation(k)
    parents = []
    for i in range(k):
        rank = int(np.flatnonzero(perm == i)[0])
        earlier = [int(j) for j in perm[:rank] if rng.random() < edge_p]
        parents.append(tuple(sorted(earlier)))
    cpts = tuple(random_cpt(rng, tuple(cards[p] for p in parents[i]) + (cards[i],)) for i in range(k))
    return ClassNetwork(tuple(f"Y{i + 1}" for i in range(k)), cards, tuple(parents), cpts)


def oracle_joint(net: ClassNetwork) -> dict[tuple[int, ...], float]:
    """Probability of every class vector by direct product of CPT lookups."""
    out = {}
    for y in itertools.product(*(range(c) for c in net.cards)):
        p = 1.0
        for i, cpt in enumerate(net.cpts):
            p *= cpt[tuple(y[j] for j in net.parents[i]) + (y[i],)]
        out[y] = p
    return out


def oracle_marginals(net: ClassNetwork) -> list[np.ndarray]:
    joint = oracle_joint(net)
    margs = [np.zeros(c) for c in net.cards]
    for y, p in joint.items():
        for i, v in enumerate(y):
            margs[i][v] += p
    return margs


def oracle_mpe(net: ClassNetwork, rtol: float = 1e-12) -> tuple[tuple[int, ...], float]:
    """Lexicographically smallest joint argmax.

    Probabilities within ``rtol`` of the maximum count as tied, since the
    direct product rounds mathematically equal joints differently.
    """
    joint = oracle_joint(net)
    top = max(joint.values())
    best = min(y for y, p in joint.items() if p >= top * (1 - rtol))
    return best, joint[best]


def is_acyclic(parents: dict[str, tuple[str, ...]]) -> bool:
    remaining = dict(parents)
    while remaining:
        free = [n for n, ps in remaining.items() if not any(p in remaining for p in ps)]
        if not free:
            return False
        for n in free:
            del remaining[n]
    return True


def oracle_best_structure(tables: dict[str, list[tuple[tuple[str, ...], float]]]) -> float:
    """Best total over every acyclic combination of candidates, by enumeration."""
    targets = list(tables)
    # feature parents never create cycles: keep the best score per class-parent set
    reduced = {}
    for t in targets:
        by_class: dict[tuple[str, ...], float] = {}
        for parents, s in tables[t]:
            key = tuple(p for p in parents if p in tables)
            by_class[key] = max(by_class.get(key, -math.inf), s)
        reduced[t] = list(by_class.items())
    best = -math.inf
    for combo in itertools.product(*(reduced[t] for t in targets)):
        if is_acyclic({t: c[0] for t, c in zip(targets, combo)}):
            best = max(best, math.fsum(c[1] for c in combo))
    return best


def random_score_tables(rng: np.random.Generator, k: int, n_features: int = 0) -> dict[str, list[tuple[tuple[str, ...], float]]]:
    """Score tables over all class-parent subsets plus a few feature parents."""
    names = [f"Y{i + 1}" for i in range(k)]
    feats = [f"d{j}" for j in range(n_features)]
    tables = {}
    for t in names:
        pool = [n for n in names if n != t] + feats
        rows = []
        for size in range(len(pool) + 1):
            for sub in itertools.combinations(pool, size):
                if sub and rng.random() < 0.25:
                    continue
                rows.append((sub, float(rng.integers(-40, 0)) if rng.random() < 0.3 else float(rng.normal(-20, 5))))
        tables[t] = rows
    return tables


def random_discrete_bundle(rng: np.random.Generator, k: int, n_disc: int, n: int, max_card: int = 3, dependent: bool = True):
    """Discrete-only data; classes depend on features and earlier classes when ``dependent``."""
    dcards = [int(c) for c in rng.integers(2, max_card + 1, size=n_disc)]
    ccards = [int(c) for c in rng.integers(2, max_card + 1, size=k)]
    x_d = np.stack([rng.integers(0, c, size=n) for c in dcards], axis=1) if n_disc else np.zeros((n, 0), dtype=np.int64)
    y = np.zeros((n, k), dtype=np.int64)
    for i, c in enumerate(ccards):
        noise = rng.integers(0, c, size=n)
        if dependent and (n_disc or i):
            signal = x_d.sum(axis=1) + y[:, :i].sum(axis=1)
            keep = rng.random(n) < 0.6
            y[:, i] = np.where(keep, signal % c, noise)
        else:
            y[:, i] = noise
    return make_bundle(
        None,
        x_d,
        y,
        discrete=[(f"d{j}", c) for j, c in enumerate(dcards)],
        classes=[(f"Y{i + 1}", c) for i, c in enumerate(ccards)],
    )


def chain_network() -> ClassNetwork:
    """Y1 -> Y2 with p(Y1) = (0.6, 0.4), p(Y2|Y1=0) = (0.9, 0.1), p(Y2|Y1=1) = (0.2, 0.8)."""
    return ClassNetwork.from_tables(
        ["Y1", "Y2"],
        [2, 2],
        {"Y2": ["Y1"]},
        {"Y1": np.array([0.6, 0.4]), "Y2": np.array([[0.9, 0.1], [0.2, 0.8]])},
    )
