"""Exact selection of one parent set per class variable under acyclicity.

Only class-to-class edges can form cycles (discrete features never have
parents), so the optimum is found by dynamic programming over subsets of
the class variables: every DAG has a sink, and the best network over a set
``U`` is the best choice of sink ``Y`` plus the best network over ``U - Y``
where ``Y`` may only take class parents inside ``U - Y``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from gbnc.errors import CycleDetected, TooManyClassVariables

BRUTEFORCE_MAX_K = 6


class Scored(Protocol):
    parents: tuple[str, ...]
    S: float


@dataclass(frozen=True)
class Candidate:
    """Minimal score-table row, handy for hand-built tables."""

    parents: tuple[str, ...]
    S: float


@dataclass(frozen=True)
class ParentAssignment:
    targets: tuple[str, ...]
    parents: Mapping[str, tuple[str, ...]]
    scores: Mapping[str, float]
    choice: Mapping[str, int]

    @property
    def total(self) -> float:
        return math.fsum(self.scores[t] for t in self.targets)

    def class_parents(self, target: str) -> tuple[str, ...]:
        return tuple(p for p in self.parents[target] if p in self.targets)


@dataclass(frozen=True)
class DagOverClasses:
    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    order: tuple[str, ...]

    def parents_of(self, node: str) -> tuple[str, ...]:
        return tuple(p for p, c in self.edges if c == node)


def _normalize(tables: Mapping[str, Iterable[Scored]]) -> tuple[tuple[str, ...], list[list[Scored]]]:
    targets = tuple(tables)
    rows = [list(tables[t]) for t in targets]
    for t, r in zip(targets, rows):
        if not r:
            raise ValueError(f"no candidate parent sets for {t!r}")
    return targets, rows


def _class_mask(parents: Sequence[str], index: Mapping[str, int]) -> int:
    m = 0
    for p in parents:
        if p in index:
            m |= 1 << index[p]
    return m


def _assignment(targets, rows, choice: Sequence[int]) -> ParentAssignment:
    return ParentAssignment(
        targets,
        {t: tuple(rows[i][j].parents) for i, (t, j) in enumerate(zip(targets, choice))},
        {t: float(rows[i][j].S) for i, (t, j) in enumerate(zip(targets, choice))},
        {t: int(j) for t, j in zip(targets, choice)},
    )


def _best_within(values: np.ndarray, masks: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """For each subset W of classes: best score (and first index) with class parents inside W."""
    size = 1 << k
    val = np.full(size, -np.inf)
    idx = np.full(size, np.iinfo(np.int64).max, dtype=np.int64)
    for j in range(len(values)):
        m = masks[j]
        if values[j] > val[m]:
            val[m] = values[j]
            idx[m] = j
    for b in range(k):
        v = val.reshape(-1, 2, 1 << b)
        ix = idx.reshape(-1, 2, 1 << b)
        take = (v[:, 0] > v[:, 1]) | ((v[:, 0] == v[:, 1]) & (ix[:, 0] < ix[:, 1]))
        v[:, 1] = np.where(take, v[:, 0], v[:, 1])
        ix[:, 1] = np.where(take, ix[:, 0], ix[:, 1])
    return val, idx


def _layers(k: int) -> list[np.ndarray]:
    masks = np.arange(1 << k)
    pop = np.array([bin(m).count("1") for m in range(1 << k)])
    return [masks[pop == s] for s in range(1, k + 1)]


def _optimum(best: Sequence[np.ndarray], k: int, layers: list[np.ndarray]) -> float:
    F = np.full(1 << k, -np.inf)
    F[0] = 0.0
    for layer in layers:
        acc = np.full(layer.size, -np.inf)
        for i in range(k):
            has = (layer >> i) & 1 == 1
            sub = layer[has] ^ (1 << i)
            acc[has] = np.maximum(acc[has], F[sub] + best[i][sub])
        F[layer] = acc
    return float(F[-1])


def solve_exact_dp(tables: Mapping[str, Iterable[Scored]]) -> ParentAssignment:
    """Globally optimal acyclic parent assignment by subset dynamic programming.

    Among optimal assignments the lexicographically smallest one (target
    order, then candidate order) is returned.
    """
    targets, rows = _normalize(tables)
    k = len(targets)
    index = {t: i for i, t in enumerate(targets)}
    values = [np.array([float(e.S) for e in r]) for r in rows]
    masks = [np.array([_class_mask(e.parents, index) for e in r], dtype=np.int64) for r in rows]
    for i, m in enumerate(masks):
        if np.any(m & (1 << i)):
            raise ValueError(f"{targets[i]!r} lists itself as a parent")
    best = [_best_within(values[i], masks[i], k)[0] for i in range(k)]
    layers = _layers(k)
    optimum = _optimum(best, k, layers)
    tol = 1e-12 * (1.0 + sum(abs(float(np.max(v))) for v in values))
    upper = [float(np.max(v)) for v in values]

    choice: list[int] = []
    full = np.arange(1 << k)
    for i in range(k):
        rest = math.fsum(upper[i + 1 :]) + math.fsum(values[p][choice[p]] for p in range(i))
        for j in range(len(values[i])):
            if values[i][j] + rest < optimum - tol:
                continue
            fixed = np.where((full & masks[i][j]) == masks[i][j], values[i][j], -np.inf)
            trial = best[:i] + [fixed] + best[i + 1 :]
            if _optimum(trial, k, layers) >= optimum - tol:
                best[i] = fixed
                choice.append(j)
                break
        else:  # pragma: no cover - the optimum is always reachable
            raise RuntimeError("dynamic programming reconstruction failed")
    return _assignment(targets, rows, choice)


def _acyclic(masks: Sequence[int], k: int) -> bool:
    remaining = (1 << k) - 1
    while remaining:
        free = [i for i in range(k) if remaining >> i & 1 and masks[i] & remaining == 0]
        if not free:
            return False
        for i in free:
            remaining &= ~(1 << i)
    return True


def solve_bruteforce(tables: Mapping[str, Iterable[Scored]]) -> ParentAssignment:
    """Exhaustive search over all acyclic parent assignments (K <= 6)."""
    targets, rows = _normalize(tables)
    k = len(targets)
    if k > BRUTEFORCE_MAX_K:
        raise TooManyClassVariables(f"brute force supports at most {BRUTEFORCE_MAX_K} class variables, got {k}")
    index = {t: i for i, t in enumerate(targets)}
    masks = [[_class_mask(e.parents, index) for e in r] for r in rows]
    best_total, best_choice = -math.inf, None
    for choice in itertools.product(*(range(len(r)) for r in rows)):
        if not _acyclic([masks[i][j] for i, j in enumerate(choice)], k):
            continue
        total = math.fsum(rows[i][j].S for i, j in enumerate(choice))
        if total > best_total:
            best_total, best_choice = total, choice
    assert best_choice is not None
    return _assignment(targets, rows, best_choice)


def to_dag(assignment: ParentAssignment) -> DagOverClasses:
    """Class-variable subgraph of an assignment, with a topological order."""
    nodes = assignment.targets
    edges = tuple((p, t) for t in nodes for p in assignment.class_parents(t))
    return DagOverClasses(nodes, edges, topological_order(nodes, edges))


def topological_order(nodes: Sequence[str], edges: Iterable[tuple[str, str]]) -> tuple[str, ...]:
    parents = {n: set() for n in nodes}
    for p, c in edges:
        parents[c].add(p)
    order: list[str] = []
    placed: set[str] = set()
    while len(order) < len(nodes):
        ready = next((n for n in nodes if n not in placed and parents[n] <= placed), None)
        if ready is None:
            stuck = [n for n in nodes if n not in placed]
            raise CycleDetected(f"cycle among class variables {stuck}")
        order.append(ready)
        placed.add(ready)
    return tuple(order)


def format_dag(dag: DagOverClasses) -> str:
    lines = [f"{p} -> {c}" for p, c in dag.edges]
    touched = {n for e in dag.edges for n in e}
    isolated = [n for n in dag.nodes if n not in touched]
    lines.append("isolated: " + ", ".join(isolated))
    return "\n".join(lines) + "\n"


def parse_dag(text: str, nodes: Sequence[str]) -> DagOverClasses:
    edges = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("isolated:"):
            continue
        p, _, c = line.partition(" -> ")
        edges.append((p.strip(), c.strip()))
    nodes = tuple(nodes)
    return DagOverClasses(nodes, tuple(edges), topological_order(nodes, edges))
