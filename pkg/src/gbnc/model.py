"""End-to-end training of a generalized Bayesian network classifier."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Mapping


from gbnc.dataset import Configuration, DatasetBundle, FeatureSchema, partition_by_configuration
from gbnc.local_learners import LearnerConfig, LocalModel, local_cll_arrays
from gbnc.scorer import Penalty, Pruning, ScoreTable, build_score_tables, enumerate_candidates, penalty
from gbnc.structure import ParentAssignment, format_dag, solve_exact_dp, to_dag

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GbncModel:
    schema: FeatureSchema
    assignment: ParentAssignment
    local_models: Mapping[str, Mapping[Configuration, LocalModel]]
    learner: LearnerConfig
    meta: Mapping[str, object] = field(default_factory=dict)

    @property
    def score(self) -> float:
        return self.assignment.total

    def parents(self, target: str) -> tuple[str, ...]:
        return self.assignment.parents[target]

    def class_parents(self, target: str) -> tuple[str, ...]:
        return self.assignment.class_parents(target)


@dataclass
class TrainResult:
    model: GbncModel
    tables: dict[str, ScoreTable]
    timings: dict[str, float]

    @property
    def prune_counts(self) -> dict[str, int]:
        return {t: len(tab.prune_log) for t, tab in self.tables.items()}


def train(
    bundle: DatasetBundle,
    learner: LearnerConfig | None = None,
    max_parents: int = 3,
    pruning: Pruning = "safe",
    penalty_mode: Penalty = "bic",
    threads: int = 1,
    seed: int = 0,
) -> TrainResult:
    """Score candidate parent sets, pick the optimal DAG, keep its local models."""
    learner = learner or LearnerConfig()
    if not bundle.has_classes:
        raise ValueError("training data must contain class columns")
    t0 = time.perf_counter()
    families = {t: enumerate_candidates(bundle.schema, t, max_parents) for t in bundle.schema.class_names}
    tables = build_score_tables(bundle, families, learner, pruning, penalty_mode, threads)
    t1 = time.perf_counter()
    assignment = solve_exact_dp(tables)
    t2 = time.perf_counter()
    local_models = {
        t: dict(tables[t].entries[assignment.choice[t]].models) for t in bundle.schema.class_names
    }
    meta = {
        "pruning": pruning,
        "penalty": penalty_mode,
        "max_parents": max_parents,
        "seed": seed,
        "score": assignment.total,
        "n_train": bundle.n_rows,
    }
    model = GbncModel(bundle.schema, assignment, local_models, learner, meta)
    for t, tab in tables.items():
        log.info("%s: %d candidates scored, %d pruned", t, len(tab.entries), len(tab.prune_log))
    log.info("structure score %.6f\n%s", assignment.total, format_dag(to_dag(assignment)).rstrip())
    return TrainResult(model, tables, {"scoring": t1 - t0, "structure": t2 - t1})


def fit_gbnc(bundle: DatasetBundle, learner: LearnerConfig | None = None, **kwargs) -> GbncModel:
    return train(bundle, learner, **kwargs).model


def assignment_score(model: GbncModel, bundle: DatasetBundle) -> float:
    """Recompute the penalized score of the stored assignment from the stored models."""
    parts = []
    for t in model.schema.class_names:
        parents = model.parents(t)
        y = bundle.column(t)
        c = 0.0
        for conf, rows in partition_by_configuration(bundle, parents).items():
            c += local_cll_arrays(model.local_models[t][conf], bundle.x_c[rows], y[rows]).value
        pen = penalty(model.schema, t, parents, model.learner.family, bundle.n_rows, model.meta.get("penalty", "bic"))
        parts.append(c - pen)
    return math.fsum(parts)
