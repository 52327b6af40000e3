"""Candidate parent sets, local CLL scores, BIC penalties and parent-set pruning."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Literal, Mapping, Sequence, TextIO

from gbnc.dataset import Configuration, DatasetBundle, FeatureSchema, partition_by_configuration
from gbnc.local_learners import LearnerConfig, LocalModel, fit_local, free_parameters, local_cll_arrays

Pruning = Literal["none", "safe", "heuristic"]
Penalty = Literal["bic", "none"]
ParentSet = tuple[str, ...]


@dataclass(frozen=True)
class CandidateFamily:
    target: str
    candidates: tuple[ParentSet, ...]
    max_size: int


@dataclass(frozen=True, eq=False)
class ScoreEntry:
    target: str
    parents: ParentSet
    C: float
    pen: float
    S: float
    config_count: int
    models: Mapping[Configuration, LocalModel] = field(repr=False)
    floored: int = 0


@dataclass(frozen=True)
class PruneRecord:
    pruned: ParentSet
    rule: Literal["safe_lemma", "heuristic_rule1"]
    witness: ParentSet
    witness_score: float
    threshold: float


@dataclass
class ScoreTable:
    target: str
    entries: list[ScoreEntry]
    prune_log: list[PruneRecord] = field(default_factory=list)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def best(self) -> ScoreEntry:
        return max(self.entries, key=lambda e: e.S)


def candidate_pool(schema: FeatureSchema, target: str) -> tuple[str, ...]:
    schema.class_index(target)
    return schema.discrete_names + tuple(n for n in schema.class_names if n != target)


def enumerate_candidates(schema: FeatureSchema, target: str, max_size: int = 3) -> CandidateFamily:
    """All subsets of the discrete pool of ``target`` up to ``max_size``, size first."""
    if max_size < 0:
        raise ValueError("max_size must be >= 0")
    pool = candidate_pool(schema, target)
    cands = [c for k in range(min(max_size, len(pool)) + 1) for c in itertools.combinations(pool, k)]
    return CandidateFamily(target, tuple(cands), max_size)


def config_total(schema: FeatureSchema, parents: Sequence[str]) -> int:
    return math.prod(schema.variable(p).cardinality for p in parents)


def penalty(schema: FeatureSchema, target: str, parents: Sequence[str], family: str, n_rows: int, mode: Penalty = "bic") -> float:
    """BIC penalty ``ln(N)/2 * |configurations| * free parameters per configuration``."""
    if mode == "none":
        return 0.0
    if mode != "bic":
        raise ValueError(f"unknown penalty mode {mode!r}")
    m = schema.variable(target).cardinality
    d = free_parameters(family, m, len(schema.continuous))
    return 0.5 * math.log(n_rows) * config_total(schema, parents) * d


def score_parent_set(
    bundle: DatasetBundle,
    target: str,
    parents: Sequence[str],
    learner: LearnerConfig,
    n_rows: int | None = None,
    penalty_mode: Penalty = "bic",
) -> ScoreEntry:
    """Fit one local model per observed parent configuration and score the set."""
    parents = tuple(parents)
    if target in parents:
        raise ValueError(f"{target!r} cannot be its own parent")
    n_rows = bundle.n_rows if n_rows is None else n_rows
    y = bundle.column(target)
    models: dict[Configuration, LocalModel] = {}
    total = 0.0
    floored = 0
    for conf, rows in partition_by_configuration(bundle, parents).items():
        model = fit_local(bundle, rows, target, learner)
        res = local_cll_arrays(model, bundle.x_c[rows], y[rows])
        models[conf] = model
        total += res.value
        floored += res.floored
    pen = penalty(bundle.schema, target, parents, learner.family, n_rows, penalty_mode)
    return ScoreEntry(target, parents, total, pen, total - pen, len(models), models, floored)


def _is_strict_subset(a: ParentSet, b: ParentSet) -> bool:
    return len(a) < len(b) and set(a) < set(b)


def build_score_tables(
    bundle: DatasetBundle,
    families: Mapping[str, CandidateFamily] | Iterable[CandidateFamily],
    learner: LearnerConfig,
    pruning: Pruning = "safe",
    penalty_mode: Penalty = "bic",
    threads: int = 1,
) -> dict[str, ScoreTable]:
    """Score every surviving candidate of every class variable.

    Candidates are processed in increasing size. Under ``safe`` pruning a
    candidate is skipped when some scored strict subset already satisfies
    ``S(subset) >= -pen(candidate)``, and so is every superset of a skipped
    candidate. ``heuristic`` drops all supersets of the best-scoring strict
    subset once that condition holds, which may change the optimum.
    """
    if not isinstance(families, Mapping):
        families = {f.target: f for f in families}
    missing = set(bundle.schema.class_names) - set(families)
    if missing:
        raise ValueError(f"candidate families missing for {sorted(missing)}")
    if pruning not in ("none", "safe", "heuristic"):
        raise ValueError(f"unknown pruning mode {pruning!r}")
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        return {
            t: _score_family(bundle, families[t], learner, pruning, penalty_mode, pool)
            for t in bundle.schema.class_names
        }
    finally:
        if pool is not None:
            pool.shutdown()


def _score_family(bundle, family: CandidateFamily, learner, pruning, penalty_mode, pool) -> ScoreTable:
    target = family.target
    n = bundle.n_rows

    def score(parents: ParentSet) -> ScoreEntry:
        return score_parent_set(bundle, target, parents, learner, n, penalty_mode)

    def run(batch: list[ParentSet]) -> list[ScoreEntry]:
        if pool is None:
            return [score(p) for p in batch]
        return list(pool.map(score, batch))

    table = ScoreTable(target, [])
    if pruning == "none":
        table.entries = run(list(family.candidates))
        return table

    by_size: dict[int, list[ParentSet]] = {}
    for c in family.candidates:
        by_size.setdefault(len(c), []).append(c)
    pruned: set[ParentSet] = set()
    for size in sorted(by_size):
        survivors = []
        for cand in by_size[size]:
            if cand in pruned:
                continue
            anc = next((r.pruned for r in table.prune_log if _is_strict_subset(r.pruned, cand)), None)
            if anc is not None:
                pruned.add(cand)
                rec = next((r for r in table.prune_log if r.pruned == anc), None)
                table.prune_log.append(
                    PruneRecord(cand, rec.rule if rec else "safe_lemma", anc, rec.witness_score if rec else math.nan, rec.threshold if rec else math.nan)
                )
                continue
            subsets = [e for e in table.entries if _is_strict_subset(e.parents, cand)]
            threshold = -penalty(bundle.schema, target, cand, learner.family, n, penalty_mode)
            if pruning == "safe":
                witness = next((e for e in subsets if e.S >= threshold), None)
                if witness is not None:
                    pruned.add(cand)
                    table.prune_log.append(PruneRecord(cand, "safe_lemma", witness.parents, witness.S, threshold))
                    continue
                survivors.append(cand)
            else:
                best = max(subsets, key=lambda e: e.S, default=None)
                if best is not None and best.S >= threshold:
                    _heuristic_discard(table, family, best, threshold, cand, pruned)
                    continue
                # heuristic decisions depend on previously scored entries of the same size
                table.entries.extend(run([cand]))
        if survivors:
            table.entries.extend(run(survivors))
    return table


def _heuristic_discard(table: ScoreTable, family: CandidateFamily, best: ScoreEntry, threshold: float, cand: ParentSet, pruned: set) -> None:
    star = best.parents
    doomed = {c for c in family.candidates if _is_strict_subset(star, c)} | {cand}
    for c in sorted(doomed, key=family.candidates.index):
        if c not in pruned:
            pruned.add(c)
            table.prune_log.append(PruneRecord(c, "heuristic_rule1", star, best.S, threshold))
    table.entries = [e for e in table.entries if e.parents not in doomed]


def write_score_tables(tables: Mapping[str, ScoreTable], fh: TextIO) -> None:
    """One line per entry: ``target<TAB>members<TAB>C<TAB>pen<TAB>S``; members comma-separated."""
    for target, table in tables.items():
        for e in table.entries:
            fh.write(f"{target}\t{','.join(e.parents)}\t{e.C!r}\t{e.pen!r}\t{e.S!r}\n")


def read_score_tables(fh: TextIO) -> dict[str, list[tuple[ParentSet, float, float, float]]]:
    out: dict[str, list] = {}
    for line in fh:
        line = line.rstrip("\n")
        if not line:
            continue
        target, members, c, pen, s = line.split("\t")
        parents = tuple(members.split(",")) if members else ()
        out.setdefault(target, []).append((parents, float(c), float(pen), float(s)))
    return out
