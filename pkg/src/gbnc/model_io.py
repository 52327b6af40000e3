"""Model files: a version line, a checksum line, then a JSON body.

Parameter arrays are stored as base64 of little-endian float64 bytes so a
save/load round trip is bit-exact. The checksum is SHA-256 over the body.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from gbnc.baselines import BaselineModel
from gbnc.dataset import Configuration, FeatureSchema, Variable
from gbnc.errors import CorruptFile, VersionMismatch
from gbnc.local_learners import LearnerConfig, LocalModel
from gbnc.model import GbncModel
from gbnc.structure import ParentAssignment

MAGIC = "GBNC-MODEL"
VERSION = (1, 0)


def _enc(a: np.ndarray) -> dict:
    a = np.asarray(a)
    dtype = "<i8" if np.issubdtype(a.dtype, np.integer) else "<f8"
    data = np.ascontiguousarray(a, dtype=dtype).tobytes()
    return {"dtype": dtype, "shape": list(a.shape), "data": base64.b64encode(data).decode("ascii")}


def _dec(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"].encode("ascii"), validate=True)
    native = np.int64 if d["dtype"] == "<i8" else np.float64
    return np.frombuffer(raw, dtype=d["dtype"]).reshape(d["shape"]).astype(native)


def _schema_to(s: FeatureSchema) -> dict:
    return {
        "continuous": list(s.continuous),
        "discrete": [[v.name, list(v.states)] for v in s.discrete],
        "classes": [[v.name, list(v.states)] for v in s.classes],
    }


def _schema_from(d: dict) -> FeatureSchema:
    return FeatureSchema(
        tuple(d["continuous"]),
        tuple(Variable(n, tuple(st)) for n, st in d["discrete"]),
        tuple(Variable(n, tuple(st)) for n, st in d["classes"]),
    )


def _local_to(m: LocalModel) -> dict:
    return {
        "family": m.family,
        "target": m.target,
        "n_states": m.n_states,
        "train_count": m.train_count,
        "n_inputs": m.n_inputs,
        "mean": _enc(m.mean),
        "scale": _enc(m.scale),
        "params": {k: _enc(v) for k, v in sorted(m.params.items())},
    }


def _local_from(d: dict) -> LocalModel:
    return LocalModel(
        d["family"],
        d["target"],
        d["n_states"],
        {k: _dec(v) for k, v in d["params"].items()},
        _dec(d["mean"]),
        _dec(d["scale"]),
        d["train_count"],
        d["n_inputs"],
    )


def model_to_dict(model: GbncModel | BaselineModel) -> dict:
    if isinstance(model, BaselineModel):
        return {
            "kind": model.kind,
            "schema": _schema_to(model.schema),
            "models": [_local_to(m) for m in model.models],
            "combos": None if model.combos is None else _enc(model.combos),
            "order": None if model.order is None else list(model.order),
            "meta": model.meta,
        }
    a = model.assignment
    return {
        "kind": "gbnc",
        "schema": _schema_to(model.schema),
        "assignment": {
            "targets": list(a.targets),
            "parents": {t: list(a.parents[t]) for t in a.targets},
            "scores": {t: a.scores[t] for t in a.targets},
            "choice": {t: a.choice[t] for t in a.targets},
        },
        "learner": asdict(model.learner),
        "meta": dict(model.meta),
        "local_models": [
            {"target": t, "states": list(conf.states), "model": _local_to(m)}
            for t in a.targets
            for conf, m in sorted(model.local_models[t].items(), key=lambda kv: kv[0].states)
        ],
    }


def model_from_dict(d: dict) -> GbncModel | BaselineModel:
    schema = _schema_from(d["schema"])
    if d["kind"] in ("br", "cp", "cc"):
        return BaselineModel(
            d["kind"],
            schema,
            tuple(_local_from(m) for m in d["models"]),
            None if d["combos"] is None else _dec(d["combos"]),
            None if d["order"] is None else tuple(d["order"]),
            d.get("meta", {}),
        )
    if d["kind"] != "gbnc":
        raise CorruptFile(f"unknown model kind {d['kind']!r}")
    a = d["assignment"]
    targets = tuple(a["targets"])
    assignment = ParentAssignment(
        targets,
        {t: tuple(a["parents"][t]) for t in targets},
        {t: float(a["scores"][t]) for t in targets},
        {t: int(a["choice"][t]) for t in targets},
    )
    local: dict[str, dict[Configuration, LocalModel]] = {t: {} for t in targets}
    for item in d["local_models"]:
        t = item["target"]
        local[t][Configuration(assignment.parents[t], tuple(item["states"]))] = _local_from(item["model"])
    return GbncModel(schema, assignment, local, LearnerConfig(**d["learner"]), d["meta"])


def dumps(model: GbncModel | BaselineModel) -> str:
    body = json.dumps(model_to_dict(model), sort_keys=True, indent=1)
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    return f"{MAGIC} {VERSION[0]}.{VERSION[1]}\nsha256 {digest}\n{body}\n"


def loads(text: str) -> GbncModel | BaselineModel:
    lines = text.split("\n", 2)
    if len(lines) < 3 or not lines[0].startswith(MAGIC + " "):
        raise CorruptFile("missing model header")
    try:
        major = int(lines[0].split()[1].split(".")[0])
    except (IndexError, ValueError):
        raise CorruptFile(f"unreadable version in header {lines[0]!r}") from None
    if major != VERSION[0]:
        raise VersionMismatch(f"model file version {lines[0].split()[1]} is not supported (expected {VERSION[0]}.x)")
    algo, _, digest = lines[1].partition(" ")
    body = lines[2][:-1] if lines[2].endswith("\n") else lines[2]
    if algo != "sha256" or hashlib.sha256(body.encode("utf-8")).hexdigest() != digest:
        raise CorruptFile("checksum mismatch; the model file is truncated or modified")
    try:
        return model_from_dict(json.loads(body))
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFile(f"malformed model body: {exc}") from exc


def save_model(model: GbncModel | BaselineModel, path: str | Path) -> None:
    Path(path).write_text(dumps(model), encoding="utf-8")


def load_model(path: str | Path) -> GbncModel | BaselineModel:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"model file not found: {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise CorruptFile(f"model file is not valid UTF-8: {exc}") from exc
    return loads(text)
