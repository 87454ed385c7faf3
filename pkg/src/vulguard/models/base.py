"""Shared model types: artifacts, predictions, feature matrices."""

from __future__ import annotations

import enum
import hashlib
import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

import numpy as np

from ..dataset import AnnotatedCommit
from ..errors import SchemaMismatch, VersionMismatch
from ..features import FEATURE_NAMES, FeatureRecord
from ..jsonl import atomic_write_bytes

MAGIC = b"VULGUARD-MODEL"
FORMAT_VERSION = 1

Record = Union[AnnotatedCommit, FeatureRecord]


class ModelKind(str, enum.Enum):
    LR = "lr"
    LA = "la"
    TLEL = "tlel"
    VCC_LINEAR = "vcc_linear"
    EXTERNAL = "external"


@dataclass(frozen=True)
class Hyperparameters:
    seed: int = 0
    epochs: int = 200
    l2: float = 1e-4
    class_weight: bool = True
    n_forests: int = 10
    n_trees: int = 10
    max_depth: int | None = None
    hash_bits: int = 18


@dataclass(frozen=True)
class ModelArtifact:
    kind: ModelKind
    parameters: dict[str, Any]
    feature_names: tuple[str, ...]
    normalization: tuple[tuple[float, float], ...]
    trained_on: str
    constant_features: tuple[str, ...] = ()

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "feature_names": list(self.feature_names),
            "normalization": [list(p) for p in self.normalization],
            "constant_features": list(self.constant_features),
            "trained_on": self.trained_on,
            "parameters": self.parameters,
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> ModelArtifact:
        return cls(
            kind=ModelKind(obj["kind"]),
            parameters=obj["parameters"],
            feature_names=tuple(obj["feature_names"]),
            normalization=tuple((float(m), float(s)) for m, s in obj["normalization"]),
            trained_on=obj["trained_on"],
            constant_features=tuple(obj.get("constant_features", ())),
        )


@dataclass(frozen=True, slots=True)
class PredictionRecord:
    commit_id: str
    score: float
    label: int | None
    effort: int

    def __post_init__(self) -> None:
        if not math.isfinite(self.score) or not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score out of [0, 1]: {self.score}")
        if self.effort < 0:
            raise ValueError("effort must be non-negative")

    def to_json(self) -> dict[str, Any]:
        row: dict[str, Any] = {"commit_id": self.commit_id, "score": self.score}
        if self.label is not None:
            row["label"] = self.label
        row["effort"] = self.effort
        return row


def feature_record(r: Record) -> FeatureRecord:
    if isinstance(r, AnnotatedCommit):
        if r.record is None:
            raise SchemaMismatch(f"{r.commit_id} carries no features")
        return r.record
    return r


def label_of(r: Record) -> int | None:
    return r.label


def feature_matrix(records: Sequence[Record], names: Sequence[str] = FEATURE_NAMES) -> np.ndarray:
    rows = []
    for r in records:
        fr = feature_record(r)
        values = fr.features.to_dict()
        values.update(fr.extra)
        try:
            rows.append([float(values[n]) for n in names])
        except KeyError as exc:
            raise SchemaMismatch(f"{fr.commit_id} lacks feature {exc.args[0]}") from None
    return np.asarray(rows, dtype=np.float64).reshape(len(rows), len(names))


def labels(records: Sequence[Record]) -> np.ndarray:
    ys = [label_of(r) for r in records]
    if any(y is None for y in ys):
        raise SchemaMismatch("training records need labels")
    return np.asarray(ys, dtype=np.float64)


def efforts(records: Sequence[Record]) -> list[int]:
    out = []
    for r in records:
        f = feature_record(r).features
        out.append(int(f.la) + int(f.ld))
    return out


def fit_normalization(X: np.ndarray, names: Sequence[str]) -> tuple[tuple[tuple[float, float], ...], tuple[str, ...]]:
    """Per-column (mean, std); constant columns get std 1 and are listed."""
    mean = X.mean(axis=0) if len(X) else np.zeros(X.shape[1])
    std = X.std(axis=0) if len(X) else np.zeros(X.shape[1])
    pairs = []
    constant = []
    for name, m, s in zip(names, mean, std):
        if not s > 0:
            constant.append(name)
            s = 1.0
        pairs.append((float(m), float(s)))
    return tuple(pairs), tuple(constant)


def apply_normalization(X: np.ndarray, normalization: Sequence[tuple[float, float]]) -> np.ndarray:
    mean = np.array([m for m, _ in normalization], dtype=np.float64)
    std = np.array([s for _, s in normalization], dtype=np.float64)
    return (X - mean) / std


def fingerprint(records: Sequence[Record]) -> str:
    h = hashlib.sha256()
    for r in records:
        fr = feature_record(r)
        row = {"commit_id": fr.commit_id, "features": fr.features.to_dict(), "label": label_of(r)}
        h.update(json.dumps(row, sort_keys=True).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def class_weights(y: np.ndarray, balanced: bool) -> np.ndarray:
    """Inverse class frequency weights (mean 1), or all ones."""
    if not balanced:
        return np.ones_like(y)
    n = len(y)
    pos = float(y.sum())
    neg = n - pos
    return np.where(y > 0.5, n / (2.0 * pos), n / (2.0 * neg))


def encode_artifact(artifact: ModelArtifact) -> bytes:
    body = json.dumps(artifact.to_json(), sort_keys=True, separators=(",", ":"), allow_nan=False)
    return MAGIC + b" " + str(FORMAT_VERSION).encode() + b"\n" + body.encode("utf-8") + b"\n"


def decode_artifact(data: bytes) -> ModelArtifact:
    header, _, body = data.partition(b"\n")
    magic, _, version = header.partition(b" ")
    if magic != MAGIC:
        raise VersionMismatch("not a vulguard model artifact")
    if version != str(FORMAT_VERSION).encode():
        raise VersionMismatch(f"artifact format {version.decode(errors='replace')} is not {FORMAT_VERSION}")
    return ModelArtifact.from_json(json.loads(body))


def save_artifact(artifact: ModelArtifact, path: str | Path) -> None:
    atomic_write_bytes(path, encode_artifact(artifact))


def load_artifact(path: str | Path) -> ModelArtifact:
    return decode_artifact(Path(path).read_bytes())


@dataclass
class TrainContext:
    """Inputs gathered once for every trainer."""

    X: np.ndarray
    y: np.ndarray
    names: tuple[str, ...]
    normalization: tuple[tuple[float, float], ...]
    constant: tuple[str, ...]
    hyper: Hyperparameters
    texts: list[str] = field(default_factory=list)
