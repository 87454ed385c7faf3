"""Train, persist and score commit-level vulnerability prediction models."""

from __future__ import annotations

import logging
import math
import warnings
from collections.abc import Mapping, Sequence
from pathlib import Path

import numpy as np

from ..errors import SchemaViolation, ScoreOutOfRange, SingleClassTrainingSet
from ..features import FEATURE_NAMES
from ..jsonl import iter_jsonl, write_jsonl
from . import linear, trees, vcc
from .base import (
    FORMAT_VERSION,
    MAGIC,
    Hyperparameters,
    ModelArtifact,
    ModelKind,
    PredictionRecord,
    Record,
    apply_normalization,
    class_weights,
    decode_artifact,
    efforts,
    encode_artifact,
    feature_matrix,
    feature_record,
    fingerprint,
    fit_normalization,
    label_of,
    labels,
    load_artifact,
    save_artifact,
)
from .vcc import tokenize_for_vcc, tokens

log = logging.getLogger(__name__)

__all__ = [
    "FORMAT_VERSION",
    "MAGIC",
    "Hyperparameters",
    "ModelArtifact",
    "ModelKind",
    "PredictionRecord",
    "decode_artifact",
    "encode_artifact",
    "import_external_scores",
    "load_artifact",
    "predict",
    "save_artifact",
    "tokenize_for_vcc",
    "tokens",
    "train",
    "write_predictions",
]

TRAINABLE = (ModelKind.LR, ModelKind.LA, ModelKind.TLEL, ModelKind.VCC_LINEAR)


class EpochsIgnored(UserWarning):
    """The epochs setting has no meaning for the chosen model kind."""


def _texts(records: Sequence[Record], texts: Mapping[str, str] | None) -> list[str]:
    texts = texts or {}
    return [texts.get(feature_record(r).commit_id, "") for r in records]


def train(
    kind: ModelKind | str,
    train_set: Sequence[Record],
    valid_set: Sequence[Record] = (),
    hyper: Hyperparameters | None = None,
    texts: Mapping[str, str] | None = None,
) -> ModelArtifact:
    """Fit a model of ``kind``.

    ``valid_set`` is schema-checked only; no kind tunes on it. ``texts``
    maps commit ids to message text for ``vcc_linear``.
    """
    kind = ModelKind(kind)
    hyper = hyper or Hyperparameters()
    if kind is ModelKind.EXTERNAL:
        raise ValueError("external scores are imported, not trained")
    if not train_set:
        raise SingleClassTrainingSet("training set is empty")
    names = FEATURE_NAMES
    X = feature_matrix(train_set, names)
    y = labels(train_set)
    feature_matrix(valid_set, names)
    normalization, constant = fit_normalization(X, names)
    base = dict(
        kind=kind,
        feature_names=names,
        normalization=normalization,
        constant_features=constant,
        trained_on=fingerprint(train_set),
    )
    if kind is ModelKind.LA:
        return ModelArtifact(parameters={"feature_index": names.index("la")}, **base)
    if y.min() == y.max():
        raise SingleClassTrainingSet(f"{kind.value} needs both classes in the training set")
    sw = class_weights(y, hyper.class_weight)
    if kind is ModelKind.LR:
        theta = linear.fit(apply_normalization(X, normalization), y, sw, hyper.l2, hyper.epochs)
        params = {"weights": [float(v) for v in theta[:-1]], "bias": float(theta[-1])}
        return ModelArtifact(parameters=params, **base)
    if kind is ModelKind.VCC_LINEAR:
        Z = vcc.design_matrix(_texts(train_set, texts), apply_normalization(X, normalization), hyper.hash_bits)
        theta = linear.fit(Z, y, sw, hyper.l2, hyper.epochs)
        w = theta[:-1]
        nz = np.flatnonzero(w)
        params = {
            "hash_bits": hyper.hash_bits,
            "weights": [[int(i), float(w[i])] for i in nz],
            "dim": int(len(w)),
            "bias": float(theta[-1]),
        }
        return ModelArtifact(parameters=params, **base)
    if hyper.epochs != Hyperparameters.epochs:
        warnings.warn(EpochsIgnored(f"epochs has no effect on {kind.value}"), stacklevel=2)
    forests = trees.fit_tlel(X, y, hyper.seed, hyper.n_forests, hyper.n_trees, hyper.max_depth)
    params = {"seed": hyper.seed, "forests": [[t.to_json() for t in f] for f in forests]}
    return ModelArtifact(parameters=params, **base)


def raw_scores(artifact: ModelArtifact, records: Sequence[Record], texts: Mapping[str, str] | None = None) -> np.ndarray:
    X = feature_matrix(records, artifact.feature_names)
    p = artifact.parameters
    if artifact.kind is ModelKind.LA:
        la = X[:, p["feature_index"]]
        if len(la) == 0:
            return la
        lo, hi = la.min(), la.max()
        if hi == lo:
            return np.full(len(la), 0.5)
        return (la - lo) / (hi - lo)
    if artifact.kind is ModelKind.LR:
        theta = np.array([*p["weights"], p["bias"]], dtype=np.float64)
        return linear.scores(theta, apply_normalization(X, artifact.normalization))
    if artifact.kind is ModelKind.VCC_LINEAR:
        Z = vcc.design_matrix(_texts(records, texts), apply_normalization(X, artifact.normalization), p["hash_bits"])
        theta = np.zeros(p["dim"] + 1)
        for i, v in p["weights"]:
            theta[i] = v
        theta[-1] = p["bias"]
        return linear.scores(theta, Z)
    if artifact.kind is ModelKind.TLEL:
        forests = [[trees.DecisionTree.from_json(t) for t in f] for f in p["forests"]]
        return trees.predict_tlel(forests, X)
    raise ValueError(f"{artifact.kind.value} artifacts carry no model; import scores instead")


def predict(
    artifact: ModelArtifact, records: Sequence[Record], texts: Mapping[str, str] | None = None
) -> list[PredictionRecord]:
    s = np.clip(raw_scores(artifact, records, texts), 0.0, 1.0)
    return [
        PredictionRecord(feature_record(r).commit_id, float(v), label_of(r), e)
        for r, v, e in zip(records, s, efforts(records))
    ]


def write_predictions(records: Sequence[PredictionRecord], path: str | Path) -> int:
    return write_jsonl(path, (r.to_json() for r in records))


def _score_record(obj: Mapping, line_no: int, require_label: bool) -> PredictionRecord:
    cid = obj.get("commit_id")
    if not isinstance(cid, str) or not cid:
        raise SchemaViolation(line_no, "missing commit_id")
    score = obj.get("score")
    if isinstance(score, bool) or not isinstance(score, (int, float)) or not math.isfinite(score):
        raise SchemaViolation(line_no, "score must be a finite number")
    if not 0.0 <= score <= 1.0:
        raise ScoreOutOfRange(line_no, f"score {score} outside [0, 1]")
    label = obj.get("label")
    if label is None and not require_label:
        pass
    elif isinstance(label, bool) or label not in (0, 1):
        raise SchemaViolation(line_no, f"label must be 0 or 1, got {label!r}")
    effort = obj.get("effort")
    if isinstance(effort, bool) or not isinstance(effort, int) or effort < 0:
        raise SchemaViolation(line_no, "effort must be a non-negative integer")
    return PredictionRecord(cid, float(score), label, effort)


def import_external_scores(path: str | Path, require_label: bool = True) -> list[PredictionRecord]:
    """Read ``{"commit_id", "score", "label", "effort"}`` lines."""
    return [_score_record(obj, n, require_label) for n, obj in iter_jsonl(path)]
