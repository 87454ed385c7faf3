"""Commit annotation and chronological train/validation/test splitting."""

from __future__ import annotations

import enum
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .errors import EmptyDataset, SchemaViolation, UnknownId
from .features import FeatureRecord, record_from_json
from .jsonl import iter_jsonl, write_jsonl

DEFAULT_RATIOS = (0.75, 0.05, 0.20)
SPLIT_NAMES = ("train", "valid", "test")
# absorbs float error in n * ratio when the exact product is an integer
_FLOOR_EPS = 1e-9


class Role(str, enum.Enum):
    VIC = "VIC"
    VFC = "VFC"
    VNC = "VNC"


@dataclass(frozen=True)
class AnnotatedCommit:
    commit_id: str
    date: int
    role: Role
    label: int
    record: FeatureRecord | None = None

    def __post_init__(self) -> None:
        if self.label != int(self.role is Role.VIC):
            raise ValueError("label must be 1 exactly for VIC commits")

    def to_json(self) -> dict[str, Any]:
        if self.record is not None:
            row = self.record.to_json()
            row.pop("label", None)
        else:
            row = {"commit_id": self.commit_id, "date": self.date}
        row["role"] = self.role.value
        row["label"] = self.label
        return row


@dataclass(frozen=True)
class SplitSet:
    train: list[AnnotatedCommit]
    valid: list[AnnotatedCommit]
    test: list[AnnotatedCommit]
    ratios: tuple[float, float, float]

    def parts(self) -> dict[str, list[AnnotatedCommit]]:
        return {"train": self.train, "valid": self.valid, "test": self.test}


def role_for(commit_id: str, vics: set[str], vfcs: set[str]) -> Role:
    if commit_id in vics:
        return Role.VIC
    if commit_id in vfcs:
        return Role.VFC
    return Role.VNC


def annotate(
    records: Sequence[FeatureRecord],
    vics: Iterable[str],
    vfcs: Iterable[str],
) -> list[AnnotatedCommit]:
    """Assign VIC > VFC > VNC roles; only VICs are positive."""
    vic_set, vfc_set = set(vics), set(vfcs)
    known = {r.commit_id for r in records}
    unknown = (vic_set | vfc_set) - known
    if unknown:
        raise UnknownId(f"{len(unknown)} ids are not in the dataset, e.g. {sorted(unknown)[0]}")
    out = []
    for r in records:
        role = role_for(r.commit_id, vic_set, vfc_set)
        out.append(AnnotatedCommit(r.commit_id, r.date, role, int(role is Role.VIC), r))
    return out


def split_sizes(n: int, ratios: Sequence[float] = DEFAULT_RATIOS) -> tuple[int, int, int]:
    """Floor both cut points; train keeps at least one record."""
    r1, r2, r3 = ratios
    if min(r1, r2, r3) < 0 or r1 <= 0 or abs(r1 + r2 + r3 - 1.0) > 1e-9:
        raise ValueError(f"ratios must be non-negative, start positive and sum to 1: {ratios}")
    cut1 = math.floor(n * r1 + _FLOOR_EPS)
    cut2 = math.floor(n * (r1 + r2) + _FLOOR_EPS)
    cut1, cut2 = min(cut1, n), min(cut2, n)
    if n >= 1 and cut1 == 0:
        cut1 = 1
        cut2 = max(cut2, 1)
    return cut1, cut2 - cut1, n - cut2


def chronological_split(
    records: Sequence[AnnotatedCommit],
    ratios: Sequence[float] = DEFAULT_RATIOS,
) -> SplitSet:
    """Sort by date (stable, so input order breaks ties) and cut.

    Callers pass records in commit enumeration order.
    """
    if not records:
        raise EmptyDataset("nothing to split")
    ordered = sorted(records, key=lambda r: r.date)
    n_train, n_valid, _ = split_sizes(len(ordered), ratios)
    cut2 = n_train + n_valid
    return SplitSet(
        train=ordered[:n_train],
        valid=ordered[n_train:cut2],
        test=ordered[cut2:],
        ratios=(float(ratios[0]), float(ratios[1]), float(ratios[2])),
    )


def drop_roles(records: Iterable[AnnotatedCommit], roles: Iterable[Role]) -> list[AnnotatedCommit]:
    banned = set(roles)
    return [r for r in records if r.role not in banned]


def write_split(split: SplitSet, folder: str | Path) -> None:
    folder = Path(folder)
    for name, part in split.parts().items():
        write_jsonl(folder / f"{name}.jsonl", (r.to_json() for r in part))


def annotated_from_json(obj: dict[str, Any], line_no: int) -> AnnotatedCommit:
    label = obj.get("label")
    if isinstance(label, bool) or label not in (0, 1):
        raise SchemaViolation(line_no, f"label must be 0 or 1, got {label!r}")
    rec = record_from_json(obj, line_no)
    role_text = obj.get("role")
    if role_text is None:
        role = Role.VIC if label == 1 else Role.VNC
    else:
        try:
            role = Role(role_text)
        except ValueError:
            raise SchemaViolation(line_no, f"unknown role {role_text!r}") from None
        if int(role is Role.VIC) != label:
            raise SchemaViolation(line_no, f"role {role.value} contradicts label {label}")
    return AnnotatedCommit(rec.commit_id, rec.date, role, label, rec)


def read_records(path: str | Path) -> list[AnnotatedCommit]:
    return [annotated_from_json(obj, n) for n, obj in iter_jsonl(path)]


def read_split(folder: str | Path, ratios: Sequence[float] | None = None) -> SplitSet:
    folder = Path(folder)
    parts = {name: read_records(folder / f"{name}.jsonl") for name in SPLIT_NAMES}
    if ratios is None:
        total = sum(len(p) for p in parts.values())
        ratios = tuple(len(parts[n]) / total for n in SPLIT_NAMES) if total else DEFAULT_RATIOS
    return SplitSet(parts["train"], parts["valid"], parts["test"], tuple(ratios))  # type: ignore[arg-type]
