"""Vulnerability-fixing commit identification from messages or a manual list."""

from __future__ import annotations

import enum
import json
import logging
import re
import warnings
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .errors import MalformedLine
from .jsonl import write_jsonl
from .repo import CommitRecord

log = logging.getLogger(__name__)


class MatchLevel(str, enum.Enum):
    STRONG_ONLY = "strong_only"
    STRONG_OR_MEDIUM = "strong_or_medium"


class VfcSource(str, enum.Enum):
    STRONG_REGEX = "strong_regex"
    MEDIUM_REGEX = "medium_regex"
    MANUAL = "manual"


_PREFERENCE = {VfcSource.MANUAL: 0, VfcSource.STRONG_REGEX: 1, VfcSource.MEDIUM_REGEX: 2}


class UnknownManualCommit(UserWarning):
    """A manual patch id does not name a commit of the mined repository."""


@dataclass(frozen=True)
class RuleSet:
    strong: re.Pattern[str]
    medium: re.Pattern[str]
    strong_classes: tuple[str, ...]
    medium_classes: tuple[str, ...]


@dataclass(frozen=True, slots=True)
class MatchResult:
    matched: bool
    source: VfcSource | None = None
    fragment: str | None = None


@dataclass(frozen=True, slots=True)
class VfcRecord:
    commit_id: str
    source: VfcSource
    matched_fragment: str = ""

    def __post_init__(self) -> None:
        if (self.source is VfcSource.MANUAL) != (self.matched_fragment == ""):
            raise ValueError("manual records carry no fragment; regex records must")

    def to_json(self) -> dict[str, str]:
        return {"commit_id": self.commit_id, "source": self.source.value, "fragment": self.matched_fragment}


def load_rule_text() -> dict:
    data = resources.files("vulguard").joinpath("data/vuln_patterns.json").read_text("utf-8")
    return json.loads(data)


@lru_cache(maxsize=1)
def compile_rules() -> RuleSet:
    text = load_rule_text()
    return RuleSet(
        strong=re.compile(text["strong"]["pattern"]),
        medium=re.compile(text["medium"]["pattern"]),
        strong_classes=tuple(text["strong"]["classes"]),
        medium_classes=tuple(text["medium"]["classes"]),
    )


def match_message(
    message: str, rules: RuleSet | None = None, level: MatchLevel | str = MatchLevel.STRONG_ONLY
) -> MatchResult:
    rules = rules or compile_rules()
    level = MatchLevel(level)
    m = rules.strong.search(message)
    if m:
        return MatchResult(True, VfcSource.STRONG_REGEX, m.group(0))
    if level is MatchLevel.STRONG_OR_MEDIUM:
        m = rules.medium.search(message)
        if m:
            return MatchResult(True, VfcSource.MEDIUM_REGEX, m.group(0))
    return MatchResult(False)


def load_manual_patches(path: str | Path) -> list[tuple[str, str]]:
    """Read ``{"commit_id": ..., "Repository": ...}`` lines."""
    out: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLine(line_no, f"invalid JSON: {exc.msg}") from None
            if not isinstance(obj, dict) or set(obj) != {"commit_id", "Repository"}:
                raise MalformedLine(line_no, 'expected exactly the keys "commit_id" and "Repository"')
            cid, repo = obj["commit_id"], obj["Repository"]
            if not isinstance(cid, str) or not isinstance(repo, str) or not cid:
                raise MalformedLine(line_no, "commit_id and Repository must be non-empty strings")
            out.append((cid.strip().lower(), repo))
    return out


def identify_vfcs(
    commits: Sequence[CommitRecord],
    rules: RuleSet | None = None,
    level: MatchLevel | str = MatchLevel.STRONG_ONLY,
    manual: Iterable[tuple[str, str]] | Iterable[str] | None = None,
    merge_regex: bool = False,
) -> list[VfcRecord]:
    """Fixing commits in the order of ``commits``.

    A manual list, when given, is authoritative: regex hits are added only
    with ``merge_regex``. Manual ids unknown to ``commits`` are reported as
    :class:`UnknownManualCommit` warnings and skipped.
    """
    rules = rules or compile_rules()
    found: dict[str, VfcRecord] = {}
    known = {c.id for c in commits}
    use_regex = manual is None or merge_regex
    if manual is not None:
        manual_ids = [m if isinstance(m, str) else m[0] for m in manual]
        for cid in manual_ids:
            if cid in known:
                found[cid] = VfcRecord(cid, VfcSource.MANUAL)
            else:
                warnings.warn(UnknownManualCommit(f"manual patch {cid} not in repository"), stacklevel=2)
    if use_regex:
        for c in commits:
            res = match_message(c.message, rules, level)
            if not res.matched:
                continue
            rec = VfcRecord(c.id, res.source, res.fragment)  # type: ignore[arg-type]
            prev = found.get(c.id)
            if prev is None or _PREFERENCE[rec.source] < _PREFERENCE[prev.source]:
                found[c.id] = rec
    return [found[c.id] for c in commits if c.id in found]


def write_vfcs(records: Sequence[VfcRecord], path: str | Path) -> None:
    write_jsonl(path, (r.to_json() for r in records))
