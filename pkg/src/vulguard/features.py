"""Change-level expert features and the history index they depend on.

The metric set follows the change-metrics literature (size, diffusion,
history, experience). Only files of the repository's language count as
touched. Subsystem is the first directory component of a path ("" for
top-level files) and directory is the full parent path.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .commit_filter import language_extensions, language_files
from .errors import OutOfOrderCommit, SchemaViolation
from .jsonl import iter_jsonl, write_jsonl
from .parallel import ordered_map
from .repo import ChangeKind, CommitRecord, FileDiff, RepoHandle, count_lines_at
from .vfc import MatchLevel, compile_rules, match_message

SECONDS_PER_DAY = 86400.0
SECONDS_PER_YEAR = 365.25 * SECONDS_PER_DAY

FEATURE_NAMES: tuple[str, ...] = (
    "ns", "nd", "nf", "entropy", "la", "ld", "lt", "fix",
    "ndev", "age", "nuc", "exp", "rexp", "sexp",
)
_INT_FEATURES = frozenset({"ns", "nd", "nf", "la", "ld", "fix", "ndev", "nuc", "exp", "sexp"})


@dataclass(frozen=True, slots=True)
class ExpertFeatureVector:
    ns: int
    nd: int
    nf: int
    entropy: float
    la: int
    ld: int
    lt: float
    fix: int
    ndev: int
    age: float
    nuc: int
    exp: int
    rexp: float
    sexp: int

    def to_dict(self) -> dict[str, int | float]:
        return {name: getattr(self, name) for name in FEATURE_NAMES}

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> ExpertFeatureVector:
        kwargs = {}
        for name in FEATURE_NAMES:
            value = obj[name]
            kwargs[name] = int(value) if name in _INT_FEATURES else float(value)
        return cls(**kwargs)


@dataclass(frozen=True)
class FeatureRecord:
    commit_id: str
    date: int
    features: ExpertFeatureVector
    label: int | None = None
    extra: Mapping[str, float] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        row: dict[str, Any] = {"commit_id": self.commit_id, "date": self.date}
        row.update(self.features.to_dict())
        row.update(self.extra)
        if self.label is not None:
            row["label"] = self.label
        return row


def subsystem_of(path: str) -> str:
    parts = path.split("/")
    return parts[0] if len(parts) > 1 else ""


def directory_of(path: str) -> str:
    return path.rsplit("/", 1)[0] if "/" in path else ""


def compute_entropy(changed_lines_per_file: Iterable[int]) -> float:
    """Shannon entropy (bits) of the distribution of changed lines over files."""
    counts = [c for c in changed_lines_per_file if c > 0]
    total = sum(counts)
    if len(counts) <= 1:
        return 0.0
    h = 0.0
    for c in counts:
        p = c / total
        h -= p * math.log2(p)
    return h


@dataclass
class _FileHistory:
    last_time: int
    authors: set[str] = field(default_factory=set)
    commits: set[str] = field(default_factory=set)


@dataclass
class _AuthorHistory:
    times: list[int] = field(default_factory=list)
    subsystems: list[frozenset[str]] = field(default_factory=list)


class HistoryIndex:
    """Per-file and per-author history of the commits folded so far.

    Commits must be folded parents-first (the order produced by
    ``enumerate_commits``). Folding a commit twice, or after one of its
    descendants, raises :class:`OutOfOrderCommit`.
    """

    def __init__(self) -> None:
        self.files: dict[str, _FileHistory] = {}
        self.authors: dict[str, _AuthorHistory] = {}
        self._seen: set[str] = set()
        self._parents_of_seen: set[str] = set()

    def __len__(self) -> int:
        return len(self._seen)

    def check_order(self, commit: CommitRecord) -> None:
        if commit.id in self._seen:
            raise OutOfOrderCommit(f"{commit.id} is already part of the history")
        if commit.id in self._parents_of_seen:
            raise OutOfOrderCommit(f"{commit.id} is an ancestor of a commit already folded")

    def fold(self, commit: CommitRecord, files: Sequence[FileDiff]) -> HistoryIndex:
        self.check_order(commit)
        author = self.authors.setdefault(commit.author_id, _AuthorHistory())
        author.times.append(commit.author_time)
        author.subsystems.append(frozenset(subsystem_of(f.path) for f in files))
        for f in files:
            if f.change_kind is ChangeKind.RENAME and f.old_path in self.files and f.new_path:
                moved = self.files.pop(f.old_path)
                into = self.files.get(f.new_path)
                if into is not None:
                    moved.authors |= into.authors
                    moved.commits |= into.commits
                    moved.last_time = max(moved.last_time, into.last_time)
                self.files[f.new_path] = moved
            hist = self.files.setdefault(f.path, _FileHistory(last_time=commit.author_time))
            hist.last_time = commit.author_time
            hist.authors.add(commit.author_id)
            hist.commits.add(commit.id)
        self._seen.add(commit.id)
        self._parents_of_seen.update(commit.parent_ids)
        return self


def touched_files(commit: CommitRecord, extensions: Iterable[str]) -> list[FileDiff]:
    return language_files(commit.files, tuple(extensions))


def _history_key(f: FileDiff) -> str:
    return f.old_path if f.old_path is not None else f.new_path  # type: ignore[return-value]


def prior_line_counts(handle: RepoHandle, commit: CommitRecord, files: Sequence[FileDiff]) -> list[int]:
    """Pre-change size of each file; added files and root commits count 0."""
    parent = commit.parent_ids[0] if commit.parent_ids else None
    out = []
    for f in files:
        if f.old_path is None or parent is None:
            out.append(0)
        else:
            out.append(count_lines_at(handle, parent, f.old_path))
    return out


def extract_features(
    handle: RepoHandle | None,
    commit: CommitRecord,
    index: HistoryIndex,
    extensions: Iterable[str] | None = None,
    line_counts: Sequence[int] | None = None,
) -> ExpertFeatureVector:
    """Feature vector of ``commit`` against the history folded into ``index``.

    ``line_counts`` (pre-change size per touched file) may be supplied by a
    parallel prefetch; otherwise it is read from ``handle``.
    """
    index.check_order(commit)
    if extensions is None:
        if handle is None:
            raise ValueError("extensions are required without a repository handle")
        extensions = language_extensions(handle.primary_language)
    files = touched_files(commit, extensions)
    if line_counts is None:
        if handle is None:
            raise ValueError("line_counts are required without a repository handle")
        line_counts = prior_line_counts(handle, commit, files)

    paths = [f.path for f in files]
    subsystems = {subsystem_of(p) for p in paths}
    directories = {directory_of(p) for p in paths}
    la = sum(f.lines_added for f in files)
    ld = sum(f.lines_removed for f in files)
    entropy = compute_entropy(f.lines_added + f.lines_removed for f in files)
    nf = len(files)
    lt = sum(line_counts) / nf if nf else 0.0
    fix = int(match_message(commit.message, compile_rules(), MatchLevel.STRONG_OR_MEDIUM).matched)

    authors: set[str] = set()
    prior_commits: set[str] = set()
    ages = 0.0
    for f in files:
        hist = index.files.get(_history_key(f))
        if hist is None:
            continue
        authors |= hist.authors
        prior_commits |= hist.commits
        ages += max(0, commit.author_time - hist.last_time) / SECONDS_PER_DAY
    age = ages / nf if nf else 0.0

    author = index.authors.get(commit.author_id)
    exp = rexp = sexp = 0
    if author is not None:
        exp = len(author.times)
        rexp = sum(
            1.0 / (1 + math.floor(max(0, commit.author_time - t) / SECONDS_PER_YEAR)) for t in author.times
        )
        sexp = sum(1 for s in author.subsystems if s & subsystems)

    return ExpertFeatureVector(
        ns=len(subsystems),
        nd=len(directories),
        nf=nf,
        entropy=entropy,
        la=la,
        ld=ld,
        lt=lt,
        fix=fix,
        ndev=len(authors),
        age=age,
        nuc=len(prior_commits),
        exp=exp,
        rexp=float(rexp),
        sexp=sexp,
    )


def fold_commit(index: HistoryIndex, commit: CommitRecord, extensions: Iterable[str]) -> HistoryIndex:
    return index.fold(commit, touched_files(commit, extensions))


def build_features(
    handle: RepoHandle,
    commits: Sequence[CommitRecord],
    extensions: Iterable[str] | None = None,
    workers: int = 1,
) -> list[FeatureRecord]:
    """Features for ``commits`` (oldest first).

    File-size reads run in parallel; the history fold is sequential.
    """
    exts = tuple(extensions) if extensions is not None else tuple(language_extensions(handle.primary_language))
    counts = ordered_map(lambda c: prior_line_counts(handle, c, touched_files(c, exts)), list(commits), workers)
    index = HistoryIndex()
    out = []
    for commit, lc in zip(commits, counts):
        vec = extract_features(handle, commit, index, exts, lc)
        out.append(FeatureRecord(commit.id, commit.author_time, vec))
        fold_commit(index, commit, exts)
    return out


def write_feature_file(records: Iterable[FeatureRecord], path: str | Path) -> int:
    return write_jsonl(path, (r.to_json() for r in records))


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def record_from_json(obj: Mapping[str, Any], line_no: int = 0) -> FeatureRecord:
    cid = obj.get("commit_id")
    if not isinstance(cid, str) or not cid:
        raise SchemaViolation(line_no, "missing commit_id")
    missing = [n for n in FEATURE_NAMES if n not in obj]
    if missing:
        raise SchemaViolation(line_no, f"missing features {missing}")
    for name in FEATURE_NAMES:
        if not _is_number(obj[name]):
            raise SchemaViolation(line_no, f"feature {name} is not a finite number")
    label = obj.get("label")
    if label is not None and (label not in (0, 1) or isinstance(label, bool)):
        raise SchemaViolation(line_no, f"label must be 0 or 1, got {label!r}")
    date = obj.get("date", 0)
    if not _is_number(date):
        raise SchemaViolation(line_no, "date is not a number")
    reserved = {"commit_id", "date", "label", *FEATURE_NAMES}
    extra = {k: v for k, v in obj.items() if k not in reserved and _is_number(v)}
    return FeatureRecord(cid, int(date), ExpertFeatureVector.from_dict(obj), label, extra)


def read_feature_file(path: str | Path) -> list[FeatureRecord]:
    return [record_from_json(obj, n) for n, obj in iter_jsonl(path)]
