"""Read-only access to a local Git repository.

Everything goes through the installed ``git`` binary with user and system
configuration disabled, so results depend on repository content only.
"""

from __future__ import annotations

import codecs
import enum
import heapq
import logging
import os
import re
import subprocess
import threading
from collections import OrderedDict
from collections.abc import Callable, Hashable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, TypeVar

from .errors import (
    FileAbsentAtRevision,
    GitCommandFailed,
    LineOutOfRange,
    NotARepository,
    UnsupportedLanguage,
)
from .parallel import ordered_map

log = logging.getLogger(__name__)

R = TypeVar("R")

RENAME_THRESHOLD = "-M50%"

_GIT_ENV = {
    "GIT_CONFIG_NOSYSTEM": "1",
    "GIT_CONFIG_GLOBAL": os.devnull,
    "GIT_TERMINAL_PROMPT": "0",
    "GIT_OPTIONAL_LOCKS": "0",
    "LC_ALL": "C",
}

_HUNK_RE = re.compile(rb"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")


class Language(enum.Enum):
    C = "C"
    CPP = "CPP"
    JAVA = "Java"
    JAVASCRIPT = "JavaScript"
    PYTHON = "Python"

    @classmethod
    def parse(cls, value: str | Language) -> Language:
        if isinstance(value, Language):
            return value
        key = str(value).strip().lower()
        aliases = {
            "c": cls.C,
            "cpp": cls.CPP,
            "c++": cls.CPP,
            "cxx": cls.CPP,
            "java": cls.JAVA,
            "javascript": cls.JAVASCRIPT,
            "js": cls.JAVASCRIPT,
            "python": cls.PYTHON,
            "py": cls.PYTHON,
        }
        try:
            return aliases[key]
        except KeyError:
            raise UnsupportedLanguage(f"unsupported language: {value!r}") from None


class ChangeKind(str, enum.Enum):
    ADD = "add"
    DELETE = "delete"
    MODIFY = "modify"
    RENAME = "rename"


@dataclass(frozen=True, slots=True)
class Hunk:
    old_start: int
    old_count: int
    new_start: int
    new_count: int
    removed: tuple[str, ...]
    added: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.removed) != self.old_count or len(self.added) != self.new_count:
            raise ValueError("hunk line counts do not match its line lists")

    def new_line_index(self, line_no: int) -> int | None:
        """Position of new-side ``line_no`` within ``added``, or None."""
        if self.new_count and self.new_start <= line_no < self.new_start + self.new_count:
            return line_no - self.new_start
        return None


@dataclass(frozen=True, slots=True)
class FileDiff:
    old_path: str | None
    new_path: str | None
    hunks: tuple[Hunk, ...]
    change_kind: ChangeKind
    binary: bool = False
    mode_change: bool = False

    @property
    def path(self) -> str:
        return self.new_path if self.new_path is not None else self.old_path  # type: ignore[return-value]

    @property
    def lines_added(self) -> int:
        return sum(h.new_count for h in self.hunks)

    @property
    def lines_removed(self) -> int:
        return sum(h.old_count for h in self.hunks)

    def hunk_for_new_line(self, line_no: int) -> tuple[Hunk, int] | None:
        for hunk in self.hunks:
            idx = hunk.new_line_index(line_no)
            if idx is not None:
                return hunk, idx
        return None

    def old_line_for_unchanged(self, line_no: int) -> int:
        """Map an unchanged new-side line number back to the old side."""
        offset = 0
        for hunk in self.hunks:
            new_end = hunk.new_start + hunk.new_count if hunk.new_count else hunk.new_start + 1
            if new_end <= line_no:
                offset += hunk.old_count - hunk.new_count
        return line_no + offset


@dataclass(frozen=True, slots=True)
class CommitRecord:
    id: str
    parent_ids: tuple[str, ...]
    author_id: str
    author_time: int
    commit_time: int
    message: str
    files: tuple[FileDiff, ...] = ()

    @property
    def is_merge(self) -> bool:
        return len(self.parent_ids) > 1


@dataclass(frozen=True, slots=True)
class BlameEntry:
    file: str
    line_no: int
    content: str
    origin_commit: str
    origin_line_no: int
    origin_file: str


class _LRU:
    """Small thread-safe LRU cache keyed by hashable tuples."""

    def __init__(self, maxsize: int = 512) -> None:
        self._data: OrderedDict[Hashable, Any] = OrderedDict()
        self._lock = threading.Lock()
        self._maxsize = maxsize

    def get_or_compute(self, key: Hashable, compute: Callable[[], R]) -> R:
        with self._lock:
            if key in self._data:
                self._data.move_to_end(key)
                return self._data[key]
        value = compute()
        with self._lock:
            self._data[key] = value
            self._data.move_to_end(key)
            while len(self._data) > self._maxsize:
                self._data.popitem(last=False)
        return value


@dataclass(eq=False)
class RepoHandle:
    root_path: Path
    primary_language: Language
    head_ref: str | None
    _blame_cache: _LRU = field(default_factory=lambda: _LRU(256), repr=False)
    _diff_cache: _LRU = field(default_factory=lambda: _LRU(4096), repr=False)
    _parent_cache: _LRU = field(default_factory=lambda: _LRU(65536), repr=False)

    def git(self, *args: str, check: bool = True) -> subprocess.CompletedProcess[bytes]:
        return run_git(self.root_path, list(args), check=check)


def run_git(cwd: Path | str, args: list[str], check: bool = True) -> subprocess.CompletedProcess[bytes]:
    env = dict(os.environ)
    env.update(_GIT_ENV)
    proc = subprocess.run(
        ["git", "-c", "core.quotePath=false", *args],
        cwd=cwd,
        env=env,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        check=False,
    )
    if check and proc.returncode != 0:
        raise GitCommandFailed(args, proc.returncode, proc.stderr.decode("utf-8", "replace"))
    return proc


def normalize_identity(name: str, email: str) -> str:
    email = email.strip().lower()
    return email if email else name.strip().lower()


def open_repo(path: str | os.PathLike[str], language: str | Language) -> RepoHandle:
    lang = Language.parse(language)
    root = Path(path)
    if not root.is_dir():
        raise NotARepository(f"{root} does not exist or is not a directory")
    proc = run_git(root, ["rev-parse", "--show-toplevel"], check=False)
    if proc.returncode != 0:
        bare = run_git(root, ["rev-parse", "--is-bare-repository"], check=False)
        if bare.returncode != 0 or bare.stdout.strip() != b"true":
            raise NotARepository(f"{root} is not a git repository")
        top = root.resolve()
    else:
        top = Path(proc.stdout.decode().strip())
    ref = run_git(top, ["symbolic-ref", "--short", "-q", "HEAD"], check=False)
    head_ref = ref.stdout.decode().strip() or None
    return RepoHandle(root_path=top, primary_language=lang, head_ref=head_ref)


def has_head(handle: RepoHandle) -> bool:
    return handle.git("rev-parse", "--verify", "-q", "HEAD^{commit}", check=False).returncode == 0


# -- diff parsing -----------------------------------------------------------


def _unquote(path: bytes) -> str:
    if path.startswith(b'"') and path.endswith(b'"'):
        raw, _ = codecs.escape_decode(path[1:-1])
        return raw.decode("utf-8", "replace")
    return path.decode("utf-8", "replace")


def _strip_prefix(path: bytes) -> str | None:
    # git ends ---/+++ names containing a space with a tab
    if path.endswith(b"\t"):
        path = path[:-1]
    if path == b"/dev/null":
        return None
    name = _unquote(path)
    return name[2:] if name[:2] in ("a/", "b/") else name


def _header_paths(rest: bytes) -> tuple[str, str]:
    if rest.startswith(b'"'):
        end = rest.index(b'"', 1)
        while rest[end - 1 : end] == b"\\":
            end = rest.index(b'"', end + 1)
        first, second = rest[: end + 1], rest[end + 2 :]
        return _strip_prefix(first) or "", _strip_prefix(second) or ""
    # unquoted "a/P b/P": only unambiguous when both sides are equal
    n = (len(rest) - 5) // 2
    path = rest[2 : 2 + n].decode("utf-8", "replace")
    return path, path


class _FileBuilder:
    __slots__ = ("old", "new", "kind", "binary", "mode", "hunks", "_cur")

    def __init__(self, old: str, new: str) -> None:
        self.old: str | None = old
        self.new: str | None = new
        self.kind = ChangeKind.MODIFY
        self.binary = False
        self.mode = False
        self.hunks: list[Hunk] = []
        self._cur: list[Any] | None = None

    def open_hunk(self, m: re.Match[bytes]) -> None:
        self.close_hunk()
        old_count = 1 if m.group(2) is None else int(m.group(2))
        new_count = 1 if m.group(4) is None else int(m.group(4))
        self._cur = [int(m.group(1)), old_count, int(m.group(3)), new_count, [], []]

    def close_hunk(self) -> None:
        if self._cur is not None:
            os_, oc, ns, nc, rem, add = self._cur
            self.hunks.append(Hunk(os_, oc, ns, nc, tuple(rem), tuple(add)))
            self._cur = None

    def line(self, raw: bytes) -> None:
        if self._cur is None:
            return
        text = raw[1:].decode("utf-8", "replace")
        if raw[:1] == b"-":
            self._cur[4].append(text)
        elif raw[:1] == b"+":
            self._cur[5].append(text)

    def build(self) -> FileDiff:
        self.close_hunk()
        if self.kind is ChangeKind.ADD:
            self.old = None
        elif self.kind is ChangeKind.DELETE:
            self.new = None
        return FileDiff(
            old_path=self.old,
            new_path=self.new,
            hunks=tuple(self.hunks),
            change_kind=self.kind,
            binary=self.binary,
            mode_change=self.mode,
        )


def parse_patch(data: bytes) -> list[FileDiff]:
    """Parse ``git diff -p -U0`` output into FileDiffs."""
    files: list[FileDiff] = []
    cur: _FileBuilder | None = None
    in_hunks = False
    for raw in data.split(b"\n"):
        if raw.startswith(b"diff --git "):
            if cur is not None:
                files.append(cur.build())
            old, new = _header_paths(raw[len(b"diff --git ") :])
            cur = _FileBuilder(old, new)
            in_hunks = False
            continue
        if cur is None:
            continue
        if in_hunks:
            if raw.startswith(b"@@"):
                m = _HUNK_RE.match(raw)
                if m:
                    cur.open_hunk(m)
            elif raw[:1] in (b"-", b"+"):
                cur.line(raw)
            continue
        if raw.startswith(b"@@"):
            m = _HUNK_RE.match(raw)
            if m:
                in_hunks = True
                cur.open_hunk(m)
        elif raw.startswith(b"new file mode"):
            cur.kind = ChangeKind.ADD
        elif raw.startswith(b"deleted file mode"):
            cur.kind = ChangeKind.DELETE
        elif raw.startswith(b"old mode") or raw.startswith(b"new mode"):
            cur.mode = True
        elif raw.startswith(b"rename from "):
            cur.old = _unquote(raw[len(b"rename from ") :])
            cur.kind = ChangeKind.RENAME
        elif raw.startswith(b"rename to "):
            cur.new = _unquote(raw[len(b"rename to ") :])
            cur.kind = ChangeKind.RENAME
        elif raw.startswith(b"Binary files ") or raw.startswith(b"GIT binary patch"):
            cur.binary = True
        elif raw.startswith(b"--- "):
            path = _strip_prefix(raw[4:])
            if path is not None:
                cur.old = path
        elif raw.startswith(b"+++ "):
            path = _strip_prefix(raw[4:])
            if path is not None:
                cur.new = path
    if cur is not None:
        files.append(cur.build())
    return files


_DIFF_ARGS = ("diff-tree", "-p", "-r", RENAME_THRESHOLD, "-U0", "--no-commit-id", "--no-color", "--no-ext-diff")


def diff_between(handle: RepoHandle, old: str | None, new: str) -> tuple[FileDiff, ...]:
    """File diffs taking revision ``old`` to ``new``; ``old=None`` means the empty tree."""

    def compute() -> tuple[FileDiff, ...]:
        if old is None:
            proc = handle.git(*_DIFF_ARGS, "--root", new)
        else:
            proc = handle.git(*_DIFF_ARGS, old, new)
        return tuple(parse_patch(proc.stdout))

    return handle._diff_cache.get_or_compute((old, new), compute)


def commit_parents(handle: RepoHandle, commit_id: str) -> tuple[str, ...]:
    def compute() -> tuple[str, ...]:
        out = handle.git("rev-list", "--parents", "-n", "1", commit_id).stdout.decode().split()
        return tuple(out[1:])

    return handle._parent_cache.get_or_compute(commit_id, compute)


def commit_diff(handle: RepoHandle, commit_id: str) -> tuple[FileDiff, ...]:
    """Diff of a commit against its first parent (empty tree for roots)."""
    parents = commit_parents(handle, commit_id)
    return diff_between(handle, parents[0] if parents else None, commit_id)


# -- commit enumeration -----------------------------------------------------

_LOG_FORMAT = "%H%n%P%n%an%n%ae%n%at%n%ct%n%B"


def _parse_log_entry(chunk: bytes) -> CommitRecord:
    parts = chunk.split(b"\n", 6)
    parts += [b""] * (7 - len(parts))
    cid, parents, name, email, atime, ctime, body = parts
    message = body.decode("utf-8", "replace")
    if message.endswith("\n"):
        message = message[:-1]
    return CommitRecord(
        id=cid.decode(),
        parent_ids=tuple(parents.decode().split()),
        author_id=normalize_identity(name.decode("utf-8", "replace"), email.decode("utf-8", "replace")),
        author_time=max(0, int(atime or 0)),
        commit_time=max(0, int(ctime or 0)),
        message=message,
    )


def read_commit(handle: RepoHandle, commit_id: str, with_files: bool = True) -> CommitRecord:
    proc = handle.git("log", "-z", "--no-walk", "--encoding=UTF-8", f"--format={_LOG_FORMAT}", commit_id)
    rec = _parse_log_entry(proc.stdout.rstrip(b"\0"))
    if not with_files:
        return rec
    return _with_files(handle, rec)


def _with_files(handle: RepoHandle, rec: CommitRecord) -> CommitRecord:
    parent = rec.parent_ids[0] if rec.parent_ids else None
    files = diff_between(handle, parent, rec.id)
    return CommitRecord(rec.id, rec.parent_ids, rec.author_id, rec.author_time, rec.commit_time, rec.message, files)


def _chronological_topo_order(records: dict[str, CommitRecord]) -> list[str]:
    """Kahn's algorithm keyed by (commit_time, id).

    Yields a topological order that is also sorted by commit_time whenever
    timestamps are consistent with ancestry; equal timestamps put parents
    first, then fall back to the hash.
    """
    children: dict[str, list[str]] = {cid: [] for cid in records}
    indegree = dict.fromkeys(records, 0)
    for cid, rec in records.items():
        for p in set(rec.parent_ids):
            if p in records:
                children[p].append(cid)
                indegree[cid] += 1
    heap = [(records[c].commit_time, c) for c, d in indegree.items() if d == 0]
    heapq.heapify(heap)
    order: list[str] = []
    while heap:
        _, cid = heapq.heappop(heap)
        order.append(cid)
        for child in children[cid]:
            indegree[child] -= 1
            if indegree[child] == 0:
                heapq.heappush(heap, (records[child].commit_time, child))
    return order


def enumerate_commits(
    handle: RepoHandle,
    until: int | None = None,
    workers: int = 1,
    with_files: bool = True,
) -> list[CommitRecord]:
    """All ancestors of HEAD, oldest first, optionally cut off after ``until``."""
    if not has_head(handle):
        return []
    proc = handle.git("log", "-z", "--encoding=UTF-8", f"--format={_LOG_FORMAT}", "HEAD")
    records: dict[str, CommitRecord] = {}
    for chunk in proc.stdout.split(b"\0"):
        chunk = chunk.lstrip(b"\n")
        if not chunk:
            continue
        rec = _parse_log_entry(chunk)
        if until is not None and rec.commit_time > until:
            continue
        records[rec.id] = rec
    order = [records[c] for c in _chronological_topo_order(records)]
    if not with_files:
        return order
    return ordered_map(lambda rec: _with_files(handle, rec), order, workers)


def map_commits_parallel(
    handle: RepoHandle,
    ids: Sequence[str],
    task: Callable[[RepoHandle, str], R],
    workers: int = 1,
) -> list[R]:
    """Run a read-only per-commit task; output order equals input order."""
    return ordered_map(lambda cid: task(handle, cid), list(ids), workers)


# -- file content and blame -------------------------------------------------


def read_blob(handle: RepoHandle, revision: str, file: str) -> bytes | None:
    proc = handle.git("cat-file", "blob", f"{revision}:{file}", check=False)
    if proc.returncode != 0:
        return None
    return proc.stdout


def _line_count(data: bytes) -> int:
    if not data:
        return 0
    return data.count(b"\n") + (0 if data.endswith(b"\n") else 1)


def count_lines_at(handle: RepoHandle, revision: str | None, file: str) -> int:
    """Number of lines of ``file`` at ``revision``; 0 when absent."""
    if revision is None:
        return 0
    data = read_blob(handle, revision, file)
    return 0 if data is None else _line_count(data)


def _parse_line_porcelain(data: bytes, file: str) -> list[BlameEntry]:
    entries: list[BlameEntry] = []
    header: list[bytes] | None = None
    origin_file = file
    for raw in data.split(b"\n"):
        if header is None:
            if raw:
                header = raw.split()
                origin_file = file
            continue
        if raw.startswith(b"\t"):
            entries.append(
                BlameEntry(
                    file=file,
                    line_no=int(header[2]),
                    content=raw[1:].decode("utf-8", "replace"),
                    origin_commit=header[0].decode(),
                    origin_line_no=int(header[1]),
                    origin_file=origin_file,
                )
            )
            header = None
        elif raw.startswith(b"filename "):
            origin_file = _unquote(raw[len(b"filename ") :])
    return entries


def blame_file(handle: RepoHandle, revision: str, file: str) -> tuple[BlameEntry, ...]:
    def compute() -> tuple[BlameEntry, ...]:
        if handle.git("cat-file", "-e", f"{revision}:{file}", check=False).returncode != 0:
            raise FileAbsentAtRevision(f"{file} does not exist at {revision}")
        proc = handle.git("blame", "--line-porcelain", revision, "--", file)
        return tuple(_parse_line_porcelain(proc.stdout, file))

    return handle._blame_cache.get_or_compute((revision, file), compute)


def blame_at(handle: RepoHandle, revision: str, file: str, lines: Sequence[int]) -> list[BlameEntry]:
    """Blame the given 1-based lines of ``file`` as of ``revision``."""
    entries = blame_file(handle, revision, file)
    out = []
    for n in lines:
        if n < 1 or n > len(entries):
            raise LineOutOfRange(f"{file}@{revision[:12]} has {len(entries)} lines, asked for {n}")
        out.append(entries[n - 1])
    return out


def is_ancestor(handle: RepoHandle, ancestor: str, descendant: str) -> bool:
    proc = handle.git("merge-base", "--is-ancestor", ancestor, descendant, check=False)
    return proc.returncode == 0
