"""Deterministic scripted Git repositories for tests, demos and benchmarks.

Every commit gets fixed author/committer names, e-mails and timestamps, so
the same script always produces the same commit hashes.
"""

from __future__ import annotations

import os
import random
import subprocess
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

BASE_TIME = 1_600_000_000
STEP = 3600

_ENV = {
    "GIT_CONFIG_NOSYSTEM": "1",
    "GIT_CONFIG_GLOBAL": os.devnull,
    "LC_ALL": "C",
    "TZ": "UTC",
}


class RepoBuilder:
    """Write files, then ``commit`` them with explicit parents and dates.

    HEAD stays on ``main``; ``checkout`` moves the work tree to any earlier
    commit so side branches can be built and later merged with ``commit``
    given two parents.
    """

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)
        self.head: str | None = None
        self.clock = BASE_TIME
        self._git("init", "-q")
        self._git("symbolic-ref", "HEAD", "refs/heads/main")

    def _git(self, *args: str, env: Mapping[str, str] | None = None) -> str:
        full_env = {**os.environ, **_ENV, **(env or {})}
        proc = subprocess.run(
            ["git", *args], cwd=self.path, env=full_env, capture_output=True, check=False
        )
        if proc.returncode != 0:
            raise RuntimeError(f"git {' '.join(args)}: {proc.stderr.decode(errors='replace')}")
        return proc.stdout.decode("utf-8", errors="replace").strip()

    def write(self, rel: str, content: str) -> None:
        target = self.path / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(content, encoding="utf-8")

    def read(self, rel: str) -> str:
        return (self.path / rel).read_text(encoding="utf-8")

    def remove(self, rel: str) -> None:
        (self.path / rel).unlink()

    def rename(self, old: str, new: str) -> None:
        (self.path / new).parent.mkdir(parents=True, exist_ok=True)
        os.replace(self.path / old, self.path / new)

    def chmod_exec(self, rel: str) -> None:
        target = self.path / rel
        target.chmod(target.stat().st_mode | 0o111)

    def commit(
        self,
        message: str,
        files: Mapping[str, str | None] | None = None,
        *,
        author: str = "alice",
        time: int | None = None,
        parents: Sequence[str] | None = None,
    ) -> str:
        """Apply ``files`` (None deletes) and record a commit of the work tree."""
        for rel, content in (files or {}).items():
            if content is None:
                self.remove(rel)
            else:
                self.write(rel, content)
        if time is None:
            self.clock += STEP
            time = self.clock
        else:
            self.clock = max(self.clock, time)
        self._git("add", "-A")
        tree = self._git("write-tree")
        if parents is None:
            parents = [self.head] if self.head else []
        stamp = f"@{time} +0000"
        env = {
            "GIT_AUTHOR_NAME": author.capitalize(),
            "GIT_AUTHOR_EMAIL": f"{author}@example.com",
            "GIT_AUTHOR_DATE": stamp,
            "GIT_COMMITTER_NAME": author.capitalize(),
            "GIT_COMMITTER_EMAIL": f"{author}@example.com",
            "GIT_COMMITTER_DATE": stamp,
        }
        args = ["commit-tree", tree, "-m", message]
        for p in parents:
            args += ["-p", p]
        sha = self._git(*args, env=env)
        self._git("update-ref", "HEAD", sha)
        self.head = sha
        return sha

    def checkout(self, sha: str) -> None:
        """Point HEAD (and the work tree) at ``sha``."""
        self._git("update-ref", "HEAD", sha)
        self._git("reset", "-q", "--hard", sha)
        self._git("clean", "-fdq")
        self.head = sha


# -- demo repository -------------------------------------------------------------


@dataclass
class DemoRepo:
    path: Path
    commits: list[str] = field(default_factory=list)
    vics: dict[str, str] = field(default_factory=dict)  # fix -> planted inducing commit
    merges: list[str] = field(default_factory=list)
    cosmetic: list[str] = field(default_factory=list)


_FILES = ("src/parse.c", "src/io.c", "lib/util.c", "net/socket.c")
_AUTHORS = ("alice", "bob", "carol", "dave")
_FEATURE_WORDS = ("Add", "Extend", "Implement", "Support", "Refine")
_TOPICS = ("option parsing", "stream reader", "header decoding", "buffer helpers", "socket setup", "config loading")


def _body(lines: Iterable[str]) -> str:
    return "".join(line + "\n" for line in lines)


def build_demo_repo(path: str | Path, n_slots: int = 64, seed: int = 7) -> DemoRepo:
    """A C project with planted vulnerable commits and their CVE fixes.

    Every fifth slot (offset 2) plants an unchecked access line; three slots
    later a "Fix CVE" commit deletes exactly that line. A few slots hold a
    whitespace-only commit, a comment-only commit, a docs-only commit and a
    merge, so every filter rule fires.
    """
    rng = random.Random(seed)
    b = RepoBuilder(path)
    demo = DemoRepo(Path(path))
    contents: dict[str, list[str]] = {f: [f"/* {f} */", "#include <stdio.h>"] for f in _FILES}
    counter = 0
    pending: dict[int, tuple[str, str, str]] = {}

    def fresh(kind: str) -> str:
        nonlocal counter
        counter += 1
        return f"    {kind}_{counter}();"

    def snapshot(*names: str) -> dict[str, str]:
        return {n: _body(contents[n]) for n in names}

    demo.commits.append(b.commit("Initial import", {**snapshot(*_FILES), "README.md": "demo\n"}, author="alice"))
    cve = 0
    for slot in range(1, n_slots):
        author = _AUTHORS[rng.randrange(len(_AUTHORS))]
        if slot in pending:
            file, marker, vic = pending.pop(slot)
            idx = contents[file].index(marker)
            contents[file][idx : idx + 1] = [f"    if (n_{slot} >= cap) return -1;", marker.replace("();", "_checked();")]
            cve += 1
            sha = b.commit(f"Fix CVE-2024-{cve:04d}: out-of-bounds write in {file}", snapshot(file), author=author)
            demo.vics[sha] = vic
        elif slot == 13:
            f = _FILES[0]
            contents[f] = [line.replace("    ", "\t", 1) if line.startswith("    ") else line for line in contents[f]]
            for due, (pf, marker, vic) in list(pending.items()):
                if pf == f:
                    pending[due] = (pf, marker.replace("    ", "\t", 1), vic)
            sha = b.commit("Reindent parser", snapshot(f), author=author)
            demo.cosmetic.append(sha)
        elif slot == 21:
            f = _FILES[2]
            contents[f].insert(1, "/* helpers shared by the stream code */")
            sha = b.commit("Document helpers", snapshot(f), author=author)
            demo.cosmetic.append(sha)
        elif slot == 33:
            sha = b.commit("Update README", {"README.md": "demo\n\nBuild with make.\n"}, author=author)
            demo.cosmetic.append(sha)
        elif slot == 38:
            base = b.head
            side_file = _FILES[3]
            contents_side = list(contents[side_file]) + [fresh("side")]
            side = b.commit("Add socket keepalive", {side_file: _body(contents_side)}, author="bob")
            demo.commits.append(side)
            b.checkout(base)  # type: ignore[arg-type]
            main_file = _FILES[1]
            contents[main_file].append(fresh("main"))
            main = b.commit("Add io flush", snapshot(main_file), author=author)
            demo.commits.append(main)
            contents[side_file] = contents_side
            sha = b.commit("Merge branch 'keepalive'", snapshot(side_file), author=author, parents=[main, side])
            demo.merges.append(sha)
        elif slot % 5 == 2:
            file = _FILES[rng.randrange(len(_FILES))]
            block = [fresh("step") for _ in range(rng.randint(5, 9))]
            marker = f"    buf[n_{slot}] = read_input_{slot}();"
            block.insert(rng.randrange(1, len(block)), marker)
            contents[file].extend(block)
            topic = _TOPICS[rng.randrange(len(_TOPICS))]
            sha = b.commit(f"{_FEATURE_WORDS[rng.randrange(5)]} {topic}", snapshot(file), author=author)
            pending[slot + 3] = (file, marker, sha)
        else:
            chosen = sorted(rng.sample(_FILES, rng.randint(1, 2)))
            for f in chosen:
                contents[f].extend(fresh("op") for _ in range(rng.randint(1, 3)))
            topic = _TOPICS[rng.randrange(len(_TOPICS))]
            sha = b.commit(f"{_FEATURE_WORDS[rng.randrange(5)]} {topic}", snapshot(*chosen), author=author)
        demo.commits.append(sha)
    return demo
