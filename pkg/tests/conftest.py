from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vulguard import kernels  # noqa: E402
from vulguard.fixture import build_demo_repo  # noqa: E402

import feature_fixture  # noqa: E402
import szz_fixtures  # noqa: E402


@pytest.fixture(scope="session")
def demo_repo(tmp_path_factory):
    return build_demo_repo(tmp_path_factory.mktemp("demo") / "repo")


@pytest.fixture(scope="session")
def feature_repo(tmp_path_factory):
    root = tmp_path_factory.mktemp("features") / "repo"
    return root, feature_fixture.build(root)


@pytest.fixture(scope="session")
def szz_repos(tmp_path_factory):
    base = tmp_path_factory.mktemp("szz")
    builders = {**szz_fixtures.BUILDERS, **szz_fixtures.EXTRA_BUILDERS}
    return {name: fn(base / name) for name, fn in builders.items()}


@pytest.fixture(params=sorted(kernels.backends()))
def backend(request):
    return kernels.backends()[request.param]


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
