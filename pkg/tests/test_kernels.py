"""The compiled and pure-Python kernels must agree exactly."""

from __future__ import annotations

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from vulguard import _pure, kernels

source_lines = st.lists(st.text(alphabet="ab /*#'\"\\\t", max_size=16), max_size=6)


def test_backend_selected():
    assert kernels.BACKEND in ("compiled", "python")
    assert "python" in kernels.backends()


def test_strip_comments_examples(backend):
    out, state = backend.strip_comments(["a /* b", "c */ d // e", 'f "/*" g'], kernels.STYLE_C)
    assert out == ["a ", " d ", 'f "/*" g'] and state is False
    out, state = backend.strip_comments(["x = 1  # note", "s = '#'"], kernels.STYLE_HASH)
    assert out == ["x = 1  ", "s = '#'"] and state is False
    out, state = backend.strip_comments(["/* open"], kernels.STYLE_C)
    assert out == [""] and state is True


@given(source_lines, st.sampled_from([kernels.STYLE_C, kernels.STYLE_HASH]), st.booleans())
def test_strip_comments_backends_agree(lines, style, in_block):
    expected = _pure.strip_comments(list(lines), style, in_block)
    for impl in kernels.backends().values():
        assert impl.strip_comments(list(lines), style, in_block) == expected


def test_best_split_examples(backend):
    X = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0], [4.0, 5.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    rows = np.arange(4, dtype=np.int64)
    f, thr, score = backend.best_split(X, y, rows, np.array([0, 1], dtype=np.int64))
    assert (f, thr, score) == (0, 2.0, 0.0)
    f, _, score = backend.best_split(X, y, rows, np.array([1], dtype=np.int64))
    assert f == -1 and score == np.inf


@settings(max_examples=150, deadline=None)
@given(
    hnp.arrays(np.float64, st.tuples(st.integers(1, 30), st.integers(1, 4)), elements=st.integers(-3, 3).map(float)),
    st.data(),
)
def test_best_split_backends_agree(X, data):
    n = X.shape[0]
    y = np.array(data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)), dtype=np.float64)
    rows = np.array(data.draw(st.lists(st.integers(0, n - 1), min_size=0, max_size=2 * n)), dtype=np.int64)
    feats = np.arange(X.shape[1], dtype=np.int64)
    expected = _pure.best_split(X, y, rows, feats)
    for impl in kernels.backends().values():
        assert impl.best_split(X, y, rows, feats) == expected


def brute_split(X, y, rows, feats):
    best = (-1, 0.0, np.inf)
    for f in feats:
        for thr in sorted(set(X[rows, f]))[:-1]:
            left = rows[X[rows, f] <= thr]
            right = rows[X[rows, f] > thr]
            pl, pr = y[left].sum(), y[right].sum()
            score = pl * (len(left) - pl) / len(left) + pr * (len(right) - pr) / len(right)
            if score < best[2] - 1e-12:
                best = (int(f), float(thr), float(score))
    return best


@settings(max_examples=100, deadline=None)
@given(
    hnp.arrays(np.float64, st.tuples(st.integers(2, 20), st.integers(1, 3)), elements=st.integers(0, 4).map(float)),
    st.data(),
)
def test_best_split_matches_brute_force(X, data):
    n = X.shape[0]
    y = np.array(data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)), dtype=np.float64)
    rows = np.arange(n, dtype=np.int64)
    feats = np.arange(X.shape[1], dtype=np.int64)
    f, thr, score = kernels.best_split(X, y, rows, feats)
    bf, bthr, bscore = brute_split(X, y, rows, feats)
    assert (f, thr) == (bf, bthr)
    assert score == bscore or abs(score - bscore) < 1e-9
