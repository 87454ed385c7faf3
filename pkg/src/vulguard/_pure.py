"""Pure-Python implementations of the hot kernels.

These are the reference semantics; ``_speedups.pyx`` must agree with them
exactly (tests compare both on the same inputs).
"""

from __future__ import annotations

import numpy as np

STYLE_C = 0
STYLE_HASH = 1


def _closing_quote(line: str, start: int, quote: str) -> int:
    """Index of the quote closing the literal opened at ``start``, or -1."""
    j = start + 1
    n = len(line)
    while j < n:
        ch = line[j]
        if ch == "\\":
            j += 2
            continue
        if ch == quote:
            return j
        j += 1
    return -1


def strip_comments(lines: list[str], style: int, in_block: bool = False) -> tuple[list[str], bool]:
    """Remove comments from a run of consecutive lines.

    ``style`` selects C-family (``//`` and ``/* */``) or hash (``#``) comments.
    Block-comment state is carried from line to line and returned so callers
    can continue a run. Quote characters only protect comment markers when the
    literal closes on the same line.
    """
    out: list[str] = []
    for line in lines:
        buf: list[str] = []
        i = 0
        n = len(line)
        seg = 0
        while i < n:
            if in_block:
                end = line.find("*/", i)
                if end < 0:
                    i = n
                    seg = n
                    break
                i = end + 2
                seg = i
                in_block = False
                continue
            ch = line[i]
            if ch == '"' or ch == "'":
                close = _closing_quote(line, i, ch)
                if close >= 0:
                    i = close + 1
                else:
                    i += 1
                continue
            if style == STYLE_HASH:
                if ch == "#":
                    buf.append(line[seg:i])
                    seg = n
                    i = n
                    break
            elif ch == "/" and i + 1 < n:
                nxt = line[i + 1]
                if nxt == "/":
                    buf.append(line[seg:i])
                    seg = n
                    i = n
                    break
                if nxt == "*":
                    buf.append(line[seg:i])
                    in_block = True
                    i += 2
                    seg = i
                    continue
            i += 1
        if seg < n:
            buf.append(line[seg:])
        out.append("".join(buf))
    return out, in_block


def best_split(
    X: np.ndarray, y: np.ndarray, rows: np.ndarray, features: np.ndarray
) -> tuple[int, float, float]:
    """Best Gini split of the node made of ``rows`` over the candidate ``features``.

    The score minimised is ``pl*(nl-pl)/nl + pr*(nr-pr)/nr``, i.e. half the
    size-weighted Gini impurity of the two children. Only boundaries between
    distinct values qualify; the threshold is the left-hand value, so a sample
    goes left iff its value is ``<= threshold``. Ties keep the earliest
    feature (in ``features`` order) and then the smallest threshold.
    Returns ``(-1, 0.0, inf)`` when no boundary exists.
    """
    best_f = -1
    best_thr = 0.0
    best_score = np.inf
    n = rows.shape[0]
    if n < 2:
        return best_f, best_thr, best_score
    ysub = y[rows].astype(np.float64)
    total_pos = float(ysub.sum())
    nl = np.arange(1, n, dtype=np.float64)
    nr = float(n) - nl
    for f in features:
        vals = X[rows, f]
        order = np.argsort(vals, kind="stable")
        v = vals[order]
        valid = v[:-1] < v[1:]
        if not valid.any():
            continue
        pl = np.cumsum(ysub[order])[:-1]
        pr = total_pos - pl
        score = pl * (nl - pl) / nl + pr * (nr - pr) / nr
        score = np.where(valid, score, np.inf)
        i = int(np.argmin(score))
        if score[i] < best_score:
            best_score = float(score[i])
            best_f = int(f)
            best_thr = float(v[i])
    return best_f, best_thr, best_score
