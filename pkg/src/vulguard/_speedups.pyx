# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``vulguard._pure``.

Semantics are identical to the pure-Python reference; see that module for
the contracts.
"""

from libc.math cimport INFINITY
from libc.stdlib cimport free, malloc, qsort

import numpy as np

cdef int STYLE_HASH = 1


cdef Py_ssize_t _closing_quote(str line, Py_ssize_t start, Py_UCS4 quote, Py_ssize_t n):
    cdef Py_ssize_t j = start + 1
    cdef Py_UCS4 ch
    while j < n:
        ch = line[j]
        if ch == u'\\':
            j += 2
            continue
        if ch == quote:
            return j
        j += 1
    return -1


def strip_comments(list lines, int style, bint in_block=False):
    cdef list out = []
    cdef list buf
    cdef str line
    cdef Py_ssize_t i, n, seg, end, close
    cdef Py_UCS4 ch, nxt
    for line in lines:
        buf = []
        i = 0
        n = len(line)
        seg = 0
        while i < n:
            if in_block:
                end = line.find(u"*/", i)
                if end < 0:
                    i = n
                    seg = n
                    break
                i = end + 2
                seg = i
                in_block = False
                continue
            ch = line[i]
            if ch == u'"' or ch == u"'":
                close = _closing_quote(line, i, ch, n)
                if close >= 0:
                    i = close + 1
                else:
                    i += 1
                continue
            if style == STYLE_HASH:
                if ch == u'#':
                    buf.append(line[seg:i])
                    seg = n
                    i = n
                    break
            elif ch == u'/' and i + 1 < n:
                nxt = line[i + 1]
                if nxt == u'/':
                    buf.append(line[seg:i])
                    seg = n
                    i = n
                    break
                if nxt == u'*':
                    buf.append(line[seg:i])
                    in_block = True
                    i += 2
                    seg = i
                    continue
            i += 1
        if seg < n:
            buf.append(line[seg:])
        out.append(u"".join(buf))
    return out, bool(in_block)


cdef struct Pair:
    double value
    double label


cdef int _cmp_pair(const void* a, const void* b) noexcept nogil:
    cdef double va = (<Pair*>a).value
    cdef double vb = (<Pair*>b).value
    if va < vb:
        return -1
    if va > vb:
        return 1
    return 0


def best_split(double[:, :] X, y, rows, features):
    cdef long[::1] r = np.ascontiguousarray(rows, dtype=np.int64)
    cdef long[::1] fs = np.ascontiguousarray(features, dtype=np.int64)
    cdef double[::1] yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = r.shape[0]
    cdef Py_ssize_t k, i
    cdef long f
    cdef long best_f = -1
    cdef double best_thr = 0.0
    cdef double best_score = INFINITY
    cdef double total_pos = 0.0
    cdef double pl, pr, nl, nr, score
    cdef Pair* pairs
    if n < 2:
        return best_f, best_thr, best_score
    for i in range(n):
        total_pos += yy[r[i]]
    pairs = <Pair*>malloc(n * sizeof(Pair))
    if pairs == NULL:
        raise MemoryError()
    try:
        for k in range(fs.shape[0]):
            f = fs[k]
            for i in range(n):
                pairs[i].value = X[r[i], f]
                pairs[i].label = yy[r[i]]
            qsort(pairs, n, sizeof(Pair), _cmp_pair)
            pl = 0.0
            for i in range(n - 1):
                pl += pairs[i].label
                if not (pairs[i].value < pairs[i + 1].value):
                    continue
                nl = <double>(i + 1)
                nr = <double>n - nl
                pr = total_pos - pl
                score = pl * (nl - pl) / nl + pr * (nr - pr) / nr
                if score < best_score:
                    best_score = score
                    best_f = f
                    best_thr = pairs[i].value
    finally:
        free(pairs)
    return int(best_f), float(best_thr), float(best_score)
