"""Pure-Python ordered tree edit distance kernel (unit costs).

Fallback backend for :mod:`mwpcl.similarity`; same call surface as the
compiled core in ``_ted_core``. Trees arrive pre-flattened (postorder
label ids, leftmost-leaf-descendant indices, keyroots) so the kernel is
a pair of nested dynamic programs and nothing else.

The hot loops run over flat Python lists with manual strides; this is
about the best CPython can do but still far behind the compiled core
(see benchmarks/bench_ted.py).
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "pure-python"


def _pair(lab1, lml1, kr1, n1, lab2, lml2, kr2, n2, td, fd, stride):
    """Zhang-Shasha double DP for one tree pair.

    ``td`` is an n1*n2 flat scratch for subtree distances, ``fd`` a flat
    forest-distance scratch with row stride ``stride`` >= max(n1, n2) + 1.
    """
    for i in kr1:
        li = lml1[i]
        ioff = li - 1
        m = i - li + 2
        for j in kr2:
            lj = lml2[j]
            joff = lj - 1
            n = j - lj + 2
            fd[0] = 0
            row = 0
            for x in range(1, m):
                fd[row + stride] = fd[row] + 1
                row += stride
            for y in range(1, n):
                fd[y] = fd[y - 1] + 1
            for x in range(1, m):
                xi = x + ioff
                lx = lml1[xi]
                labx = lab1[xi]
                on_path1 = lx == li
                base = x * stride
                prev = base - stride
                trow = xi * n2
                for y in range(1, n):
                    yj = y + joff
                    a = fd[prev + y] + 1
                    b = fd[base + y - 1] + 1
                    if on_path1 and lml2[yj] == lj:
                        c = fd[prev + y - 1]
                        if labx != lab2[yj]:
                            c += 1
                        if b < a:
                            a = b
                        if c < a:
                            a = c
                        fd[base + y] = a
                        td[trow + yj] = a
                    else:
                        p = lx - 1 - ioff
                        q = lml2[yj] - 1 - joff
                        c = fd[p * stride + q] + td[trow + yj]
                        if b < a:
                            a = b
                        if c < a:
                            a = c
                        fd[base + y] = a
    return td[(n1 - 1) * n2 + (n2 - 1)]


def ted_pair(labels1, lmld1, kr1, labels2, lmld2, kr2) -> int:
    labels1 = list(labels1)
    labels2 = list(labels2)
    lmld1 = list(lmld1)
    lmld2 = list(lmld2)
    n1 = len(labels1)
    n2 = len(labels2)
    stride = max(n1, n2) + 1
    td = [0] * (n1 * n2)
    fd = [0] * (stride * stride)
    return _pair(labels1, lmld1, list(kr1), n1, labels2, lmld2, list(kr2), n2, td, fd, stride)


def ted_all_pairs(labels, lmld, offsets, kr, kr_offsets) -> np.ndarray:
    """All-pairs TED over flattened trees; returns a symmetric int32 matrix."""
    labels = list(labels)
    lmld = list(lmld)
    offsets = list(offsets)
    kr = list(kr)
    kr_offsets = list(kr_offsets)
    count = len(offsets) - 1

    labs = [labels[offsets[t]:offsets[t + 1]] for t in range(count)]
    lmls = [lmld[offsets[t]:offsets[t + 1]] for t in range(count)]
    krs = [kr[kr_offsets[t]:kr_offsets[t + 1]] for t in range(count)]
    sizes = [len(x) for x in labs]

    max_n = max(sizes, default=0)
    stride = max_n + 1
    td = [0] * (max_n * max_n)
    fd = [0] * (stride * stride)

    out = np.zeros((count, count), dtype=np.int32)
    for a in range(count):
        la, ma, ka, na = labs[a], lmls[a], krs[a], sizes[a]
        row = out[a]
        for b in range(a + 1, count):
            d = _pair(la, ma, ka, na, labs[b], lmls[b], krs[b], sizes[b], td, fd, stride)
            row[b] = d
            out[b, a] = d
    return out
