# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled ordered tree edit distance kernel (unit costs).

Hot path for all-pairs similarity-matrix construction; mirrors the pure
Python fallback in ``_ted_py``. Trees arrive pre-flattened: postorder
label ids, leftmost-leaf-descendant indices (local, 0-based per tree)
and ascending keyroot lists.
"""

import numpy as np

BACKEND_NAME = "compiled"


cdef int _pair(const int* lab1, const int* lml1, const int* kr1, int n1, int nk1,
               const int* lab2, const int* lml2, const int* kr2, int n2, int nk2,
               int* td, int* fd, int stride) noexcept nogil:
    cdef int ki, kj, i, j, li, lj, ioff, joff, m, n, x, y, xi, yj
    cdef int a, b, c, p, q, lx, labx, base, prev, trow
    cdef bint on_path1
    for ki in range(nk1):
        i = kr1[ki]
        li = lml1[i]
        ioff = li - 1
        m = i - li + 2
        for kj in range(nk2):
            j = kr2[kj]
            lj = lml2[j]
            joff = lj - 1
            n = j - lj + 2
            fd[0] = 0
            for x in range(1, m):
                fd[x * stride] = fd[(x - 1) * stride] + 1
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


def ted_pair(labels1, lmld1, kr1, labels2, lmld2, kr2):
    cdef int[::1] lab1 = np.ascontiguousarray(labels1, dtype=np.int32)
    cdef int[::1] lml1 = np.ascontiguousarray(lmld1, dtype=np.int32)
    cdef int[::1] k1 = np.ascontiguousarray(kr1, dtype=np.int32)
    cdef int[::1] lab2 = np.ascontiguousarray(labels2, dtype=np.int32)
    cdef int[::1] lml2 = np.ascontiguousarray(lmld2, dtype=np.int32)
    cdef int[::1] k2 = np.ascontiguousarray(kr2, dtype=np.int32)
    cdef int n1 = lab1.shape[0]
    cdef int n2 = lab2.shape[0]
    cdef int stride = (n1 if n1 > n2 else n2) + 1
    td_arr = np.zeros(n1 * n2, dtype=np.int32)
    fd_arr = np.zeros(stride * stride, dtype=np.int32)
    cdef int[::1] td = td_arr
    cdef int[::1] fd = fd_arr
    return _pair(&lab1[0], &lml1[0], &k1[0], n1, k1.shape[0],
                 &lab2[0], &lml2[0], &k2[0], n2, k2.shape[0],
                 &td[0], &fd[0], stride)


def ted_all_pairs(labels, lmld, offsets, kr, kr_offsets):
    """All-pairs TED over flattened trees; returns a symmetric int32 matrix."""
    cdef int[::1] lab = np.ascontiguousarray(labels, dtype=np.int32)
    cdef int[::1] lml = np.ascontiguousarray(lmld, dtype=np.int32)
    cdef int[::1] off = np.ascontiguousarray(offsets, dtype=np.int32)
    cdef int[::1] krs = np.ascontiguousarray(kr, dtype=np.int32)
    cdef int[::1] koff = np.ascontiguousarray(kr_offsets, dtype=np.int32)
    cdef int count = off.shape[0] - 1
    cdef int a, b, d, na, nb, max_n, stride

    max_n = 0
    for a in range(count):
        na = off[a + 1] - off[a]
        if na > max_n:
            max_n = na
    stride = max_n + 1

    out_arr = np.zeros((count, count), dtype=np.int32)
    td_arr = np.zeros(max_n * max_n if max_n else 1, dtype=np.int32)
    fd_arr = np.zeros(stride * stride, dtype=np.int32)
    cdef int[:, ::1] out = out_arr
    cdef int[::1] td = td_arr
    cdef int[::1] fd = fd_arr

    with nogil:
        for a in range(count):
            na = off[a + 1] - off[a]
            for b in range(a + 1, count):
                nb = off[b + 1] - off[b]
                d = _pair(&lab[off[a]], &lml[off[a]], &krs[koff[a]], na, koff[a + 1] - koff[a],
                          &lab[off[b]], &lml[off[b]], &krs[koff[b]], nb, koff[b + 1] - koff[b],
                          &td[0], &fd[0], stride)
                out[a, b] = d
                out[b, a] = d
    return out_arr
