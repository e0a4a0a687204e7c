# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the functions in ``_pykernels``.

Same signatures, same random choices for the same uniforms. The heavy loops
run without the GIL so a thread pool can overlap independent calls.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef Py_ssize_t _draw(Py_ssize_t[::1] pool, Py_ssize_t size, Py_ssize_t m,
                      const double[::1] u, bint with_replacement,
                      Py_ssize_t[::1] out) noexcept nogil:
    """Write the candidate set into ``out``; return its size.

    ``pool`` is clobbered by the partial shuffle.
    """
    cdef Py_ssize_t i, t, tmp
    if with_replacement:
        for i in range(m):
            t = <Py_ssize_t>(u[i] * size)
            if t >= size:
                t = size - 1
            out[i] = pool[t]
        return m
    if size <= m:
        for i in range(size):
            out[i] = pool[i]
        return size
    for i in range(m):
        t = i + <Py_ssize_t>(u[i] * (size - i))
        if t >= size:
            t = size - 1
        tmp = pool[i]
        pool[i] = pool[t]
        pool[t] = tmp
        out[i] = pool[i]
    return m


def rank_mc_counts(Py_ssize_t k, Py_ssize_t m, Py_ssize_t p, const double[:, :, ::1] U,
                   bint with_replacement=False):
    cdef Py_ssize_t reps = U.shape[0]
    cdef Py_ssize_t mm = m if m < p else p
    cdef Py_ssize_t steps = k if k < p else p
    counts_arr = np.zeros(p, dtype=np.int64)
    cdef cnp.int64_t[::1] counts = counts_arr
    cdef Py_ssize_t[::1] pool = np.empty(p, dtype=np.intp)
    cdef Py_ssize_t[::1] cand = np.empty(max(m, 1), dtype=np.intp)
    cdef char[::1] taken = np.zeros(p, dtype=np.int8)
    cdef Py_ssize_t r, l, j, size, nc, i, s
    with nogil:
        for r in range(reps):
            for j in range(p):
                taken[j] = 0
            for l in range(steps):
                size = 0
                for j in range(p):
                    if not taken[j]:
                        pool[size] = j
                        size += 1
                nc = _draw(pool, size, m, U[r, l], with_replacement, cand)
                s = cand[0]
                for i in range(1, nc):
                    if cand[i] < s:
                        s = cand[i]
                taken[s] = 1
            for j in range(p):
                if taken[j]:
                    counts[j] += 1
    return counts_arr


cdef Py_ssize_t _path(const double[:, ::1] G, const double[::1] b, Py_ssize_t k,
                      Py_ssize_t m, const double[:, ::1] U, double tol,
                      bint with_replacement,
                      double[::1] c, double[::1] d, double[:, ::1] A,
                      char[::1] taken, Py_ssize_t[::1] pool, Py_ssize_t[::1] cand,
                      Py_ssize_t[::1] selected, double[:, ::1] R, double[::1] qty,
                      cnp.int64_t[:, ::1] cand_out, bint record) noexcept nogil:
    cdef Py_ssize_t p = G.shape[0]
    cdef Py_ssize_t l, j, t, i, size, nc, s
    cdef double best, obj, norm, acc, q
    for j in range(p):
        c[j] = b[j]
        d[j] = G[j, j]
        taken[j] = 0
    for l in range(k):
        size = 0
        for j in range(p):
            if not taken[j] and d[j] > tol * G[j, j]:
                pool[size] = j
                size += 1
        if size == 0:
            return l
        nc = _draw(pool, size, m, U[l], with_replacement, cand)
        if record:
            for i in range(nc):
                cand_out[l, i] = cand[i]
        s = -1
        best = -1.0
        for i in range(nc):
            j = cand[i]
            obj = c[j] * c[j] / d[j]
            if obj > best or (obj == best and j < s):
                best = obj
                s = j
        norm = sqrt(d[s])
        for j in range(p):
            acc = G[s, j]
            for t in range(l):
                acc -= A[t, s] * A[t, j]
            A[l, j] = acc / norm
        q = c[s] / norm
        qty[l] = q
        for t in range(l):
            R[t, l] = A[t, s]
        R[l, l] = norm
        for j in range(p):
            c[j] -= A[l, j] * q
            d[j] -= A[l, j] * A[l, j]
        taken[s] = 1
        selected[l] = s
    return k


cdef void _coef_paths(Py_ssize_t ke, Py_ssize_t[::1] selected, double[:, ::1] R,
                      double[::1] qty, double[::1] beta, double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t l, i, t
    cdef double acc
    for l in range(1, ke + 1):
        for i in range(l - 1, -1, -1):
            acc = qty[i]
            for t in range(i + 1, l):
                acc -= R[i, t] * beta[t]
            beta[i] = acc / R[i, i]
        for i in range(l):
            out[l - 1, selected[i]] += beta[i]


def greedy_path(G, b, Py_ssize_t k, Py_ssize_t m, U, double tol=1e-10,
                bint with_replacement=False):
    cdef const double[:, ::1] Gv = np.ascontiguousarray(G, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef const double[:, ::1] Uv = np.ascontiguousarray(U, dtype=np.float64)
    cdef Py_ssize_t p = Gv.shape[0]
    cdef Py_ssize_t mm = m if m < p else p
    R_arr = np.zeros((k, k))
    qty_arr = np.zeros(k)
    sel_arr = np.zeros(k, dtype=np.intp)
    cand_arr = np.full((k, mm), -1, dtype=np.int64)
    cdef Py_ssize_t ke
    cdef double[::1] c = np.empty(p)
    cdef double[::1] d = np.empty(p)
    cdef double[:, ::1] A = np.zeros((max(k, 1), p))
    cdef char[::1] taken = np.zeros(p, dtype=np.int8)
    cdef Py_ssize_t[::1] pool = np.empty(p, dtype=np.intp)
    cdef Py_ssize_t[::1] cand = np.empty(max(m, 1), dtype=np.intp)
    cdef Py_ssize_t[::1] selected = sel_arr
    cdef double[:, ::1] R = R_arr
    cdef double[::1] qty = qty_arr
    cdef cnp.int64_t[:, ::1] cand_out = cand_arr
    with nogil:
        ke = _path(Gv, bv, k, m, Uv, tol, with_replacement, c, d, A, taken, pool,
                   cand, selected, R, qty, cand_out, True)
    return (sel_arr[:ke].astype(np.int64), R_arr[:ke, :ke].copy(),
            qty_arr[:ke].copy(), cand_arr)


def coef_paths(selected, R, qty, Py_ssize_t p):
    cdef Py_ssize_t[::1] sel = np.ascontiguousarray(selected, dtype=np.intp)
    cdef double[:, ::1] Rv = np.ascontiguousarray(R, dtype=np.float64)
    cdef double[::1] qv = np.ascontiguousarray(qty, dtype=np.float64)
    cdef Py_ssize_t ke = sel.shape[0]
    out_arr = np.zeros((ke, p))
    cdef double[:, ::1] out = out_arr
    cdef double[::1] beta = np.zeros(max(ke, 1))
    with nogil:
        _coef_paths(ke, sel, Rv, qv, beta, out)
    return out_arr


def ensemble_coef_paths(G, b, Py_ssize_t k, Py_ssize_t m, U, double tol=1e-10,
                        bint with_replacement=False):
    cdef const double[:, ::1] Gv = np.ascontiguousarray(G, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef const double[:, :, ::1] Uv = np.ascontiguousarray(U, dtype=np.float64)
    cdef Py_ssize_t p = Gv.shape[0]
    cdef Py_ssize_t reps = Uv.shape[0]
    cdef Py_ssize_t kk = max(k, 1)
    total_arr = np.zeros((k, p))
    cdef double[:, ::1] total = total_arr
    cdef double[:, ::1] one = np.zeros((kk, p))
    cdef double[::1] c = np.empty(p)
    cdef double[::1] d = np.empty(p)
    cdef double[:, ::1] A = np.zeros((kk, p))
    cdef char[::1] taken = np.zeros(p, dtype=np.int8)
    cdef Py_ssize_t[::1] pool = np.empty(p, dtype=np.intp)
    cdef Py_ssize_t[::1] cand = np.empty(max(m, 1), dtype=np.intp)
    cdef Py_ssize_t[::1] selected = np.zeros(kk, dtype=np.intp)
    cdef double[:, ::1] R = np.zeros((kk, kk))
    cdef double[::1] qty = np.zeros(kk)
    cdef double[::1] beta = np.zeros(kk)
    cdef cnp.int64_t[:, ::1] dummy = np.zeros((1, 1), dtype=np.int64)
    cdef Py_ssize_t r, l, j, ke, t_row
    with nogil:
        for r in range(reps):
            ke = _path(Gv, bv, k, m, Uv[r], tol, with_replacement, c, d, A, taken,
                       pool, cand, selected, R, qty, dummy, False)
            for l in range(ke):
                for j in range(p):
                    one[l, j] = 0.0
            _coef_paths(ke, selected, R, qty, beta, one)
            for l in range(k):
                if ke == 0:
                    break
                t_row = l if l < ke else ke - 1
                for j in range(p):
                    total[l, j] += one[t_row, j]
        for l in range(k):
            for j in range(p):
                total[l, j] /= reps
    return total_arr
