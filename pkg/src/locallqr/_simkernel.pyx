# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled closed-loop simulation loops.

Same contract as ``_simkernel_py``: arrays are C-contiguous float64, logs
are preallocated by the caller, and the return value is the number of
completed steps (``N`` unless the overflow guard fired).
"""

from libc.math cimport fabs
from libc.string cimport memmove, memset
from scipy.linalg.cython_blas cimport dgemv

BACKEND = "cython"


cdef double[::1] cython_zeros(Py_ssize_t size):
    import numpy as np
    return np.zeros(size, dtype=np.float64)


cdef inline void _matvec(const double[:, ::1] M, double* v, double* out, double beta) noexcept nogil:
    # out = M @ v + beta*out; M is row-major so BLAS sees its transpose
    cdef int rows = <int>M.shape[0]
    cdef int cols = <int>M.shape[1]
    cdef int one = 1
    cdef double alpha = 1.0
    cdef char trans = b'T'
    if rows == 0:
        return
    if cols == 0:
        if beta == 0.0:
            memset(out, 0, rows * sizeof(double))
        return
    dgemv(&trans, &cols, &rows, &alpha, <double*>&M[0, 0], &cols, v, &one, &beta, out, &one)


cdef inline void _shift_in(double* hist, int n, int total, double* fresh) noexcept nogil:
    cdef int i
    if total > n:
        memmove(hist + n, hist, (total - n) * sizeof(double))
    for i in range(n):
        hist[i] = fresh[i]


cdef inline double _maxabs(double* v, int n) noexcept nogil:
    cdef double m = 0.0
    cdef int i
    for i in range(n):
        if v[i] != v[i]:
            return 1e308
        if fabs(v[i]) > m:
            m = fabs(v[i])
    return m


def run_receding(const double[:, ::1] A, const double[:, ::1] B, const double[:, ::1] Rstack,
                 const double[:, ::1] Mstack, const double[:, ::1] w,
                 double[:, ::1] x_log, double[:, ::1] u_log, double[:, ::1] we_log,
                 double guard):
    cdef int n = <int>A.shape[0]
    cdef int m = <int>B.shape[1]
    cdef int N = <int>w.shape[0]
    cdef int L = <int>Mstack.shape[1]
    cdef int k, i
    cdef double[::1] hist = cython_zeros(L)
    cdef double[::1] x = cython_zeros(n)
    cdef double[::1] xn = cython_zeros(n)
    cdef double[::1] xr = cython_zeros(n)
    cdef double[::1] we = cython_zeros(n)
    cdef double[::1] u = cython_zeros(m if m > 0 else 1)
    cdef int completed = N

    with nogil:
        for k in range(N):
            for i in range(n):
                x_log[k, i] = x[i]
            if k >= 1:
                for i in range(n):
                    we[i] = x[i] - xr[i]
                    we_log[k - 1, i] = we[i]
                _shift_in(&hist[0], n, L, &we[0])
            _matvec(Mstack, &hist[0], &u[0], 0.0)
            for i in range(m):
                u_log[k, i] = u[i]
            _matvec(Rstack, &hist[0], &xr[0], 0.0)
            for i in range(n):
                xn[i] = w[k, i]
            _matvec(A, &x[0], &xn[0], 1.0)
            _matvec(B, &u[0], &xn[0], 1.0)
            for i in range(n):
                x[i] = xn[i]
            if _maxabs(&x[0], n) > guard:
                completed = k + 1
                break
        if completed == N and N > 0:
            for i in range(n):
                we_log[N - 1, i] = x[i] - xr[i]
    return completed


def run_naive(const double[:, ::1] A, const double[:, ::1] B, const double[:, ::1] Mstack,
              const double[:, ::1] w, double[:, ::1] x_log, double[:, ::1] u_log,
              double[:, ::1] we_log, double guard):
    cdef int n = <int>A.shape[0]
    cdef int m = <int>B.shape[1]
    cdef int N = <int>w.shape[0]
    cdef int L = <int>Mstack.shape[1]
    cdef int k, i
    cdef double[::1] hist = cython_zeros(L)
    cdef double[::1] x = cython_zeros(n)
    cdef double[::1] xprev = cython_zeros(n)
    cdef double[::1] xn = cython_zeros(n)
    cdef double[::1] pred = cython_zeros(n)
    cdef double[::1] we = cython_zeros(n)
    cdef double[::1] u = cython_zeros(m if m > 0 else 1)
    cdef double[::1] uprev = cython_zeros(m if m > 0 else 1)
    cdef int completed = N

    with nogil:
        for k in range(N):
            for i in range(n):
                x_log[k, i] = x[i]
            if k >= 1:
                # w_hat[k-1] = x[k] - A x[k-1] - B u[k-1]
                memset(&pred[0], 0, n * sizeof(double))
                _matvec(A, &xprev[0], &pred[0], 1.0)
                _matvec(B, &uprev[0], &pred[0], 1.0)
                for i in range(n):
                    we[i] = x[i] - pred[i]
                    we_log[k - 1, i] = we[i]
                _shift_in(&hist[0], n, L, &we[0])
            _matvec(Mstack, &hist[0], &u[0], 0.0)
            for i in range(m):
                u_log[k, i] = u[i]
            for i in range(n):
                xn[i] = w[k, i]
            _matvec(A, &x[0], &xn[0], 1.0)
            _matvec(B, &u[0], &xn[0], 1.0)
            for i in range(n):
                xprev[i] = x[i]
                x[i] = xn[i]
            for i in range(m):
                uprev[i] = u[i]
            if _maxabs(&x[0], n) > guard:
                completed = k + 1
                break
        if completed == N and N > 0:
            memset(&pred[0], 0, n * sizeof(double))
            _matvec(A, &xprev[0], &pred[0], 1.0)
            _matvec(B, &uprev[0], &pred[0], 1.0)
            for i in range(n):
                we_log[N - 1, i] = x[i] - pred[i]
    return completed

