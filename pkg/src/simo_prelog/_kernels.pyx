# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Monte Carlo hot kernels.

Same contracts as :mod:`simo_prelog._kernels_py`: batched log-determinants
of the state-dependent Jacobian factor, Gram log-determinants, and the
Gaussian mixture log-mean-density used by the mutual-information
estimator.  Small dense factorizations (LU, Cholesky) are hand-rolled
because the matrices are tiny (Q x Q and |I| x |I|) and the loop count
is large.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, sqrt
from libc.stdlib cimport free, malloc

cnp.import_array()

ctypedef double complex zdouble

cdef double LOG_PI = 1.1447298858494002

cdef inline double cabs2(zdouble z) noexcept nogil:
    return z.real * z.real + z.imag * z.imag


cdef double _lu_logabsdet(zdouble *a, int n, int *zero_flag) noexcept nogil:
    """In-place LU with partial pivoting; log|det| from pivot magnitudes."""
    cdef int i, j, k, p
    cdef double best, cand, acc = 0.0
    cdef zdouble tmp, factor
    zero_flag[0] = 0
    for k in range(n):
        p = k
        best = cabs2(a[k * n + k])
        for i in range(k + 1, n):
            cand = cabs2(a[i * n + k])
            if cand > best:
                best = cand
                p = i
        if best == 0.0:
            zero_flag[0] = 1
            return 0.0
        if p != k:
            for j in range(n):
                tmp = a[k * n + j]
                a[k * n + j] = a[p * n + j]
                a[p * n + j] = tmp
        acc += 0.5 * log(best)
        for i in range(k + 1, n):
            factor = a[i * n + k] / a[k * n + k]
            for j in range(k + 1, n):
                a[i * n + j] = a[i * n + j] - factor * a[k * n + j]
    return acc


def logdet_j2_batch(base, a_rows, rows, ants, cols, s):
    """See the numpy reference implementation for the contract."""
    cdef const zdouble[:, ::1] base_v = np.ascontiguousarray(base, dtype=np.complex128)
    cdef const zdouble[:, ::1] arows_v = np.ascontiguousarray(a_rows, dtype=np.complex128)
    cdef const cnp.int64_t[::1] rows_v = np.ascontiguousarray(rows, dtype=np.int64)
    cdef const cnp.int64_t[::1] ants_v = np.ascontiguousarray(ants, dtype=np.int64)
    cdef const cnp.int64_t[::1] cols_v = np.ascontiguousarray(cols, dtype=np.int64)
    cdef const zdouble[:, :, ::1] s_v = np.ascontiguousarray(s, dtype=np.complex128)

    cdef Py_ssize_t nbatch = s_v.shape[0]
    cdef int size = base_v.shape[0]
    cdef int mq = base_v.shape[1]
    cdef int nd = rows_v.shape[0]
    cdef int q = arows_v.shape[1]

    out = np.empty(nbatch, dtype=np.float64)
    zero = np.zeros(nbatch, dtype=np.uint8)
    cdef double[::1] out_v = out
    cdef cnp.uint8_t[::1] zero_v = zero

    cdef zdouble *work = <zdouble *> malloc(size * size * sizeof(zdouble))
    if work is NULL:
        raise MemoryError()
    cdef Py_ssize_t b
    cdef int i, j, r, flag
    cdef zdouble acc
    try:
        with nogil:
            for b in range(nbatch):
                for i in range(size):
                    for j in range(mq):
                        work[i * size + j] = base_v[i, j]
                    for j in range(mq, size):
                        work[i * size + j] = 0
                for r in range(nd):
                    acc = 0
                    for j in range(q):
                        acc = acc + arows_v[r, j] * s_v[b, ants_v[r], j]
                    work[rows_v[r] * size + cols_v[r]] = acc
                out_v[b] = _lu_logabsdet(work, size, &flag)
                zero_v[b] = <cnp.uint8_t> flag
    finally:
        free(work)
    return out, zero.astype(bool)


cdef double _gram_cholesky(zdouble *gmat, zdouble *chol, int q) noexcept nogil:
    """Lower Cholesky of a hermitian positive definite Q x Q matrix.

    Returns ln det; the input is read from ``gmat`` and the factor
    written to ``chol`` (row-major lower triangle).
    """
    cdef int i, j, k
    cdef double diag, ld = 0.0
    cdef zdouble acc
    for j in range(q):
        diag = gmat[j * q + j].real
        for k in range(j):
            diag -= cabs2(chol[j * q + k])
        diag = sqrt(diag)
        chol[j * q + j] = diag
        ld += 2.0 * log(diag)
        for i in range(j + 1, q):
            acc = gmat[i * q + j]
            for k in range(j):
                acc = acc - chol[i * q + k] * chol[j * q + k].conjugate()
            chol[i * q + j] = acc / diag
    return ld


cdef void _build_gram(zdouble *gmat, const zdouble *x, const zdouble[:, ::1] a,
                      double rho, int n, int q) noexcept nogil:
    """gmat = I_Q + rho sum_l |x_l|^2 conj(a_l) a_l^T (the Gram matrix of XA)."""
    cdef int l, r, c
    cdef double w
    for r in range(q):
        for c in range(q):
            gmat[r * q + c] = 1.0 if r == c else 0.0
    for l in range(n):
        w = rho * cabs2(x[l])
        for r in range(q):
            for c in range(q):
                gmat[r * q + c] = gmat[r * q + c] + w * a[l, r].conjugate() * a[l, c]


def gram_logdet(xb, a, double rho):
    """ln det(I_Q + rho (XA)^H (XA)) for each x in the batch."""
    xb2 = np.atleast_2d(np.ascontiguousarray(xb, dtype=np.complex128))
    cdef const zdouble[:, ::1] xb_v = xb2
    cdef const zdouble[:, ::1] a_v = np.ascontiguousarray(a, dtype=np.complex128)
    cdef int n = a_v.shape[0]
    cdef int q = a_v.shape[1]
    cdef Py_ssize_t k = xb_v.shape[0]
    out = np.empty(k, dtype=np.float64)
    cdef double[::1] out_v = out
    cdef zdouble *gmat = <zdouble *> malloc(q * q * sizeof(zdouble))
    cdef zdouble *chol = <zdouble *> malloc(q * q * sizeof(zdouble))
    if gmat is NULL or chol is NULL:
        free(gmat)
        free(chol)
        raise MemoryError()
    cdef Py_ssize_t i
    try:
        with nogil:
            for i in range(k):
                _build_gram(gmat, &xb_v[i, 0], a_v, rho, n, q)
                out_v[i] = _gram_cholesky(gmat, chol, q)
    finally:
        free(gmat)
        free(chol)
    return out


def mixture_log_mean_density(y, xb, a, rho_in):
    """ln[(1/K) sum_k p(y | x_k)]; see the numpy reference for the contract."""
    cdef const zdouble[:, ::1] y_v = np.ascontiguousarray(y, dtype=np.complex128)
    cdef const zdouble[:, ::1] xb_v = np.ascontiguousarray(xb, dtype=np.complex128)
    cdef const zdouble[:, ::1] a_v = np.ascontiguousarray(a, dtype=np.complex128)
    cdef double rho = rho_in
    cdef int m = y_v.shape[0]
    cdef int n = y_v.shape[1]
    cdef int q = a_v.shape[1]
    cdef Py_ssize_t nmix = xb_v.shape[0]

    cdef zdouble *gmat = <zdouble *> malloc(q * q * sizeof(zdouble))
    cdef zdouble *chol = <zdouble *> malloc(q * q * sizeof(zdouble))
    cdef zdouble *tvec = <zdouble *> malloc(q * sizeof(zdouble))
    if gmat is NULL or chol is NULL or tvec is NULL:
        free(gmat)
        free(chol)
        free(tvec)
        raise MemoryError()

    cdef double y_power = 0.0
    cdef int i, j, l, mm
    for mm in range(m):
        for l in range(n):
            y_power += cabs2(y_v[mm, l])

    # streaming log-sum-exp over the mixture components
    cdef double running_max = -1e308
    cdef double running_sum = 0.0
    cdef double ldg, quad, lp
    cdef zdouble acc
    cdef Py_ssize_t k
    try:
        with nogil:
            for k in range(nmix):
                _build_gram(gmat, &xb_v[k, 0], a_v, rho, n, q)
                ldg = _gram_cholesky(gmat, chol, q)
                quad = y_power
                for mm in range(m):
                    # t = (XA)^H y_m, then forward-solve L w = t and
                    # subtract rho ||w||^2 (= rho t^H G^-1 t)
                    for j in range(q):
                        acc = 0
                        for l in range(n):
                            acc = acc + (xb_v[k, l] * a_v[l, j]).conjugate() * y_v[mm, l]
                        tvec[j] = acc
                    for j in range(q):
                        acc = tvec[j]
                        for i in range(j):
                            acc = acc - chol[j * q + i] * tvec[i]
                        tvec[j] = acc / chol[j * q + j]
                        quad -= rho * cabs2(tvec[j])
                lp = -quad - m * ldg - m * n * LOG_PI
                if lp > running_max:
                    running_sum = running_sum * exp(running_max - lp) + 1.0
                    running_max = lp
                else:
                    running_sum += exp(lp - running_max)
    finally:
        free(gmat)
        free(chol)
        free(tvec)
    return running_max + log(running_sum) - log(<double> nmix)
