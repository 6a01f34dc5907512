"""Numpy implementations of the Monte Carlo hot kernels.

These are the reference semantics for the compiled module; either
backend may be selected at import time (see :mod:`simo_prelog.kernels`).
All mixture-density work is done in natural log and converted by the
callers.
"""
import numpy as np
from scipy.special import logsumexp

__all__ = ["logdet_j2_batch", "gram_logdet", "mixture_log_mean_density"]

_CHUNK = 1 << 16


def logdet_j2_batch(base, a_rows, rows, ants, cols, s):
    """Batched log|det| of the s-dependent Jacobian factor.

    Parameters
    ----------
    base : (R, MQ) complex
        Constant left block of the factor.
    a_rows, rows, ants, cols :
        Scatter structure: entry (rows[j], cols[j]) of the assembled
        R x R matrix is a_rows[j] . s[ants[j]].
    s : (B, M, Q) complex
        Batch of state draws.

    Returns
    -------
    logabs : (B,) float
        log|det| in natural log; zero where the determinant is exactly 0.
    zero : (B,) bool
        Flags for exactly singular samples.
    """
    b = s.shape[0]
    size = base.shape[0]
    mats = np.zeros((b, size, size), dtype=np.complex128)
    mats[:, :, : base.shape[1]] = base
    vals = np.einsum("rq,brq->br", a_rows, s[:, ants, :])
    mats[:, rows, cols] = vals
    sign, logabs = np.linalg.slogdet(mats)
    zero = sign == 0
    return np.where(zero, 0.0, logabs), zero


def _gram(xb, a, rho):
    """I_Q + rho (XA)^H (XA) for a batch of x vectors: (K, Q, Q)."""
    weights = rho * np.abs(xb) ** 2
    return np.eye(a.shape[1]) + np.einsum("kl,lq,lp->kqp", weights, a.conj(), a)


def gram_logdet(xb, a, rho):
    """ln det(I_Q + rho (XA)^H (XA)) for each x in the batch."""
    xb = np.atleast_2d(xb)
    out = np.empty(xb.shape[0])
    for lo in range(0, xb.shape[0], _CHUNK):
        chol = np.linalg.cholesky(_gram(xb[lo : lo + _CHUNK], a, rho))
        diag = np.abs(np.diagonal(chol, axis1=1, axis2=2))
        out[lo : lo + _CHUNK] = 2.0 * np.log(diag).sum(axis=1)
    return out


def mixture_log_mean_density(y, xb, a, rho):
    """ln[(1/K) sum_k p(y | x_k)] for the stacked received block y.

    p(y|x) is the circular complex Gaussian with covariance
    I + rho (I_M kron XA)(I_M kron XA)^H, block-diagonal over antennas,
    evaluated through the Q x Q Gram matrix of XA.
    """
    m, n = y.shape
    k = xb.shape[0]
    y_power = float(np.sum(np.abs(y) ** 2))
    lp = np.empty(k)
    for lo in range(0, k, _CHUNK):
        xc = xb[lo : lo + _CHUNK]
        bmat = xc[:, :, None] * a[None, :, :]
        chol = np.linalg.cholesky(_gram(xc, a, rho))
        ldg = 2.0 * np.log(np.abs(np.diagonal(chol, axis1=1, axis2=2))).sum(axis=1)
        t = np.einsum("klq,ml->kqm", bmat.conj(), y)
        w = np.linalg.solve(chol, t)
        quad = y_power - rho * np.einsum("kqm,kqm->k", w.conj(), w).real
        lp[lo : lo + _CHUNK] = -quad - m * ldg - m * n * np.log(np.pi)
    return float(logsumexp(lp) - np.log(k))
