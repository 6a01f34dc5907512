"""Correlated block-fading SIMO channel model.

Within a block of length N the channel seen at receive antenna m is
``h_m = A s_m`` with ``A`` an N x Q factor of the rank-Q block
covariance (unit-norm rows, so per-symbol channel power is one) and
``s_m`` i.i.d. standard complex Gaussian.  The stacked received block is

    y = sqrt(snr) * (I_M kron X A) s + w,      X = diag(x),

with ``w`` standard complex Gaussian noise.  This module constructs
covariance factors, simulates the channel, and serializes matrices and
vectors to JSON.
"""
import json
from dataclasses import dataclass

import numpy as np

from .seeding import complex_normal, substream

__all__ = [
    "ChannelConfig",
    "CovarianceFactor",
    "ChannelState",
    "TxBlock",
    "RxBlock",
    "make_dft_covariance",
    "make_random_covariance",
    "sample_channel_state",
    "sample_input_iid_gaussian",
    "expand_channel",
    "noiseless_output",
    "channel_apply",
    "save_covariance",
    "load_covariance",
    "save_vector",
    "load_vector",
]

ROW_NORM_TOL = 1e-9
RANK_TOL = 1e-10


@dataclass(frozen=True)
class ChannelConfig:
    """Channel dimensions: block length N, covariance rank Q, receive antennas M."""

    block_len: int
    cov_rank: int
    num_rx: int

    def __post_init__(self):
        n, q, m = self.block_len, self.cov_rank, self.num_rx
        if n < 2:
            raise ValueError(f"block_len must be >= 2, got {n}")
        if not 1 <= q <= n:
            raise ValueError(f"cov_rank must be in [1, block_len], got {q}")
        if m < 1:
            raise ValueError(f"num_rx must be >= 1, got {m}")


def _as_complex_array(values, ndim, name):
    arr = np.asarray(values, dtype=np.complex128)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class CovarianceFactor:
    """N x Q factor A of the block covariance AA^H, with unit-norm rows and full column rank."""

    a: np.ndarray

    def __post_init__(self):
        a = _as_complex_array(self.a, 2, "a")
        n, q = a.shape
        if q > n:
            raise ValueError(f"factor must be tall or square, got shape {a.shape}")
        norms = np.linalg.norm(a, axis=1)
        if np.max(np.abs(norms - 1.0)) > ROW_NORM_TOL:
            raise ValueError("every row of a covariance factor must have unit norm")
        sv = np.linalg.svd(a, compute_uv=False)
        if sv[-1] <= RANK_TOL * sv[0]:
            raise ValueError("covariance factor must have full column rank")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @property
    def block_len(self):
        return self.a.shape[0]

    @property
    def cov_rank(self):
        return self.a.shape[1]


@dataclass(frozen=True)
class ChannelState:
    """Whitened fading coefficients, stacked per antenna: s has length M*Q."""

    s: np.ndarray

    def __post_init__(self):
        s = _as_complex_array(self.s, 1, "s")
        s.setflags(write=False)
        object.__setattr__(self, "s", s)


@dataclass(frozen=True)
class TxBlock:
    """One block of N transmit symbols."""

    x: np.ndarray

    def __post_init__(self):
        x = _as_complex_array(self.x, 1, "x")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)


@dataclass(frozen=True)
class RxBlock:
    """Stacked received block (length M*N) together with the linear snr it was produced at."""

    y: np.ndarray
    snr: float

    def __post_init__(self):
        y = _as_complex_array(self.y, 1, "y")
        if not self.snr > 0:
            raise ValueError(f"snr must be positive, got {self.snr}")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)


def make_dft_covariance(n, keep_cols):
    """Covariance factor from Q columns of the N-point DFT matrix.

    Entry (l, k) is exp(2*pi*1j*l*c_k/n)/sqrt(Q) for the k-th kept
    column c_k, so rows are exactly unit-norm.  When n is prime, every
    square row subset is an invertible Vandermonde-type minor, hence
    every Q rows are linearly independent.
    """
    cols = sorted(keep_cols)
    if len(cols) == 0:
        raise ValueError("keep_cols must not be empty")
    if len(set(cols)) != len(cols):
        raise ValueError("keep_cols must not contain duplicates")
    if cols[0] < 0 or cols[-1] >= n:
        raise ValueError(f"keep_cols must lie in [0, {n - 1}]")
    l = np.arange(n)[:, None]
    c = np.asarray(cols)[None, :]
    a = np.exp(2j * np.pi * l * c / n) / np.sqrt(len(cols))
    return CovarianceFactor(a)


def make_random_covariance(n, q, seed):
    """Generic covariance factor: i.i.d. complex Gaussian entries, rows scaled to unit norm.

    Row scaling preserves linear independence of any row subset, so the
    full-spark property of the unnormalized draw survives (almost surely).
    """
    if not 1 <= q <= n:
        raise ValueError(f"need 1 <= q <= n, got q={q}, n={n}")
    rng = substream(seed, "covariance")
    a = complex_normal(rng, n, q)
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    return CovarianceFactor(a)


def sample_channel_state(cfg, seed):
    """Draw s ~ CN(0, I_{MQ})."""
    rng = substream(seed, "state")
    return ChannelState(complex_normal(rng, cfg.num_rx * cfg.cov_rank))


def sample_input_iid_gaussian(n, seed):
    """Draw one transmit block with i.i.d. CN(0,1) symbols (unit average power per symbol)."""
    if n < 1:
        raise ValueError(f"block length must be >= 1, got {n}")
    rng = substream(seed, "input")
    return TxBlock(complex_normal(rng, n))


def _split_state(a, state):
    q = a.cov_rank
    s = state.s
    if s.size % q != 0:
        raise ValueError(f"state length {s.size} is not a multiple of cov_rank {q}")
    return s.reshape(-1, q)


def expand_channel(a, state):
    """Per-antenna channel vectors (I_M kron A) s, stacked to length M*N."""
    s_rows = _split_state(a, state)
    return (s_rows @ a.a.T).reshape(-1)


def noiseless_output(a, state, x):
    """Noise-free rescaled observation (I_M kron X A) s.

    The entry at antenna m, time l is x_l * (row l of A) . s_m.
    """
    xv = x.x if isinstance(x, TxBlock) else np.asarray(x, dtype=np.complex128)
    if xv.size != a.block_len:
        raise ValueError(f"x has length {xv.size}, expected {a.block_len}")
    s_rows = _split_state(a, state)
    return (xv[None, :] * (s_rows @ a.a.T)).reshape(-1)


def channel_apply(a, state, x, snr, noise):
    """Apply the channel: y = sqrt(snr) * (I_M kron X A) s + w.

    ``noise`` is either an explicit complex vector of length M*N (for
    deterministic tests) or an integer seed from which w ~ CN(0, I) is
    drawn.
    """
    if not snr > 0:
        raise ValueError(f"snr must be positive, got {snr}")
    clean = noiseless_output(a, state, x)
    if isinstance(noise, (int, np.integer)):
        w = complex_normal(substream(noise, "noise"), clean.size)
    else:
        w = np.asarray(noise, dtype=np.complex128)
        if w.shape != clean.shape:
            raise ValueError(f"noise has shape {w.shape}, expected {clean.shape}")
    return RxBlock(np.sqrt(snr) * clean + w, float(snr))


def save_covariance(path, factor):
    """Write a covariance factor as JSON: {"n", "q", "re", "im"}."""
    a = factor.a
    doc = {
        "n": factor.block_len,
        "q": factor.cov_rank,
        "re": a.real.tolist(),
        "im": a.imag.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_covariance(path):
    """Read a covariance factor written by :func:`save_covariance`."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    a = np.asarray(doc["re"], dtype=float) + 1j * np.asarray(doc["im"], dtype=float)
    if a.shape != (doc["n"], doc["q"]):
        raise ValueError(f"matrix shape {a.shape} disagrees with header ({doc['n']}, {doc['q']})")
    return CovarianceFactor(a)


def save_vector(path, v):
    """Write a complex vector as JSON: {"re", "im"}."""
    v = np.asarray(v, dtype=np.complex128)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"re": v.real.tolist(), "im": v.imag.tolist()}, fh)
        fh.write("\n")


def load_vector(path):
    """Read a complex vector written by :func:`save_vector`."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return np.asarray(doc["re"], dtype=float) + 1j * np.asarray(doc["im"], dtype=float)
