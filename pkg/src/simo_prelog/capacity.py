"""Mutual-information rate estimation and pre-log slope fitting.

For i.i.d. Gaussian inputs the conditional output distribution given x
is complex Gaussian with covariance I + rho (I_M kron XA)(I_M kron XA)^H,
so h(y|x) has the closed form

    h(y|x) = M*N*log2(pi*e) + M*E_x[log2 det(I_Q + rho A^H X^H X A)]

and only the output entropy h(y) needs a density estimate.  The mutual
information rate I(x;y)/N is estimated by Monte Carlo: outer draws of
(x, s, w) give y-samples, and for each one the marginal density p(y) is
approximated by a fresh-x mixture (1/inner) sum_k p(y|x_k).  The slope
of the rate against log2(rho) estimates the capacity pre-log.

All rates are in bits; SNR enters in dB and is converted internally to
rho = 10^(dB/10).
"""
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .seeding import complex_normal, substream

__all__ = [
    "MiEstimate",
    "SlopeFit",
    "ResourceBudgetError",
    "DEFAULT_MAX_EVALS",
    "snr_db_to_linear",
    "cond_entropy_rate_mc",
    "upper_bound_rate",
    "mi_rate_mc",
    "prelog_slope_fit",
]

MC_CHUNK = 8192
DEFAULT_MAX_EVALS = 10**9
LN2 = math.log(2.0)


class ResourceBudgetError(RuntimeError):
    """Raised when a requested Monte Carlo run exceeds the evaluation budget."""


@dataclass(frozen=True)
class MiEstimate:
    """One Monte Carlo mutual-information point, in bits per channel use."""

    snr_db: float
    mi_bits_per_cu: float
    std_err: float
    outer: int
    inner: int
    seed: int

    def __post_init__(self):
        if self.outer < 1 or self.inner < 1:
            raise ValueError("outer and inner sample counts must be >= 1")
        if not self.std_err >= 0:
            raise ValueError(f"std_err must be nonnegative, got {self.std_err}")


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares line through rate-vs-log2(rho) points."""

    slope: float
    intercept: float
    r_squared: float
    window_db: tuple

    def __post_init__(self):
        object.__setattr__(self, "window_db", tuple(float(v) for v in self.window_db))
        if len(self.window_db) != 2:
            raise ValueError("window_db must be a (low, high) pair")


def snr_db_to_linear(snr_db):
    """rho = 10^(dB/10); rejects non-finite inputs."""
    snr_db = float(snr_db)
    if not math.isfinite(snr_db):
        raise ValueError(f"snr_db must be finite, got {snr_db}")
    return 10.0 ** (snr_db / 10.0)


def _check_pair(factor, cfg):
    if factor.block_len != cfg.block_len or factor.cov_rank != cfg.cov_rank:
        raise ValueError(
            f"covariance factor is {factor.block_len}x{factor.cov_rank}, "
            f"config wants {cfg.block_len}x{cfg.cov_rank}"
        )


def cond_entropy_rate_mc(factor, cfg, snr_db, trials, seed, workers=1):
    """Monte Carlo estimate of h(y|x) in bits for i.i.d. Gaussian inputs.

    Averages the closed-form Gaussian conditional entropy over x-draws.
    Input draws do not depend on the antenna count, so for a fixed seed
    the value minus M*N*log2(pi*e) is exactly linear in M.  Per-chunk
    keyed streams with an in-order reduction keep the result identical
    for any worker count.
    """
    _check_pair(factor, cfg)
    if trials < 10**2:
        raise ValueError(f"need at least 100 trials, got {trials}")
    rho = snr_db_to_linear(snr_db)
    n, m = cfg.block_len, cfg.num_rx
    n_chunks = -(-trials // MC_CHUNK)

    def chunk_values(idx):
        lo = idx * MC_CHUNK
        hi = min(lo + MC_CHUNK, trials)
        rng = substream(seed, "cond-entropy", idx)
        x = complex_normal(rng, hi - lo, n)
        return kernels.gram_logdet(x, factor.a, rho)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(chunk_values, range(n_chunks)))
    else:
        parts = [chunk_values(i) for i in range(n_chunks)]

    mean_logdet = float(np.concatenate(parts).mean())
    return m * n * math.log2(math.pi * math.e) + m * mean_logdet / LN2


def upper_bound_rate(factor, cfg, snr_db):
    """Slope-faithful upper-bound curve M(1-Q/N) log2(rho) + (Q/N) log2(log2(rho)).

    The additive constant is set to zero: only the growth rate of the
    curve is meaningful, not its level.  Requires rho > e so the
    double-log term is positive.
    """
    _check_pair(factor, cfg)
    rho = snr_db_to_linear(snr_db)
    if rho <= math.e:
        raise ValueError(f"snr must exceed e in linear scale, got rho={rho}")
    n, q, m = cfg.block_len, cfg.cov_rank, cfg.num_rx
    log2_rho = math.log2(rho)
    return m * (1.0 - q / n) * log2_rho + (q / n) * math.log2(log2_rho)


def mi_rate_mc(factor, cfg, snr_db, outer, inner, seed, workers=1, max_evals=DEFAULT_MAX_EVALS):
    """Monte Carlo mutual-information rate I(x;y)/N in bits per channel use.

    Each outer trial j draws (x_j, s_j, w_j) and ``inner`` fresh mixture
    inputs from the keyed stream (seed, "mi", j), forms the received
    block y_j, and scores

        i_j = [-ln (1/inner) sum_k p(y_j | x_k) - h(y_j | x_j)] / (N ln 2)

    with h(y|x) the exact Gaussian conditional entropy evaluated at the
    same x_j (a paired estimator, which cancels the x-variance of the
    conditional term).  The estimate is the mean of i_j and std_err the
    outer-sample standard error.  The finite mixture makes the density
    estimate an upper bound on p(y) on average, so the estimate is
    biased low in h(y) terms and the bias shrinks as inner grows.

    Results are reproducible for fixed (seed, outer, inner) regardless
    of worker count.
    """
    _check_pair(factor, cfg)
    if outer < 100:
        raise ValueError(f"need outer >= 100, got {outer}")
    if inner < 1000:
        raise ValueError(f"need inner >= 1000, got {inner}")
    if outer * inner > max_evals:
        raise ResourceBudgetError(
            f"outer*inner = {outer * inner} exceeds the evaluation budget {max_evals}"
        )
    rho = snr_db_to_linear(snr_db)
    n, q, m = cfg.block_len, cfg.cov_rank, cfg.num_rx
    a = factor.a
    sqrt_rho = math.sqrt(rho)
    h_base = m * n * math.log(math.pi * math.e)

    def one_trial(j):
        rng = substream(seed, "mi", j)
        x = complex_normal(rng, n)
        s = complex_normal(rng, m, q)
        w = complex_normal(rng, m, n)
        xb = complex_normal(rng, inner, n)
        y = sqrt_rho * x[None, :] * (s @ a.T) + w
        ln_mix = kernels.mixture_log_mean_density(y, xb, a, rho)
        h_cond = h_base + m * float(kernels.gram_logdet(x, a, rho)[0])
        return (-ln_mix - h_cond) / (n * LN2)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = np.fromiter(pool.map(one_trial, range(outer)), dtype=float, count=outer)
    else:
        scores = np.fromiter((one_trial(j) for j in range(outer)), dtype=float, count=outer)

    mi = float(scores.mean())
    std_err = float(scores.std(ddof=1) / math.sqrt(outer))
    return MiEstimate(
        snr_db=float(snr_db),
        mi_bits_per_cu=mi,
        std_err=std_err,
        outer=outer,
        inner=inner,
        seed=seed,
    )


def prelog_slope_fit(points):
    """Ordinary least squares of rate against log2(rho) over >= 3 points.

    The slope is the empirical pre-log: bits per channel use gained per
    bit of log2(rho).
    """
    if len(points) < 3:
        raise ValueError(f"need at least 3 points, got {len(points)}")
    snr_db = np.asarray([p.snr_db for p in points], dtype=float)
    if np.unique(snr_db).size != snr_db.size:
        raise ValueError("snr_db values must be distinct")
    log2_rho = snr_db * (math.log2(10.0) / 10.0)
    rate = np.asarray([p.mi_bits_per_cu for p in points], dtype=float)

    xc = log2_rho - log2_rho.mean()
    slope = float(xc @ (rate - rate.mean()) / (xc @ xc))
    intercept = float(rate.mean() - slope * log2_rho.mean())
    resid = rate - (slope * log2_rho + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(((rate - rate.mean()) ** 2).sum())
    if ss_tot > 0.0:
        r_squared = 1.0 - ss_res / ss_tot
    else:
        r_squared = 1.0 if ss_res <= 1e-30 else 0.0
    return SlopeFit(
        slope=slope,
        intercept=intercept,
        r_squared=r_squared,
        window_db=(float(snr_db.min()), float(snr_db.max())),
    )
