"""Pre-log formulas, pilot and row-selection planning, and matrix spark checks.

The capacity pre-log of the N-block, rank-Q, M-antenna channel is

    chi = min(1 - 1/N, M(1 - Q/N)),

computed here in exact rational arithmetic.  The index plan fixes the
pilot count alpha, the pilot/data time split, and a selection of
MQ + N - alpha output rows that makes the blind-recovery system square.
The spark checks verify that every Q rows of a covariance factor are
linearly independent (the condition under which the pre-log formula is
achieved), either on all rows or on a prescribed-size row subset.
"""
import itertools
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional

import numpy as np

from .seeding import substream

__all__ = [
    "Regime",
    "PrelogReport",
    "IndexPlan",
    "PropertyAReport",
    "PropertyAPrimeReport",
    "SubsetBudgetError",
    "prelog",
    "critical_antennas",
    "build_index_plan",
    "check_property_a",
    "check_property_a_prime",
]

RANK_TOL = 1e-10
EXHAUSTIVE_SUBSET_LIMIT = 10**7
PRIME_EXHAUSTIVE_LIMIT = 10**6
PRIME_RANDOM_BUDGET = 10**4


class Regime(Enum):
    """Which term of the pre-log min-formula binds."""

    ANTENNA_LIMITED = "antenna_limited"
    BLOCK_LIMITED = "block_limited"


@dataclass(frozen=True)
class PrelogReport:
    prelog: Fraction
    critical_m: Optional[int]
    regime: Regime


@dataclass(frozen=True)
class IndexPlan:
    """Pilot/data split and output-row selection for one channel configuration.

    All indices are 0-based.  ``pilot_set`` and ``data_set`` partition the
    time slots [0, N).  ``row_sets[r]`` holds the selected rows of antenna
    r as indices into the stacked length-M*N output, and ``selected`` is
    their sorted union, of size min(MQ + N - 1, M*N) = MQ + N - alpha.
    """

    cfg: "ChannelConfig"
    alpha: int
    shortened: int
    pilot_set: np.ndarray
    data_set: np.ndarray
    row_sets: tuple
    selected: np.ndarray

    @property
    def block_len(self):
        return self.cfg.block_len

    def kept_times(self, antenna):
        """Time slots of ``antenna`` whose output rows are selected."""
        n = self.cfg.block_len
        return self.row_sets[antenna] - antenna * n


@dataclass(frozen=True)
class PropertyAReport:
    holds: bool
    failing_rows: Optional[tuple]


@dataclass(frozen=True)
class PropertyAPrimeReport:
    """Result of the row-subset spark search.

    ``holds`` with a ``witness_set`` means a good subset was found.  When
    ``holds`` is False, ``exhaustive`` distinguishes a definitive failure
    (every subset enumerated) from "not found within the random-search
    budget".
    """

    holds: bool
    witness_set: Optional[tuple]
    exhaustive: bool


class SubsetBudgetError(ValueError):
    """Raised when a subset enumeration would exceed the configured budget."""


def prelog(cfg):
    """Exact capacity pre-log min(1 - 1/N, M(1 - Q/N)) with regime report."""
    n, q, m = cfg.block_len, cfg.cov_rank, cfg.num_rx
    block_term = 1 - Fraction(1, n)
    antenna_term = m * (1 - Fraction(q, n))
    crit = critical_antennas(n, q) if q < n else None
    regime = Regime.BLOCK_LIMITED if crit is not None and m >= crit else Regime.ANTENNA_LIMITED
    return PrelogReport(min(block_term, antenna_term), crit, regime)


def critical_antennas(n, q):
    """Smallest antenna count at which the pre-log saturates at 1 - 1/N."""
    if q >= n:
        raise ValueError(f"critical antenna count needs q < n, got q={q}, n={n}")
    return -((n - 1) // -(n - q))


def _staircase_drops(n, q, m, alpha, ell):
    """Number of trailing data slots dropped per antenna.

    ``ell`` rows must be removed to reach |I| = MQ + N - 1.  Removals
    walk the data slots from the last one downward and, within each
    slot, over antennas 0..M-2, so no slot is ever dropped from every
    antenna and each antenna keeps at least Q rows and all pilots.
    """
    drops = [0] * m
    remaining = ell
    while remaining > 0:
        take = min(m - 1, remaining)
        for i in range(take):
            drops[i] += 1
        remaining -= take
    if any(d > n - max(q, alpha) for d in drops):
        raise AssertionError("staircase drop pattern exceeded per-antenna budget")
    return drops


def build_index_plan(cfg):
    """Pilot count, shortened-antenna count, and square-system row selection.

    alpha = max(1, MQ + N - MN) pilots occupy the first time slots.  When
    MN exceeds MQ + N - 1, the L = M(N-Q) - (N-1) surplus rows are dropped
    from the tails of the antenna blocks in the staircase pattern of
    :func:`_staircase_drops`; for L < M this shortens antennas 0..L-1 by
    exactly their last row.
    """
    n, q, m = cfg.block_len, cfg.cov_rank, cfg.num_rx
    alpha = max(1, m * q + n - m * n)
    ell = m * (n - q) - (n - 1) if m * n > m * q + n - 1 else 0
    drops = _staircase_drops(n, q, m, alpha, ell)
    row_sets = tuple(np.arange(r * n, (r + 1) * n - drops[r]) for r in range(m))
    selected = np.concatenate(row_sets)
    selected.sort()
    size = min(m * q + n - 1, m * n)
    if selected.size != size or size != m * q + n - alpha:
        raise AssertionError("row selection size disagrees with the square-system identity")
    return IndexPlan(
        cfg=cfg,
        alpha=alpha,
        shortened=ell,
        pilot_set=np.arange(alpha),
        data_set=np.arange(alpha, n),
        row_sets=row_sets,
        selected=selected,
    )


def _min_max_singular(batch):
    sv = np.linalg.svd(batch, compute_uv=False)
    return sv[..., -1], sv[..., 0]


def check_property_a(factor, tol=RANK_TOL):
    """Test whether every Q rows of the factor are linearly independent.

    Subsets are scanned in lexicographic order and the first failing one
    is reported.  Enumerations beyond 10^7 subsets are refused outright
    rather than silently sampled.
    """
    if not 0 < tol < 1e-3:
        raise ValueError(f"tol must lie in (0, 1e-3), got {tol}")
    a = factor.a
    n, q = a.shape
    total = math.comb(n, q)
    if total > EXHAUSTIVE_SUBSET_LIMIT:
        raise SubsetBudgetError(
            f"C({n},{q}) = {total} row subsets exceed the enumeration limit {EXHAUSTIVE_SUBSET_LIMIT}"
        )
    chunk = 4096
    combos = itertools.combinations(range(n), q)
    while True:
        block = list(itertools.islice(combos, chunk))
        if not block:
            return PropertyAReport(True, None)
        idx = np.asarray(block)
        smin, smax = _min_max_singular(a[idx, :])
        bad = np.nonzero(smin <= tol * smax)[0]
        if bad.size:
            return PropertyAReport(False, tuple(int(i) for i in block[bad[0]]))


def check_property_a_prime(factor, cfg, seed=0, budget=PRIME_RANDOM_BUDGET, tol=RANK_TOL):
    """Search for a row subset K of size min(ceil((MQ-1)/(M-1)), N) on which
    every Q rows are independent.

    The search is exhaustive in lexicographic order when C(N, |K|) <= 10^6
    and otherwise draws ``budget`` random subsets from a seeded stream.
    """
    n, q, m = cfg.block_len, cfg.cov_rank, cfg.num_rx
    if m < 2:
        raise ValueError("the subset cardinality formula needs at least 2 receive antennas")
    if factor.block_len != n or factor.cov_rank != q:
        raise ValueError("factor dimensions disagree with the channel configuration")
    k_size = min(-((m * q - 1) // -(m - 1)), n)

    def subset_ok(rows):
        sub = CovarianceView(factor.a[list(rows), :])
        return check_property_a(sub, tol=tol).holds

    if math.comb(n, k_size) <= PRIME_EXHAUSTIVE_LIMIT:
        for rows in itertools.combinations(range(n), k_size):
            if subset_ok(rows):
                return PropertyAPrimeReport(True, rows, True)
        return PropertyAPrimeReport(False, None, True)

    rng = substream(seed, "subset-search")
    for _ in range(budget):
        rows = tuple(sorted(rng.choice(n, size=k_size, replace=False).tolist()))
        if subset_ok(rows):
            return PropertyAPrimeReport(True, rows, False)
    return PropertyAPrimeReport(False, None, False)


class CovarianceView:
    """Duck-typed row-subset view accepted by :func:`check_property_a`."""

    def __init__(self, a):
        self.a = np.asarray(a, dtype=np.complex128)

    @property
    def block_len(self):
        return self.a.shape[0]

    @property
    def cov_rank(self):
        return self.a.shape[1]
