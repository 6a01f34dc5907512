"""The square change-of-variables map behind blind identifiability and its Jacobian.

With pilots fixed, the selected noise-free outputs are a map

    g(c, x_data) = P (I_M kron X A) c,    restricted to the selected rows,

from the MQ fading coefficients and N - alpha data symbols to the
|I| = MQ + N - alpha selected outputs.  Its holomorphic Jacobian
factorizes as J = J1 J2 J3 where J1 carries the selected x entries on
its diagonal, J3 absorbs the inverse data symbols, and the middle
factor J2 depends on c alone.  A nonvanishing det J2 is what makes the
map one-to-one almost everywhere; this module assembles the factors,
builds an explicit witness c with det J2(c) != 0 from a per-antenna
orthogonality construction, and probes E[log|det J2(s)|] > -inf by
Monte Carlo.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .seeding import complex_normal, substream
from .structure import check_property_a

__all__ = [
    "JacobianFactors",
    "WitnessSets",
    "WitnessCheck",
    "LogDetProbe",
    "SparkViolationError",
    "WitnessDrawError",
    "map_g",
    "a_vectors",
    "jacobian_factors",
    "det_j2_homogeneity_degree",
    "witness_sets",
    "verify_witness_factorization",
    "mc_expected_log_abs_det_j2",
]

PIVOT_TOL = 1e-10
MAX_WITNESS_DRAWS = 100
MC_CHUNK = 8192


class SparkViolationError(ValueError):
    """The covariance factor has Q dependent rows, so no witness exists."""


class WitnessDrawError(RuntimeError):
    """No admissible witness draw found within the retry budget."""


@dataclass(frozen=True)
class JacobianFactors:
    """The assembled Jacobian and its three square factors (all |I| x |I|)."""

    j1: np.ndarray
    j2: np.ndarray
    j3: np.ndarray
    j_full: np.ndarray


@dataclass(frozen=True)
class WitnessSets:
    """Per-antenna index sets and the stacked witness vector c.

    ``k_sets[i]`` holds the data times whose rows of A the i-th witness
    block is orthogonal to; ``k_complements[i]`` holds the data times
    owned by antenna i, and together the complements partition the data
    set so each data column of J2 keeps exactly one nonzero entry.
    """

    k_sets: tuple
    k_complements: tuple
    c: np.ndarray


@dataclass(frozen=True)
class WitnessCheck:
    """Both sides of |det J2(c)| = const_c * prod_i |det A_{pilots U K_i}|."""

    lhs: float
    rhs: float
    const_c: float


@dataclass(frozen=True)
class LogDetProbe:
    """Running means of log|det J2(s)| (natural log) at checkpoint trial counts."""

    checkpoints: np.ndarray
    running_mean: np.ndarray
    zero_count: int


def _check_dims(factor, plan):
    cfg = plan.cfg
    if factor.block_len != cfg.block_len or factor.cov_rank != cfg.cov_rank:
        raise ValueError("covariance factor dimensions disagree with the plan's configuration")


def _assemble_x(plan, x_pilot, x_data):
    x_pilot = np.asarray(x_pilot, dtype=np.complex128)
    x_data = np.asarray(x_data, dtype=np.complex128)
    n, alpha = plan.cfg.block_len, plan.alpha
    if x_pilot.size != alpha:
        raise ValueError(f"x_pilot has length {x_pilot.size}, expected {alpha}")
    if x_data.size != n - alpha:
        raise ValueError(f"x_data has length {x_data.size}, expected {n - alpha}")
    return np.concatenate([x_pilot, x_data])


def map_g(factor, plan, x_pilot, c, x_data):
    """Selected rows of (I_M kron X A) c for x = (x_pilot, x_data)."""
    _check_dims(factor, plan)
    x = _assemble_x(plan, x_pilot, x_data)
    c = np.asarray(c, dtype=np.complex128)
    q, m = factor.cov_rank, plan.cfg.num_rx
    if c.size != m * q:
        raise ValueError(f"c has length {c.size}, expected {m * q}")
    full = (x[None, :] * (c.reshape(m, q) @ factor.a.T)).reshape(-1)
    return full[plan.selected]


def a_vectors(factor, c):
    """The N stacked vectors a_i with (a_i)_{mN+i} = (row i of A) . c_m, zero elsewhere.

    They decompose the output linearly in x: (I_M kron X A) c = sum_i x_i a_i.
    """
    c = np.asarray(c, dtype=np.complex128)
    n, q = factor.block_len, factor.cov_rank
    if c.size % q != 0:
        raise ValueError(f"c has length {c.size}, not a multiple of cov_rank {q}")
    m = c.size // q
    inner = c.reshape(m, q) @ factor.a.T
    out = []
    for i in range(n):
        v = np.zeros(m * n, dtype=np.complex128)
        v[i::n] = inner[:, i]
        out.append(v)
    return out


def jacobian_factors(factor, plan, x, c):
    """Assemble J = P[I_M kron XA | a_i for data i] and its factors J1, J2, J3.

    J1 = P (I_M kron X) P^T, J2 = P[I_M kron A | a_i for data i],
    J3 = diag(I_MQ, diag(x_data)^(-1)).  J2 does not depend on x.
    """
    _check_dims(factor, plan)
    from .model import TxBlock

    xv = x.x if isinstance(x, TxBlock) else np.asarray(x, dtype=np.complex128)
    n, q, m = factor.block_len, factor.cov_rank, plan.cfg.num_rx
    if xv.size != n:
        raise ValueError(f"x has length {xv.size}, expected {n}")
    if np.any(xv == 0):
        raise ArithmeticError("all transmit symbols must be nonzero to invert the data diagonal")
    c = np.asarray(c, dtype=np.complex128)
    sel = plan.selected
    times = sel % n
    size = sel.size

    base = np.kron(np.eye(m), factor.a)[sel, :]
    avecs = a_vectors(factor, c)
    a_block = np.stack([avecs[i][sel] for i in plan.data_set], axis=1) if plan.data_set.size else np.zeros((size, 0), dtype=np.complex128)

    j1 = np.diag(xv[times])
    j2 = np.concatenate([base, a_block], axis=1)
    j3 = np.diag(np.concatenate([np.ones(m * q), 1.0 / xv[plan.data_set]]).astype(np.complex128))
    j_full = np.concatenate([xv[times][:, None] * base, a_block], axis=1)
    return JacobianFactors(j1=j1, j2=j2, j3=j3, j_full=j_full)


def det_j2_homogeneity_degree(plan):
    """Degree of det J2 as a homogeneous polynomial in c: one linear a-column per data time."""
    return int(plan.data_set.size)


def _witness_partition(plan):
    """Assign each data time to exactly one antenna that keeps it.

    Antenna i can own cap_i = |kept rows| - Q times.  Times are assigned
    in ascending order to the eligible antenna whose kept range ends
    soonest (ties to the lowest index), which always succeeds for the
    staircase row selection.
    """
    cfg = plan.cfg
    n, q, m = cfg.block_len, cfg.cov_rank, cfg.num_rx
    kept = [plan.kept_times(i) for i in range(m)]
    reach = [int(k[-1]) for k in kept]
    cap = [k.size - q for k in kept]
    owner = {}
    for t in plan.data_set:
        t = int(t)
        eligible = [i for i in range(m) if cap[i] > 0 and t <= reach[i]]
        if not eligible:
            raise AssertionError("data time left unassigned in the witness partition")
        i = min(eligible, key=lambda i: (reach[i], i))
        owner[t] = i
        cap[i] -= 1
    return owner, kept


def witness_sets(factor, plan, seed):
    """Construct c with det J2(c) != 0 via per-antenna orthogonality.

    For each antenna i, the block c_i is drawn in the orthogonal
    complement (under the bilinear pairing b^T c) of the rows indexed by
    K_i, leaving exactly one nonzero entry per data column of J2, at a
    row owned by a unique antenna.  Requires every Q rows of the factor
    to be independent.
    """
    _check_dims(factor, plan)
    report = check_property_a(factor)
    if not report.holds:
        raise SparkViolationError(
            f"rows {report.failing_rows} are linearly dependent; witness construction needs every "
            f"{factor.cov_rank} rows independent"
        )
    cfg = plan.cfg
    q, m = cfg.cov_rank, cfg.num_rx
    owner, kept = _witness_partition(plan)
    alpha = plan.alpha

    k_sets = []
    k_complements = []
    blocks = []
    rng = substream(seed, "witness")
    for i in range(m):
        own = tuple(t for t, o in owner.items() if o == i)
        ki = tuple(int(t) for t in kept[i] if t >= alpha and t not in own)
        if len(ki) != q - alpha:
            raise AssertionError("witness set size disagrees with the cardinality formula")
        if ki:
            rows = factor.a[list(ki), :]
            _, _, vh = np.linalg.svd(rows)
            basis = vh[len(ki):].conj().T
        else:
            basis = np.eye(q, dtype=np.complex128)
        for _ in range(MAX_WITNESS_DRAWS):
            ci = basis @ complex_normal(rng, basis.shape[1])
            norm = np.linalg.norm(ci)
            if norm < PIVOT_TOL:
                continue
            ci = ci / norm
            pivots = np.abs(factor.a[list(own), :] @ ci) if own else np.array([])
            if pivots.size == 0 or pivots.min() > PIVOT_TOL:
                break
        else:
            raise WitnessDrawError(
                f"no admissible draw for antenna {i} within {MAX_WITNESS_DRAWS} attempts"
            )
        k_sets.append(ki)
        k_complements.append(own)
        blocks.append(ci)
    return WitnessSets(k_sets=tuple(k_sets), k_complements=tuple(k_complements), c=np.concatenate(blocks))


def verify_witness_factorization(factor, plan, ws):
    """Evaluate both sides of the witness determinant identity.

    Iterative Laplace expansion along the data columns (each holding one
    nonzero pivot b_j^T c_i) reduces |det J2(c)| to the pivot product
    const_c times the product of the per-antenna Q x Q minors on the
    pilot rows and K_i.
    """
    _check_dims(factor, plan)
    q, m = factor.cov_rank, plan.cfg.num_rx
    x_dummy = np.ones(plan.cfg.block_len, dtype=np.complex128)
    j2 = jacobian_factors(factor, plan, x_dummy, ws.c).j2
    sign, logdet = np.linalg.slogdet(j2)
    lhs = 0.0 if sign == 0 else float(np.exp(logdet))

    const_c = 1.0
    minors = 1.0
    for i in range(m):
        ci = ws.c[i * q:(i + 1) * q]
        for j in ws.k_complements[i]:
            const_c *= abs(factor.a[j, :] @ ci)
        rows = sorted(list(range(plan.alpha)) + list(ws.k_sets[i]))
        minors *= abs(np.linalg.det(factor.a[rows, :]))
    return WitnessCheck(lhs=lhs, rhs=const_c * minors, const_c=const_c)


def _checkpoints(trials):
    marks = []
    scale = 1
    while scale <= trials:
        for mult in (1, 2, 5):
            v = mult * scale
            if v <= trials:
                marks.append(v)
        scale *= 10
    if marks[-1] != trials:
        marks.append(trials)
    return np.asarray(marks, dtype=np.int64)


def _j2_structure(factor, plan):
    """Constant left block plus scatter data for the per-trial a-columns.

    The entry of J2 at selected row k (antenna m_k, data time t_k) and
    column MQ + t_k - alpha is (row t_k of A) . s_{m_k}; everything else
    is constant in s.
    """
    n, q = factor.block_len, factor.cov_rank
    m = plan.cfg.num_rx
    sel = plan.selected
    base = np.kron(np.eye(m), factor.a)[sel, :]
    times = sel % n
    ants = sel // n
    data_mask = times >= plan.alpha
    rows = np.nonzero(data_mask)[0].astype(np.int64)
    a_rows = factor.a[times[data_mask], :]
    cols = (m * q + times[data_mask] - plan.alpha).astype(np.int64)
    return base, a_rows, rows, ants[data_mask].astype(np.int64), cols


def mc_expected_log_abs_det_j2(factor, plan, trials, seed, workers=1):
    """Monte Carlo running mean of log|det J2(s)| over s ~ CN(0, I_MQ).

    Draws come from per-chunk keyed streams and the reduction runs in
    chunk order, so the series is identical for any worker count.
    Samples with an exactly zero determinant are counted and excluded
    from the mean (a nonempty count already refutes finiteness of the
    expectation in the empirical sense probed here).
    """
    if trials < 10**3:
        raise ValueError(f"need at least 1000 trials, got {trials}")
    _check_dims(factor, plan)
    q, m = factor.cov_rank, plan.cfg.num_rx
    structure = _j2_structure(factor, plan)
    n_chunks = -(-trials // MC_CHUNK)

    def chunk_values(idx):
        lo = idx * MC_CHUNK
        hi = min(lo + MC_CHUNK, trials)
        rng = substream(seed, "logdet", idx)
        s = complex_normal(rng, hi - lo, m, q)
        return kernels.logdet_j2_batch(*structure, s)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(chunk_values, range(n_chunks)))
    else:
        parts = [chunk_values(i) for i in range(n_chunks)]

    logs = np.concatenate([p[0] for p in parts])
    zeros = np.concatenate([p[1] for p in parts]).astype(bool)
    zero_count = int(zeros.sum())
    good = np.where(zeros, 0.0, logs)
    cum = np.cumsum(good)
    cum_n = np.cumsum(~zeros)
    marks = _checkpoints(trials)
    means = cum[marks - 1] / np.maximum(cum_n[marks - 1], 1)
    return LogDetProbe(checkpoints=marks, running_mean=means, zero_count=zero_count)
