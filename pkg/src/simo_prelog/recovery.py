"""Blind joint channel-and-data recovery from the selected output rows.

With pilots x_B known and nonzero, substituting z_t = 1/x_t for the data
symbols turns the noise-free observations y_k = x_t (b_t . s_m) into a
square linear system in the unknowns (s, z_D): pilot rows contribute
b_t . s_m = y_k / x_t and data rows contribute b_t . s_m - y_k z_t = 0.
The square system uses the index plan's selected rows; a least-squares
variant assembles the analogous overdetermined system on all M*N rows.
Without pilots the homogeneous system always carries the true point in
its null space, so it can never determine (s, z) uniquely.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "RecoverySystem",
    "RecoveryResult",
    "DegenerateSystemError",
    "NearZeroSymbolError",
    "CONDITION_LIMIT",
    "ZERO_SYMBOL_TOL",
    "build_recovery_system",
    "recover_noiseless",
    "recover_least_squares",
    "build_homogeneous_system",
]

CONDITION_LIMIT = 1e12
ZERO_SYMBOL_TOL = 1e-12


class DegenerateSystemError(ArithmeticError):
    """The recovery system is singular or too ill-conditioned to trust."""


class NearZeroSymbolError(ArithmeticError):
    """A data symbol is (numerically) zero, so its inverse is undefined."""


@dataclass(frozen=True)
class RecoverySystem:
    """Linear system in the unknowns (s_1..s_M, z_{alpha}..z_{N-1})."""

    matrix: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=np.complex128)
        rhs = np.asarray(self.rhs, dtype=np.complex128)
        if matrix.ndim != 2 or rhs.ndim != 1 or matrix.shape[0] != rhs.size:
            raise ValueError(f"inconsistent system shapes {matrix.shape}, {rhs.shape}")
        matrix.setflags(write=False)
        rhs.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "rhs", rhs)


@dataclass(frozen=True)
class RecoveryResult:
    """Recovered state and data symbols with solve diagnostics."""

    s_hat: np.ndarray
    x_data_hat: np.ndarray
    z_data_hat: np.ndarray
    residual: float
    condition: float

    def __post_init__(self):
        for name in ("s_hat", "x_data_hat", "z_data_hat"):
            arr = np.asarray(getattr(self, name), dtype=np.complex128)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not self.residual >= 0 or not self.condition >= 0:
            raise ValueError("residual and condition must be nonnegative")
        if not np.allclose(self.x_data_hat * self.z_data_hat, 1.0):
            raise ValueError("x_data_hat must be the entrywise inverse of z_data_hat")


def _check_pilot(plan, x_pilot):
    x_pilot = np.asarray(x_pilot, dtype=np.complex128)
    if x_pilot.shape != (plan.alpha,):
        raise ValueError(f"x_pilot must have length {plan.alpha}, got shape {x_pilot.shape}")
    if np.any(x_pilot == 0):
        raise ValueError("pilot symbols must be nonzero")
    return x_pilot


def _assemble(factor, plan, x_pilot, y, row_indices):
    """Rows of the (s, z_D) system for the given stacked output rows."""
    n, q = factor.block_len, factor.cov_rank
    m = plan.cfg.num_rx
    alpha = plan.alpha
    times = row_indices % n
    ants = row_indices // n
    k = row_indices.size
    ncols = m * q + n - alpha

    matrix = np.zeros((k, ncols), dtype=np.complex128)
    rhs = np.zeros(k, dtype=np.complex128)
    rows = np.arange(k)
    for blk in range(m):
        mask = ants == blk
        matrix[np.ix_(mask, np.arange(blk * q, (blk + 1) * q))] = factor.a[times[mask], :]
    pilot_mask = times < alpha
    rhs[pilot_mask] = y[pilot_mask] / x_pilot[times[pilot_mask]]
    data = ~pilot_mask
    matrix[rows[data], m * q + times[data] - alpha] = -y[data]
    return RecoverySystem(matrix=matrix, rhs=rhs)


def build_recovery_system(factor, plan, x_pilot, y_selected):
    """Square system on the plan's selected rows.

    Row k (antenna m_k, time t_k) reads b_{t_k} . s_{m_k} = y_k / x_{t_k}
    for pilot times and b_{t_k} . s_{m_k} - y_k z_{t_k} = 0 for data
    times; unknowns are (s, z_D), so the matrix is |I| x |I|.
    """
    x_pilot = _check_pilot(plan, x_pilot)
    y = np.asarray(y_selected, dtype=np.complex128)
    if y.shape != plan.selected.shape:
        raise ValueError(f"y_selected must have length {plan.selected.size}, got shape {y.shape}")
    return _assemble(factor, plan, x_pilot, y, plan.selected)


def _zero_symbol_footprint(plan, times, y, tol):
    """Data time whose every observed row is (relatively) zero, if any."""
    scale = float(np.max(np.abs(y))) if y.size else 0.0
    if scale == 0.0:
        return None
    for t in plan.data_set:
        at_t = np.abs(y[times == t])
        if at_t.size and float(at_t.max()) <= tol * scale:
            return int(t)
    return None


def _solve_qr(system, cond_limit):
    """Column-pivoted QR solve with a diagonal-ratio condition estimate."""
    matrix, rhs = system.matrix, system.rhs
    q_fac, r_fac, piv = scipy.linalg.qr(matrix, mode="economic", pivoting=True)
    diag = np.abs(np.diagonal(r_fac))
    if diag[-1] == 0.0:
        raise DegenerateSystemError("recovery system is exactly singular")
    condition = float(diag[0] / diag[-1])
    if condition >= cond_limit:
        raise DegenerateSystemError(
            f"recovery system condition estimate {condition:.3e} exceeds {cond_limit:.1e}"
        )
    v = scipy.linalg.solve_triangular(r_fac, q_fac.conj().T @ rhs)
    u = np.empty_like(v)
    u[piv] = v
    residual = float(np.linalg.norm(matrix @ u - rhs))
    return u, residual, condition


def _finish(plan, u, residual, condition, zero_tol):
    mq = u.size - plan.data_set.size
    s_hat = u[:mq]
    z_hat = u[mq:]
    if np.any(np.abs(z_hat) < zero_tol):
        raise NearZeroSymbolError(
            f"recovered inverse symbol below {zero_tol:.1e}; data symbol out of range"
        )
    return RecoveryResult(
        s_hat=s_hat,
        x_data_hat=1.0 / z_hat,
        z_data_hat=z_hat,
        residual=residual,
        condition=condition,
    )


def recover_noiseless(factor, plan, x_pilot, y_selected,
                      cond_limit=CONDITION_LIMIT, zero_tol=ZERO_SYMBOL_TOL):
    """Solve the square selected-row system for (s, x_D).

    A data time slot observed as all-zero against a nonzero block means
    the transmitted symbol there was zero, which the z-substitution
    cannot represent; that is reported as NearZeroSymbolError before the
    solve.  Ill-conditioning (the measure-zero exception set of the
    uniqueness argument, or a zero block) raises DegenerateSystemError.
    """
    system = build_recovery_system(factor, plan, x_pilot, y_selected)
    y_raw = np.asarray(y_selected, dtype=np.complex128)
    times = plan.selected % plan.cfg.block_len
    if _zero_symbol_footprint(plan, times, y_raw, zero_tol) is not None:
        raise NearZeroSymbolError("a data time slot is observed as zero on every antenna")
    u, residual, condition = _solve_qr(system, cond_limit)
    return _finish(plan, u, residual, condition, zero_tol)


def recover_least_squares(factor, plan, x_pilot, y_full,
                          cond_limit=CONDITION_LIMIT, zero_tol=ZERO_SYMBOL_TOL):
    """Least-squares recovery from all M*N output rows.

    Assembles the same pilot/data row types on the full stacked output
    and solves the overdetermined system through the column-pivoted QR
    factorization.  With zero noise this agrees with the square solve;
    with noise the residual reports the misfit.
    """
    x_pilot = _check_pilot(plan, x_pilot)
    n, m = plan.cfg.block_len, plan.cfg.num_rx
    y = np.asarray(y_full, dtype=np.complex128)
    if y.shape != (m * n,):
        raise ValueError(f"y_full must have length {m * n}, got shape {y.shape}")
    all_rows = np.arange(m * n)
    system = _assemble(factor, plan, x_pilot, y, all_rows)
    if _zero_symbol_footprint(plan, all_rows % n, y, zero_tol) is not None:
        raise NearZeroSymbolError("a data time slot is observed as zero on every antenna")
    u, residual, condition = _solve_qr(system, cond_limit)
    return _finish(plan, u, residual, condition, zero_tol)


def build_homogeneous_system(factor, cfg, y_full):
    """No-pilot system on all rows: b_t . s_m - y_{m,t} z_t = 0 for every t.

    Every noise-free output block leaves this matrix rank-deficient: the
    generating (s, z) itself lies in the null space, so scaling ambiguity
    is unresolvable without at least one pilot.
    """
    n, q, m = cfg.block_len, cfg.cov_rank, cfg.num_rx
    if factor.block_len != n or factor.cov_rank != q:
        raise ValueError("covariance factor does not match the configuration")
    y = np.asarray(y_full, dtype=np.complex128)
    if y.shape != (m * n,):
        raise ValueError(f"y_full must have length {m * n}, got shape {y.shape}")
    matrix = np.zeros((m * n, m * q + n), dtype=np.complex128)
    rows = np.arange(m * n)
    times = rows % n
    for blk in range(m):
        mask = rows // n == blk
        matrix[np.ix_(mask, np.arange(blk * q, (blk + 1) * q))] = factor.a[times[mask], :]
    matrix[rows, m * q + times] = -y
    return matrix
