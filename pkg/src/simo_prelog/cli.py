"""Batch experiment runner.

Subcommands cover the full pipeline: exact pre-log tables, index plans,
spark checks, covariance generation, blind-recovery round trips,
Jacobian verification, witness construction, log-determinant probes,
mutual-information sweeps, and slope fitting.  Every command is driven
by one top-level seed (all randomness flows through labeled substreams)
and writes byte-identical CSV/JSON for identical inputs.

Exit codes: 0 success or property holds, 1 property fails, 2 usage or
configuration error, 3 numerical degeneracy.
"""
import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import capacity, jacobian, model, recovery, structure
from .seeding import complex_normal, substream

__all__ = ["ExperimentConfig", "main"]

EXIT_OK = 0
EXIT_PROPERTY_FAIL = 1
EXIT_USAGE = 2
EXIT_DEGENERATE = 3

_COV_KINDS = ("dft", "random", "file")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: channel dimensions, covariance source, and counts."""

    cfg: model.ChannelConfig
    covariance: dict
    snr_grid_db: tuple
    outer: int
    inner: int
    trials: int
    seed: int
    out_path: Optional[str]

    def __post_init__(self):
        kind = self.covariance.get("kind")
        if kind not in _COV_KINDS:
            raise ValueError(f"covariance kind must be one of {_COV_KINDS}, got {kind!r}")
        grid = tuple(float(v) for v in self.snr_grid_db)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("snr_grid_db must be strictly increasing")
        object.__setattr__(self, "snr_grid_db", grid)
        for name in ("outer", "inner", "trials"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    def make_factor(self):
        """Realize the covariance factor described by the source record."""
        n, q = self.cfg.block_len, self.cfg.cov_rank
        kind = self.covariance["kind"]
        if kind == "dft":
            factor = model.make_dft_covariance(n, self.covariance["keep_cols"])
        elif kind == "random":
            factor = model.make_random_covariance(n, q, self.covariance.get("seed", self.seed))
        else:
            factor = model.load_covariance(self.covariance["path"])
        if factor.block_len != n or factor.cov_rank != q:
            raise ValueError(
                f"covariance source yields a {factor.block_len}x{factor.cov_rank} factor, "
                f"config wants {n}x{q}"
            )
        return factor


def _first(*values):
    for v in values:
        if v is not None:
            return v
    return None


def _parse_int_list(text):
    return [int(tok) for tok in str(text).split(",") if tok != ""]


def _parse_float_list(text):
    return [float(tok) for tok in str(text).split(",") if tok != ""]


def _covariance_from_args(args, doc):
    if getattr(args, "keep", None) is not None:
        return {"kind": "dft", "keep_cols": _parse_int_list(args.keep)}
    if getattr(args, "cov_file", None) is not None:
        return {"kind": "file", "path": args.cov_file}
    if getattr(args, "cov_seed", None) is not None:
        return {"kind": "random", "seed": args.cov_seed}
    cov = doc.get("covariance")
    return dict(cov) if cov is not None else {"kind": "random"}


def _experiment_config(args, trials_default=1000):
    doc = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    n = _first(getattr(args, "n", None), doc.get("n"))
    q = _first(getattr(args, "q", None), doc.get("q"))
    m = _first(getattr(args, "m", None), doc.get("m"))
    if n is None or q is None or m is None:
        raise ValueError("channel dimensions n, q, m are required (flags or config)")
    cfg = model.ChannelConfig(int(n), int(q), int(m))
    grid = _first(getattr(args, "snr_grid", None), doc.get("snr_grid_db"), ())
    if isinstance(grid, str):
        grid = _parse_float_list(grid)
    return ExperimentConfig(
        cfg=cfg,
        covariance=_covariance_from_args(args, doc),
        snr_grid_db=tuple(grid),
        outer=int(_first(getattr(args, "outer", None), doc.get("outer"), 200)),
        inner=int(_first(getattr(args, "inner", None), doc.get("inner"), 1000)),
        trials=int(_first(getattr(args, "trials", None), doc.get("trials"), trials_default)),
        seed=int(_first(getattr(args, "seed", None), doc.get("seed"), 0)),
        out_path=_first(getattr(args, "out", None), doc.get("out_path")),
    )


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def _csv_text(header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _json_text(doc):
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _emit(text, out_path):
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_prelog(args):
    """Exact pre-log table over M = 1..m_max."""
    rows = []
    for m in range(1, args.m_max + 1):
        rep = structure.prelog(model.ChannelConfig(args.n, args.q, m))
        rows.append((m, str(rep.prelog), float(rep.prelog), rep.regime.value))
    _emit(_csv_text(("m", "prelog", "prelog_decimal", "regime"), rows), args.out)
    return EXIT_OK


def cmd_plan(args):
    """Pilot/data split and row selection for one configuration."""
    plan = structure.build_index_plan(model.ChannelConfig(args.n, args.q, args.m))
    doc = {
        "n": args.n,
        "q": args.q,
        "m": args.m,
        "alpha": int(plan.alpha),
        "shortened": int(plan.shortened),
        "pilot_set": [int(t) for t in plan.pilot_set],
        "data_set": [int(t) for t in plan.data_set],
        "row_sets": [[int(r) for r in rows] for rows in plan.row_sets],
        "selected": [int(r) for r in plan.selected],
    }
    _emit(_json_text(doc), args.out)
    return EXIT_OK


def _factor_from_source(args, seed):
    """Covariance factor for matrix-centric commands (check-a, gen-cov)."""
    if getattr(args, "matrix", None) is not None:
        return model.load_covariance(args.matrix)
    if args.n is None:
        raise ValueError("need --matrix or --n with a generator flag")
    if getattr(args, "keep", None) is not None:
        return model.make_dft_covariance(args.n, _parse_int_list(args.keep))
    if args.q is None:
        raise ValueError("random covariance needs --q")
    return model.make_random_covariance(args.n, args.q, seed)


def cmd_check_a(args):
    """Row-subset independence check; exit 0 iff the property holds."""
    seed = _first(args.seed, 0)
    tol = _first(args.tol, structure.RANK_TOL)
    factor = _factor_from_source(args, seed)
    if args.prime:
        if args.m is None:
            raise ValueError("--prime needs --m (the antenna count fixes the subset size)")
        cfg = model.ChannelConfig(factor.block_len, factor.cov_rank, args.m)
        rep = structure.check_property_a_prime(factor, cfg, seed=seed, tol=tol)
        doc = {
            "holds": rep.holds,
            "witness_set": list(rep.witness_set) if rep.witness_set is not None else None,
            "exhaustive": rep.exhaustive,
        }
    else:
        rep = structure.check_property_a(factor, tol=tol)
        doc = {
            "holds": rep.holds,
            "failing_rows": list(rep.failing_rows) if rep.failing_rows is not None else None,
        }
    _emit(_json_text(doc), args.out)
    return EXIT_OK if rep.holds else EXIT_PROPERTY_FAIL


def cmd_gen_cov(args):
    """Generate a covariance factor and write it as matrix JSON."""
    if args.out is None:
        raise ValueError("gen-cov needs --out")
    factor = _factor_from_source(args, _first(args.seed, 0))
    model.save_covariance(args.out, factor)
    return EXIT_OK


def cmd_recover(args):
    """Recovery round trips; one CSV row per trial, errors recorded as nan."""
    ec = _experiment_config(args)
    factor = ec.make_factor()
    plan = structure.build_index_plan(ec.cfg)
    n, q, m = ec.cfg.block_len, ec.cfg.cov_rank, ec.cfg.num_rx
    alpha = plan.alpha
    pilots = np.ones(alpha, dtype=np.complex128)
    snr_db = _first(getattr(args, "snr_db", None), None)
    rho = capacity.snr_db_to_linear(snr_db) if snr_db is not None else None
    inject = getattr(args, "inject_zero_trial", None)

    rows = []
    failures = 0
    nan4 = (math.nan, math.nan, math.nan, math.nan)
    for t in range(ec.trials):
        rng = substream(ec.seed, "recover", t)
        s = complex_normal(rng, m * q)
        x_data = complex_normal(rng, n - alpha)
        if inject is not None and inject == t and x_data.size:
            x_data[0] = 0.0
        x = np.concatenate([pilots, x_data])
        clean = model.noiseless_output(factor, model.ChannelState(s), x)
        try:
            if rho is None:
                res = recovery.recover_noiseless(factor, plan, pilots, clean[plan.selected])
            else:
                w = complex_normal(rng, m * n)
                y = np.sqrt(rho) * clean + w
                res = recovery.recover_least_squares(factor, plan, pilots, y / np.sqrt(rho))
        except (recovery.NearZeroSymbolError, recovery.DegenerateSystemError):
            failures += 1
            rows.append((t, *nan4))
            continue
        err_s = np.linalg.norm(res.s_hat - s) / np.linalg.norm(s)
        err_x = (
            np.linalg.norm(res.x_data_hat - x_data) / np.linalg.norm(x_data)
            if x_data.size
            else 0.0
        )
        rows.append((t, float(err_s), float(err_x), res.residual, res.condition))
    _emit(_csv_text(("trial", "rel_err_s", "rel_err_x", "residual", "condition"), rows), ec.out_path)
    if failures:
        print(f"{failures} of {ec.trials} trials degenerate (nan rows)", file=sys.stderr)
    return EXIT_OK


def _phase(z):
    return z / abs(z)


def cmd_jac_verify(args):
    """Determinant identity |det J| = |det J1 det J2 det J3| on random draws."""
    ec = _experiment_config(args)
    factor = ec.make_factor()
    plan = structure.build_index_plan(ec.cfg)
    m, q = ec.cfg.num_rx, ec.cfg.cov_rank
    tol = _first(args.tol, 1e-9)
    degree = jacobian.det_j2_homogeneity_degree(plan)

    max_identity = 0.0
    max_homog = 0.0
    for t in range(ec.trials):
        rng = substream(ec.seed, "jac", t)
        c = complex_normal(rng, m * q)
        x = complex_normal(rng, ec.cfg.block_len)
        fac = jacobian.jacobian_factors(factor, plan, x, c)
        sign_f, log_f = np.linalg.slogdet(fac.j_full)
        signs, logs = zip(*(np.linalg.slogdet(j) for j in (fac.j1, fac.j2, fac.j3)))
        rel = abs(sign_f * np.conj(np.prod(signs)) * np.exp(log_f - sum(logs)) - 1.0)
        max_identity = max(max_identity, float(rel))

        fac2 = jacobian.jacobian_factors(factor, plan, x, 2.0 * c)
        sign_a, log_a = np.linalg.slogdet(fac.j2)
        sign_b, log_b = np.linalg.slogdet(fac2.j2)
        rel = abs(sign_b * np.conj(sign_a) * np.exp(log_b - log_a) / 2.0**degree - 1.0)
        max_homog = max(max_homog, float(rel))

    ok = max_identity <= tol and max_homog <= tol
    doc = {
        "trials": ec.trials,
        "identity_max_rel_err": max_identity,
        "homogeneity_max_rel_err": max_homog,
        "tol": tol,
        "pass": ok,
    }
    _emit(_json_text(doc), ec.out_path)
    return EXIT_OK if ok else EXIT_PROPERTY_FAIL


def cmd_witness(args):
    """Witness construction and the determinant product identity."""
    ec = _experiment_config(args)
    factor = ec.make_factor()
    plan = structure.build_index_plan(ec.cfg)
    tol = _first(args.tol, 1e-9)
    ws = jacobian.witness_sets(factor, plan, ec.seed)
    chk = jacobian.verify_witness_factorization(factor, plan, ws)
    rel = abs(chk.lhs - chk.rhs) / max(chk.rhs, 1e-300)
    ok = rel <= tol and chk.lhs > args.det_floor
    doc = {
        "abs_det_j2": chk.lhs,
        "product_rhs": chk.rhs,
        "const_c": chk.const_c,
        "rel_err": rel,
        "det_floor": args.det_floor,
        "k_sets": [list(k) for k in ws.k_sets],
        "k_complements": [list(k) for k in ws.k_complements],
        "pass": ok,
    }
    _emit(_json_text(doc), ec.out_path)
    return EXIT_OK if ok else EXIT_PROPERTY_FAIL


def cmd_logdet_mc(args):
    """Running mean of log|det J2(s)| at checkpoint counts; CSV series."""
    ec = _experiment_config(args, trials_default=10**5)
    factor = ec.make_factor()
    plan = structure.build_index_plan(ec.cfg)
    probe = jacobian.mc_expected_log_abs_det_j2(
        factor, plan, ec.trials, ec.seed, workers=_first(args.workers, 1)
    )
    rows = list(zip((int(c) for c in probe.checkpoints), (float(v) for v in probe.running_mean)))
    _emit(_csv_text(("checkpoint", "running_mean"), rows), ec.out_path)
    if ec.out_path:
        sys.stdout.write(_json_text({"trials": ec.trials, "zero_count": probe.zero_count}))
    elif probe.zero_count:
        print(f"zero determinants: {probe.zero_count}", file=sys.stderr)
    return EXIT_PROPERTY_FAIL if probe.zero_count else EXIT_OK


def _fit_doc(fit):
    return {
        "slope": fit.slope,
        "intercept": fit.intercept,
        "r_squared": fit.r_squared,
        "window_db": list(fit.window_db),
    }


def cmd_mi_sweep(args):
    """Mutual-information estimates over the SNR grid plus a slope fit."""
    ec = _experiment_config(args)
    if len(ec.snr_grid_db) < 3:
        raise ValueError("mi-sweep needs an snr grid with at least 3 points")
    factor = ec.make_factor()
    workers = _first(args.workers, 1)
    points = [
        capacity.mi_rate_mc(
            factor, ec.cfg, snr_db, ec.outer, ec.inner, ec.seed,
            workers=workers, max_evals=args.max_evals,
        )
        for snr_db in ec.snr_grid_db
    ]
    rows = [
        (p.snr_db, p.mi_bits_per_cu, p.std_err, p.outer, p.inner, p.seed)
        for p in points
    ]
    text = _csv_text(("snr_db", "mi_bits_per_cu", "std_err", "outer", "inner", "seed"), rows)
    fit = capacity.prelog_slope_fit(points)
    if ec.out_path:
        _emit(text, ec.out_path)
        _emit(_json_text(_fit_doc(fit)), ec.out_path + ".fit.json")
        sys.stdout.write(_json_text(_fit_doc(fit)))
    else:
        sys.stdout.write(text)
        sys.stdout.write(_json_text(_fit_doc(fit)))
    return EXIT_OK


def cmd_slope(args):
    """Fit a pre-log slope to an existing mi-sweep CSV."""
    with open(args.points, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        points = [
            capacity.MiEstimate(
                snr_db=float(row["snr_db"]),
                mi_bits_per_cu=float(row["mi_bits_per_cu"]),
                std_err=float(row.get("std_err", 0.0) or 0.0),
                outer=int(row.get("outer", 1) or 1),
                inner=int(row.get("inner", 1) or 1),
                seed=int(row.get("seed", 0) or 0),
            )
            for row in reader
        ]
    fit = capacity.prelog_slope_fit(points)
    _emit(_json_text(_fit_doc(fit)), args.out)
    return EXIT_OK


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=None, help="top-level RNG seed")
    parser.add_argument("--out", default=None, help="output file (default: stdout)")
    parser.add_argument("--config", default=None, help="JSON experiment config")
    parser.add_argument("--workers", type=int, default=None, help="parallel workers")
    parser.add_argument("--tol", type=float, default=None, help="numeric tolerance")


def _add_dims(parser, m_flag=True):
    parser.add_argument("--n", type=int, default=None, help="block length N")
    parser.add_argument("--q", type=int, default=None, help="covariance rank Q")
    if m_flag:
        parser.add_argument("--m", type=int, default=None, help="receive antennas M")


def _add_cov_source(parser):
    parser.add_argument("--keep", default=None, help="DFT columns to keep, e.g. 0,1")
    parser.add_argument("--cov-file", default=None, help="covariance matrix JSON path")
    parser.add_argument("--cov-seed", type=int, default=None, help="seed for a random covariance")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="simo-prelog",
        description="Numerical laboratory for the capacity pre-log of "
        "noncoherent SIMO correlated block-fading channels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prelog", help="exact pre-log table over antenna counts")
    _add_common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--m-max", type=int, default=6)
    p.set_defaults(func=cmd_prelog)

    p = sub.add_parser("plan", help="pilot/data split and row selection")
    _add_common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("check-a", help="row-subset independence check")
    _add_common(p)
    _add_dims(p)
    _add_cov_source(p)
    p.add_argument("--matrix", default=None, help="matrix JSON path to check")
    p.add_argument("--prime", action="store_true", help="search a prescribed-size subset instead")
    p.set_defaults(func=cmd_check_a)

    p = sub.add_parser("gen-cov", help="generate a covariance factor JSON")
    _add_common(p)
    _add_dims(p, m_flag=False)
    p.add_argument("--keep", default=None, help="DFT columns to keep, e.g. 0,1")
    p.set_defaults(func=cmd_gen_cov)

    p = sub.add_parser("recover", help="blind recovery round trips to CSV")
    _add_common(p)
    _add_dims(p)
    _add_cov_source(p)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--snr-db", type=float, default=None,
                   help="noisy least-squares mode at this SNR (default: noiseless)")
    p.add_argument("--inject-zero-trial", type=int, default=None,
                   help="zero the first data symbol of this trial")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("jac-verify", help="Jacobian determinant identity check")
    _add_common(p)
    _add_dims(p)
    _add_cov_source(p)
    p.add_argument("--trials", type=int, default=None)
    p.set_defaults(func=cmd_jac_verify)

    p = sub.add_parser("witness", help="nonvanishing witness for det J2")
    _add_common(p)
    _add_dims(p)
    _add_cov_source(p)
    p.add_argument("--det-floor", type=float, default=1e-8)
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("logdet-mc", help="running mean of log|det J2(s)|")
    _add_common(p)
    _add_dims(p)
    _add_cov_source(p)
    p.add_argument("--trials", type=int, default=None)
    p.set_defaults(func=cmd_logdet_mc)

    p = sub.add_parser("mi-sweep", help="mutual-information sweep and slope fit")
    _add_common(p)
    _add_dims(p)
    _add_cov_source(p)
    p.add_argument("--snr-grid", default=None, help="comma list of dB values")
    p.add_argument("--outer", type=int, default=None)
    p.add_argument("--inner", type=int, default=None)
    p.add_argument("--max-evals", type=int, default=capacity.DEFAULT_MAX_EVALS)
    p.set_defaults(func=cmd_mi_sweep)

    p = sub.add_parser("slope", help="fit a slope to an existing sweep CSV")
    _add_common(p)
    p.add_argument("points", help="CSV with snr_db and mi_bits_per_cu columns")
    p.set_defaults(func=cmd_slope)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except jacobian.SparkViolationError as exc:
        print(f"property fails: {exc}", file=sys.stderr)
        return EXIT_PROPERTY_FAIL
    except (jacobian.WitnessDrawError, ArithmeticError) as exc:
        print(f"numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (
        ValueError,
        KeyError,
        OSError,
        json.JSONDecodeError,
        capacity.ResourceBudgetError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
