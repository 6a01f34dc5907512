"""Timing comparison of the compiled and numpy kernel backends.

Runs each hot kernel on a representative workload and prints a table of
throughputs.  The workloads mirror the Monte Carlo call sites: batched
Jacobian-factor determinants, batched Gram log-determinants, and the
mixture log-density reduction.

Usage: python3 benchmarks/bench_kernels.py [--batch 8192] [--repeat 5]
"""
import argparse
import statistics
import time

import numpy as np

from simo_prelog import _kernels_py
from simo_prelog.jacobian import _j2_structure
from simo_prelog.model import ChannelConfig, make_random_covariance
from simo_prelog.seeding import complex_normal, substream
from simo_prelog.structure import build_index_plan

try:
    from simo_prelog import _kernels
except ImportError:
    _kernels = None


def _time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def _workloads(batch):
    factor = make_random_covariance(4, 2, seed=0)
    plan = build_index_plan(ChannelConfig(4, 2, 3))
    structure = _j2_structure(factor, plan)
    s = complex_normal(substream(0, "bench-s"), batch, 3, 2)

    gram_factor = make_random_covariance(3, 2, seed=1)
    xb = complex_normal(substream(0, "bench-x"), batch, 3)
    y = complex_normal(substream(0, "bench-y"), 2, 3)

    return [
        ("logdet_j2_batch (4,2,3)", batch,
         lambda mod: mod.logdet_j2_batch(*structure, s)),
        ("gram_logdet (3,2)", batch,
         lambda mod: mod.gram_logdet(xb, gram_factor.a, 1000.0)),
        ("mixture_log_mean_density (3,2,2)", batch,
         lambda mod: mod.mixture_log_mean_density(y, xb, gram_factor.a, 1000.0)),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--batch", type=int, default=8192, help="evaluations per call")
    parser.add_argument("--repeat", type=int, default=5, help="timed repetitions (median)")
    args = parser.parse_args()

    backends = [("python", _kernels_py)]
    if _kernels is not None:
        backends.append(("compiled", _kernels))
    else:
        print("compiled extension not built; timing the numpy backend only\n")

    header = f"{'kernel':<34}{'batch':>8}" + "".join(f"{name + ' ev/s':>16}" for name, _ in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))

    for name, batch, call in _workloads(args.batch):
        rates = []
        for _, mod in backends:
            call(mod)
            seconds = _time(lambda: call(mod), args.repeat)
            rates.append(batch / seconds)
        line = f"{name:<34}{batch:>8}" + "".join(f"{rate:>16.3g}" for rate in rates)
        if len(rates) == 2:
            line += f"{rates[1] / rates[0]:>10.2f}"
        print(line)

    if len(backends) == 2:
        for wname, _, call in _workloads(256):
            a = call(_kernels_py)
            b = call(_kernels)
            a0 = a[0] if isinstance(a, tuple) else a
            b0 = b[0] if isinstance(b, tuple) else b
            err = float(np.max(np.abs(np.asarray(a0) - np.asarray(b0))))
            print(f"agreement {wname}: max abs diff {err:.3e}")


if __name__ == "__main__":
    main()
