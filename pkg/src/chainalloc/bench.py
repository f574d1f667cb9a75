"""Timing harness: heuristic vs exact solvers, numba vs numpy kernels."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

from . import exact, kernels
from .faa import faa_allocate
from .problem import Problem
from .sim import EnsembleConfig, generate_ensemble

BENCH_CSV_HEADER = ["algo", "functions_per_device", "combinations", "median_ms", "reps"]


@dataclass(frozen=True)
class BenchRow:
    algo: str
    functions_per_device: int
    combinations: int
    median_ms: float
    reps: int

    def csv_row(self) -> list:
        return [self.algo, self.functions_per_device, self.combinations,
                repr(self.median_ms), self.reps]


def _median_ms(fn, reps: int) -> float:
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1000.0)
    return statistics.median(times)


def run_bench(
    max_functions: int = 10,
    reps: int = 10,
    seed: int = 1,
    exact_cap: int = 2_000_000,
) -> list[BenchRow]:
    """Median wall time per solver call on the 3-device random ensemble.

    Exact solvers are timed only while the combination count stays under
    `exact_cap`; the pruned optimal search is timed on both kernel backends
    when numba is importable.
    """
    rows: list[BenchRow] = []
    for x in range(1, max_functions + 1):
        cfg = EnsembleConfig(functions_per_device=x)
        scenario = generate_ensemble(cfg, seed)[0]
        p = Problem(scenario)
        k = p.combination_count()

        rows.append(BenchRow(
            "faa", x, k, _median_ms(lambda: faa_allocate(scenario, problem=p), reps), reps,
        ))
        if k <= exact_cap:
            rows.append(BenchRow(
                "brute", x, k,
                _median_ms(lambda: exact.brute_force_solve(scenario, problem=p), reps), reps,
            ))
            rows.append(BenchRow(
                "bb", x, k,
                _median_ms(lambda: exact.branch_and_bound_solve(scenario, problem=p), reps),
                reps,
            ))
            backends = ["numba", "numpy"] if kernels.HAS_NUMBA else ["numpy"]
            for backend in backends:
                kernels.kernel_search(p, prune=False, backend=backend)  # warm the jit
                rows.append(BenchRow(
                    f"kernel[{backend}]", x, k,
                    _median_ms(
                        lambda: kernels.kernel_search(p, prune=False, backend=backend), reps,
                    ),
                    reps,
                ))
    return rows
