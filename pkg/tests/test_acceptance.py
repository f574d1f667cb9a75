"""Acceptance suite: every release gate in one module, one PASS/FAIL line each.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion lines.
The heavy ensemble computation is shared by criteria 2 and 3 through a
module-scoped fixture.
"""

from __future__ import annotations

import statistics
import time

import numpy as np
import pytest

from chainalloc import kernels
from chainalloc.exact import branch_and_bound_solve, brute_force_solve, optimal_solve
from chainalloc.faa import faa_allocate
from chainalloc.objective import check_constraints
from chainalloc.problem import Problem
from chainalloc.relax import relax_solve
from chainalloc.reports import render_csv
from chainalloc.scenarios import accelerometer_pair, five_device_pan
from chainalloc.sim import (
    TRACE_CSV_HEADER,
    EnsembleConfig,
    Policy,
    SweepSpec,
    allocate_static,
    generate_ensemble,
    run_episode,
    run_usecase_sweep,
)

from conftest import random_small_scenario

N_ORACLE_INSTANCES = 200
ENSEMBLE_LENGTHS = (1, 2, 3, 4, 5, 6)
ENSEMBLE_SEEDS = tuple(range(50))


def _report(number: int, name: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {number} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {number} ({name}): {detail}"


def _spearman(xs, ys) -> float:
    def ranks(v):
        order = sorted(range(len(v)), key=lambda i: v[i])
        out = [0.0] * len(v)
        i = 0
        while i < len(order):
            j = i
            while j + 1 < len(order) and v[order[j + 1]] == v[order[i]]:
                j += 1
            for k in range(i, j + 1):
                out[order[k]] = (i + j) / 2 + 1
            i = j + 1
        return out

    rx, ry = ranks(list(xs)), ranks(list(ys))
    mx, my = sum(rx) / len(rx), sum(ry) / len(ry)
    num = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    den = (sum((a - mx) ** 2 for a in rx) * sum((b - my) ** 2 for b in ry)) ** 0.5
    return num / den


@pytest.fixture(scope="module")
def oracle_instances():
    rng = np.random.default_rng(0xC0FFEE)
    out = []
    while len(out) < N_ORACLE_INSTANCES:
        s = random_small_scenario(rng)
        if Problem(s).combination_count() <= 10_000:
            out.append(s)
    return out


@pytest.fixture(scope="module")
def oracle_results(oracle_instances):
    t0 = time.perf_counter()
    results = []
    for s in oracle_instances:
        bf = brute_force_solve(s)
        bb = branch_and_bound_solve(s)
        results.append((s, bf, bb))
    return results, time.perf_counter() - t0


@pytest.fixture(scope="module")
def ensemble_runs():
    """FAA / OPTIMAL / EACH static lifetimes per (length, seed)."""
    kernels.kernel_search(Problem(generate_ensemble(
        EnsembleConfig(functions_per_device=2), 0)[0]), prune=False)  # warm the jit
    t0 = time.perf_counter()
    data: dict[int, list[dict]] = {}
    for x in ENSEMBLE_LENGTHS:
        cfg = EnsembleConfig(functions_per_device=x)
        rows = []
        for seed in ENSEMBLE_SEEDS:
            s = generate_ensemble(cfg, seed)[0]
            p = Problem(s)
            _, _, faa_rep = faa_allocate(s, problem=p)
            opt = optimal_solve(s, problem=p, cap=10**9)
            _, each_life = allocate_static(s, Policy.EACH)
            rows.append({
                "scenario": s,
                "faa": faa_rep.system_lifetime,
                "opt": opt.report.system_lifetime,
                "each": each_life,
            })
        data[x] = rows
    return data, time.perf_counter() - t0


def test_criterion_1_oracle_equivalence(oracle_results):
    results, elapsed = oracle_results
    mismatches = sum(1 for _, bf, bb in results if bf.objective != bb.objective)
    ok = mismatches == 0 and elapsed < 60.0
    _report(1, "oracle equivalence", ok,
            f"{len(results)} instances, {mismatches} mismatches, {elapsed:.1f}s")


def test_criterion_2_heuristic_quality(ensemble_runs):
    data, elapsed = ensemble_runs
    per_length = {}
    gaps_all = []
    for x, rows in data.items():
        gaps = [(r["opt"] - r["faa"]) / r["opt"] for r in rows]
        per_length[x] = statistics.mean(gaps)
        gaps_all.extend(gaps)
    overall = statistics.mean(gaps_all)
    worst = max(per_length.values())
    ok = overall <= 0.10 and worst <= 0.15 and elapsed < 300.0
    _report(2, "heuristic quality", ok,
            f"mean gap {overall:.1%}, worst length mean {worst:.1%}, "
            f"{elapsed:.0f}s for {len(gaps_all)} solves")


def test_criterion_3_improvement(ensemble_runs):
    data, _ = ensemble_runs
    rows6 = data[6]
    each_inc = statistics.mean(
        100.0 * (r["faa"] - r["each"]) / r["each"] for r in rows6)
    manual_incs = []
    for r in rows6[:20]:
        manual_mean = statistics.mean(
            allocate_static(r["scenario"], Policy.MANUAL, seed=k)[1]
            for k in range(20)
        )
        manual_incs.append(100.0 * (r["faa"] - manual_mean) / manual_mean)
    manual_inc = statistics.mean(manual_incs)
    trend = [
        statistics.mean(100.0 * (r["faa"] - r["each"]) / r["each"] for r in data[x])
        for x in ENSEMBLE_LENGTHS
    ]
    rho = _spearman(ENSEMBLE_LENGTHS, trend)
    nondecreasing = all(b >= a - 1e-9 for a, b in zip(trend, trend[1:]))
    ok = each_inc >= 30.0 and manual_inc >= 30.0 and rho > 0.9 and nondecreasing
    _report(3, "improvement reproduction", ok,
            f"vs each +{each_inc:.1f}%, vs manual +{manual_inc:.1f}%, "
            f"trend rho {rho:.3f}, trend {['%.1f' % t for t in trend]}")


def test_criterion_4_bound_ordering(oracle_results):
    results, _ = oracle_results
    violations = 0
    # comparisons allow the LP layer's documented 1e-9 feasibility tolerance
    for s, bf, _ in results:
        rep = relax_solve(s)
        milp = float(bf.objective)
        if not (rep.opt_lp <= milp + 1e-9 + 1e-9 * milp):
            violations += 1
        elif not (milp <= rep.int_worst + 1e-9 + 1e-9 * rep.int_worst):
            violations += 1
        elif rep.af < 1.0 - 1e-5:
            violations += 1
    _report(4, "bound ordering", violations == 0,
            f"{len(results)} instances, {violations} violations")


def test_criterion_5_accelerometer_sweep():
    mismatches = []
    for pct in range(10, 101, 10):
        s = accelerometer_pair(phone_charge=pct / 100.0)
        a, _, rep = faa_allocate(s)
        bf = brute_force_solve(s)
        same_map = a.mapping == bf.assignment.mapping
        same_obj = abs(rep.system_lifetime - bf.report.system_lifetime) \
            <= 1e-9 * bf.report.system_lifetime
        if not (same_map or same_obj):
            mismatches.append(pct)
    _report(5, "accelerometer sweep optimality", not mismatches,
            f"charges 10..100%, mismatches at {mismatches or 'none'}")


def test_criterion_6_availability_plateau():
    base = five_device_pan(sole_window=(0, 1), laptop_window=(0, 1))
    values = tuple(float(v) for v in range(0, 401, 40))
    spec = SweepSpec(kind="availability", devices=("sole", "laptop"),
                     values=values, policies=(Policy.FAA,), realloc_every=30, seed=1)
    rows = [r for r in run_usecase_sweep(base, spec) if r.policy == "faa"]
    rows.sort(key=lambda r: r.sweep_value)
    incs = [r.increment_pct_vs_each for r in rows]
    nondecreasing = all(b >= a - 1e-9 for a, b in zip(incs, incs[1:]))
    tail = incs[-3:]
    plateau = (max(tail) - min(tail)) <= 0.01 * max(abs(max(tail)), 1e-9)

    # pinned functions must never move, across every reallocation epoch
    pins_stable = True
    from chainalloc.model import RequestId
    from chainalloc.sim import apply_sweep_point

    for value in (values[0], values[len(values) // 2], values[-1]):
        scenario = apply_sweep_point(base, spec, value)
        trace = run_episode(scenario, Policy.FAA, realloc_every=30, seed=1)
        for _, assignment in trace.assignments:
            if assignment.mapping[RequestId("glasses", "game", 1)] != "glasses":
                pins_stable = False
            if assignment.mapping[RequestId("watch", "fitness", 2)] != "watch":
                pins_stable = False
    ok = nondecreasing and plateau and pins_stable
    _report(6, "availability plateau", ok,
            f"increments {['%.0f' % i for i in incs]}, plateau {plateau}, "
            f"pins stable {pins_stable}")


def test_criterion_7_heuristic_runtime():
    s = generate_ensemble(EnsembleConfig(functions_per_device=10), seed=1)[0]
    p = Problem(s)
    faa_allocate(s, problem=p)  # warm any lazy setup
    times = []
    for _ in range(11):
        t0 = time.perf_counter()
        faa_allocate(s, problem=p)
        times.append(time.perf_counter() - t0)
    median = statistics.median(times)
    _report(7, "heuristic runtime", median < 1.0,
            f"median {median * 1000.0:.1f} ms over {len(times)} runs")


def test_criterion_8_property_suites():
    cases = 1000
    rng = np.random.default_rng(0xFEED)

    constraint_fail = 0
    for i in range(cases):
        s = random_small_scenario(rng, chained=bool(i % 2))
        kind = i % 3
        if kind == 0:
            a, _, _ = faa_allocate(s)
        elif kind == 1:
            a = brute_force_solve(s).assignment
        else:
            a, _ = allocate_static(s, Policy.MANUAL, seed=i)
        if not check_constraints(s, a).feasible:
            constraint_fail += 1

    chain_fail = 0
    for i in range(cases):
        s = random_small_scenario(rng, chained=True)
        _, log, _ = faa_allocate(s)
        by_chain: dict[tuple[str, str], list] = {}
        for e in log:
            by_chain.setdefault((e.chain_device, e.app), []).append(e)
        for entries in by_chain.values():
            entries.sort(key=lambda e: e.seq)
            if any(nxt.requester != prev.performer
                   for prev, nxt in zip(entries, entries[1:])):
                chain_fail += 1

    conservation_fail = 0
    for i in range(cases):
        s = random_small_scenario(rng)
        trace = run_episode(s, Policy.FAA, realloc_every=7, seed=i, max_intervals=40)
        p = Problem(s)
        spans = trace.assignments + [(len(trace.samples), None)]
        expect = list(p.energy)
        for (t0, assignment), (t1, _) in zip(spans, spans[1:]):
            loads = p.loads_umj([
                p.dev_index[assignment.mapping[row.rid]] for row in p.requests
            ])
            for d in range(p.n_dev):
                expect[d] -= loads[d] * (t1 - t0)
        if trace.samples and list(trace.samples[-1][1]) != expect:
            conservation_fail += 1

    # idle latch + cost accounting against a naive per-definition evaluator
    latch_fail = 0
    for i in range(cases):
        s = random_small_scenario(rng, chained=bool(i % 2))
        p = Problem(s)
        hosts = [row.candidates[int(rng.integers(len(row.candidates)))]
                 for row in p.requests]
        if p.loads_umj(hosts) != _naive_loads(p, hosts):
            latch_fail += 1

    determinism_fail = 0
    for i in range(cases):
        s = random_small_scenario(rng)
        t1 = run_episode(s, Policy.MANUAL, realloc_every=5, seed=i, max_intervals=20)
        t2 = run_episode(s, Policy.MANUAL, realloc_every=5, seed=i, max_intervals=20)
        if render_csv(TRACE_CSV_HEADER, t1.csv_rows()) != \
                render_csv(TRACE_CSV_HEADER, t2.csv_rows()):
            determinism_fail += 1

    ok = not any((constraint_fail, chain_fail, conservation_fail, latch_fail,
                  determinism_fail))
    _report(8, "property suites", ok,
            f"constraints {constraint_fail}, chains {chain_fail}, "
            f"conservation {conservation_fail}, idle latch {latch_fail}, "
            f"determinism {determinism_fail} failures over {cases} cases each")


def _naive_loads(p: Problem, hosts: list[int]) -> list[int]:
    """Direct restatement of the cost definition, one term at a time."""
    loads = list(p.base)
    active: set[tuple[int, int]] = set()
    requester: dict[int, int] = {}
    for i, row in enumerate(p.requests):
        requester[i] = row.origin if row.prev < 0 else hosts[row.prev]
    for i, row in enumerate(p.requests):
        h = hosts[i]
        active.add((h, row.type_idx))
    for d, t in active:
        loads[d] += p.fcost[d][t]
    communicated: set[int] = set()
    for i, row in enumerate(p.requests):
        h, q = hosts[i], requester[i]
        if h != q:
            loads[q] += p.comm_req[h][q][row.type_idx]
            loads[h] += p.comm_srv[h][q][row.type_idx]
            communicated.update((h, q))
    for d in communicated:
        loads[d] += p.idle[d]  # idle charged exactly once per communicating device
    return loads
