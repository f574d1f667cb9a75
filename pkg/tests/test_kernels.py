import math

import pytest

from chainalloc import kernels
from chainalloc.exact import brute_force_solve
from chainalloc.objective import Assignment, system_lifetime
from chainalloc.problem import Problem
from chainalloc.sim import EnsembleConfig, generate_ensemble

from conftest import random_small_scenario


def test_backend_selection(monkeypatch):
    monkeypatch.setenv("CHAINALLOC_BACKEND", "numpy")
    assert kernels.backend_name() == "numpy"
    monkeypatch.setenv("CHAINALLOC_BACKEND", "auto")
    assert kernels.backend_name() in ("numba", "numpy")
    monkeypatch.delenv("CHAINALLOC_BACKEND")
    if kernels.HAS_NUMBA:
        monkeypatch.setenv("CHAINALLOC_BACKEND", "numba")
        assert kernels.backend_name() == "numba"


def test_backend_without_numba(monkeypatch):
    monkeypatch.setattr(kernels, "HAS_NUMBA", False)
    monkeypatch.setenv("CHAINALLOC_BACKEND", "auto")
    assert kernels.backend_name() == "numpy"
    monkeypatch.setenv("CHAINALLOC_BACKEND", "numba")
    with pytest.raises(RuntimeError, match="not importable"):
        kernels.backend_name()


@pytest.mark.skipif(not kernels.HAS_NUMBA, reason="numba backend unavailable")
def test_backend_parity(rng):
    for _ in range(15):
        s = random_small_scenario(rng, chained=bool(rng.integers(2)))
        p = Problem(s)
        if p.combination_count() > 5000:
            continue
        res_nb = kernels.kernel_search(p, prune=False, backend="numba")
        res_np = kernels.kernel_search(p, prune=False, backend="numpy")
        assert res_nb[0] == res_np[0]          # identical float optimum
        assert res_nb[1] == res_np[1]          # identical argmin assignment
        assert res_nb[3] == res_np[3] == p.combination_count()


def test_prune_preserves_optimum(rng):
    for _ in range(15):
        s = random_small_scenario(rng, chained=True)
        p = Problem(s)
        full = kernels.kernel_search(p, prune=False)
        pruned = kernels.kernel_search(p, prune=True)
        assert pruned[0] == pytest.approx(full[0], rel=1e-12)
        assert pruned[4] <= full[3]  # never more nodes than leaves


def test_kernel_matches_exact_engine(rng):
    for _ in range(10):
        s = random_small_scenario(rng)
        p = Problem(s)
        bf = brute_force_solve(s, problem=p)
        value, hosts, found, *_ = kernels.kernel_search(p, prune=False)
        assert found
        assert float(bf.objective) == pytest.approx(value, rel=1e-12)


def test_kernel_eval_matches_objective(rng):
    for _ in range(10):
        s = random_small_scenario(rng, chained=True)
        p = Problem(s)
        hosts = [row.candidates[int(rng.integers(len(row.candidates)))]
                 for row in p.requests]
        value, feasible = kernels.kernel_eval(p, hosts)
        assert feasible
        a = Assignment(mapping={
            row.rid: p.dev_ids[hosts[i]] for i, row in enumerate(p.requests)
        })
        rep = system_lifetime(s, a, problem=p)
        if math.isinf(rep.system_lifetime):
            assert value == 0.0
        else:
            assert 1.0 / value == pytest.approx(rep.system_lifetime, rel=1e-9)


@pytest.mark.skipif(not kernels.HAS_NUMBA, reason="pruning needs the DFS backend")
def test_warm_start_incumbent_skips_everything():
    s = generate_ensemble(EnsembleConfig(functions_per_device=3), seed=5)[0]
    p = Problem(s)
    full = kernels.kernel_search(p, prune=False, backend="numba")
    # incumbent at the optimum: nothing strictly better exists
    value, hosts, found, leaves, nodes, pruned = kernels.kernel_search(
        p, prune=True, incumbent=full[0], backend="numba")
    assert not found
    assert leaves < full[3]
