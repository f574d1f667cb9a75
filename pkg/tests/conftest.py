"""Shared scenario builders and independent oracles for the test suite."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from chainalloc.model import (
    ChainSpec,
    CommCostModel,
    DeviceSpec,
    FunctionInstance,
    Scenario,
    Tier,
)
from chainalloc.objective import Assignment
from chainalloc.problem import Problem


def mah_for_mj(mj: float, voltage: float = 3.8) -> float:
    """Capacity that yields exactly `mj` at full charge."""
    return mj / (voltage * 3600.0)


def single_device_scenario(
    energy_mj: float = 1000.0,
    baseline: float = 50.0,
    fcost: float = 50.0,
    n_requests: int = 1,
) -> Scenario:
    dev = DeviceSpec(id="solo", capacity=mah_for_mj(energy_mj), baseline_drain=baseline)
    chains = tuple(
        ChainSpec(device="solo", app=f"a{k}", steps=("fn",)) for k in range(n_requests)
    )
    return Scenario(
        devices=(dev,),
        functions=(FunctionInstance(host="solo", ftype="fn", cost=fcost),),
        comm=CommCostModel(),
        chains=chains,
    )


def random_small_scenario(rng: np.random.Generator, chained: bool = False) -> Scenario:
    """Criterion-1 style instance: 2-3 devices, 1-4 types, 1-2 requests per type.

    Every requester hosts its own types (function replication premise), chains
    are single-step unless `chained`, all devices Tier 1.
    """
    n_dev = int(rng.integers(2, 4))
    n_types = int(rng.integers(1, 5))
    dev_ids = [f"d{k}" for k in range(n_dev)]
    devices = tuple(
        DeviceSpec(
            id=d,
            capacity=float(rng.uniform(100, 3000)),
            initial_charge=float(rng.uniform(0.1, 1.0)),
            baseline_drain=float(rng.uniform(10, 500)),
            idle_cost=float(rng.uniform(0, 300)),
        )
        for d in dev_ids
    )
    types = [f"t{k}" for k in range(n_types)]
    requests: list[tuple[str, str]] = []  # (origin device, type)
    for t in types:
        for _ in range(int(rng.integers(1, 3))):
            requests.append((dev_ids[int(rng.integers(n_dev))], t))

    hosts: dict[str, set[str]] = {t: set() for t in types}
    for origin, t in requests:
        hosts[t].add(origin)
    for t in types:
        for d in dev_ids:
            if rng.random() < 0.5:
                hosts[t].add(d)

    functions = tuple(
        FunctionInstance(host=d, ftype=t, cost=float(round(rng.uniform(50, 1000), 1)))
        for t in types for d in sorted(hosts[t])
    )
    pairs = {
        (a, b): (float(round(rng.uniform(0, 300), 1)), float(round(rng.uniform(0, 300), 1)))
        for a in dev_ids for b in dev_ids if a != b
    }
    if chained and len(requests) > 1:
        by_origin: dict[str, list[str]] = {}
        for origin, t in requests:
            by_origin.setdefault(origin, []).append(t)
        chains = tuple(
            ChainSpec(device=o, app="app", steps=tuple(ts))
            for o, ts in sorted(by_origin.items())
        )
    else:
        chains = tuple(
            ChainSpec(device=o, app=f"a{k}", steps=(t,))
            for k, (o, t) in enumerate(requests)
        )
    return Scenario(
        devices=devices,
        functions=functions,
        comm=CommCostModel(pairs=pairs),
        chains=chains,
        rng_seed=int(rng.integers(2**31)),
    )


def enumerate_assignments(s: Scenario):
    """Yield every Assignment of `s` (independent of the solvers)."""
    p = Problem(s)
    pools = [row.candidates for row in p.requests]
    for combo in itertools.product(*pools):
        yield Assignment(mapping={
            row.rid: p.dev_ids[combo[i]] for i, row in enumerate(p.requests)
        })


def oracle_best_lifetime(s: Scenario) -> float:
    """Exhaustive optimum through the public objective only."""
    from chainalloc.objective import system_lifetime

    best = -1.0
    for a in enumerate_assignments(s):
        t = system_lifetime(s, a).system_lifetime
        if t > best:
            best = t
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


try:
    from hypothesis import strategies as st

    @st.composite
    def small_scenarios(draw, chained=False):
        """Hypothesis wrapper over the seeded instance generator."""
        seed = draw(st.integers(0, 2**31 - 1))
        return random_small_scenario(np.random.default_rng(seed), chained=chained)
except ImportError:  # pragma: no cover
    small_scenarios = None
