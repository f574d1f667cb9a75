import math

import pytest

from chainalloc.errors import InvalidAssignment
from chainalloc.model import (
    ChainSpec,
    CommCostModel,
    DeviceSpec,
    FunctionInstance,
    RequestId,
    Scenario,
    Tier,
)
from chainalloc.objective import Assignment, added_cost, check_constraints, system_lifetime
from chainalloc.problem import Problem
from chainalloc.scenarios import phone_watch_sensors

from conftest import (
    enumerate_assignments,
    mah_for_mj,
    random_small_scenario,
    single_device_scenario,
)


def _assignment(s, **hosts_by_app):
    mapping = {}
    for rid in s.requests():
        mapping[rid] = hosts_by_app[rid.app] if isinstance(hosts_by_app[rid.app], str) \
            else hosts_by_app[rid.app][rid.seq]
    return Assignment(mapping=mapping)


def test_all_local_added_cost():
    s = single_device_scenario(energy_mj=1000.0, baseline=50.0, fcost=50.0)
    a = Assignment(mapping={rid: "solo" for rid in s.requests()})
    assert added_cost(s, a, "solo") == pytest.approx(50.0)
    rep = system_lifetime(s, a)
    assert rep.system_lifetime == pytest.approx(10.0)
    assert rep.bottleneck == "solo"


def test_two_device_added_costs():
    s = phone_watch_sensors()
    mapping = {}
    for rid in s.requests():
        ftype = s.chain_of(rid).ftype(rid.seq)
        mapping[rid] = "watch" if ftype == "acc" else "phone"
    a = Assignment(mapping=mapping)
    # phone: gyro 660 + serve watch's gyro 142 + fetch own acc 142
    assert added_cost(s, a, "phone") == pytest.approx(944.0)
    # watch: acc 600 + serve phone's acc 36 + fetch own gyro 36
    assert added_cost(s, a, "watch") == pytest.approx(672.0)
    rep = system_lifetime(s, a)
    assert rep.system_lifetime == pytest.approx(3_926_160.0 / 742.0)
    assert rep.bottleneck == "watch"


def test_empty_request_set():
    dev = DeviceSpec(id="a", capacity=1.0, baseline_drain=5.0)
    s = Scenario(devices=(dev,), functions=(FunctionInstance("a", "fn", 1.0),),
                 comm=CommCostModel(), chains=())
    a = Assignment(mapping={})
    assert added_cost(s, a, "a") == 0.0


def test_infinite_lifetime_convention():
    devs = (
        DeviceSpec(id="busy", capacity=mah_for_mj(1000.0), baseline_drain=100.0),
        DeviceSpec(id="idle2", capacity=mah_for_mj(500.0), tier=Tier.TIER2),
    )
    s = Scenario(devices=devs, functions=(FunctionInstance("busy", "fn", 0.0),),
                 comm=CommCostModel(),
                 chains=(ChainSpec(device="busy", app="a", steps=("fn",)),))
    a = Assignment(mapping={rid: "busy" for rid in s.requests()})
    rep = system_lifetime(s, a)
    assert rep.lifetime_of("idle2") == math.inf
    # the zero-drain device is Tier 2, so the system minimum ignores it
    assert rep.system_lifetime == pytest.approx(10.0)
    assert rep.bottleneck == "busy"


def test_check_constraints_violations():
    s = phone_watch_sensors()
    rids = s.requests()
    full = {rid: "watch" if s.chain_of(rid).ftype(rid.seq) == "acc" else "phone"
            for rid in rids}

    unmapped = dict(full)
    unmapped.pop(rids[0])
    rep = check_constraints(s, Assignment(mapping=unmapped))
    assert rep.violated(4) and not rep.feasible

    wrong_host = dict(full)
    acc_rid = [r for r in rids if s.chain_of(r).ftype(r.seq) == "acc"][0]
    gyro_rid = [r for r in rids if s.chain_of(r).ftype(r.seq) == "gyro"][0]
    wrong_host[acc_rid] = "phone"  # phone owns acc: fine
    rep = check_constraints(s, Assignment(mapping=wrong_host))
    assert rep.feasible
    # now break constraint 3 through a type the host does not own
    s2 = Scenario(
        devices=s.devices,
        functions=tuple(f for f in s.functions if not (f.host == "watch" and f.ftype == "gyro")),
        comm=s.comm, chains=s.chains,
    )
    bad = dict(full)
    bad[gyro_rid] = "watch"
    rep = check_constraints(s2, Assignment(mapping=bad))
    assert rep.violated(3)


def test_check_constraint_min_lifetime():
    s = single_device_scenario(energy_mj=1000.0, baseline=50.0, fcost=50.0)
    tight = Scenario(
        devices=(DeviceSpec(id="solo", capacity=s.devices[0].capacity,
                            baseline_drain=50.0, min_lifetime=2000.0),),
        functions=s.functions, comm=s.comm, chains=s.chains,
    )
    a = Assignment(mapping={rid: "solo" for rid in tight.requests()})
    rep = check_constraints(tight, a)
    assert rep.violated(8)
    ok = Scenario(
        devices=(DeviceSpec(id="solo", capacity=s.devices[0].capacity,
                            baseline_drain=50.0, min_lifetime=5.0),),
        functions=s.functions, comm=s.comm, chains=s.chains,
    )
    assert check_constraints(ok, a).feasible


def test_added_cost_rejects_broken_assignment():
    s = phone_watch_sensors()
    with pytest.raises(InvalidAssignment):
        added_cost(s, Assignment(mapping={}), "phone")


def test_min_ratio_max_lifetime_agreement(rng):
    # maximizing min E/(C+A) and minimizing max (C+A)/E pick the same assignments
    for _ in range(10):
        s = random_small_scenario(rng)
        p = Problem(s)
        if p.combination_count() > 64:
            continue
        best_by_lifetime, best_by_ratio = set(), set()
        t_best, r_best = -1.0, math.inf
        evals = []
        for a in enumerate_assignments(s):
            rep = system_lifetime(s, a, problem=p)
            ratio = max(
                (row.baseline_mj + row.added_mj) / row.energy_mj
                for row in rep.devices if row.tier is Tier.TIER1
            )
            evals.append((a, rep.system_lifetime, ratio))
            t_best = max(t_best, rep.system_lifetime)
            r_best = min(r_best, ratio)
        for a, t, r in evals:
            if t == t_best:
                best_by_lifetime.add(tuple(sorted(a.mapping.items())))
            if r == r_best:
                best_by_ratio.add(tuple(sorted(a.mapping.items())))
        assert best_by_lifetime == best_by_ratio


def test_added_cost_additivity(rng):
    # dropping one request removes exactly its marginal terms
    for _ in range(20):
        s = random_small_scenario(rng)
        p = Problem(s)
        rows = p.requests
        if len(rows) < 2:
            continue
        hosts = [row.candidates[int(rng.integers(len(row.candidates)))] for row in rows]
        full = p.loads_umj(hosts)
        # drop the last request in chain order (no dependants)
        sub = Problem(_drop_last_request(s))
        sub_hosts = hosts[:-1]
        partial = sub.loads_umj(sub_hosts)
        for i in range(p.n_dev):
            assert full[i] >= partial[i]  # marginal cost is non-negative


def _drop_last_request(s: Scenario) -> Scenario:
    chains = sorted(s.chains, key=lambda c: (c.device, c.app))
    # remove the final step of the lexicographically last chain with max seq
    target = max(chains, key=lambda c: (len(c.steps), c.device, c.app))
    new_chains = []
    for c in s.chains:
        if c is target:
            if len(c.steps) == 1:
                continue
            new_chains.append(ChainSpec(device=c.device, app=c.app,
                                        steps=c.steps[:-1],
                                        pinned={k: v for k, v in c.pinned.items()
                                                if k < len(c.steps)}))
        else:
            new_chains.append(c)
    return Scenario(devices=s.devices, functions=s.functions, comm=s.comm,
                    chains=tuple(new_chains), interval=s.interval, rng_seed=s.rng_seed)


def test_all_local_total_added_equals_instance_costs(rng):
    for _ in range(20):
        s = random_small_scenario(rng)
        a = Assignment(mapping={rid: rid.device for rid in s.requests()})
        # requester always hosts its own types in these instances
        total = sum(added_cost(s, a, d.id) for d in s.devices)
        active = a.active_instances(s)
        expected = sum(s.instance(h, t).cost for h, t in active)
        assert total == pytest.approx(expected, rel=1e-9)


def test_chain_requester_rewrite():
    devs = (
        DeviceSpec(id="a", capacity=1.0),
        DeviceSpec(id="b", capacity=1.0),
        DeviceSpec(id="c", capacity=1.0),
    )
    s = Scenario(
        devices=devs,
        functions=(
            FunctionInstance("b", "s1", 10.0),
            FunctionInstance("c", "s2", 10.0),
        ),
        comm=CommCostModel(pairs={
            (x, y): (1.0, 2.0) for x in "abc" for y in "abc" if x != y
        }),
        chains=(ChainSpec(device="a", app="app", steps=("s1", "s2")),),
    )
    a = Assignment(mapping={
        RequestId("a", "app", 1): "b",
        RequestId("a", "app", 2): "c",
    })
    req = a.effective_requesters(s)
    assert req[RequestId("a", "app", 1)] == "a"
    assert req[RequestId("a", "app", 2)] == "b"  # not the origin device
    # device a pays only for the first hop; the second hop is b <-> c
    assert added_cost(s, a, "a") == pytest.approx(1.0)
    assert added_cost(s, a, "b") == pytest.approx(10.0 + 2.0 + 1.0)
    assert added_cost(s, a, "c") == pytest.approx(10.0 + 2.0)


def test_optimal_lifetime_monotone_in_requests(rng):
    # adding a request can only shrink the best achievable lifetime
    from conftest import oracle_best_lifetime

    for _ in range(8):
        s = random_small_scenario(rng)
        p = Problem(s)
        if p.combination_count() > 256 or len(p.requests) < 2:
            continue
        smaller = _drop_last_request(s)
        assert oracle_best_lifetime(smaller) >= oracle_best_lifetime(s) - 1e-9


def test_csv_rows():
    s = single_device_scenario()
    a = Assignment(mapping={rid: "solo" for rid in s.requests()})
    rep = system_lifetime(s, a)
    rows = rep.csv_rows()
    assert len(rows) == 1
    assert rows[0][0] == "solo" and rows[0][-1] == "true"
