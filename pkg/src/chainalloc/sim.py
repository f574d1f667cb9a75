"""Discrete-time battery simulator and experiment generators.

Episodes drain each attached device by its baseline-plus-added cost per
interval under the active assignment, recompute the assignment on a fixed
cadence and on every attach/detach/death, and end when the first Tier-1
device runs dry. All energy bookkeeping is integer µmJ, so traces conserve
energy exactly and are byte-reproducible.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import exact
from .errors import PolicyFailure
from .faa import faa_allocate
from .model import SCALE, CommCostModel, ChainSpec, DeviceSpec, FunctionInstance, Scenario, Tier
from .objective import Assignment, system_lifetime
from .problem import Problem

log = logging.getLogger(__name__)


class Policy(enum.Enum):
    FAA = "faa"
    OPTIMAL = "optimal"
    MANUAL = "manual"
    EACH = "each"
    AFV = "afv"  # reserved comparison slot, intentionally unimplemented


@dataclass(frozen=True)
class TraceEvent:
    t: int
    device: str  # "-" for system-wide events
    kind: str


@dataclass
class EpisodeTrace:
    policy: str
    seed: int
    device_ids: tuple[str, ...]
    samples: list[tuple[int, tuple[int, ...]]] = field(default_factory=list)  # µmJ after t
    events: list[TraceEvent] = field(default_factory=list)
    assignments: list[tuple[int, Assignment]] = field(default_factory=list)
    system_lifetime: int = 0
    cause: str | None = None

    def csv_rows(self) -> list[list]:
        rows = []
        marks = {(e.t, e.device): e.kind for e in self.events}
        for t, energies in self.samples:
            for d, e in zip(self.device_ids, energies):
                rows.append([t, d, repr(e / SCALE), marks.get((t, d), "")])
        for e in self.events:
            if e.device == "-":
                rows.append([e.t, "-", "", e.kind])
        rows.sort(key=lambda r: (r[0], r[1]))
        return rows


TRACE_CSV_HEADER = ["t", "device", "energy_mj", "event"]


def policy_assignment(
    s: Scenario,
    policy: Policy,
    problem: Problem,
    rng: np.random.Generator | None = None,
    cap: int = exact.DEFAULT_CAP,
) -> Assignment:
    """Compute an allocation for the current epoch state in `problem`."""
    if policy is Policy.FAA:
        assignment, _, _ = faa_allocate(s, problem=problem)
        return assignment
    if policy is Policy.OPTIMAL:
        return exact.optimal_solve(s, problem=problem, cap=cap).assignment
    if policy is Policy.EACH:
        mapping = {}
        for row in problem.requests:
            if row.origin not in row.candidates:
                raise PolicyFailure(0, f"{row.rid} cannot run on its own device")
            mapping[row.rid] = problem.dev_ids[row.origin]
        return Assignment(mapping=mapping)
    if policy is Policy.MANUAL:
        if rng is None:
            rng = np.random.default_rng(s.rng_seed)
        mapping = {}
        for row in problem.requests:
            pick = row.candidates[int(rng.integers(len(row.candidates)))]
            mapping[row.rid] = problem.dev_ids[pick]
        return Assignment(mapping=mapping)
    raise NotImplementedError(f"policy {policy.value} has no implementation")


def allocate_static(
    s: Scenario, policy: Policy, seed: int | None = None,
    cap: int = exact.DEFAULT_CAP,
) -> tuple[Assignment, float]:
    """One-shot allocation on the scenario's initial state; returns lifetime too."""
    p = Problem(s)
    rng = np.random.default_rng([seed if seed is not None else s.rng_seed, 0x5EED])
    a = policy_assignment(s, policy, p, rng=rng, cap=cap)
    return a, system_lifetime(s, a, problem=p).system_lifetime


def run_episode(
    s: Scenario,
    policy: Policy,
    realloc_every: int = 30,
    seed: int | None = None,
    max_intervals: int = 10_000_000,
    cap: int = exact.DEFAULT_CAP,
) -> EpisodeTrace:
    """Simulate one episode until the first Tier-1 device dies."""
    if realloc_every < 1:
        raise ValueError("realloc_every must be >= 1")
    base_seed = seed if seed is not None else s.rng_seed
    rng = np.random.default_rng([base_seed, 0xA110C])
    trace = EpisodeTrace(
        policy=policy.value, seed=base_seed,
        device_ids=tuple(d.id for d in s.devices),
    )
    energies = [Problem(s).energy[i] for i in range(len(s.devices))]
    alive = [True] * len(s.devices)
    tier1 = [d.tier is Tier.TIER1 for d in s.devices]

    assignment: Assignment | None = None
    loads: list[int] | None = None
    prev_attached: set[str] | None = None
    t = 0
    while t < max_intervals:
        attached = {
            d.id for i, d in enumerate(s.devices) if alive[i] and d.attached_at(t)
        }
        if prev_attached is not None:
            for d in sorted(attached - prev_attached):
                trace.events.append(TraceEvent(t, d, "attach"))
            for d in sorted(prev_attached - attached):
                trace.events.append(TraceEvent(t, d, "detach"))

        need_realloc = (
            assignment is None
            or t % realloc_every == 0
            or attached != prev_attached
        )
        prev_attached = attached

        while True:
            if need_realloc:
                p = Problem(s, energies_umj=list(energies), attached=attached)
                if any(not row.candidates for row in p.requests):
                    raise PolicyFailure(t, "a requested function type has no live host")
                assignment = policy_assignment(s, policy, p, rng=rng, cap=cap)
                loads = p.loads_umj([
                    p.dev_index[assignment.mapping[row.rid]] for row in p.requests
                ])
                trace.events.append(TraceEvent(t, "-", "realloc"))
                trace.assignments.append((t, assignment))
                log.debug("t=%d realloc under %s: %d requests, %d devices attached",
                          t, policy.value, len(assignment.mapping), len(attached))
                need_realloc = False
            # deaths: devices whose next interval cannot be funded
            dying = [
                i for i, d in enumerate(s.devices)
                if d.id in attached and loads[i] > energies[i]
            ]
            dead_tier1 = [i for i in dying if tier1[i]]
            if dead_tier1:
                i = min(dead_tier1, key=lambda i: s.devices[i].id)
                trace.events.append(TraceEvent(t, s.devices[i].id, "death"))
                trace.system_lifetime = t
                trace.cause = s.devices[i].id
                log.info("episode over at t=%d: %s depleted (%s policy)",
                         t, s.devices[i].id, policy.value)
                return trace
            if not dying:
                break
            for i in dying:
                alive[i] = False
                attached.discard(s.devices[i].id)
                trace.events.append(TraceEvent(t, s.devices[i].id, "death"))
            prev_attached = attached
            need_realloc = True  # re-home the dead device's functions

        for i, d in enumerate(s.devices):
            if d.id in attached:
                energies[i] -= loads[i]
        trace.samples.append((t, tuple(energies)))
        t += 1

    trace.system_lifetime = max_intervals
    trace.cause = None
    trace.events.append(TraceEvent(max_intervals, "-", "truncated"))
    return trace


# ---------------------------------------------------------------------------
# randomized ensemble (performance-analysis setup)

@dataclass(frozen=True)
class EnsembleConfig:
    """Random-scenario family: replicated function types on a small device pool."""

    n_devices: int = 3
    functions_per_device: int = 6
    capacities_mah: tuple[float, ...] = (400.0, 450.0, 500.0)
    mean_cost_mj: float = 200.0       # per-interval function cost average
    sigma_fraction: float = 0.1       # sigma = fraction * mean, truncated > 0
    data_kb_per_interval: float = 13.5
    comm_idle_fraction: float = 0.8   # idle share of the per-function comm cost
    baseline_drain_mj: float = 1200.0  # standby drain, ~3 days on the smallest battery
    voltage: float = 3.8
    interval_s: float = 60.0

    def __post_init__(self):
        if self.n_devices != len(self.capacities_mah):
            raise ValueError("one capacity per device required")
        if not 0 <= self.comm_idle_fraction < 1:
            raise ValueError("idle fraction must be in [0, 1)")


def generate_ensemble(cfg: EnsembleConfig, seed: int, count: int = 1) -> list[Scenario]:
    """Deterministic scenario batch: every device hosts every type and runs one
    chain over all types; per-function comm transfer splits evenly between the
    endpoints while the idle share is charged once per communicating device."""
    # one remote invocation costs comm_total system-wide: the transfer part and
    # the idle part both split evenly between the two endpoints
    comm_total = cfg.mean_cost_mj
    transfer = comm_total * (1.0 - cfg.comm_idle_fraction)
    idle = comm_total * cfg.comm_idle_fraction / 2.0
    types = [f"f{k:02d}" for k in range(1, cfg.functions_per_device + 1)]
    dev_ids = [f"dev{k}" for k in range(1, cfg.n_devices + 1)]

    out = []
    for j in range(count):
        rng = np.random.default_rng([seed, j])
        devices = tuple(
            DeviceSpec(
                id=dev_ids[i],
                tier=Tier.TIER1,
                capacity=cfg.capacities_mah[i],
                voltage=cfg.voltage,
                initial_charge=1.0,
                baseline_drain=cfg.baseline_drain_mj,
                idle_cost=idle,
            )
            for i in range(cfg.n_devices)
        )
        functions = []
        for d in dev_ids:
            for ftype in types:
                cost = 0.0
                while cost <= 0.0:
                    cost = float(rng.normal(cfg.mean_cost_mj,
                                            cfg.sigma_fraction * cfg.mean_cost_mj))
                functions.append(FunctionInstance(host=d, ftype=ftype, cost=round(cost, 3)))
        pairs = {
            (a, b): (transfer / 2.0, transfer / 2.0)
            for a in dev_ids for b in dev_ids if a != b
        }
        chains = tuple(
            ChainSpec(device=d, app="chain", steps=tuple(types)) for d in dev_ids
        )
        out.append(Scenario(
            devices=devices,
            functions=tuple(functions),
            comm=CommCostModel(pairs=pairs),
            chains=chains,
            interval=cfg.interval_s,
            rng_seed=seed + j,
        ))
    return out


# ---------------------------------------------------------------------------
# sweeps

@dataclass(frozen=True)
class SweepSpec:
    """One-dimensional experiment: vary a scenario knob, compare policies."""

    kind: str                      # "charge" | "availability"
    devices: tuple[str, ...]       # devices the knob applies to
    values: tuple[float, ...]
    policies: tuple[Policy, ...] = (Policy.FAA, Policy.MANUAL)
    realloc_every: int = 30
    seed: int = 0
    cap: int = exact.DEFAULT_CAP

    def __post_init__(self):
        if self.kind not in ("charge", "availability"):
            raise ValueError(f"unknown sweep kind {self.kind!r}")
        if not self.values:
            raise ValueError("empty sweep range")


def apply_sweep_point(base: Scenario, spec: SweepSpec, value: float) -> Scenario:
    devices = []
    for d in base.devices:
        if d.id in spec.devices:
            if spec.kind == "charge":
                d = replace(d, initial_charge=value / 100.0)
            else:
                # availability duration; zero-length windows never attach
                window = (0, int(value)) if value > 0 else (-1, 0)
                d = replace(d, availability=window)
        devices.append(d)
    return replace(base, devices=tuple(devices))


@dataclass(frozen=True)
class SweepRow:
    policy: str
    sweep_value: float
    lifetime: int
    increment_pct_vs_each: float

    def csv_row(self) -> list:
        return [self.policy, repr(self.sweep_value), self.lifetime,
                repr(self.increment_pct_vs_each)]


SWEEP_CSV_HEADER = ["policy", "sweep_param", "system_lifetime_intervals",
                    "increment_pct_vs_each"]


def run_usecase_sweep(base: Scenario, spec: SweepSpec) -> list[SweepRow]:
    """Episode lifetimes per (policy, sweep point), with increments over EACH."""
    rows: list[SweepRow] = []
    for value in spec.values:
        scenario = apply_sweep_point(base, spec, value)
        each = run_episode(scenario, Policy.EACH, spec.realloc_every, seed=spec.seed)
        rows.append(SweepRow(Policy.EACH.value, value, each.system_lifetime, 0.0))
        for policy in spec.policies:
            if policy is Policy.EACH:
                continue
            ep = run_episode(scenario, policy, spec.realloc_every, seed=spec.seed,
                             cap=spec.cap)
            inc = (math.inf if each.system_lifetime == 0
                   else 100.0 * (ep.system_lifetime - each.system_lifetime)
                   / each.system_lifetime)
            rows.append(SweepRow(policy.value, value, ep.system_lifetime, inc))
    rows.sort(key=lambda r: (r.sweep_value, r.policy))
    return rows


@dataclass(frozen=True)
class EnsembleRow:
    functions_per_device: int
    policy: str
    mean_lifetime: float
    mean_increment_pct_vs_each: float

    def csv_row(self) -> list:
        return [self.functions_per_device, self.policy, repr(self.mean_lifetime),
                repr(self.mean_increment_pct_vs_each)]


ENSEMBLE_CSV_HEADER = ["functions_per_device", "policy", "mean_lifetime_intervals",
                       "mean_increment_pct_vs_each"]


def run_ensemble_sweep(
    lengths: tuple[int, ...],
    seeds: tuple[int, ...],
    policies: tuple[Policy, ...] = (Policy.FAA, Policy.MANUAL),
    cfg: EnsembleConfig | None = None,
    cap: int = exact.DEFAULT_CAP,
) -> list[EnsembleRow]:
    """Static-allocation lifetime comparison on the random ensemble.

    For each chain length, every policy is evaluated on the same seeds and the
    mean percentage increment over EACH is reported.
    """
    rows: list[EnsembleRow] = []
    for length in lengths:
        c = EnsembleConfig(functions_per_device=length) if cfg is None else \
            replace(cfg, functions_per_device=length)
        sums: dict[str, float] = {p.value: 0.0 for p in policies}
        sums[Policy.EACH.value] = 0.0
        incs: dict[str, float] = {p.value: 0.0 for p in policies}
        for seed in seeds:
            scenario = generate_ensemble(c, seed)[0]
            _, each_life = allocate_static(scenario, Policy.EACH)
            sums[Policy.EACH.value] += each_life
            for policy in policies:
                if policy is Policy.EACH:
                    continue
                _, life = allocate_static(scenario, policy, seed=seed, cap=cap)
                sums[policy.value] += life
                incs[policy.value] += 100.0 * (life - each_life) / each_life
        n = len(seeds)
        rows.append(EnsembleRow(length, Policy.EACH.value,
                                sums[Policy.EACH.value] / n, 0.0))
        for policy in policies:
            if policy is Policy.EACH:
                continue
            rows.append(EnsembleRow(length, policy.value, sums[policy.value] / n,
                                    incs[policy.value] / n))
    rows.sort(key=lambda r: (r.functions_per_device, r.policy))
    return rows
