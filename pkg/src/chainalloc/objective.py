"""Assignment evaluation: added per-device cost, lifetimes, constraint checking.

Every solver funnels its result through these functions, so they are the single
source of truth for what an allocation costs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import InvalidAssignment
from .model import SCALE, RequestId, Scenario, Tier
from .problem import Problem


@dataclass(frozen=True)
class Assignment:
    """Maps every request to exactly one hosting device."""

    mapping: dict[RequestId, str] = field(default_factory=dict)

    def host_of(self, rid: RequestId) -> str:
        return self.mapping[rid]

    def active_instances(self, s: Scenario) -> set[tuple[str, str]]:
        """(host, ftype) pairs switched on by this assignment."""
        out = set()
        for rid, host in self.mapping.items():
            out.add((host, s.chain_of(rid).ftype(rid.seq)))
        return out

    def effective_requesters(self, s: Scenario) -> dict[RequestId, str]:
        """Requester of each request after chain rewriting.

        The first step of a chain is requested by the chain's origin device;
        every later step is requested by the performer of the previous step.
        """
        out = {}
        for rid in self.mapping:
            if rid.seq == 1:
                out[rid] = rid.device
            else:
                prev = RequestId(rid.device, rid.app, rid.seq - 1)
                if prev not in self.mapping:
                    raise InvalidAssignment(f"request {prev} unmapped but {rid} mapped")
                out[rid] = self.mapping[prev]
        return out

    def comm_flags(self, s: Scenario) -> dict[str, bool]:
        """Per device: does any cross-device traffic touch it."""
        flags = {d.id: False for d in s.devices}
        req_of = self.effective_requesters(s)
        for rid, host in self.mapping.items():
            q = req_of[rid]
            if q != host:
                flags[q] = True
                flags[host] = True
        return flags


@dataclass(frozen=True)
class DeviceLifetime:
    device: str
    energy_mj: float
    baseline_mj: float
    added_mj: float
    lifetime: float  # intervals; inf when total drain is zero
    tier: Tier


@dataclass(frozen=True)
class LifetimeReport:
    """Per-device lifetimes plus the Tier-1 system lifetime and its bottleneck."""

    devices: tuple[DeviceLifetime, ...]
    system_lifetime: float
    bottleneck: str

    def lifetime_of(self, device_id: str) -> float:
        for row in self.devices:
            if row.device == device_id:
                return row.lifetime
        raise KeyError(device_id)

    def csv_rows(self) -> list[list]:
        return [
            [d.device, repr(d.energy_mj), repr(d.baseline_mj), repr(d.added_mj),
             repr(d.lifetime), str(d.device == self.bottleneck).lower()]
            for d in self.devices
        ]


CSV_HEADER = ["device", "E_mj", "C_mj", "A_mj", "lifetime_intervals", "bottleneck"]


def _hosts_vector(p: Problem, a: Assignment) -> list[int]:
    hosts = []
    for row in p.requests:
        if row.rid not in a.mapping:
            raise InvalidAssignment(f"request {row.rid} is unmapped")
        hosts.append(p.dev_index[a.mapping[row.rid]])
    if len(a.mapping) != len(p.requests):
        raise InvalidAssignment("assignment maps unknown requests")
    return hosts


def added_cost(s: Scenario, a: Assignment, device: str, problem: Problem | None = None) -> float:
    """Added drain in mJ per interval: active instance costs on the device, request-side
    comm for its remotely served requests, serve-side comm for remote requests it
    hosts, and its idle charge when any link stays open."""
    p = problem or Problem(s)
    loads = p.loads_umj(_hosts_vector(p, a))
    i = p.dev_index[device]
    return (loads[i] - p.base[i]) / SCALE


def system_lifetime(s: Scenario, a: Assignment, problem: Problem | None = None) -> LifetimeReport:
    """Per-device lifetime = energy / (baseline + added); system lifetime is the Tier-1 minimum."""
    p = problem or Problem(s)
    loads = p.loads_umj(_hosts_vector(p, a))
    rows = []
    for i, d in enumerate(s.devices):
        drain = loads[i]
        lifetime = math.inf if drain == 0 else p.energy[i] / drain
        rows.append(DeviceLifetime(
            device=d.id,
            energy_mj=p.energy[i] / SCALE,
            baseline_mj=p.base[i] / SCALE,
            added_mj=(loads[i] - p.base[i]) / SCALE,
            lifetime=lifetime,
            tier=d.tier,
        ))
    tier1 = [r for r in rows if r.tier is Tier.TIER1]
    best = min(r.lifetime for r in tier1)
    bottleneck = min(r.device for r in tier1 if r.lifetime == best)
    return LifetimeReport(devices=tuple(rows), system_lifetime=best, bottleneck=bottleneck)


@dataclass(frozen=True)
class ConstraintReport:
    violations: tuple[tuple[int, str], ...]

    @property
    def feasible(self) -> bool:
        return not self.violations

    def violated(self, number: int) -> bool:
        return any(n == number for n, _ in self.violations)


def check_constraints(s: Scenario, a: Assignment, problem: Problem | None = None) -> ConstraintReport:
    """List every violated allocation constraint by number.

    1 binary indicators, 2 zero self-comm, 5 request/serve pairing, 6 activation
    and 7 idle flags are satisfied by construction of Assignment; what can
    actually break is 3 (host owns no instance of the type), 4 (request not
    mapped exactly once) and 8 (minimum-lifetime budget).
    """
    p = problem or Problem(s)
    violations: list[tuple[int, str]] = []
    hosted = {(f.host, f.ftype) for f in s.functions}
    mapped = set(a.mapping)
    for row in p.requests:
        if row.rid not in mapped:
            violations.append((4, f"request {row.rid} is unmapped"))
    for rid in sorted(mapped - {row.rid for row in p.requests}):
        violations.append((4, f"mapping names unknown request {rid}"))
    for rid, host in sorted(a.mapping.items()):
        if rid in {row.rid for row in p.requests}:
            ftype = s.chain_of(rid).ftype(rid.seq)
            if (host, ftype) not in hosted:
                violations.append((3, f"{rid} mapped to {host!r} which owns no {ftype!r}"))
    if not any(n in (3, 4) for n, _ in violations):
        loads = p.loads_umj(_hosts_vector(p, a))
        for i, (d, tstar) in enumerate(zip(s.devices, p.min_lifetime)):
            # exact form of drain/energy <= 1/min_lifetime, matching the solvers
            if tstar is not None and loads[i] * tstar.numerator > p.energy[i] * tstar.denominator:
                lifetime = math.inf if loads[i] == 0 else p.energy[i] / loads[i]
                violations.append((
                    8,
                    f"device {d.id!r} lifetime {lifetime:.3f} < required {d.min_lifetime}",
                ))
    return ConstraintReport(violations=tuple(violations))
