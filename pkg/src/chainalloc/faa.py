"""Greedy function allocation with chain orchestration.

Requests are allocated per chain-sequence level. Within a level, forced steps
(pinned hosts, single-host types) go first, then each remaining type is
allocated by repeatedly picking the (instance, request set) that loses the
least system lifetime per assigned request. Once an instance is switched on
its execution cost is sunk (treated as zero for later requests), and a
device's idle charge is latched the first time it communicates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import BrokenChain, MinLifetimeViolated
from .model import ChainSpec, RequestId, Scenario
from .objective import Assignment, LifetimeReport, system_lifetime
from .problem import Problem


@dataclass(frozen=True)
class OrchestrationLogEntry:
    """One executed chain step: who asked, who performed."""

    chain_device: str
    app: str
    seq: int
    ftype: str
    requester: str
    performer: str


LOG_CSV_HEADER = ["chain_device", "app", "seq", "ftype", "requester", "performer"]


def log_csv_rows(log: list[OrchestrationLogEntry]) -> list[list]:
    return [[e.chain_device, e.app, e.seq, e.ftype, e.requester, e.performer] for e in log]


class FaaState:
    """Mutable working state of one allocation run."""

    def __init__(self, p: Problem):
        self.p = p
        self.drain = list(p.base)          # per device, baseline plus folded-in assigned costs (µmJ)
        self.latched = [False] * p.n_dev    # idle cost charged at most once per device
        self.active: set[tuple[int, int]] = set()  # (device, type) instances switched on
        self.hosts = [-1] * p.n_requests
        self.unassigned: set[int] = set(range(p.n_requests))
        self.frontier: set[int] | None = None  # restrict selection to one chain level
        self.lifetime = self.current_lifetime()

    def eligible(self, r: int) -> bool:
        if self.frontier is not None:
            return r in self.frontier
        prev = self.p.requests[r].prev
        return prev < 0 or self.hosts[prev] >= 0

    def current_lifetime(self) -> float:
        p = self.p
        best = math.inf
        for i in range(p.n_dev):
            if p.tier1[i] and p.attached[i]:
                t = math.inf if self.drain[i] == 0 else p.energy[i] / self.drain[i]
                best = min(best, t)
        return best

    def device_lifetime(self, d: int) -> float:
        return math.inf if self.drain[d] == 0 else self.p.energy[d] / self.drain[d]

    def requester_of(self, r: int) -> int:
        row = self.p.requests[r]
        if row.prev < 0:
            return row.origin
        q = self.hosts[row.prev]
        if q < 0:
            raise BrokenChain(f"step before {row.rid} not yet assigned")
        return q

    def marginal(self, r: int, h: int, extra: dict[int, int],
                 active_extra: set[tuple[int, int]], latched_extra: set[int]) -> None:
        """Accumulate into `extra` the µmJ this assignment adds per device."""
        p = self.p
        row = self.p.requests[r]
        t = row.type_idx
        if (h, t) not in self.active and (h, t) not in active_extra:
            extra[h] = extra.get(h, 0) + p.fcost[h][t]
            active_extra.add((h, t))
        q = self.requester_of(r)
        if q != h:
            extra[h] = extra.get(h, 0) + p.comm_srv[h][q][t]
            extra[q] = extra.get(q, 0) + p.comm_req[h][q][t]
            for d in (q, h):
                if not self.latched[d] and d not in latched_extra:
                    extra[d] = extra.get(d, 0) + p.idle[d]
                    latched_extra.add(d)

    def lifetime_with(self, extra: dict[int, int]) -> float:
        p = self.p
        best = math.inf
        for i in range(p.n_dev):
            if p.tier1[i] and p.attached[i]:
                c = self.drain[i] + extra.get(i, 0)
                t = math.inf if c == 0 else p.energy[i] / c
                best = min(best, t)
        return best

    def assign(self, r: int, h: int) -> None:
        """Fold one request's costs into the device drains for good."""
        p = self.p
        row = p.requests[r]
        t = row.type_idx
        if (h, t) not in self.active:
            self.active.add((h, t))
            self.drain[h] += p.fcost[h][t]  # instance cost sunk from now on
        q = self.requester_of(r)
        if q != h:
            self.drain[h] += p.comm_srv[h][q][t]
            self.drain[q] += p.comm_req[h][q][t]
            for d in (q, h):
                if not self.latched[d]:
                    self.latched[d] = True
                    self.drain[d] += p.idle[d]
        self.hosts[r] = h
        self.unassigned.discard(r)
        self.lifetime = self.current_lifetime()


def _score(before: float, after: float, size: int) -> float:
    """Per-request lifetime reduction; 0 when nothing is lost."""
    if after == before:
        return 0.0
    if math.isinf(before):
        return math.inf
    return (before - after) / size


def select_candidate(state: FaaState, ftype: str) -> tuple[tuple[str, str], list[RequestId], float]:
    """Best (instance, request set, new lifetime) for one function type.

    For every instance of the type, unassigned requests are ordered host-local
    first, then by ascending communication cost, and every prefix of that order
    is scored by lifetime reduction per request. Ties prefer more requests,
    then the host with the larger remaining lifetime, then the smaller host id.
    """
    p = state.p
    t = p.type_index[ftype]
    pending = sorted(
        (r for r in state.unassigned
         if p.requests[r].type_idx == t and state.eligible(r)),
        key=lambda r: p.requests[r].rid,
    )
    if not pending:
        raise ValueError(f"no unassigned requests of type {ftype!r}")
    hosts = sorted(
        {h for r in pending for h in p.requests[r].candidates},
        key=lambda h: p.dev_ids[h],
    )
    best = None  # (score, -size, -host_lifetime, host_id, host, prefix, t_new)
    for h in hosts:
        doable = [r for r in pending if h in p.requests[r].candidates]
        ordered = sorted(doable, key=lambda r: (
            0 if state.requester_of(r) == h else 1,
            p.comm_req[h][state.requester_of(r)][t] + p.comm_srv[h][state.requester_of(r)][t],
            p.requests[r].rid,
        ))
        extra: dict[int, int] = {}
        active_extra: set[tuple[int, int]] = set()
        latched_extra: set[int] = set()
        prefix: list[int] = []
        for r in ordered:
            state.marginal(r, h, extra, active_extra, latched_extra)
            prefix.append(r)
            t_new = state.lifetime_with(extra)
            key = (
                _score(state.lifetime, t_new, len(prefix)),
                -len(prefix),
                -state.device_lifetime(h),
                p.dev_ids[h],
            )
            if best is None or key < best[:4]:
                best = key + (h, list(prefix), t_new)
    h, prefix, t_new = best[4], best[5], best[6]
    instance = (p.dev_ids[h], ftype)
    return instance, [p.requests[r].rid for r in prefix], t_new


def faa_allocate(
    s: Scenario,
    problem: Problem | None = None,
) -> tuple[Assignment, list[OrchestrationLogEntry], LifetimeReport]:
    """Allocate every request; returns (assignment, orchestration log, lifetimes).

    Raises MinLifetimeViolated when the result breaks a device's required
    minimum lifetime (reported, never silently relaxed).
    """
    p = problem or Problem(s)
    state = FaaState(p)

    seqs = sorted({row.rid.seq for row in p.requests})
    for seq in seqs:
        level = [r for r in range(p.n_requests)
                 if p.requests[r].rid.seq == seq and r in state.unassigned]
        state.frontier = set(level)
        # forced steps first: pinned hosts and single-host types have no decision
        for r in sorted(level, key=lambda r: p.requests[r].rid):
            if len(p.requests[r].candidates) == 1:
                state.assign(r, p.requests[r].candidates[0])
        remaining_types = sorted(
            {p.requests[r].type_idx for r in level if r in state.unassigned},
            key=lambda t: (-sum(p.fcost[d][t] for d in range(p.n_dev) if p.fcost[d][t] >= 0),
                           p.type_ids[t]),
        )
        for t in remaining_types:
            while any(r in state.unassigned and p.requests[r].type_idx == t for r in level):
                (host_id, _), rids, _ = select_candidate(state, p.type_ids[t])
                h = p.dev_index[host_id]
                for rid in rids:
                    state.assign(p.request_index(rid), h)
    state.frontier = None

    assignment = Assignment(mapping={
        row.rid: p.dev_ids[state.hosts[i]] for i, row in enumerate(p.requests)
    })
    report = system_lifetime(s, assignment, problem=p)
    loads = p.loads_umj(list(state.hosts))
    for i, d in enumerate(s.devices):
        tstar = p.min_lifetime[i]
        if tstar is not None and loads[i] * tstar.numerator > p.energy[i] * tstar.denominator:
            lifetime = math.inf if loads[i] == 0 else p.energy[i] / loads[i]
            raise MinLifetimeViolated(d.id, lifetime, d.min_lifetime)
    log = orchestrate_log(assignment, s.chains)
    return assignment, log, report


def orchestrate_log(
    assignment: Assignment,
    chains: tuple[ChainSpec, ...] | list[ChainSpec],
) -> list[OrchestrationLogEntry]:
    """Per-chain execution log; requesters are rewritten along each chain."""
    entries = []
    for chain in sorted(chains, key=lambda c: (c.device, c.app)):
        performer_before = chain.device
        for seq in range(1, len(chain.steps) + 1):
            rid = RequestId(chain.device, chain.app, seq)
            if rid not in assignment.mapping:
                raise BrokenChain(f"chain step {rid} has no performer")
            performer = assignment.mapping[rid]
            entries.append(OrchestrationLogEntry(
                chain_device=chain.device,
                app=chain.app,
                seq=seq,
                ftype=chain.ftype(seq),
                requester=performer_before,
                performer=performer,
            ))
            performer_before = performer
    return entries
