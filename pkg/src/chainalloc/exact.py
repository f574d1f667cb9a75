"""Optimal solvers: exhaustive enumeration and branch-and-bound.

Costs are compared as exact rationals (integer µmJ loads over integer µmJ
energies), which makes "both solvers return the identical objective" a
bit-exact statement. Instances too large for the exact Python engine are
handed to the float kernel in `kernels` (full enumeration for brute force,
pruned search for `optimal_solve`).
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import Infeasible, TooLarge
from .model import Scenario
from .objective import Assignment, LifetimeReport, system_lifetime
from .problem import Problem
from . import kernels

log = logging.getLogger(__name__)

DEFAULT_CAP = 10**8
# above this combination count the exact Python engine gives way to the kernel
EXACT_ENGINE_LIMIT = 200_000


@dataclass
class SearchStats:
    """Counters describing one solver run."""

    nodes_expanded: int = 0
    assignments_evaluated: int = 0
    pruned: int = 0
    wall_time: float = 0.0

    def csv_row(self) -> list:
        return [self.nodes_expanded, self.assignments_evaluated, self.pruned,
                repr(self.wall_time * 1000.0)]


STATS_CSV_HEADER = ["nodes", "evaluated", "pruned", "ms"]


@dataclass
class BBNode:
    """Snapshot of one expanded branch-and-bound node (recorded on request)."""

    statuses: dict[tuple[str, str], str]  # (host, ftype) -> open | closed | unknown
    partial: dict = field(default_factory=dict)  # RequestId -> host id
    lower_bound: Fraction = Fraction(0)
    upper_bound: Fraction | None = None  # None = no feasible completion found


@dataclass
class SolveResult:
    solver: str
    assignment: Assignment
    report: LifetimeReport
    stats: SearchStats
    objective: Fraction  # exact max Tier-1 drain/energy ratio, 1/intervals


def combination_count(s: Scenario) -> int:
    """Number of assignment combinations (product of per-request host choices)."""
    return Problem(s).combination_count()


class _IntSearch:
    """Incremental exact evaluator over the integer µmJ cost model."""

    def __init__(self, p: Problem):
        self.p = p
        self.loads = list(p.base)
        self.active = [[0] * p.n_types for _ in range(p.n_dev)]
        self.comm = [0] * p.n_dev
        self.hosts = [-1] * p.n_requests
        self.n_active = 0
        self._undo: list[tuple[int, int, int, int]] = []
        self.all_tier1 = all(t and a for t, a in zip(p.tier1, p.attached))
        self.sum_e = sum(e for e, t in zip(p.energy, p.tier1) if t)
        self.total = sum(c for c, t in zip(p.base, p.tier1) if t)
        self.remaining = [0] * p.n_types
        for row in p.requests:
            self.remaining[row.type_idx] += 1
        self.min_fcost = []
        for t in range(p.n_types):
            costs = [p.fcost[d][t] for d in range(p.n_dev) if p.fcost[d][t] >= 0]
            self.min_fcost.append(min(costs) if costs else 0)
        self.future_f = sum(self.min_fcost[t] for t in range(p.n_types) if self.remaining[t] > 0)
        self.type_active = [0] * p.n_types

    def push(self, r: int, h: int) -> None:
        p = self.p
        row = p.requests[r]
        t = row.type_idx
        self.remaining[t] -= 1
        if self.type_active[t] == 0 and self.remaining[t] == 0:
            self.future_f -= self.min_fcost[t]
        q = row.origin if row.prev < 0 else self.hosts[row.prev]
        dh = 0
        dq = 0
        self.active[h][t] += 1
        if self.active[h][t] == 1:
            dh += p.fcost[h][t]
            self.n_active += 1
            self.type_active[t] += 1
            if self.type_active[t] == 1 and self.remaining[t] > 0:
                self.future_f -= self.min_fcost[t]
        if q != h:
            dh += p.comm_srv[h][q][t]
            dq += p.comm_req[h][q][t]
            self.comm[q] += 1
            self.comm[h] += 1
            if self.comm[q] == 1:
                dq += p.idle[q]
            if self.comm[h] == 1:
                dh += p.idle[h]
        self.loads[h] += dh
        self.loads[q] += dq
        if p.tier1[h]:
            self.total += dh
        if p.tier1[q]:
            self.total += dq
        self.hosts[r] = h
        self._undo.append((r, q, dq, dh))

    def pop(self) -> None:
        p = self.p
        r, q, dq, dh = self._undo.pop()
        h = self.hosts[r]
        t = p.requests[r].type_idx
        self.loads[h] -= dh
        self.loads[q] -= dq
        if p.tier1[h]:
            self.total -= dh
        if p.tier1[q]:
            self.total -= dq
        self.active[h][t] -= 1
        if self.active[h][t] == 0:
            self.n_active -= 1
            self.type_active[t] -= 1
            if self.type_active[t] == 0 and self.remaining[t] > 0:
                self.future_f += self.min_fcost[t]
        if q != h:
            self.comm[q] -= 1
            self.comm[h] -= 1
        if self.type_active[t] == 0 and self.remaining[t] == 0:
            self.future_f += self.min_fcost[t]
        self.remaining[t] += 1
        self.hosts[r] = -1

    def partial_infeasible(self) -> bool:
        p = self.p
        for i, tstar in enumerate(p.min_lifetime):
            if tstar is not None and self.loads[i] * tstar.numerator > p.energy[i] * tstar.denominator:
                return True
        return False

    def max_ratio(self) -> tuple[int, int]:
        """Current max Tier-1 load/E as an unreduced (num, den) pair."""
        p = self.p
        bn, bd = 0, 1
        for i in range(p.n_dev):
            if p.tier1[i] and p.attached[i] and self.loads[i] * bd > bn * p.energy[i]:
                bn, bd = self.loads[i], p.energy[i]
        return bn, bd

    def lower_bound(self) -> tuple[int, int]:
        """Admissible bound on the best completion cost from this node."""
        bn, bd = self.max_ratio()
        if self.all_tier1:
            # loads only grow; unactivated types must pay at least their cheapest f
            an, ad = self.total + self.future_f, self.sum_e
            if an * bd > bn * ad:
                bn, bd = an, ad
        return bn, bd


def _ratio_gt(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return a[0] * b[1] > b[0] * a[1]


def _hosts_to_assignment(p: Problem, hosts: list[int]) -> Assignment:
    return Assignment(mapping={
        row.rid: p.dev_ids[hosts[i]] for i, row in enumerate(p.requests)
    })


def _finish(solver: str, s: Scenario, p: Problem, hosts: list[int],
            stats: SearchStats, t0: float) -> SolveResult:
    loads = p.loads_umj(hosts)
    stats.wall_time = time.perf_counter() - t0
    log.debug("%s: %d evaluated, %d expanded, %d pruned, %.1f ms",
              solver, stats.assignments_evaluated, stats.nodes_expanded,
              stats.pruned, stats.wall_time * 1000.0)
    assignment = _hosts_to_assignment(p, hosts)
    return SolveResult(
        solver=solver,
        assignment=assignment,
        report=system_lifetime(s, assignment, problem=p),
        stats=stats,
        objective=p.objective(loads),
    )


def brute_force_solve(
    s: Scenario,
    cap: int = DEFAULT_CAP,
    problem: Problem | None = None,
    backend: str | None = None,
) -> SolveResult:
    """Evaluate every assignment combination and keep the best system lifetime.

    Ties break toward fewer active instances, then the lexicographically
    smallest mapping (guaranteed on the exact engine; the large-instance kernel
    keeps the first optimum in enumeration order).
    """
    t0 = time.perf_counter()
    p = problem or Problem(s)
    k = p.combination_count()
    if k > cap:
        raise TooLarge(k, cap)
    if any(not row.candidates for row in p.requests):
        raise Infeasible("a request has no available host")

    if k > EXACT_ENGINE_LIMIT:
        value, hosts, found, leaves, internal, _ = kernels.kernel_search(
            p, prune=False, backend=backend)
        if not found:
            raise Infeasible("every assignment violates a minimum-lifetime requirement")
        stats = SearchStats(nodes_expanded=internal, assignments_evaluated=leaves)
        return _finish("brute", s, p, hosts, stats, t0)

    eng = _IntSearch(p)
    m = p.n_requests
    best: tuple[tuple[int, int], int, list[int]] | None = None  # (ratio, n_active, hosts)
    leaves = 0
    internal = 0
    ci = [0] * (m + 1)
    r = 0
    while r >= 0:
        if r == m:
            leaves += 1
            if not eng.partial_infeasible():
                val = eng.max_ratio()
                if (best is None or _ratio_gt(best[0], val)
                        or (not _ratio_gt(val, best[0]) and eng.n_active < best[1])):
                    best = (val, eng.n_active, list(eng.hosts))
            r -= 1
            continue
        cands = p.requests[r].candidates
        if ci[r] > 0:
            eng.pop()
        if ci[r] >= len(cands):
            ci[r] = 0
            r -= 1
            continue
        if ci[r] == 0 and len(cands) >= 2:
            internal += 1
        eng.push(r, cands[ci[r]])
        ci[r] += 1
        r += 1
    if best is None:
        raise Infeasible("every assignment violates a minimum-lifetime requirement")
    stats = SearchStats(nodes_expanded=internal, assignments_evaluated=leaves)
    return _finish("brute", s, p, hosts=best[2], stats=stats, t0=t0)


def _greedy_completion(eng: _IntSearch, depth: int) -> tuple[tuple[int, int] | None, list[int]]:
    """Cheapest-marginal completion of a partial assignment; exact value or None."""
    p = eng.p
    pushed = 0
    for r in range(depth, p.n_requests):
        best_h = None
        best_key: tuple[int, int] | None = None
        for h in p.requests[r].candidates:
            eng.push(r, h)
            key = eng.max_ratio()
            eng.pop()
            if best_key is None or _ratio_gt(best_key, key):
                best_key = key
                best_h = h
        eng.push(r, best_h)
        pushed += 1
    value = None if eng.partial_infeasible() else eng.max_ratio()
    hosts = list(eng.hosts)
    for _ in range(pushed):
        eng.pop()
    return value, hosts


def _popularity(eng: _IntSearch, depth: int) -> list[int]:
    """Per device: how many unassigned requests would pick it as their cheapest host."""
    p = eng.p
    counts = [0] * p.n_dev
    for r in range(depth, p.n_requests):
        row = p.requests[r]
        best_h = None
        best_cost = None
        for h in row.candidates:
            t = row.type_idx
            cost = p.fcost[h][t] if eng.active[h][t] == 0 else 0
            q = row.origin if row.prev < 0 else (
                eng.hosts[row.prev] if row.prev < depth else -1)
            if q >= 0 and q != h:
                cost += p.comm_req[h][q][t] + p.comm_srv[h][q][t]
            if best_cost is None or cost < best_cost:
                best_cost = cost
                best_h = h
        counts[best_h] += 1
    return counts


def branch_and_bound_solve(
    s: Scenario,
    cap: int = DEFAULT_CAP,
    problem: Problem | None = None,
    warm_start: bool = True,
    collect_nodes: bool = False,
) -> SolveResult:
    """Branch-and-bound with the same exact objective as brute force.

    Level one enumerates, per function type, a single host serving all of that
    type's requests and seeds the incumbent with the best grouping. Refinement
    then branches per request (chain order); children are tried on the most
    popular cheapest hosts first and a branch is cut only when its lower bound
    strictly exceeds the incumbent.
    """
    t0 = time.perf_counter()
    p = problem or Problem(s)
    k = p.combination_count()
    if k > cap:
        raise TooLarge(k, cap)
    if any(not row.candidates for row in p.requests):
        raise Infeasible("a request has no available host")

    eng = _IntSearch(p)
    m = p.n_requests
    stats = SearchStats()
    nodes: list[BBNode] = []

    incumbent_val: tuple[int, int] | None = None
    incumbent_hosts: list[int] | None = None

    def try_update(val: tuple[int, int], hosts: list[int]) -> None:
        nonlocal incumbent_val, incumbent_hosts
        if incumbent_val is None or _ratio_gt(incumbent_val, val):
            incumbent_val = val
            incumbent_hosts = list(hosts)

    if warm_start and m:
        from .faa import faa_allocate  # local import: faa builds on the shared oracle

        try:
            warm_assignment, _, _ = faa_allocate(s, problem=p)
            hosts = [p.dev_index[warm_assignment.mapping[row.rid]] for row in p.requests]
            loads = p.loads_umj(hosts)
            if p.feasible(loads):
                obj = p.objective(loads)
                try_update((obj.numerator, obj.denominator), hosts)
        except Exception:
            pass  # heuristic failures never block the exact solve

    # level 1: per type, one host serves every request of that type
    types_present = sorted({row.type_idx for row in p.requests})
    per_type_hosts = []
    groupable = True
    for t in types_present:
        shared = None
        for row in p.requests:
            if row.type_idx == t:
                cs = set(row.candidates)
                shared = cs if shared is None else shared & cs
        if not shared:
            groupable = False
            break
        per_type_hosts.append(sorted(shared))
    seen_groupings: set[tuple[int, ...]] = set()
    if groupable and types_present:
        for combo in itertools.product(*per_type_hosts):
            by_type = dict(zip(types_present, combo))
            hosts = [by_type[row.type_idx] for row in p.requests]
            seen_groupings.add(tuple(hosts))
            for r in range(m):
                eng.push(r, hosts[r])
            stats.assignments_evaluated += 1
            if not eng.partial_infeasible():
                try_update(eng.max_ratio(), hosts)
            for _ in range(m):
                eng.pop()

    # refinement: per-request depth-first search
    ci = [0] * (m + 1)
    order: list[list[int]] = [[] for _ in range(m)]
    r = 0
    while r >= 0:
        if r == m:
            hosts = tuple(eng.hosts)
            if hosts not in seen_groupings:
                stats.assignments_evaluated += 1
                if not eng.partial_infeasible():
                    try_update(eng.max_ratio(), list(eng.hosts))
            r -= 1
            continue
        if ci[r] == 0:
            cands = p.requests[r].candidates
            if len(cands) >= 2:
                stats.nodes_expanded += 1
                pop = _popularity(eng, r)
                order[r] = sorted(cands, key=lambda h: (-pop[h], p.dev_ids[h]))
                if collect_nodes:
                    nodes.append(_snapshot(eng, r))
            else:
                order[r] = list(cands)
        else:
            eng.pop()
        if ci[r] >= len(order[r]):
            ci[r] = 0
            r -= 1
            continue
        eng.push(r, order[r][ci[r]])
        ci[r] += 1
        if eng.partial_infeasible():
            stats.pruned += 1
            continue
        if incumbent_val is not None and _ratio_gt(eng.lower_bound(), incumbent_val):
            stats.pruned += 1
            continue
        r += 1

    if incumbent_val is None:
        raise Infeasible("every assignment violates a minimum-lifetime requirement")
    result = _finish("bb", s, p, incumbent_hosts, stats, t0)
    if collect_nodes:
        result.nodes = nodes  # type: ignore[attr-defined]
    return result


def _snapshot(eng: _IntSearch, depth: int) -> BBNode:
    p = eng.p
    statuses = {}
    for d in range(p.n_dev):
        for t in range(p.n_types):
            if p.fcost[d][t] < 0:
                continue
            key = (p.dev_ids[d], p.type_ids[t])
            statuses[key] = "open" if eng.active[d][t] > 0 else "unknown"
    partial = {
        p.requests[i].rid: p.dev_ids[eng.hosts[i]]
        for i in range(depth) if eng.hosts[i] >= 0
    }
    lb = Fraction(*eng.lower_bound())
    ub_val, _ = _greedy_completion(eng, depth)
    return BBNode(
        statuses=statuses,
        partial=partial,
        lower_bound=lb,
        upper_bound=None if ub_val is None else Fraction(*ub_val),
    )


def optimal_solve(
    s: Scenario,
    cap: int = DEFAULT_CAP,
    problem: Problem | None = None,
    small_limit: int = EXACT_ENGINE_LIMIT,
    backend: str | None = None,
) -> SolveResult:
    """Exact optimum by the cheapest adequate route.

    Small instances run the exact brute force (full tie-break semantics);
    larger ones run the pruned kernel search warm-started by the allocation
    heuristic, which returns the same optimal value.
    """
    t0 = time.perf_counter()
    p = problem or Problem(s)
    k = p.combination_count()
    if k > cap:
        raise TooLarge(k, cap)
    if k <= small_limit:
        return brute_force_solve(s, cap=cap, problem=p, backend=backend)
    if any(not row.candidates for row in p.requests):
        raise Infeasible("a request has no available host")

    from .faa import faa_allocate

    incumbent = math.inf
    warm_hosts: list[int] | None = None
    try:
        warm_assignment, _, _ = faa_allocate(s, problem=p)
        warm_hosts = [p.dev_index[warm_assignment.mapping[row.rid]] for row in p.requests]
        value, feasible = kernels.kernel_eval(p, warm_hosts)
        if feasible:
            incumbent = value
    except Exception:
        pass

    value, hosts, found, leaves, internal, pruned = kernels.kernel_search(
        p, prune=True, incumbent=incumbent, backend=backend)
    if not found:
        if warm_hosts is None or math.isinf(incumbent):
            raise Infeasible("every assignment violates a minimum-lifetime requirement")
        hosts = warm_hosts  # nothing beat the warm start; it is the optimum
    stats = SearchStats(nodes_expanded=internal, assignments_evaluated=leaves, pruned=pruned)
    return _finish("optimal", s, p, hosts, stats, t0)
