"""Linear relaxation of the allocation problem: build, solve, round, bound.

The binary activation/assignment/pairing/idle indicators become continuous
variables in [0, 1]; the min-max objective is linearized through an auxiliary
scalar bounded below by every Tier-1 cost ratio. The relaxation optimum is a
lower bound on the best integral cost; rounding plus the worst/best-case
integral costs give the approximation factor.

Requests are modeled at their nominal chain origins, so the lower bound is
exact for single-step chains; on longer chains (where the effective requester
of a step is the previous performer) the relaxation is an approximation of
the chain-aware objective the other solvers optimize.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import simplex
from .errors import LPInfeasible, LPInternalError, RoundingInfeasible
from .model import Scenario
from .objective import Assignment
from .problem import Problem

FRAC_TOL = 1e-9


@dataclass
class LPModel:
    """Relaxed model in min c.x, A x <= b, x >= 0 form plus its index maps."""

    problem: Problem
    c: np.ndarray
    a_rows: list[np.ndarray]
    b: list[float]
    row_labels: list[tuple]
    act_idx: dict[tuple[int, int], int]        # (host, type) -> column
    assign_idx: dict[tuple[int, int], int]        # (request row, device) -> column
    inbound_idx: dict[tuple[int, int, int], int]   # (requester, host, type) -> column
    idle_idx: dict[int, int]                    # device -> column
    peak_idx: int = 0

    @property
    def n_vars(self) -> int:
        return len(self.c)

    def rows_labeled(self, kind: str) -> list[tuple]:
        return [lab for lab in self.row_labels if lab[0] == kind]


@dataclass
class FractionalSolution:
    """Optimal point of the relaxation."""

    peak: float
    assign: dict[tuple[int, int], float]      # (request row, device) share
    inbound: dict[tuple[int, int, int], float]  # (requester, host, type) share
    act: dict[tuple[int, int], float]         # (host, type) activation level
    idle: dict[int, float]
    ratios: list[float]
    bottleneck: int  # device index realizing the peak ratio


@dataclass
class RelaxReport:
    opt_lp: float
    bottleneck: str
    integral: Assignment
    integral_cost: float
    int_worst: float
    int_best: float
    af: float
    af_loose: bool

    def csv_row(self) -> list:
        return [repr(self.opt_lp), repr(self.integral_cost), repr(self.int_worst),
                repr(self.int_best), repr(self.af)]


RELAX_CSV_HEADER = ["opt_lp", "integral_cost", "int_worst", "int_best", "af"]


def build_lp(s: Scenario, problem: Problem | None = None) -> LPModel:
    """Assemble the relaxed constraint system.

    Variables: an activation level per function instance, an assignment share
    per (request, device), an inbound share per (instance, requesting device),
    an idle level per device, plus the max-ratio auxiliary. Assignment shares
    on devices that do not host the request's type are pinned to 0.
    """
    p = problem or Problem(s)
    n = p.n_dev

    act_idx: dict[tuple[int, int], int] = {}
    assign_idx: dict[tuple[int, int], int] = {}
    inbound_idx: dict[tuple[int, int, int], int] = {}
    idle_idx: dict[int, int] = {}
    col = 0
    for d in range(n):
        for t in range(p.n_types):
            if p.fcost[d][t] >= 0:
                act_idx[(d, t)] = col
                col += 1
    for r in range(p.n_requests):
        for d in range(n):
            assign_idx[(r, d)] = col
            col += 1
    for d in range(n):
        for t in range(p.n_types):
            if p.fcost[d][t] >= 0:
                for q in range(n):
                    inbound_idx[(q, d, t)] = col
                    col += 1
    for d in range(n):
        idle_idx[d] = col
        col += 1
    peak_col = col
    col += 1

    nv = col
    c = np.zeros(nv)
    c[peak_col] = 1.0
    a_rows: list[np.ndarray] = []
    b: list[float] = []
    labels: list[tuple] = []

    def add(coeffs: dict[int, float], rhs: float, label: tuple) -> None:
        row = np.zeros(nv)
        for j, v in coeffs.items():
            row[j] += v
        a_rows.append(row)
        b.append(rhs)
        labels.append(label)

    for r, req in enumerate(p.requests):
        t = req.type_idx
        q = req.origin
        hosts = [d for d in range(n) if p.fcost[d][t] >= 0]
        allowed = set(req.candidates)
        # cover: the request must be (fractionally) assigned at least once
        add({assign_idx[(r, d)]: -1.0 for d in hosts if d in allowed}, -1.0, ("cover", r))
        for d in range(n):
            if d not in allowed or p.fcost[d][t] < 0:
                add({assign_idx[(r, d)]: 1.0}, 0.0, ("forbid", r, d))
        if q in allowed and p.fcost[q][t] >= 0:
            # activation on the requesting device follows its local assignment
            add({assign_idx[(r, q)]: 1.0, act_idx[(q, t)]: -1.0}, 0.0, ("activate_local", r))
        for d in hosts:
            if d in allowed:
                # request/serve pairing on the chosen host
                add({assign_idx[(r, d)]: 1.0, inbound_idx[(q, d, t)]: -1.0}, 0.0, ("pair", r, d))
                if d != q:
                    # idle on the requester when served remotely
                    add({assign_idx[(r, d)]: 1.0, idle_idx[q]: -1.0}, 0.0, ("idle_out", r, d))

    for (d, t), act_col in act_idx.items():
        for q in range(n):
            if q != d:
                # activation covers inbound fractional demand
                add({inbound_idx[(q, d, t)]: 1.0, act_col: -1.0}, 0.0, ("activate_in", d, t, q))
                # idle on the host when serving a remote requester
                add({inbound_idx[(q, d, t)]: 1.0, idle_idx[d]: -1.0}, 0.0, ("idle_in", d, t, q))

    def ratio_terms(i: int) -> dict[int, float]:
        e = float(p.energy[i])
        coeffs: dict[int, float] = {}
        for t in range(p.n_types):
            if p.fcost[i][t] >= 0:
                coeffs[act_idx[(i, t)]] = p.fcost[i][t] / e
        for r, req in enumerate(p.requests):
            if req.origin == i:
                for d in range(n):
                    if p.fcost[d][req.type_idx] >= 0 and d != i:
                        coeffs[assign_idx[(r, d)]] = coeffs.get(assign_idx[(r, d)], 0.0) \
                            + p.comm_req[d][i][req.type_idx] / e
        for t in range(p.n_types):
            if p.fcost[i][t] >= 0:
                for q in range(n):
                    if q != i:
                        coeffs[inbound_idx[(q, i, t)]] = p.comm_srv[i][q][t] / e
        coeffs[idle_idx[i]] = p.idle[i] / e
        return coeffs

    for i in range(n):
        base = p.base[i] / float(p.energy[i])
        tstar = p.min_lifetime[i]
        if tstar is not None:
            # lifetime budget: total ratio at most 1/min_lifetime
            add(ratio_terms(i), float(1 / tstar) - base, ("budget", i))
        if p.tier1[i] and p.attached[i]:
            coeffs = ratio_terms(i)
            coeffs[peak_col] = coeffs.get(peak_col, 0.0) - 1.0
            add(coeffs, -base, ("tmax", i))

    for name, idx in (("act", act_idx), ("assign", assign_idx),
                      ("inbound", inbound_idx), ("idle", idle_idx)):
        for key, j in idx.items():
            add({j: 1.0}, 1.0, ("ub", name, key))

    return LPModel(
        problem=p, c=c, a_rows=a_rows, b=b, row_labels=labels,
        act_idx=act_idx, assign_idx=assign_idx, inbound_idx=inbound_idx, idle_idx=idle_idx, peak_idx=peak_col,
    )


def solve_lp(m: LPModel) -> FractionalSolution:
    """Exact optimum of the relaxation via the dense simplex.

    Two lexicographic solves: first minimize the max ratio t, then, with t
    pinned at its optimum, minimize the total indicator mass. The second pass
    strips degenerate slack (cover rows allow useless over-assignment that
    would otherwise inflate non-binding devices up to the ceiling).
    """
    A = np.vstack(m.a_rows)
    b = np.array(m.b)
    res = simplex.solve(m.c, A, b)
    if res.status == simplex.INFEASIBLE:
        raise LPInfeasible("relaxation infeasible: lifetime budgets are over-tight")
    if res.status != simplex.OPTIMAL:
        raise LPInternalError(f"relaxation ended {res.status}, impossible by construction")
    first_pass = float(res.objective)

    pin = np.zeros(m.n_vars)
    pin[m.peak_idx] = 1.0
    a2 = np.vstack([A, pin])
    b2 = np.append(b, first_pass + 1e-9 * max(1.0, abs(first_pass)))
    c2 = np.ones(m.n_vars)
    c2[m.peak_idx] = 0.0
    res2 = simplex.solve(c2, a2, b2)
    if res2.status == simplex.OPTIMAL:
        res = res2
    x = res.x
    p = m.problem

    sol_assign = {k: float(x[j]) for k, j in m.assign_idx.items()}
    sol_inbound = {k: float(x[j]) for k, j in m.inbound_idx.items()}
    sol_act = {k: float(x[j]) for k, j in m.act_idx.items()}
    sol_idle = {k: float(x[j]) for k, j in m.idle_idx.items()}

    ratios = []
    for i in range(p.n_dev):
        e = float(p.energy[i])
        total = p.base[i] / e
        for (d, t), v in sol_act.items():
            if d == i:
                total += v * p.fcost[i][t] / e
        for (r, d), v in sol_assign.items():
            if p.requests[r].origin == i and d != i and p.fcost[d][p.requests[r].type_idx] >= 0:
                total += v * p.comm_req[d][i][p.requests[r].type_idx] / e
        for (q, d, t), v in sol_inbound.items():
            if d == i and q != i:
                total += v * p.comm_srv[i][q][t] / e
        total += sol_idle[i] * p.idle[i] / e
        ratios.append(total)

    tier1 = [i for i in range(p.n_dev) if p.tier1[i] and p.attached[i]]
    # report the returned vertex's own peak so ratios/bottleneck/value agree
    peak = max(ratios[i] for i in tier1)
    bottleneck = min(i for i in tier1 if ratios[i] >= peak - FRAC_TOL)
    return FractionalSolution(
        peak=peak,
        assign=sol_assign, inbound=sol_inbound, act=sol_act, idle=sol_idle,
        ratios=ratios, bottleneck=bottleneck,
    )


def round_to_integral(s: Scenario, frac: FractionalSolution,
                      problem: Problem | None = None) -> Assignment:
    """Integral assignment from a fractional point.

    Bottleneck device d keeps every request it partially serves of its own
    (any positive local share goes fully local) and fully absorbs any positive
    inbound share. Everything still fractional is rounded largest-share-first,
    ties to the requester's own device, then the smaller host id.
    """
    p = problem or Problem(s)
    d = frac.bottleneck
    hosts: dict[int, int] = {}

    for r, req in enumerate(p.requests):
        if req.origin == d and frac.assign.get((r, d), 0.0) > FRAC_TOL:
            hosts[r] = d
    for (q, h, t), v in sorted(frac.inbound.items()):
        if h == d and q != d and v > FRAC_TOL:
            for r, req in enumerate(p.requests):
                if req.origin == q and req.type_idx == t and r not in hosts \
                        and d in req.candidates:
                    hosts[r] = d
    for r, req in enumerate(p.requests):
        if r in hosts:
            continue
        best = None
        for h in req.candidates:
            share = frac.assign.get((r, h), 0.0)
            key = (-share, 0 if h == req.origin else 1, p.dev_ids[h])
            if best is None or key < best[0]:
                best = (key, h)
        hosts[r] = best[1]

    vec = [hosts[r] for r in range(p.n_requests)]
    loads = p.loads_umj(vec)
    if not p.feasible(loads):
        bad = [p.dev_ids[i] for i, t in enumerate(p.min_lifetime)
               if t is not None and loads[i] * t.numerator > p.energy[i] * t.denominator]
        raise RoundingInfeasible(
            f"integral completion breaks the minimum lifetime of {', '.join(bad)}"
        )
    return Assignment(mapping={
        row.rid: p.dev_ids[vec[i]] for i, row in enumerate(p.requests)
    })


def bounds_and_af(
    s: Scenario,
    frac: FractionalSolution,
    integral: Assignment,
    problem: Problem | None = None,
    loose_threshold: float = 3.0,
) -> RelaxReport:
    """Worst/best-case integral costs at the bottleneck and the approximation factor."""
    p = problem or Problem(s)
    d = frac.bottleneck
    e = float(p.energy[d])

    # worst case: every instance on d runs, d serves every possible remote pair,
    # idle fully charged
    worst = float(p.base[d])
    for t in range(p.n_types):
        if p.fcost[d][t] >= 0:
            worst += p.fcost[d][t]
            for q in range(p.n_dev):
                worst += p.comm_srv[d][q][t]
    worst += p.idle[d]
    int_worst = worst / e

    # best case: d's own requests placed to minimize d's cost, zero inbound.
    # Per type: either activate locally once (all local) or send every request
    # to the cheapest remote host; idle is charged only if anything goes remote.
    own = [r for r in p.requests if r.origin == d]
    types = sorted({r.type_idx for r in own})
    local_total = 0
    mixed_total = 0
    must_remote = False
    feasible_local = True
    for t in types:
        reqs = [r for r in own if r.type_idx == t]
        local = p.fcost[d][t] if p.fcost[d][t] >= 0 else None
        remote = 0
        for r in reqs:
            options = [p.comm_req[h][d][t] for h in r.candidates if h != d]
            remote = remote + min(options) if options else None
            if remote is None:
                break
        if local is None and remote is None:
            raise LPInternalError("request with no host survived validation")
        if local is None:
            must_remote = True
            mixed_total += remote
            feasible_local = False
        elif remote is None:
            local_total += local
            mixed_total += local
        else:
            local_total += local
            if remote < local:
                must_remote = True
                mixed_total += remote
            else:
                mixed_total += local
    best_cost = mixed_total + (p.idle[d] if must_remote else 0)
    if feasible_local:
        best_cost = min(best_cost, local_total)
    int_best = (p.base[d] + best_cost) / e

    integral_loads = p.loads_umj([
        p.dev_index[integral.mapping[row.rid]] for row in p.requests
    ])
    integral_cost = float(p.objective(integral_loads))

    af = int_worst / frac.peak if frac.peak > 0 else math.inf
    return RelaxReport(
        opt_lp=frac.peak,
        bottleneck=p.dev_ids[d],
        integral=integral,
        integral_cost=integral_cost,
        int_worst=int_worst,
        int_best=int_best,
        af=af,
        af_loose=af > loose_threshold,
    )


def relax_solve(s: Scenario, problem: Problem | None = None) -> RelaxReport:
    """Full relaxation pipeline: build, solve, round, bound."""
    p = problem or Problem(s)
    model = build_lp(s, problem=p)
    frac = solve_lp(model)
    integral = round_to_integral(s, frac, problem=p)
    return bounds_and_af(s, frac, integral, problem=p)
