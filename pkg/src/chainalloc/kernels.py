"""Hot search kernels: exhaustive/pruned assignment-space search.

Two interchangeable backends produce identical results:

* ``numba`` - @njit depth-first search with incremental cost updates and an
  admissible bound, used for everything large.
* ``numpy`` - vectorized block enumeration of the full combination space,
  kept as a dependency-light fallback.

Selection: CHAINALLOC_BACKEND={auto,numba,numpy} (default auto). Both explore
candidates in the same order and keep the first strict improvement, so the
reported optimum is backend-independent.
"""

from __future__ import annotations

import math
import os

import numpy as np

from .problem import Problem

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        if args and callable(args[0]):
            return args[0]
        return wrap


def backend_name() -> str:
    """Active backend after applying the CHAINALLOC_BACKEND override."""
    choice = os.environ.get("CHAINALLOC_BACKEND", "auto").lower()
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        if not HAS_NUMBA:
            raise RuntimeError("CHAINALLOC_BACKEND=numba but numba is not importable")
        return "numba"
    return "numba" if HAS_NUMBA else "numpy"


@njit(cache=True)
def _eval_hosts(hosts, energy, base, idle, tier1, fcost, comm_req, comm_srv,
                limit, rtype, origin, prev):
    """Objective (max Tier-1 load/E ratio) and feasibility of one assignment."""
    n = energy.shape[0]
    T = fcost.shape[1]
    loads = base.copy()
    active = np.zeros((n, T), dtype=np.bool_)
    comm = np.zeros(n, dtype=np.bool_)
    for r in range(hosts.shape[0]):
        h = hosts[r]
        t = rtype[r]
        if not active[h, t]:
            active[h, t] = True
            loads[h] += fcost[h, t]
        q = origin[r] if prev[r] < 0 else hosts[prev[r]]
        if q != h:
            loads[q] += comm_req[h, q, t]
            loads[h] += comm_srv[h, q, t]
            if not comm[q]:
                comm[q] = True
                loads[q] += idle[q]
            if not comm[h]:
                comm[h] = True
                loads[h] += idle[h]
    value = 0.0
    feasible = True
    for d in range(n):
        ratio = loads[d] / energy[d]
        if ratio > limit[d]:
            feasible = False
        if tier1[d] and ratio > value:
            value = ratio
    return value, feasible


@njit(cache=True)
def _dfs_search(energy, base, idle, tier1, fcost, comm_req, comm_srv, limit,
                rtype, origin, prev, cand_offsets, cand_flat, min_fcost,
                incumbent, prune):
    """DFS over all assignment vectors; returns the minimal-cost feasible one.

    Bound (only applied when prune is set): partial loads never decrease, so
    the current max Tier-1 ratio is admissible; when every device is Tier-1 the
    aggregate (sum of loads + unavoidable future activations) / (sum of E)
    tightens it. Both are exact lower bounds, so pruning preserves the optimum.
    """
    n = energy.shape[0]
    T = fcost.shape[1]
    m = rtype.shape[0]

    loads = base.copy()
    active_count = np.zeros((n, T), dtype=np.int64)
    type_active = np.zeros(T, dtype=np.int64)   # instances of each type switched on
    remaining = np.zeros(T, dtype=np.int64)     # unassigned requests per type
    comm_count = np.zeros(n, dtype=np.int64)
    hosts = np.full(m, -1, dtype=np.int32)
    best_hosts = np.full(m, -1, dtype=np.int32)
    ci = np.zeros(m, dtype=np.int64)            # next candidate index per depth
    saved_q = np.zeros(m, dtype=np.int64)
    saved_dq = np.zeros(m, dtype=np.float64)
    saved_dh = np.zeros(m, dtype=np.float64)

    all_tier1 = True
    sum_e = 0.0
    total = 0.0
    for d in range(n):
        if tier1[d]:
            sum_e += energy[d]
            total += loads[d]
        else:
            all_tier1 = False

    for r in range(m):
        remaining[rtype[r]] += 1
    future_f = 0.0
    for t in range(T):
        if remaining[t] > 0:
            future_f += min_fcost[t]

    best_val = incumbent
    found = False
    leaves = 0
    internal = 0
    pruned = 0

    r = 0
    while r >= 0:
        if r == m:
            leaves += 1
            value = 0.0
            feasible = True
            for d in range(n):
                ratio = loads[d] / energy[d]
                if ratio > limit[d]:
                    feasible = False
                if tier1[d] and ratio > value:
                    value = ratio
            if feasible and value < best_val:
                best_val = value
                found = True
                for i in range(m):
                    best_hosts[i] = hosts[i]
            r -= 1
            continue

        start = cand_offsets[r]
        ncand = cand_offsets[r + 1] - start

        if ci[r] > 0:
            # returning to this depth: undo the previous candidate
            h = hosts[r]
            t = rtype[r]
            q = saved_q[r]
            loads[h] -= saved_dh[r]
            loads[q] -= saved_dq[r]
            if tier1[h]:
                total -= saved_dh[r]
            if tier1[q]:
                total -= saved_dq[r]
            active_count[h, t] -= 1
            if active_count[h, t] == 0:
                type_active[t] -= 1
                if type_active[t] == 0 and remaining[t] > 0:
                    future_f += min_fcost[t]
            if q != h:
                comm_count[q] -= 1
                comm_count[h] -= 1
            hosts[r] = -1

        if ci[r] >= ncand:
            ci[r] = 0
            remaining[rtype[r]] += 1
            if type_active[rtype[r]] == 0 and remaining[rtype[r]] == 1:
                future_f += min_fcost[rtype[r]]
            r -= 1
            continue

        if ci[r] == 0:
            if ncand >= 2:
                internal += 1
            t = rtype[r]
            remaining[t] -= 1
            if type_active[t] == 0 and remaining[t] == 0:
                future_f -= min_fcost[t]

        h = cand_flat[start + ci[r]]
        ci[r] += 1
        t = rtype[r]
        q = origin[r] if prev[r] < 0 else hosts[prev[r]]

        dh = 0.0
        dq = 0.0
        active_count[h, t] += 1
        if active_count[h, t] == 1:
            dh += fcost[h, t]
            type_active[t] += 1
            if type_active[t] == 1 and remaining[t] > 0:
                future_f -= min_fcost[t]
        if q != h:
            dh += comm_srv[h, q, t]
            dq += comm_req[h, q, t]
            comm_count[q] += 1
            comm_count[h] += 1
            if comm_count[q] == 1:
                dq += idle[q]
            if comm_count[h] == 1:
                dh += idle[h]
        loads[h] += dh
        loads[q] += dq
        if tier1[h]:
            total += dh
        if tier1[q]:
            total += dq
        hosts[r] = h
        saved_q[r] = q
        saved_dq[r] = dq
        saved_dh[r] = dh

        if prune:
            cut = False
            bound = 0.0
            for d in range(n):
                ratio = loads[d] / energy[d]
                if ratio > limit[d]:
                    cut = True
                if tier1[d] and ratio > bound:
                    bound = ratio
            if all_tier1 and (total + future_f) / sum_e > bound:
                bound = (total + future_f) / sum_e
            if cut or bound >= best_val:
                pruned += 1
                continue  # try the next candidate at this depth

        r += 1

    return best_val, best_hosts, found, leaves, internal, pruned


def _numpy_block_search(arr: dict, incumbent: float, block: int = 1 << 14):
    """Vectorized full enumeration in the same candidate order as the DFS."""
    energy, base, idle = arr["energy"], arr["base"], arr["idle"]
    tier1, fcost = arr["tier1"], arr["fcost"]
    comm_req, comm_srv, limit = arr["comm_req"], arr["comm_srv"], arr["limit"]
    rtype, origin, prev = arr["rtype"], arr["origin"], arr["prev"]
    offs, flat = arr["cand_offsets"], arr["cand_flat"]
    n = energy.shape[0]
    T = fcost.shape[1]
    m = rtype.shape[0]

    ncand = (offs[1:] - offs[:-1]).astype(np.int64)
    total = 1
    for c in ncand:
        total *= int(c)

    # radix weights: request 0 is the most significant digit
    weights = np.ones(m, dtype=np.int64)
    for i in range(m - 2, -1, -1):
        weights[i] = weights[i + 1] * ncand[i + 1]

    best_val = incumbent
    best_hosts = None
    leaves = 0
    for lo in range(0, total, block):
        idx = np.arange(lo, min(lo + block, total), dtype=np.int64)
        b = idx.shape[0]
        hosts = np.empty((b, m), dtype=np.int64)
        for r in range(m):
            digit = (idx // weights[r]) % ncand[r]
            hosts[:, r] = flat[offs[r] + digit]

        loads = np.tile(base, (b, 1))
        comm = np.zeros((b, n), dtype=bool)
        rows = np.arange(b)
        # activation: each (device, type) instance charges once if any request lands on it
        for t in range(T):
            cols = np.nonzero(rtype == t)[0]
            if cols.size == 0:
                continue
            for d in range(n):
                if fcost[d, t] >= 0:
                    hit = (hosts[:, cols] == d).any(axis=1)
                    loads[:, d] += np.where(hit, fcost[d, t], 0.0)
        # communication and idle latching, chain-aware requesters
        for r in range(m):
            h = hosts[:, r]
            q = np.full(b, origin[r], dtype=np.int64) if prev[r] < 0 else hosts[:, prev[r]]
            remote = q != h
            t = int(rtype[r])
            np.add.at(loads, (rows, q), np.where(remote, comm_req[h, q, t], 0.0))
            np.add.at(loads, (rows, h), np.where(remote, comm_srv[h, q, t], 0.0))
            newly_q = remote & ~comm[rows, q]
            comm[rows[newly_q], q[newly_q]] = True
            np.add.at(loads, (rows[newly_q], q[newly_q]), idle[q[newly_q]])
            newly_h = remote & ~comm[rows, h]
            comm[rows[newly_h], h[newly_h]] = True
            np.add.at(loads, (rows[newly_h], h[newly_h]), idle[h[newly_h]])

        ratios = loads / energy
        feasible = (ratios <= limit).all(axis=1)
        values = np.where(tier1, ratios, -np.inf).max(axis=1)
        values[~feasible] = np.inf
        leaves += b
        k = int(np.argmin(values))
        if values[k] < best_val:
            best_val = float(values[k])
            best_hosts = hosts[k].astype(np.int32)
    found = best_hosts is not None
    if not found:
        best_hosts = np.full(m, -1, dtype=np.int32)
    return best_val, best_hosts, found, leaves, 0, 0


def kernel_eval(p: Problem, hosts: list[int]) -> tuple[float, bool]:
    """Float objective of one assignment through the kernel's own arithmetic."""
    arr = p.float_arrays()
    hv = np.asarray(hosts, dtype=np.int32)
    value, feasible = _eval_hosts(
        hv, arr["energy"], arr["base"], arr["idle"], arr["tier1"], arr["fcost"], arr["comm_req"],
        arr["comm_srv"], arr["limit"], arr["rtype"], arr["origin"], arr["prev"],
    )
    return float(value), bool(feasible)


def kernel_search(
    p: Problem,
    prune: bool,
    incumbent: float = math.inf,
    backend: str | None = None,
):
    """Search the full assignment space of `p`.

    Returns (value, hosts, found, leaves, internal_nodes, pruned). With
    prune=False every combination is evaluated (leaves == combination count);
    with prune=True subtrees whose lower bound cannot beat the incumbent are
    cut, which never changes the reported optimum.
    """
    arr = p.float_arrays()
    chosen = backend or backend_name()
    if chosen == "numpy":
        value, hosts, found, leaves, internal, pruned = _numpy_block_search(arr, incumbent)
    else:
        min_fcost = np.empty(p.n_types, dtype=np.float64)
        for t in range(p.n_types):
            costs = [p.fcost[d][t] for d in range(p.n_dev) if p.fcost[d][t] >= 0]
            min_fcost[t] = float(min(costs)) if costs else 0.0
        value, hosts, found, leaves, internal, pruned = _dfs_search(
            arr["energy"], arr["base"], arr["idle"], arr["tier1"], arr["fcost"], arr["comm_req"],
            arr["comm_srv"], arr["limit"], arr["rtype"], arr["origin"], arr["prev"],
            arr["cand_offsets"], arr["cand_flat"], min_fcost,
            float(incumbent), bool(prune),
        )
    return float(value), [int(h) for h in hosts], bool(found), int(leaves), int(internal), int(pruned)
