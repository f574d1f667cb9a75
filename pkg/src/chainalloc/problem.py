"""Indexed numeric view of a scenario shared by the solvers.

Builds integer µmJ cost arrays (exact arithmetic) and float mirrors (fast
kernels) plus the chain-ordered request table. The requester of a chain step
s > 1 is the performer of step s-1, so requests are ordered topologically
(by sequence number) and each one carries a pointer to its predecessor.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidAssignment
from .model import RequestId, Scenario, Tier, device_idle_mj, energy_budget, to_umj


@dataclass(frozen=True)
class RequestRow:
    rid: RequestId
    type_idx: int
    origin: int          # device index the chain step nominally comes from
    prev: int            # index of the previous step's request row, -1 for chain heads
    candidates: tuple[int, ...]  # device indices allowed to serve this request


class Problem:
    """Scenario compiled to index space. Immutable once built."""

    def __init__(
        self,
        s: Scenario,
        energies_umj: list[int] | None = None,
        attached: set[str] | None = None,
    ):
        self.scenario = s
        self.dev_ids = [d.id for d in s.devices]
        self.dev_index = {d: i for i, d in enumerate(self.dev_ids)}
        self.n_dev = len(self.dev_ids)
        self.type_ids = sorted({f.ftype for f in s.functions})
        self.type_index = {t: i for i, t in enumerate(self.type_ids)}
        self.n_types = len(self.type_ids)

        if attached is None:
            # static view: availability windows apply at t = 0
            self.attached = [d.attached_at(0) for d in s.devices]
        else:
            self.attached = [d in attached for d in self.dev_ids]

        self.energy = [to_umj(energy_budget(d)) for d in s.devices] if energies_umj is None \
            else list(energies_umj)
        self.base = [to_umj(d.baseline_drain) for d in s.devices]
        self.idle = [to_umj(device_idle_mj(s, d.id)) for d in s.devices]
        self.tier1 = [d.tier is Tier.TIER1 for d in s.devices]
        # lifetime floors kept as exact fractions: drain/energy <= 1/min_lifetime
        self.min_lifetime = [Fraction(d.min_lifetime) if d.min_lifetime > 0 else None
                             for d in s.devices]

        self.fcost = [[-1] * self.n_types for _ in range(self.n_dev)]
        for inst in s.functions:
            self.fcost[self.dev_index[inst.host]][self.type_index[inst.ftype]] = to_umj(inst.cost)

        # comm[h][q][t]: µmJ charged per interval, zero on the diagonal
        self.comm_req = [[[0] * self.n_types for _ in range(self.n_dev)] for _ in range(self.n_dev)]
        self.comm_srv = [[[0] * self.n_types for _ in range(self.n_dev)] for _ in range(self.n_dev)]
        for h, hid in enumerate(self.dev_ids):
            for q, qid in enumerate(self.dev_ids):
                if h == q:
                    continue
                for t, ftype in enumerate(self.type_ids):
                    self.comm_req[h][q][t] = to_umj(s.comm.request_mj(qid, hid, ftype))
                    self.comm_srv[h][q][t] = to_umj(s.comm.serve_mj(qid, hid, ftype))

        self.requests = self._build_requests(s)
        self._float_cache: dict | None = None

    def _build_requests(self, s: Scenario) -> list[RequestRow]:
        rows: list[RequestRow] = []
        position: dict[RequestId, int] = {}
        ordered = sorted(
            (rid for c in s.chains for rid in c.requests()),
            key=lambda r: (r.seq, r.device, r.app),
        )
        for rid in ordered:
            chain = s.chain_of(rid)
            ftype = chain.ftype(rid.seq)
            pin = chain.pinned.get(rid.seq)
            hosts = [pin] if pin is not None else s.hosts_of(ftype)
            cands = tuple(
                self.dev_index[h] for h in hosts if self.attached[self.dev_index[h]]
            )
            prev = position.get(RequestId(rid.device, rid.app, rid.seq - 1), -1)
            rows.append(RequestRow(
                rid=rid,
                type_idx=self.type_index[ftype],
                origin=self.dev_index[rid.device],
                prev=prev,
                candidates=cands,
            ))
            position[rid] = len(rows) - 1
        return rows

    @property
    def n_requests(self) -> int:
        return len(self.requests)

    def combination_count(self) -> int:
        """Product of per-request host choices; equals the per-type closed form."""
        k = 1
        for row in self.requests:
            k *= max(len(row.candidates), 1)
        return k

    def request_index(self, rid: RequestId) -> int:
        for i, row in enumerate(self.requests):
            if row.rid == rid:
                return i
        raise KeyError(rid)

    # -- evaluation ---------------------------------------------------------

    def loads_umj(self, hosts: list[int]) -> list[int]:
        """Per-device total drain (baseline + added) in µmJ for a complete assignment."""
        if len(hosts) != self.n_requests:
            raise InvalidAssignment("assignment vector length mismatch")
        loads = list(self.base)
        active = set()
        comm = [False] * self.n_dev
        for i, row in enumerate(self.requests):
            h = hosts[i]
            if self.fcost[h][row.type_idx] < 0:
                raise InvalidAssignment(
                    f"request {row.rid} mapped to {self.dev_ids[h]!r} "
                    f"which owns no {self.type_ids[row.type_idx]!r} instance"
                )
            if (h, row.type_idx) not in active:
                active.add((h, row.type_idx))
                loads[h] += self.fcost[h][row.type_idx]
            q = row.origin if row.prev < 0 else hosts[row.prev]
            if q != h:
                loads[q] += self.comm_req[h][q][row.type_idx]
                loads[h] += self.comm_srv[h][q][row.type_idx]
                for d in (q, h):
                    if not comm[d]:
                        comm[d] = True
                        loads[d] += self.idle[d]
        return loads

    def feasible(self, loads: list[int]) -> bool:
        """Constraint check: every device with a required minimum lifetime meets it."""
        for i, tstar in enumerate(self.min_lifetime):
            if tstar is not None:
                # drain/energy <= 1/T  <=>  drain * T <= energy
                if loads[i] * tstar.numerator > self.energy[i] * tstar.denominator:
                    return False
        return True

    def objective(self, loads: list[int]) -> Fraction:
        """Exact cost of an assignment: max over attached Tier-1 devices of load/E."""
        best: Fraction | None = None
        for i in range(self.n_dev):
            if self.tier1[i] and self.attached[i]:
                r = Fraction(loads[i], self.energy[i])
                if best is None or r > best:
                    best = r
        if best is None:
            raise InvalidAssignment("no attached Tier1 device to evaluate")
        return best

    # -- float mirrors for the kernels --------------------------------------

    def float_arrays(self) -> dict:
        """numpy float64/int32 mirrors of the cost model, built once."""
        if self._float_cache is not None:
            return self._float_cache
        n, T, m = self.n_dev, self.n_types, self.n_requests
        arr = {
            "energy": np.array(self.energy, dtype=np.float64),
            "base": np.array(self.base, dtype=np.float64),
            "idle": np.array(self.idle, dtype=np.float64),
            "tier1": np.array(
                [t and a for t, a in zip(self.tier1, self.attached)], dtype=np.bool_
            ),
            "fcost": np.array(
                [[self.fcost[d][t] if self.fcost[d][t] >= 0 else -1.0 for t in range(T)]
                 for d in range(n)], dtype=np.float64
            ),
            "comm_req": np.array(self.comm_req, dtype=np.float64),
            "comm_srv": np.array(self.comm_srv, dtype=np.float64),
            "limit": np.array(
                [float(1 / t) if t is not None else np.inf for t in self.min_lifetime],
                dtype=np.float64,
            ),
            "rtype": np.array([r.type_idx for r in self.requests], dtype=np.int32),
            "origin": np.array([r.origin for r in self.requests], dtype=np.int32),
            "prev": np.array([r.prev for r in self.requests], dtype=np.int32),
        }
        offs = np.zeros(m + 1, dtype=np.int32)
        flat: list[int] = []
        for i, row in enumerate(self.requests):
            flat.extend(row.candidates)
            offs[i + 1] = len(flat)
        arr["cand_offsets"] = offs
        arr["cand_flat"] = np.array(flat, dtype=np.int32)
        self._float_cache = arr
        return arr
