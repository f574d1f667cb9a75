"""Domain types, scenario file loading/validation, and cost-table construction.

Energy bookkeeping convention: user-facing values are mJ per interval (floats);
everything a solver touches is quantized once to integer micro-mJ (µmJ) so that
exact integer/rational arithmetic is possible downstream.
"""

from __future__ import annotations

import enum
import json
import math
import os
from dataclasses import dataclass, field

from .errors import ParseError, ValidationError

# one µmJ = 1e-6 mJ; single quantization grid used by every solver
SCALE = 10**6

# sentinel for (instance, request) cells that a type mismatch makes unreachable
UNREACHABLE = math.inf


class Tier(enum.Enum):
    TIER1 = "Tier1"
    TIER2 = "Tier2"
    EXTENDED = "Extended"


def to_umj(mj: float) -> int:
    """Quantize a mJ amount onto the shared integer µmJ grid."""
    return int(round(mj * SCALE))


@dataclass(frozen=True)
class DeviceSpec:
    """One battery-powered device in the pool."""

    id: str
    tier: Tier = Tier.TIER1
    capacity: float = 0.0        # battery capacity, mAh
    voltage: float = 3.8         # nominal volts
    initial_charge: float = 1.0  # fraction of capacity, [0, 1]
    baseline_drain: float = 0.0  # mJ consumed per interval before any allocation
    idle_cost: float = 0.0       # mJ per interval while any cross-device link stays open
    min_lifetime: float = 0.0    # required lifetime in intervals, 0 = unconstrained
    availability: tuple[int, int] | None = None  # [start, end) attachment window, intervals

    def __post_init__(self):
        if self.capacity <= 0:
            raise ValidationError(f"device {self.id!r}: capacity must be > 0")
        if self.voltage <= 0:
            raise ValidationError(f"device {self.id!r}: voltage must be > 0")
        if not 0.0 <= self.initial_charge <= 1.0:
            raise ValidationError(f"device {self.id!r}: charge must be in [0, 1]")
        if self.baseline_drain < 0 or self.idle_cost < 0 or self.min_lifetime < 0:
            raise ValidationError(f"device {self.id!r}: negative energy or lifetime value")
        if self.availability is not None and not self.availability[0] < self.availability[1]:
            raise ValidationError(f"device {self.id!r}: availability start must precede end")

    def attached_at(self, t: int) -> bool:
        if self.availability is None:
            return True
        return self.availability[0] <= t < self.availability[1]


def energy_budget(spec: DeviceSpec) -> float:
    """Remaining energy of a device in mJ: mAh x V x 3600 x charge fraction."""
    return spec.capacity * spec.voltage * 3600.0 * spec.initial_charge


@dataclass(frozen=True)
class FunctionInstance:
    """A function implementation living on one host device."""

    host: str
    ftype: str
    cost: float  # mJ per interval while executing

    def __post_init__(self):
        if self.cost < 0:
            raise ValidationError(f"instance ({self.host}, {self.ftype}): cost must be >= 0")


@dataclass(frozen=True)
class RadioProfile:
    tx_mw: float
    rx_mw: float
    idle_mj: float
    throughput_bps: float

    def __post_init__(self):
        if min(self.tx_mw, self.rx_mw, self.idle_mj) < 0 or self.throughput_bps <= 0:
            raise ValidationError("radio profile values must be >= 0 with throughput > 0")


class CommCostModel:
    """Per ordered device pair (requester, server) communication energies.

    request_mj(q, h, ftype): receive-side energy charged to requester q.
    serve_mj(q, h, ftype):   transmit-side energy charged to the serving host h.
    Both are identically zero when q == h.
    """

    def __init__(
        self,
        pairs: dict[tuple[str, str], tuple[float, float]] | None = None,
        radios: dict[str, RadioProfile] | None = None,
        bytes_per_interval: dict[str, float] | None = None,
    ):
        if pairs is not None and radios is not None:
            raise ValidationError("comm model: give either pair costs or radio profiles, not both")
        self.pairs = dict(pairs) if pairs else None
        self.radios = dict(radios) if radios else None
        self.bytes_per_interval = dict(bytes_per_interval or {})
        if self.pairs:
            for (a, b), (req, srv) in self.pairs.items():
                if a == b:
                    raise ValidationError(f"comm pair ({a}, {b}): self pairs are implicit zeros")
                if req < 0 or srv < 0:
                    raise ValidationError(f"comm pair ({a}, {b}): costs must be >= 0")
        if self.radios:
            for f, n in self.bytes_per_interval.items():
                if n < 0:
                    raise ValidationError(f"bytes_per_interval[{f!r}] must be >= 0")

    def __eq__(self, other) -> bool:
        if not isinstance(other, CommCostModel):
            return NotImplemented
        return (self.pairs == other.pairs and self.radios == other.radios
                and self.bytes_per_interval == other.bytes_per_interval)

    def __repr__(self) -> str:
        mode = "pairs" if self.pairs is not None else (
            "radio" if self.radios is not None else "empty")
        return f"CommCostModel<{mode}>"

    def _transfer_seconds(self, q: str, h: str, ftype: str) -> float:
        nbytes = self.bytes_per_interval.get(ftype, 0.0)
        link_bps = min(self.radios[q].throughput_bps, self.radios[h].throughput_bps)
        return nbytes * 8.0 / link_bps

    def request_mj(self, q: str, h: str, ftype: str) -> float:
        if q == h:
            return 0.0
        if self.pairs is not None:
            return self.pairs.get((q, h), (0.0, 0.0))[0]
        if self.radios is not None:
            return self.radios[q].rx_mw * self._transfer_seconds(q, h, ftype)
        return 0.0

    def serve_mj(self, q: str, h: str, ftype: str) -> float:
        if q == h:
            return 0.0
        if self.pairs is not None:
            return self.pairs.get((q, h), (0.0, 0.0))[1]
        if self.radios is not None:
            return self.radios[h].tx_mw * self._transfer_seconds(q, h, ftype)
        return 0.0


@dataclass(frozen=True, order=True)
class RequestId:
    """Unique request handle: origin device, application, position in the chain."""

    device: str
    app: str
    seq: int


@dataclass(frozen=True)
class ChainSpec:
    """Ordered function sequence one application executes, starting at `device`."""

    device: str
    app: str
    steps: tuple[str, ...]
    pinned: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.steps:
            raise ValidationError(f"chain ({self.device}, {self.app}): needs at least one step")
        for s in self.pinned:
            if not 1 <= s <= len(self.steps):
                raise ValidationError(
                    f"chain ({self.device}, {self.app}): pinned seq {s} outside 1..{len(self.steps)}"
                )

    def requests(self) -> list[RequestId]:
        return [RequestId(self.device, self.app, s) for s in range(1, len(self.steps) + 1)]

    def ftype(self, seq: int) -> str:
        return self.steps[seq - 1]


@dataclass(frozen=True)
class Scenario:
    """Complete solver input: devices, function pool, comm model, chains."""

    devices: tuple[DeviceSpec, ...]
    functions: tuple[FunctionInstance, ...]
    comm: CommCostModel
    chains: tuple[ChainSpec, ...]
    interval: float = 60.0  # wall-clock seconds represented by one cost unit
    rng_seed: int = 0

    def __post_init__(self):
        ids = [d.id for d in self.devices]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate device id")
        if not any(d.tier is Tier.TIER1 for d in self.devices):
            raise ValidationError("scenario needs at least one Tier1 device")
        known = set(ids)
        owners: set[tuple[str, str]] = set()
        hosted: dict[str, set[str]] = {}
        for f in self.functions:
            if f.host not in known:
                raise ValidationError(f"instance ({f.host}, {f.ftype}): unknown host")
            if (f.host, f.ftype) in owners:
                raise ValidationError(f"instance ({f.host}, {f.ftype}): duplicate")
            owners.add((f.host, f.ftype))
            hosted.setdefault(f.ftype, set()).add(f.host)
        seen_chains = set()
        for c in self.chains:
            if c.device not in known:
                raise ValidationError(f"chain ({c.device}, {c.app}): unknown origin device")
            if (c.device, c.app) in seen_chains:
                raise ValidationError(f"chain ({c.device}, {c.app}): duplicate")
            seen_chains.add((c.device, c.app))
            for s, ftype in enumerate(c.steps, start=1):
                if ftype not in hosted:
                    raise ValidationError(
                        f"unhostable step: chain ({c.device}, {c.app}) step {s} "
                        f"type {ftype!r} owned by no device"
                    )
                pin = c.pinned.get(s)
                if pin is not None and pin not in hosted[ftype]:
                    raise ValidationError(
                        f"chain ({c.device}, {c.app}) step {s}: pinned host {pin!r} "
                        f"owns no {ftype!r} instance"
                    )
        if self.interval <= 0:
            raise ValidationError("interval must be > 0")

    def device(self, device_id: str) -> DeviceSpec:
        for d in self.devices:
            if d.id == device_id:
                return d
        raise KeyError(device_id)

    def hosts_of(self, ftype: str) -> list[str]:
        return sorted(f.host for f in self.functions if f.ftype == ftype)

    def instance(self, host: str, ftype: str) -> FunctionInstance:
        for f in self.functions:
            if f.host == host and f.ftype == ftype:
                return f
        raise KeyError((host, ftype))

    def requests(self) -> list[RequestId]:
        out: list[RequestId] = []
        for c in sorted(self.chains, key=lambda c: (c.device, c.app)):
            out.extend(c.requests())
        return out

    def chain_of(self, rid: RequestId) -> ChainSpec:
        for c in self.chains:
            if c.device == rid.device and c.app == rid.app:
                return c
        raise KeyError(rid)


@dataclass(frozen=True)
class CostTable:
    """Energy table with one row per function instance and one column per request.

    fvec[row][dev]: instance execution cost, nonzero only at the host.
    cell(row, request): per-device comm-cost vector; nonzero only at requester
    and host, both components zero when they coincide, UNREACHABLE on type
    mismatch.
    """

    device_ids: tuple[str, ...]
    instances: tuple[FunctionInstance, ...]
    request_ids: tuple[RequestId, ...]
    request_types: tuple[str, ...]
    fvec: tuple[tuple[float, ...], ...]
    cells: tuple[tuple[tuple[float, ...] | None, ...], ...]  # None = unreachable

    def row(self, host: str, ftype: str) -> int:
        for i, inst in enumerate(self.instances):
            if inst.host == host and inst.ftype == ftype:
                return i
        raise KeyError((host, ftype))

    def col(self, rid: RequestId) -> int:
        return self.request_ids.index(rid)

    def cell(self, row: int, col: int) -> tuple[float, ...]:
        c = self.cells[row][col]
        if c is None:
            return tuple(UNREACHABLE for _ in self.device_ids)
        return c

    def reachable(self, row: int, col: int) -> bool:
        return self.cells[row][col] is not None


def build_cost_table(s: Scenario) -> CostTable:
    """Materialize the instance x request energy table used by the solvers."""
    dev_ids = tuple(d.id for d in s.devices)
    dev_index = {d: i for i, d in enumerate(dev_ids)}
    instances = tuple(sorted(s.functions, key=lambda f: (f.host, f.ftype)))
    rids = tuple(s.requests())
    rtypes = tuple(s.chain_of(r).ftype(r.seq) for r in rids)

    fvec = []
    for inst in instances:
        v = [0.0] * len(dev_ids)
        v[dev_index[inst.host]] = inst.cost
        fvec.append(tuple(v))

    cells: list[tuple[tuple[float, ...] | None, ...]] = []
    for inst in instances:
        row: list[tuple[float, ...] | None] = []
        for rid, ftype in zip(rids, rtypes):
            if ftype != inst.ftype:
                row.append(None)
                continue
            v = [0.0] * len(dev_ids)
            q, h = rid.device, inst.host
            if q != h:
                v[dev_index[q]] = s.comm.request_mj(q, h, ftype)
                v[dev_index[h]] = s.comm.serve_mj(q, h, ftype)
            row.append(tuple(v))
        cells.append(tuple(row))
    return CostTable(dev_ids, instances, rids, rtypes, tuple(fvec), tuple(cells))


# ---------------------------------------------------------------------------
# scenario file round trip

_TOP_KEYS = {"interval_s", "rng_seed", "devices", "functions", "comm", "chains"}
_DEVICE_KEYS = {
    "id", "tier", "capacity_mah", "voltage", "charge",
    "baseline_drain_mj", "idle_mj", "min_lifetime", "availability",
}
_FUNCTION_KEYS = {"host", "type", "cost_mj"}
_PAIR_KEYS = {"from", "to", "request_mj", "serve_mj"}
_RADIO_KEYS = {"tx_mw", "rx_mw", "idle_mj", "throughput_bps"}
_CHAIN_KEYS = {"device", "app", "steps", "pinned"}


def _reject_unknown(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ValidationError(f"{where}: unknown key {sorted(unknown)[0]!r}")


def load_scenario(path: str | os.PathLike) -> Scenario:
    """Load and fully validate a scenario file (UTF-8 JSON)."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed JSON in {path}: {e}") from e
    return scenario_from_dict(raw)


def scenario_from_dict(raw: dict) -> Scenario:
    if not isinstance(raw, dict):
        raise ValidationError("top level must be an object")
    _reject_unknown(raw, _TOP_KEYS, "top level")
    for key in ("devices", "functions", "chains"):
        if key not in raw:
            raise ValidationError(f"missing top-level key {key!r}")

    devices = []
    for obj in raw["devices"]:
        _reject_unknown(obj, _DEVICE_KEYS, f"device {obj.get('id')!r}")
        if "id" not in obj or "capacity_mah" not in obj:
            raise ValidationError("device entries need 'id' and 'capacity_mah'")
        tier_raw = obj.get("tier", "Tier1")
        try:
            tier = Tier(tier_raw)
        except ValueError:
            raise ValidationError(f"device {obj['id']!r}: unknown tier {tier_raw!r}") from None
        avail = obj.get("availability")
        devices.append(DeviceSpec(
            id=obj["id"],
            tier=tier,
            capacity=float(obj["capacity_mah"]),
            voltage=float(obj.get("voltage", 3.8)),
            initial_charge=float(obj.get("charge", 1.0)),
            baseline_drain=float(obj.get("baseline_drain_mj", 0.0)),
            idle_cost=float(obj.get("idle_mj", 0.0)),
            min_lifetime=float(obj.get("min_lifetime", 0.0)),
            availability=(int(avail[0]), int(avail[1])) if avail is not None else None,
        ))

    functions = []
    for obj in raw["functions"]:
        _reject_unknown(obj, _FUNCTION_KEYS, f"function {obj.get('type')!r}")
        functions.append(FunctionInstance(
            host=obj["host"], ftype=obj["type"], cost=float(obj["cost_mj"]),
        ))

    comm = _comm_from_dict(raw.get("comm", {}), devices)

    chains = []
    for obj in raw["chains"]:
        _reject_unknown(obj, _CHAIN_KEYS, f"chain ({obj.get('device')!r}, {obj.get('app')!r})")
        pinned = {int(k): v for k, v in obj.get("pinned", {}).items()}
        chains.append(ChainSpec(
            device=obj["device"], app=obj["app"],
            steps=tuple(obj["steps"]), pinned=pinned,
        ))

    return Scenario(
        devices=tuple(devices),
        functions=tuple(functions),
        comm=comm,
        chains=tuple(chains),
        interval=float(raw.get("interval_s", 60.0)),
        rng_seed=int(raw.get("rng_seed", 0)),
    )


def _comm_from_dict(obj: dict, devices: list[DeviceSpec]) -> CommCostModel:
    _reject_unknown(obj, {"pairs", "radio", "bytes_per_interval"}, "comm")
    if "pairs" in obj and "radio" in obj:
        raise ValidationError("comm: give either 'pairs' or 'radio', not both")
    known = {d.id for d in devices}
    if "pairs" in obj:
        pairs = {}
        for p in obj["pairs"]:
            _reject_unknown(p, _PAIR_KEYS, "comm pair")
            if p["from"] not in known or p["to"] not in known:
                raise ValidationError(f"comm pair ({p['from']!r}, {p['to']!r}): unknown device")
            pairs[(p["from"], p["to"])] = (float(p["request_mj"]), float(p["serve_mj"]))
        return CommCostModel(pairs=pairs)
    if "radio" in obj:
        radios = {}
        for dev_id, r in obj["radio"].items():
            if dev_id not in known:
                raise ValidationError(f"comm radio: unknown device {dev_id!r}")
            _reject_unknown(r, _RADIO_KEYS, f"radio {dev_id!r}")
            radios[dev_id] = RadioProfile(
                tx_mw=float(r["tx_mw"]), rx_mw=float(r["rx_mw"]),
                idle_mj=float(r.get("idle_mj", 0.0)),
                throughput_bps=float(r["throughput_bps"]),
            )
        missing = known - set(radios)
        if missing:
            raise ValidationError(f"comm radio: missing profile for {sorted(missing)[0]!r}")
        for d in devices:
            r = radios[d.id]
            if d.idle_cost and r.idle_mj and d.idle_cost != r.idle_mj:
                raise ValidationError(f"device {d.id!r}: conflicting idle_mj values")
        bpi = {k: float(v) for k, v in obj.get("bytes_per_interval", {}).items()}
        return CommCostModel(radios=radios, bytes_per_interval=bpi)
    return CommCostModel()


def device_idle_mj(s: Scenario, device_id: str) -> float:
    """Effective per-interval idle cost: device value, else its radio profile's."""
    d = s.device(device_id)
    if d.idle_cost:
        return d.idle_cost
    if s.comm.radios and device_id in s.comm.radios:
        return s.comm.radios[device_id].idle_mj
    return d.idle_cost


def scenario_to_dict(s: Scenario) -> dict:
    devices = []
    for d in s.devices:
        obj: dict = {"id": d.id, "tier": d.tier.value, "capacity_mah": d.capacity}
        obj["voltage"] = d.voltage
        obj["charge"] = d.initial_charge
        obj["baseline_drain_mj"] = d.baseline_drain
        obj["idle_mj"] = d.idle_cost
        obj["min_lifetime"] = d.min_lifetime
        if d.availability is not None:
            obj["availability"] = list(d.availability)
        devices.append(obj)
    functions = [{"host": f.host, "type": f.ftype, "cost_mj": f.cost} for f in s.functions]
    comm: dict = {}
    if s.comm.pairs is not None:
        comm["pairs"] = [
            {"from": a, "to": b, "request_mj": req, "serve_mj": srv}
            for (a, b), (req, srv) in sorted(s.comm.pairs.items())
        ]
    elif s.comm.radios is not None:
        comm["radio"] = {
            dev: {
                "tx_mw": r.tx_mw, "rx_mw": r.rx_mw,
                "idle_mj": r.idle_mj, "throughput_bps": r.throughput_bps,
            }
            for dev, r in sorted(s.comm.radios.items())
        }
        comm["bytes_per_interval"] = dict(sorted(s.comm.bytes_per_interval.items()))
    chains = [
        {
            "device": c.device, "app": c.app, "steps": list(c.steps),
            "pinned": {str(k): v for k, v in sorted(c.pinned.items())},
        }
        for c in s.chains
    ]
    return {
        "interval_s": s.interval,
        "rng_seed": s.rng_seed,
        "devices": devices,
        "functions": functions,
        "comm": comm,
        "chains": chains,
    }


def save_scenario(s: Scenario, path: str | os.PathLike) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(s), fh, indent=2, sort_keys=False)
        fh.write("\n")
    os.replace(tmp, path)
