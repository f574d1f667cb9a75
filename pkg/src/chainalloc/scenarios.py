"""Built-in scenarios: measured per-minute energy figures for small device pools."""

from __future__ import annotations

from .model import (
    ChainSpec,
    CommCostModel,
    DeviceSpec,
    FunctionInstance,
    RadioProfile,
    Scenario,
    Tier,
)

# shared Bluetooth link assumptions for the radio-profile scenarios
BT_THROUGHPUT_BPS = 2_000_000.0
SENSOR_BYTES_PER_INTERVAL = 13_824.0  # ~13.5 KB exchanged per interval


def phone_watch_sensors() -> Scenario:
    """Smartphone + smartwatch sharing accelerometer and gyroscope functions.

    Phone at 20% of 2300 mAh, watch at 70% of 410 mAh; idle energy neglected.
    Cross-device transfers cost the phone 142 mJ and the watch 36 mJ per
    interval regardless of direction.
    """
    devices = (
        DeviceSpec(id="phone", tier=Tier.TIER1, capacity=2300.0, voltage=3.8,
                   initial_charge=0.2, baseline_drain=150.0),
        DeviceSpec(id="watch", tier=Tier.TIER1, capacity=410.0, voltage=3.8,
                   initial_charge=0.7, baseline_drain=70.0),
    )
    functions = (
        FunctionInstance(host="phone", ftype="acc", cost=300.0),
        FunctionInstance(host="phone", ftype="gyro", cost=660.0),
        FunctionInstance(host="watch", ftype="acc", cost=600.0),
        FunctionInstance(host="watch", ftype="gyro", cost=960.0),
    )
    comm = CommCostModel(pairs={
        ("phone", "watch"): (142.0, 36.0),  # phone receives, watch transmits
        ("watch", "phone"): (36.0, 142.0),  # watch receives, phone transmits
    })
    chains = (
        ChainSpec(device="phone", app="acc_app", steps=("acc",)),
        ChainSpec(device="phone", app="gyro_app", steps=("gyro",)),
        ChainSpec(device="watch", app="acc_app", steps=("acc",)),
        ChainSpec(device="watch", app="gyro_app", steps=("gyro",)),
    )
    return Scenario(devices=devices, functions=functions, comm=comm,
                    chains=chains, interval=60.0)


def accelerometer_pair(phone_charge: float = 1.0) -> Scenario:
    """Phone + watch both sampling the accelerometer at full rate, 30 s updates.

    Baseline drains size the phone for two days and the watch for a day and a
    half at full charge. Sensing power: 77.7 mW (phone), 164 mW (watch).
    """
    interval = 30.0
    phone_full = 2300.0 * 3.8 * 3600.0
    watch_full = 410.0 * 3.8 * 3600.0
    devices = (
        DeviceSpec(id="phone", tier=Tier.TIER1, capacity=2300.0, voltage=3.8,
                   initial_charge=phone_charge,
                   baseline_drain=phone_full / (2 * 86400.0 / interval)),
        DeviceSpec(id="watch", tier=Tier.TIER1, capacity=410.0, voltage=3.8,
                   initial_charge=1.0,
                   baseline_drain=watch_full / (1.5 * 86400.0 / interval)),
    )
    functions = (
        FunctionInstance(host="phone", ftype="acc", cost=77.7 * interval),
        FunctionInstance(host="watch", ftype="acc", cost=164.0 * interval),
    )
    comm = CommCostModel(
        radios={
            "phone": RadioProfile(tx_mw=520.0, rx_mw=520.0, idle_mj=605.0,
                                  throughput_bps=BT_THROUGHPUT_BPS),
            "watch": RadioProfile(tx_mw=180.0, rx_mw=180.0, idle_mj=190.3,
                                  throughput_bps=BT_THROUGHPUT_BPS),
        },
        bytes_per_interval={"acc": SENSOR_BYTES_PER_INTERVAL},
    )
    chains = (
        ChainSpec(device="phone", app="nav", steps=("acc",)),
        ChainSpec(device="watch", app="nav", steps=("acc",)),
    )
    return Scenario(devices=devices, functions=functions, comm=comm,
                    chains=chains, interval=interval)


def five_device_pan(
    sole_window: tuple[int, int] | None = None,
    laptop_window: tuple[int, int] | None = None,
) -> Scenario:
    """Three Tier-1 devices plus an intermittently attached sole and laptop.

    The glasses stream an annotated, encoded video feed (capture pinned to the
    glasses), the watch tracks fitness (step counting pinned to the watch), the
    phone navigates. Sole and laptop parameters are nominal values for a GPS
    insole and a mid-size laptop.
    """
    interval = 60.0
    day = 86400.0 / interval
    video_burst_s = 6.0  # capture runs in short bursts, not continuously

    def full(mah: float) -> float:
        return mah * 3.8 * 3600.0

    devices = (
        DeviceSpec(id="glasses", tier=Tier.TIER1, capacity=570.0,
                   baseline_drain=full(570.0) / day),
        DeviceSpec(id="laptop", tier=Tier.EXTENDED, capacity=5000.0,
                   baseline_drain=full(5000.0) / (2 * day),
                   availability=laptop_window),
        DeviceSpec(id="phone", tier=Tier.TIER1, capacity=2300.0,
                   baseline_drain=full(2300.0) / (2 * day)),
        DeviceSpec(id="sole", tier=Tier.TIER2, capacity=220.0,
                   baseline_drain=full(220.0) / day,
                   availability=sole_window),
        DeviceSpec(id="watch", tier=Tier.TIER1, capacity=410.0,
                   baseline_drain=full(410.0) / day),
    )
    mw = {
        ("phone", "gps"): 166.0, ("watch", "gps"): 148.0,
        ("glasses", "gps"): 155.0, ("sole", "gps"): 150.0,
        ("phone", "encode"): 1400.0, ("watch", "encode"): 860.0,
        ("glasses", "encode"): 900.0, ("laptop", "encode"): 500.0,
        ("phone", "stream"): 790.0, ("glasses", "stream"): 460.0,
        ("laptop", "stream"): 400.0,
        ("watch", "steps"): 5.0,
    }
    functions = (
        FunctionInstance(host="glasses", ftype="video", cost=2963.0 * video_burst_s),
    ) + tuple(
        FunctionInstance(host=h, ftype=t, cost=p * interval)
        for (h, t), p in sorted(mw.items())
    )
    comm = CommCostModel(
        radios={
            "phone": RadioProfile(520.0, 520.0, 605.0, BT_THROUGHPUT_BPS),
            "watch": RadioProfile(180.0, 180.0, 190.3, BT_THROUGHPUT_BPS),
            "glasses": RadioProfile(164.0, 164.0, 191.85, BT_THROUGHPUT_BPS),
            "sole": RadioProfile(100.0, 100.0, 150.0, BT_THROUGHPUT_BPS),
            "laptop": RadioProfile(300.0, 300.0, 100.0, BT_THROUGHPUT_BPS),
        },
        bytes_per_interval={t: SENSOR_BYTES_PER_INTERVAL
                            for t in ("video", "gps", "encode", "stream", "steps")},
    )
    chains = (
        ChainSpec(device="glasses", app="game",
                  steps=("video", "gps", "encode", "stream"),
                  pinned={1: "glasses"}),
        ChainSpec(device="watch", app="fitness",
                  steps=("gps", "steps"),
                  pinned={2: "watch"}),
        ChainSpec(device="phone", app="nav", steps=("gps",)),
    )
    return Scenario(devices=devices, functions=functions, comm=comm,
                    chains=chains, interval=interval)


BUILTIN = {
    "phone_watch_sensors": phone_watch_sensors,
    "accelerometer_pair": accelerometer_pair,
    "five_device_pan": five_device_pan,
}
