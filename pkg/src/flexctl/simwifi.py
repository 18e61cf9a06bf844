"""Simulated 802.11 device module.

Deterministic under a fixed seed: every scan tick emits one neighbor
observation per configured neighbor with rssi = base +/- 2 dB of seeded
uniform jitter, plus a synthetic spectral-scan sample event. The module is
fully usable standalone (plain method calls, no agent required); the periodic
scan only runs when hosted by an agent.
"""
from __future__ import annotations

import hashlib
import random

from flexctl.entities import DeviceModule, bind_function
from flexctl.errors import OutOfRange

CHANNEL_RANGE = (1, 14)
TX_POWER_RANGE = (0, 30)

NEIGHBOR_OBSERVATION_EVENT = "NeighborObservationEvent"
SPECTRAL_SCAN_EVENT = "SpectralScanSampleEvent"


def _default_mac(name: str, seed: int) -> str:
    digest = hashlib.sha1(f"{name}:{seed}".encode()).digest()
    return "02:" + ":".join(f"{b:02x}" for b in digest[:5])


class SimWifiDevice(DeviceModule):
    def __init__(
        self,
        name: str = "sim-wifi",
        device: str | None = None,
        interfaces=None,
        channel: int = 1,
        tx_power_dbm: int = 10,
        neighbors=None,
        scan_interval_ms: int = 1000,
        seed: int = 0,
        scan_enabled: bool = True,
    ):
        super().__init__(name=name, device=device or "phy0")
        self.seed = int(seed)
        self._interfaces = []
        for entry in interfaces if interfaces is not None else ["wlan0"]:
            if isinstance(entry, str):
                entry = {"name": entry, "mac": _default_mac(entry, self.seed)}
            self._interfaces.append({"name": entry["name"], "mac": entry["mac"].lower()})
        self._channel = self._check_range(channel, CHANNEL_RANGE, "channel")
        self._tx_power = self._check_range(tx_power_dbm, TX_POWER_RANGE, "tx power")
        self.neighbors = [dict(n) for n in (neighbors or [])]
        self.scan_interval_ms = int(scan_interval_ms)
        self.scan_enabled = bool(scan_enabled)
        self._rng = random.Random(self.seed)
        self._tick = 0

    @staticmethod
    def _check_range(value, bounds, label: str) -> int:
        value = int(value)
        lo, hi = bounds
        if not lo <= value <= hi:
            raise OutOfRange(f"{label} {value} outside {lo}..{hi}")
        return value

    # -- bound operations -----------------------------------------------------

    @bind_function("get_interfaces")
    def get_interfaces(self) -> list:
        return [i["name"] for i in self._interfaces]

    @bind_function("get_interface_info")
    def get_interface_info(self) -> list:
        return [dict(i) for i in self._interfaces]

    @bind_function("set_channel")
    def set_channel(self, channel: int) -> bool:
        self._channel = self._check_range(channel, CHANNEL_RANGE, "channel")
        return True

    @bind_function("get_channel")
    def get_channel(self) -> int:
        return self._channel

    @bind_function("set_tx_power")
    def set_tx_power(self, dbm: int) -> bool:
        self._tx_power = self._check_range(dbm, TX_POWER_RANGE, "tx power")
        return True

    @bind_function("get_tx_power")
    def get_tx_power(self) -> int:
        return self._tx_power

    # unified-interface aliases for the same implementations
    @bind_function("radio.set_channel")
    def _radio_set_channel(self, channel: int) -> bool:
        return self.set_channel(channel)

    @bind_function("radio.get_channel")
    def _radio_get_channel(self) -> int:
        return self.get_channel()

    @bind_function("radio.set_tx_power")
    def _radio_set_tx_power(self, dbm: int) -> bool:
        return self.set_tx_power(dbm)

    @bind_function("radio.get_tx_power")
    def _radio_get_tx_power(self) -> int:
        return self.get_tx_power()

    # -- periodic scan ------------------------------------------------------------

    def on_start(self) -> None:
        if self.scan_enabled and self.neighbors and self._runtime is not None:
            self._schedule_tick()

    def _schedule_tick(self) -> None:
        self._runtime.schedule_entity_call(self, self.scan_interval_ms, self._scan_tick)

    def _scan_tick(self) -> None:
        if not self.is_started or not self.scan_enabled:
            return
        self.observe_once()
        self._schedule_tick()

    def observe_once(self) -> list:
        """One deterministic scan tick; emits events when hosted by an agent."""
        vts_ms = self._tick * self.scan_interval_ms
        observations = []
        for neighbor in self.neighbors:
            jitter = self._rng.uniform(-2.0, 2.0)
            observations.append(
                {
                    "transmitter": neighbor["mac"].lower(),
                    "rssi_dbm": neighbor["base_rssi_dbm"] + jitter,
                    "bitrate_mbps": neighbor.get("bitrate_mbps", 0),
                    "channel": self._channel,
                    "vts_ms": vts_ms,
                }
            )
        sample = {
            "channel": self._channel,
            "vts_ms": vts_ms,
            "samples": [round(self._rng.uniform(-100.0, -30.0), 2) for _ in range(4)],
        }
        self._tick += 1
        if self.is_started and self._runtime is not None:
            for obs in observations:
                self.send_event(NEIGHBOR_OBSERVATION_EVENT, obs, mode="node-broadcast")
            self.send_event(SPECTRAL_SCAN_EVENT, sample, mode="global-broadcast")
        return observations
