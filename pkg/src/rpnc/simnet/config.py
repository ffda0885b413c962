"""Simulation configuration tree, loaded from YAML (or JSON) and validated."""

from __future__ import annotations

from enum import Enum
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..errors import ConfigError


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Scheme(str, Enum):
    RPNC = "rpnc"
    TS = "ts"


class TrafficMode(str, Enum):
    SATURATED = "saturated"
    RELIABLE = "reliable"
    ECHO = "echo"


class RunConfig(_Section):
    slots: int = Field(10_000, ge=1)
    seed: int = 1
    scheme: Scheme = Scheme.RPNC


class ProtocolConfig(_Section):
    slot_duration: float = Field(0.01, gt=0)
    window: int = Field(10, ge=1)
    tx_gap: int = Field(0, ge=0)
    realign: bool = True
    one_slot_ahead: bool = True
    arq: bool = True
    alpha: float = Field(0.125, gt=0, lt=1)
    beta: float = Field(0.25, gt=0, lt=1)
    max_window: int = Field(127, ge=1, le=127)
    ack_delay: int = Field(2, ge=0)
    data_size: int = Field(1516, ge=1, le=2047)
    decode_latency: float = Field(0.6, ge=0, lt=1, description="fraction of a slot after reception ends")
    encode_latency: float = Field(0.001, ge=0)


class OfdmConfig(_Section):
    n_subcarriers: int = 64
    cp_len: int = 32
    sts_len: int = 32
    bandwidth: float = 5e6
    preamble_seed: int = 7


class ClockConfig(_Section):
    drift_ppm_a: float = 20.0
    drift_ppm_b: float = -20.0
    drift_ppm_relay: float = 0.0
    start_a: float = Field(-0.0031234567, description="true time of node A's first radio sample")
    start_b: float = -0.0047654321
    start_relay: float = 0.0


class LatencyConfig(_Section):
    delta_min: float = Field(0.0005, ge=0)
    delta_max: float = Field(0.004, ge=0)
    phi_min: float = Field(0.0005, ge=0)
    phi_max: float = Field(0.004, ge=0)

    @model_validator(mode="after")
    def _ordered(self):
        if self.delta_min > self.delta_max or self.phi_min > self.phi_max:
            raise ValueError("latency minimum exceeds maximum")
        return self


class ChannelConfig(_Section):
    snr_db: float = 18.0
    per_uplink: float | None = Field(None, ge=0, le=1, description="fixed PER for every uplink reception")
    per_downlink: float | None = Field(None, ge=0, le=1, description="fixed PER for every downlink reception")
    per_midpoint_db: float = 6.0
    per_slope_per_db: float = 1.2
    xor_penalty_db: float = 2.0
    taps_db: list[float] = Field(default_factory=lambda: [0.0])
    fading: bool = False
    propagation_delay: float = Field(0.0, ge=0)


class TrafficConfig(_Section):
    mode: TrafficMode = TrafficMode.SATURATED
    payload_size: int = Field(1516, ge=1, le=2047)
    payloads: int | None = Field(None, ge=1, description="payloads per direction for reliable mode")
    echo_interval_slots: int = Field(20, ge=1)


class SimConfig(_Section):
    run: RunConfig = RunConfig()
    protocol: ProtocolConfig = ProtocolConfig()
    ofdm: OfdmConfig = OfdmConfig()
    clocks: ClockConfig = ClockConfig()
    latency: LatencyConfig = LatencyConfig()
    channel: ChannelConfig = ChannelConfig()
    traffic: TrafficConfig = TrafficConfig()

    @model_validator(mode="after")
    def _consistent(self):
        if self.latency.delta_min + self.latency.phi_min >= self.protocol.slot_duration:
            raise ValueError("delta + phi can never fit inside one slot")
        if self.traffic.payload_size > self.protocol.data_size:
            raise ValueError("payload_size exceeds the fixed data section")
        return self

    def with_overrides(self, **sections: dict[str, Any]) -> "SimConfig":
        """Copy with per-section field overrides, e.g. ``with_overrides(run={"slots": 100})``."""
        data = self.model_dump(mode="json")
        data = _merge(data, sections)
        return parse_config(data)


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def parse_config(data: dict | None) -> SimConfig:
    try:
        return SimConfig.model_validate(data or {})
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path | None, overrides: dict | None = None) -> SimConfig:
    data: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            loaded = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if loaded is not None and not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        data = loaded or {}
    if overrides:
        data = _merge(data, overrides)
    return parse_config(data)
