"""Assembles luminaires, detectors and channels for a named scheme."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from vlcsim.analysis import ReceiverTemplate
from vlcsim.geometry import (
    ChannelMatrix,
    Luminaire,
    NoiseModel,
    PlacementKind,
    RoomConfig,
    TransceiverLayout,
    build_channel_matrix,
    detector_array,
    generate_placement,
)
from vlcsim.mappers import ComplexAlphabet, Scheme, SignalSet, enumerate_signal_set, parse_modulation
from vlcsim.ofdm import OfdmConfig, OfdmScheme

SCHEMES = ("qcm", "qcm-pr", "dcm", "sm-dcm", "qcm-ofdm", "dcm-ofdm")
_DEFAULT_PLACEMENT = {
    "qcm": PlacementKind.QCM_GRID,
    "qcm-pr": PlacementKind.QCM_GRID,
    "qcm-ofdm": PlacementKind.QCM_GRID,
    "dcm": PlacementKind.QCM_GRID,
    "dcm-ofdm": PlacementKind.QCM_GRID,
    "sm-dcm": PlacementKind.SMDCM_P2,
}
_TWO_LED = ("dcm", "dcm-ofdm")


@dataclass(frozen=True)
class TransmitterConfig:
    d_tx: float = 1.0
    height: float = 3.0
    center: tuple | None = None  # room center when None
    half_power_semiangle_deg: float = 60.0
    normal: tuple = (0.0, 0.0, -1.0)
    placement: str = "auto"
    led_power_w: float = 1.0


@dataclass(frozen=True)
class ReceiverConfig:
    template: ReceiverTemplate = field(default_factory=ReceiverTemplate)
    center: tuple | None = None


@dataclass(frozen=True)
class SchemeSpec:
    scheme: str = "qcm"
    modulation: str = "qam-4"
    rotation_deg: float = 0.0
    n_subcarriers: int = 8
    detector: str = "ml"
    structured: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {', '.join(SCHEMES)}")
        ofdm = self.scheme.endswith("-ofdm")
        allowed = ("zf", "md") if ofdm else ("ml",)
        if self.detector not in allowed:
            raise ValueError(f"detector {self.detector!r} is not valid for {self.scheme}; use {' or '.join(allowed)}")

    @property
    def is_ofdm(self) -> bool:
        return self.scheme.endswith("-ofdm")

    @property
    def alphabet(self) -> ComplexAlphabet:
        return parse_modulation(self.modulation)

    @property
    def theta(self) -> float:
        return math.radians(self.rotation_deg) if self.scheme == "qcm-pr" else 0.0

    def signal_set(self) -> SignalSet:
        if self.is_ofdm:
            raise ValueError("OFDM schemes have no per-use signal set")
        return enumerate_signal_set(Scheme(self.scheme), self.alphabet, self.theta)

    def ofdm_config(self) -> OfdmConfig:
        return OfdmConfig(self.alphabet, OfdmScheme(self.scheme), self.n_subcarriers, self.structured)


@dataclass(frozen=True)
class SystemConfig:
    room: RoomConfig = field(default_factory=RoomConfig)
    transmitter: TransmitterConfig = field(default_factory=TransmitterConfig)
    receiver: ReceiverConfig = field(default_factory=ReceiverConfig)
    noise: NoiseModel = field(default_factory=NoiseModel)

    def with_d_tx(self, d_tx: float) -> "SystemConfig":
        return replace(self, transmitter=replace(self.transmitter, d_tx=d_tx))

    def placement_kind(self, scheme: str) -> PlacementKind:
        if self.transmitter.placement == "auto":
            return _DEFAULT_PLACEMENT[scheme]
        return PlacementKind(self.transmitter.placement)

    def luminaires(self, scheme: str) -> tuple:
        tx = self.transmitter
        center = tx.center if tx.center is not None else self.room.center
        placement = generate_placement(self.placement_kind(scheme), tx.d_tx, center, tx.height, self.room)
        positions = placement.slot_positions
        if scheme in _TWO_LED:
            positions = positions[:2]
        return tuple(Luminaire(p, np.asarray(tx.normal, float), tx.half_power_semiangle_deg) for p in positions)

    def detectors(self) -> tuple:
        rx = self.receiver
        t = rx.template
        center = rx.center if rx.center is not None else self.room.center
        return detector_array(
            center,
            t.d_rx,
            t.height,
            normal=np.asarray(t.normal, float),
            area_m2=t.area_m2,
            fov_deg=t.fov_deg,
            responsivity_a=t.responsivity_a,
        )

    def layout(self, scheme: str) -> TransceiverLayout:
        layout = TransceiverLayout(
            self.luminaires(scheme), self.detectors(), self.transmitter.d_tx, self.receiver.template.d_rx
        )
        layout.check_inside(self.room)
        return layout

    def channel(self, scheme: str) -> ChannelMatrix:
        return build_channel_matrix(self.layout(scheme))
