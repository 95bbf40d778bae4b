"""Indoor line-of-sight optical channel: devices, placements, gains and noise."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

GAIN_FLOOR = 1e-30
_POS_TOL = 1e-9


def direction_from_angles(elevation_deg: float, azimuth_deg: float = 0.0) -> np.ndarray:
    """Unit vector for an elevation/azimuth pair (elevation -90 points straight down)."""
    el = math.radians(elevation_deg)
    az = math.radians(azimuth_deg)
    v = np.array([math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)])
    # cos(+-90 deg) is 6e-17, not zero; keep vertical normals exact.
    v[np.abs(v) < 1e-15] = 0.0
    return v


def _vec3(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be a finite 3-vector, got {v!r}")
    arr.setflags(write=False)
    return arr


def _unit(v, name: str) -> np.ndarray:
    arr = _vec3(v, name)
    if abs(np.linalg.norm(arr) - 1.0) > 1e-9:
        raise ValueError(f"{name} must have unit norm, got norm {np.linalg.norm(arr)}")
    return arr


@dataclass(frozen=True)
class RoomConfig:
    length_m: float = 5.0
    width_m: float = 5.0
    height_m: float = 3.5

    def __post_init__(self):
        for name in ("length_m", "width_m", "height_m"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"room {name} must be > 0, got {value}")

    def contains(self, point) -> bool:
        x, y, z = point
        return (
            -_POS_TOL <= x <= self.length_m + _POS_TOL
            and -_POS_TOL <= y <= self.width_m + _POS_TOL
            and -_POS_TOL <= z <= self.height_m + _POS_TOL
        )

    @property
    def center(self) -> tuple[float, float]:
        return (self.length_m / 2, self.width_m / 2)


def lambertian_mode(half_power_semiangle_deg: float) -> float:
    """Lambertian order n = -ln 2 / ln cos(half-power semiangle)."""
    if not (0 < half_power_semiangle_deg < 90):
        raise ValueError(f"half-power semiangle must lie in (0, 90) degrees, got {half_power_semiangle_deg}")
    return -math.log(2.0) / math.log(math.cos(math.radians(half_power_semiangle_deg)))


@dataclass(frozen=True)
class Luminaire:
    position: np.ndarray
    normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -1.0]))
    half_power_semiangle_deg: float = 60.0

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position, "luminaire position"))
        object.__setattr__(self, "normal", _unit(self.normal, "luminaire normal"))
        lambertian_mode(self.half_power_semiangle_deg)

    @property
    def mode_number(self) -> float:
        return lambertian_mode(self.half_power_semiangle_deg)


@dataclass(frozen=True)
class Detector:
    position: np.ndarray
    normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    area_m2: float = 1e-4
    fov_deg: float = 85.0
    responsivity_a: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position, "detector position"))
        object.__setattr__(self, "normal", _unit(self.normal, "detector normal"))
        if not self.area_m2 > 0:
            raise ValueError(f"detector area must be > 0, got {self.area_m2}")
        if not (0 < self.fov_deg <= 90):
            raise ValueError(f"detector field of view must lie in (0, 90], got {self.fov_deg}")
        if not self.responsivity_a > 0:
            raise ValueError(f"responsivity must be > 0, got {self.responsivity_a}")


def gain_kernel(led_pos, led_normal, mode, pd_pos, pd_normal, area, fov_deg) -> np.ndarray:
    """Broadcasting LOS gain over arrays of positions (last axis is xyz).

    No coincidence check is done here; callers that can hit R = 0 must
    screen for it first.
    """
    d = np.asarray(pd_pos, float) - np.asarray(led_pos, float)
    r2 = np.einsum("...k,...k->...", d, d)
    r = np.sqrt(r2)
    cos_phi = np.einsum("...k,...k->...", d, np.asarray(led_normal, float)) / r
    cos_theta = -np.einsum("...k,...k->...", d, np.asarray(pd_normal, float)) / r
    cos_fov = math.cos(math.radians(fov_deg))
    visible = (cos_phi > 0) & (cos_theta > 0) & (cos_theta >= cos_fov - 1e-15)
    with np.errstate(invalid="ignore", divide="ignore"):
        g = (mode + 1) / (2 * math.pi) * np.power(np.clip(cos_phi, 0, None), mode) * cos_theta * area / r2
    g = np.where(visible, g, 0.0)
    return np.where(g < GAIN_FLOOR, 0.0, g)


def los_gain(led: Luminaire, pd: Detector) -> float:
    if np.linalg.norm(pd.position - led.position) == 0:
        raise ValueError("luminaire and detector positions coincide")
    return float(
        gain_kernel(led.position, led.normal, led.mode_number, pd.position, pd.normal, pd.area_m2, pd.fov_deg)
    )


@dataclass(frozen=True)
class ChannelMatrix:
    entries: np.ndarray
    responsivity_a: float = 1.0

    def __post_init__(self):
        h = np.array(self.entries, dtype=float, ndmin=2)
        if not np.all(np.isfinite(h)) or np.any(h < 0):
            raise ValueError("channel gains must be finite and nonnegative")
        h.setflags(write=False)
        object.__setattr__(self, "entries", h)

    @property
    def n_rx(self) -> int:
        return self.entries.shape[0]

    @property
    def n_tx(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class TransceiverLayout:
    luminaires: tuple
    detectors: tuple
    d_tx: float = 1.0
    d_rx: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "luminaires", tuple(self.luminaires))
        object.__setattr__(self, "detectors", tuple(self.detectors))
        if not self.luminaires or not self.detectors:
            raise ValueError("layout needs at least one luminaire and one detector")
        rs = {d.responsivity_a for d in self.detectors}
        if len(rs) != 1:
            raise ValueError("all detectors must share one responsivity")

    @property
    def responsivity_a(self) -> float:
        return self.detectors[0].responsivity_a

    def check_inside(self, room: RoomConfig) -> None:
        for dev in self.luminaires + self.detectors:
            if not room.contains(dev.position):
                raise ValueError(f"device at {tuple(dev.position)} lies outside the room")


def build_channel_matrix(layout: TransceiverLayout) -> ChannelMatrix:
    h = np.array([[los_gain(led, pd) for led in layout.luminaires] for pd in layout.detectors])
    return ChannelMatrix(h, layout.responsivity_a)


@dataclass(frozen=True)
class NoiseModel:
    q: float = 1.602e-19
    ambient_current_Ia: float = 5.84e-3
    noise_bw_factor_I2: float = 0.562
    symbol_interval_T: float = 5e-8
    amp_bandwidth_Ba: float = 5e7
    amp_noise_density_rho: float = 5e-12

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"noise parameter {name} must be > 0, got {value}")


def noise_variance(model: NoiseModel, received_power_Pr, responsivity_a: float):
    """Shot plus thermal noise variance at the photodiode output (A^2)."""
    pr = np.asarray(received_power_Pr, dtype=float)
    if np.any(pr < 0):
        raise ValueError("received power must be >= 0")
    shot = 2 * model.q * responsivity_a * (pr + model.ambient_current_Ia / responsivity_a)
    shot = shot * model.noise_bw_factor_I2 / model.symbol_interval_T
    sigma2 = shot + model.amp_bandwidth_Ba * model.amp_noise_density_rho**2
    return float(sigma2) if sigma2.ndim == 0 else sigma2


def _vectors_of(signal_set) -> np.ndarray:
    vec = getattr(signal_set, "vectors", signal_set)
    return np.array(vec, dtype=float, ndmin=2)


def mean_square_received_power(H, signal_set) -> float:
    """P_r^2 = (1/N_r) sum_i E|H_i x|^2 with E uniform over the set."""
    h = H.entries if isinstance(H, ChannelMatrix) else np.asarray(H, float)
    x = _vectors_of(signal_set)
    if x.size == 0:
        raise ValueError("signal set is empty")
    images = x @ h.T
    return float(np.mean(np.mean(images**2, axis=1)))


def average_received_snr(H: ChannelMatrix, signal_set, sigma2: float) -> float:
    if not sigma2 > 0:
        raise ValueError("sigma2 must be > 0")
    return H.responsivity_a**2 * mean_square_received_power(H, signal_set) / sigma2


class PlacementKind(enum.Enum):
    QCM_GRID = "qcm-grid"
    SMDCM_P1 = "p1"
    SMDCM_P2 = "p2"


# Grid corner indices in NW, NE, SW, SE order.
NW, NE, SW, SE = 0, 1, 2, 3

# Signal slot k (LED k+1) is driven at corner SLOT_ORDER[kind][k]. For SM-DCM,
# slots (0, 1) form BLOCK1 and (2, 3) form BLOCK2.
SLOT_ORDER = {
    PlacementKind.QCM_GRID: (NW, SE, NE, SW),
    PlacementKind.SMDCM_P1: (NW, SE, NE, SW),
    PlacementKind.SMDCM_P2: (NW, NE, SE, SW),
}


@dataclass(frozen=True)
class Placement:
    kind: PlacementKind
    corners: np.ndarray  # 4x3, NW, NE, SW, SE
    slots: tuple

    @property
    def slot_positions(self) -> np.ndarray:
        return self.corners[list(self.slots)]

    @property
    def blocks(self) -> tuple:
        """Corner indices of BLOCK1 and BLOCK2."""
        return (self.slots[0:2], self.slots[2:4])


def square_grid(center, side: float, height: float) -> np.ndarray:
    """Corners of a side x side square, rows NW, NE, SW, SE."""
    cx, cy = center
    h = side / 2
    return np.array(
        [[cx - h, cy + h, height], [cx + h, cy + h, height], [cx - h, cy - h, height], [cx + h, cy - h, height]]
    )


def generate_placement(kind, d_tx: float, center=(2.5, 2.5), height: float = 3.0, room: RoomConfig | None = None):
    kind = PlacementKind(kind)
    if not d_tx > 0:
        raise ValueError(f"d_tx must be > 0, got {d_tx}")
    room = room or RoomConfig()
    corners = square_grid(center, d_tx, height)
    for p in corners:
        if not room.contains(p):
            raise ValueError(f"LED grid with d_tx={d_tx} does not fit in the room")
    return Placement(kind, corners, SLOT_ORDER[kind])


def detector_array(center, d_rx: float = 0.1, height: float = 0.8, **detector_kwargs) -> tuple:
    return tuple(Detector(p, **detector_kwargs) for p in square_grid(center, d_rx, height))
