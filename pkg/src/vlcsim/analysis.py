"""Closed-form performance analysis: pairwise error probabilities, union
bounds, placement distance metrics, and spatial SNR/rate maps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfc

from vlcsim.geometry import (
    ChannelMatrix,
    NoiseModel,
    RoomConfig,
    gain_kernel,
    mean_square_received_power,
    noise_variance,
    square_grid,
)
from vlcsim.mappers import Scheme, SignalSet, enumerate_signal_set, make_alphabet, popcount

BOUND_CLAMP = 0.5
LADDER = (2, 4, 8, 16, 32, 64)


def q_function(x):
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def _h(H) -> np.ndarray:
    return H.entries if isinstance(H, ChannelMatrix) else np.asarray(H, dtype=float)


def pep(x1, x2, H: ChannelMatrix, a: float, sigma: float) -> float:
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    d = np.linalg.norm(_h(H) @ (np.asarray(x2, float) - np.asarray(x1, float)))
    return float(q_function(a * d / (2 * sigma)))


def _pairs(signal_set: SignalSet):
    """Difference vectors and Hamming weights of the unordered pairs i < j."""
    i, j = np.triu_indices(signal_set.size, k=1)
    delta = signal_set.vectors[j] - signal_set.vectors[i]
    weight = popcount(signal_set.labels[i] ^ signal_set.labels[j]).astype(float)
    return delta, weight


def union_bound_ber(signal_set: SignalSet, H: ChannelMatrix, a: float, sigma: float, clamp: bool = True) -> float:
    """Hamming-weighted pairwise-error union bound on the bit error rate."""
    if signal_set.size < 2:
        raise ValueError("union bound needs at least two vectors")
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    delta, weight = _pairs(signal_set)
    dist = np.linalg.norm(delta @ _h(H).T, axis=1)
    # Each unordered pair appears twice in the ordered double sum.
    raw = 2.0 * float(np.sum(q_function(a * dist / (2 * sigma)) * weight)) / (signal_set.size * signal_set.bits_per_use)
    return min(raw, BOUND_CLAMP) if clamp else raw


def sigma_from_ebn0(a: float, pr2: float, bits_per_use: float, eb_n0_db: float) -> float:
    """Noise std giving Eb/N0 = a^2 P_r^2 / (eta sigma^2)."""
    return math.sqrt(a * a * pr2 / (bits_per_use * 10 ** (eb_n0_db / 10)))


@dataclass(frozen=True)
class BoundCurve:
    points: tuple  # (eb_n0_db, clamped bound)
    raw: tuple = ()

    def as_arrays(self):
        arr = np.array(self.points, dtype=float).reshape(-1, 2)
        return arr[:, 0], arr[:, 1]


def bound_curve(signal_set: SignalSet, H: ChannelMatrix, eb_n0_db) -> BoundCurve:
    a = H.responsivity_a
    pr2 = mean_square_received_power(H, signal_set)
    pts, raw = [], []
    for e in eb_n0_db:
        sigma = sigma_from_ebn0(a, pr2, signal_set.bits_per_use, e)
        r = union_bound_ber(signal_set, H, a, sigma, clamp=False)
        pts.append((float(e), min(r, BOUND_CLAMP)))
        raw.append(r)
    return BoundCurve(tuple(pts), tuple(raw))


def dmin_davg(signal_set: SignalSet, H) -> tuple[float, float]:
    """Min and mean of ||H(x_j - x_i)||^2 over unordered distinct pairs."""
    if signal_set.size < 2:
        raise ValueError("distance metrics need at least two vectors")
    delta, _ = _pairs(signal_set)
    d2 = np.sum((delta @ _h(H).T) ** 2, axis=1)
    return float(d2.min()), float(d2.mean())


@dataclass(frozen=True)
class ReceiverTemplate:
    """A 2x2 photodiode array that is moved around the room floor."""

    d_rx: float = 0.1
    height: float = 0.8
    area_m2: float = 1e-4
    fov_deg: float = 85.0
    responsivity_a: float = 1.0
    normal: tuple = (0.0, 0.0, 1.0)

    def positions(self, center) -> np.ndarray:
        return square_grid(center, self.d_rx, self.height)


@dataclass
class RateMap:
    x: np.ndarray
    y: np.ndarray
    gamma_db: np.ndarray  # (ny, nx); NaN marks no-data cells
    channels: np.ndarray  # (ny, nx, n_rx, n_tx)
    sigma2: np.ndarray  # (ny, nx)
    responsivity_a: float
    led_power_w: float
    rate: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.gamma_db)


def floor_grid(room: RoomConfig, resolution: float) -> tuple[np.ndarray, np.ndarray]:
    nx = math.ceil(room.length_m / resolution - 1e-9) + 1
    ny = math.ceil(room.width_m / resolution - 1e-9) + 1
    return np.arange(nx) * resolution, np.arange(ny) * resolution


def snr_map(
    room: RoomConfig,
    luminaires,
    receiver: ReceiverTemplate,
    noise: NoiseModel,
    resolution: float = 0.025,
    led_power_w: float = 1.0,
) -> RateMap:
    """Average received SNR per floor cell with every luminaire driven at led_power_w."""
    luminaires = tuple(luminaires)
    xs, ys = floor_grid(room, resolution)
    gx, gy = np.meshgrid(xs, ys)
    centers = np.stack([gx, gy], axis=-1)
    offsets = receiver.positions((0.0, 0.0))  # (4, 3) relative to the cell
    pd = np.concatenate([centers, np.zeros(centers.shape[:-1] + (1,))], axis=-1)[..., None, :] + offsets
    half = receiver.d_rx / 2
    tol = 1e-9
    inside = (
        (gx - half >= -tol)
        & (gx + half <= room.length_m + tol)
        & (gy - half >= -tol)
        & (gy + half <= room.width_m + tol)
    )
    led_pos = np.array([l.position for l in luminaires])
    led_nrm = np.array([l.normal for l in luminaires])
    modes = np.array([l.mode_number for l in luminaires])
    pd_nrm = np.asarray(receiver.normal, float)
    h = gain_kernel(
        led_pos[None, None, None, :, :],
        led_nrm[None, None, None, :, :],
        modes,
        pd[..., None, :],
        pd_nrm,
        receiver.area_m2,
        receiver.fov_deg,
    )  # (ny, nx, n_rx, n_tx)
    a = receiver.responsivity_a
    fixture = np.full(len(luminaires), led_power_w)
    pr2 = np.mean((h @ fixture) ** 2, axis=-1)
    sigma2 = noise_variance(noise, np.sqrt(pr2), a)
    gamma = a * a * pr2 / sigma2
    with np.errstate(divide="ignore"):
        gamma_db = 10 * np.log10(gamma)
    gamma_db = np.where(inside, gamma_db, np.nan)
    return RateMap(xs, ys, gamma_db, h, sigma2, a, led_power_w, meta={"resolution": resolution})


def ladder_sets(scheme, theta: float = 0.0) -> list[SignalSet]:
    """Signal sets of the rate ladder in ascending rate; SM-DCM stops at 6 bits per use."""
    scheme = Scheme(scheme)
    sets = []
    for m in LADDER:
        s = enumerate_signal_set(scheme, make_alphabet("qam", m), theta)
        if s.bits_per_use <= 6:
            sets.append(s)
    return sets


def _bound_over_cells(signal_set: SignalSet, h_cells, a, sigma_cells, scale: float, chunk: int = 4096) -> np.ndarray:
    delta, weight = _pairs(signal_set)
    delta = delta * scale
    norm = 2.0 / (signal_set.size * signal_set.bits_per_use)
    out = np.empty(h_cells.shape[0])
    step = max(1, chunk * 64 // max(1, delta.shape[0]))
    for start in range(0, h_cells.shape[0], step):
        hb = h_cells[start : start + step]
        img = hb @ delta.T  # (c, n_rx, pairs)
        dist = np.sqrt(np.einsum("crp,crp->cp", img, img))
        q = q_function(a * dist / (2 * sigma_cells[start : start + step, None]))
        out[start : start + step] = norm * (q @ weight)
    return out


def required_snr_db(signal_set: SignalSet, H, a: float, target_ber: float) -> float:
    """Average SNR (dB, own-set definition) at which the union bound meets the target."""
    pr2 = mean_square_received_power(H, signal_set)
    if pr2 == 0:
        return math.inf

    def excess(db):
        sigma = math.sqrt(a * a * pr2 / 10 ** (db / 10))
        return math.log(max(union_bound_ber(signal_set, H, a, sigma, clamp=False), 1e-300)) - math.log(target_ber)

    lo, hi = -50.0, 250.0
    if excess(hi) > 0:
        return math.inf
    if excess(lo) < 0:
        return lo
    return brentq(excess, lo, hi, xtol=1e-6)


def rate_contours(
    snr: RateMap,
    scheme,
    target_ber: float = 1e-5,
    method: str = "local",
    theta: float = 0.0,
    reference_cell=None,
) -> RateMap:
    """Largest ladder rate whose union bound meets the target in each cell.

    ``local`` bounds each cell with its own channel and noise, alphabets
    scaled so the peak intensity equals the LED power. ``reference`` derives
    one SNR threshold per alphabet from the channel at ``reference_cell``
    (room center by default) and compares it with each cell's SNR.
    """
    sets = ladder_sets(scheme, theta)
    if sets[0].n_tx != snr.channels.shape[-1]:
        raise ValueError(
            f"map was built for {snr.channels.shape[-1]} luminaires but {Scheme(scheme).value} drives {sets[0].n_tx}"
        )
    valid = snr.valid
    rate = np.zeros(snr.gamma_db.shape)
    if method == "local":
        h_cells = snr.channels[valid]
        sig = np.sqrt(snr.sigma2[valid])
        best = np.zeros(h_cells.shape[0])
        for s in sets:
            scale = snr.led_power_w / np.max(s.vectors)
            ok = _bound_over_cells(s, h_cells, snr.responsivity_a, sig, scale) <= target_ber
            best = np.where(ok, s.bits_per_use, best)
        rate[valid] = best
    elif method == "reference":
        if reference_cell is None:
            iy, ix = len(snr.y) // 2, len(snr.x) // 2
        else:
            ix = int(np.argmin(np.abs(snr.x - reference_cell[0])))
            iy = int(np.argmin(np.abs(snr.y - reference_cell[1])))
        h_ref = ChannelMatrix(snr.channels[iy, ix], snr.responsivity_a)
        for s in sets:
            need = required_snr_db(s, h_ref, snr.responsivity_a, target_ber)
            rate = np.where(valid & (snr.gamma_db >= need), s.bits_per_use, rate)
    else:
        raise ValueError(f"unknown rate-contour method {method!r}")
    rate = np.where(valid, rate, np.nan)
    meta = dict(snr.meta, scheme=Scheme(scheme).value, target_ber=target_ber, method=method)
    return RateMap(
        snr.x, snr.y, snr.gamma_db, snr.channels, snr.sigma2, snr.responsivity_a, snr.led_power_w, rate, meta
    )


def coverage_percentage(rate_map: RateMap, eta: float) -> float:
    """Share of the mapped (data-bearing) cells whose rate is at least eta."""
    if rate_map.rate is None:
        raise ValueError("map has no rates; run rate_contours first")
    valid = rate_map.valid
    total = int(valid.sum())
    if total == 0:
        raise ValueError("map has no data-bearing cells")
    return 100.0 * int(np.sum(rate_map.rate[valid] >= eta)) / total
