"""Deterministic, parallel bit-error-rate estimation and parameter sweeps.

The trial space of every Eb/N0 point is cut into fixed-size partitions.
Partition p of point k draws from its own generator seeded by
``SeedSequence(master_seed, spawn_key=(k, p))``. Partitions are reduced in
index order and the stop rule is applied to that ordered prefix, so results
do not depend on how many workers computed them.
"""

from __future__ import annotations

import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import beta

from vlcsim.analysis import sigma_from_ebn0
from vlcsim.detection import awgn_channel, nearest_image, received_images
from vlcsim.geometry import mean_square_received_power
from vlcsim.mappers import popcount
from vlcsim.ofdm import MdDetector, candidate_digits, dcm_ofdm_zf_indices, qcm_ofdm_zf_indices, transmit_rows
from vlcsim.ofdm import mean_square_received_power as ofdm_mean_square_power
from vlcsim.system import SchemeSpec, SystemConfig

PARTITION_BITS = 1 << 16


@dataclass(frozen=True)
class StopRule:
    min_bit_errors: int = 200
    max_bits: int = 10_000_000

    def __post_init__(self):
        if self.min_bit_errors <= 0 or self.max_bits <= 0:
            raise ValueError("stop-rule fields must be > 0")

    def done(self, bits: int, errors: int) -> bool:
        return errors >= self.min_bit_errors or bits >= self.max_bits


@dataclass(frozen=True)
class SimSpec:
    scheme: SchemeSpec = field(default_factory=SchemeSpec)
    system: SystemConfig = field(default_factory=SystemConfig)
    eb_n0_db: tuple = (30.0,)
    stop: StopRule = field(default_factory=StopRule)
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "eb_n0_db", tuple(float(e) for e in self.eb_n0_db))
        if not self.eb_n0_db:
            raise ValueError("Eb/N0 grid is empty")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master seed must be an unsigned 64-bit integer")


def _clopper_pearson(k: int, n: int, level: float) -> tuple[float, float]:
    alpha = 1 - level
    lo = 0.0 if k == 0 else float(beta.ppf(alpha / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(beta.ppf(1 - alpha / 2, k + 1, n - k))
    return lo, hi


@dataclass(frozen=True)
class BerPoint:
    """One simulated operating point.

    ``events`` counts trials (channel uses or OFDM frames) with at least one
    bit error. Bit errors inside a trial are not independent, so intervals
    are built on events when they are known.
    """

    eb_n0_db: float
    ber: float
    bits: int
    errors: int
    events: int | None = None
    trials: int | None = None

    def confidence(self, level: float = 0.95) -> tuple[float, float]:
        """Clopper-Pearson interval for the bit error probability."""
        if self.events is None or self.trials is None:
            return _clopper_pearson(self.errors, self.bits, level)
        lo, hi = _clopper_pearson(self.events, self.trials, level)
        bits_per_trial = self.bits / self.trials
        if self.events == 0:
            return 0.0, min(1.0, hi)
        # Event probability times mean bits per event, per transmitted bit.
        scale = self.errors / self.events / bits_per_trial
        return lo * scale, min(1.0, hi * scale)


@dataclass(frozen=True)
class BerCurve:
    points: tuple

    @property
    def eb_n0_db(self) -> np.ndarray:
        return np.array([p.eb_n0_db for p in self.points])

    @property
    def ber(self) -> np.ndarray:
        return np.array([p.ber for p in self.points])


class Link:
    """Everything one trial needs: channel, mapping, detector and bit accounting."""

    def __init__(self, scheme: SchemeSpec, system: SystemConfig):
        self.scheme = scheme
        self.H = system.channel(scheme.scheme)
        self.a = self.H.responsivity_a
        if scheme.is_ofdm:
            self.config = scheme.ofdm_config()
            self.alphabet = self.config.alphabet
            self.bits_per_trial = self.config.bits_per_frame
            self.pr2 = ofdm_mean_square_power(self.H, self.config)
            self.md = MdDetector(self.H, self.a, self.config) if scheme.detector == "md" else None
        else:
            self.signal_set = scheme.signal_set()
            self.bits_per_trial = self.signal_set.bits_per_use
            self.images = received_images(self.H, self.signal_set)
            self.pr2 = mean_square_received_power(self.H, self.signal_set)
        self.trials_per_partition = max(1, PARTITION_BITS // self.bits_per_trial)

    @property
    def bits_per_use(self) -> int:
        return self.bits_per_trial if not self.scheme.is_ofdm else self.alphabet.bits_per_symbol

    def sigma(self, eb_n0_db: float) -> float:
        return sigma_from_ebn0(self.a, self.pr2, self.bits_per_use, eb_n0_db)

    def run(self, rng: np.random.Generator, n_trials: int, sigma: float) -> tuple[int, int]:
        """(bit errors, erroneous trials) over n_trials channel uses or frames."""
        if not self.scheme.is_ofdm:
            sent = rng.integers(0, self.signal_set.size, n_trials)
            y = awgn_channel(self.signal_set.vectors[sent], self.H, self.a, sigma, rng)
            got = nearest_image(y, self.images)
            labels = self.signal_set.labels
            wrong = popcount(labels[sent] ^ labels[got])
            return int(wrong.sum()), int(np.count_nonzero(wrong))
        sent = rng.integers(0, self.alphabet.size, (n_trials, self.config.n_subcarriers))
        rows = transmit_rows(self.alphabet.points[sent], self.config.scheme)
        y = awgn_channel(rows, self.H, self.a, sigma, rng)
        if self.md is not None:
            got = candidate_digits(self.config, self.md.detect(y))
        elif self.scheme.scheme == "qcm-ofdm":
            got = qcm_ofdm_zf_indices(y, self.H, self.a, self.alphabet, self.scheme.structured)
        else:
            got = dcm_ofdm_zf_indices(y, self.H, self.a, self.alphabet)
        wrong = popcount(sent ^ got).sum(axis=1)
        return int(wrong.sum()), int(np.count_nonzero(wrong))


def partition_rng(master_seed: int, point: int, partition: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(point, partition))))


_WORKER_LINK: Link | None = None


def _init_worker(link: Link) -> None:
    global _WORKER_LINK
    _WORKER_LINK = link


def _partition_errors(args) -> tuple[int, int]:
    master_seed, point, partition, sigma = args
    link = _WORKER_LINK
    return link.run(partition_rng(master_seed, point, partition), link.trials_per_partition, sigma)


class _Runner:
    """Evaluates partitions inline or on a process pool, always reduced in order."""

    def __init__(self, link: Link, workers: int):
        self.link = link
        self.workers = workers
        self.pool = None
        if workers > 1:
            ctx = multiprocessing.get_context("fork") if "fork" in multiprocessing.get_all_start_methods() else None
            self.pool = ProcessPoolExecutor(workers, mp_context=ctx, initializer=_init_worker, initargs=(link,))
        else:
            _init_worker(link)

    def close(self):
        if self.pool is not None:
            self.pool.shutdown(cancel_futures=True)

    def point(self, eb_n0_db: float, point_id: int, stop: StopRule, master_seed: int) -> BerPoint:
        sigma = self.link.sigma(eb_n0_db)
        per = self.link.trials_per_partition * self.link.bits_per_trial
        bits = errors = events = 0
        partition = 0
        while True:
            wave = max(1, 2 * self.workers)
            args = [(master_seed, point_id, partition + k, sigma) for k in range(wave)]
            if self.pool is None:
                results = (_partition_errors(a) for a in args)
            else:
                results = self.pool.map(_partition_errors, args)
            for e, ev in results:
                partition += 1
                bits += per
                errors += e
                events += ev
                if stop.done(bits, errors):
                    trials = partition * self.link.trials_per_partition
                    return BerPoint(float(eb_n0_db), errors / bits, bits, errors, events, trials)


def _simulate(link: Link, eb_n0_db, stop: StopRule, master_seed: int, workers: int, point_ids) -> list[BerPoint]:
    runner = _Runner(link, workers)
    try:
        return [runner.point(e, pid, stop, master_seed) for e, pid in zip(eb_n0_db, point_ids)]
    finally:
        runner.close()


def simulate_ber(spec: SimSpec) -> BerCurve:
    link = Link(spec.scheme, spec.system)
    pts = _simulate(link, spec.eb_n0_db, spec.stop, spec.master_seed, spec.workers, range(len(spec.eb_n0_db)))
    return BerCurve(tuple(pts))


def sweep_dtx(spec: SimSpec, dtx_list) -> list[tuple[float, BerPoint]]:
    """BER at the first Eb/N0 of ``spec.eb_n0_db`` for each LED spacing."""
    out = []
    for k, d in enumerate(dtx_list):
        link = Link(spec.scheme, spec.system.with_d_tx(float(d)))
        (pt,) = _simulate(link, spec.eb_n0_db[:1], spec.stop, spec.master_seed, spec.workers, [k])
        out.append((float(d), pt))
    return out


def sweep_rotation(spec: SimSpec, theta_list_deg) -> list[tuple[float, BerPoint]]:
    """BER at the first Eb/N0 of ``spec.eb_n0_db`` for each QCM-PR rotation angle."""
    if spec.scheme.scheme != "qcm-pr":
        raise ValueError("rotation sweeps need the qcm-pr scheme")
    out = []
    for k, theta in enumerate(theta_list_deg):
        link = Link(replace(spec.scheme, rotation_deg=float(theta)), spec.system)
        (pt,) = _simulate(link, spec.eb_n0_db[:1], spec.stop, spec.master_seed, spec.workers, [k])
        out.append((float(theta), pt))
    return out


def required_eb_n0(eb_n0_db, ber, target: float) -> float:
    """Eb/N0 where a BER curve first falls to ``target``, log-linear interpolation.

    Returns NaN when no bracketing pair of positive BER values exists.
    """
    x = np.asarray(eb_n0_db, float)
    y = np.asarray(ber, float)
    for k in range(len(x) - 1):
        if y[k] >= target >= y[k + 1]:
            if y[k + 1] <= 0:
                return math.nan
            if y[k] == y[k + 1]:
                return float(x[k])
            ly0, ly1 = math.log10(y[k]), math.log10(y[k + 1])
            return float(x[k] + (math.log10(target) - ly0) * (x[k + 1] - x[k]) / (ly1 - ly0))
    return math.nan
