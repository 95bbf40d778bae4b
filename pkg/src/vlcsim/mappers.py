"""Complex constellations and their mapping onto nonnegative LED intensities."""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass

import numpy as np

TWO_PI = 2 * math.pi


def gray(n):
    return n ^ (n >> 1)


def index_bits(indices, n_bits: int) -> np.ndarray:
    """Binary expansion, most significant bit first, shape (..., n_bits)."""
    idx = np.asarray(indices, dtype=np.int64)
    shifts = np.arange(n_bits - 1, -1, -1, dtype=np.int64)
    return ((idx[..., None] >> shifts) & 1).astype(np.uint8)


def popcount(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.uint64)
    count = np.zeros(v.shape, dtype=np.int64)
    while np.any(v):
        count += (v & np.uint64(1)).astype(np.int64)
        v = v >> np.uint64(1)
    return count


@dataclass(frozen=True)
class ComplexAlphabet:
    """Constellation whose point at index k carries bit label k."""

    name: str
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex)
        m = pts.size
        if m < 2 or m & (m - 1):
            raise ValueError(f"alphabet size must be a power of 2 >= 2, got {m}")
        if len(set(pts.tolist())) != m:
            raise ValueError("alphabet points must be distinct")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.size

    @property
    def bits_per_symbol(self) -> int:
        return self.size.bit_length() - 1

    @property
    def bit_labels(self) -> list[str]:
        k = self.bits_per_symbol
        return [format(i, f"0{k}b") for i in range(self.size)]

    def slice(self, values) -> np.ndarray:
        """Index of the nearest point for each value; ties go to the lowest index."""
        v = np.asarray(values, dtype=complex)
        d = np.abs(v[..., None] - self.points) ** 2
        return np.argmin(d, axis=-1)


def _by_label(points, labels) -> np.ndarray:
    out = np.empty(len(points), dtype=complex)
    out[np.asarray(labels)] = points
    return out


def _square_qam(m: int) -> np.ndarray:
    side = math.isqrt(m)
    k = side.bit_length() - 1
    levels = np.arange(-side + 1, side, 2)
    pts, labs = [], []
    for a, i in enumerate(levels):
        for b, q in enumerate(levels):
            pts.append(complex(i, q))
            labs.append(gray(a) << k | gray(b))
    return _by_label(pts, labs)


def _rect_qam(i_levels: int, q_levels: int) -> tuple[list, list]:
    kq = q_levels.bit_length() - 1
    pts, labs = [], []
    for a, i in enumerate(range(-i_levels + 1, i_levels, 2)):
        for b, q in enumerate(range(-q_levels + 1, q_levels, 2)):
            pts.append(complex(i, q))
            labs.append(gray(a) << kq | gray(b))
    return pts, labs


def _cross_32() -> np.ndarray:
    # Fold the outer columns of an 8x4 Gray rectangle onto the |Q| = 5 rows.
    pts, labs = _rect_qam(8, 4)
    moved = []
    for p in pts:
        if abs(p.real) == 7:
            ni = 3 if abs(p.imag) == 1 else 1
            p = complex(math.copysign(ni, p.real), math.copysign(5, p.imag))
        moved.append(p)
    return _by_label(moved, labs)


def make_alphabet(name: str, m: int) -> ComplexAlphabet:
    name = name.lower()
    if name == "bpsk" or (name in ("qam", "psk") and m == 2):
        return ComplexAlphabet("BPSK", np.array([1 + 0j, -1 + 0j]))
    if m < 2 or m & (m - 1):
        raise ValueError(f"unsupported alphabet size {m}")
    if name == "psk":
        k = np.arange(m)
        pts = np.exp(1j * TWO_PI * k / m)
        pts = np.where(np.abs(pts.real) < 1e-15, 0.0, pts.real) + 1j * np.where(np.abs(pts.imag) < 1e-15, 0.0, pts.imag)
        return ComplexAlphabet(f"{m}-PSK", _by_label(pts, gray(k)))
    if name == "qam":
        if m == 8:
            pts = _by_label(*_rect_qam(4, 2))
        elif m == 32:
            pts = _cross_32()
        elif math.isqrt(m) ** 2 == m:
            pts = _square_qam(m)
        else:
            raise ValueError(f"unsupported QAM size {m}")
        return ComplexAlphabet(f"{m}-QAM", pts)
    raise ValueError(f"unknown alphabet family {name!r}")


_MOD_RE = re.compile(r"^(bpsk|(qam|psk)-?(\d+))$")


def parse_modulation(text: str) -> ComplexAlphabet:
    """Alphabet from strings like 'bpsk', 'qam-16', 'psk-8'."""
    match = _MOD_RE.match(text.strip().lower())
    if not match:
        raise ValueError(f"unrecognized modulation {text!r}; expected bpsk, qam-M or psk-M")
    if match.group(1) == "bpsk":
        return make_alphabet("bpsk", 2)
    return make_alphabet(match.group(2), int(match.group(3)))


def qcm_map(s) -> np.ndarray:
    """Sign-split mapping: [I+, I-, Q+, Q-] intensities, shape (..., 4)."""
    s = np.asarray(s, dtype=complex)
    re_, im = s.real, s.imag
    return np.stack(
        [np.where(re_ >= 0, re_, 0.0), np.where(re_ < 0, -re_, 0.0), np.where(im >= 0, im, 0.0), np.where(im < 0, -im, 0.0)],
        axis=-1,
    )


def rotate(s, theta: float) -> np.ndarray:
    s = np.asarray(s, dtype=complex)
    r = s * np.exp(1j * theta)
    # Rotation round-off below 1e-12 relative is treated as an exact zero.
    tol = 1e-12 * np.maximum(1.0, np.abs(s))
    re_ = np.where(np.abs(r.real) < tol, 0.0, r.real)
    im = np.where(np.abs(r.imag) < tol, 0.0, r.imag)
    return re_ + 1j * im


def qcm_pr_map(s, theta: float) -> np.ndarray:
    return qcm_map(rotate(s, theta))


def dcm_map(s) -> np.ndarray:
    """[|s|, arg s in [0, 2pi)], shape (..., 2)."""
    s = np.asarray(s, dtype=complex)
    phase = np.mod(np.angle(s), TWO_PI)
    phase = np.where(phase >= TWO_PI, 0.0, phase)
    return np.stack([np.abs(s), phase], axis=-1)


def smdcm_map(s, index_bit) -> np.ndarray:
    pair = dcm_map(s)
    b = np.asarray(index_bit)[..., None]
    zeros = np.zeros_like(pair)
    return np.concatenate([np.where(b == 0, pair, zeros), np.where(b == 1, pair, zeros)], axis=-1)


class Scheme(enum.Enum):
    QCM = "qcm"
    QCM_PR = "qcm-pr"
    DCM = "dcm"
    SM_DCM = "sm-dcm"


@dataclass(frozen=True)
class TransmitVector:
    intensities: np.ndarray
    bits: str


@dataclass(frozen=True)
class SignalSet:
    scheme: Scheme
    alphabet: ComplexAlphabet
    vectors: np.ndarray  # L x N_t
    labels: np.ndarray  # integer bit label per vector
    bits_per_use: int
    theta: float = 0.0

    @property
    def size(self) -> int:
        return self.vectors.shape[0]

    @property
    def n_tx(self) -> int:
        return self.vectors.shape[1]

    def __getitem__(self, index: int) -> TransmitVector:
        return TransmitVector(self.vectors[index], format(int(self.labels[index]), f"0{self.bits_per_use}b"))


def enumerate_signal_set(scheme, alphabet: ComplexAlphabet, theta: float = 0.0) -> SignalSet:
    """All transmit vectors of a scheme; vector index equals its bit label."""
    scheme = Scheme(scheme)
    pts = alphabet.points
    k = alphabet.bits_per_symbol
    if scheme is Scheme.QCM:
        vectors, eta = qcm_map(pts), k
    elif scheme is Scheme.QCM_PR:
        vectors, eta = qcm_pr_map(pts, theta), k
    elif scheme is Scheme.DCM:
        vectors, eta = dcm_map(pts), k
    else:
        vectors = np.concatenate([smdcm_map(pts, 0), smdcm_map(pts, 1)])
        eta = k + 1
    vectors = np.ascontiguousarray(vectors, dtype=float)
    vectors.setflags(write=False)
    labels = np.arange(vectors.shape[0])
    labels.setflags(write=False)
    return SignalSet(scheme, alphabet, vectors, labels, eta, theta if scheme is Scheme.QCM_PR else 0.0)


def demap(vector_index: int, signal_set: SignalSet) -> np.ndarray:
    if not 0 <= vector_index < signal_set.size:
        raise IndexError(f"vector index {vector_index} out of range for a set of {signal_set.size}")
    return index_bits(signal_set.labels[vector_index], signal_set.bits_per_use)
