"""Per-channel-use maximum-likelihood detection and the AWGN channel."""

from __future__ import annotations

import numpy as np

from vlcsim.geometry import ChannelMatrix
from vlcsim.mappers import SignalSet, index_bits


def _entries(H) -> np.ndarray:
    return H.entries if isinstance(H, ChannelMatrix) else np.asarray(H, dtype=float)


def received_images(H: ChannelMatrix, signal_set: SignalSet) -> np.ndarray:
    """Noiseless receptions aHx for every vector in the set, shape (L, N_r)."""
    return H.responsivity_a * (signal_set.vectors @ _entries(H).T)


def nearest_image(y, images: np.ndarray, chunk: int = 8192) -> np.ndarray:
    """Index of the image closest to each row of y; ties go to the lowest index.

    Residuals are evaluated directly as sums of squared differences so that
    exact ties stay exact.
    """
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    y2 = np.atleast_2d(y)
    out = np.empty(y2.shape[0], dtype=np.int64)
    step = max(1, chunk // max(1, images.shape[0]))
    for start in range(0, y2.shape[0], step):
        block = y2[start : start + step]
        diff = block[:, None, :] - images[None, :, :]
        out[start : start + step] = np.argmin(np.einsum("bln,bln->bl", diff, diff), axis=1)
    return out[0] if single else out


def ml_detect(y, H: ChannelMatrix, signal_set: SignalSet):
    """argmin over the set of ||y - aHx||^2; returns (index, bits)."""
    if signal_set.size == 0:
        raise ValueError("signal set is empty")
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != H.n_rx or signal_set.n_tx != H.n_tx:
        raise ValueError("dimension mismatch between received vector, channel and signal set")
    idx = nearest_image(y, received_images(H, signal_set))
    return idx, index_bits(signal_set.labels[idx], signal_set.bits_per_use)


def awgn_channel(x, H, a: float, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """y = aHx + n with n ~ N(0, sigma^2 I); x may carry leading batch axes."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    clean = a * (np.asarray(x, dtype=float) @ _entries(H).T)
    if sigma == 0:
        return clean
    return clean + sigma * rng.standard_normal(clean.shape)
