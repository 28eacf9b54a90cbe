"""Learnable trigonometric time encoding and coarse time-frame embeddings.

The encoder maps a real timestamp t to [cos(w*t) || sin(w*t)] with a
learnable frequency vector w of length d/2. Dot products of two encodings
depend only on the time difference (a translation-invariant kernel), and
drawing w ~ N(0, 1/sigma^2) makes (2/d) * psi(x).psi(y) approximate the
Gaussian kernel exp(-(x-y)^2 / (2 sigma^2)) at initialization.

Two independent instances are used in practice: one over discrete time-frame
indices for the graph-side skip-gram, one over continuous (rescaled)
trajectory timestamps for the sequence encoder.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


class TemporalEncoder:
    """Trigonometric encoder with learnable frequencies.

    d must be even; w holds d/2 frequencies initialized i.i.d. from
    N(0, 1/sigma^2).
    """

    def __init__(self, d, sigma=1.0, seed=0):
        if d % 2 != 0 or d <= 0:
            raise ValueError(f"embedding dimension must be even and positive, got {d}")
        if sigma <= 0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        self.d = d
        self.sigma = float(sigma)
        rng = np.random.default_rng(seed)
        self.w = Tensor(rng.normal(0.0, 1.0 / sigma, size=d // 2), requires_grad=True)

    def encode(self, t):
        """psi(t) as a differentiable length-d tensor for a single scalar t."""
        arg = ad.scale(self.w, float(t))
        return ad.concat([ad.cos(arg), ad.sin(arg)], axis=-1)

    def encode_batch(self, ts):
        """psi over an array of timestamps; output shape ts.shape + (d,)."""
        ts = np.asarray(ts, dtype=np.float64)
        shape = ts.shape + (self.d // 2,)
        wb = ad.broadcast_to(self.w, shape)
        arg = ad.mul(wb, Tensor(np.broadcast_to(ts[..., None], shape)))
        return ad.concat([ad.cos(arg), ad.sin(arg)], axis=-1)

    def values(self, ts):
        """Forward-only psi for plain numpy consumers (no graph recorded)."""
        ts = np.asarray(ts, dtype=np.float64)
        arg = ts[..., None] * self.w.data
        return np.concatenate([np.cos(arg), np.sin(arg)], axis=-1)

    def kernel(self, t_i, t_j):
        """psi(t_i) . psi(t_j); equals sum_k cos(w_k (t_i - t_j))."""
        return float(self.values(t_i) @ self.values(t_j))


class FrameEmbedding:
    """One learnable vector per time frame (coarse start-time context)."""

    def __init__(self, frames_per_day, d, seed=0):
        if frames_per_day <= 0:
            raise ValueError(f"frames_per_day must be positive, got {frames_per_day}")
        rng = np.random.default_rng(seed)
        bound = 0.5 / d
        self.table = Tensor(rng.uniform(-bound, bound, size=(frames_per_day, d)),
                            requires_grad=True)
        self.frames_per_day = frames_per_day
        self.d = d

    def lookup(self, frames):
        return ad.embedding_lookup(self.table, frames)

    def values(self, frames):
        return self.table.data[np.asarray(frames, dtype=np.int64)]


def frame_of(timestamp, frames_per_day, frame_len):
    """Discrete time frame of a timestamp, wrapping at the day boundary."""
    day = frames_per_day * frame_len
    f = int(np.floor((timestamp % day) / frame_len))
    return min(f, frames_per_day - 1)


def frames_of(timestamps, frames_per_day, frame_len):
    """Vectorized frame_of over an array of timestamps."""
    day = frames_per_day * frame_len
    f = np.floor((np.asarray(timestamps, dtype=np.float64) % day) / frame_len)
    return np.minimum(f.astype(np.int64), frames_per_day - 1)
