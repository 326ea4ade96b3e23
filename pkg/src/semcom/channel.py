"""Physical-layer simulation: power normalization, AWGN, Rayleigh block
fading with equalization, and outdated-CSI mismatch.

A symbol block is a float64 vector of even length k, read as k/2 complex
symbols (consecutive pairs = real, imaginary parts).  Batches are (M, k)
arrays with one independent fade per row (block fading).

SNR convention, used consistently everywhere: unit average power per real
dimension, per-real-dimension Gaussian noise variance
sigma^2 = 10^(-SNR_dB/10).  The channel is a fixed stochastic layer: when
fed a Tensor it participates in the autodiff graph (noise and fades are
constants for the backward pass), when fed an ndarray it is plain numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

CHANNEL_KINDS = ("awgn", "rayleigh", "rayleigh_mismatched")

MIN_FADE_MAGNITUDE = 1e-9  # |h| below this is redrawn (equalizer would blow up)


@dataclass(frozen=True)
class ChannelConfig:
    kind: str = "awgn"
    snr_db: float = 15.0
    estimation_error_variance: float = 0.0
    adversary_snr_db: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.estimation_error_variance < 0:
            raise ValueError("estimation error variance must be nonnegative")


@dataclass(frozen=True)
class ChannelRealization:
    """What the channel actually did to one batch.

    fade: true complex coefficient per block (1+0j for AWGN).
    estimate: coefficient the receiver equalized with (= fade unless
        the CSI was outdated).
    noise_variance: per-real-dimension variance at the channel.
    """

    fade: np.ndarray
    estimate: np.ndarray
    noise_variance: float

    def effective_noise_variance(self) -> np.ndarray:
        """Per-block post-equalization noise variance per real dimension."""
        return self.noise_variance / _abs2(self.estimate)

    def gain(self) -> np.ndarray:
        """Post-equalization complex gain on the signal, estimate*/|estimate|^2 * fade."""
        return _equalized_gain(self.estimate, self.fade)


def snr_to_noise_variance(snr_db: float) -> float:
    """Per-real-dimension noise variance for a given SNR in dB (inf -> 0)."""
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return 10.0 ** (-snr_db / 10.0)


def _abs2(h: np.ndarray) -> np.ndarray:
    return h.real * h.real + h.imag * h.imag


def _equalized_gain(estimate: np.ndarray, fade: np.ndarray) -> np.ndarray:
    """conj(estimate) * fade / |estimate|^2, in componentwise real arithmetic
    so a matched channel (fade == estimate) gives exactly 1+0j."""
    er, ei = estimate.real, estimate.imag
    fr, fi = fade.real, fade.imag
    abs2 = er * er + ei * ei
    return (er * fr + ei * fi) / abs2 + 1j * ((er * fi - ei * fr) / abs2)


def _mean_square_rows(z: Tensor) -> Tensor:
    return ad.mean(ad.square(z), axis=1, keepdims=True)


def normalize_power(z):
    """Scale each block by min(1, 1/sqrt(mean z^2)) so mean power <= 1.

    All-zero blocks come back unchanged.  Differentiable through the
    scaling when given a Tensor.
    """
    if isinstance(z, Tensor):
        msq = _mean_square_rows(z if z.value.ndim == 2 else ad.reshape(z, (1, -1)))
        scale = ad.clip_max(
            ad.div(1.0, ad.sqrt(ad.clip_min(msq, 1e-300))), 1.0
        )
        if z.value.ndim == 1:
            scale = ad.reshape(scale, (1,))
        return ad.mul(z, scale)
    z = np.asarray(z, dtype=np.float64)
    rows = z if z.ndim == 2 else z[None, :]
    msq = np.mean(rows * rows, axis=1, keepdims=True)
    scale = np.minimum(1.0, 1.0 / np.sqrt(np.maximum(msq, 1e-300)))
    out = rows * scale
    return out if z.ndim == 2 else out[0]


def _complex_rowscale_tensor(q: np.ndarray, z: Tensor) -> Tensor:
    """Multiply each length-k row (as k/2 complex symbols) by q[row]."""
    ze = ad.every_second_column(z, 0)
    zo = ad.every_second_column(z, 1)
    c = q.real.reshape(-1, 1)
    d = q.imag.reshape(-1, 1)
    out_e = ad.sub(ad.mul(ze, c), ad.mul(zo, d))
    out_o = ad.add(ad.mul(ze, d), ad.mul(zo, c))
    return ad.interleave_columns(out_e, out_o)


def _complex_rowscale(q: np.ndarray, z: np.ndarray) -> np.ndarray:
    zc = z.reshape(z.shape[0], -1, 2)
    c = q.real[:, None]
    d = q.imag[:, None]
    out = np.empty_like(zc)
    out[:, :, 0] = c * zc[:, :, 0] - d * zc[:, :, 1]
    out[:, :, 1] = d * zc[:, :, 0] + c * zc[:, :, 1]
    return out.reshape(z.shape)


def _draw_fades(
    m: int, estimation_error_variance: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Estimated and true fade per block.

    The mismatch pair is always consumed from the stream (scaled by
    sqrt(err_var)), so a zero error variance is bit-identical to the
    matched channel under the same seed.
    """
    raw = rng.standard_normal((m, 2))
    h_hat = (raw[:, 0] + 1j * raw[:, 1]) * math.sqrt(0.5)
    bad = np.abs(h_hat) < MIN_FADE_MAGNITUDE
    while np.any(bad):
        raw = rng.standard_normal((int(bad.sum()), 2))
        h_hat[bad] = (raw[:, 0] + 1j * raw[:, 1]) * math.sqrt(0.5)
        bad = np.abs(h_hat) < MIN_FADE_MAGNITUDE
    raw_eps = rng.standard_normal((m, 2))
    h_eps = (raw_eps[:, 0] + 1j * raw_eps[:, 1]) * math.sqrt(
        0.5 * estimation_error_variance
    )
    return h_hat, h_hat + h_eps


def transmit(z, cfg: ChannelConfig, rng: np.random.Generator):
    """Send power-normalized blocks through the configured channel.

    Returns (received, ChannelRealization).  Rayleigh blocks are faded,
    noised, and equalized with the (possibly outdated) channel estimate:
    received = (est*/|est|^2) (h z + noise).
    """
    is_tensor = isinstance(z, Tensor)
    values = z.value if is_tensor else np.asarray(z, dtype=np.float64)
    single = values.ndim == 1
    if single:
        values = values[None, :]
        if is_tensor:
            z = ad.reshape(z, values.shape)
    m, k = values.shape
    if k % 2 != 0:
        raise ValueError(f"symbol blocks need even length, got k={k}")
    sigma2 = snr_to_noise_variance(cfg.snr_db)

    if cfg.kind == "awgn":
        fade = np.ones(m, dtype=np.complex128)
        estimate = fade
        signal = z if is_tensor else values
    else:
        err_var = (
            cfg.estimation_error_variance if cfg.kind == "rayleigh_mismatched" else 0.0
        )
        estimate, fade = _draw_fades(m, err_var, rng)
        gain = _equalized_gain(estimate, fade)
        if np.all(gain == 1.0 + 0.0j):
            # matched CSI: equalization cancels the fade exactly
            signal = z if is_tensor else values
        elif is_tensor:
            signal = _complex_rowscale_tensor(gain, z)
        else:
            signal = _complex_rowscale(gain, values)

    realization = ChannelRealization(fade=fade, estimate=estimate, noise_variance=sigma2)

    if sigma2 == 0.0:
        received = signal
    else:
        noise = rng.standard_normal((m, k)) * math.sqrt(sigma2)
        if cfg.kind != "awgn":
            equalizer = np.conj(estimate) / _abs2(estimate)
            noise = _complex_rowscale(equalizer, noise)
        received = ad.add(signal, noise) if is_tensor else signal + noise

    if single:
        received = (
            ad.reshape(received, (k,)) if is_tensor else np.asarray(received)[0]
        )
    return received, realization


def latency_seconds(k: int, symbol_rate: float = 9600.0) -> float:
    """Airtime of a k-real block at the given symbol rate (k/2 complex symbols)."""
    if k % 2 != 0:
        raise ValueError(f"symbol blocks need even length, got k={k}")
    return (k / 2) / symbol_rate
