"""Evaluation metrics and the per-SNR evaluation sweep.

Images are [0, 1] floats throughout; PSNR uses MaxValue = 1 (identical in
dB to the 255-scale formula) and is capped at 100 dB.  SSIM is computed
from whole-image statistics (one global window) in two forms: the
standard product of the luminance/contrast/structure components
(default, range about [-1, 1]) and a literal sum of the three components
(maximum 3 at identity), kept behind the `form` flag.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from . import channel as ch
from . import nn
from .config import ExperimentConfig
from .dataio import MetricsRecord

PSNR_CAP_DB = 100.0
SSIM_C = 1e-4  # c1 = c2 = c3, guards against zero denominators
SSIM_FORMS = ("product", "paper_sum")


def classification_accuracy(predictions, labels) -> float:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError(f"shape mismatch: {predictions.shape} vs {labels.shape}")
    if predictions.size == 0:
        raise ValueError("empty prediction batch")
    return float(np.mean(predictions == labels))


def psnr(original, reconstruction) -> float:
    a = np.asarray(original, dtype=np.float64)
    b = np.asarray(reconstruction, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * np.log10(1.0 / mse))


def _ssim_components(a: np.ndarray, b: np.ndarray) -> tuple[float, float, float]:
    mu_a, mu_b = a.mean(), b.mean()
    sd_a, sd_b = a.std(), b.std()
    cov = float(np.mean((a - mu_a) * (b - mu_b)))
    lum = (2.0 * mu_a * mu_b + SSIM_C) / (mu_a**2 + mu_b**2 + SSIM_C)
    con = (2.0 * sd_a * sd_b + SSIM_C) / (sd_a**2 + sd_b**2 + SSIM_C)
    struct = (cov + SSIM_C) / (sd_a * sd_b + SSIM_C)
    return float(lum), float(con), float(struct)


def ssim(original, reconstruction, form: str = "product") -> float:
    if form not in SSIM_FORMS:
        raise ValueError(f"unknown SSIM form {form!r}")
    a = np.asarray(original, dtype=np.float64).ravel()
    b = np.asarray(reconstruction, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    lum, con, struct = _ssim_components(a, b)
    if form == "paper_sum":
        return lum + con + struct
    return lum * con * struct


def ssim_batch(originals: np.ndarray, reconstructions: np.ndarray, form: str = "product") -> np.ndarray:
    """Row-wise SSIM for (N, D) batches."""
    if form not in SSIM_FORMS:
        raise ValueError(f"unknown SSIM form {form!r}")
    a = np.asarray(originals, dtype=np.float64)
    b = np.asarray(reconstructions, dtype=np.float64)
    mu_a = a.mean(axis=1)
    mu_b = b.mean(axis=1)
    sd_a = a.std(axis=1)
    sd_b = b.std(axis=1)
    cov = ((a - mu_a[:, None]) * (b - mu_b[:, None])).mean(axis=1)
    lum = (2 * mu_a * mu_b + SSIM_C) / (mu_a**2 + mu_b**2 + SSIM_C)
    con = (2 * sd_a * sd_b + SSIM_C) / (sd_a**2 + sd_b**2 + SSIM_C)
    struct = (cov + SSIM_C) / (sd_a * sd_b + SSIM_C)
    if form == "paper_sum":
        return lum + con + struct
    return lum * con * struct


def psnr_batch(originals: np.ndarray, reconstructions: np.ndarray) -> np.ndarray:
    a = np.asarray(originals, dtype=np.float64)
    b = np.asarray(reconstructions, dtype=np.float64)
    mse = np.mean((a - b) ** 2, axis=1)
    out = np.full(mse.shape, PSNR_CAP_DB)
    nz = mse > 0
    out[nz] = np.minimum(PSNR_CAP_DB, 10.0 * np.log10(1.0 / mse[nz]))
    return out


def transmitted_features(
    encoder: nn.Network,
    images: np.ndarray,
    dp_budget: float | None,
    rng: np.random.Generator,
) -> np.ndarray:
    """What actually leaves the device: power-normalized encoder output,
    plus Laplace noise of scale 1/budget for the differentially-private
    baseline (an infinite budget injects nothing)."""
    z = ch.normalize_power(nn.forward_values(encoder.spec, encoder.params, images))
    if dp_budget is not None and np.isfinite(dp_budget):
        z = z + rng.laplace(0.0, 1.0 / dp_budget, size=z.shape)
    return z


def evaluate(
    encoder: nn.Network,
    classifier: nn.Network,
    adversary: nn.Network,
    images: np.ndarray,
    labels: np.ndarray,
    cfg: ExperimentConfig,
    scheme_label: str | None = None,
) -> list[MetricsRecord]:
    """One MetricsRecord per configured test SNR.

    Per SNR: task accuracy through the user channel, and reconstruction
    quality of the adversary decoder fed through the adversary channel
    (same SNR unless the config pins the adversary link elsewhere).
    """
    label = scheme_label if scheme_label is not None else cfg.scheme_label()
    dp = cfg.dp_budget if cfg.scheme == "necst_g_dp" else None
    k = cfg.encoder_spec().output_dim
    lat = ch.latency_seconds(k, cfg.symbol_rate)
    records = []
    for i, snr in enumerate(cfg.test_snrs):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xE7A1, i]))
        z = transmitted_features(encoder, images, dp, rng)

        user_cfg = replace(cfg.channel, snr_db=snr)
        received, _ = ch.transmit(z, user_cfg, rng)
        probs = nn.forward_values(classifier.spec, classifier.params, received)
        acc = classification_accuracy(np.argmax(probs, axis=1), labels)

        adv_snr = (
            cfg.channel.adversary_snr_db
            if cfg.channel.adversary_snr_db is not None
            else snr
        )
        adv_cfg = replace(cfg.channel, snr_db=adv_snr)
        intercepted, _ = ch.transmit(z, adv_cfg, rng)
        recon = nn.forward_values(adversary.spec, adversary.params, intercepted)
        records.append(
            MetricsRecord(
                scheme=label,
                snr_db=float(snr),
                accuracy=acc,
                ssim=float(np.mean(ssim_batch(images, recon))),
                psnr_db=float(np.mean(psnr_batch(images, recon))),
                latency_s=lat,
                seed=cfg.seed,
            )
        )
    return records


def reconstruction_samples(
    encoder: nn.Network,
    adversary: nn.Network,
    images: np.ndarray,
    cfg: ExperimentConfig,
    count: int = 8,
) -> np.ndarray:
    """Adversary reconstructions of the first `count` images at the attack SNR."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xD0D0]))
    dp = cfg.dp_budget if cfg.scheme == "necst_g_dp" else None
    subset = images[:count]
    z = transmitted_features(encoder, subset, dp, rng)
    adv_cfg = replace(cfg.channel, snr_db=cfg.attack_snr())
    intercepted, _ = ch.transmit(z, adv_cfg, rng)
    return nn.forward_values(adversary.spec, adversary.params, intercepted)
