"""Training objectives: reconstruction MSE, the Monte-Carlo variational
information-bottleneck loss, and the combined privacy-utility objectives.

The bottleneck loss for a batch of M (input, label) pairs is

    (1/M) sum_m { -(1/N) sum_n log q(y_m | received_{m,n})
                  + beta * log [ p(received_m | s_m)
                                 / ((1/(M-1)) sum_{j!=m} p(received_m | s_j)) ] }

where p(received | s) is the Gaussian channel density centered at the
(equalized) transmitted block for s, with the post-equalization noise
variance of the block's realized fade.  All density arithmetic happens in
log space with a max-shifted log-sum-exp over the M-1 cross densities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import channel as ch
from . import nn
from .autodiff import Tensor


@dataclass(frozen=True)
class VibConfig:
    beta: float = 5e-3  # rate weight on the compression term
    n_samples: int = 1  # channel draws per datum per step
    lam: float = 0.5  # privacy-utility weight; smaller = stronger privacy

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")


@dataclass
class LossBreakdown:
    vib_total: float
    vib_ce_term: float
    vib_kl_term: float
    mse: float
    combined: float


@dataclass
class VibResult:
    loss: Tensor
    ce_term: Tensor
    kl_term: Tensor
    transmitted: Tensor  # power-normalized encoder output, (M, k)
    received: Tensor  # first channel draw, what downstream decoders see
    realization: ch.ChannelRealization
    encoder_tape: nn.Tape
    classifier_tape: nn.Tape


def mse_loss(originals, reconstructions):
    """Mean over the batch of the squared Euclidean reconstruction error.

    Returns a Tensor when either argument is one, else a float.
    """
    orig_v = originals.value if isinstance(originals, Tensor) else np.asarray(originals)
    recon_v = (
        reconstructions.value
        if isinstance(reconstructions, Tensor)
        else np.asarray(reconstructions)
    )
    if orig_v.ndim != 2 or recon_v.ndim != 2:
        raise ValueError("mse_loss expects batches of vectors")
    if orig_v.shape != recon_v.shape:
        raise ValueError(f"batch shapes differ: {orig_v.shape} vs {recon_v.shape}")
    if orig_v.shape[0] == 0:
        raise ValueError("empty batch")
    if isinstance(originals, Tensor) or isinstance(reconstructions, Tensor):
        diff = ad.sub(reconstructions, originals)
        return ad.mean(ad.sum_(ad.square(diff), axis=1))
    diff = recon_v - orig_v
    return float(np.mean(np.sum(diff * diff, axis=1)))


def gaussian_log_density(x, mean, variance_per_dim: float):
    """log N(x; mean, variance * I), summed over dimensions."""
    if variance_per_dim <= 0:
        raise ValueError("variance must be positive")
    x_v = x.value if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    m_v = mean.value if isinstance(mean, Tensor) else np.asarray(mean, dtype=np.float64)
    if x_v.shape != m_v.shape:
        raise ValueError(f"shape mismatch: {x_v.shape} vs {m_v.shape}")
    k = x_v.size
    const = -0.5 * k * math.log(2.0 * math.pi * variance_per_dim)
    if isinstance(x, Tensor) or isinstance(mean, Tensor):
        quad = ad.mul(ad.sum_(ad.square(ad.sub(x, mean))), -0.5 / variance_per_dim)
        return ad.add(quad, const)
    d = x_v - m_v
    return const - float(np.dot(d.ravel(), d.ravel())) / (2.0 * variance_per_dim)


def _pairwise_log_densities(
    transmitted: Tensor, received: Tensor, realization: ch.ChannelRealization
) -> Tensor:
    """(M, M) matrix of log p(received_m | s_j) under each block's channel.

    Row m's hypothesis means are gain_m * z_j; the quadratic form uses
    |gain_m|^2 * ||received_m/gain_m - z_j||^2 so one pairwise-distance
    matrix serves every row.
    """
    m_count, k = transmitted.value.shape
    gain = realization.gain()
    eff_var = realization.effective_noise_variance()  # (M,)
    if np.all(gain == 1.0 + 0.0j):
        back_equalized = received
        gain_sq = np.ones(m_count)
    else:
        back_equalized = ch._complex_rowscale_tensor(1.0 / gain, received)
        gain_sq = np.abs(gain) ** 2

    rn_recv = ad.sum_(ad.square(back_equalized), axis=1, keepdims=True)  # (M,1)
    rn_z = ad.reshape(ad.sum_(ad.square(transmitted), axis=1), (1, m_count))
    cross = ad.matmul(back_equalized, ad.transpose(transmitted))
    sq_dists = ad.add(ad.sub(rn_recv, ad.mul(cross, 2.0)), rn_z)  # (M,M)

    row_scale = (-0.5 * gain_sq / eff_var).reshape(-1, 1)
    row_const = (-0.5 * k * np.log(2.0 * np.pi * eff_var)).reshape(-1, 1)
    return ad.add(ad.mul(sq_dists, row_scale), row_const)


def vib_loss(
    inputs: np.ndarray,
    labels: np.ndarray,
    encoder: nn.Network,
    classifier: nn.Network,
    channel_cfg: ch.ChannelConfig,
    vib_cfg: VibConfig,
    rng: np.random.Generator,
) -> VibResult:
    """Monte-Carlo bottleneck loss for one batch; gradients flow to both
    the encoder and the classifier through the reparameterized noise."""
    inputs = np.asarray(inputs, dtype=np.float64)
    m_count = inputs.shape[0]
    if m_count < 2:
        raise ValueError("batch size must be >= 2 (leave-one-out marginal)")
    if ch.snr_to_noise_variance(channel_cfg.snr_db) == 0.0:
        raise ValueError(
            "noise-free channel: the rate term's density ratio degenerates; "
            "use a finite SNR for bottleneck training"
        )

    enc_out, enc_tape = nn.forward_graph(encoder.spec, encoder.params, inputs)
    transmitted = ch.normalize_power(enc_out)

    ce_terms = []
    cls_tape = None
    first_received = None
    first_realization = None
    for _ in range(vib_cfg.n_samples):
        received, realization = ch.transmit(transmitted, channel_cfg, rng)
        if first_received is None:
            first_received = received
            first_realization = realization
        probs, cls_tape = nn.forward_graph(
            classifier.spec, classifier.params, received, tape=cls_tape
        )
        ce_terms.append(nn.cross_entropy(probs, labels))
    ce_term = ce_terms[0]
    for extra in ce_terms[1:]:
        ce_term = ad.add(ce_term, extra)
    if len(ce_terms) > 1:
        ce_term = ad.mul(ce_term, 1.0 / len(ce_terms))

    # rate term from the first channel draw
    log_dens = _pairwise_log_densities(transmitted, first_received, first_realization)
    numerator = ad.diagonal(log_dens)
    off_diag_mask = np.zeros((m_count, m_count))
    np.fill_diagonal(off_diag_mask, -np.inf)
    log_marginal = ad.sub(
        ad.logsumexp(ad.add(log_dens, off_diag_mask), axis=1), math.log(m_count - 1)
    )
    kl_term = ad.mean(ad.sub(numerator, log_marginal))

    loss = ad.add(ce_term, ad.mul(kl_term, vib_cfg.beta))
    return VibResult(
        loss=loss,
        ce_term=ce_term,
        kl_term=kl_term,
        transmitted=transmitted,
        received=first_received,
        realization=first_realization,
        encoder_tape=enc_tape,
        classifier_tape=cls_tape,
    )


def ibal_objective(vib, mse, lam: float):
    """lam * vib - (1 - lam) * mse; smaller lam favors privacy."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    return lam * vib - (1.0 - lam) * mse


def ibal_d_objective(vib, mse, lam: float, noise_variance: float):
    """Channel-aware variant: the privacy term is damped by 1/(1 + sigma^2)."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    if noise_variance < 0:
        raise ValueError("noise variance must be nonnegative")
    return lam * vib - (1.0 - lam) * (1.0 / (1.0 + noise_variance)) * mse


def breakdown(
    vib_total: float, ce: float, kl: float, mse: float, combined: float, beta: float
) -> LossBreakdown:
    assert abs(vib_total - (ce + beta * kl)) < 1e-9 * max(1.0, abs(vib_total))
    return LossBreakdown(
        vib_total=vib_total, vib_ce_term=ce, vib_kl_term=kl, mse=mse, combined=combined
    )
