"""Alternating adversarial training and the end-to-end baselines.

The adversarial loop alternates two stages per step:

  Stage A (simulate an adversary): a batch from the decoder split is
  encoded, transmitted, and reconstructed; only the decoder is updated
  on the reconstruction MSE.

  Stage B (learn the communication system): a batch from the user split
  is encoded, transmitted, classified and reconstructed with the decoder
  frozen; the encoder and classifier descend the combined objective
  lam * bottleneck - (1 - lam) * MSE, so the encoder actively maximizes
  the frozen decoder's distortion.

The channel-adaptive variant draws a fresh SNR per batch, updates the
classifier on the bottleneck loss alone, solves the min-norm problem for
lam*, and re-forwards to update the encoder with the weighted gradient.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from . import channel as ch
from . import mgda
from . import nn
from . import objectives as obj
from . import optim
from .config import ExperimentConfig
from .dataio import Dataset


@dataclass
class StepRecord:
    step: int
    snr_db: float
    adv_mse: float = math.nan  # stage-A decoder loss
    vib_total: float = math.nan
    vib_ce: float = math.nan
    vib_kl: float = math.nan
    mse: float = math.nan  # stage-B distortion term (decoder frozen)
    ce: float = math.nan  # baseline cross-entropy
    combined: float = math.nan
    lambda_star: float = math.nan


@dataclass
class TrainedSystem:
    cfg: ExperimentConfig
    encoder: nn.Network
    classifier: nn.Network
    decoder: nn.Network | None
    history: list[StepRecord]
    optimizers: dict[str, optim.AdamState]


def split_dataset(n: int, ratio: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint (decoder-stage, user-stage) index sets with |user| = round(ratio*n)."""
    if n < 2:
        raise ValueError(f"need at least 2 samples to split, got {n}")
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must lie in (0, 1), got {ratio}")
    perm = np.random.default_rng(seed).permutation(n)
    n_user = int(round(ratio * n))
    user = np.sort(perm[:n_user])
    decoder = np.sort(perm[n_user:])
    return decoder, user


def _epoch_batches(
    indices: np.ndarray,
    batch_size: int,
    rng: np.random.Generator,
    min_batch: int = 1,
) -> list[np.ndarray]:
    order = indices[rng.permutation(indices.size)]
    batches = [order[i : i + batch_size] for i in range(0, order.size, batch_size)]
    if len(batches) > 1 and batches[-1].size < min_batch:
        batches[-2] = np.concatenate([batches[-2], batches[-1]])
        batches.pop()
    return batches


def _rng(seed: int, *salt: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *salt]))


def _init_networks(cfg: ExperimentConfig) -> tuple[nn.Network, nn.Network, nn.Network]:
    rng = _rng(cfg.seed, 0x1247)
    encoder = nn.Network(cfg.encoder_spec(), nn.init_params(cfg.encoder_spec(), rng))
    classifier = nn.Network(
        cfg.classifier_spec(), nn.init_params(cfg.classifier_spec(), rng)
    )
    decoder = nn.Network(cfg.decoder_spec(), nn.init_params(cfg.decoder_spec(), rng))
    return encoder, classifier, decoder


def _fresh_adam(cfg: ExperimentConfig, n_params: int) -> optim.AdamState:
    return optim.fresh_state(
        n_params, beta1=cfg.beta1, beta2=cfg.beta2, lr=cfg.learning_rate
    )


def _adversary_stage(
    encoder: nn.Network,
    decoder: nn.Network,
    dec_state: optim.AdamState,
    images: np.ndarray,
    channel_cfg: ch.ChannelConfig,
    rng: np.random.Generator,
) -> tuple[optim.AdamState, nn.Network, float]:
    """Decoder-only MSE step on an encoder it cannot influence."""
    blocks = ch.normalize_power(
        nn.forward_values(encoder.spec, encoder.params, images)
    )
    received, _ = ch.transmit(blocks, channel_cfg, rng)
    out, tape = nn.forward_graph(decoder.spec, decoder.params, received)
    loss = obj.mse_loss(images, out)
    loss.backward()
    dec_state, new_params = optim.adam_step(dec_state, decoder.params, tape.param_grad())
    return dec_state, nn.Network(decoder.spec, new_params), loss.item()


def _distortion_weight(cfg: ExperimentConfig, images: np.ndarray) -> float:
    """Scale on the Eq.-7-form distortion inside the training objective.

    Per-pixel averaging keeps the privacy term commensurate with the
    cross-entropy term at lam = 0.5; the raw summed form is available via
    distortion_norm = "sum" (and drives the encoder to discard the task)."""
    if cfg.distortion_norm == "sum":
        return 1.0
    return 1.0 / images.shape[1]


def _user_forward(
    cfg: ExperimentConfig,
    encoder: nn.Network,
    classifier: nn.Network,
    decoder: nn.Network,
    images: np.ndarray,
    labels: np.ndarray,
    channel_cfg: ch.ChannelConfig,
    rng: np.random.Generator,
):
    """Stage-B graph: bottleneck loss plus the frozen-decoder distortion."""
    vib = obj.vib_loss(
        images, labels, encoder, classifier, channel_cfg, cfg.vib, rng
    )
    recon, _ = nn.forward_graph(decoder.spec, decoder.params, vib.received)
    mse_t = obj.mse_loss(images, recon)
    return vib, mse_t


def stage_b_gradient_pair(
    cfg: ExperimentConfig,
    encoder: nn.Network,
    classifier: nn.Network,
    decoder: nn.Network,
    images: np.ndarray,
    labels: np.ndarray,
    channel_cfg: ch.ChannelConfig,
    rng: np.random.Generator,
):
    """One channel-adaptive forward: bottleneck/distortion terms plus the
    encoder gradient pair (utility gradient, sign-flipped damped privacy
    gradient) and the classifier gradient.

    The pair carries the raw damped distortion gradient: the min-norm
    solve balances incommensurate scales by itself, which is the point of
    solving for the weight instead of fixing it.

    Returns (vib, mse_t, pair, classifier_grad)."""
    sigma2 = ch.snr_to_noise_variance(channel_cfg.snr_db)
    damp = 1.0 / (1.0 + sigma2)
    vib, mse_t = _user_forward(
        cfg, encoder, classifier, decoder, images, labels, channel_cfg, rng
    )
    vib.loss.backward()
    theta = vib.encoder_tape.param_grad()
    cls_grad = vib.classifier_tape.param_grad()
    ad.mul(mse_t, damp).backward()
    theta_bar = -vib.encoder_tape.param_grad()
    return vib, mse_t, mgda.GradientPair(theta, theta_bar), cls_grad


def train_ibal(cfg: ExperimentConfig, data: Dataset) -> TrainedSystem:
    """Fixed-weight alternating training (lam from the config)."""
    if cfg.scheme != "ibal":
        raise ValueError(f"train_ibal called with scheme {cfg.scheme!r}")
    return _train_adversarial(cfg, data, adaptive=False)


def train_ibal_d(cfg: ExperimentConfig, data: Dataset) -> TrainedSystem:
    """Channel-adaptive variant; per-batch SNR draw, min-norm lam* (or the
    fixed-0.5 ablation for scheme ibal_d_no)."""
    if cfg.scheme not in ("ibal_d", "ibal_d_no"):
        raise ValueError(f"train_ibal_d called with scheme {cfg.scheme!r}")
    return _train_adversarial(cfg, data, adaptive=True)


def _train_adversarial(cfg: ExperimentConfig, data: Dataset, adaptive: bool) -> TrainedSystem:
    encoder, classifier, decoder = _init_networks(cfg)
    enc_state = _fresh_adam(cfg, encoder.params.flat.size)
    cls_state = _fresh_adam(cfg, classifier.params.flat.size)
    dec_state = _fresh_adam(cfg, decoder.params.flat.size)

    dec_idx, user_idx = split_dataset(
        data.train_images.shape[0], cfg.split_ratio, cfg.seed
    )
    if user_idx.size < 2:
        raise ValueError("user-stage split has fewer than 2 samples")
    rng_shuffle = _rng(cfg.seed, 0x5F11)
    rng_channel = _rng(cfg.seed, 0xC4A7)
    rng_snr = _rng(cfg.seed, 0x57A2)

    lam_fixed = cfg.vib.lam
    snr_range = cfg.train_snr_range
    history: list[StepRecord] = []
    step = 0
    for _ in range(cfg.epochs):
        user_batches = _epoch_batches(user_idx, cfg.batch_size, rng_shuffle, min_batch=2)
        dec_batches = _epoch_batches(dec_idx, cfg.batch_size, rng_shuffle)
        for i, user_batch in enumerate(user_batches):
            step += 1
            dec_batch = dec_batches[i % len(dec_batches)]

            def draw_channel() -> ch.ChannelConfig:
                if adaptive and snr_range is not None:
                    snr = float(rng_snr.uniform(snr_range[0], snr_range[1]))
                    return replace(cfg.channel, snr_db=snr)
                return cfg.channel

            # Stage A: simulate the adversary, update only the decoder
            cfg_a = draw_channel()
            dec_state, decoder, adv_mse = _adversary_stage(
                encoder, decoder, dec_state, data.train_images[dec_batch], cfg_a,
                rng_channel,
            )

            # Stage B: update the transmitter and task classifier
            cfg_b = draw_channel()
            x_b = data.train_images[user_batch]
            y_b = data.train_labels[user_batch]

            if not adaptive:
                vib, mse_t = _user_forward(
                    cfg, encoder, classifier, decoder, x_b, y_b, cfg_b, rng_channel
                )
                total = obj.ibal_objective(
                    vib.loss, ad.mul(mse_t, _distortion_weight(cfg, x_b)), lam_fixed
                )
                total.backward()
                enc_state, new_enc = optim.adam_step(
                    enc_state, encoder.params, vib.encoder_tape.param_grad()
                )
                cls_state, new_cls = optim.adam_step(
                    cls_state, classifier.params, vib.classifier_tape.param_grad()
                )
                encoder = nn.Network(encoder.spec, new_enc)
                classifier = nn.Network(classifier.spec, new_cls)
                bd = obj.breakdown(
                    vib.loss.item(), vib.ce_term.item(), vib.kl_term.item(),
                    mse_t.item(), total.item(), cfg.vib.beta,
                )
                record = StepRecord(
                    step=step,
                    snr_db=cfg_b.snr_db,
                    adv_mse=adv_mse,
                    vib_total=bd.vib_total,
                    vib_ce=bd.vib_ce_term,
                    vib_kl=bd.vib_kl_term,
                    mse=bd.mse,
                    combined=bd.combined,
                    lambda_star=lam_fixed,
                )
            else:
                sigma2 = ch.snr_to_noise_variance(cfg_b.snr_db)

                # pass 1: classifier update + gradient pair for lam*
                vib, mse_t, pair, cls_grad = stage_b_gradient_pair(
                    cfg, encoder, classifier, decoder, x_b, y_b, cfg_b, rng_channel
                )
                cls_state, new_cls = optim.adam_step(cls_state, classifier.params, cls_grad)
                classifier = nn.Network(classifier.spec, new_cls)
                if cfg.scheme == "ibal_d":
                    lam_star = mgda.min_norm_lambda(pair)
                else:
                    lam_star = 0.5

                # pass 2: fresh forward, weighted encoder update; the
                # ablation differs from the solved variant only in lam_star
                _, _, pair2, _ = stage_b_gradient_pair(
                    cfg, encoder, classifier, decoder, x_b, y_b, cfg_b, rng_channel
                )
                enc_state, new_enc = mgda.mgda_weighted_step(
                    encoder.params, enc_state, pair2, lam_star
                )
                encoder = nn.Network(encoder.spec, new_enc)
                bd = obj.breakdown(
                    vib.loss.item(), vib.ce_term.item(), vib.kl_term.item(),
                    mse_t.item(),
                    obj.ibal_d_objective(vib.loss.item(), mse_t.item(), lam_star, sigma2),
                    cfg.vib.beta,
                )
                record = StepRecord(
                    step=step,
                    snr_db=cfg_b.snr_db,
                    adv_mse=adv_mse,
                    vib_total=bd.vib_total,
                    vib_ce=bd.vib_ce_term,
                    vib_kl=bd.vib_kl_term,
                    mse=bd.mse,
                    combined=bd.combined,
                    lambda_star=lam_star,
                )
            history.append(record)
    optimizers = {"encoder": enc_state, "classifier": cls_state, "decoder": dec_state}
    return TrainedSystem(cfg, encoder, classifier, decoder, history, optimizers)


def train_baseline(cfg: ExperimentConfig, data: Dataset) -> TrainedSystem:
    """End-to-end cross-entropy training; no adversarial stage, decoder unused.

    The differentially-private variant adds Laplace noise (scale = the
    reciprocal of the privacy budget) to the transmitted blocks during
    training; evaluation injects it again.
    """
    if cfg.scheme not in ("necst_g", "necst_g_dp"):
        raise ValueError(f"train_baseline called with scheme {cfg.scheme!r}")
    if cfg.scheme == "necst_g_dp" and not cfg.dp_budget > 0:
        raise ValueError(f"dp_budget must be positive, got {cfg.dp_budget}")

    encoder, classifier, _ = _init_networks(cfg)
    enc_state = _fresh_adam(cfg, encoder.params.flat.size)
    cls_state = _fresh_adam(cfg, classifier.params.flat.size)

    rng_shuffle = _rng(cfg.seed, 0x5F11)
    rng_channel = _rng(cfg.seed, 0xC4A7)
    rng_dp = _rng(cfg.seed, 0xD9B0)

    dp_scale = 0.0
    if cfg.scheme == "necst_g_dp" and np.isfinite(cfg.dp_budget):
        dp_scale = 1.0 / cfg.dp_budget

    all_idx = np.arange(data.train_images.shape[0])
    history: list[StepRecord] = []
    step = 0
    for _ in range(cfg.epochs):
        for batch in _epoch_batches(all_idx, cfg.batch_size, rng_shuffle):
            step += 1
            x = data.train_images[batch]
            y = data.train_labels[batch]
            enc_out, enc_tape = nn.forward_graph(encoder.spec, encoder.params, x)
            blocks = ch.normalize_power(enc_out)
            if dp_scale > 0.0:
                blocks = ad.add(
                    blocks, rng_dp.laplace(0.0, dp_scale, size=blocks.value.shape)
                )
            received, _ = ch.transmit(blocks, cfg.channel, rng_channel)
            probs, cls_tape = nn.forward_graph(
                classifier.spec, classifier.params, received
            )
            loss = nn.cross_entropy(probs, y)
            loss.backward()
            enc_state, new_enc = optim.adam_step(
                enc_state, encoder.params, enc_tape.param_grad()
            )
            cls_state, new_cls = optim.adam_step(
                cls_state, classifier.params, cls_tape.param_grad()
            )
            encoder = nn.Network(encoder.spec, new_enc)
            classifier = nn.Network(classifier.spec, new_cls)
            history.append(
                StepRecord(
                    step=step,
                    snr_db=cfg.channel.snr_db,
                    ce=loss.item(),
                    combined=loss.item(),
                )
            )
    optimizers = {"encoder": enc_state, "classifier": cls_state}
    return TrainedSystem(cfg, encoder, classifier, None, history, optimizers)


def train(cfg: ExperimentConfig, data: Dataset) -> TrainedSystem:
    if cfg.scheme == "ibal":
        return train_ibal(cfg, data)
    if cfg.scheme in ("ibal_d", "ibal_d_no"):
        return train_ibal_d(cfg, data)
    return train_baseline(cfg, data)


TRAIN_LOG_FIELDS = (
    "step",
    "stage",
    "snr_db",
    "mse",
    "vib_total",
    "vib_ce",
    "vib_kl",
    "ce",
    "combined",
    "lambda_star",
)


def _cell(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def write_train_log(history: list[StepRecord], path) -> None:
    """Per-step CSV; adversarial steps emit one adversary row + one user row."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(TRAIN_LOG_FIELDS)
        for r in history:
            if not math.isnan(r.adv_mse):
                w.writerow(
                    [r.step, "adversary", repr(float(r.snr_db)), _cell(r.adv_mse)]
                    + [""] * 6
                )
            w.writerow(
                [
                    r.step,
                    "user",
                    repr(float(r.snr_db)),
                    _cell(r.mse),
                    _cell(r.vib_total),
                    _cell(r.vib_ce),
                    _cell(r.vib_kl),
                    _cell(r.ce),
                    _cell(r.combined),
                    _cell(r.lambda_star),
                ]
            )
