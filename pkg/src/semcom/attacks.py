"""Black-box model-inversion attack harness.

The attacker never sees encoder parameters or user training data: it owns
a query oracle (input image -> transmitted symbol block), its own disjoint
image pool, and its own channel.  It collects (image, intercepted block)
pairs once, then fits a reconstruction decoder by minimizing the batch
mean squared error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import channel as ch
from . import nn
from . import objectives
from . import optim

EncoderOracle = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class AdversaryConfig:
    decoder_spec: nn.DenseNetworkSpec
    channel: ch.ChannelConfig  # the eavesdropper link (its own SNR)
    epochs: int = 20
    batch_size: int = 64
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.99


def make_encoder_oracle(
    encoder: nn.Network,
    dp_budget: float | None = None,
    dp_rng: np.random.Generator | None = None,
) -> EncoderOracle:
    """Query interface to the deployed transmitter.

    Returns what the device would actually emit for a batch of inputs:
    power-normalized encoder output, plus per-query Laplace noise for the
    differentially-private baseline.  The closure holds a private copy of
    the parameters; nothing about them is reachable from the returned
    callable's signature.
    """
    frozen = encoder.copy()
    noisy = dp_budget is not None and np.isfinite(dp_budget)
    if noisy and dp_rng is None:
        raise ValueError("dp oracle needs an rng")

    def oracle(images: np.ndarray) -> np.ndarray:
        z = ch.normalize_power(
            nn.forward_values(frozen.spec, frozen.params, np.atleast_2d(images))
        )
        if noisy:
            z = z + dp_rng.laplace(0.0, 1.0 / dp_budget, size=z.shape)
        return z

    return oracle


def train_inversion_adversary(
    encoder_oracle: EncoderOracle,
    adversary_images: np.ndarray,
    adv_cfg: AdversaryConfig,
    rng: np.random.Generator,
) -> nn.Network:
    """Fit the reconstruction decoder from query access alone.

    Queries the oracle over the attacker's image pool, passes the blocks
    through the attacker's channel once to form the training pairs, then
    runs plain minibatch Adam on the reconstruction MSE.
    """
    adversary_images = np.asarray(adversary_images, dtype=np.float64)
    if adversary_images.ndim != 2 or adversary_images.shape[0] == 0:
        raise ValueError("adversary needs a nonempty (N, D) image pool")

    blocks = encoder_oracle(adversary_images)
    intercepted, _ = ch.transmit(blocks, adv_cfg.channel, rng)

    params = nn.init_params(adv_cfg.decoder_spec, rng)
    state = optim.fresh_state(
        params.flat.size,
        beta1=adv_cfg.beta1,
        beta2=adv_cfg.beta2,
        lr=adv_cfg.learning_rate,
    )
    n = adversary_images.shape[0]
    for _ in range(adv_cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, adv_cfg.batch_size):
            idx = order[start : start + adv_cfg.batch_size]
            out, tape = nn.forward_graph(adv_cfg.decoder_spec, params, intercepted[idx])
            loss = objectives.mse_loss(adversary_images[idx], out)
            loss.backward()
            state, params = optim.adam_step(state, params, tape.param_grad())
    return nn.Network(adv_cfg.decoder_spec, params)
