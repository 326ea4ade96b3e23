"""Privacy-preserving task-oriented semantic communication.

A dense encoder maps images to channel symbols, a classifier infers the
task label from the noisy received block, and an adversarially trained
decoder stands in for a model-inversion attacker; training trades task
accuracy against reconstruction distortion, optionally re-weighting the
two objectives per channel state via a min-norm solver.
"""

__version__ = "0.1.0"

from .autodiff import Tensor
from .channel import ChannelConfig, latency_seconds, normalize_power, snr_to_noise_variance, transmit
from .config import ConfigError, ExperimentConfig, load_config, serialize_config
from .dataio import Dataset, IdxTensor, MetricsRecord, load_mnist, parse_idx, read_metrics_csv, serialize_idx, sparsify, write_metrics_csv
from .mgda import GradientPair, SimplexWeights, frank_wolfe, min_norm_lambda
from .metrics import classification_accuracy, evaluate, psnr, ssim
from .nn import DenseNetworkSpec, LayerSpec, Network, ParameterSet, cross_entropy, forward, gradients, init_params, load_checkpoint, save_checkpoint
from .objectives import LossBreakdown, VibConfig, gaussian_log_density, ibal_d_objective, ibal_objective, mse_loss, vib_loss
from .optim import AdamState, adam_step, fresh_state
from .training import TrainedSystem, split_dataset, train, train_baseline, train_ibal, train_ibal_d
from .attacks import AdversaryConfig, make_encoder_oracle, train_inversion_adversary
