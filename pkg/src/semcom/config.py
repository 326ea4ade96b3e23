"""Experiment configuration: a flat `key = value` text format (dotted keys
for groups, `#` comments) mapped onto :class:`ExperimentConfig`.

The format is deliberately diff-friendly: serialize() emits every key in a
fixed order, so parse -> serialize -> parse is the identity and a config
hash identifies a run.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path

from .channel import ChannelConfig
from .nn import DenseNetworkSpec
from .objectives import VibConfig

SCHEMES = ("ibal", "ibal_d", "ibal_d_no", "necst_g", "necst_g_dp")
SWEEP_AXES = ("", "snr", "dp_budget", "sparsity", "latency_k")
SPARSITY_TARGETS = ("train", "test", "both")


class ConfigError(Exception):
    """Invalid configuration; `problems` lists field-level diagnostics."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class ExperimentConfig:
    scheme: str = "ibal"
    seed: int = 0
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.99
    split_ratio: float = 2.0 / 3.0  # fraction of training data for the user stage
    encoder_dim: int = 64
    # distortion term inside the training objectives: "per_pixel" averages the
    # squared reconstruction error over pixels so it is commensurate with the
    # cross-entropy term; "sum" keeps the raw per-image squared norm, which at
    # lam = 0.5 lets the privacy term swamp the task term
    distortion_norm: str = "per_pixel"
    vib: VibConfig = field(default_factory=VibConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    train_snr_range: tuple[float, float] | None = None  # per-batch draw for ibal_d*
    test_snrs: tuple[float, ...] = (7.0, 11.0, 15.0, 19.0, 23.0)
    attack_snr_db: float | None = None  # adversary training SNR; default = train SNR
    dp_budget: float = 0.1
    dataset_dir: str = ""
    limit: int = 0  # truncate the dataset for smoke runs (0 = full)
    sparsity_ratio: float = 0.0
    sparsity_apply: str = "both"
    adversary_epochs: int = 20
    adversary_batch_size: int = 64
    adversary_fraction: float = 0.5  # share of the test pool the attacker trains on
    arch_encoder: str = ""
    arch_classifier: str = ""
    arch_decoder: str = ""
    arch_adversary: str = ""
    out_dir: str = ""
    sweep_axis: str = ""
    sweep_train_snrs: tuple[float, ...] = (7.0, 15.0, 23.0)
    sweep_dp_budgets: tuple[float, ...] = (0.9, 0.1, 0.05)
    sweep_sparsities: tuple[float, ...] = (0.1, 0.3)
    sweep_latency_ks: tuple[int, ...] = (32, 64, 128)
    symbol_rate: float = 9600.0

    # -- derived -------------------------------------------------------------

    def scheme_label(self) -> str:
        if self.scheme == "necst_g_dp":
            return f"necst_g_dp~{_fmt_float(self.dp_budget)}"
        return self.scheme

    def encoder_spec(self) -> DenseNetworkSpec:
        if self.arch_encoder:
            return parse_layer_chain(self.arch_encoder)
        return DenseNetworkSpec.chain([(784, self.encoder_dim, "tanh")])

    def classifier_spec(self) -> DenseNetworkSpec:
        if self.arch_classifier:
            return parse_layer_chain(self.arch_classifier)
        k = self.encoder_dim
        return DenseNetworkSpec.chain(
            [(k, 1024, "relu"), (1024, 256, "relu"), (256, 10, "softmax")]
        )

    def decoder_spec(self) -> DenseNetworkSpec:
        if self.arch_decoder:
            return parse_layer_chain(self.arch_decoder)
        return DenseNetworkSpec.chain([(self.encoder_dim, 784, "tanh")])

    def adversary_spec(self) -> DenseNetworkSpec:
        if self.arch_adversary:
            return parse_layer_chain(self.arch_adversary)
        return DenseNetworkSpec.chain([(self.encoder_dim, 784, "tanh")])

    def attack_snr(self) -> float:
        if self.attack_snr_db is not None:
            return self.attack_snr_db
        return self.channel.snr_db

    def validate(self) -> None:
        problems = []
        if self.scheme not in SCHEMES:
            problems.append(f"scheme: {self.scheme!r} not one of {SCHEMES}")
        if not 0.0 < self.split_ratio < 1.0:
            problems.append(f"split_ratio: must lie in (0, 1), got {self.split_ratio}")
        if self.distortion_norm not in ("per_pixel", "sum"):
            problems.append(
                f"distortion_norm: {self.distortion_norm!r} not one of ('per_pixel', 'sum')"
            )
        if not self.test_snrs:
            problems.append("test_snrs: must be nonempty")
        if self.epochs < 1:
            problems.append(f"epochs: must be >= 1, got {self.epochs}")
        if self.batch_size < 2:
            problems.append(f"batch_size: must be >= 2, got {self.batch_size}")
        if self.encoder_dim < 2 or self.encoder_dim % 2 != 0:
            problems.append(f"encoder_dim: must be even and >= 2, got {self.encoder_dim}")
        if self.scheme == "necst_g_dp" and not self.dp_budget > 0:
            problems.append(f"dp_budget: must be positive, got {self.dp_budget}")
        if self.limit < 0:
            problems.append(f"limit: must be >= 0, got {self.limit}")
        if not 0.0 <= self.sparsity_ratio <= 1.0:
            problems.append(f"sparsity.ratio: must lie in [0, 1], got {self.sparsity_ratio}")
        if self.sparsity_apply not in SPARSITY_TARGETS:
            problems.append(
                f"sparsity.apply: {self.sparsity_apply!r} not one of {SPARSITY_TARGETS}"
            )
        if not 0.0 < self.adversary_fraction < 1.0:
            problems.append(
                f"adversary.fraction: must lie in (0, 1), got {self.adversary_fraction}"
            )
        if self.sweep_axis not in SWEEP_AXES:
            problems.append(f"sweep.axis: {self.sweep_axis!r} not one of {SWEEP_AXES}")
        if self.scheme in ("ibal_d", "ibal_d_no") and self.train_snr_range is None:
            problems.append("train_snr_range: required for ibal_d / ibal_d_no schemes")
        if self.train_snr_range is not None:
            lo, hi = self.train_snr_range
            if not lo <= hi:
                problems.append(f"train_snr_range: low {lo} > high {hi}")
        try:
            VibConfig(self.vib.beta, self.vib.n_samples, self.vib.lam)
        except ValueError as e:
            problems.append(f"vib: {e}")
        try:
            for name in ("encoder", "classifier", "decoder", "adversary"):
                getattr(self, f"{name}_spec")()
        except ValueError as e:
            problems.append(f"arch: {e}")
        if problems:
            raise ConfigError(problems)


def parse_layer_chain(text: str) -> DenseNetworkSpec:
    """'784x64:tanh,64x10:softmax' -> DenseNetworkSpec."""
    layers = []
    for part in text.split(","):
        part = part.strip()
        dims, _, act = part.partition(":")
        fan_in, _, fan_out = dims.partition("x")
        try:
            layers.append((int(fan_in), int(fan_out), act.strip()))
        except ValueError:
            raise ValueError(f"bad layer {part!r}, expected INxOUT:activation")
    return DenseNetworkSpec.chain(layers)


def _fmt_float(x: float) -> str:
    return repr(float(x))


def _parse_bool_free_scalar(text: str, kind):
    text = text.strip()
    if kind is float and text.lower() in ("inf", "+inf", "infinity"):
        return float("inf")
    return kind(text)


def _parse_list(text: str, kind) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(_parse_bool_free_scalar(part, kind) for part in text.split(","))


def _fmt_list(values) -> str:
    return ",".join(
        repr(float(v)) if isinstance(v, float) else str(v) for v in values
    )


def config_to_pairs(cfg: ExperimentConfig) -> list[tuple[str, str]]:
    rng = cfg.train_snr_range
    return [
        ("scheme", cfg.scheme),
        ("seed", str(cfg.seed)),
        ("epochs", str(cfg.epochs)),
        ("batch_size", str(cfg.batch_size)),
        ("learning_rate", _fmt_float(cfg.learning_rate)),
        ("adam.beta1", _fmt_float(cfg.beta1)),
        ("adam.beta2", _fmt_float(cfg.beta2)),
        ("split_ratio", _fmt_float(cfg.split_ratio)),
        ("encoder_dim", str(cfg.encoder_dim)),
        ("distortion_norm", cfg.distortion_norm),
        ("vib.beta", _fmt_float(cfg.vib.beta)),
        ("vib.n_samples", str(cfg.vib.n_samples)),
        ("vib.lambda", _fmt_float(cfg.vib.lam)),
        ("channel.kind", cfg.channel.kind),
        ("channel.snr_db", _fmt_float(cfg.channel.snr_db)),
        (
            "channel.estimation_error_variance",
            _fmt_float(cfg.channel.estimation_error_variance),
        ),
        (
            "channel.adversary_snr_db",
            "" if cfg.channel.adversary_snr_db is None else _fmt_float(cfg.channel.adversary_snr_db),
        ),
        ("channel.seed", str(cfg.channel.seed)),
        ("train_snr_range", "" if rng is None else _fmt_list(rng)),
        ("test_snrs", _fmt_list(cfg.test_snrs)),
        ("attack_snr_db", "" if cfg.attack_snr_db is None else _fmt_float(cfg.attack_snr_db)),
        ("dp_budget", _fmt_float(cfg.dp_budget)),
        ("dataset_dir", cfg.dataset_dir),
        ("limit", str(cfg.limit)),
        ("sparsity.ratio", _fmt_float(cfg.sparsity_ratio)),
        ("sparsity.apply", cfg.sparsity_apply),
        ("adversary.epochs", str(cfg.adversary_epochs)),
        ("adversary.batch_size", str(cfg.adversary_batch_size)),
        ("adversary.fraction", _fmt_float(cfg.adversary_fraction)),
        ("arch.encoder", cfg.arch_encoder),
        ("arch.classifier", cfg.arch_classifier),
        ("arch.decoder", cfg.arch_decoder),
        ("arch.adversary", cfg.arch_adversary),
        ("out_dir", cfg.out_dir),
        ("sweep.axis", cfg.sweep_axis),
        ("sweep.train_snrs", _fmt_list(cfg.sweep_train_snrs)),
        ("sweep.dp_budgets", _fmt_list(cfg.sweep_dp_budgets)),
        ("sweep.sparsities", _fmt_list(cfg.sweep_sparsities)),
        ("sweep.latency_ks", _fmt_list(cfg.sweep_latency_ks)),
        ("symbol_rate", _fmt_float(cfg.symbol_rate)),
    ]


def serialize_config(cfg: ExperimentConfig) -> str:
    lines = ["# semcom experiment configuration"]
    lines += [f"{key} = {value}" for key, value in config_to_pairs(cfg)]
    return "\n".join(lines) + "\n"


def parse_config_text(text: str) -> dict[str, str]:
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError([f"line {lineno}: expected 'key = value', got {raw!r}"])
        key, _, value = line.partition("=")
        pairs[key.strip()] = value.strip()
    return pairs


def config_from_pairs(pairs: dict[str, str]) -> ExperimentConfig:
    base = ExperimentConfig()
    known = {k for k, _ in config_to_pairs(base)}
    unknown = sorted(set(pairs) - known)
    if unknown:
        raise ConfigError([f"unknown key {k!r}" for k in unknown])

    problems: list[str] = []

    def take(key, kind, default):
        if key not in pairs:
            return default
        try:
            return _parse_bool_free_scalar(pairs[key], kind)
        except ValueError:
            problems.append(f"{key}: cannot parse {pairs[key]!r} as {kind.__name__}")
            return default

    def take_list(key, kind, default):
        if key not in pairs:
            return default
        try:
            return _parse_list(pairs[key], kind)
        except ValueError:
            problems.append(f"{key}: cannot parse {pairs[key]!r} as {kind.__name__} list")
            return default

    def take_opt_float(key, default):
        if key not in pairs:
            return default
        if pairs[key] == "":
            return None
        try:
            return _parse_bool_free_scalar(pairs[key], float)
        except ValueError:
            problems.append(f"{key}: cannot parse {pairs[key]!r} as float")
            return default

    rng_list = take_list("train_snr_range", float, None)
    if rng_list is not None and len(rng_list) not in (0, 2):
        problems.append(f"train_snr_range: expected 'low,high', got {pairs['train_snr_range']!r}")
        rng_list = None

    cfg = ExperimentConfig(
        scheme=take("scheme", str, base.scheme),
        seed=take("seed", int, base.seed),
        epochs=take("epochs", int, base.epochs),
        batch_size=take("batch_size", int, base.batch_size),
        learning_rate=take("learning_rate", float, base.learning_rate),
        beta1=take("adam.beta1", float, base.beta1),
        beta2=take("adam.beta2", float, base.beta2),
        split_ratio=take("split_ratio", float, base.split_ratio),
        encoder_dim=take("encoder_dim", int, base.encoder_dim),
        distortion_norm=take("distortion_norm", str, base.distortion_norm),
        vib=VibConfig(
            beta=take("vib.beta", float, base.vib.beta),
            n_samples=take("vib.n_samples", int, base.vib.n_samples),
            lam=take("vib.lambda", float, base.vib.lam),
        ),
        channel=ChannelConfig(
            kind=take("channel.kind", str, base.channel.kind),
            snr_db=take("channel.snr_db", float, base.channel.snr_db),
            estimation_error_variance=take(
                "channel.estimation_error_variance",
                float,
                base.channel.estimation_error_variance,
            ),
            adversary_snr_db=take_opt_float(
                "channel.adversary_snr_db", base.channel.adversary_snr_db
            ),
            seed=take("channel.seed", int, base.channel.seed),
        ),
        train_snr_range=(None if not rng_list else (rng_list[0], rng_list[1])),
        test_snrs=take_list("test_snrs", float, base.test_snrs),
        attack_snr_db=take_opt_float("attack_snr_db", base.attack_snr_db),
        dp_budget=take("dp_budget", float, base.dp_budget),
        dataset_dir=take("dataset_dir", str, base.dataset_dir),
        limit=take("limit", int, base.limit),
        sparsity_ratio=take("sparsity.ratio", float, base.sparsity_ratio),
        sparsity_apply=take("sparsity.apply", str, base.sparsity_apply),
        adversary_epochs=take("adversary.epochs", int, base.adversary_epochs),
        adversary_batch_size=take("adversary.batch_size", int, base.adversary_batch_size),
        adversary_fraction=take("adversary.fraction", float, base.adversary_fraction),
        arch_encoder=take("arch.encoder", str, base.arch_encoder),
        arch_classifier=take("arch.classifier", str, base.arch_classifier),
        arch_decoder=take("arch.decoder", str, base.arch_decoder),
        arch_adversary=take("arch.adversary", str, base.arch_adversary),
        out_dir=take("out_dir", str, base.out_dir),
        sweep_axis=take("sweep.axis", str, base.sweep_axis),
        sweep_train_snrs=take_list("sweep.train_snrs", float, base.sweep_train_snrs),
        sweep_dp_budgets=take_list("sweep.dp_budgets", float, base.sweep_dp_budgets),
        sweep_sparsities=take_list("sweep.sparsities", float, base.sweep_sparsities),
        sweep_latency_ks=take_list("sweep.latency_ks", int, base.sweep_latency_ks),
        symbol_rate=take("symbol_rate", float, base.symbol_rate),
    )
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError([f"cannot read config {path}: {e}"])
    try:
        return config_from_pairs(parse_config_text(text))
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError([str(e)])


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode("utf-8")).hexdigest()[:12]


def with_channel_snr(cfg: ExperimentConfig, snr_db: float) -> ChannelConfig:
    return replace(cfg.channel, snr_db=snr_db)
