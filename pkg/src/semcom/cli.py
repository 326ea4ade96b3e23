"""Config-driven experiment runner.

One command: train a scheme, train a fresh black-box inversion adversary
against it, sweep the test SNRs, and write the artifacts:

    <out>/config.txt        resolved configuration (re-runnable)
    <out>/manifest.txt      config hash, seed, tool version, layout
    <out>/metrics.csv       one row per (scheme label, test SNR)
    <out>/train_log.csv     per-step losses, lambda*, SNR
    <out>/checkpoints/      trained networks + optimizer state
    <out>/recon/            PGM grids: originals and adversary views

`--sweep AXIS` repeats the pipeline over the configured axis values and
pools every row into one metrics.csv.

Exit codes: 0 success, 2 configuration error, 3 runtime failure (a
RUN_FAILED.txt marker with the traceback is left next to any partial
artifacts).
"""

from __future__ import annotations

import argparse
import importlib.resources
import os
import sys
import traceback
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import attacks, metrics, training
from . import dataio, nn
from .config import (
    ConfigError,
    ExperimentConfig,
    config_hash,
    load_config,
    serialize_config,
)

DATA_ENV_VAR = "SEMCOM_DATA_DIR"


def resolve_data_dir(cfg: ExperimentConfig) -> Path:
    if cfg.dataset_dir:
        return Path(cfg.dataset_dir)
    env = os.environ.get(DATA_ENV_VAR)
    if env:
        return Path(env)
    return Path(str(importlib.resources.files("semcom") / "data" / "mnist"))


def prepare_dataset(cfg: ExperimentConfig) -> dataio.Dataset:
    data_dir = resolve_data_dir(cfg)
    try:
        data = dataio.load_mnist(data_dir)
    except FileNotFoundError as e:
        raise ConfigError(
            [f"dataset_dir: {e}; set dataset_dir or ${DATA_ENV_VAR}"]
        )
    if cfg.limit > 0:
        data = dataio.Dataset(
            train_images=data.train_images[: cfg.limit],
            train_labels=data.train_labels[: cfg.limit],
            test_images=data.test_images[: cfg.limit],
            test_labels=data.test_labels[: cfg.limit],
        )
    if cfg.sparsity_ratio > 0.0:
        if cfg.sparsity_apply in ("train", "both"):
            data = replace(
                data,
                train_images=dataio.sparsify(
                    data.train_images, cfg.sparsity_ratio, cfg.seed ^ 0x51A
                ),
            )
        if cfg.sparsity_apply in ("test", "both"):
            data = replace(
                data,
                test_images=dataio.sparsify(
                    data.test_images, cfg.sparsity_ratio, cfg.seed ^ 0x51B
                ),
            )
    return data


def split_attack_pool(
    data: dataio.Dataset, cfg: ExperimentConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Carve the attacker's training pool out of the test split.

    The attacker may not touch user training data, so it trains on a
    disjoint slice of the test pool; evaluation uses the remainder.
    Returns (attacker images, eval images, eval labels).
    """
    n = data.test_images.shape[0]
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xA77C]))
    perm = rng.permutation(n)
    n_adv = int(round(cfg.adversary_fraction * n))
    adv_idx, eval_idx = perm[:n_adv], perm[n_adv:]
    return (
        data.test_images[adv_idx],
        data.test_images[eval_idx],
        data.test_labels[eval_idx],
    )


def run_pipeline(
    cfg: ExperimentConfig, data: dataio.Dataset, scheme_label: str | None = None
) -> tuple[list[dataio.MetricsRecord], training.TrainedSystem, nn.Network]:
    """train -> adversary-train -> evaluate; returns everything for artifacts."""
    system = training.train(cfg, data)
    adv_images, eval_images, eval_labels = split_attack_pool(data, cfg)

    dp = cfg.dp_budget if cfg.scheme == "necst_g_dp" else None
    rng_oracle = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x0AC1]))
    oracle = attacks.make_encoder_oracle(system.encoder, dp, rng_oracle)
    adv_cfg = attacks.AdversaryConfig(
        decoder_spec=cfg.adversary_spec(),
        channel=replace(cfg.channel, snr_db=cfg.attack_snr()),
        epochs=cfg.adversary_epochs,
        batch_size=cfg.adversary_batch_size,
        learning_rate=cfg.learning_rate,
        beta1=cfg.beta1,
        beta2=cfg.beta2,
    )
    rng_attack = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xA77A]))
    adversary = attacks.train_inversion_adversary(oracle, adv_images, adv_cfg, rng_attack)

    records = metrics.evaluate(
        system.encoder,
        system.classifier,
        adversary,
        eval_images,
        eval_labels,
        cfg,
        scheme_label=scheme_label,
    )
    return records, system, adversary


def _write_artifacts(
    out: Path,
    cfg: ExperimentConfig,
    records: list[dataio.MetricsRecord],
    system: training.TrainedSystem,
    adversary: nn.Network,
    data: dataio.Dataset,
    label: str,
) -> None:
    (out / "checkpoints").mkdir(parents=True, exist_ok=True)
    networks = {"encoder": system.encoder.params, "classifier": system.classifier.params}
    if system.decoder is not None:
        networks["decoder"] = system.decoder.params
    networks["adversary"] = adversary.params
    nn.save_checkpoint(out / "checkpoints" / f"{label}.ckpt", networks, system.optimizers)
    training.write_train_log(system.history, out / "train_log.csv")

    _, eval_images, _ = split_attack_pool(data, cfg)
    recon_dir = out / "recon"
    (recon_dir / "original").mkdir(parents=True, exist_ok=True)
    (recon_dir / label).mkdir(parents=True, exist_ok=True)
    recon = metrics.reconstruction_samples(
        system.encoder, adversary, eval_images, cfg, count=8
    )
    for i in range(recon.shape[0]):
        dataio.write_pgm(
            recon_dir / "original" / f"{i:02d}.pgm", eval_images[i].reshape(28, 28)
        )
        dataio.write_pgm(recon_dir / label / f"{i:02d}.pgm", recon[i].reshape(28, 28))


SWEEP_LABELS = {
    "snr": ("sweep_train_snrs", "train_snr"),
    "dp_budget": ("sweep_dp_budgets", "dp"),
    "sparsity": ("sweep_sparsities", "sparsity"),
    "latency_k": ("sweep_latency_ks", "k"),
}


def _sweep_variants(cfg: ExperimentConfig) -> list[tuple[ExperimentConfig, str | None]]:
    axis = cfg.sweep_axis
    variants: list[tuple[ExperimentConfig, str | None]] = []
    if axis == "dp_budget":
        for budget in cfg.sweep_dp_budgets:
            v = replace(cfg, scheme="necst_g_dp", dp_budget=budget)
            variants.append((v, None))  # label carries the budget already
    elif axis == "sparsity":
        for ratio in cfg.sweep_sparsities:
            v = replace(cfg, sparsity_ratio=ratio)
            variants.append((v, f"{cfg.scheme_label()}~sparsity={ratio:g}"))
    elif axis == "latency_k":
        for k in cfg.sweep_latency_ks:
            v = replace(cfg, encoder_dim=int(k))
            variants.append((v, f"{cfg.scheme_label()}~k={int(k)}"))
    elif axis == "snr":
        for snr in cfg.sweep_train_snrs:
            v = replace(cfg, channel=replace(cfg.channel, snr_db=snr))
            variants.append((v, f"{cfg.scheme_label()}~train_snr={snr:g}"))
    else:
        raise ConfigError([f"sweep.axis: cannot sweep {axis!r}"])
    return variants


def _print_summary(records: list[dataio.MetricsRecord]) -> None:
    print(f"{'scheme':<28} {'snr_db':>7} {'accuracy':>9} {'ssim':>7} {'psnr_db':>8} {'latency_s':>10}")
    for r in records:
        print(
            f"{r.scheme:<28} {r.snr_db:>7.1f} {r.accuracy:>9.4f} "
            f"{r.ssim:>7.4f} {r.psnr_db:>8.3f} {r.latency_s:>10.6f}"
        )


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="semcom",
        description="Train and evaluate privacy-preserving task-oriented "
        "semantic communication schemes over simulated noisy channels.",
    )
    p.add_argument("--config", type=str, default=None, help="config file (key = value lines)")
    p.add_argument("--scheme", type=str, default=None, help="ibal | ibal_d | ibal_d_no | necst_g | necst_g_dp")
    p.add_argument("--train-snr", type=float, default=None, help="training channel SNR in dB")
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="privacy-utility weight in [0,1]")
    p.add_argument("--beta", type=float, default=None, help="bottleneck rate weight")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--limit", type=int, default=None, help="truncate the dataset for smoke runs")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=str, default=None, help="output directory (default runs/<config hash>)")
    p.add_argument("--sweep", type=str, default=None, help="snr | dp_budget | sparsity | latency_k")
    return p


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.scheme is not None:
        cfg = replace(cfg, scheme=args.scheme)
        if args.scheme in ("ibal_d", "ibal_d_no") and cfg.train_snr_range is None:
            cfg = replace(cfg, train_snr_range=(7.0, 23.0))
    if args.train_snr is not None:
        cfg = replace(cfg, channel=replace(cfg.channel, snr_db=args.train_snr))
    if args.lam is not None:
        cfg = replace(cfg, vib=replace(cfg.vib, lam=args.lam))
    if args.beta is not None:
        cfg = replace(cfg, vib=replace(cfg.vib, beta=args.beta))
    if args.epochs is not None:
        cfg = replace(cfg, epochs=args.epochs)
    if args.limit is not None:
        cfg = replace(cfg, limit=args.limit)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed, channel=replace(cfg.channel, seed=args.seed))
    if args.out is not None:
        cfg = replace(cfg, out_dir=args.out)
    if args.sweep is not None:
        cfg = replace(cfg, sweep_axis=args.sweep)
    cfg.validate()
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as e:
        for problem in e.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2

    out = Path(cfg.out_dir) if cfg.out_dir else Path("runs") / config_hash(cfg)
    out.mkdir(parents=True, exist_ok=True)
    try:
        try:
            data = prepare_dataset(cfg)
        except ConfigError as e:
            for problem in e.problems:
                print(f"config error: {problem}", file=sys.stderr)
            return 2

        (out / "config.txt").write_text(serialize_config(cfg))
        all_records: list[dataio.MetricsRecord] = []
        if cfg.sweep_axis:
            for variant, label in _sweep_variants(cfg):
                variant.validate()
                vdata = (
                    prepare_dataset(variant)
                    if variant.sparsity_ratio != cfg.sparsity_ratio
                    else data
                )
                records, system, adversary = run_pipeline(variant, vdata, label)
                sub = out / (label or variant.scheme_label()).replace("~", "_")
                sub.mkdir(parents=True, exist_ok=True)
                _write_artifacts(
                    sub, variant, records, system, adversary, vdata,
                    label or variant.scheme_label(),
                )
                all_records.extend(records)
        else:
            records, system, adversary = run_pipeline(cfg, data)
            _write_artifacts(out, cfg, records, system, adversary, data, cfg.scheme_label())
            all_records = records

        dataio.write_metrics_csv(all_records, out / "metrics.csv")
        (out / "manifest.txt").write_text(
            "tool = semcom {version}\n"
            "config_hash = {h}\n"
            "seed = {seed}\n"
            "layout = config.txt metrics.csv train_log.csv checkpoints/ recon/\n".format(
                version=__version__, h=config_hash(cfg), seed=cfg.seed
            )
        )
        _print_summary(all_records)
        print(f"artifacts: {out}")
        return 0
    except Exception:
        (out / "RUN_FAILED.txt").write_text(traceback.format_exc())
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
