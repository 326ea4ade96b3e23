"""Readers for the run artifacts this package consumes.

These parse the on-disk interfaces directly (the metrics CSV schema and
binary P5 PGM dumps); nothing here imports the training code.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

METRICS_FIELDS = ("scheme", "snr_db", "accuracy", "ssim", "psnr_db", "latency_s", "seed")
METRIC_COLUMNS = ("accuracy", "ssim", "psnr_db", "latency_s")


@dataclass(frozen=True)
class MetricsRow:
    scheme: str
    snr_db: float
    accuracy: float
    ssim: float
    psnr_db: float
    latency_s: float
    seed: int


def read_metrics_csv(path) -> list[MetricsRow]:
    import csv

    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(header) != METRICS_FIELDS:
            raise ValueError(f"{path}: unexpected metrics header {header}")
        rows = [
            MetricsRow(
                scheme=r[0],
                snr_db=float(r[1]),
                accuracy=float(r[2]),
                ssim=float(r[3]),
                psnr_db=float(r[4]),
                latency_s=float(r[5]),
                seed=int(r[6]),
            )
            for r in reader
        ]
    return rows


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if not raw.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary P5 PGM")
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    pos += 1
    w, h, maxval = (int(x) for x in fields)
    if maxval != 255:
        raise ValueError(f"{path}: expected maxval 255, got {maxval}")
    return np.frombuffer(raw, dtype=np.uint8, offset=pos, count=w * h).reshape(h, w).copy()
