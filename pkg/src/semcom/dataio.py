"""Dataset ingestion and artifact persistence: IDX containers, pixel
normalization, sparsification, the metrics CSV schema, and P5 PGM dumps.

IDX layout (big-endian): a 32-bit magic whose low byte is the dimension
count (2049 = labels, 1-D; 2051 = images, 3-D), one 32-bit size per
dimension, then the unsigned payload bytes in row-major order.  Files may
be gzip-compressed; both forms are accepted transparently.
"""

from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IDX_LABEL_MAGIC = 2049
IDX_IMAGE_MAGIC = 2051


class IdxFormatError(ValueError):
    """Malformed IDX data; `offset` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class IdxTensor:
    magic: int
    dims: tuple[int, ...]
    payload: np.ndarray  # uint8, flat, row-major

    def __post_init__(self):
        expected = 1
        for d in self.dims:
            expected *= d
        if self.payload.size != expected:
            raise ValueError(
                f"payload has {self.payload.size} bytes, dims {self.dims} need {expected}"
            )


def parse_idx(data: bytes) -> IdxTensor:
    if len(data) < 4:
        raise IdxFormatError("truncated before magic", len(data))
    (magic,) = struct.unpack(">I", data[:4])
    if magic not in (IDX_LABEL_MAGIC, IDX_IMAGE_MAGIC):
        raise IdxFormatError(f"bad magic {magic}", 0)
    ndims = magic & 0xFF
    header_end = 4 + 4 * ndims
    if len(data) < header_end:
        raise IdxFormatError(f"truncated dimension header, need {header_end} bytes", len(data))
    dims = struct.unpack(f">{ndims}I", data[4:header_end])
    expected = 1
    for d in dims:
        expected *= d
    if len(data) - header_end != expected:
        raise IdxFormatError(
            f"payload length {len(data) - header_end} != product of dims {expected}",
            header_end + min(len(data) - header_end, expected),
        )
    payload = np.frombuffer(data, dtype=np.uint8, offset=header_end).copy()
    return IdxTensor(magic=magic, dims=tuple(int(d) for d in dims), payload=payload)


def serialize_idx(tensor: IdxTensor) -> bytes:
    ndims = tensor.magic & 0xFF
    if ndims != len(tensor.dims):
        raise ValueError(
            f"magic {tensor.magic} encodes {ndims} dims but tensor has {len(tensor.dims)}"
        )
    header = struct.pack(">I", tensor.magic) + struct.pack(
        f">{len(tensor.dims)}I", *tensor.dims
    )
    return header + tensor.payload.tobytes()


def load_idx_file(path) -> IdxTensor:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return parse_idx(raw)


@dataclass
class Dataset:
    """Pixel batches in [0, 1] (byte/255) with aligned integer labels."""

    train_images: np.ndarray  # (N, 784) float64
    train_labels: np.ndarray  # (N,) int
    test_images: np.ndarray
    test_labels: np.ndarray


_MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def _find(data_dir: Path, stem: str) -> Path:
    for suffix in ("", ".gz"):
        p = data_dir / (stem + suffix)
        if p.exists():
            return p
    raise FileNotFoundError(f"missing {stem}[.gz] under {data_dir}")


def load_mnist(data_dir) -> Dataset:
    data_dir = Path(data_dir)
    parts = {}
    for key, stem in _MNIST_FILES.items():
        tensor = load_idx_file(_find(data_dir, stem))
        if key.endswith("images"):
            if tensor.magic != IDX_IMAGE_MAGIC:
                raise IdxFormatError(f"{stem}: expected image magic", 0)
            n = tensor.dims[0]
            parts[key] = tensor.payload.reshape(n, -1).astype(np.float64) / 255.0
        else:
            if tensor.magic != IDX_LABEL_MAGIC:
                raise IdxFormatError(f"{stem}: expected label magic", 0)
            parts[key] = tensor.payload.astype(np.int64)
    for split in ("train", "test"):
        if parts[f"{split}_images"].shape[0] != parts[f"{split}_labels"].shape[0]:
            raise ValueError(f"{split}: image/label counts differ")
    return Dataset(
        train_images=parts["train_images"],
        train_labels=parts["train_labels"],
        test_images=parts["test_images"],
        test_labels=parts["test_labels"],
    )


def sparsify(images: np.ndarray, ratio: float, seed: int) -> np.ndarray:
    """Zero exactly round(ratio * pixel_count) pixels per image, chosen
    uniformly without replacement; deterministic under `seed`."""
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"sparsity ratio must lie in [0, 1], got {ratio}")
    images = np.array(images, copy=True)
    flat = images.reshape(images.shape[0], -1)
    n_pixels = flat.shape[1]
    count = int(round(ratio * n_pixels))
    if count == 0:
        return images
    rng = np.random.default_rng(seed)
    keys = rng.random(flat.shape)
    chosen = np.argpartition(keys, count - 1, axis=1)[:, :count]
    np.put_along_axis(flat, chosen, 0.0, axis=1)
    return images


METRICS_FIELDS = ("scheme", "snr_db", "accuracy", "ssim", "psnr_db", "latency_s", "seed")


@dataclass(frozen=True)
class MetricsRecord:
    """One evaluation row."""

    scheme: str
    snr_db: float
    accuracy: float
    ssim: float
    psnr_db: float
    latency_s: float
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy must lie in [0, 1], got {self.accuracy}")


def write_metrics_csv(records: list[MetricsRecord], path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(METRICS_FIELDS)
        for r in records:
            writer.writerow(
                [
                    r.scheme,
                    repr(float(r.snr_db)),
                    repr(float(r.accuracy)),
                    repr(float(r.ssim)),
                    repr(float(r.psnr_db)),
                    repr(float(r.latency_s)),
                    int(r.seed),
                ]
            )


def read_metrics_csv(path) -> list[MetricsRecord]:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if tuple(header) != METRICS_FIELDS:
            raise ValueError(f"unexpected metrics header {header}")
        out = []
        for row in reader:
            out.append(
                MetricsRecord(
                    scheme=row[0],
                    snr_db=float(row[1]),
                    accuracy=float(row[2]),
                    ssim=float(row[3]),
                    psnr_db=float(row[4]),
                    latency_s=float(row[5]),
                    seed=int(row[6]),
                )
            )
    return out


def write_pgm(path, image: np.ndarray) -> None:
    """Binary 8-bit grayscale P5 file."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("PGM dump expects a 2-D image")
    if img.dtype != np.uint8:
        img = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())


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
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(x) for x in fields)
    if maxval != 255:
        raise ValueError(f"{path}: expected maxval 255, got {maxval}")
    data = np.frombuffer(raw, dtype=np.uint8, offset=pos, count=w * h)
    return data.reshape(h, w).copy()
