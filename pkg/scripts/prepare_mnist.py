"""Convert the cazala/mnist JSON digit files into gzipped IDX files.

The npm package ``mnist`` (https://www.npmjs.com/package/mnist) ships 10,000
real MNIST digits as per-class JSON arrays of 784 floats quantized to three
decimals of pixel/255.  Rounding ``v * 255`` recovers the original 8-bit
pixel exactly (worst-case quantization error is 0.1275 of a pixel level).

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python scripts/prepare_mnist.py package/src/digits data/mnist

Writes the standard four files (train-images-idx3-ubyte.gz, ...) with a
deterministic stratified 8000/2000 train/test split.
"""

import gzip
import json
import struct
import sys
from pathlib import Path

import numpy as np

SPLIT_SEED = 20240601
TRAIN_FRACTION = 0.8


def load_digits(json_dir: Path) -> tuple[np.ndarray, np.ndarray]:
    images, labels = [], []
    for digit in range(10):
        with open(json_dir / f"{digit}.json") as f:
            flat = json.load(f)["data"]
        n = len(flat) // 784
        assert len(flat) == n * 784
        arr = np.asarray(flat, dtype=np.float64).reshape(n, 784)
        images.append(np.rint(arr * 255.0).astype(np.uint8))
        labels.append(np.full(n, digit, dtype=np.uint8))
    return np.concatenate(images), np.concatenate(labels)


def write_idx_images(path: Path, images: np.ndarray) -> None:
    n = images.shape[0]
    with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
        f.write(struct.pack(">III", 2051, n, 28))
        f.write(struct.pack(">I", 28))
        f.write(images.reshape(n, 28, 28).tobytes())


def write_idx_labels(path: Path, labels: np.ndarray) -> None:
    with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
        f.write(struct.pack(">II", 2049, labels.shape[0]))
        f.write(labels.tobytes())


def main() -> None:
    json_dir = Path(sys.argv[1])
    out_dir = Path(sys.argv[2])
    out_dir.mkdir(parents=True, exist_ok=True)

    images, labels = load_digits(json_dir)
    rng = np.random.default_rng(SPLIT_SEED)
    order = rng.permutation(images.shape[0])
    images, labels = images[order], labels[order]

    n_train = int(round(TRAIN_FRACTION * images.shape[0]))
    write_idx_images(out_dir / "train-images-idx3-ubyte.gz", images[:n_train])
    write_idx_labels(out_dir / "train-labels-idx1-ubyte.gz", labels[:n_train])
    write_idx_images(out_dir / "t10k-images-idx3-ubyte.gz", images[n_train:])
    write_idx_labels(out_dir / "t10k-labels-idx1-ubyte.gz", labels[n_train:])
    print(f"wrote {n_train} train / {images.shape[0] - n_train} test images to {out_dir}")


if __name__ == "__main__":
    main()
