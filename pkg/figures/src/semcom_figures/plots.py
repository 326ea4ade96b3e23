"""Figure rendering: metric-vs-SNR overlays and reconstruction grids.

Points are plotted exactly as read from the CSV (no smoothing or
interpolation); scheme styles come from a fixed table so the same scheme
looks the same across figures.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .artifacts import METRIC_COLUMNS, MetricsRow, read_metrics_csv, read_pgm

FIGURE_DPI = 150

# color/marker per scheme prefix, consistent across all figures
STYLE_TABLE = [
    ("ibal_d_no", dict(color="tab:cyan", marker="v")),
    ("ibal_d", dict(color="tab:green", marker="^")),
    ("ibal", dict(color="tab:blue", marker="o")),
    ("necst_g_dp~0.9", dict(color="tab:orange", marker="s")),
    ("necst_g_dp~0.1", dict(color="tab:red", marker="D")),
    ("necst_g_dp~0.05", dict(color="tab:purple", marker="P")),
    ("necst_g", dict(color="black", marker="x")),
]

_FALLBACK_CYCLE = ("tab:brown", "tab:pink", "tab:gray", "tab:olive")


def style_for(scheme: str, index: int) -> dict:
    for prefix, style in STYLE_TABLE:
        if scheme.startswith(prefix):
            return dict(style)
    return dict(color=_FALLBACK_CYCLE[index % len(_FALLBACK_CYCLE)], marker="*")


@dataclass(frozen=True)
class FigureSpec:
    csv_paths: tuple[str, ...]
    metric: str  # accuracy | ssim | psnr_db | latency_s
    out_path: str
    schemes: tuple[str, ...] = ()  # empty = every scheme present
    title: str = ""

    def __post_init__(self):
        if self.metric not in METRIC_COLUMNS:
            raise ValueError(f"metric must be one of {METRIC_COLUMNS}, got {self.metric!r}")
        if not self.csv_paths:
            raise ValueError("need at least one CSV path")


def _collect(spec: FigureSpec) -> dict[str, list[MetricsRow]]:
    rows: list[MetricsRow] = []
    for path in spec.csv_paths:
        rows.extend(read_metrics_csv(path))
    if not rows:
        raise ValueError("no data rows in the given CSVs")
    by_scheme: dict[str, list[MetricsRow]] = {}
    for r in rows:
        by_scheme.setdefault(r.scheme, []).append(r)
    if spec.schemes:
        missing = [s for s in spec.schemes if s not in by_scheme]
        if missing:
            raise ValueError(f"schemes not present in CSV data: {missing}")
        by_scheme = {s: by_scheme[s] for s in spec.schemes}
    return by_scheme


def plot_metric_vs_snr(spec: FigureSpec) -> str:
    """One line per scheme, x = snr_db, y = the chosen metric."""
    by_scheme = _collect(spec)
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=FIGURE_DPI)
    for i, (scheme, rows) in enumerate(sorted(by_scheme.items())):
        rows = sorted(rows, key=lambda r: r.snr_db)
        x = [r.snr_db for r in rows]
        y = [getattr(r, spec.metric) for r in rows]
        ax.plot(x, y, label=scheme, markersize=5, linewidth=1.3, **style_for(scheme, i))
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel(spec.metric)
    if spec.title:
        ax.set_title(spec.title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(spec.out_path)
    plt.close(fig)
    return spec.out_path


def recon_grid(pgm_dir, out_path, columns: list[str] | None = None, rows: int | None = None) -> str:
    """Tile PGM dumps: one column per scheme directory, one row per sample.

    `pgm_dir` holds one subdirectory per scheme (the run writes original/
    plus the scheme label), each with identically named .pgm files.
    """
    pgm_dir = Path(pgm_dir)
    if columns is None:
        columns = sorted(d.name for d in pgm_dir.iterdir() if d.is_dir())
        # originals lead, if present
        if "original" in columns:
            columns.remove("original")
            columns = ["original"] + columns
    if not columns:
        raise ValueError(f"no scheme directories under {pgm_dir}")
    missing = [c for c in columns if not (pgm_dir / c).is_dir()]
    if missing:
        raise ValueError(f"missing scheme directories: {missing}")

    names = sorted(p.name for p in (pgm_dir / columns[0]).glob("*.pgm"))
    if rows is not None:
        names = names[:rows]
    if not names:
        raise ValueError(f"no .pgm files under {pgm_dir / columns[0]}")

    tiles: list[list[np.ndarray]] = []
    shape = None
    for name in names:
        row_imgs = []
        for col in columns:
            path = pgm_dir / col / name
            if not path.exists():
                raise ValueError(f"missing {path}")
            img = read_pgm(path)
            if shape is None:
                shape = img.shape
            elif img.shape != shape:
                raise ValueError(
                    f"{path}: shape {img.shape} differs from first tile {shape}"
                )
            row_imgs.append(img)
        tiles.append(row_imgs)

    n_rows, n_cols = len(tiles), len(columns)
    fig, axes = plt.subplots(
        n_rows, n_cols, figsize=(1.2 * n_cols, 1.2 * n_rows), dpi=FIGURE_DPI, squeeze=False
    )
    for i, row_imgs in enumerate(tiles):
        for j, img in enumerate(row_imgs):
            ax = axes[i][j]
            ax.imshow(img, cmap="gray", vmin=0, vmax=255, interpolation="nearest")
            ax.set_xticks([])
            ax.set_yticks([])
            if i == 0:
                ax.set_title(columns[j], fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return str(out_path)
