"""Figure rendering for semcom run artifacts."""

__version__ = "0.1.0"

from .artifacts import MetricsRow, read_metrics_csv, read_pgm
from .plots import FigureSpec, plot_metric_vs_snr, recon_grid
