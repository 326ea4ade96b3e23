"""Figure CLI over completed run artifacts.

    semcom-figs plot --csv runs/x/metrics.csv --metric accuracy --out acc.png
    semcom-figs plot --csv a.csv --csv b.csv --metric ssim --out ssim.png
    semcom-figs grid --pgm-dir runs/x/recon --out recon.png
"""

from __future__ import annotations

import argparse
import sys

from .plots import FigureSpec, plot_metric_vs_snr, recon_grid


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="semcom-figs")
    sub = p.add_subparsers(dest="command", required=True)

    plot = sub.add_parser("plot", help="metric-vs-SNR overlay, one line per scheme")
    plot.add_argument("--csv", action="append", required=True, help="metrics CSV (repeatable)")
    plot.add_argument(
        "--metric",
        required=True,
        choices=("accuracy", "ssim", "psnr_db", "latency_s"),
    )
    plot.add_argument("--out", required=True)
    plot.add_argument("--scheme", action="append", default=None, help="restrict to scheme(s)")
    plot.add_argument("--title", default="")

    grid = sub.add_parser("grid", help="reconstruction grid from PGM dumps")
    grid.add_argument("--pgm-dir", required=True, help="directory of per-scheme PGM folders")
    grid.add_argument("--out", required=True)
    grid.add_argument("--column", action="append", default=None, help="scheme order (repeatable)")
    grid.add_argument("--rows", type=int, default=None, help="limit sample rows")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "plot":
            spec = FigureSpec(
                csv_paths=tuple(args.csv),
                metric=args.metric,
                out_path=args.out,
                schemes=tuple(args.scheme) if args.scheme else (),
                title=args.title,
            )
            out = plot_metric_vs_snr(spec)
        else:
            out = recon_grid(args.pgm_dir, args.out, columns=args.column, rows=args.rows)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
