import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pytest

from semcom_figures import FigureSpec, plot_metric_vs_snr, read_metrics_csv, read_pgm, recon_grid
from semcom_figures.cli import main as cli_main
from semcom_figures.plots import _collect, style_for

HEADER = ["scheme", "snr_db", "accuracy", "ssim", "psnr_db", "latency_s", "seed"]


def write_csv(path, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(HEADER)
        w.writerows(rows)


def demo_rows(scheme="ibal", snrs=(7, 11, 15, 19, 23)):
    return [
        [scheme, float(s), 0.8 + 0.005 * i, 0.5 - 0.01 * i, 12.0 + i, 64 / 9600, 0]
        for i, s in enumerate(snrs)
    ]


def write_pgm(path, img):
    img = np.asarray(img, dtype=np.uint8)
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(img.tobytes())


class TestCsvReader:
    def test_reads_schema(self, tmp_path):
        p = tmp_path / "m.csv"
        write_csv(p, demo_rows())
        rows = read_metrics_csv(p)
        assert len(rows) == 5
        assert rows[0].scheme == "ibal"
        assert rows[0].snr_db == 7.0

    def test_rejects_wrong_header(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError, match="header"):
            read_metrics_csv(p)


class TestPlot:
    def test_single_scheme_five_points(self, tmp_path):
        p = tmp_path / "m.csv"
        write_csv(p, demo_rows())
        out = tmp_path / "fig.png"
        plot_metric_vs_snr(FigureSpec((str(p),), "accuracy", str(out)))
        assert out.exists() and out.stat().st_size > 0

    def test_plotted_points_equal_csv_values_exactly(self, tmp_path, monkeypatch):
        p = tmp_path / "m.csv"
        rows = demo_rows("necst_g") + demo_rows("ibal")
        write_csv(p, rows)
        captured = {}
        real_plot = plt.Axes.plot

        def spy(self, x, y, *args, **kwargs):
            captured[kwargs.get("label")] = (list(x), list(y))
            return real_plot(self, x, y, *args, **kwargs)

        monkeypatch.setattr(plt.Axes, "plot", spy)
        out = tmp_path / "fig.png"
        plot_metric_vs_snr(FigureSpec((str(p),), "ssim", str(out)))
        expected = read_metrics_csv(p)
        for scheme in ("necst_g", "ibal"):
            want = [(r.snr_db, r.ssim) for r in expected if r.scheme == scheme]
            got_x, got_y = captured[scheme]
            assert got_x == [w[0] for w in want]
            assert got_y == [w[1] for w in want]  # exact, no smoothing

    def test_full_comparison_layout_on_one_axes(self, tmp_path):
        # defended scheme, undefended baseline, and the three noise budgets
        # overlaid on a single axes, each with its own legend entry
        schemes = ["ibal", "necst_g", "necst_g_dp~0.9", "necst_g_dp~0.1", "necst_g_dp~0.05"]
        p = tmp_path / "m.csv"
        rows = [r for s in schemes for r in demo_rows(s)]
        write_csv(p, rows)
        out = tmp_path / "fig.png"
        fig_labels = []
        real_legend = plt.Axes.legend

        def spy(self, *args, **kwargs):
            leg = real_legend(self, *args, **kwargs)
            fig_labels.extend(t.get_text() for t in leg.get_texts())
            return leg

        plt.Axes.legend = spy
        try:
            plot_metric_vs_snr(FigureSpec((str(p),), "accuracy", str(out)))
        finally:
            plt.Axes.legend = real_legend
        assert sorted(fig_labels) == sorted(schemes)
        assert out.exists()

    def test_missing_scheme_is_error(self, tmp_path):
        p = tmp_path / "m.csv"
        write_csv(p, demo_rows("ibal"))
        spec = FigureSpec((str(p),), "accuracy", str(tmp_path / "f.png"), schemes=("necst_g",))
        with pytest.raises(ValueError, match="necst_g"):
            plot_metric_vs_snr(spec)

    def test_empty_csv_is_error_and_no_file(self, tmp_path):
        p = tmp_path / "m.csv"
        write_csv(p, [])
        out = tmp_path / "f.png"
        with pytest.raises(ValueError, match="no data"):
            plot_metric_vs_snr(FigureSpec((str(p),), "accuracy", str(out)))
        assert not out.exists()

    def test_unknown_metric_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="metric"):
            FigureSpec(("x.csv",), "f1", "out.png")

    def test_multiple_csvs_merge(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(a, demo_rows("ibal"))
        write_csv(b, demo_rows("necst_g"))
        spec = FigureSpec((str(a), str(b)), "accuracy", str(tmp_path / "f.png"))
        by_scheme = _collect(spec)
        assert set(by_scheme) == {"ibal", "necst_g"}

    def test_rerender_identical_size(self, tmp_path):
        p = tmp_path / "m.csv"
        write_csv(p, demo_rows())
        out1, out2 = tmp_path / "f1.png", tmp_path / "f2.png"
        plot_metric_vs_snr(FigureSpec((str(p),), "accuracy", str(out1)))
        plot_metric_vs_snr(FigureSpec((str(p),), "accuracy", str(out2)))
        assert out1.stat().st_size == out2.stat().st_size

    def test_style_table_consistency(self):
        assert style_for("ibal", 0) == style_for("ibal", 3)
        assert style_for("necst_g_dp~0.05", 0) != style_for("necst_g", 0)


class TestGrid:
    def make_dumps(self, root, schemes, samples, shape=(28, 28)):
        rng = np.random.default_rng(0)
        for s in schemes:
            d = root / s
            d.mkdir(parents=True)
            for i in range(samples):
                write_pgm(d / f"{i:02d}.pgm", rng.integers(0, 256, size=shape, dtype=np.uint8))

    def test_single_tile(self, tmp_path):
        self.make_dumps(tmp_path / "recon", ["original"], 1)
        out = recon_grid(tmp_path / "recon", tmp_path / "g.png")
        assert (tmp_path / "g.png").exists()

    def test_six_by_four_grid(self, tmp_path):
        schemes = ["original", "ibal", "necst_g", "dp09", "dp01", "dp005"]
        self.make_dumps(tmp_path / "recon", schemes, 4)
        recon_grid(tmp_path / "recon", tmp_path / "g.png")
        assert (tmp_path / "g.png").stat().st_size > 0

    def test_missing_scheme_directory_listed(self, tmp_path):
        self.make_dumps(tmp_path / "recon", ["original"], 2)
        with pytest.raises(ValueError, match="ghost"):
            recon_grid(tmp_path / "recon", tmp_path / "g.png", columns=["original", "ghost"])

    def test_shape_mismatch_diagnosed(self, tmp_path):
        root = tmp_path / "recon"
        self.make_dumps(root, ["original"], 1)
        other = root / "ibal"
        other.mkdir()
        write_pgm(other / "00.pgm", np.zeros((14, 14), dtype=np.uint8))
        with pytest.raises(ValueError, match="shape"):
            recon_grid(root, tmp_path / "g.png")

    def test_original_column_leads(self, tmp_path):
        self.make_dumps(tmp_path / "recon", ["zeta", "original"], 1)
        # no error and the implicit ordering puts original first
        out = recon_grid(tmp_path / "recon", tmp_path / "g.png")
        assert out


class TestCli:
    def test_plot_command(self, tmp_path):
        p = tmp_path / "m.csv"
        write_csv(p, demo_rows())
        out = tmp_path / "f.png"
        assert cli_main(["plot", "--csv", str(p), "--metric", "accuracy", "--out", str(out)]) == 0
        assert out.exists()

    def test_grid_command(self, tmp_path):
        d = tmp_path / "recon" / "original"
        d.mkdir(parents=True)
        write_pgm(d / "00.pgm", np.zeros((8, 8), dtype=np.uint8))
        out = tmp_path / "g.png"
        assert cli_main(["grid", "--pgm-dir", str(tmp_path / "recon"), "--out", str(out)]) == 0

    def test_error_exit_code(self, tmp_path, capsys):
        assert (
            cli_main(
                ["plot", "--csv", str(tmp_path / "nope.csv"), "--metric", "ssim", "--out", "x.png"]
            )
            == 1
        )
        assert "error" in capsys.readouterr().err


def test_pgm_reader_round_trip(tmp_path):
    img = np.random.default_rng(1).integers(0, 256, size=(5, 7), dtype=np.uint8)
    write_pgm(tmp_path / "x.pgm", img)
    np.testing.assert_array_equal(read_pgm(tmp_path / "x.pgm"), img)
