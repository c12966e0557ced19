import csv
import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from loocv_figures import KINDS, FigureSpec, MissingColumnsError, render

DATA = Path(__file__).parent / "data"
REFERENCE_GRID = {"n": (8, 16), "beta": (0.0, 1.0)}  # grid of the frozen fixture


def make_spec(kind, out_path, trials=None, summary=None, **kw):
    return FigureSpec(
        kind=kind,
        output_path=str(out_path),
        trials_csv=str(trials if trials is not None else DATA / "trials.csv"),
        summary_json=str(summary if summary is not None else DATA / "summary.json"),
        **kw,
    )


class TestRenderAllKinds:
    @pytest.mark.parametrize("kind", KINDS)
    def test_renders_one_image_per_kind(self, kind, tmp_path):
        out = tmp_path / f"{kind}.png"
        fig = render(make_spec(kind, out))
        assert out.exists() and out.stat().st_size > 0
        if kind in ("joint", "relative_error", "se_ratio", "pit"):
            expected = len(REFERENCE_GRID["n"]) * len(REFERENCE_GRID["beta"])
            assert len(fig.axes) == expected

    @pytest.mark.parametrize("suffix", [".png", ".svg"])
    def test_output_bytes_deterministic(self, suffix, tmp_path):
        a = tmp_path / f"a{suffix}"
        b = tmp_path / f"b{suffix}"
        render(make_spec("pit", a))
        render(make_spec("pit", b))
        assert a.read_bytes() == b.read_bytes()


class TestNoRecomputation:
    def test_histogram_bars_equal_summary_counts(self, tmp_path):
        with open(DATA / "summary.json") as fh:
            cells = json.load(fh)["cells"]
        fig = render(make_spec("pit", tmp_path / "pit.png"))
        first_cell = min(cells, key=lambda c: (c["n"], c["beta_delta"]))
        counts = first_cell["pit_normal_counts"]
        ax = fig.axes[0]
        # the envelope band is also a patch; bars are the bin-width rectangles
        bars = [p for p in ax.patches if abs(p.get_width() - 1.0 / len(counts)) < 1e-9]
        heights = [float(b.get_height()) for b in bars]
        assert heights == [float(c) for c in counts]

    def test_hand_edited_csv_changes_output(self, tmp_path):
        baseline = tmp_path / "base.svg"
        render(make_spec("joint", baseline))

        edited_csv = tmp_path / "edited.csv"
        with open(DATA / "trials.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
            fieldnames = list(rows[0].keys())
        rows[0]["elpdhat"] = repr(float(rows[0]["elpdhat"]) + 500.0)
        with open(edited_csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fieldnames)
            writer.writeheader()
            writer.writerows(rows)

        edited_out = tmp_path / "edited.svg"
        render(make_spec("joint", edited_out, trials=edited_csv))
        assert baseline.read_bytes() != edited_out.read_bytes()

    def test_hand_edited_summary_changes_pit_panel(self, tmp_path):
        baseline = tmp_path / "base.svg"
        render(make_spec("pit", baseline))
        with open(DATA / "summary.json") as fh:
            payload = json.load(fh)
        payload["cells"][0]["pit_normal_counts"][0] += 17
        edited = tmp_path / "summary.json"
        edited.write_text(json.dumps(payload))
        out = tmp_path / "edited.svg"
        render(make_spec("pit", out, summary=edited))
        assert baseline.read_bytes() != out.read_bytes()


class TestFacets:
    def test_empty_facet_gets_placeholder(self, tmp_path):
        fig = render(make_spec("joint", tmp_path / "joint.png", n_values=(8, 999)))
        texts = [t.get_text() for ax in fig.axes for t in ax.texts]
        assert "no data" in texts

    def test_facet_filter_shrinks_grid(self, tmp_path):
        fig = render(make_spec("pit", tmp_path / "pit.png", n_values=(8,), beta_values=(0.0,)))
        assert len(fig.axes) == 1


class TestErrors:
    def test_missing_columns_reported(self, tmp_path):
        bad = tmp_path / "bad.csv"
        with open(DATA / "trials.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        keep = [c for c in rows[0] if c != "elpdhat"]
        with open(bad, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=keep)
            writer.writeheader()
            writer.writerows([{k: r[k] for k in keep} for r in rows])
        with pytest.raises(MissingColumnsError, match="elpdhat"):
            render(make_spec("joint", tmp_path / "x.png", trials=bad))

    def test_unknown_kind_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="unknown figure kind"):
            FigureSpec(kind="sparkline", output_path=str(tmp_path / "x.png"))

    def test_cli_nonzero_exit_on_missing_columns(self, tmp_path):
        bad = tmp_path / "bad.csv"
        shutil.copy(DATA / "summary.json", tmp_path / "summary.json")
        bad.write_text("n,beta_delta\n8,0.0\n")
        result = subprocess.run(
            [
                sys.executable, "-m", "loocv_figures.cli",
                "--kind", "joint", "--trials", str(bad),
                "--summary", str(tmp_path / "summary.json"),
                "--out", str(tmp_path / "x.png"),
            ],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 1
        assert "missing columns" in result.stderr


class TestCliHappyPath:
    def test_renders_via_cli(self, tmp_path):
        out = tmp_path / "se.png"
        result = subprocess.run(
            [
                sys.executable, "-m", "loocv_figures.cli",
                "--kind", "se_ratio",
                "--trials", str(DATA / "trials.csv"),
                "--summary", str(DATA / "summary.json"),
                "--out", str(out),
            ],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 0, result.stderr
        assert out.exists()
        assert result.stdout.strip() == str(out)
