import json

import numpy as np
import pytest
from PIL import Image

from app.main import EXIT_EMPTY_TRUTH, EXIT_OK, EXIT_USAGE, main
from app.schemas.grid import GeoMeta
from app.services.grid import ConfidenceGrid, save_confidence_grid, save_confidence_pgm
from app.services.synthetic import build_synthetic_dataset
from app.services.score import OUTCOME_COLORS, Outcome


@pytest.fixture
def perfect_dataset(tmp_path):
    build_synthetic_dataset(tmp_path / "data", n_images=4, seed=3, perfect=True)
    return tmp_path / "data"


@pytest.fixture
def noisy_dataset(tmp_path):
    build_synthetic_dataset(tmp_path / "noisy", n_images=20, seed=11)
    return tmp_path / "noisy"


def eval_args(data, out, *extra):
    return ["eval", str(data / "pred"), str(data / "truth"), "--out", str(out), "-q", *extra]


def write_truth(path, polygons, width=32, height=32, gsd_m=0.03):
    doc = {"image": path.stem, "width": width, "height": height, "gsd_m": gsd_m, "polygons": polygons}
    path.write_text(json.dumps(doc), encoding="utf-8")


def square(id, x0, y0, side):
    return {"id": id, "class": "solar_panel", "vertices": [[x0, y0], [x0 + side, y0], [x0 + side, y0 + side], [x0, y0 + side]]}


class TestEval:
    def test_perfect_detector(self, perfect_dataset, tmp_path):
        out = tmp_path / "out"
        assert main(eval_args(perfect_dataset, out, "--jobs", "1")) == EXIT_OK

        summary = json.loads((out / "summary.json").read_text())
        assert summary["ap"] == 1.0
        assert summary["f1_max"] == 1.0
        assert summary["r_max"] == 1.0
        assert summary["iou_min"] == 0.2
        assert summary["n_truth"] == summary["n_pred"] == 16
        assert (out / "pr_curve.csv").read_text().splitlines()[0] == "tau,precision,recall"
        assert sorted(p.name for p in (out / "objects").iterdir()) == [f"img_{i:03d}.json" for i in range(4)]

        run = json.loads((out / "manifest.json").read_text())
        assert run["command"] == "eval"
        assert run["params"]["iou"] == 0.2

    def test_group_by_tag(self, perfect_dataset, tmp_path):
        out = tmp_path / "out"
        assert main(eval_args(perfect_dataset, out, "--group-by", "tag", "--jobs", "1")) == EXIT_OK
        assert (out / "pr_curve_normal.csv").is_file()
        assert (out / "pr_curve_sport.csv").is_file()
        assert json.loads((out / "summary_sport.json").read_text())["ap"] == 1.0

    def test_group_by_altitude(self, perfect_dataset, tmp_path):
        out = tmp_path / "out"
        assert main(eval_args(perfect_dataset, out, "--group-by", "altitude", "--jobs", "1")) == EXIT_OK
        curves = sorted(p.name for p in out.glob("pr_curve_*.csv"))
        assert curves == [
            "pr_curve_110-130m.csv",
            "pr_curve_50-70m.csv",
            "pr_curve_70-90m.csv",
            "pr_curve_90-110m.csv",
        ]

    def test_worker_count_does_not_change_output(self, noisy_dataset, tmp_path):
        one, many = tmp_path / "one", tmp_path / "many"
        assert main(eval_args(noisy_dataset, one, "--jobs", "1")) == EXIT_OK
        assert main(eval_args(noisy_dataset, many, "--jobs", "8")) == EXIT_OK
        for name in ("summary.json", "pr_curve.csv"):
            assert (one / name).read_bytes() == (many / name).read_bytes()
        for path in (one / "objects").iterdir():
            assert path.read_bytes() == (many / "objects" / path.name).read_bytes()

    def test_noisy_detector_scores_below_one(self, noisy_dataset, tmp_path):
        out = tmp_path / "out"
        assert main(eval_args(noisy_dataset, out, "--jobs", "1")) == EXIT_OK
        summary = json.loads((out / "summary.json").read_text())
        assert 0.0 < summary["ap"] <= summary["r_max"] <= 1.0
        assert summary["ap"] < 1.0

    def test_missing_confidence_grid(self, perfect_dataset, tmp_path):
        (perfect_dataset / "pred" / "img_002.fgrid").unlink()
        assert main(eval_args(perfect_dataset, tmp_path / "out")) == EXIT_USAGE

    def test_empty_ground_truth(self, tmp_path):
        (tmp_path / "truth").mkdir()
        (tmp_path / "pred").mkdir()
        write_truth(tmp_path / "truth" / "a.json", [])
        meta = GeoMeta(width=32, height=32, gsd_m=0.03)
        save_confidence_grid(ConfidenceGrid(meta=meta, values=np.zeros((32, 32))), tmp_path / "pred" / "a.fgrid")
        assert main(eval_args(tmp_path, tmp_path / "out", "--jobs", "1")) == EXIT_EMPTY_TRUTH

    def test_pairs_file(self, perfect_dataset, tmp_path):
        pairs = tmp_path / "pairs.csv"
        pairs.write_text("truth,pred\nimg_000.json,img_001.fgrid\n")
        out = tmp_path / "out"
        assert main(eval_args(perfect_dataset, out, "--pairs", str(pairs), "--jobs", "1")) == EXIT_OK
        # Annotations of one image scored against another image's map
        assert json.loads((out / "summary.json").read_text())["ap"] < 1.0

    def test_seed_threshold_equal_to_stored_confidence(self, tmp_path):
        (tmp_path / "truth").mkdir()
        (tmp_path / "pred").mkdir()
        write_truth(tmp_path / "truth" / "a.json", [square(1, 4, 4, 6)])
        values = np.zeros((32, 32))
        values[4:10, 4:10] = 0.7
        grid = ConfidenceGrid(meta=GeoMeta(width=32, height=32, gsd_m=0.03), values=values)
        save_confidence_grid(grid, tmp_path / "pred" / "a.fgrid")

        out = tmp_path / "out"
        assert main(eval_args(tmp_path, out, "--tau-seed", "0.7", "--jobs", "1")) == EXIT_OK
        assert main(eval_args(tmp_path, tmp_path / "low", "--tau-seed", "0.69", "--jobs", "1")) == EXIT_OK
        assert json.loads((tmp_path / "low" / "summary.json").read_text())["ap"] == 1.0

    def three_prediction_dataset(self, tmp_path):
        (tmp_path / "truth").mkdir()
        (tmp_path / "pred").mkdir()
        write_truth(tmp_path / "truth" / "a.json", [square(1, 2, 2, 6), square(2, 14, 14, 6)])
        values = np.zeros((32, 32))
        values[2:8, 2:8] = 0.9
        values[24:30, 24:30] = 0.8
        values[14:20, 14:20] = 0.7
        grid = ConfidenceGrid(meta=GeoMeta(width=32, height=32, gsd_m=0.03), values=values)
        save_confidence_grid(grid, tmp_path / "pred" / "a.fgrid")
        return tmp_path

    def test_three_prediction_summary(self, tmp_path):
        data = self.three_prediction_dataset(tmp_path)
        out = tmp_path / "out"
        assert main(eval_args(data, out, "--jobs", "1")) == EXIT_OK
        summary = json.loads((out / "summary.json").read_text())
        assert summary["ap"] == 0.833333
        assert summary["f1_max"] == 0.8
        assert summary["r_max"] == 1.0
        assert summary["n_truth"] == 2
        assert summary["n_pred"] == 3

    def test_dropped_polygons_recorded(self, tmp_path):
        data = self.three_prediction_dataset(tmp_path)
        sliver = {"id": 3, "class": "solar_panel", "vertices": [[26.1, 4.1], [26.3, 4.1], [26.1, 4.3]]}
        write_truth(data / "truth" / "a.json", [square(1, 2, 2, 6), square(2, 14, 14, 6), sliver])
        out = tmp_path / "out"
        assert main(eval_args(data, out, "--jobs", "2")) == EXIT_OK
        assert json.loads((out / "manifest.json").read_text())["params"]["dropped_polygons"] == 1
        assert json.loads((out / "summary.json").read_text())["n_truth"] == 2

    def test_image_id_cannot_escape_output(self, tmp_path):
        data = self.three_prediction_dataset(tmp_path)
        doc = json.loads((data / "truth" / "a.json").read_text())
        doc["image"] = "../escaped"
        (data / "truth" / "a.json").write_text(json.dumps(doc))
        out = tmp_path / "out"
        assert main(eval_args(data, out, "--jobs", "1")) == EXIT_OK
        assert [p.name for p in (out / "objects").iterdir()] == [".._escaped.json"]
        assert not (tmp_path / "escaped.json").exists()

    def test_duplicate_image_ids(self, tmp_path):
        data = self.three_prediction_dataset(tmp_path)
        (data / "truth" / "b.json").write_text((data / "truth" / "a.json").read_text())
        (data / "pred" / "b.fgrid").write_bytes((data / "pred" / "a.fgrid").read_bytes())
        assert main(eval_args(data, tmp_path / "out", "--jobs", "1")) == EXIT_USAGE

    def test_bad_iou(self, perfect_dataset, tmp_path):
        assert main(eval_args(perfect_dataset, tmp_path / "out", "--iou", "1.5")) == EXIT_USAGE


class TestGsdSim:
    def make_grid(self, tmp_path, rng):
        meta = GeoMeta(width=40, height=30, gsd_m=0.02)
        grid = ConfidenceGrid(meta=meta, values=rng.random((30, 40)))
        path = tmp_path / "in.fgrid"
        save_confidence_grid(grid, path)
        return path

    def test_identity_is_byte_identical(self, tmp_path, rng):
        source = self.make_grid(tmp_path, rng)
        output = tmp_path / "out" / "same.fgrid"
        assert main(["gsd-sim", str(source), "--target-gsd", "0.02", "--output", str(output), "-q"]) == EXIT_OK
        assert output.read_bytes() == source.read_bytes()
        assert (tmp_path / "out" / "manifest.json").is_file()

    def test_pgm_identity(self, tmp_path, rng):
        source = tmp_path / "in.pgm"
        save_confidence_pgm(ConfidenceGrid(meta=GeoMeta(width=9, height=7, gsd_m=0.02), values=rng.random((7, 9))), source)
        output = tmp_path / "out.pgm"
        args = ["gsd-sim", str(source), "--gsd", "0.02", "--target-gsd", "0.02", "--output", str(output), "-q"]
        assert main(args) == EXIT_OK
        assert output.read_bytes() == source.read_bytes()

    def test_satellite(self, tmp_path, rng):
        source = self.make_grid(tmp_path, rng)
        output = tmp_path / "sat.fgrid"
        assert main(["gsd-sim", str(source), "--target-gsd", "0.30", "--output", str(output), "-q"]) == EXIT_OK
        assert output.stat().st_size == source.stat().st_size

    def test_finer_target(self, tmp_path, rng):
        source = self.make_grid(tmp_path, rng)
        assert main(["gsd-sim", str(source), "--target-gsd", "0.01", "--output", str(tmp_path / "x.fgrid")]) == EXIT_USAGE


class TestCost:
    def test_fct(self, tmp_path):
        out = tmp_path / "cost"
        assert main(["cost", "--area", "7500", "--gsd", "0.03", "--out", str(out), "-q"]) == EXIT_OK
        breakdown = json.loads((out / "breakdown.json").read_text())
        assert breakdown["n_pilots"] == 83
        assert breakdown["storage"] == 910
        assert breakdown["total"] == pytest.approx(6.0e6, rel=0.25)
        run = json.loads((out / "manifest.json").read_text())
        assert "assumptions_source" in run["params"]

    def test_curve(self, tmp_path):
        out = tmp_path / "cost"
        args = ["cost", "--area", "100", "--gsd", "0.03", "--curve", "10,100,1000,10000", "--out", str(out), "-q"]
        assert main(args) == EXIT_OK
        lines = (out / "cost_curve.csv").read_text().splitlines()
        assert lines[0] == "area_km2,total_usd,unit_cost_usd_per_km2"
        assert len(lines) == 5
        unit_costs = [float(line.split(",")[2]) for line in lines[1:]]
        assert unit_costs == sorted(unit_costs, reverse=True)

    def test_assumptions_file(self, tmp_path):
        assumptions = tmp_path / "a.json"
        assumptions.write_text(json.dumps({"hotel": 0, "airfare": 0}))
        out = tmp_path / "cost"
        args = ["cost", "--area", "7500", "--gsd", "0.03", "--assumptions", str(assumptions), "--out", str(out), "-q"]
        assert main(args) == EXIT_OK
        assert json.loads((out / "breakdown.json").read_text())["hotel_share"] == 0

    def test_unknown_assumption_key(self, tmp_path):
        assumptions = tmp_path / "a.json"
        assumptions.write_text(json.dumps({"hotels": 0}))
        args = ["cost", "--area", "10", "--gsd", "0.03", "--assumptions", str(assumptions), "--out", str(tmp_path)]
        assert main(args) == EXIT_USAGE

    def test_non_positive_area(self, tmp_path):
        assert main(["cost", "--area", "0", "--gsd", "0.03", "--out", str(tmp_path)]) == EXIT_USAGE

    def test_cost_curve_command(self, tmp_path):
        out = tmp_path / "curves"
        args = [
            "cost-curve", "--gsd", "0.03", "--areas", "1,100,10000", "--hotel-share",
            "--resolutions", "0.017,0.03,0.043", "--area", "1000", "--out", str(out), "-q",
        ]
        assert main(args) == EXIT_OK
        assert len((out / "cost_curve.csv").read_text().splitlines()) == 4
        assert (out / "hotel_share.csv").read_text().splitlines()[0] == "area_km2,hotel_share"
        assert len((out / "resolution_cost.csv").read_text().splitlines()) == 4

    def test_compare(self, tmp_path):
        platforms = tmp_path / "platforms.json"
        platforms.write_text(json.dumps([
            {"name": "aerial", "gsd_m": 0.075, "unit_cost_usd_km2": 150},
            {"name": "hypothetical", "gsd_m": 0.01, "unit_cost_usd_km2": 1e12},
        ]))
        out = tmp_path / "cmp"
        assert main(["compare", "--area", "100", "--gsd", "0.03", "--platforms", str(platforms), "--out", str(out), "-q"]) == EXIT_OK
        rows = (out / "comparison.csv").read_text().splitlines()
        assert rows[1].startswith("aerial,") and rows[1].endswith(",never")
        assert rows[2].endswith(",0.010000")

    def test_replay(self, tmp_path):
        out = tmp_path / "cost"
        assert main(["cost", "--area", "250", "--gsd", "0.025", "--out", str(out), "-q"]) == EXIT_OK
        first = (out / "breakdown.json").read_bytes()
        (out / "breakdown.json").unlink()
        assert main(["replay", str(out / "manifest.json"), "-q"]) == EXIT_OK
        assert (out / "breakdown.json").read_bytes() == first


class TestRenderAndRasterize:
    def test_render_from_detections(self, tmp_path):
        truth = tmp_path / "t.json"
        write_truth(truth, [square(1, 2, 2, 6), square(2, 20, 20, 6)])
        detections = {
            "image": "t",
            "width": 32,
            "height": 32,
            # One 6x6 block matching the first square
            "objects": [
                {"id": 1, "confidence": 0.9, "area_px": 36, "pixels_rle": [[(2 + r) * 32 + 2, 6] for r in range(6)]},
            ],
        }
        pred = tmp_path / "p.json"
        pred.write_text(json.dumps(detections))

        output = tmp_path / "render.ppm"
        assert main(["render", str(pred), str(truth), "--output", str(output), "-q"]) == EXIT_OK
        pixels = np.asarray(Image.open(output))
        assert pixels.shape == (32, 32, 3)
        assert (pixels[2:8, 2:8] == OUTCOME_COLORS[Outcome.TP]).all()
        assert (pixels[20:26, 20:26] == OUTCOME_COLORS[Outcome.FN]).all()
        assert int(np.any(pixels != 0, axis=2).sum()) == 72

    def test_render_from_confidence_grid(self, tmp_path):
        truth = tmp_path / "t.json"
        write_truth(truth, [square(1, 4, 4, 10)])
        values = np.zeros((32, 32))
        values[4:14, 4:14] = 0.8
        pred = tmp_path / "p.fgrid"
        save_confidence_grid(ConfidenceGrid(meta=GeoMeta(width=32, height=32, gsd_m=0.03), values=values), pred)

        output = tmp_path / "render.ppm"
        assert main(["render", str(pred), str(truth), "--output", str(output), "--min-area-m2", "0", "-q"]) == EXIT_OK
        colours = {tuple(c) for c in np.asarray(Image.open(output)).reshape(-1, 3).tolist()}
        assert colours == {(0, 0, 0), OUTCOME_COLORS[Outcome.TP]}

    def test_rasterize(self, tmp_path):
        truth = tmp_path / "t.json"
        write_truth(truth, [square(1, 1, 1, 3), square(2, 10, 10, 4)], width=16, height=16)
        output = tmp_path / "mask.pgm"
        assert main(["rasterize", str(truth), "--output", str(output), "-q"]) == EXIT_OK
        mask = np.asarray(Image.open(output))
        assert mask.shape == (16, 16)
        assert int((mask == 255).sum()) == 9 + 16

    def test_missing_truth_file(self, tmp_path):
        assert main(["rasterize", str(tmp_path / "none.json"), "--output", str(tmp_path / "m.pgm")]) == EXIT_USAGE


def test_unknown_command():
    assert main(["frobnicate"]) == EXIT_USAGE
