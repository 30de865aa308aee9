import json
import os

import numpy as np
import pytest

from lfdseg import pipeline as P
from lfdseg import weights as W
from lfdseg.cli import main
from lfdseg.graph import VariantConfig, build


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_data")
    images = root / "images"
    masks = root / "masks"
    images.mkdir()
    masks.mkdir()
    rng = np.random.default_rng(42)
    for i in range(2):
        img = rng.integers(0, 255, size=(48, 96, 3), dtype=np.uint8)
        P.save_image(images / f"im{i}.png", img)
        gt = np.zeros((48, 96), bool)
        gt[24:, :] = True
        P.save_mask(masks / f"im{i}.png", gt)
    g = build(VariantConfig("full", (48, 96)))
    weights_path = root / "w.lfdw"
    W.write(W.random_store(g, seed=5), weights_path)
    return {"root": root, "images": images, "masks": masks, "weights": weights_path}


class TestAnalyze:
    def test_prints_exact_params(self, capsys):
        assert main(["analyze", "--variant", "full", "--size", "375x1240"]) == 0
        out = capsys.readouterr().out
        assert "936,067" in out
        assert "receptive fields" in out

    def test_stage_probe(self, capsys):
        assert main(["analyze", "--variant", "stage1", "--size", "375x1240"]) == 0
        assert "157,634" in capsys.readouterr().out

    def test_report_files_written(self, tmp_path, capsys):
        rep = tmp_path / "rep"
        assert main(["analyze", "--variant", "sdb", "--size", "64x128",
                     "--report", str(rep)]) == 0
        capsys.readouterr()
        record = json.loads((rep / "analysis.json").read_text())
        assert record["params"] == 183106
        assert (rep / "analysis.csv").exists()
        assert (rep / "params_by_group.png").exists()
        assert (rep / "macs_by_group.png").exists()

    def test_bad_size_is_config_error(self, capsys):
        assert main(["analyze", "--size", "wide"]) == 2

    def test_degenerate_size_is_config_error(self, capsys):
        assert main(["analyze", "--variant", "full", "--size", "1x64"]) == 2


class TestInfer:
    def test_writes_requested_files(self, dataset, tmp_path, capsys):
        out = tmp_path / "mask.png"
        ov = tmp_path / "overlay.png"
        pr = tmp_path / "prob.png"
        code = main(["infer", str(dataset["images"] / "im0.png"),
                     "--weights", str(dataset["weights"]),
                     "--out", str(out), "--overlay", str(ov), "--prob", str(pr)])
        assert code == 0
        assert out.exists() and ov.exists() and pr.exists()
        assert P.load_mask(out).shape == (48, 96)

    def test_missing_out_flag(self, dataset, capsys):
        assert main(["infer", str(dataset["images"] / "im0.png"),
                     "--weights", str(dataset["weights"])]) == 2

    def test_missing_weights_file(self, dataset, tmp_path, capsys):
        assert main(["infer", str(dataset["images"] / "im0.png"),
                     "--weights", str(tmp_path / "nope.lfdw"),
                     "--out", str(tmp_path / "m.png")]) == 3

    def test_missing_image(self, dataset, tmp_path, capsys):
        assert main(["infer", str(tmp_path / "absent.png"),
                     "--weights", str(dataset["weights"]),
                     "--out", str(tmp_path / "m.png")]) == 3

    def test_bad_threshold(self, dataset, tmp_path, capsys):
        assert main(["infer", str(dataset["images"] / "im0.png"),
                     "--weights", str(dataset["weights"]),
                     "--out", str(tmp_path / "m.png"), "--threshold", "1.5"]) == 2

    def test_masks_identical_across_runs(self, dataset, tmp_path, capsys):
        a = tmp_path / "a.png"
        b = tmp_path / "b.png"
        for out in (a, b):
            assert main(["infer", str(dataset["images"] / "im0.png"),
                         "--weights", str(dataset["weights"]), "--out", str(out)]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestEval:
    def test_report_and_determinism(self, dataset, tmp_path, capsys):
        rep1 = tmp_path / "r1"
        rep2 = tmp_path / "r2"
        for rep in (rep1, rep2):
            code = main(["eval", str(dataset["images"]), str(dataset["masks"]),
                         "--weights", str(dataset["weights"]), "--report", str(rep)])
            assert code == 0
        out = capsys.readouterr().out
        assert "maxf" in out
        assert (rep1 / "eval.json").read_bytes() == (rep2 / "eval.json").read_bytes()
        assert (rep1 / "eval_per_image.csv").read_bytes() == (rep2 / "eval_per_image.csv").read_bytes()
        record = json.loads((rep1 / "eval.json").read_text())
        assert record["n_images"] == 2
        assert len(record["per_image"]) == 2
        assert (rep1 / "f1_sweep.png").exists()
        assert (rep1 / "pr_curve.png").exists()

    def test_unmatched_stems_listed(self, dataset, tmp_path, capsys):
        lonely = tmp_path / "lonely"
        lonely.mkdir()
        img = np.zeros((48, 96, 3), np.uint8)
        P.save_image(lonely / "only_here.png", img)
        code = main(["eval", str(lonely), str(dataset["masks"]),
                     "--weights", str(dataset["weights"])])
        assert code == 3
        err = capsys.readouterr().err
        assert "only_here" in err

    def test_missing_dir(self, dataset, capsys):
        assert main(["eval", "/nonexistent/images", str(dataset["masks"]),
                     "--weights", str(dataset["weights"])]) == 3


class TestBench:
    def test_tiny_bench_runs(self, tmp_path, capsys):
        rep = tmp_path / "bench"
        code = main(["bench", "--variant", "sdb", "--size", "32x64",
                     "--iters", "3", "--warmup", "1", "--report", str(rep)])
        assert code == 0
        record = json.loads((rep / "bench.json").read_text())
        assert record["runs"][0]["threads"] >= 1
        assert record["runs"][0]["mean_s"] > 0
        assert (rep / "latency_by_threads.png").exists()

    def test_bad_thread_list(self, capsys):
        assert main(["bench", "--size", "32x64", "--iters", "1",
                     "--thread-list", "1,zero"]) == 2


class TestSelftest:
    def test_passes_without_fixtures(self, capsys):
        assert main(["selftest"]) == 0
        out = capsys.readouterr().out
        assert "[PASS]" in out and "[FAIL]" not in out

    def test_missing_fixtures_dir(self, tmp_path, capsys):
        assert main(["selftest", "--fixtures", str(tmp_path / "absent")]) == 3

    def test_golden_fixtures_pass(self, golden_dir, capsys):
        assert main(["selftest", "--fixtures", golden_dir]) == 0
        out = capsys.readouterr().out
        assert "golden logits" in out
        assert "[FAIL]" not in out
