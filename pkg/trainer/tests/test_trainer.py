"""Trainer-side tests. The inference engine is exercised exclusively through
its command line; nothing here imports it."""

import json
import math
import os
import re
import shutil
import struct
import subprocess
import tempfile

import numpy as np
import pytest
import torch

from lfdtrain.export import ExportError, collect_slots, export_model, write_lfdw
from lfdtrain.model import RoadSeg, parameter_count, slot_tensors
from lfdtrain.ohem import ohem_bce
from lfdtrain.synth import make_scene
from lfdtrain.train import TrainConfig, Trainer

REPO = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
MANIFEST = os.path.join(REPO, "manifests", "full.json")


class TestModelContract:
    def test_parameter_count_matches_published_total(self):
        assert parameter_count(RoadSeg()) == 936_067

    def test_slots_match_manifest_names_and_dims(self):
        with open(MANIFEST) as fh:
            manifest = json.load(fh)
        want = {s["name"]: tuple(s["dims"]) for s in manifest["slots"]}
        got = {k: tuple(v.shape) for k, v in slot_tensors(RoadSeg()).items()}
        assert got.keys() == want.keys()
        for name in want:
            assert got[name] == want[name], name

    def test_manifest_param_total_consistent(self):
        with open(MANIFEST) as fh:
            manifest = json.load(fh)
        assert manifest["param_total"] == 936_067
        counted = sum(s["elements"] for s in manifest["slots"] if s["parameter"])
        assert counted == 936_067

    def test_forward_shapes(self):
        m = RoadSeg()
        m.eval()
        taps = {}
        with torch.no_grad():
            out = m(torch.zeros(1, 3, 64, 128), taps=taps)
        assert out.shape == (1, 2, 64, 128)
        assert taps["detail"].shape == (1, 64, 16, 32)
        assert taps["context"].shape == (1, 128, 4, 4)
        assert taps["attention"].shape == (1, 1, 16, 32)


class TestOhem:
    def test_single_hard_pixel_hand_value(self):
        logits = torch.zeros(1, 2, 1, 1)
        target = torch.ones(1, 1, 1, dtype=torch.long)
        loss = ohem_bce(logits, target)
        assert math.isclose(float(loss), math.log(2.0), rel_tol=1e-6)

    def test_easy_pixels_contribute_nothing(self):
        logits = torch.zeros(1, 2, 1, 2)
        logits[0, 1, 0, 1] = 10.0
        target = torch.ones(1, 1, 2, dtype=torch.long)
        loss = ohem_bce(logits, target)
        assert math.isclose(float(loss), math.log(2.0) / 2, rel_tol=1e-6)

    def test_lambda_zero_gives_zero_loss_and_unchanged_weights(self):
        torch.manual_seed(0)
        m = RoadSeg()
        before = {k: v.detach().clone() for k, v in m.named_parameters()}
        opt = torch.optim.SGD(m.parameters(), lr=0.1, momentum=0.9)
        x = torch.randn(1, 3, 32, 64)
        y = (torch.rand(1, 32, 64) > 0.5).long()
        loss = ohem_bce(m(x), y, lam=0.0)
        assert float(loss.detach()) == 0.0
        opt.zero_grad()
        loss.backward()
        opt.step()
        for k, v in m.named_parameters():
            assert torch.equal(v, before[k]), k


class TestSynth:
    def test_deterministic(self):
        a_img, a_mask = make_scene(3, 5, (48, 96))
        b_img, b_mask = make_scene(3, 5, (48, 96))
        assert np.array_equal(a_img, b_img)
        assert np.array_equal(a_mask, b_mask)

    def test_road_fraction_reasonable(self):
        fracs = [make_scene(11, i, (64, 128))[1].mean() for i in range(12)]
        assert all(0.02 < f < 0.55 for f in fracs)

    def test_distinct_scenes(self):
        a, _ = make_scene(3, 0, (48, 96))
        b, _ = make_scene(3, 1, (48, 96))
        assert not np.array_equal(a, b)


class TestExport:
    def test_container_header_layout(self, tmp_path):
        path = tmp_path / "w.lfdw"
        write_lfdw(path, [("w", np.array([1.5, -2.0], dtype=np.float32))])
        blob = path.read_bytes()
        assert blob[:4] == b"LFDW"
        version, count = struct.unpack_from("<II", blob, 4)
        assert (version, count) == (1, 1)
        (nlen,) = struct.unpack_from("<H", blob, 12)
        assert blob[14:14 + nlen] == b"w"
        assert len(blob) == 33

    def test_missing_slot_rejected(self):
        with open(MANIFEST) as fh:
            manifest = json.load(fh)
        slots = slot_tensors(RoadSeg())
        slots.pop("head.out.weight")
        with pytest.raises(ExportError, match="head.out.weight"):
            collect_slots(slots, manifest)

    def test_wrong_shape_rejected(self):
        with open(MANIFEST) as fh:
            manifest = json.load(fh)
        slots = slot_tensors(RoadSeg())
        slots["head.out.bias"] = torch.zeros(3)
        with pytest.raises(ExportError, match="head.out.bias"):
            collect_slots(slots, manifest)

    def test_seeded_runs_export_identical_bytes(self, tmp_path):
        cfg = TrainConfig(seed=21, train_images=8, crop_epochs=1, full_epochs=1,
                          image_hw=(32, 64), crop_hw=(24, 48), batch_size=4)
        paths = []
        for run in ("a", "b"):
            t = Trainer(cfg)
            t.run()
            p = tmp_path / f"{run}.lfdw"
            export_model(t.model, MANIFEST, p)
            paths.append(p)
        assert paths[0].read_bytes() == paths[1].read_bytes()


class TestTraining:
    def test_twenty_epoch_loss_decreases(self):
        cfg = TrainConfig(seed=5, train_images=16, crop_epochs=12, full_epochs=8,
                          image_hw=(48, 96), crop_hw=(32, 64), batch_size=8)
        t = Trainer(cfg)
        t.run()
        assert len(t.epoch_losses) == 20
        assert t.final_epoch_loss < t.first_epoch_loss


def _run(cmd, **kw):
    return subprocess.run(cmd, capture_output=True, text=True, **kw)


@pytest.mark.slow
class TestEndToEnd:
    """Desk-scale train, export, then score through the engine CLI."""

    def test_maxf_on_held_out_scenes(self, tmp_path):
        lfdseg = shutil.which("lfdseg")
        lfdtrain = shutil.which("lfdtrain")
        assert lfdseg and lfdtrain, "both console scripts must be installed"

        trainer = Trainer(TrainConfig())
        trainer.run()
        assert trainer.final_epoch_loss < 0.5 * trainer.first_epoch_loss

        weights = tmp_path / "trained.lfdw"
        export_model(trainer.model, MANIFEST, weights)

        data = tmp_path / "heldout"
        out = _run([lfdtrain, "synth", "--seed", "7", "--start", "20000",
                    "--count", "50", "--size", "64x128", "--out", str(data)])
        assert out.returncode == 0, out.stderr

        out = _run([lfdseg, "eval", str(data / "images"), str(data / "masks"),
                    "--weights", str(weights), "--size", "64x128"])
        assert out.returncode == 0, out.stderr
        m = re.search(r"^maxf\s+([0-9.]+)", out.stdout, re.M)
        assert m, out.stdout
        maxf = float(m.group(1))
        assert maxf >= 0.95, f"held-out MaxF {maxf:.4f} below 0.95"
