"""Two-phase seeded trainer for the road segmenter.

Phase one runs on random crops for cheap variety; phase two fine-tunes on
full frames so the resize path and global context settle. SGD with cosine
decay, OHEM-BCE objective. Everything is a pure function of the config
seed so an export is reproducible byte for byte."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .model import RoadSeg
from .ohem import ohem_bce
from .synth import make_scene

NORM_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
NORM_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)


@dataclass
class TrainConfig:
    seed: int = 7
    image_hw: tuple = (64, 128)
    crop_hw: tuple = (48, 96)
    train_images: int = 96
    batch_size: int = 8
    crop_epochs: int = 24
    full_epochs: int = 12
    lr: float = 0.01
    lr_min: float = 1e-5
    momentum: float = 0.9
    weight_decay: float = 1e-4
    ohem_lambda: float = 0.7


def to_tensor(img_u8: np.ndarray) -> torch.Tensor:
    x = img_u8.astype(np.float32) / 255.0
    x = (x - NORM_MEAN) / NORM_STD
    return torch.from_numpy(np.ascontiguousarray(x.transpose(2, 0, 1)))


def _augment(rng, img, mask, crop_hw):
    h, w = mask.shape
    ch, cw = crop_hw
    if ch is not None:
        y0 = int(rng.integers(0, h - ch + 1))
        x0 = int(rng.integers(0, w - cw + 1))
        img = img[y0:y0 + ch, x0:x0 + cw]
        mask = mask[y0:y0 + ch, x0:x0 + cw]
    if rng.random() < 0.5:
        img = img[:, ::-1]
        mask = mask[:, ::-1]
    if rng.random() < 0.5:
        img = np.clip(img.astype(np.float32) * rng.uniform(0.85, 1.18), 0, 255).astype(np.uint8)
    return np.ascontiguousarray(img), np.ascontiguousarray(mask)


class Trainer:
    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        torch.manual_seed(cfg.seed)
        torch.set_num_threads(1)
        self.model = RoadSeg()
        self.data = [make_scene(cfg.seed, i, cfg.image_hw) for i in range(cfg.train_images)]
        self.opt = torch.optim.SGD(
            self.model.parameters(), lr=cfg.lr,
            momentum=cfg.momentum, weight_decay=cfg.weight_decay)
        total = cfg.crop_epochs + cfg.full_epochs
        self.sched = torch.optim.lr_scheduler.CosineAnnealingLR(
            self.opt, T_max=max(total, 1), eta_min=cfg.lr_min)
        self.epoch_losses = []

    def _epoch(self, rng, crop):
        cfg = self.cfg
        order = rng.permutation(len(self.data))
        self.model.train()
        losses = []
        crop_hw = cfg.crop_hw if crop else (None, None)
        for s in range(0, len(order), cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            xs, ys = [], []
            for i in idx:
                img, mask = _augment(rng, *self.data[i], crop_hw)
                xs.append(to_tensor(img))
                ys.append(torch.from_numpy(mask.astype(np.int64)))
            x = torch.stack(xs)
            y = torch.stack(ys)
            self.opt.zero_grad()
            loss = ohem_bce(self.model(x), y, cfg.ohem_lambda)
            loss.backward()
            self.opt.step()
            losses.append(float(loss.detach()))
        self.sched.step()
        return float(np.mean(losses))

    def run(self, log=None):
        cfg = self.cfg
        rng = np.random.default_rng(cfg.seed + 1)
        total = cfg.crop_epochs + cfg.full_epochs
        for e in range(total):
            crop = e < cfg.crop_epochs
            mean_loss = self._epoch(rng, crop)
            self.epoch_losses.append(mean_loss)
            if log:
                phase = "crop" if crop else "full"
                log(f"epoch {e + 1:3d}/{total} [{phase}] ohem {mean_loss:.6f} "
                    f"lr {self.opt.param_groups[0]['lr']:.5f}")
        self.model.eval()
        return self.model

    @property
    def first_epoch_loss(self):
        return self.epoch_losses[0] if self.epoch_losses else float("nan")

    @property
    def final_epoch_loss(self):
        return self.epoch_losses[-1] if self.epoch_losses else float("nan")
