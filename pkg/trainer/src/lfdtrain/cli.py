"""Command line for the trainer: train, export, fixtures, synth, convert-gt."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np
import torch
from PIL import Image


def _parse_pair(text, flag):
    try:
        a, b = text.lower().split("x")
        return int(a), int(b)
    except ValueError:
        raise SystemExit(f"error: {flag} wants AxB, got {text!r}")


def _add_train_flags(p):
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--size", default="64x128", help="training frame size HxW")
    p.add_argument("--images", type=int, default=96)
    p.add_argument("--crop-epochs", type=int, default=24)
    p.add_argument("--full-epochs", type=int, default=12)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--lr", type=float, default=0.01)


def _build_trainer(args):
    from .train import TrainConfig, Trainer

    hw = _parse_pair(args.size, "--size")
    cfg = TrainConfig(seed=args.seed, image_hw=hw,
                      crop_hw=(max(hw[0] * 3 // 4, 16), max(hw[1] * 3 // 4, 32)),
                      train_images=args.images, batch_size=args.batch,
                      crop_epochs=args.crop_epochs, full_epochs=args.full_epochs,
                      lr=args.lr)
    return Trainer(cfg)


def cmd_train(args):
    trainer = _build_trainer(args)
    trainer.run(log=print)
    print(f"first epoch ohem {trainer.first_epoch_loss:.6f}")
    print(f"final epoch ohem {trainer.final_epoch_loss:.6f}")
    if args.checkpoint:
        torch.save(trainer.model.state_dict(), args.checkpoint)
        print(f"checkpoint -> {args.checkpoint}")
    if args.export:
        from .export import export_model
        n = export_model(trainer.model, args.manifest, args.export)
        print(f"exported {n} slots -> {args.export}")


def cmd_export(args):
    from .export import export_model
    from .model import RoadSeg

    model = RoadSeg()
    model.load_state_dict(torch.load(args.checkpoint, weights_only=True))
    model.eval()
    n = export_model(model, args.manifest, args.out)
    print(f"exported {n} slots -> {args.out}")


def cmd_fixtures(args):
    from .fixtures import generate

    trainer = _build_trainer(args)
    trainer.run(log=print if args.verbose else None)
    print(f"first epoch ohem {trainer.first_epoch_loss:.6f}")
    print(f"final epoch ohem {trainer.final_epoch_loss:.6f}")
    hw = _parse_pair(args.size, "--size")
    meta = generate(trainer.model, args.manifest, args.out,
                    seed=args.seed, scene_index=args.scene_index, hw=hw)
    print(f"fixtures -> {args.out} (variant {meta['variant']}, tol {meta['tolerance']})")


def cmd_synth(args):
    from .synth import make_scene

    hw = _parse_pair(args.size, "--size")
    img_dir = os.path.join(args.out, "images")
    mask_dir = os.path.join(args.out, "masks")
    os.makedirs(img_dir, exist_ok=True)
    os.makedirs(mask_dir, exist_ok=True)
    for i in range(args.count):
        img, mask = make_scene(args.seed, args.start + i, hw)
        stem = f"scene_{args.start + i:05d}.png"
        Image.fromarray(img).save(os.path.join(img_dir, stem))
        Image.fromarray(np.where(mask, 255, 0).astype(np.uint8)).save(
            os.path.join(mask_dir, stem))
    print(f"wrote {args.count} scene/mask pairs -> {args.out}")


def cmd_convert_gt(args):
    from .kitti import convert_dir, convert_gt

    if os.path.isdir(args.src):
        n = convert_dir(args.src, args.dst)
        print(f"converted {n} annotations -> {args.dst}")
    else:
        frac = convert_gt(args.src, args.dst)
        print(f"road fraction {frac:.4f} -> {args.dst}")


def main(argv=None):
    parser = argparse.ArgumentParser(prog="lfdtrain",
                                     description="train and export the road segmenter")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="seeded training run")
    _add_train_flags(p)
    p.add_argument("--checkpoint", help="state-dict output path")
    p.add_argument("--export", help="write trained weights to this .lfdw path")
    p.add_argument("--manifest", default="manifests/full.json")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("export", help="checkpoint -> .lfdw container")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", default="manifests/full.json")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("fixtures", help="train then emit golden fixtures")
    _add_train_flags(p)
    p.add_argument("--manifest", default="manifests/full.json")
    p.add_argument("--out", required=True)
    p.add_argument("--scene-index", type=int, default=10_000,
                   help="held-out scene index for the activation dump")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_fixtures)

    p = sub.add_parser("synth", help="write procedural scene/mask pairs")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--size", default="64x128")
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("convert-gt", help="binarize road annotations")
    p.add_argument("src")
    p.add_argument("dst")
    p.set_defaults(func=cmd_convert_gt)

    args = parser.parse_args(argv)
    torch.set_num_threads(1)
    return args.func(args) or 0


if __name__ == "__main__":
    sys.exit(main())
