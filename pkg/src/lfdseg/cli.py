"""Command-line entry point.

Subcommands: analyze, infer, eval, bench, selftest.
Exit codes: 0 success, 2 configuration error, 3 data error, 4 conformance
failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import __version__, analysis, metrics, pipeline, runtime, selftest
from . import weights as weights_io
from .errors import DataError, GraphBuildError, LfdsegError, WeightFormatError
from .graph import VARIANTS, VariantConfig, build
from .report import ReportDir, fmt6
from .tensor import Tensor

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_CONFORMANCE = 4


class _CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _parse_pair(text: str, flag: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise _CliError(f"{flag} expects the form AxB, got {text!r}", EXIT_CONFIG)
    try:
        a, b = int(parts[0]), int(parts[1])
    except ValueError:
        raise _CliError(f"{flag} expects integers, got {text!r}", EXIT_CONFIG) from None
    if a < 1 or b < 1:
        raise _CliError(f"{flag} values must be positive, got {text!r}", EXIT_CONFIG)
    return a, b


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lfdseg",
        description="CPU inference and analysis engine for bilateral road segmentation.",
    )
    p.add_argument("--version", action="version", version=f"lfdseg {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, weights=False):
        sp.add_argument("--variant", default="full", choices=VARIANTS)
        sp.add_argument("--size", default="375x1240", metavar="HxW")
        sp.add_argument("--csb-ratio", default="2x4", metavar="RVxRH")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: LFD_THREADS or 1)")
        sp.add_argument("--report", default=None, metavar="DIR",
                        help="directory for report files and figures")
        if weights:
            sp.add_argument("--weights", default=None, metavar="FILE.lfdw")

    sp = sub.add_parser("analyze", help="parameters, MACs, receptive fields")
    common(sp)

    sp = sub.add_parser("infer", help="segment one image")
    sp.add_argument("image")
    common(sp, weights=True)
    sp.add_argument("--threshold", type=float, default=0.5)
    sp.add_argument("--out", default=None, metavar="MASK.png")
    sp.add_argument("--overlay", default=None, metavar="OVERLAY.png")
    sp.add_argument("--prob", default=None, metavar="PROB.png",
                    help="16-bit probability map output")

    sp = sub.add_parser("eval", help="evaluate a directory of images against masks")
    sp.add_argument("images_dir")
    sp.add_argument("masks_dir")
    common(sp, weights=True)
    sp.add_argument("--threshold", type=float, default=0.5)

    sp = sub.add_parser("bench", help="forward-latency benchmark")
    common(sp, weights=True)
    sp.add_argument("--iters", type=int, default=1000)
    sp.add_argument("--warmup", type=int, default=50)
    sp.add_argument("--thread-list", default=None, metavar="T1,T2,...",
                    help="bench each thread count (default: the --threads value)")

    sp = sub.add_parser("selftest", help="conformance checks incl. golden fixtures")
    sp.add_argument("--fixtures", default=None, metavar="DIR")
    sp.add_argument("--threads", type=int, default=None)

    return p


def _config_from(args) -> VariantConfig:
    hw = _parse_pair(args.size, "--size")
    ratio = _parse_pair(args.csb_ratio, "--csb-ratio")
    try:
        return VariantConfig(args.variant, hw, ratio)
    except GraphBuildError as e:
        raise _CliError(str(e), EXIT_CONFIG) from None


def _load_model(args, config):
    if args.weights is None:
        raise _CliError("--weights is required for this command", EXIT_CONFIG)
    if not os.path.exists(args.weights):
        raise _CliError(f"weights file not found: {args.weights}", EXIT_DATA)
    try:
        store = weights_io.read(args.weights)
        graph = build(config)
        return weights_io.bind(graph, store)
    except (WeightFormatError, LfdsegError) as e:
        raise _CliError(str(e), EXIT_DATA) from None


def _apply_threads(args):
    n = args.threads if getattr(args, "threads", None) else runtime.default_threads()
    if n < 1:
        raise _CliError(f"thread count must be >= 1, got {n}", EXIT_CONFIG)
    runtime.set_threads(n)
    return n


def cmd_analyze(args) -> int:
    config = _config_from(args)
    try:
        record = analysis.analyze(config)
    except GraphBuildError as e:
        raise _CliError(str(e), EXIT_CONFIG) from None
    print(f"variant          {record['variant']}")
    print(f"input size       {record['input_hw'][0]}x{record['input_hw'][1]}")
    print(f"csb ratio        {record['csb_ratio'][0]}x{record['csb_ratio'][1]}")
    print(f"parameters       {record['params']:,d}")
    print(f"macs             {record['macs']:,d}")
    print("breakdown:")
    for grp in sorted(set(record["param_breakdown"]) | set(record["macs_breakdown"])):
        pc = record["param_breakdown"].get(grp, 0)
        mc = record["macs_breakdown"].get(grp, 0)
        print(f"  {grp:<10s} params {pc:>12,d}   macs {mc:>16,d}")
    if record["receptive_fields"]:
        print("receptive fields (input pixels):")
        for tap, rf in record["receptive_fields"].items():
            shape = record["tap_shapes"][tap]
            print(f"  {tap:<12s} rf {rf['rf_h']:.1f}x{rf['rf_w']:.1f}"
                  f"  jump {rf['jump_h']:.1f}x{rf['jump_w']:.1f}"
                  f"  dims {shape[0]}x{shape[1]}x{shape[2]}")
    if args.report:
        ReportDir(args.report).emit_analyze(record)
    return EXIT_OK


def cmd_infer(args) -> int:
    _apply_threads(args)
    if args.out is None:
        raise _CliError("--out MASK.png is required for infer", EXIT_CONFIG)
    if not 0.0 <= args.threshold <= 1.0:
        raise _CliError(f"--threshold must lie in [0, 1], got {args.threshold}", EXIT_CONFIG)
    img = pipeline.load_image(args.image)
    h, w = img.shape[:2]
    ratio = _parse_pair(args.csb_ratio, "--csb-ratio")
    try:
        config = VariantConfig(args.variant, (h, w), ratio)
    except GraphBuildError as e:
        raise _CliError(str(e), EXIT_CONFIG) from None
    model = _load_model(args, config)
    prob = pipeline.predict(model, img)
    mask = pipeline.to_mask(prob, args.threshold)
    pipeline.save_mask(args.out, mask)
    written = [args.out]
    if args.overlay:
        pipeline.save_image(args.overlay, pipeline.overlay(img, mask))
        written.append(args.overlay)
    if args.prob:
        pipeline.save_prob(args.prob, prob)
        written.append(args.prob)
    road = float(mask.mean())
    print(f"road fraction    {fmt6(road)}")
    print("wrote            " + ", ".join(written))
    return EXIT_OK


def _pair_stems(images_dir, masks_dir):
    def stems(d):
        try:
            return {os.path.splitext(f)[0]: os.path.join(d, f)
                    for f in sorted(os.listdir(d)) if f.lower().endswith(".png")}
        except FileNotFoundError:
            raise _CliError(f"directory not found: {d}", EXIT_DATA) from None

    imgs, masks = stems(images_dir), stems(masks_dir)
    missing_masks = sorted(set(imgs) - set(masks))
    missing_imgs = sorted(set(masks) - set(imgs))
    if missing_masks or missing_imgs:
        parts = []
        if missing_masks:
            parts.append("images without masks: " + ", ".join(missing_masks[:10]))
        if missing_imgs:
            parts.append("masks without images: " + ", ".join(missing_imgs[:10]))
        raise _CliError("; ".join(parts), EXIT_DATA)
    if not imgs:
        raise _CliError(f"no .png images found in {images_dir}", EXIT_DATA)
    return [(s, imgs[s], masks[s]) for s in sorted(imgs)]


def cmd_eval(args) -> int:
    _apply_threads(args)
    pairs = _pair_stems(args.images_dir, args.masks_dir)
    ratio = _parse_pair(args.csb_ratio, "--csb-ratio")
    models = {}
    names, probs, gts = [], [], []
    for stem, img_path, mask_path in pairs:
        img = pipeline.load_image(img_path)
        gt = pipeline.load_mask(mask_path)
        if img.shape[:2] != gt.shape:
            raise _CliError(f"{stem}: image {img.shape[:2]} vs mask {gt.shape} differ",
                            EXIT_DATA)
        hw = img.shape[:2]
        if hw not in models:
            try:
                config = VariantConfig(args.variant, hw, ratio)
            except GraphBuildError as e:
                raise _CliError(str(e), EXIT_CONFIG) from None
            models[hw] = _load_model(args, config)
        names.append(stem)
        probs.append(pipeline.predict(models[hw], img))
        gts.append(gt)
    report = metrics.evaluate_dataset(names, probs, gts)
    print(f"images           {report.n_images}")
    print(f"maxf             {fmt6(report.maxf)}")
    print(f"best threshold   {fmt6(report.best_threshold)}")
    print(f"ap_11pt          {fmt6(report.ap)}")
    print(f"pre              {fmt6(report.pre)}")
    print(f"rec              {fmt6(report.rec)}")
    print(f"fpr              {fmt6(report.fpr)}")
    print(f"fnr              {fmt6(report.fnr)}")
    print(f"miou             {fmt6(report.miou)}")
    print(f"ohem_loss        {fmt6(report.ohem_loss)}")
    if args.report:
        sweep = metrics.sweep_curves(probs, gts)
        ReportDir(args.report).emit_eval(report, sweep=(sweep[0], sweep[1], sweep[2], sweep[3]))
    return EXIT_OK


def cmd_bench(args) -> int:
    config = _config_from(args)
    if args.iters < 1 or args.warmup < 0:
        raise _CliError("--iters must be >= 1 and --warmup >= 0", EXIT_CONFIG)
    if args.weights:
        model = _load_model(args, config)
    else:
        graph = build(config)
        model = weights_io.bind(graph, weights_io.random_store(graph, seed=0))
    if args.thread_list:
        try:
            thread_counts = [int(t) for t in args.thread_list.split(",") if t]
        except ValueError:
            raise _CliError(f"--thread-list expects integers, got {args.thread_list!r}",
                            EXIT_CONFIG) from None
        if not thread_counts or min(thread_counts) < 1:
            raise _CliError("--thread-list entries must be >= 1", EXIT_CONFIG)
    else:
        thread_counts = [args.threads if args.threads else runtime.default_threads()]

    h, w = config.input_hw
    rng = np.random.default_rng(0)
    x = Tensor(rng.normal(0.0, 1.0, size=(1, 3, h, w)).astype(np.float32))
    runs = []
    for t in thread_counts:
        runtime.set_threads(t)
        for _ in range(args.warmup):
            model.forward(x)
        times = np.empty(args.iters, dtype=np.float64)
        for i in range(args.iters):
            t0 = time.perf_counter()
            model.forward(x)
            times[i] = time.perf_counter() - t0
        runs.append({
            "threads": t,
            "mean_s": float(times.mean()),
            "p50_s": float(np.percentile(times, 50)),
            "p95_s": float(np.percentile(times, 95)),
            "throughput_fps": float(1.0 / times.mean()),
        })
        r = runs[-1]
        print(f"threads {t:>2d}  mean {fmt6(r['mean_s'])}s  p50 {fmt6(r['p50_s'])}s"
              f"  p95 {fmt6(r['p95_s'])}s  {fmt6(r['throughput_fps'])} fps")
    if args.report:
        ReportDir(args.report).emit_bench({
            "variant": config.variant,
            "input_hw": list(config.input_hw),
            "iters": args.iters,
            "warmup": args.warmup,
            "runs": runs,
        })
    return EXIT_OK


def cmd_selftest(args) -> int:
    _apply_threads(args)
    fixtures = args.fixtures
    if fixtures is not None and not os.path.isdir(fixtures):
        raise _CliError(f"fixtures directory not found: {fixtures}", EXIT_DATA)
    try:
        results = selftest.run(fixtures)
    except DataError as e:
        raise _CliError(str(e), EXIT_DATA) from None
    failed = 0
    for r in results:
        status = "PASS" if r["ok"] else "FAIL"
        print(f"[{status}] {r['name']}")
        failed += 0 if r["ok"] else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_CONFORMANCE


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "analyze": cmd_analyze,
        "infer": cmd_infer,
        "eval": cmd_eval,
        "bench": cmd_bench,
        "selftest": cmd_selftest,
    }
    try:
        return handlers[args.command](args)
    except _CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except LfdsegError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
