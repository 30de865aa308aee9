"""Segmentation metrics: threshold-swept F1 and AP, mIoU, rates, OHEM loss.

Evaluation is pooled: confusion counts are accumulated over every image at
each threshold before any rate is formed. MaxF uses an inclusive threshold
(p >= tau); average precision uses a strict one (p > tau) so that all-zero
predictions score zero. Empty denominators yield 0 by convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

OHEM_LAMBDA = 0.7
PROB_FLOOR = 1e-7


def _ratio(num, den) -> float:
    return float(num) / float(den) if den else 0.0


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def pre(self) -> float:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def rec(self) -> float:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def fpr(self) -> float:
        return _ratio(self.fp, self.fp + self.tn)

    @property
    def fnr(self) -> float:
        return _ratio(self.fn, self.fn + self.tp)

    @property
    def f1(self) -> float:
        p, r = self.pre, self.rec
        return _ratio(2.0 * p * r, p + r)

    def __add__(self, other: "Confusion") -> "Confusion":
        return Confusion(self.tp + other.tp, self.fp + other.fp,
                         self.tn + other.tn, self.fn + other.fn)


def confusion(mask: np.ndarray, gt: np.ndarray) -> Confusion:
    if mask.shape != gt.shape:
        raise DataError(f"mask dims {mask.shape} vs ground truth {gt.shape} differ")
    m = mask.astype(bool)
    g = gt.astype(bool)
    tp = int(np.count_nonzero(m & g))
    fp = int(np.count_nonzero(m & ~g))
    fn = int(np.count_nonzero(~m & g))
    tn = m.size - tp - fp - fn
    return Confusion(tp, fp, tn, fn)


def _check_aligned(probs, gts):
    if not probs:
        raise DataError("metric computation needs at least one image")
    if len(probs) != len(gts):
        raise DataError(f"{len(probs)} probability maps vs {len(gts)} ground truths")
    for i, (p, g) in enumerate(zip(probs, gts)):
        if p.shape != g.shape:
            raise DataError(f"pair {i}: prob dims {p.shape} vs ground truth {g.shape} differ")


def _pooled_sweep(probs, gts, taus: np.ndarray, strict: bool):
    """tp/fp counts at every threshold, pooled over all images.

    Counting p >= tau (or p > tau when strict) for every tau at once via a
    sort + binary search per image.
    """
    side = "right" if strict else "left"
    tp = np.zeros(taus.size, dtype=np.int64)
    fp = np.zeros(taus.size, dtype=np.int64)
    npos = nneg = 0
    for p, g in zip(probs, gts):
        pf = p.ravel().astype(np.float64)
        gm = g.ravel().astype(bool)
        road = np.sort(pf[gm])
        bg = np.sort(pf[~gm])
        tp += road.size - np.searchsorted(road, taus, side=side)
        fp += bg.size - np.searchsorted(bg, taus, side=side)
        npos += road.size
        nneg += bg.size
    return tp, fp, npos, nneg


def _rates(tp, fp, npos, nneg):
    with np.errstate(invalid="ignore", divide="ignore"):
        pre = np.where(tp + fp > 0, tp / np.maximum(tp + fp, 1), 0.0)
        rec = tp / npos if npos else np.zeros_like(tp, dtype=np.float64)
    return pre, rec


def threshold_grid(n_thresholds: int = 255) -> np.ndarray:
    return np.arange(n_thresholds + 1, dtype=np.float64) / n_thresholds


def sweep_curves(probs, gts, n_thresholds: int = 255):
    """Pooled (taus, f1, precision, recall) arrays over the inclusive sweep."""
    _check_aligned(probs, gts)
    taus = threshold_grid(n_thresholds)
    tp, fp, npos, nneg = _pooled_sweep(probs, gts, taus, strict=False)
    pre, rec = _rates(tp, fp, npos, nneg)
    denom = pre + rec
    f1 = np.where(denom > 0, 2.0 * pre * rec / np.maximum(denom, 1e-300), 0.0)
    return taus, f1, pre, rec


def max_f(probs, gts, n_thresholds: int = 255) -> tuple[float, float]:
    """Maximum pooled F1 over the threshold grid and the smallest threshold
    achieving it."""
    taus, f1, _, _ = sweep_curves(probs, gts, n_thresholds)
    k = int(np.argmax(f1))
    return float(f1[k]), float(taus[k])


def average_precision(probs, gts, n_thresholds: int = 255) -> float:
    """11-point interpolated AP over the pooled strict-threshold sweep."""
    _check_aligned(probs, gts)
    taus = threshold_grid(n_thresholds)
    tp, fp, npos, nneg = _pooled_sweep(probs, gts, taus, strict=True)
    pre, rec = _rates(tp, fp, npos, nneg)
    total = 0.0
    for k in range(11):
        r = k / 10
        sel = rec >= r
        total += float(pre[sel].max()) if sel.any() else 0.0
    return total / 11.0


def miou(masks, gts) -> float:
    """Mean over {road, background} of pooled intersection-over-union."""
    _check_aligned(masks, gts)
    c = Confusion(0, 0, 0, 0)
    for m, g in zip(masks, gts):
        c = c + confusion(m, g)
    iou_road = _ratio(c.tp, c.tp + c.fp + c.fn)
    iou_bg = _ratio(c.tn, c.tn + c.fp + c.fn)
    return (iou_road + iou_bg) / 2.0


def ohem_bce(p: np.ndarray, gt: np.ndarray, lam: float = OHEM_LAMBDA) -> float:
    """Hard-example cross-entropy: mean over ALL pixels of the BCE of pixels
    whose true-class confidence falls below lam."""
    if p.shape != gt.shape:
        raise DataError(f"prob dims {p.shape} vs ground truth {gt.shape} differ")
    if not 0.0 <= lam <= 1.0:
        raise DataError(f"selection threshold {lam} outside [0, 1]")
    pc = np.clip(p.astype(np.float64), PROB_FLOOR, 1.0 - PROB_FLOOR)
    p_true = np.where(gt.astype(bool), pc, 1.0 - pc)
    hard = p_true < lam
    if not hard.any():
        return 0.0
    return float(-np.log(p_true[hard]).sum() / p_true.size)


@dataclass
class ImageResult:
    name: str
    maxf: float
    best_threshold: float
    ap: float
    pre: float
    rec: float
    fpr: float
    fnr: float
    miou: float
    ohem_loss: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class EvalReport:
    maxf: float
    best_threshold: float
    ap: float
    pre: float
    rec: float
    fpr: float
    fnr: float
    miou: float
    ohem_loss: float
    n_images: int
    per_image: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "per_image"}
        d["per_image"] = [r.to_dict() for r in self.per_image]
        return d


def evaluate_dataset(names, probs, gts, lam: float = OHEM_LAMBDA) -> EvalReport:
    """Pooled metrics plus one row per image.

    Aggregate PRE/REC/FPR/FNR/mIoU are taken at the pooled MaxF threshold;
    per-image rows use the same pooled threshold for their rates while MaxF
    and AP are swept per image. The OHEM loss is pooled over all pixels.
    """
    _check_aligned(probs, gts)
    mf, tau = max_f(probs, gts)
    ap = average_precision(probs, gts)
    masks = [p >= tau for p in probs]
    agg = Confusion(0, 0, 0, 0)
    for m, g in zip(masks, gts):
        agg = agg + confusion(m, g)
    pooled_miou = miou(masks, gts)

    total_pixels = sum(p.size for p in probs)
    per_image = []
    pooled_ohem = 0.0
    for name, p, g in zip(names, probs, gts):
        c = confusion(p >= tau, g)
        o = ohem_bce(p, g, lam)
        pooled_ohem += o * p.size
        imf, itau = max_f([p], [g])
        per_image.append(ImageResult(
            name=name,
            maxf=imf,
            best_threshold=itau,
            ap=average_precision([p], [g]),
            pre=c.pre, rec=c.rec, fpr=c.fpr, fnr=c.fnr,
            miou=miou([p >= tau], [g]),
            ohem_loss=o,
        ))
    return EvalReport(
        maxf=mf,
        best_threshold=tau,
        ap=ap,
        pre=agg.pre, rec=agg.rec, fpr=agg.fpr, fnr=agg.fnr,
        miou=pooled_miou,
        ohem_loss=pooled_ohem / total_pixels,
        n_images=len(probs),
        per_image=per_image,
    )
