"""Detection metrics: IoU, greedy matching with ignore absorption, PR
statistics, and the AP/AR summary over an IoU threshold sweep.

The summary follows the standard COCO protocol: AP is the mean of
101-point interpolated precision over thresholds 0.50..0.95, AR is the
mean final recall with detections capped per image, and the small/medium
strata treat out-of-stratum ground truth as ignore regions.  Strata with
no eligible ground truth report the sentinel -1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .coco import (
    AnnotationRecord,
    BBox,
    Dataset,
    DatasetError,
    Detection,
    SizeClass,
    classify_size,
)

__all__ = [
    "DEFAULT_IOU_THRESHOLDS",
    "DEFAULT_MAX_DETS",
    "UNDEFINED",
    "METRIC_NAMES",
    "MatchResult",
    "MetricReport",
    "iou",
    "match_detections",
    "precision",
    "recall",
    "f1_score",
    "average_precision",
    "evaluate",
    "validate_thresholds",
]

DEFAULT_IOU_THRESHOLDS: tuple[float, ...] = tuple(np.linspace(0.5, 0.95, 10).tolist())
DEFAULT_MAX_DETS = 100

# reported when a size stratum holds no eligible ground truth
UNDEFINED = -1.0

METRIC_NAMES = ("ap", "ap50", "ap75", "aps", "apm", "ar", "ars", "arm")

_RECALL_SAMPLES = np.linspace(0.0, 1.0, 101)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; 0 when the union is empty."""
    ix1 = max(a.x, b.x)
    iy1 = max(a.y, b.y)
    ix2 = min(a.x + a.w, b.x + b.w)
    iy2 = min(a.y + a.h, b.y + b.h)
    iw = ix2 - ix1
    ih = iy2 - iy1
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def validate_thresholds(thresholds: Sequence[float] | None) -> tuple[float, ...]:
    if thresholds is None:
        return DEFAULT_IOU_THRESHOLDS
    out = tuple(float(t) for t in thresholds)
    if not out:
        raise ValueError("empty threshold list")
    for t in out:
        if not (0.0 < t <= 1.0):
            raise ValueError(f"IoU threshold {t} outside (0, 1]")
    if any(b <= a for a, b in zip(out, out[1:])):
        raise ValueError(f"thresholds must be strictly increasing, got {out}")
    return out


@dataclass(frozen=True)
class MatchResult:
    """Greedy assignment of one image's detections to its ground truth.

    Indexes follow the input orders.  ``det_matched_gt`` holds the matched
    annotation id per detection, or None; ``det_absorbed`` marks
    detections swallowed by an ignore region (dropped from FP counting).
    """

    det_matched_gt: tuple[int | None, ...]
    det_absorbed: tuple[bool, ...]
    gt_matched: tuple[bool, ...]
    tp: int
    fp: int
    fn: int


def match_detections(
    gts: Sequence[AnnotationRecord],
    dets: Sequence[Detection],
    iou_thr: float,
    gt_ignore: Sequence[bool] | None = None,
) -> MatchResult:
    """Match score-descending detections against one image's ground truth.

    Each detection takes the highest-IoU unmatched non-ignore GT with IoU
    at or above the threshold (IoU ties go to the lower annotation id).
    Failing that it may be absorbed by an unmatched ignore region, which
    removes it from FP counting.  Remaining detections are FPs; unmatched
    eligible GTs are FNs.
    """
    if not (0.0 < iou_thr <= 1.0):
        raise ValueError(f"IoU threshold {iou_thr} outside (0, 1]")
    if gt_ignore is None:
        gt_ignore = [g.ignore for g in gts]
    elif len(gt_ignore) != len(gts):
        raise ValueError("gt_ignore length does not match gts")

    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    matched = [False] * len(gts)
    det_matched_gt: list[int | None] = [None] * len(dets)
    det_absorbed = [False] * len(dets)

    def best_candidate(di: int, want_ignore: bool) -> int | None:
        best = None
        best_v = 0.0
        for gi, g in enumerate(gts):
            if bool(gt_ignore[gi]) != want_ignore or matched[gi]:
                continue
            v = iou(dets[di].bbox, g.bbox)
            if v < iou_thr:
                continue
            if best is None or v > best_v or (v == best_v and g.id < gts[best].id):
                best, best_v = gi, v
        return best

    for di in order:
        gi = best_candidate(di, want_ignore=False)
        if gi is None:
            gi = best_candidate(di, want_ignore=True)
            if gi is not None:
                matched[gi] = True
                det_absorbed[di] = True
                det_matched_gt[di] = gts[gi].id
            continue
        matched[gi] = True
        det_matched_gt[di] = gts[gi].id

    tp = sum(
        1
        for di in range(len(dets))
        if det_matched_gt[di] is not None and not det_absorbed[di]
    )
    fp = sum(
        1
        for di in range(len(dets))
        if det_matched_gt[di] is None and not det_absorbed[di]
    )
    eligible = sum(1 for flag in gt_ignore if not flag)
    return MatchResult(
        det_matched_gt=tuple(det_matched_gt),
        det_absorbed=tuple(det_absorbed),
        gt_matched=tuple(matched),
        tp=tp,
        fp=fp,
        fn=eligible - tp,
    )


def precision(tp: int, fp: int, total_gt: int | None = None) -> float | None:
    """TP / (TP + FP); see the empty-denominator conventions below.

    With no predictions at all the value is 1.0 when the ground truth is
    known to be empty (perfect silence), otherwise undefined (None).
    """
    if tp < 0 or fp < 0:
        raise ValueError("negative counts")
    if tp + fp == 0:
        if total_gt == 0:
            return 1.0
        return None
    return tp / (tp + fp)


def recall(tp: int, fn: int) -> float | None:
    if tp < 0 or fn < 0:
        raise ValueError("negative counts")
    if tp + fn == 0:
        return None
    return tp / (tp + fn)


def f1_score(p: float | None, r: float | None) -> float | None:
    if p is None or r is None:
        return None
    if p + r == 0:
        return None
    return 2.0 * p * r / (p + r)


# --------------------------------------------------------------------------
# corpus-level accumulation


class _ImageEval:
    """Per (image, category, stratum) match state over all thresholds."""

    __slots__ = ("scores", "dt_matched", "dt_ignored", "n_eligible")

    def __init__(self, scores, dt_matched, dt_ignored, n_eligible):
        self.scores = scores          # (D,) detection scores, score-sorted
        self.dt_matched = dt_matched  # (T, D) bool
        self.dt_ignored = dt_ignored  # (T, D) bool
        self.n_eligible = n_eligible  # eligible GT count


def _iou_matrix(dets: Sequence[Detection], gts: Sequence[AnnotationRecord]) -> np.ndarray:
    mat = np.zeros((len(dets), len(gts)))
    for di, d in enumerate(dets):
        for gi, g in enumerate(gts):
            mat[di, gi] = iou(d.bbox, g.bbox)
    return mat


def _match_image(
    gts: Sequence[AnnotationRecord],
    dets: Sequence[Detection],
    iou_mat: np.ndarray,
    gt_ignore: np.ndarray,
    dt_out_of_stratum: np.ndarray,
    thresholds: Sequence[float],
) -> _ImageEval:
    """Greedy matching for one image and stratum at every threshold.

    Detections arrive score-sorted and capped.  Ignore GTs absorb at most
    one detection each; an unmatched detection whose own area falls
    outside the stratum is ignored rather than counted as FP.
    """
    n_thr = len(thresholds)
    n_det = len(dets)
    dt_matched = np.zeros((n_thr, n_det), dtype=bool)
    dt_ignored = np.zeros((n_thr, n_det), dtype=bool)

    real = [gi for gi in range(len(gts)) if not gt_ignore[gi]]
    region = [gi for gi in range(len(gts)) if gt_ignore[gi]]

    for ti, thr in enumerate(thresholds):
        taken = np.zeros(len(gts), dtype=bool)
        for di in range(n_det):
            best = None
            best_v = 0.0
            for gi in real:
                if taken[gi]:
                    continue
                v = iou_mat[di, gi]
                if v < thr:
                    continue
                if best is None or v > best_v or (v == best_v and gts[gi].id < gts[best].id):
                    best, best_v = gi, v
            if best is None:
                for gi in region:
                    if taken[gi]:
                        continue
                    v = iou_mat[di, gi]
                    if v < thr:
                        continue
                    if best is None or v > best_v or (v == best_v and gts[gi].id < gts[best].id):
                        best, best_v = gi, v
                if best is not None:
                    taken[best] = True
                    dt_matched[ti, di] = True
                    dt_ignored[ti, di] = True
                continue
            taken[best] = True
            dt_matched[ti, di] = True
        unmatched = ~dt_matched[ti]
        dt_ignored[ti, unmatched] |= dt_out_of_stratum[unmatched]

    scores = np.array([d.score for d in dets], dtype=np.float64)
    return _ImageEval(scores, dt_matched, dt_ignored, int(np.sum(~gt_ignore)))


def _accumulate(
    evals: list[_ImageEval], thresholds: Sequence[float]
) -> tuple[np.ndarray | None, np.ndarray | None]:
    """Merge per-image results into 101-point precision samples and recall.

    Returns (precision_samples (T, 101), final_recall (T,)) or
    (None, None) when the stratum holds no eligible ground truth.
    """
    n_thr = len(thresholds)
    npig = sum(e.n_eligible for e in evals)
    if npig == 0:
        return None, None
    scores = np.concatenate([e.scores for e in evals]) if evals else np.zeros(0)
    order = np.argsort(-scores, kind="mergesort")
    dt_matched = (
        np.concatenate([e.dt_matched for e in evals], axis=1)[:, order]
        if evals
        else np.zeros((n_thr, 0), dtype=bool)
    )
    dt_ignored = (
        np.concatenate([e.dt_ignored for e in evals], axis=1)[:, order]
        if evals
        else np.zeros((n_thr, 0), dtype=bool)
    )

    tps = dt_matched & ~dt_ignored
    fps = ~dt_matched & ~dt_ignored
    tp_sum = np.cumsum(tps, axis=1).astype(np.float64)
    fp_sum = np.cumsum(fps, axis=1).astype(np.float64)

    prec_samples = np.zeros((n_thr, _RECALL_SAMPLES.size))
    final_recall = np.zeros(n_thr)
    for ti in range(n_thr):
        tp = tp_sum[ti]
        fp = fp_sum[ti]
        nd = tp.size
        rc = tp / npig
        pr = tp / (tp + fp + np.spacing(1))
        final_recall[ti] = rc[-1] if nd else 0.0
        # precision envelope: non-increasing from the right
        for i in range(nd - 1, 0, -1):
            if pr[i] > pr[i - 1]:
                pr[i - 1] = pr[i]
        inds = np.searchsorted(rc, _RECALL_SAMPLES, side="left")
        q = np.zeros(_RECALL_SAMPLES.size)
        for ri, pi in enumerate(inds):
            if pi < nd:
                q[ri] = pr[pi]
        prec_samples[ti] = q
    return prec_samples, final_recall


_STRATA: tuple[tuple[str, SizeClass | None], ...] = (
    ("all", None),
    ("small", SizeClass.SMALL),
    ("medium", SizeClass.MEDIUM),
)


def _corpus_tables(
    gt: Dataset,
    dets: Sequence[Detection],
    thresholds: Sequence[float],
    max_dets: int,
    strata: tuple[tuple[str, SizeClass | None], ...] = _STRATA,
) -> dict[str, tuple[list[np.ndarray], list[np.ndarray]]]:
    """Per stratum: per-category precision samples and recall arrays.

    Categories without eligible ground truth in a stratum are skipped, so
    each list holds only defined entries.
    """
    for d in dets:
        if not gt.has_image(d.image_id):
            raise DatasetError(f"detection references missing image {d.image_id}")
        if not gt.has_category(d.category_id):
            raise DatasetError(f"detection references missing category {d.category_id}")

    dets_by_img_cat: dict[tuple[int, int], list[Detection]] = {}
    for d in dets:
        dets_by_img_cat.setdefault((d.image_id, d.category_id), []).append(d)

    tables: dict[str, tuple[list[np.ndarray], list[np.ndarray]]] = {
        name: ([], []) for name, _ in strata
    }
    for cat in gt.categories:
        per_image: list[tuple[list[AnnotationRecord], list[Detection], np.ndarray]] = []
        for img in gt.images:
            gts = list(gt.annotations_for(img.id, cat.id))
            cand = dets_by_img_cat.get((img.id, cat.id), [])
            order = sorted(range(len(cand)), key=lambda i: (-cand[i].score, i))
            image_dets = [cand[i] for i in order[:max_dets]]
            if not gts and not image_dets:
                continue
            per_image.append((gts, image_dets, _iou_matrix(image_dets, gts)))

        for name, size_class in strata:
            evals = []
            for gts, image_dets, iou_mat in per_image:
                gt_ignore = np.array(
                    [
                        g.ignore or (size_class is not None and g.size_class is not size_class)
                        for g in gts
                    ],
                    dtype=bool,
                )
                dt_out = np.array(
                    [
                        size_class is not None
                        and classify_size(d.bbox.area) is not size_class
                        for d in image_dets
                    ],
                    dtype=bool,
                )
                evals.append(
                    _match_image(gts, image_dets, iou_mat, gt_ignore, dt_out, thresholds)
                )
            prec, rec = _accumulate(evals, thresholds)
            if prec is not None:
                tables[name][0].append(prec)
                tables[name][1].append(rec)
    return tables


@dataclass(frozen=True)
class MetricReport:
    """The eight-value summary; -1 marks an undefined size stratum."""

    ap: float
    ap50: float
    ap75: float
    aps: float
    apm: float
    ar: float
    ars: float
    arm: float

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}

    @classmethod
    def from_dict(cls, d: dict[str, float]) -> "MetricReport":
        return cls(**{name: float(d[name]) for name in METRIC_NAMES})


def _mean_ap(prec_list: list[np.ndarray], thr_index: int | None = None) -> float:
    if not prec_list:
        return UNDEFINED
    if thr_index is None:
        return float(np.mean([p.mean() for p in prec_list]))
    return float(np.mean([p[thr_index].mean() for p in prec_list]))


def _mean_ar(rec_list: list[np.ndarray]) -> float:
    if not rec_list:
        return UNDEFINED
    return float(np.mean([r.mean() for r in rec_list]))


def _threshold_index(thresholds: Sequence[float], value: float) -> int | None:
    for i, t in enumerate(thresholds):
        if abs(t - value) < 1e-9:
            return i
    return None


def evaluate(
    gt: Dataset,
    dets: Sequence[Detection],
    thresholds: Sequence[float] | None = None,
    max_dets: int = DEFAULT_MAX_DETS,
) -> MetricReport:
    """Score a detection run against ground truth.

    AP metrics average 101-point interpolated precision over the
    threshold sweep (AP50/AP75 pick the single threshold and are -1 when
    the sweep does not include it); AR metrics average final recall.
    ``max_dets`` caps detections per image and category, highest scores
    kept.
    """
    thresholds = validate_thresholds(thresholds)
    if max_dets < 1:
        raise ValueError(f"max_dets must be positive, got {max_dets}")
    tables = _corpus_tables(gt, dets, thresholds, max_dets)

    i50 = _threshold_index(thresholds, 0.50)
    i75 = _threshold_index(thresholds, 0.75)
    prec_all, rec_all = tables["all"]
    prec_s, rec_s = tables["small"]
    prec_m, rec_m = tables["medium"]
    return MetricReport(
        ap=_mean_ap(prec_all),
        ap50=_mean_ap(prec_all, i50) if i50 is not None else UNDEFINED,
        ap75=_mean_ap(prec_all, i75) if i75 is not None else UNDEFINED,
        aps=_mean_ap(prec_s),
        apm=_mean_ap(prec_m),
        ar=_mean_ar(rec_all),
        ars=_mean_ar(rec_s),
        arm=_mean_ar(rec_m),
    )


def average_precision(
    gt: Dataset,
    dets: Sequence[Detection],
    iou_thr: float,
    size_filter: SizeClass | None = None,
    max_dets: int = DEFAULT_MAX_DETS,
) -> float | None:
    """Corpus AP at a single threshold, optionally within one size stratum.

    Ground truth outside the stratum is treated as ignore regions.
    Returns None when the stratum holds no eligible ground truth.
    """
    thresholds = validate_thresholds([iou_thr])
    name = "all" if size_filter is None else size_filter.value
    tables = _corpus_tables(gt, dets, thresholds, max_dets, ((name, size_filter),))
    prec_list, _ = tables[name]
    if not prec_list:
        return None
    return _mean_ap(prec_list)
