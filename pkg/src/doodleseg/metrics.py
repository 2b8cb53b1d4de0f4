"""Overlap metrics and per-class evaluation reports.

Dice and Jaccard treat two empty masks as a perfect match (1.0). AUC is the
rank-based Mann-Whitney statistic over a sample's pixels with ties counted
half; samples whose truth is all-positive or all-negative are excluded from
the AUC average and counted in the report's provenance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .autograd import Tensor, no_grad, ShapeError


class DegenerateLabelsError(ValueError):
    """AUC needs at least one positive and one negative pixel."""


def _check_shapes(op, a, b):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def dice_coefficient(pred: np.ndarray, truth: np.ndarray) -> float:
    _check_shapes("dice_coefficient", pred, truth)
    p = pred.astype(bool)
    t = truth.astype(bool)
    denom = int(p.sum()) + int(t.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int((p & t).sum()) / denom


def jaccard_index(pred: np.ndarray, truth: np.ndarray) -> float:
    _check_shapes("jaccard_index", pred, truth)
    p = pred.astype(bool)
    t = truth.astype(bool)
    union = int((p | t).sum())
    if union == 0:
        return 1.0
    return int((p & t).sum()) / union


def binary_accuracy(pred: np.ndarray, truth: np.ndarray) -> float:
    _check_shapes("binary_accuracy", pred, truth)
    return float((pred.astype(bool) == truth.astype(bool)).mean())


def pixel_auc(probs: np.ndarray, truth: np.ndarray) -> float:
    _check_shapes("pixel_auc", probs, truth)
    labels = truth.astype(bool).reshape(-1)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabelsError(
            f"pixel_auc: need both classes, got {n_pos} positive / {n_neg} negative")
    ranks = rankdata(probs.reshape(-1))
    rank_sum = float(ranks[labels].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass
class MetricsRow:
    dice: float
    jaccard: float
    auc: float | None
    accuracy: float
    n_samples: int

    def as_percent(self) -> dict:
        pct = lambda v: None if v is None else round(100.0 * v, 2)
        return {"dice": pct(self.dice), "jaccard": pct(self.jaccard),
                "auc": pct(self.auc), "accuracy": pct(self.accuracy),
                "n_samples": self.n_samples}


@dataclass
class MetricsReport:
    rows: dict[str, MetricsRow]            # class name -> row, plus "All"
    provenance: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"rows": {k: v.as_percent() for k, v in self.rows.items()},
                "provenance": self.provenance}

    def to_text_table(self) -> str:
        head = f"{'Class':<14} {'Dice':>7} {'Jaccard':>8} {'AUC':>7} {'Accuracy':>9}"
        lines = [head, "-" * len(head)]
        fmt = lambda v: "   n/a" if v is None else f"{v:6.2f}"
        order = [k for k in self.rows if k != "All"] + (["All"] if "All" in self.rows else [])
        for name in order:
            r = self.rows[name].as_percent()
            lines.append(f"{name:<14} {fmt(r['dice']):>7} {fmt(r['jaccard']):>8} "
                         f"{fmt(r['auc']):>7} {fmt(r['accuracy']):>9}")
        return "\n".join(lines)

    def save(self, path) -> None:
        from pathlib import Path
        Path(path).write_text(json.dumps(self.to_json(), indent=1))


@dataclass
class SampleScores:
    class_id: int
    dice: float
    jaccard: float
    auc: float | None
    accuracy: float


def score_sample(probs: np.ndarray, truth: np.ndarray, class_id: int,
                 threshold: float = 0.5) -> SampleScores:
    pred = probs >= threshold
    truth_b = truth.astype(bool)
    try:
        auc = pixel_auc(probs, truth_b)
    except DegenerateLabelsError:
        auc = None
    return SampleScores(class_id,
                        dice_coefficient(pred, truth_b),
                        jaccard_index(pred, truth_b),
                        auc,
                        binary_accuracy(pred, truth_b))


def aggregate(scores: list[SampleScores], class_names: list[str],
              provenance: dict | None = None) -> MetricsReport:
    """Per-class row = mean over that class's samples; 'All' = mean over all
    samples (sample-mean, not pixel-pooled)."""
    if not scores:
        raise ValueError("no samples to aggregate")

    def mean_row(subset: list[SampleScores]) -> MetricsRow:
        aucs = [s.auc for s in subset if s.auc is not None]
        return MetricsRow(
            dice=float(np.mean([s.dice for s in subset])),
            jaccard=float(np.mean([s.jaccard for s in subset])),
            auc=float(np.mean(aucs)) if aucs else None,
            accuracy=float(np.mean([s.accuracy for s in subset])),
            n_samples=len(subset),
        )

    rows: dict[str, MetricsRow] = {}
    for cid, name in enumerate(class_names):
        subset = [s for s in scores if s.class_id == cid]
        if subset:
            rows[name] = mean_row(subset)
    rows["All"] = mean_row(scores)
    prov = dict(provenance or {})
    prov["auc_excluded_samples"] = sum(1 for s in scores if s.auc is None)
    return MetricsReport(rows, prov)


def predict_probs(model, records, num_classes: int, batch_size: int = 16) -> list[np.ndarray]:
    """Infer-mode probability maps for a list of records, in order."""
    from .data.preprocess import encode_and_normalize
    out = []
    with no_grad():
        for start in range(0, len(records), batch_size):
            chunk = records[start:start + batch_size]
            imgs, doos = [], []
            for rec in chunk:
                img, doo, _ = encode_and_normalize(rec, num_classes)
                imgs.append(img)
                doos.append(doo)
            img_t = Tensor(np.stack(imgs)[..., None])
            doo_t = Tensor(np.stack(doos)[..., None])
            probs = model.forward(img_t, doo_t, training=False).data[..., 0]
            out.extend(probs[i] for i in range(len(chunk)))
    return out


def evaluate(model, records, class_names: list[str], threshold: float = 0.5,
             batch_size: int = 16, provenance: dict | None = None) -> MetricsReport:
    """Forward every record in infer mode, binarize at ``threshold`` for the
    overlap metrics, keep raw probabilities for AUC, aggregate per class."""
    if not records:
        raise ValueError("evaluate: empty test set")
    probs = predict_probs(model, records, len(class_names), batch_size)
    scores = [score_sample(p, rec.mask, rec.class_id, threshold)
              for p, rec in zip(probs, records)]
    prov = dict(provenance or {})
    prov.update(threshold=threshold, n_samples=len(records))
    return aggregate(scores, class_names, prov)
