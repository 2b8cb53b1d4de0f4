"""Dice-loss training loop: plateau LR schedule, early stopping, per-epoch
checkpointing, 5-fold orchestration, and multi-seed run averaging.

Counter semantics, pinned by the schedule conformance tests:
  * the learning-rate plateau counter treats the first epoch as part of the
    plateau (it only seeds the baseline), so five flat epochs from the start
    reduce the rate at epoch 5;
  * checkpointing / early stopping treat the first epoch as an improvement
    over nothing, so a flat run stops at epoch 1 + patience.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional

import numpy as np

from .autograd import (Tensor, Adam, SGD, ShapeError, backward,
                       add, add_const, div, mul, mul_const, sum_all)
from .data.preprocess import encode_and_normalize
from .data.records import DatasetManifest, SampleRecord
from .data.sampling import random_oversample
from .metrics import MetricsReport, MetricsRow, dice_coefficient, evaluate, predict_probs
from .model import DoodleSegNet, ModelConfig


class NumericalError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    lr0: float = 0.001
    plateau_patience: int = 5
    lr_factor: float = 0.2
    lr_min: float = 1e-9
    early_stop_patience: int = 10
    epochs_per_fold: int = 20
    batch_size: int = 8            # full-scale protocol uses 16
    min_delta: float = 1e-4
    seeds: tuple[int, ...] = (101, 202, 303)
    dice_smooth: float = 1.0
    optimizer: str = "adam"        # "adam" | "sgd"
    threshold: float = 0.5

    def __post_init__(self):
        if not 0 < self.lr_factor < 1:
            raise ValueError(f"lr_factor {self.lr_factor} not in (0, 1)")
        if self.lr_min <= 0:
            raise ValueError("lr_min must be positive")
        if self.plateau_patience < 1 or self.early_stop_patience < 1:
            raise ValueError("patience values must be >= 1")


@dataclass
class TrainLogEntry:
    fold: int
    epoch: int
    train_loss: float
    val_dice: float
    lr: float
    checkpoint_written: bool

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class TrainLog:
    entries: list[TrainLogEntry] = field(default_factory=list)
    best_val_dice: float = 0.0
    stopped_early: bool = False

    def write_jsonl(self, path) -> None:
        from pathlib import Path
        with Path(path).open("w") as fh:
            for e in self.entries:
                fh.write(json.dumps(e.to_json()) + "\n")


def dice_loss(pred: Tensor, truth: Tensor, smooth: float = 1.0) -> Tensor:
    """Soft Dice over the whole batch: 1 - (2*sum(p*t)+s)/(sum(p)+sum(t)+s)."""
    if pred.shape != truth.shape:
        raise ShapeError(f"dice_loss: shape mismatch {pred.shape} vs {truth.shape}")
    intersection = sum_all(mul(pred, truth))
    numerator = add_const(mul_const(intersection, 2.0), smooth)
    denominator = add_const(add(sum_all(pred), sum_all(truth)), smooth)
    return add_const(mul_const(div(numerator, denominator), -1.0), 1.0)


class PlateauLRSchedule:
    """Multiply lr by ``factor`` after ``patience`` epochs without a
    val-Dice improvement > ``min_delta``, floored at ``lr_min``.

    The first observation seeds the baseline and counts toward the wait."""

    def __init__(self, lr0: float, factor: float = 0.2, patience: int = 5,
                 min_delta: float = 1e-4, lr_min: float = 1e-9):
        self.lr = lr0
        self.factor = factor
        self.patience = patience
        self.min_delta = min_delta
        self.lr_min = lr_min
        self.best: Optional[float] = None
        self.wait = 0

    def observe(self, value: float) -> float:
        if self.best is not None and value > self.best + self.min_delta:
            self.best = value
            self.wait = 0
            return self.lr
        if self.best is None:
            self.best = value
        self.wait += 1
        if self.wait >= self.patience:
            self.lr = max(self.lr * self.factor, self.lr_min)
            self.wait = 0
        return self.lr


class ImprovementTracker:
    """Best-so-far watcher for checkpointing and early stopping. The first
    observation improves on -inf, so it checkpoints and resets the stop
    counter."""

    def __init__(self, min_delta: float = 1e-4):
        self.min_delta = min_delta
        self.best = -math.inf
        self.epochs_since = 0

    def observe(self, value: float) -> bool:
        if value > self.best + self.min_delta:
            self.best = value
            self.epochs_since = 0
            return True
        self.epochs_since += 1
        return False

    def should_stop(self, patience: int) -> bool:
        return self.epochs_since >= patience


class EpochProtocol:
    """One val-Dice observation per epoch drives checkpointing, the plateau
    schedule, and early stopping; train_fold and the conformance tests share
    this exact wiring."""

    def __init__(self, tc: "TrainConfig"):
        self.schedule = PlateauLRSchedule(tc.lr0, tc.lr_factor,
                                          tc.plateau_patience, tc.min_delta,
                                          tc.lr_min)
        self.tracker = ImprovementTracker(tc.min_delta)
        self.early_stop_patience = tc.early_stop_patience

    def observe(self, val_dice: float) -> tuple[bool, float, bool]:
        """-> (checkpoint_now, new_lr, stop_now)"""
        improved = self.tracker.observe(val_dice)
        lr = self.schedule.observe(val_dice)
        return improved, lr, self.tracker.should_stop(self.early_stop_patience)


def _encode_batchable(records: list[SampleRecord], num_classes: int):
    imgs, doos, masks = [], [], []
    for rec in records:
        img, doo, mask = encode_and_normalize(rec, num_classes)
        imgs.append(img)
        doos.append(doo)
        masks.append(mask)
    return (np.stack(imgs)[..., None], np.stack(doos)[..., None],
            np.stack(masks)[..., None])


def validation_dice(model: DoodleSegNet, records: list[SampleRecord],
                    num_classes: int, threshold: float = 0.5,
                    batch_size: int = 16) -> float:
    probs = predict_probs(model, records, num_classes, batch_size)
    scores = [dice_coefficient(p >= threshold, rec.mask.astype(bool))
              for p, rec in zip(probs, records)]
    return float(np.mean(scores))


def train_fold(model: DoodleSegNet, train_records: list[SampleRecord],
               val_records: list[SampleRecord], num_classes: int,
               tc: TrainConfig, rng: np.random.Generator, fold: int = 0,
               checkpoint_cb: Optional[Callable] = None,
               progress: bool = False) -> tuple[dict, TrainLog]:
    """Train one fold; returns (best parameter snapshot, log).

    A checkpoint snapshot is taken whenever val Dice improves by more than
    ``min_delta``; training stops early after ``early_stop_patience`` epochs
    without improvement. NaN loss aborts the fold.
    """
    imgs, doos, masks = _encode_batchable(train_records, num_classes)
    n = len(train_records)
    if tc.optimizer == "adam":
        opt = Adam(list(model.parameters()), lr=tc.lr0)
    else:
        opt = SGD(list(model.parameters()), lr=tc.lr0)
    protocol = EpochProtocol(tc)
    log = TrainLog()
    best_state = model.snapshot()

    for epoch in range(1, tc.epochs_per_fold + 1):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, tc.batch_size):
            idx = order[start:start + tc.batch_size]
            if len(idx) < 2:           # batch-norm needs batch statistics
                continue
            pred = model.forward(Tensor(imgs[idx]), Tensor(doos[idx]), training=True)
            loss = dice_loss(pred, Tensor(masks[idx]), tc.dice_smooth)
            value = loss.item()
            if not math.isfinite(value):
                raise NumericalError(f"non-finite loss at fold {fold} epoch {epoch}")
            backward(loss)
            opt.step()
            losses.append(value)

        val = validation_dice(model, val_records, num_classes, tc.threshold)
        improved, opt.lr, stop = protocol.observe(val)
        if improved:
            best_state = model.snapshot()
            log.best_val_dice = val
            if checkpoint_cb is not None:
                checkpoint_cb(model, epoch, val)
        log.entries.append(TrainLogEntry(fold, epoch, float(np.mean(losses)),
                                         val, opt.lr, improved))
        if progress:
            print(f"fold {fold} epoch {epoch:3d}  loss {np.mean(losses):.4f}  "
                  f"val dice {val:.4f}  lr {opt.lr:.2e}", file=sys.stderr)
        if stop:
            log.stopped_early = True
            break
    return best_state, log


def _fold_seed(run_seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([run_seed, fold]).generate_state(1)[0])


def merge_reports(reports: list[MetricsReport]) -> MetricsReport:
    """Average row fields across evaluations (folds x runs)."""
    names: list[str] = []
    for rep in reports:
        for name in rep.rows:
            if name not in names:
                names.append(name)
    rows = {}
    for name in names:
        rs = [r.rows[name] for r in reports if name in r.rows]
        aucs = [r.auc for r in rs if r.auc is not None]
        rows[name] = MetricsRow(
            dice=float(np.mean([r.dice for r in rs])),
            jaccard=float(np.mean([r.jaccard for r in rs])),
            auc=float(np.mean(aucs)) if aucs else None,
            accuracy=float(np.mean([r.accuracy for r in rs])),
            n_samples=sum(r.n_samples for r in rs),
        )
    return MetricsReport(rows, {})


def run_experiment(manifest: DatasetManifest, model_cfg: ModelConfig,
                   tc: TrainConfig, folds: Optional[list[int]] = None,
                   progress: bool = False,
                   artifact_cb: Optional[Callable] = None) -> MetricsReport:
    """The full protocol: for each seed, train every fold fresh, evaluate its
    best checkpoint on the held-out test set, and average everything.

    ``artifact_cb(seed, fold, model, best_state, log, report)`` lets the CLI
    persist checkpoints and logs without coupling the loop to file formats.
    """
    folds = list(range(manifest.n_folds)) if folds is None else list(folds)
    test_records = [e.record for e in manifest.test()]
    num_classes = manifest.num_classes
    reports = []
    for seed in tc.seeds:
        for fold in folds:
            train, val = manifest.fold_split(fold)
            if manifest.ros_per_fold:
                train = random_oversample(train, _fold_seed(seed, fold) ^ 0xB00)
            model = DoodleSegNet(model_cfg, seed=_fold_seed(seed, fold))
            rng = np.random.default_rng(np.random.SeedSequence([seed, fold, 0xBA7C]))
            best_state, log = train_fold(model, train, val, num_classes, tc,
                                         rng, fold=fold, progress=progress)
            model.load_state(best_state)
            report = evaluate(model, test_records, manifest.class_names,
                              threshold=tc.threshold,
                              provenance={"seed": seed, "fold": fold})
            reports.append(report)
            if artifact_cb is not None:
                artifact_cb(seed, fold, model, best_state, log, report)
    merged = merge_reports(reports)
    merged.provenance = {
        "seeds": list(tc.seeds), "folds": folds, "threshold": tc.threshold,
        "evaluations": len(reports), "n_test_samples": len(test_records),
    }
    return merged
