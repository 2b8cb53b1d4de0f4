"""Shared helpers for tests that need tiny datasets or models."""

import numpy as np

# pass/fail lines collected by the acceptance suite, echoed after the run
ACCEPTANCE_LINES: list[str] = []

from doodleseg.data import SampleRecord
from doodleseg.model import ModelConfig

TINY_CFG = dict(input_side=16, stage_filters=(2, 4, 8, 16, 32))


def tiny_config(**overrides):
    kw = dict(TINY_CFG)
    kw.update(overrides)
    return ModelConfig(**kw)


def tiny_record(rec_id, class_id, side=16, seed=0, num_classes=3):
    """Minimal synthetic-ish record: noisy background, one bright square
    target, a 2x2 doodle blob inside it."""
    rng = np.random.default_rng(seed)
    image = rng.integers(20, 60, (side, side)).astype(np.uint8)
    mask = np.zeros((side, side), np.uint8)
    size = max(4, side // 4)
    r = int(rng.integers(1, side - size - 1))
    c = int(rng.integers(1, side - size - 1))
    image[r:r + size, c:c + size] = rng.integers(140, 220)
    mask[r:r + size, c:c + size] = 1
    doodle = np.zeros((side, side), np.uint8)
    value = int(round(255 * (class_id + 1) / num_classes))
    doodle[r + 1:r + 3, c + 1:c + 3] = value
    return SampleRecord(rec_id, class_id, image, doodle, mask)


def tiny_records(n_per_class, num_classes=3, side=16, seed=0):
    recs = []
    for cid in range(num_classes):
        for i in range(n_per_class):
            recs.append(tiny_record(f"t{cid}-{i}", cid, side=side,
                                    seed=seed * 100_003 + cid * 1009 + i,
                                    num_classes=num_classes))
    return recs
