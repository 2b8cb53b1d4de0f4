"""Class balancing and the stratified split / fold protocol."""

from __future__ import annotations

from collections import defaultdict

import numpy as np

from .records import SampleRecord, ManifestEntry, DatasetManifest, DatasetError


class EmptyClassError(DatasetError):
    pass


class TooFewSamplesError(DatasetError):
    pass


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_oversample(records: list[SampleRecord], seed,
                      num_classes: int | None = None) -> list[SampleRecord]:
    """Duplicate random samples of minority classes until every class count
    equals the max class count. Originals are all retained; duplicates are
    drawn uniformly with replacement."""
    rng = _rng(seed)
    groups: dict[int, list[SampleRecord]] = defaultdict(list)
    for rec in records:
        groups[rec.class_id].append(rec)
    if num_classes is not None:
        missing = sorted(set(range(num_classes)) - set(groups))
        if missing:
            raise EmptyClassError(f"classes with no records: {missing}")
    if not groups:
        raise EmptyClassError("no records to oversample")
    target = max(len(g) for g in groups.values())
    out = list(records)
    for cid in sorted(groups):
        grp = groups[cid]
        extra = target - len(grp)
        if extra:
            for idx in rng.integers(0, len(grp), size=extra):
                out.append(grp[idx])
    return out


def split_and_fold(records: list[SampleRecord], class_names: list[str], seed: int,
                   n_folds: int = 5, test_fraction: float = 0.2,
                   oversample: bool = True,
                   ros_per_fold: bool = False) -> DatasetManifest:
    """Stratified 80:20 trainval/test split, oversampling on trainval only,
    then per-class round-robin fold assignment after a seeded shuffle.

    With ``ros_per_fold`` the manifest keeps the raw trainval (no duplicate
    entries); balancing then happens inside each fold's training split at
    training time, avoiding duplicate train/val leakage.
    """
    rng = np.random.default_rng(np.random.SeedSequence([0xDA7A, seed]))
    by_class: dict[int, list[SampleRecord]] = defaultdict(list)
    for rec in records:
        by_class[rec.class_id].append(rec)

    test_entries: list[ManifestEntry] = []
    trainval: list[SampleRecord] = []
    for cid in sorted(by_class):
        grp = list(by_class[cid])
        rng.shuffle(grp)
        n_test = round(test_fraction * len(grp))
        if len(grp) - n_test < n_folds:
            raise TooFewSamplesError(
                f"class {class_names[cid]}: {len(grp) - n_test} trainval records "
                f"< {n_folds} folds")
        test_entries.extend(ManifestEntry(r, "test") for r in grp[:n_test])
        trainval.extend(grp[n_test:])

    if oversample and not ros_per_fold:
        trainval = random_oversample(trainval, rng)

    trainval_entries: list[ManifestEntry] = []
    by_class = defaultdict(list)
    for rec in trainval:
        by_class[rec.class_id].append(rec)
    for cid in sorted(by_class):
        grp = list(by_class[cid])
        rng.shuffle(grp)
        for i, rec in enumerate(grp):
            trainval_entries.append(ManifestEntry(rec, "trainval", fold=i % n_folds))

    return DatasetManifest(trainval_entries + test_entries, list(class_names),
                           seed=seed, oversampled=oversample and not ros_per_fold,
                           ros_per_fold=ros_per_fold, n_folds=n_folds)
