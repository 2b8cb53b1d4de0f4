"""Sample records, dataset manifests, and the on-disk dataset convention.

Datasets live in ``root/<class_name>/{images,doodles,masks}/<id>.png`` as
8-bit grayscale PNGs. The manifest is a JSON file listing ids, classes,
split and fold labels, and the seed that produced them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

MANIFEST_FORMAT = "doodleseg-manifest-v1"


class DatasetError(ValueError):
    pass


@dataclass
class SampleRecord:
    """One training triple plus class identity. Rasters are H x W uint8;
    mask holds {0, 1}; doodle non-zero pixels all carry one value."""

    id: str
    class_id: int
    image: np.ndarray
    doodle: np.ndarray
    mask: np.ndarray

    def validate(self) -> None:
        if not (self.image.shape == self.doodle.shape == self.mask.shape):
            raise DatasetError(
                f"record {self.id}: raster dims differ "
                f"{self.image.shape}/{self.doodle.shape}/{self.mask.shape}")
        bad = set(np.unique(self.mask)) - {0, 1}
        if bad:
            raise DatasetError(f"record {self.id}: mask values {sorted(bad)} not in {{0,1}}")
        values = np.unique(self.doodle[self.doodle > 0])
        if len(values) > 1:
            raise DatasetError(f"record {self.id}: doodle carries multiple values {values}")


@dataclass
class ManifestEntry:
    record: SampleRecord
    split: str                 # "trainval" | "test"
    fold: Optional[int] = None  # folds label trainval entries only

    @property
    def id(self) -> str:
        return self.record.id

    @property
    def class_id(self) -> int:
        return self.record.class_id


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    class_names: list[str]
    seed: Optional[int] = None
    oversampled: bool = False
    ros_per_fold: bool = False
    n_folds: int = 5

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def trainval(self) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == "trainval"]

    def test(self) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == "test"]

    def fold_split(self, fold: int) -> tuple[list[SampleRecord], list[SampleRecord]]:
        """(train, val) records for one cross-validation fold."""
        train = [e.record for e in self.trainval() if e.fold != fold]
        val = [e.record for e in self.trainval() if e.fold == fold]
        return train, val

    def to_json(self) -> dict:
        return {
            "format": MANIFEST_FORMAT,
            "seed": self.seed,
            "class_names": list(self.class_names),
            "oversampled": self.oversampled,
            "ros_per_fold": self.ros_per_fold,
            "n_folds": self.n_folds,
            "entries": [
                {"id": e.id, "class_id": e.class_id, "split": e.split, "fold": e.fold}
                for e in self.entries
            ],
        }


# -- directory I/O -----------------------------------------------------------


def _save_png(path: Path, arr: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr.astype(np.uint8), mode="L").save(path)


def _load_png(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.uint8)


def write_dataset(records: list[SampleRecord], class_names: list[str],
                  root: Path) -> None:
    root = Path(root)
    seen = set()
    for rec in records:
        if rec.id in seen:
            continue
        seen.add(rec.id)
        cdir = root / class_names[rec.class_id]
        _save_png(cdir / "images" / f"{rec.id}.png", rec.image)
        _save_png(cdir / "doodles" / f"{rec.id}.png", rec.doodle)
        _save_png(cdir / "masks" / f"{rec.id}.png", rec.mask * 255)


def load_record(root: Path, class_names: list[str], class_id: int,
                rec_id: str) -> SampleRecord:
    cdir = Path(root) / class_names[class_id]
    image = _load_png(cdir / "images" / f"{rec_id}.png")
    doodle = _load_png(cdir / "doodles" / f"{rec_id}.png")
    mask = (_load_png(cdir / "masks" / f"{rec_id}.png") > 0).astype(np.uint8)
    rec = SampleRecord(rec_id, class_id, image, doodle, mask)
    rec.validate()
    return rec


def load_dataset(root: Path) -> tuple[list[SampleRecord], list[str]]:
    """Scan the directory convention; classes are the sorted subdirectories."""
    root = Path(root)
    class_names = sorted(p.name for p in root.iterdir()
                         if p.is_dir() and (p / "images").is_dir())
    if not class_names:
        raise DatasetError(f"no class directories under {root}")
    records = []
    for cid, name in enumerate(class_names):
        for img_path in sorted((root / name / "images").glob("*.png")):
            records.append(load_record(root, class_names, cid, img_path.stem))
    return records, class_names


def save_manifest(manifest: DatasetManifest, path: Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(manifest.to_json(), indent=1))


def load_manifest(path: Path, root: Path) -> DatasetManifest:
    data = json.loads(Path(path).read_text())
    if data.get("format") != MANIFEST_FORMAT:
        raise DatasetError(f"unrecognized manifest format in {path}")
    class_names = data["class_names"]
    cache: dict[str, SampleRecord] = {}
    entries = []
    for e in data["entries"]:
        rec = cache.get(e["id"])
        if rec is None:
            rec = load_record(root, class_names, e["class_id"], e["id"])
            cache[rec.id] = rec
        entries.append(ManifestEntry(rec, e["split"], e["fold"]))
    return DatasetManifest(entries, class_names, seed=data.get("seed"),
                           oversampled=data.get("oversampled", False),
                           ros_per_fold=data.get("ros_per_fold", False),
                           n_folds=data.get("n_folds", 5))
