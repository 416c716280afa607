"""Manifest-driven dataset loading: class filtering, seeded split, decode + resize."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageFormatError, ManifestError
from .imaging import resize_bilinear

log = logging.getLogger(__name__)

INPUT_SIZE = 224


@dataclass
class DatasetManifest:
    """(path, label) records; ``classes`` is the sorted label set, index = position."""

    paths: list
    labels: list
    root: Path | None = None
    classes: list = field(init=False)

    def __post_init__(self):
        if len(self.paths) != len(self.labels):
            raise ManifestError("paths and labels differ in length")
        seen = {}
        for row, p in enumerate(self.paths, start=1):
            if p in seen:
                raise ManifestError(f"duplicate path {p!r} (rows {seen[p]} and {row})", rows=[seen[p], row])
            seen[p] = row
        empty = [i for i, l in enumerate(self.labels, start=1) if not l]
        if empty:
            raise ManifestError(f"empty label in rows {empty}", rows=empty)
        self.classes = sorted(set(self.labels))

    def __len__(self):
        return len(self.paths)

    @property
    def label_indices(self):
        index = {c: i for i, c in enumerate(self.classes)}
        return [index[l] for l in self.labels]

    def subset(self, rows):
        return DatasetManifest([self.paths[i] for i in rows], [self.labels[i] for i in rows], self.root)

    def resolve(self, path):
        p = Path(path)
        if self.root is not None and not p.is_absolute():
            p = Path(self.root) / p
        return p


@dataclass
class Dataset:
    images: np.ndarray  # (N, 1, H, W), values in [0, 1]
    labels: np.ndarray  # (N,) int
    class_names: list

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.images) != len(self.labels):
            raise ValueError(f"{len(self.images)} images but {len(self.labels)} labels")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise ValueError("label index outside the class list")

    def __len__(self):
        return len(self.labels)

    def subset(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.images[rows], self.labels[rows], list(self.class_names))


def load(manifest_path, image_root=None, check_files=True) -> DatasetManifest:
    """Parse a ``path,label`` CSV.  Image paths are relative to ``image_root``
    (default: the manifest's directory)."""
    manifest_path = Path(manifest_path)
    root = Path(image_root) if image_root is not None else manifest_path.parent
    try:
        with open(manifest_path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as e:
        raise ManifestError(f"cannot read manifest {manifest_path}: {e}") from e
    if not rows or [c.strip() for c in rows[0]] != ["path", "label"]:
        raise ManifestError(f"{manifest_path}: header must be 'path,label'")
    paths, labels, bad = [], [], []
    for n, row in enumerate(rows[1:], start=1):
        if not row:
            continue
        if len(row) != 2 or not row[0].strip():
            bad.append(n)
            continue
        paths.append(row[0].strip())
        labels.append(row[1].strip())
    if bad:
        raise ManifestError(f"{manifest_path}: malformed rows {bad}", rows=bad)
    manifest = DatasetManifest(paths, labels, root)
    if not manifest.paths:
        log.warning("manifest %s has no records", manifest_path)
    if check_files:
        missing = [n for n, p in enumerate(manifest.paths, start=1) if not manifest.resolve(p).is_file()]
        if missing:
            raise ManifestError(f"{manifest_path}: missing image files in rows {missing}", rows=missing)
    return manifest


def filter_min_count(manifest: DatasetManifest, min_count: int = 50) -> DatasetManifest:
    """Drop every class with fewer than ``min_count`` records."""
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    counts = {}
    for l in manifest.labels:
        counts[l] = counts.get(l, 0) + 1
    keep = [i for i, l in enumerate(manifest.labels) if counts[l] >= min_count]
    if not keep:
        raise ManifestError(f"no class has at least {min_count} examples")
    return manifest.subset(keep)


def split(manifest, train_fraction: float = 0.9, seed=0):
    """Seeded uniform random split; train gets ``round(fraction * N)`` records (half rounds up)."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n = len(manifest)
    n_train = int(np.floor(train_fraction * n + 0.5))
    if n_train == 0 or n_train == n:
        raise ManifestError(f"split of {n} records at {train_fraction} leaves one side empty")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    order = rng.permutation(n)
    train_rows, test_rows = np.sort(order[:n_train]), np.sort(order[n_train:])
    return manifest.subset(train_rows), manifest.subset(test_rows)


def decode_and_resize(path, size: int = INPUT_SIZE) -> np.ndarray:
    """Decode an 8-bit PNG/PGM to a ``(1, size, size)`` array in [0, 1].

    Colour images are reduced to the mean of their RGB channels.  Aspect ratio
    is not preserved.
    """
    try:
        with Image.open(path) as im:
            if im.format not in ("PNG", "PPM"):
                raise ImageFormatError(f"{path}: unsupported format {im.format}")
            im.load()
            if im.mode in ("L", "P", "LA", "RGB", "RGBA"):
                if im.mode == "P":
                    im = im.convert("RGB")
                arr = np.asarray(im, dtype=np.float64)
            else:
                raise ImageFormatError(f"{path}: unsupported pixel mode {im.mode}")
    except (UnidentifiedImageError, OSError, SyntaxError) as e:
        raise ImageFormatError(f"{path}: cannot decode image: {e}") from e
    if arr.ndim == 3:
        arr = arr[..., :3].mean(axis=-1) if arr.shape[-1] >= 3 else arr[..., 0]
    arr = arr / 255.0
    out = resize_bilinear(arr, size, size)
    return np.clip(out, 0.0, 1.0)[None]


def build_dataset(manifest: DatasetManifest, size: int = INPUT_SIZE, classes=None) -> Dataset:
    """Decode every record.  ``classes`` fixes the label table (e.g. the training split's)."""
    classes = list(classes) if classes is not None else list(manifest.classes)
    index = {c: i for i, c in enumerate(classes)}
    unknown = sorted(set(manifest.labels) - set(index))
    if unknown:
        raise ManifestError(f"labels not in the class table: {unknown}")
    images = np.zeros((len(manifest), 1, size, size))
    for i, p in enumerate(manifest.paths):
        images[i] = decode_and_resize(manifest.resolve(p), size)
    return Dataset(images, [index[l] for l in manifest.labels], classes)
