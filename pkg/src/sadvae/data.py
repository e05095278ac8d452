"""Dataset manifests, class splits, run configuration, and dataset loading.

A dataset on disk is a JSON manifest plus three binary files: per-sample
skeleton features, per-sample labels, and per-class text features (row
index == class id). Relative paths in the manifest resolve against the
manifest's directory.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import seeding
from .errors import ArgumentError, DataError, FormatError
from .formats import read_feature_matrix, read_labels


@dataclass
class DatasetManifest:
    classes: list[tuple[int, str]]  # (class_id, human-readable label)
    skeleton_features: str
    skeleton_labels: str
    text_features: str
    d_x: int
    d_y: int
    base_dir: Path = field(default=Path("."), compare=False)

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def class_ids(self) -> list[int]:
        return [cid for cid, _ in self.classes]

    def validate(self) -> None:
        ids = self.class_ids
        if sorted(ids) != list(range(len(ids))):
            raise DataError(
                "manifest class ids must be exactly 0..C-1 "
                "(text feature row index == class id)"
            )
        if self.d_x < 1 or self.d_y < 1:
            raise DataError("manifest feature dims must be >= 1")

    def resolve(self, rel: str) -> Path:
        return self.base_dir / rel


def save_manifest(manifest: DatasetManifest, path) -> None:
    doc = {
        "classes": [{"id": cid, "label": label} for cid, label in manifest.classes],
        "skeleton_features": manifest.skeleton_features,
        "skeleton_labels": manifest.skeleton_labels,
        "text_features": manifest.text_features,
        "d_x": manifest.d_x,
        "d_y": manifest.d_y,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    try:
        manifest = DatasetManifest(
            classes=[(int(c["id"]), str(c["label"])) for c in doc["classes"]],
            skeleton_features=doc["skeleton_features"],
            skeleton_labels=doc["skeleton_labels"],
            text_features=doc["text_features"],
            d_x=int(doc["d_x"]),
            d_y=int(doc["d_y"]),
            base_dir=path.parent,
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: missing or malformed manifest key: {exc}") from exc
    manifest.validate()
    return manifest


@dataclass
class Dataset:
    """Fully loaded and validated dataset."""

    manifest: DatasetManifest
    skeleton: np.ndarray  # (num_samples, d_x) float32
    labels: np.ndarray  # (num_samples,) uint32
    text: np.ndarray  # (num_classes, d_y) float32

    @property
    def d_x(self) -> int:
        return self.skeleton.shape[1]

    @property
    def d_y(self) -> int:
        return self.text.shape[1]


def load_dataset(manifest_path) -> Dataset:
    manifest = load_manifest(manifest_path)
    skeleton = read_feature_matrix(manifest.resolve(manifest.skeleton_features))
    labels = read_labels(manifest.resolve(manifest.skeleton_labels))
    text = read_feature_matrix(manifest.resolve(manifest.text_features))
    if text.shape[0] != manifest.num_classes:
        raise DataError(
            f"text feature matrix has {text.shape[0]} rows for {manifest.num_classes} classes"
        )
    if skeleton.shape[1] != manifest.d_x or text.shape[1] != manifest.d_y:
        raise DataError("feature dims do not match the manifest's d_x/d_y")
    if labels.shape[0] != skeleton.shape[0]:
        raise DataError(
            f"{labels.shape[0]} labels for {skeleton.shape[0]} skeleton samples"
        )
    if labels.size and labels.max() >= manifest.num_classes:
        raise DataError(f"label {labels.max()} out of range for {manifest.num_classes} classes")
    return Dataset(manifest=manifest, skeleton=skeleton, labels=labels, text=text)


# ---------------------------------------------------------------------------
# Class splits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassSplit:
    seen_ids: frozenset
    unseen_ids: frozenset

    def __post_init__(self):
        if self.seen_ids & self.unseen_ids:
            raise ArgumentError("seen and unseen class sets overlap")

    def validate_for_eval(self) -> None:
        if not self.unseen_ids:
            raise ArgumentError("evaluation requires a nonempty unseen class set")


def make_random_split(manifest: DatasetManifest, num_unseen: int, seed: int) -> ClassSplit:
    """Uniform sample of num_unseen unseen classes, driven only by seed."""
    ids = sorted(manifest.class_ids)
    if not 0 < num_unseen < len(ids):
        raise ArgumentError(
            f"num_unseen must be in (0, {len(ids)}), got {num_unseen}"
        )
    rng = seeding.stream(seed, seeding.SPLIT)
    unseen = rng.choice(np.asarray(ids), size=num_unseen, replace=False)
    unseen_set = frozenset(int(u) for u in unseen)
    return ClassSplit(
        seen_ids=frozenset(ids) - unseen_set,
        unseen_ids=unseen_set,
    )


def save_split(split: ClassSplit, path) -> None:
    doc = {"seen_ids": sorted(split.seen_ids), "unseen_ids": sorted(split.unseen_ids)}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_split(path) -> ClassSplit:
    doc = json.loads(Path(path).read_text())
    return ClassSplit(
        seen_ids=frozenset(int(i) for i in doc["seen_ids"]),
        unseen_ids=frozenset(int(i) for i in doc["unseen_ids"]),
    )


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    """Training hyperparameters. Defaults follow the engine's reference
    setting for a 55/5 class split; override per dataset."""

    beta_x: float = 0.023
    beta_y: float = 0.011
    lambda_2: float = 0.011
    learning_rate: float = 3.39e-5
    batch_size: int = 32
    epochs: int = 10
    n_d: int = 5
    dim_r: int = 160
    dim_v: int = 8
    temperature: float = 2.0
    samples_per_class: int = 200
    seed: int = 0

    def validate(self) -> None:
        if min(self.beta_x, self.beta_y, self.lambda_2) < 0:
            raise ArgumentError("loss weights must be non-negative")
        if self.learning_rate <= 0:
            raise ArgumentError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs < 0 or self.n_d < 1:
            raise ArgumentError("batch_size >= 1, epochs >= 0, n_d >= 1 required")
        # dim_v == 0 is the "no style head" degenerate configuration
        if self.dim_r < 1 or self.dim_v < 0:
            raise ArgumentError("dim_r >= 1 and dim_v >= 0 required")
        if self.temperature <= 0:
            raise ArgumentError("temperature must be positive")
        if self.samples_per_class < 1:
            raise ArgumentError("samples_per_class must be >= 1")


def save_config(config: RunConfig, path) -> None:
    Path(path).write_text(json.dumps(asdict(config), indent=2) + "\n")


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    known = {f for f in RunConfig.__dataclass_fields__}
    unknown = set(doc) - known
    if unknown:
        raise FormatError(f"{path}: unknown config keys {sorted(unknown)}")
    config = RunConfig(**doc)
    config.validate()
    return config
