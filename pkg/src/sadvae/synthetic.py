"""Desk-scale synthetic dataset generator.

Each class c owns a fixed semantic code s_c. A skeleton feature is

    f_x = A @ [s_c + eps ; u] + b

with eps Gaussian observation noise on the semantic block and u a
per-sample nuisance vector drawn independently of the class: one of a few
"style" prototypes plus a uniform offset, mimicking stylistic variation
(actor, camera) that is loud but carries no class information. A is a
fixed orthonormal-column mixing map, so both blocks survive at full rank.

Text features are a second orthonormal projection of the semantic codes,
one row per class, plus a little noise.

Generation is a pure function of the arguments: same seed, same bytes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import seeding
from .data import DatasetManifest, save_manifest
from .errors import ArgumentError
from .formats import write_feature_matrix, write_labels

STYLE_PROTOTYPES = 5
STYLE_SCALE = 4.0
STYLE_OFFSET_HALF_WIDTH = 0.5
TEXT_NOISE_SCALE = 0.01


@dataclass
class SyntheticGroundTruth:
    """Generator internals exposed for oracle-style probes in tests."""

    class_codes: np.ndarray  # (num_classes, signal_dim)
    mixing: np.ndarray  # (d_x, signal_dim + nuisance_dim), orthonormal columns
    offset: np.ndarray  # (d_x,)
    col_mean: np.ndarray  # (d_x,) standardization applied to the raw mix
    col_std: np.ndarray  # (d_x,)
    signal: np.ndarray  # (n, signal_dim) per-sample semantic block incl. noise
    nuisance: np.ndarray  # (n, nuisance_dim) per-sample style block
    labels: np.ndarray  # (n,)
    text_basis: np.ndarray  # (d_y, signal_dim)

    def unmix(self, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Invert standardization and mixing: recover [signal ; nuisance]."""
        raw = np.asarray(features, dtype=np.float64) * self.col_std + self.col_mean
        source = (raw - self.offset) @ self.mixing
        s = self.class_codes.shape[1]
        return source[:, :s], source[:, s:]


def _orthonormal_columns(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q[:, :cols]


def generate_synthetic_dataset(
    out_dir,
    num_classes: int = 40,
    samples_per_class: int = 200,
    d_x: int = 64,
    d_y: int = 32,
    signal_dim: int = 16,
    nuisance_dim: int = 48,
    noise_scale: float = 0.5,
    seed: int = 0,
) -> tuple[Path, SyntheticGroundTruth]:
    """Write manifest + feature/label files into out_dir; returns
    (manifest path, ground truth)."""
    if min(num_classes, samples_per_class, d_x, d_y, signal_dim) < 1 or nuisance_dim < 0:
        raise ArgumentError("all synthetic dataset counts must be >= 1 (nuisance_dim >= 0)")
    if signal_dim + nuisance_dim > d_x:
        raise ArgumentError(
            f"signal_dim + nuisance_dim = {signal_dim + nuisance_dim} exceeds d_x = {d_x}"
        )
    if signal_dim > d_y:
        raise ArgumentError(f"signal_dim = {signal_dim} exceeds d_y = {d_y}")
    if noise_scale < 0:
        raise ArgumentError("noise_scale must be non-negative")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = seeding.stream(seed, seeding.SYNTH)
    n = num_classes * samples_per_class

    # Fixed draw order; changing it changes every seeded dataset.
    class_codes = rng.standard_normal((num_classes, signal_dim))
    mixing = _orthonormal_columns(d_x, signal_dim + nuisance_dim, rng)
    offset = rng.standard_normal(d_x)
    prototypes = rng.standard_normal((STYLE_PROTOTYPES, nuisance_dim)) * STYLE_SCALE
    style_pick = rng.integers(0, STYLE_PROTOTYPES, size=n)
    style_offsets = rng.uniform(
        -STYLE_OFFSET_HALF_WIDTH, STYLE_OFFSET_HALF_WIDTH, size=(n, nuisance_dim)
    )
    signal_noise = rng.standard_normal((n, signal_dim)) * noise_scale
    text_basis = _orthonormal_columns(d_y, signal_dim, rng)
    text_noise = rng.standard_normal((num_classes, d_y)) * TEXT_NOISE_SCALE

    labels = np.repeat(np.arange(num_classes, dtype=np.uint32), samples_per_class)
    signal = class_codes[labels] + signal_noise
    nuisance = prototypes[style_pick] + style_offsets
    raw = np.concatenate([signal, nuisance], axis=1) @ mixing.T + offset
    # standardize columns to the unit scale typical of extractor features
    col_mean = raw.mean(axis=0)
    col_std = raw.std(axis=0)
    col_std[col_std == 0] = 1.0
    skeleton = ((raw - col_mean) / col_std).astype(np.float32)
    text = (class_codes @ text_basis.T + text_noise).astype(np.float32)

    write_feature_matrix(skeleton, out_dir / "skeleton.sadv")
    write_labels(labels, out_dir / "labels.sadl")
    write_feature_matrix(text, out_dir / "text.sadv")
    manifest = DatasetManifest(
        classes=[(c, f"class_{c:03d}") for c in range(num_classes)],
        skeleton_features="skeleton.sadv",
        skeleton_labels="labels.sadl",
        text_features="text.sadv",
        d_x=d_x,
        d_y=d_y,
        base_dir=out_dir,
    )
    manifest_path = out_dir / "manifest.json"
    save_manifest(manifest, manifest_path)
    truth = SyntheticGroundTruth(
        class_codes=class_codes,
        mixing=mixing,
        offset=offset,
        col_mean=col_mean,
        col_std=col_std,
        signal=signal,
        nuisance=nuisance,
        labels=labels,
        text_basis=text_basis,
    )
    return manifest_path, truth
