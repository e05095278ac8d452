"""Ablation runner and a latent-dependence diagnostic.

Three variants of the method are compared with identical data, split, and
seed:

* ``naive`` - no style head (its width is 0) and no discriminator; a
  single latent of the full semantic width carries both reconstruction
  and alignment.
* ``fd`` - disentangled heads, discriminator disabled.
* ``fd_tc`` - the full method.

The dependence diagnostic is the largest canonical correlation between the
semantic and style posterior means over a batch: 0 for independent blocks,
1 when one is an affine image of the other, and invariant to invertible
affine reparameterizations of either block.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from . import seeding
from .classifiers import build_predictor, calibrate_gzsl
from .data import ClassSplit, Dataset, RunConfig
from .errors import ArgumentError
from .evaluation import GzslReport, gzsl_metrics, zsl_accuracy
from .model import ModelState, posterior_means

VARIANTS = ("naive", "fd", "fd_tc")


def variant_config(config: RunConfig, variant: str) -> tuple[RunConfig, bool]:
    """(adjusted config, discriminator enabled) for an ablation variant."""
    if variant == "naive":
        return replace(config, dim_v=0, lambda_2=0.0), False
    if variant == "fd":
        return replace(config, lambda_2=0.0), False
    if variant == "fd_tc":
        return config, True
    raise ArgumentError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


class LatentDependence(NamedTuple):
    value: float
    degenerate: bool


def latent_dependence(state: ModelState, f_x: np.ndarray) -> LatentDependence:
    """Largest canonical correlation between semantic and style posterior
    means. Zero-variance (or zero-width) blocks report 0 with the
    degenerate flag set."""
    f_x = np.atleast_2d(np.asarray(f_x))
    if f_x.shape[0] < 10:
        raise ArgumentError("latent_dependence needs a batch of at least 10 samples")
    semantic, style = posterior_means(state.skeleton_encoder, f_x)
    return max_canonical_correlation(semantic, style)


def _whitener(block: np.ndarray, tol: float = 1e-10) -> Optional[np.ndarray]:
    """Pseudo-inverse square root of a block's covariance (columns dropped
    below tol relative rank)."""
    if block.shape[1] == 0:
        return None
    centered = block - block.mean(axis=0)
    cov = centered.T @ centered / block.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    cutoff = tol * max(eigvals.max(initial=0.0), 0.0)
    keep = eigvals > cutoff
    if not keep.any():
        return None
    return eigvecs[:, keep] / np.sqrt(eigvals[keep])


def max_canonical_correlation(a: np.ndarray, b: np.ndarray) -> LatentDependence:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    wa = _whitener(a)
    wb = _whitener(b)
    if wa is None or wb is None:
        return LatentDependence(0.0, True)
    n = a.shape[0]
    ca = (a - a.mean(axis=0)) @ wa
    cb = (b - b.mean(axis=0)) @ wb
    cross = ca.T @ cb / n
    singular = np.linalg.svd(cross, compute_uv=False)
    return LatentDependence(float(np.clip(singular.max(initial=0.0), 0.0, 1.0)), False)


@dataclass
class VariantResult:
    variant: str
    zsl: float
    gzsl: Optional[GzslReport]
    dependence: LatentDependence


def run_ablation(
    dataset: Dataset,
    split: ClassSplit,
    config: RunConfig,
    variants=VARIANTS,
    include_gzsl: bool = True,
) -> list[VariantResult]:
    """Train and evaluate each variant on identical data, split, and seed.

    The batch-order stream depends only on the seed, so every variant sees
    the samples in the same order; parameter-init and noise streams differ
    with the architecture.
    """
    from .trainer import train

    variants = tuple(variants)
    if not variants:
        raise ArgumentError("run_ablation: no variants requested")
    split.validate_for_eval()
    results: list[VariantResult] = []
    for variant in variants:
        cfg, disc_enabled = variant_config(config, variant)
        trained = train(dataset, split, cfg, disc_enabled=disc_enabled)
        rng_cls = seeding.stream(cfg.seed, seeding.CLASSIFIER)
        gate = None
        if include_gzsl:
            rng_cal = seeding.stream(cfg.seed, seeding.CALIBRATE)
            gate = calibrate_gzsl(dataset, split, cfg, rng_cal, disc_enabled=disc_enabled)
        predictor = build_predictor(trained.state, dataset, split, cfg, rng_cls, gate=gate)

        unseen_mask = np.isin(dataset.labels, sorted(split.unseen_ids))
        zsl = zsl_accuracy(
            predictor, dataset.skeleton[unseen_mask], dataset.labels[unseen_mask]
        )
        gzsl = (
            gzsl_metrics(predictor, dataset.skeleton, dataset.labels, split)
            if include_gzsl
            else None
        )
        dependence = latent_dependence(trained.state, dataset.skeleton)
        results.append(
            VariantResult(variant=variant, zsl=zsl, gzsl=gzsl, dependence=dependence)
        )
    return results
