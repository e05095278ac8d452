"""Accuracy metrics and the repeated random-split experimental protocol."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import seeding
from .classifiers import GzslPredictor, build_predictor, calibrate_gzsl, predict_gzsl, predict_zsl
from .data import ClassSplit, Dataset, RunConfig, make_random_split
from .errors import ArgumentError, DataError


@dataclass
class GzslReport:
    """Seen/unseen sample accuracies (percent) and their harmonic mean."""

    acc_seen: float
    acc_unseen: float
    harmonic_mean: float


def harmonic_mean(acc_s: float, acc_u: float) -> float:
    """2ab / (a + b); 0 when both accuracies are 0."""
    if not (0 <= acc_s <= 100 and 0 <= acc_u <= 100):
        raise ArgumentError("accuracies must be percentages in [0, 100]")
    if acc_s + acc_u == 0:
        return 0.0
    return 2.0 * acc_s * acc_u / (acc_s + acc_u)


def zsl_accuracy(predictor: GzslPredictor, f_x: np.ndarray, labels: np.ndarray) -> float:
    """Percent of unseen-class samples assigned their true class."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ArgumentError("zsl_accuracy: empty test set")
    if not np.isin(labels, predictor.unseen.class_ids).all():
        raise DataError("zsl_accuracy: labels outside the unseen class set")
    predicted = predict_zsl(predictor, np.atleast_2d(f_x))
    return float((predicted == labels).mean() * 100.0)


def gzsl_metrics(
    predictor: GzslPredictor, f_x: np.ndarray, labels: np.ndarray, split: ClassSplit
) -> GzslReport:
    """Sample-level accuracy over the seen and unseen test partitions."""
    labels = np.asarray(labels)
    f_x = np.atleast_2d(f_x)
    known = split.seen_ids | split.unseen_ids
    if not all(int(c) in known for c in np.unique(labels)):
        raise DataError("gzsl_metrics: labels outside the split's classes")
    seen_mask = np.isin(labels, sorted(split.seen_ids))
    unseen_mask = ~seen_mask
    if seen_mask.sum() == 0 or unseen_mask.sum() == 0:
        raise ArgumentError("gzsl_metrics: need test samples from both partitions")
    predicted, _, _ = predict_gzsl(predictor, f_x)
    acc_seen = float((predicted[seen_mask] == labels[seen_mask]).mean() * 100.0)
    acc_unseen = float((predicted[unseen_mask] == labels[unseen_mask]).mean() * 100.0)
    return GzslReport(
        acc_seen=acc_seen,
        acc_unseen=acc_unseen,
        harmonic_mean=harmonic_mean(acc_seen, acc_unseen),
    )


def per_class_accuracy(predictor: GzslPredictor, f_x: np.ndarray, labels: np.ndarray) -> dict[int, float]:
    """Hit rate per true class; classes absent from the test set are omitted.

    Uses the fused GZSL rule when the predictor has a gate, otherwise the
    ZSL rule.
    """
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ArgumentError("per_class_accuracy: empty test set")
    if predictor.gate is not None:
        predicted, _, _ = predict_gzsl(predictor, np.atleast_2d(f_x))
    else:
        predicted = predict_zsl(predictor, np.atleast_2d(f_x))
    out: dict[int, float] = {}
    for cid in np.unique(labels):
        mask = labels == cid
        out[int(cid)] = float((predicted[mask] == cid).mean() * 100.0)
    return out


# ---------------------------------------------------------------------------
# Random-split protocol
# ---------------------------------------------------------------------------

@dataclass
class RepeatResult:
    repeat: int
    split_seed: int
    unseen_ids: list[int]
    zsl: float
    gzsl: GzslReport


@dataclass
class ProtocolReport:
    repeats: list[RepeatResult]
    mean_zsl: float
    mean_acc_seen: float
    mean_acc_unseen: float
    mean_harmonic_mean: float


def evaluate_full(
    dataset: Dataset,
    split: ClassSplit,
    config: RunConfig,
    disc_enabled: bool = True,
) -> tuple[float, GzslReport]:
    """Train, calibrate, and measure one (dataset, split, config) setting.

    Unseen-class samples are never touched during training; seen-class
    accuracy is measured on the training samples (the desk-scale datasets
    carry no held-out sample split).
    """
    from .trainer import train

    split.validate_for_eval()
    result = train(dataset, split, config, disc_enabled=disc_enabled)
    rng_cls = seeding.stream(config.seed, seeding.CLASSIFIER)
    rng_cal = seeding.stream(config.seed, seeding.CALIBRATE)
    gate = calibrate_gzsl(dataset, split, config, rng_cal, disc_enabled=disc_enabled)
    predictor = build_predictor(result.state, dataset, split, config, rng_cls, gate=gate)

    unseen_mask = np.isin(dataset.labels, sorted(split.unseen_ids))
    zsl = zsl_accuracy(predictor, dataset.skeleton[unseen_mask], dataset.labels[unseen_mask])
    gzsl = gzsl_metrics(predictor, dataset.skeleton, dataset.labels, split)
    return zsl, gzsl


def run_random_split_protocol(
    dataset: Dataset,
    num_unseen: int,
    num_repeats: int,
    config: RunConfig,
    base_seed: int,
    disc_enabled: bool = True,
) -> ProtocolReport:
    """Repeat (fresh random split -> train -> calibrate -> evaluate) and
    average the per-repeat metrics arithmetically."""
    if num_repeats < 1:
        raise ArgumentError("num_repeats must be >= 1")
    repeats: list[RepeatResult] = []
    for r in range(num_repeats):
        split_seed = base_seed + r
        split = make_random_split(dataset.manifest, num_unseen, split_seed)
        repeat_config = replace(config, seed=config.seed + r)
        zsl, gzsl = evaluate_full(dataset, split, repeat_config, disc_enabled=disc_enabled)
        repeats.append(
            RepeatResult(
                repeat=r,
                split_seed=split_seed,
                unseen_ids=sorted(split.unseen_ids),
                zsl=zsl,
                gzsl=gzsl,
            )
        )
    return ProtocolReport(
        repeats=repeats,
        mean_zsl=float(np.mean([r.zsl for r in repeats])),
        mean_acc_seen=float(np.mean([r.gzsl.acc_seen for r in repeats])),
        mean_acc_unseen=float(np.mean([r.gzsl.acc_unseen for r in repeats])),
        mean_harmonic_mean=float(np.mean([r.gzsl.harmonic_mean for r in repeats])),
    )
