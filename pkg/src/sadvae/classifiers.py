"""Classification heads and the generalized zero-shot prediction rule.

Zero-shot: an unseen-class classifier is trained purely on latent draws
from the text encoder (one text feature per unseen class, many
reparameterized samples each) and applied to the semantic posterior mean
of a skeleton feature.

Generalized zero-shot: a seen-class classifier over raw skeleton features
and the unseen-class classifier are fused by a logistic domain gate. The
gate reads the temperature-softened top-k seen probabilities concatenated
with the unseen probabilities and outputs p_d, the probability that the
sample belongs to a seen class; the final distribution is
p_d * p_seen joined with (1 - p_d) * p_unseen. The gate is calibrated on a
proxy split carved out of the seen classes, with every other component
retrained on the remaining classes, so that it sees genuinely novel-class
feature statistics during its own training.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from . import autodiff as ad
from .autodiff import Tensor, backward, zero_grads
from .data import ClassSplit, Dataset, RunConfig
from .errors import ArgumentError, DataError, ShapeError
from .formats import PREDICTOR_MAGIC, read_tensor_container, write_tensor_container
from .model import (
    AffineLayer,
    ModelState,
    SkeletonEncoderParams,
    encode_text,
    posterior_means,
)

CLASSIFIER_EPOCHS = 50
CLASSIFIER_LR = 1e-3
CLASSIFIER_BATCH = 64
GATE_L2_INVERSE_STRENGTH = 1.0  # C in the inverse-strength convention
GATE_GRAD_TOL = 1e-6


@dataclass
class SoftmaxClassifier:
    layer: AffineLayer
    class_ids: np.ndarray  # output index -> class id, ascending

    def logits(self, features: np.ndarray) -> np.ndarray:
        features = np.atleast_2d(np.asarray(features, dtype=np.float32))
        if features.shape[1] != self.layer.in_width:
            raise ShapeError(
                f"classifier expects width {self.layer.in_width}, got {features.shape[1]}"
            )
        return features @ self.layer.weight.data.T + self.layer.bias.data

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        return ad.softmax(self.logits(features))


@dataclass
class DomainGate:
    weights: np.ndarray  # (2k,)
    bias: float
    temperature: float
    k: int

    def predict_proba(self, rows: np.ndarray) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        if rows.shape[1] != self.weights.size:
            raise ShapeError(f"gate expects width {self.weights.size}, got {rows.shape[1]}")
        from scipy.special import expit

        return expit(rows @ self.weights + self.bias)


@dataclass
class GzslPredictor:
    seen: SoftmaxClassifier
    unseen: SoftmaxClassifier
    gate: Optional[DomainGate]
    skeleton_encoder: SkeletonEncoderParams

    def __post_init__(self):
        if self.gate is not None and self.gate.k != len(self.unseen.class_ids):
            raise ArgumentError(
                f"gate pooling width k={self.gate.k} != number of unseen classes "
                f"{len(self.unseen.class_ids)}"
            )


# ---------------------------------------------------------------------------
# Softmax classifier training (shared by the seen and unseen heads)
# ---------------------------------------------------------------------------

def _train_softmax(
    inputs: np.ndarray,
    targets: np.ndarray,
    num_classes: int,
    rng: np.random.Generator,
    epochs: int = CLASSIFIER_EPOCHS,
    lr: float = CLASSIFIER_LR,
    batch_size: int = CLASSIFIER_BATCH,
) -> AffineLayer:
    from .trainer import Adam
    from .model import OptimizerSlots

    n, width = inputs.shape
    bound = 1.0 / np.sqrt(width)
    layer = AffineLayer(
        ad.parameter(rng.uniform(-bound, bound, size=(num_classes, width)).astype(np.float32)),
        ad.parameter(np.zeros(num_classes, dtype=np.float32)),
    )
    named = [("weight", layer.weight), ("bias", layer.bias)]
    slots = OptimizerSlots(
        m={name: np.zeros_like(p.data) for name, p in named},
        v={name: np.zeros_like(p.data) for name, p in named},
    )
    adam = Adam(lr)
    inputs = inputs.astype(np.float32, copy=False)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            zero_grads([layer.weight, layer.bias])
            logits = ad.affine(Tensor(inputs[idx]), layer.weight, layer.bias)
            loss = ad.softmax_cross_entropy(logits, targets[idx])
            backward(loss)
            adam.step(named, slots)
    return layer


def train_unseen_classifier(
    text_encoder,
    text_features: np.ndarray,
    unseen_ids,
    samples_per_class: int,
    rng: np.random.Generator,
    epochs: int = CLASSIFIER_EPOCHS,
) -> SoftmaxClassifier:
    """Train the unseen-class head on reparameterized text-latent draws.

    text_features holds one row per unseen class, ordered to match
    sorted(unseen_ids).
    """
    unseen_ids = np.asarray(sorted(int(u) for u in unseen_ids))
    if unseen_ids.size == 0:
        raise ArgumentError("train_unseen_classifier: empty unseen class set")
    text_features = np.asarray(text_features, dtype=np.float32)
    if text_features.shape[0] != unseen_ids.size:
        raise ArgumentError(
            f"{text_features.shape[0]} text rows for {unseen_ids.size} unseen classes"
        )
    posterior = encode_text(text_encoder, text_features)
    mean = posterior.mean.data
    log_var = posterior.log_variance.data
    dim = mean.shape[1]

    # samples_per_class draws per class, grouped class-major
    noise = rng.standard_normal((unseen_ids.size * samples_per_class, dim), dtype=np.float32)
    rep_mean = np.repeat(mean, samples_per_class, axis=0)
    rep_log_var = np.repeat(log_var, samples_per_class, axis=0)
    draws = rep_mean + np.exp(0.5 * rep_log_var) * noise
    targets = np.repeat(np.arange(unseen_ids.size), samples_per_class)

    layer = _train_softmax(draws, targets, unseen_ids.size, rng, epochs=epochs)
    return SoftmaxClassifier(layer=layer, class_ids=unseen_ids)


def _canonical_order(features: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Sort samples by (target, feature bytes): training is then invariant
    to the order the caller presented the samples in."""
    contiguous = np.ascontiguousarray(features)
    row_bytes = contiguous.view(np.dtype((np.void, contiguous.dtype.itemsize * contiguous.shape[1])))
    return np.lexsort((row_bytes.ravel(), targets))


def train_seen_classifier(
    f_x: np.ndarray,
    labels: np.ndarray,
    seen_ids,
    rng: np.random.Generator,
    epochs: int = CLASSIFIER_EPOCHS,
) -> SoftmaxClassifier:
    """Cross-entropy softmax head over raw skeleton features."""
    seen_ids = np.asarray(sorted(int(s) for s in seen_ids))
    if seen_ids.size == 0:
        raise ArgumentError("train_seen_classifier: empty seen class set")
    f_x = np.asarray(f_x, dtype=np.float32)
    labels = np.asarray(labels)
    if not np.isin(labels, seen_ids).all():
        bad = labels[~np.isin(labels, seen_ids)]
        raise DataError(f"labels outside the seen class set: {sorted(set(bad.tolist()))[:5]}")
    index_of = {cid: i for i, cid in enumerate(seen_ids.tolist())}
    targets = np.asarray([index_of[int(c)] for c in labels])
    order = _canonical_order(f_x, targets)
    layer = _train_softmax(f_x[order], targets[order], seen_ids.size, rng, epochs=epochs)
    return SoftmaxClassifier(layer=layer, class_ids=seen_ids)


# ---------------------------------------------------------------------------
# Temperature top-k pooling and the domain gate
# ---------------------------------------------------------------------------

def temperature_topk_pool(seen_logits: np.ndarray, temperature: float, k: int) -> np.ndarray:
    """softmax(logits / T) over the last axis, sorted descending, first k."""
    seen_logits = np.asarray(seen_logits, dtype=np.float64)
    width = seen_logits.shape[-1]
    if temperature <= 0:
        raise ArgumentError("temperature must be positive")
    if not 1 <= k <= width:
        raise ArgumentError(f"k must be in [1, {width}], got {k}")
    probs = ad.softmax(seen_logits / temperature)
    pooled = np.sort(probs, axis=-1)[..., ::-1]
    return np.ascontiguousarray(pooled[..., :k])


def train_domain_gate(
    rows: np.ndarray,
    labels: np.ndarray,
    temperature: float,
    k: int,
    l2_inverse_strength: float = GATE_L2_INVERSE_STRENGTH,
) -> DomainGate:
    """L2-regularized logistic regression fit by L-BFGS.

    Objective: mean cross-entropy + (0.5 / (C * D)) * ||w||^2 with D the
    number of distinct (row, label) pairs; bias unregularized; minimized
    until the gradient max-norm is <= 1e-6. Scaling by D matches the usual
    sum-form strength C while keeping the fit exactly invariant to
    duplicating the dataset.
    """
    rows = np.asarray(rows, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] != labels.shape[0]:
        raise ShapeError(f"gate rows {rows.shape} vs labels {labels.shape}")
    if rows.shape[1] != 2 * k:
        raise ArgumentError(
            f"gate rows must have width 2k = {2 * k} (pooled seen + unseen), "
            f"got {rows.shape[1]}"
        )
    if set(np.unique(labels)) != {0.0, 1.0}:
        raise ArgumentError("gate training needs both label values 0 and 1")
    n, width = rows.shape
    distinct = np.unique(np.concatenate([rows, labels[:, None]], axis=1), axis=0).shape[0]
    reg = 0.5 / (l2_inverse_strength * distinct)

    def objective(params):
        w, b = params[:-1], params[-1]
        z = rows @ w + b
        # stable CE: log(1 + exp(-|z|)) + max(z, 0) - y*z
        ce = np.log1p(np.exp(-np.abs(z))) + np.maximum(z, 0.0) - labels * z
        from scipy.special import expit

        p = expit(z)
        grad_z = (p - labels) / n
        grad_w = rows.T @ grad_z + 2.0 * reg * w
        grad_b = grad_z.sum()
        value = ce.mean() + reg * (w @ w)
        return value, np.concatenate([grad_w, [grad_b]])

    x0 = np.zeros(width + 1)
    result = minimize(
        objective,
        x0,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": 1000, "ftol": 1e-15, "gtol": GATE_GRAD_TOL},
    )
    return DomainGate(
        weights=result.x[:-1].copy(),
        bias=float(result.x[-1]),
        temperature=temperature,
        k=k,
    )


def gate_input_rows(predictor_seen: SoftmaxClassifier, unseen_probs: np.ndarray,
                    f_x: np.ndarray, temperature: float, k: int) -> np.ndarray:
    """Pooled seen probabilities joined with unseen probabilities."""
    pooled = temperature_topk_pool(predictor_seen.logits(f_x), temperature, k)
    return np.concatenate([pooled, unseen_probs], axis=1)


# ---------------------------------------------------------------------------
# Predictor assembly and calibration
# ---------------------------------------------------------------------------

def unseen_text_rows(dataset: Dataset, unseen_ids) -> np.ndarray:
    return dataset.text[np.asarray(sorted(unseen_ids))]


def build_predictor(
    state: ModelState,
    dataset: Dataset,
    split: ClassSplit,
    config: RunConfig,
    rng: np.random.Generator,
    gate: Optional[DomainGate] = None,
) -> GzslPredictor:
    """Train the classifier heads for a trained model; the gate, if any,
    comes from :func:`calibrate_gzsl`."""
    split.validate_for_eval()
    unseen_classifier = train_unseen_classifier(
        state.text_encoder,
        unseen_text_rows(dataset, split.unseen_ids),
        split.unseen_ids,
        config.samples_per_class,
        rng,
    )
    seen_ids = sorted(split.seen_ids)
    seen_mask = np.isin(dataset.labels, seen_ids)
    seen_classifier = train_seen_classifier(
        dataset.skeleton[seen_mask], dataset.labels[seen_mask], seen_ids, rng
    )
    return GzslPredictor(
        seen=seen_classifier,
        unseen=unseen_classifier,
        gate=gate,
        skeleton_encoder=state.skeleton_encoder,
    )


def calibrate_gzsl(
    dataset: Dataset,
    split: ClassSplit,
    config: RunConfig,
    rng: np.random.Generator,
    disc_enabled: bool = True,
) -> DomainGate:
    """Fit the domain gate on a proxy split carved out of the seen classes.

    A proxy-unseen set of |unseen| classes is sampled from the seen set;
    the model and both classifier heads are retrained from scratch on the
    remaining proxy-seen classes with the same config; the gate is then fit
    on pooled probabilities of proxy-seen samples (label 1) versus
    proxy-unseen samples (label 0).
    """
    from .trainer import train

    k = len(split.unseen_ids)
    seen_ids = sorted(split.seen_ids)
    if len(seen_ids) < 2 * k:
        raise ArgumentError(
            f"calibration needs at least 2*|unseen| = {2 * k} seen classes "
            f"(top-k pooling over the proxy-seen head), got {len(seen_ids)}"
        )
    proxy_unseen = rng.choice(np.asarray(seen_ids), size=k, replace=False)
    proxy_split = ClassSplit(
        seen_ids=frozenset(seen_ids) - frozenset(int(u) for u in proxy_unseen),
        unseen_ids=frozenset(int(u) for u in proxy_unseen),
    )

    proxy_result = train(dataset, proxy_split, config, disc_enabled=disc_enabled)
    proxy_predictor = build_predictor(proxy_result.state, dataset, proxy_split, config, rng)

    proxy_seen_mask = np.isin(dataset.labels, sorted(proxy_split.seen_ids))
    proxy_unseen_mask = np.isin(dataset.labels, sorted(proxy_split.unseen_ids))
    f_all = np.concatenate(
        [dataset.skeleton[proxy_seen_mask], dataset.skeleton[proxy_unseen_mask]]
    )
    gate_labels = np.concatenate(
        [np.ones(proxy_seen_mask.sum()), np.zeros(proxy_unseen_mask.sum())]
    )
    semantic_means, _ = posterior_means(proxy_result.state.skeleton_encoder, f_all)
    unseen_probs = proxy_predictor.unseen.predict_proba(semantic_means)
    rows = gate_input_rows(proxy_predictor.seen, unseen_probs, f_all, config.temperature, k)
    return train_domain_gate(rows, gate_labels, config.temperature, k)


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------

def _argmax_lowest_id(probs: np.ndarray, ids: np.ndarray) -> np.ndarray:
    """Row-wise argmax over probs; ties resolve to the lowest class id."""
    out = np.empty(probs.shape[0], dtype=np.int64)
    for i in range(probs.shape[0]):
        row = probs[i]
        out[i] = ids[row >= row.max()].min()
    return out


def predict_zsl(predictor: GzslPredictor, f_x: np.ndarray):
    """Class id(s) among the unseen classes only."""
    single = np.asarray(f_x).ndim == 1
    batch = np.atleast_2d(np.asarray(f_x, dtype=np.float32))
    semantic_mean, _ = posterior_means(predictor.skeleton_encoder, batch)
    probs = predictor.unseen.predict_proba(semantic_mean)
    ids = _argmax_lowest_id(probs, predictor.unseen.class_ids)
    return int(ids[0]) if single else ids


def predict_gzsl(predictor: GzslPredictor, f_x: np.ndarray):
    """Fused prediction over seen + unseen classes.

    Returns (class id, fused distribution, fused class-id order) for a
    single feature vector, or arrays for a batch. The fused distribution is
    p_d * p_seen joined with (1 - p_d) * p_unseen and sums to 1.
    """
    if predictor.gate is None:
        raise ArgumentError("predict_gzsl requires a calibrated domain gate")
    single = np.asarray(f_x).ndim == 1
    batch = np.atleast_2d(np.asarray(f_x, dtype=np.float32))

    seen_logits = predictor.seen.logits(batch)
    p_seen = ad.softmax(seen_logits.astype(np.float64))
    semantic_mean, _ = posterior_means(predictor.skeleton_encoder, batch)
    p_unseen = ad.softmax(predictor.unseen.logits(semantic_mean).astype(np.float64))

    pooled = temperature_topk_pool(seen_logits, predictor.gate.temperature, predictor.gate.k)
    p_d = predictor.gate.predict_proba(np.concatenate([pooled, p_unseen], axis=1))

    fused = np.concatenate(
        [p_d[:, None] * p_seen, (1.0 - p_d)[:, None] * p_unseen], axis=1
    )
    all_ids = np.concatenate([predictor.seen.class_ids, predictor.unseen.class_ids])
    ids = _argmax_lowest_id(fused, all_ids)
    if single:
        return int(ids[0]), fused[0], all_ids
    return ids, fused, all_ids


# ---------------------------------------------------------------------------
# Predictor checkpoints
# ---------------------------------------------------------------------------

def save_predictor(predictor: GzslPredictor, path) -> None:
    if predictor.gate is None:
        raise ArgumentError("cannot save a predictor without a calibrated gate")
    enc = predictor.skeleton_encoder
    entries = [
        ("seen/weight", predictor.seen.layer.weight.data),
        ("seen/bias", predictor.seen.layer.bias.data),
        ("seen/class_ids", predictor.seen.class_ids.astype(np.float32)),
        ("unseen/weight", predictor.unseen.layer.weight.data),
        ("unseen/bias", predictor.unseen.layer.bias.data),
        ("unseen/class_ids", predictor.unseen.class_ids.astype(np.float32)),
        ("gate/weights", predictor.gate.weights.astype(np.float32)),
        ("gate/bias", np.float32(predictor.gate.bias).reshape(())),
        ("gate/temperature", np.float32(predictor.gate.temperature).reshape(())),
        ("gate/k", np.float32(predictor.gate.k).reshape(())),
        ("encoder/head_r/weight", enc.head_r.weight.data),
        ("encoder/head_r/bias", enc.head_r.bias.data),
        ("encoder/head_v/weight", enc.head_v.weight.data),
        ("encoder/head_v/bias", enc.head_v.bias.data),
    ]
    write_tensor_container(entries, path, PREDICTOR_MAGIC)


def load_predictor(path) -> GzslPredictor:
    tensors = read_tensor_container(path, PREDICTOR_MAGIC)

    def layer(prefix):
        return AffineLayer(
            ad.parameter(tensors[f"{prefix}/weight"]),
            ad.parameter(tensors[f"{prefix}/bias"]),
        )

    gate = DomainGate(
        weights=tensors["gate/weights"].astype(np.float64),
        bias=float(tensors["gate/bias"]),
        temperature=float(tensors["gate/temperature"]),
        k=int(tensors["gate/k"]),
    )
    return GzslPredictor(
        seen=SoftmaxClassifier(layer("seen"), tensors["seen/class_ids"].astype(np.int64)),
        unseen=SoftmaxClassifier(layer("unseen"), tensors["unseen/class_ids"].astype(np.int64)),
        gate=gate,
        skeleton_encoder=SkeletonEncoderParams(
            head_r=layer("encoder/head_r"),
            head_v=layer("encoder/head_v"),
        ),
    )
