"""Optimization loop: Adam, per-epoch coefficient annealing, and the
alternation between VAE updates and discriminator updates.

Coefficient schedule, reset at the start of every epoch: the KL weights and
the total-correlation weight stay at 0 for the first third of an epoch's
samples, then ramp linearly to their targets by the epoch's end. The
cross-alignment weight is 0 for the whole first epoch and 1 afterwards.

Alternation: every step updates the encoders/decoders against the full
objective; every n_d-th step additionally updates the discriminator to
maximize the unweighted total-correlation loss on detached, freshly
shuffled latents. The two updates touch disjoint parameter sets.

RNG streams are separated by purpose (init / batch order / reparam noise /
total-correlation noise+permutations) so that, e.g., disabling the
discriminator does not perturb the batch order or the VAE noise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
import numpy as np

from . import kernels
from . import seeding
from .autodiff import Tensor, backward, zero_grads
from .data import ClassSplit, Dataset, RunConfig
from .errors import ArgumentError, ShapeError
from .losses import (
    LossBreakdown,
    cross_alignment_loss,
    paired_latents,
    total_correlation_loss,
    total_loss,
    vae_loss,
)
from .model import ModelDims, ModelState, OptimizerSlots, disc_parameters, init_model, vae_parameters

METRICS_HEADER = [
    "step", "epoch", "l_x", "l_y", "l_c", "l_t", "total",
    "lambda1", "lambda2", "beta_x", "beta_y",
]


def anneal_coefficient(k: int, n: int, target: float) -> float:
    """Ramp from 0 to target: 0 while k < n/3, then (3k - n) / (2n) * target.

    The closed form equals (3/2) * (k/n - 1/3) * target but is exact at the
    grid points k in {n/3, 2n/3, n} in floating point.
    """
    if n <= 0:
        raise ArgumentError("anneal_coefficient: n must be positive")
    if not 0 <= k <= n:
        raise ArgumentError(f"anneal_coefficient: k={k} outside [0, {n}]")
    if target < 0:
        raise ArgumentError("anneal_coefficient: target must be non-negative")
    if 3 * k < n:
        return 0.0
    return (3 * k - n) / (2 * n) * target


def lambda1_for_epoch(epoch_index: int) -> float:
    """Cross-alignment weight: off for the first epoch, 1 afterwards."""
    if epoch_index < 0:
        raise ArgumentError("epoch_index must be non-negative")
    return 0.0 if epoch_index == 0 else 1.0


@dataclass
class EffectiveCoefficients:
    """Annealed per-batch loss weights."""

    lambda1: float
    lambda2: float
    beta_x: float
    beta_y: float


class Adam:
    """Bias-corrected Adam; moments live in the model's OptimizerSlots."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        if lr <= 0:
            raise ArgumentError("learning rate must be positive")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    def step(self, named_params, slots: OptimizerSlots) -> None:
        slots.step += 1
        for name, p in named_params:
            grad = p.grad
            if grad is None:
                grad = np.zeros_like(p.data)
            if grad.shape != p.data.shape:
                raise ShapeError(f"gradient shape {grad.shape} != param {p.data.shape} for {name}")
            kernels.adam_step(
                p.data.reshape(-1),
                np.ascontiguousarray(grad, dtype=p.data.dtype).reshape(-1),
                slots.m[name].reshape(-1),
                slots.v[name].reshape(-1),
                slots.step,
                self.lr,
                self.beta1,
                self.beta2,
                self.eps,
            )


def train_step(
    state: ModelState,
    f_x: np.ndarray,
    f_y: np.ndarray,
    coeffs: EffectiveCoefficients,
    rng_noise: np.random.Generator,
    rng_tc: np.random.Generator,
    step_index: int,
    n_d: int,
    adam_vae: Adam,
    adam_disc: Adam,
    disc_enabled: bool = True,
) -> LossBreakdown:
    """One VAE/encoder update, plus a discriminator update when the 1-based
    step_index is a multiple of n_d."""
    if f_x.shape[0] == 0:
        raise ArgumentError("train_step: empty batch")
    if n_d < 1:
        raise ArgumentError("train_step: n_d must be >= 1")

    params_vae = vae_parameters(state)
    params_disc = disc_parameters(state)

    zero_grads([p for _, p in params_vae] + [p for _, p in params_disc])
    l_x, l_y, l_vae = vae_loss(state, f_x, f_y, coeffs.beta_x, coeffs.beta_y, rng_noise)
    l_c = cross_alignment_loss(state, f_x, f_y, rng_noise)
    if disc_enabled:
        z, z_tilde = paired_latents(state, f_x, rng_tc)
        l_t = total_correlation_loss(state.discriminator, z, z_tilde)
        total = total_loss(l_vae, l_c, l_t, coeffs.lambda1, coeffs.lambda2)
        l_t_value = l_t.item()
    else:
        total = total_loss(l_vae, l_c, Tensor(np.zeros((), dtype=l_vae.data.dtype)),
                           coeffs.lambda1, coeffs.lambda2)
        l_t_value = 0.0
    backward(total)
    adam_vae.step(params_vae, state.vae_opt)

    if disc_enabled and step_index % n_d == 0:
        discriminator_step(state, f_x, rng_tc, adam_disc)

    return LossBreakdown(
        l_x=l_x.item(),
        l_y=l_y.item(),
        l_vae=l_vae.item(),
        l_c=l_c.item(),
        l_t=l_t_value,
        total=total.item(),
        lambda1=coeffs.lambda1,
        lambda2=coeffs.lambda2,
        beta_x=coeffs.beta_x,
        beta_y=coeffs.beta_y,
    )


def discriminator_step(
    state: ModelState,
    f_x: np.ndarray,
    rng_tc: np.random.Generator,
    adam_disc: Adam,
) -> None:
    """Update only the discriminator, maximizing the unweighted
    total-correlation loss on detached, freshly shuffled latents."""
    params_disc = disc_parameters(state)
    z, z_tilde = paired_latents(state, f_x, rng_tc)
    z_const = Tensor(z.data)  # latents are constants for this update
    z_tilde_const = Tensor(z_tilde.data)
    zero_grads([p for _, p in params_disc])
    objective = total_correlation_loss(state.discriminator, z_const, z_tilde_const)
    backward(objective)
    # maximize: ascend by negating the gradient before the Adam step
    for _, p in params_disc:
        p.grad = -p.grad if p.grad is not None else None
    adam_disc.step(params_disc, state.disc_opt)


@dataclass
class MetricsRow:
    step: int
    epoch: int
    losses: LossBreakdown


@dataclass
class TrainResult:
    state: ModelState
    metrics: list
    disc_updates: int


def train(
    dataset: Dataset,
    split: ClassSplit,
    config: RunConfig,
    disc_enabled: bool = True,
    metrics_path=None,
) -> TrainResult:
    """Train on the seen-class samples of the dataset.

    Deterministic: identical (dataset, split, config) give bit-identical
    parameters and metrics. Pairs each skeleton sample with its class's
    text feature row.
    """
    config.validate()
    seen = np.asarray(sorted(split.seen_ids))
    if seen.size == 0:
        raise ArgumentError("train: empty seen class set")
    seen_mask = np.isin(dataset.labels, seen)
    seen_idx = np.flatnonzero(seen_mask)
    n = seen_idx.size
    if n == 0:
        raise ArgumentError("train: no samples belong to the seen classes")

    dims = ModelDims(dataset.d_x, dataset.d_y, config.dim_r, config.dim_v)
    state = init_model(dims, seeding.stream(config.seed, seeding.INIT))
    rng_data = seeding.stream(config.seed, seeding.DATA)
    rng_noise = seeding.stream(config.seed, seeding.NOISE)
    rng_tc = seeding.stream(config.seed, seeding.PERM)

    adam_vae = Adam(config.learning_rate)
    adam_disc = Adam(config.learning_rate)

    rows: list[MetricsRow] = []
    disc_updates = 0
    step = 0
    batch = config.batch_size
    for epoch in range(config.epochs):
        order = rng_data.permutation(n)
        lam1 = lambda1_for_epoch(epoch)
        for b, start in enumerate(range(0, n, batch)):
            idx = seen_idx[order[start : start + batch]]
            f_x = dataset.skeleton[idx]
            f_y = dataset.text[dataset.labels[idx]]
            k = min((b + 1) * batch, n)
            coeffs = EffectiveCoefficients(
                lambda1=lam1,
                lambda2=anneal_coefficient(k, n, config.lambda_2) if disc_enabled else 0.0,
                beta_x=anneal_coefficient(k, n, config.beta_x),
                beta_y=anneal_coefficient(k, n, config.beta_y),
            )
            step += 1
            breakdown = train_step(
                state, f_x, f_y, coeffs, rng_noise, rng_tc,
                step, config.n_d, adam_vae, adam_disc, disc_enabled,
            )
            if disc_enabled and step % config.n_d == 0:
                disc_updates += 1
            rows.append(MetricsRow(step=step, epoch=epoch, losses=breakdown))

    if metrics_path is not None:
        write_metrics_csv(rows, metrics_path)
    return TrainResult(state=state, metrics=rows, disc_updates=disc_updates)


def write_metrics_csv(rows, path) -> None:
    """One row per training step; floats via repr for exact round-trips."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        for row in rows:
            b = row.losses
            writer.writerow(
                [row.step, row.epoch]
                + [repr(float(v)) for v in (b.l_x, b.l_y, b.l_c, b.l_t, b.total,
                                            b.lambda1, b.lambda2, b.beta_x, b.beta_y)]
            )
