"""Training objectives.

All quantities are minimized. Per batch the full objective is

    total = l_vae + lambda1 * l_c + lambda2 * l_t

where l_vae = l_x + l_y combines each VAE's reconstruction and
KL-to-standard-normal terms, l_c is the cross-modal alignment error
(decode the semantic skeleton latent into text space and the style latent
joined with the text latent back into skeleton space), and l_t is the
total-correlation estimate from the discriminator (log D(z) + log(1 - D(z~))
averaged over the batch; the discriminator maximizes it, the encoder
minimizes it).

Each loss draws one fresh reparameterized sample set per call. The
``*_given_noise`` variants take the noise explicitly so finite-difference
checks can hold it fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ArgumentError, DataError, ShapeError
from .model import (
    DiscriminatorParams,
    GaussianLatent,
    ModelState,
    decode,
    discriminate,
    encode_skeleton,
    encode_text,
    reparameterize,
)
from .seeding import fisher_yates_permutation

DISC_OUTPUT_EPS = 1e-7  # clamp before logs so l_t stays finite


@dataclass
class LossBreakdown:
    """Per-batch scalars plus the coefficients that were in effect."""

    l_x: float
    l_y: float
    l_vae: float
    l_c: float
    l_t: float
    total: float
    lambda1: float
    lambda2: float
    beta_x: float
    beta_y: float


# ---------------------------------------------------------------------------
# Closed-form pieces
# ---------------------------------------------------------------------------

def kl_to_standard_normal(latent: GaussianLatent) -> float:
    """KL(N(mean, diag(exp(log_var))) || N(0, I)) for a single latent vector.

    Equals 0.5 * sum(mean^2 + exp(log_var) - 1 - log_var); non-negative,
    and zero exactly when mean = 0 and log_var = 0.
    """
    mean = np.asarray(latent.mean if not isinstance(latent.mean, Tensor) else latent.mean.data)
    log_var = np.asarray(
        latent.log_variance if not isinstance(latent.log_variance, Tensor) else latent.log_variance.data
    )
    if mean.ndim != 1 or mean.shape != log_var.shape:
        raise ShapeError(
            f"kl_to_standard_normal expects matching 1-D vectors, got {mean.shape} and {log_var.shape}"
        )
    if not (np.isfinite(mean).all() and np.isfinite(log_var).all()):
        raise DataError("kl_to_standard_normal: non-finite latent")
    # expm1 keeps exp(lv) - 1 - lv exactly non-negative for tiny lv
    return float(0.5 * (mean**2 + np.expm1(log_var) - log_var).sum())


def reconstruction_error(reconstruction: np.ndarray, target: np.ndarray) -> float:
    """Squared error summed over feature dims, averaged over the batch."""
    reconstruction = np.atleast_2d(np.asarray(reconstruction))
    target = np.atleast_2d(np.asarray(target))
    if reconstruction.shape != target.shape:
        raise ShapeError(
            f"reconstruction_error: {reconstruction.shape} vs {target.shape}"
        )
    diff = reconstruction - target
    return float((diff * diff).sum() / reconstruction.shape[0])


# ---------------------------------------------------------------------------
# Graph-building losses
# ---------------------------------------------------------------------------

def _draw_noise(rng: np.random.Generator, n: int, width: int, dtype) -> np.ndarray:
    if dtype == np.float32:
        return rng.standard_normal((n, width), dtype=np.float32)
    return rng.standard_normal((n, width))


def _model_dtype(state: ModelState):
    return state.skeleton_encoder.head_r.weight.data.dtype


def vae_loss_given_noise(
    state: ModelState,
    f_x: np.ndarray,
    f_y: np.ndarray,
    beta_x: float,
    beta_y: float,
    noise_r: np.ndarray,
    noise_v: np.ndarray,
    noise_y: np.ndarray,
) -> tuple[Tensor, Tensor, Tensor]:
    """Self-reconstruction objectives; returns (l_x, l_y, l_vae) graph nodes."""
    if beta_x < 0 or beta_y < 0:
        raise ArgumentError("KL weights must be non-negative")
    semantic, style = encode_skeleton(state.skeleton_encoder, f_x)
    text = encode_text(state.text_encoder, f_y)
    z_r = reparameterize(semantic, noise_r)
    z_v = reparameterize(style, noise_v)
    z_y = reparameterize(text, noise_y)

    recon_x = ad.sse_mean(decode(state.decoder_x, ad.concat_cols(z_v, z_r)), np.asarray(f_x))
    kl_r = ad.gaussian_kl_mean(semantic.mean, semantic.log_variance)
    kl_v = ad.gaussian_kl_mean(style.mean, style.log_variance)
    l_x = ad.add(recon_x, ad.scale(ad.add(kl_r, kl_v), beta_x))

    recon_y = ad.sse_mean(decode(state.decoder_y, z_y), np.asarray(f_y))
    kl_y = ad.gaussian_kl_mean(text.mean, text.log_variance)
    l_y = ad.add(recon_y, ad.scale(kl_y, beta_y))

    return l_x, l_y, ad.add(l_x, l_y)


def vae_loss(state, f_x, f_y, beta_x, beta_y, rng) -> tuple[Tensor, Tensor, Tensor]:
    n = np.asarray(f_x).shape[0]
    dt = _model_dtype(state)
    dims = state.dims
    noise_r = _draw_noise(rng, n, dims.dim_r, dt)
    noise_v = _draw_noise(rng, n, dims.dim_v, dt)
    noise_y = _draw_noise(rng, n, dims.dim_r, dt)
    return vae_loss_given_noise(state, f_x, f_y, beta_x, beta_y, noise_r, noise_v, noise_y)


def cross_alignment_loss_given_noise(
    state: ModelState,
    f_x: np.ndarray,
    f_y: np.ndarray,
    noise_r: np.ndarray,
    noise_v: np.ndarray,
    noise_y: np.ndarray,
) -> Tensor:
    """Cross-reconstruction: text decoded from the semantic skeleton latent,
    skeleton decoded from style + text latents."""
    semantic, style = encode_skeleton(state.skeleton_encoder, f_x)
    text = encode_text(state.text_encoder, f_y)
    z_r = reparameterize(semantic, noise_r)
    z_v = reparameterize(style, noise_v)
    z_y = reparameterize(text, noise_y)
    text_from_skel = ad.sse_mean(decode(state.decoder_y, z_r), np.asarray(f_y))
    skel_from_text = ad.sse_mean(
        decode(state.decoder_x, ad.concat_cols(z_v, z_y)), np.asarray(f_x)
    )
    return ad.add(text_from_skel, skel_from_text)


def cross_alignment_loss(state, f_x, f_y, rng) -> Tensor:
    n = np.asarray(f_x).shape[0]
    dt = _model_dtype(state)
    dims = state.dims
    noise_r = _draw_noise(rng, n, dims.dim_r, dt)
    noise_v = _draw_noise(rng, n, dims.dim_v, dt)
    noise_y = _draw_noise(rng, n, dims.dim_r, dt)
    return cross_alignment_loss_given_noise(state, f_x, f_y, noise_r, noise_v, noise_y)


def shuffle_pairs(v_batch, perm_or_rng):
    """Reorder style latents by a uniform permutation, leaving the caller's
    semantic latents in place. Accepts an explicit permutation or an rng
    (consumed via the documented Fisher-Yates shuffle)."""
    n = v_batch.data.shape[0] if isinstance(v_batch, Tensor) else np.asarray(v_batch).shape[0]
    if n < 1:
        raise ArgumentError("shuffle_pairs: empty batch")
    if isinstance(perm_or_rng, np.random.Generator):
        perm = fisher_yates_permutation(n, perm_or_rng)
    else:
        perm = np.asarray(perm_or_rng)
        if sorted(perm.tolist()) != list(range(n)):
            raise ArgumentError("shuffle_pairs: not a permutation of range(n)")
    if isinstance(v_batch, Tensor):
        return ad.permute_rows(v_batch, perm)
    return np.asarray(v_batch)[perm]


def total_correlation_loss(disc: DiscriminatorParams, z_batch, z_tilde_batch) -> Tensor:
    """Batch mean of log D(z) + log(1 - D(z~)).

    Discriminator outputs are clamped to [eps, 1-eps] before the logs, so
    the value is always finite. The discriminator is trained to maximize
    this; the encoder to minimize it.
    """
    matched = discriminate(disc, z_batch)
    mismatched = discriminate(disc, z_tilde_batch)
    log_matched = ad.log(ad.clamp(matched, DISC_OUTPUT_EPS, 1.0 - DISC_OUTPUT_EPS))
    log_unmatched = ad.log(
        ad.clamp(ad.one_minus(mismatched), DISC_OUTPUT_EPS, 1.0 - DISC_OUTPUT_EPS)
    )
    return ad.mean_all(ad.add(log_matched, log_unmatched))


def paired_latents_given_noise(
    state: ModelState,
    f_x: np.ndarray,
    noise_r: np.ndarray,
    noise_v: np.ndarray,
    perm: np.ndarray,
) -> tuple[Tensor, Tensor]:
    """(z, z~) inputs for the total-correlation loss: style + semantic latent
    pairs, matched and with the style rows permuted."""
    semantic, style = encode_skeleton(state.skeleton_encoder, f_x)
    z_r = reparameterize(semantic, noise_r)
    z_v = reparameterize(style, noise_v)
    matched = ad.concat_cols(z_v, z_r)
    mismatched = ad.concat_cols(shuffle_pairs(z_v, perm), z_r)
    return matched, mismatched


def paired_latents(state, f_x, rng) -> tuple[Tensor, Tensor]:
    """Draws noise then a permutation from rng, in that order."""
    n = np.asarray(f_x).shape[0]
    dt = _model_dtype(state)
    dims = state.dims
    noise_r = _draw_noise(rng, n, dims.dim_r, dt)
    noise_v = _draw_noise(rng, n, dims.dim_v, dt)
    perm = fisher_yates_permutation(n, rng)
    return paired_latents_given_noise(state, f_x, noise_r, noise_v, perm)


def total_loss(l_vae: Tensor, l_c: Tensor, l_t: Tensor, lambda1: float, lambda2: float) -> Tensor:
    """l_vae + lambda1 * l_c + lambda2 * l_t."""
    if lambda1 < 0 or lambda2 < 0:
        raise ArgumentError("loss coefficients must be non-negative")
    return ad.add(l_vae, ad.add(ad.scale(l_c, lambda1), ad.scale(l_t, lambda2)))
