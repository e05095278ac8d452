"""Model parameters and differentiable forward passes.

The architecture is deliberately shallow: both encoders and both decoders
are single affine layers, and the discriminator is a two-layer MLP with
ReLU and a sigmoid output. The skeleton encoder has two independent heads:
a semantic head whose latent is aligned with the text latent, and a style
head that absorbs per-sample nuisance. Each encoder head emits
[mean ; log-variance] in one output vector, split in half.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ArgumentError, DataError, ShapeError
from .formats import MODEL_MAGIC, read_tensor_container, write_tensor_container


@dataclass
class AffineLayer:
    weight: Tensor  # (out, in)
    bias: Tensor  # (out,)

    @property
    def out_width(self) -> int:
        return self.weight.data.shape[0]

    @property
    def in_width(self) -> int:
        return self.weight.data.shape[1]


@dataclass
class GaussianLatent:
    """Diagonal Gaussian posterior; fields are Tensors in graph mode or
    plain arrays outside it."""

    mean: object
    log_variance: object

    @property
    def width(self) -> int:
        return np.asarray(_data(self.mean)).shape[-1]


def _data(x):
    return x.data if isinstance(x, Tensor) else np.asarray(x)


@dataclass
class SkeletonEncoderParams:
    head_r: AffineLayer  # -> [mean ; log_var] of the semantic latent
    head_v: AffineLayer  # -> [mean ; log_var] of the style latent

    @property
    def dim_r(self) -> int:
        return self.head_r.out_width // 2

    @property
    def dim_v(self) -> int:
        return self.head_v.out_width // 2


@dataclass
class TextEncoderParams:
    layer: AffineLayer

    @property
    def dim_r(self) -> int:
        return self.layer.out_width // 2


@dataclass
class DecoderParams:
    layer: AffineLayer


@dataclass
class DiscriminatorParams:
    layer1: AffineLayer
    layer2: AffineLayer


@dataclass
class ModelDims:
    d_x: int
    d_y: int
    dim_r: int
    dim_v: int
    disc_hidden: int = 0  # 0 -> dim_r + dim_v

    def __post_init__(self):
        if min(self.d_x, self.d_y, self.dim_r) < 1 or self.dim_v < 0:
            raise ArgumentError(f"invalid model dims: {self}")
        if self.disc_hidden == 0:
            self.disc_hidden = self.dim_r + self.dim_v


@dataclass
class OptimizerSlots:
    """Adam moments keyed by parameter name, plus the shared step count."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


@dataclass
class ModelState:
    skeleton_encoder: SkeletonEncoderParams
    text_encoder: TextEncoderParams
    decoder_x: DecoderParams
    decoder_y: DecoderParams
    discriminator: DiscriminatorParams
    vae_opt: OptimizerSlots = field(default_factory=OptimizerSlots)
    disc_opt: OptimizerSlots = field(default_factory=OptimizerSlots)

    @property
    def dims(self) -> ModelDims:
        enc = self.skeleton_encoder
        return ModelDims(
            d_x=enc.head_r.in_width,
            d_y=self.text_encoder.layer.in_width,
            dim_r=enc.dim_r,
            dim_v=enc.dim_v,
            disc_hidden=self.discriminator.layer1.out_width,
        )

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return vae_parameters(self) + disc_parameters(self)


def vae_parameters(state: ModelState) -> list[tuple[str, Tensor]]:
    """Encoder and decoder parameters, in serialization order."""
    out = []
    for prefix, layer in (
        ("skeleton_encoder/head_r", state.skeleton_encoder.head_r),
        ("skeleton_encoder/head_v", state.skeleton_encoder.head_v),
        ("text_encoder/layer", state.text_encoder.layer),
        ("decoder_x/layer", state.decoder_x.layer),
        ("decoder_y/layer", state.decoder_y.layer),
    ):
        out.append((f"{prefix}/weight", layer.weight))
        out.append((f"{prefix}/bias", layer.bias))
    return out


def disc_parameters(state: ModelState) -> list[tuple[str, Tensor]]:
    out = []
    for prefix, layer in (
        ("discriminator/layer1", state.discriminator.layer1),
        ("discriminator/layer2", state.discriminator.layer2),
    ):
        out.append((f"{prefix}/weight", layer.weight))
        out.append((f"{prefix}/bias", layer.bias))
    return out


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------

def _init_affine(out_width: int, in_width: int, rng: np.random.Generator,
                 dtype=np.float32) -> AffineLayer:
    bound = 1.0 / np.sqrt(in_width)
    weight = rng.uniform(-bound, bound, size=(out_width, in_width)).astype(dtype)
    bias = np.zeros(out_width, dtype=dtype)
    return AffineLayer(ad.parameter(weight), ad.parameter(bias))


def init_model(dims: ModelDims, rng: np.random.Generator, dtype=np.float32) -> ModelState:
    """Fresh model; layers are drawn from rng in a fixed, documented order
    (skeleton heads, text encoder, decoders, discriminator)."""
    enc = SkeletonEncoderParams(
        head_r=_init_affine(2 * dims.dim_r, dims.d_x, rng, dtype),
        head_v=_init_affine(2 * dims.dim_v, dims.d_x, rng, dtype),
    )
    text = TextEncoderParams(_init_affine(2 * dims.dim_r, dims.d_y, rng, dtype))
    dec_x = DecoderParams(_init_affine(dims.d_x, dims.dim_v + dims.dim_r, rng, dtype))
    dec_y = DecoderParams(_init_affine(dims.d_y, dims.dim_r, rng, dtype))
    disc = DiscriminatorParams(
        layer1=_init_affine(dims.disc_hidden, dims.dim_v + dims.dim_r, rng, dtype),
        layer2=_init_affine(1, dims.disc_hidden, rng, dtype),
    )
    state = ModelState(enc, text, dec_x, dec_y, disc)
    for name, p in vae_parameters(state):
        state.vae_opt.m[name] = np.zeros_like(p.data)
        state.vae_opt.v[name] = np.zeros_like(p.data)
    for name, p in disc_parameters(state):
        state.disc_opt.m[name] = np.zeros_like(p.data)
        state.disc_opt.v[name] = np.zeros_like(p.data)
    return state


# ---------------------------------------------------------------------------
# Forward passes
# ---------------------------------------------------------------------------

def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def _check_batch(x: Tensor, width: int, what: str) -> Tensor:
    if x.data.ndim != 2 or x.data.shape[1] != width:
        raise ShapeError(f"{what}: expected (n, {width}) input, got {x.data.shape}")
    if not np.isfinite(x.data).all():
        raise DataError(f"{what}: non-finite values in input")
    return x


def _head_posterior(layer: AffineLayer, x: Tensor) -> GaussianLatent:
    out = ad.affine(x, layer.weight, layer.bias)
    half = layer.out_width // 2
    return GaussianLatent(
        mean=ad.slice_cols(out, 0, half),
        log_variance=ad.slice_cols(out, half, 2 * half),
    )


def encode_skeleton(params: SkeletonEncoderParams, f_x) -> tuple[GaussianLatent, GaussianLatent]:
    """Posteriors (semantic, style) for a batch of skeleton features."""
    x = _check_batch(_as_tensor(f_x), params.head_r.in_width, "encode_skeleton")
    return _head_posterior(params.head_r, x), _head_posterior(params.head_v, x)


def encode_text(params: TextEncoderParams, f_y) -> GaussianLatent:
    """Posterior over the shared semantic latent for a batch of text features."""
    y = _check_batch(_as_tensor(f_y), params.layer.in_width, "encode_text")
    return _head_posterior(params.layer, y)


def reparameterize(latent: GaussianLatent, noise) -> Tensor:
    """mean + exp(log_variance / 2) * noise, elementwise."""
    mean = _as_tensor(latent.mean)
    log_var = _as_tensor(latent.log_variance)
    noise = np.asarray(noise)
    if noise.shape != mean.data.shape:
        raise ShapeError(
            f"reparameterize: noise shape {noise.shape} != mean shape {mean.data.shape}"
        )
    std = ad.exp(ad.scale(log_var, 0.5))
    return ad.add(mean, ad.mul(std, Tensor(noise.astype(mean.data.dtype, copy=False))))


def decode(params: DecoderParams, z) -> Tensor:
    z = _as_tensor(z)
    if z.data.ndim != 2 or z.data.shape[1] != params.layer.in_width:
        raise ShapeError(
            f"decode: expected (n, {params.layer.in_width}) latent, got {z.data.shape}"
        )
    return ad.affine(z, params.layer.weight, params.layer.bias)


def discriminate(params: DiscriminatorParams, z) -> Tensor:
    """P(style and semantic latents come from the same sample), in (0, 1)."""
    z = _as_tensor(z)
    if z.data.ndim != 2 or z.data.shape[1] != params.layer1.in_width:
        raise ShapeError(
            f"discriminate: expected (n, {params.layer1.in_width}) input, got {z.data.shape}"
        )
    hidden = ad.relu(ad.affine(z, params.layer1.weight, params.layer1.bias))
    logit = ad.affine(hidden, params.layer2.weight, params.layer2.bias)
    return ad.sigmoid(logit)


def posterior_means(params: SkeletonEncoderParams, f_x) -> tuple[np.ndarray, np.ndarray]:
    """Inference helper: (semantic mean, style mean) as plain arrays."""
    semantic, style = encode_skeleton(params, np.asarray(f_x))
    return semantic.mean.data, style.mean.data


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def _opt_entries(tag: str, slots: OptimizerSlots, names: list[str]):
    for name in names:
        yield f"optim/{tag}/m/{name}", slots.m[name]
    for name in names:
        yield f"optim/{tag}/v/{name}", slots.v[name]
    yield f"optim/{tag}/step", np.float32(slots.step).reshape(())


def save_model_state(state: ModelState, path) -> None:
    """Serialize parameters and optimizer moments, bit-exactly."""
    entries = [(name, p.data) for name, p in state.named_parameters()]
    vae_names = [name for name, _ in vae_parameters(state)]
    disc_names = [name for name, _ in disc_parameters(state)]
    entries.extend(_opt_entries("vae", state.vae_opt, vae_names))
    entries.extend(_opt_entries("disc", state.disc_opt, disc_names))
    write_tensor_container(entries, path, MODEL_MAGIC)


def load_model_state(path) -> ModelState:
    tensors = read_tensor_container(path, MODEL_MAGIC)

    def layer(prefix: str) -> AffineLayer:
        return AffineLayer(
            ad.parameter(tensors[f"{prefix}/weight"]),
            ad.parameter(tensors[f"{prefix}/bias"]),
        )

    state = ModelState(
        skeleton_encoder=SkeletonEncoderParams(
            head_r=layer("skeleton_encoder/head_r"),
            head_v=layer("skeleton_encoder/head_v"),
        ),
        text_encoder=TextEncoderParams(layer("text_encoder/layer")),
        decoder_x=DecoderParams(layer("decoder_x/layer")),
        decoder_y=DecoderParams(layer("decoder_y/layer")),
        discriminator=DiscriminatorParams(
            layer1=layer("discriminator/layer1"),
            layer2=layer("discriminator/layer2"),
        ),
    )
    for tag, slots, params in (
        ("vae", state.vae_opt, vae_parameters(state)),
        ("disc", state.disc_opt, disc_parameters(state)),
    ):
        for name, _ in params:
            slots.m[name] = tensors[f"optim/{tag}/m/{name}"]
            slots.v[name] = tensors[f"optim/{tag}/v/{name}"]
        slots.step = int(tensors[f"optim/{tag}/step"])
    return state
