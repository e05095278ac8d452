"""Shared fixtures and the finite-difference gradient harness."""

import numpy as np
import pytest

from sadvae.model import ModelDims, ModelState, init_model

GRADCHECK_DIMS = ModelDims(d_x=12, d_y=8, dim_r=6, dim_v=3)
GRADCHECK_BATCH = 4


def small_model(seed: int, dims: ModelDims = GRADCHECK_DIMS) -> ModelState:
    """Random double-precision model for gradient checks."""
    return init_model(dims, np.random.default_rng(seed), dtype=np.float64)


def random_batch(seed: int, n: int = GRADCHECK_BATCH, dims: ModelDims = GRADCHECK_DIMS):
    # scale 0.5 keeps loss magnitudes small enough that central differences
    # retain ~1e-10 absolute accuracy in double precision
    rng = np.random.default_rng(1000 + seed)
    f_x = 0.5 * rng.standard_normal((n, dims.d_x))
    f_y = 0.5 * rng.standard_normal((n, dims.d_y))
    return f_x, f_y


def finite_difference(fn, arrays, step: float = 1e-5):
    """Central finite differences of scalar fn() w.r.t. each array, in place."""
    grads = []
    for arr in arrays:
        grad = np.zeros_like(arr)
        flat = arr.reshape(-1)
        grad_flat = grad.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + step
            up = fn()
            flat[i] = keep - step
            down = fn()
            flat[i] = keep
            grad_flat[i] = (up - down) / (2.0 * step)
        grads.append(grad)
    return grads


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-5) -> float:
    """Elementwise |a - n| / max(|a|, |n|, floor), reduced to the maximum.

    The floor sets the scale below which a gradient element counts as zero:
    central differences of an O(10) loss at step 1e-5 carry ~1e-10 absolute
    roundoff, so 1e-5 separates that noise from any real gradient error
    (a wrong formula shifts an element by its own magnitude, never by 1e-10).
    """
    if analytic.size == 0:
        return 0.0
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float((np.abs(analytic - numeric) / scale).max())


def assert_gradients_match(fn, params, analytic_grads, tol: float = 1e-4):
    numeric = finite_difference(fn, [p.data for p in params])
    for p, a, n in zip(params, analytic_grads, numeric):
        err = max_rel_error(a, n)
        assert err <= tol, f"gradient mismatch (rel err {err:.2e} > {tol})"


@pytest.fixture
def tmp_path_str(tmp_path):
    return str(tmp_path)


@pytest.fixture(scope="session")
def default_dataset(tmp_path_factory):
    """The generator's default dataset (40 classes x 200 samples), shared by
    the heavier integration tests."""
    from sadvae.data import load_dataset
    from sadvae.synthetic import generate_synthetic_dataset

    out = tmp_path_factory.mktemp("default_synth")
    manifest_path, _ = generate_synthetic_dataset(out, seed=0)
    return load_dataset(manifest_path)
