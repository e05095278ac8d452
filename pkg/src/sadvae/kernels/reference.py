"""NumPy implementation of the hot kernels.

Used when the compiled extension is unavailable or when
SADVAE_BACKEND=python is set. Same call signatures as ``_native``.
"""

import numpy as np


def affine_forward(x, w, b):
    # x: (n, d_in), w: (d_out, d_in), b: (d_out,) -> (n, d_out)
    return x @ w.T + b


def affine_backward_input(w, gy):
    return gy @ w


def affine_backward_weight(x, gy):
    return gy.T @ x


def affine_backward_bias(gy):
    return gy.sum(axis=0)


def adam_step(param, grad, m, v, t, lr, beta1, beta2, eps):
    """One bias-corrected Adam update, in place on param/m/v.

    t is the 1-based step count after this update. Scalar factors are
    evaluated in double precision; array math stays in param's dtype.
    """
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)
