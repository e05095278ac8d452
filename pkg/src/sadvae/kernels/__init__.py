"""Hot numeric kernels with a compiled core and a NumPy fallback.

The affine forward/backward passes and the Adam update dominate training
time, so they live behind a two-implementation facade:

* ``sadvae.kernels._native`` - Cython extension, built at install time.
* ``sadvae.kernels.reference`` - pure NumPy, always available.

Selection happens once at import. SADVAE_BACKEND controls it:
``auto`` (default) prefers the extension, ``native`` requires it,
``python`` forces the fallback. ``BACKEND`` names the active choice.

Both implementations are deterministic run-to-run; they are not required
to agree bit-for-bit with each other (summation orders differ).
"""

import os

_requested = os.environ.get("SADVAE_BACKEND", "auto")

if _requested not in ("auto", "native", "python"):
    raise ImportError(
        f"SADVAE_BACKEND={_requested!r} is not one of 'auto', 'native', 'python'"
    )

if _requested == "python":
    from . import reference as _impl

    BACKEND = "python"
else:
    try:
        from . import _native as _impl

        BACKEND = "native"
    except ImportError:
        if _requested == "native":
            raise
        from . import reference as _impl

        BACKEND = "python"

affine_forward = _impl.affine_forward
affine_backward_input = _impl.affine_backward_input
affine_backward_weight = _impl.affine_backward_weight
affine_backward_bias = _impl.affine_backward_bias
adam_step = _impl.adam_step
