"""Cross-modal zero-shot classification engine built on disentangled VAEs.

Feature vectors from two modalities (per-sample "skeleton" features and
per-class "text" features) are aligned in a shared latent space by a pair of
variational autoencoders. The skeleton latent is split into a semantic part,
aligned with the text latent, and a style part that absorbs nuisance
variation; an adversarial discriminator penalises statistical dependence
between the two parts. Seen/unseen classifiers plus a calibrated domain gate
provide zero-shot and generalized zero-shot predictions.
"""

import os as _os

# BLAS thread caps must be in the environment before NumPy loads its backend.
# SADVAE_THREADS defaults to 1 so repeated runs are bit-reproducible.
_cap = _os.environ.get("SADVAE_THREADS", "1")
for _var in (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
):
    _os.environ.setdefault(_var, _cap)
del _os, _cap, _var

__version__ = "0.1.0"
