"""Ablation variant wiring and the canonical-correlation diagnostic."""

import numpy as np
import pytest

from sadvae.ablation import (
    LatentDependence,
    latent_dependence,
    max_canonical_correlation,
    run_ablation,
    variant_config,
)
from sadvae.data import RunConfig, load_dataset, make_random_split
from sadvae.errors import ArgumentError
from sadvae.model import ModelDims, init_model
from sadvae.synthetic import generate_synthetic_dataset


class TestVariantConfig:
    def test_naive_disables_style_head_and_disc(self):
        config = RunConfig(dim_r=16, dim_v=8, lambda_2=0.3)
        adjusted, disc_enabled = variant_config(config, "naive")
        assert adjusted.dim_v == 0
        assert adjusted.lambda_2 == 0.0
        assert adjusted.dim_r == 16  # capacity parity: semantic width kept
        assert not disc_enabled

    def test_fd_keeps_heads_disables_disc(self):
        config = RunConfig(dim_r=16, dim_v=8, lambda_2=0.3)
        adjusted, disc_enabled = variant_config(config, "fd")
        assert adjusted.dim_v == 8
        assert adjusted.lambda_2 == 0.0
        assert not disc_enabled

    def test_fd_tc_full(self):
        config = RunConfig(dim_r=16, dim_v=8, lambda_2=0.3)
        adjusted, disc_enabled = variant_config(config, "fd_tc")
        assert adjusted == config
        assert disc_enabled

    def test_naive_equals_degenerate_fd(self):
        # fd with dim_v = 0 and lambda_2 = 0 coincides with naive
        config = RunConfig(dim_r=16, dim_v=0, lambda_2=0.0)
        naive_cfg, naive_disc = variant_config(config, "naive")
        fd_cfg, fd_disc = variant_config(config, "fd")
        assert naive_cfg == fd_cfg
        assert naive_disc == fd_disc

    def test_unknown_variant(self):
        with pytest.raises(ArgumentError):
            variant_config(RunConfig(), "everything")


class TestLatentDependence:
    def test_copied_heads_give_one(self):
        dims = ModelDims(d_x=10, d_y=6, dim_r=4, dim_v=4)
        state = init_model(dims, np.random.default_rng(0), dtype=np.float64)
        # style head copies the semantic head: posterior means coincide
        state.skeleton_encoder.head_v = state.skeleton_encoder.head_r
        f_x = np.random.default_rng(1).standard_normal((64, 10))
        result = latent_dependence(state, f_x)
        assert not result.degenerate
        assert result.value == pytest.approx(1.0, abs=1e-9)

    def test_independent_blocks_within_permutation_null(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((200, 5))
        b = rng.standard_normal((200, 3))
        observed = max_canonical_correlation(a, b).value
        # permutation-test oracle: null distribution of the statistic
        null = np.empty(200)
        for i in range(200):
            null[i] = max_canonical_correlation(a, b[rng.permutation(200)]).value
        assert observed <= np.quantile(null, 0.99)

    def test_affine_invariance(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((100, 4))
        b = a @ rng.standard_normal((4, 3)) + rng.standard_normal((100, 3)) * 0.5
        base = max_canonical_correlation(a, b).value
        m_a = rng.standard_normal((4, 4)) + 4 * np.eye(4)
        m_b = rng.standard_normal((3, 3)) + 4 * np.eye(3)
        transformed = max_canonical_correlation(a @ m_a + 1.5, b @ m_b - 0.5).value
        assert transformed == pytest.approx(base, abs=1e-8)
        assert 0.0 <= base <= 1.0

    def test_zero_variance_degenerate(self):
        a = np.ones((50, 3))
        b = np.random.default_rng(4).standard_normal((50, 2))
        result = max_canonical_correlation(a, b)
        assert result == LatentDependence(0.0, True)

    def test_zero_width_block_degenerate(self):
        dims = ModelDims(d_x=10, d_y=6, dim_r=4, dim_v=0)
        state = init_model(dims, np.random.default_rng(5), dtype=np.float64)
        f_x = np.random.default_rng(6).standard_normal((32, 10))
        result = latent_dependence(state, f_x)
        assert result.degenerate and result.value == 0.0

    def test_small_batch_rejected(self):
        dims = ModelDims(d_x=10, d_y=6, dim_r=4, dim_v=2)
        state = init_model(dims, np.random.default_rng(7))
        with pytest.raises(ArgumentError):
            latent_dependence(state, np.zeros((9, 10), dtype=np.float32))


@pytest.fixture(scope="module")
def ablation_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("abl_synth")
    manifest_path, _ = generate_synthetic_dataset(
        out, num_classes=10, samples_per_class=40, d_x=20, d_y=10,
        signal_dim=5, nuisance_dim=10, seed=3,
    )
    return load_dataset(manifest_path)


class TestRunAblation:
    def config(self):
        return RunConfig(dim_r=8, dim_v=3, learning_rate=1e-3, batch_size=16,
                         epochs=3, lambda_2=0.011, n_d=5, samples_per_class=60,
                         seed=1)

    def test_single_variant_equals_plain_run(self, ablation_dataset):
        from sadvae.evaluation import evaluate_full

        split = make_random_split(ablation_dataset.manifest, 2, seed=0)
        results = run_ablation(ablation_dataset, split, self.config(), variants=("fd_tc",))
        assert len(results) == 1
        zsl, gzsl = evaluate_full(ablation_dataset, split, self.config())
        assert results[0].zsl == zsl
        assert results[0].gzsl == gzsl

    def test_zsl_only_skips_gzsl(self, ablation_dataset):
        split = make_random_split(ablation_dataset.manifest, 2, seed=0)
        results = run_ablation(ablation_dataset, split, self.config(),
                               variants=("naive", "fd"), include_gzsl=False)
        assert all(r.gzsl is None for r in results)
        assert all(0 <= r.zsl <= 100 for r in results)
        assert results[0].dependence.degenerate  # naive has no style head

    def test_empty_variants_rejected(self, ablation_dataset):
        split = make_random_split(ablation_dataset.manifest, 2, seed=0)
        with pytest.raises(ArgumentError):
            run_ablation(ablation_dataset, split, self.config(), variants=())

    def test_deterministic(self, ablation_dataset):
        split = make_random_split(ablation_dataset.manifest, 2, seed=0)
        a = run_ablation(ablation_dataset, split, self.config(),
                         variants=("fd",), include_gzsl=False)
        b = run_ablation(ablation_dataset, split, self.config(),
                         variants=("fd",), include_gzsl=False)
        assert a == b
