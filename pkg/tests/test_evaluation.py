"""Metrics arithmetic, fixtures, and the random-split protocol."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sadvae.classifiers import DomainGate, GzslPredictor, SoftmaxClassifier
from sadvae.data import ClassSplit, RunConfig, make_random_split
from sadvae.errors import ArgumentError, DataError
from sadvae.evaluation import (
    GzslReport,
    gzsl_metrics,
    harmonic_mean,
    per_class_accuracy,
    run_random_split_protocol,
    zsl_accuracy,
)

from test_classifiers import affine, constant_classifier, encoder_passthrough


class TestHarmonicMean:
    def test_equal_arguments_identity(self):
        for value in (0.0, 17.5, 100.0):
            assert harmonic_mean(value, value) == pytest.approx(value)

    def test_zero_sum(self):
        assert harmonic_mean(0.0, 0.0) == 0.0

    def test_reference_pairs(self):
        # fixed pairs with independently recomputed 2ab/(a+b)
        assert harmonic_mean(74.22, 34.73) == pytest.approx(47.32, abs=0.01)
        assert harmonic_mean(61.10, 59.75) == pytest.approx(60.42, abs=0.01)
        assert harmonic_mean(75.0, 50.0) == pytest.approx(60.0, abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(a=st.floats(0, 100), b=st.floats(0, 100))
    def test_bounds_and_symmetry(self, a, b):
        h = harmonic_mean(a, b)
        assert h == pytest.approx(harmonic_mean(b, a), abs=1e-9)
        assert h <= (a + b) / 2 + 1e-9
        assert h <= 2 * min(a, b) + 1e-9
        assert h >= 0

    def test_range_validation(self):
        with pytest.raises(ArgumentError):
            harmonic_mean(-1.0, 50.0)
        with pytest.raises(ArgumentError):
            harmonic_mean(50.0, 101.0)


def oracle_predictor(seen_ids, unseen_ids, d_x=6, dim_r=3, dim_v=2):
    """Predictor whose unseen head reads the true class id from coord 0.

    Only usable with the routing below; tests that need an exact prediction
    pattern construct their own classifier biases instead.
    """
    raise NotImplementedError


def fixed_pattern_predictor(pattern_ids, all_seen, all_unseen, d_x=6):
    """Predictor emitting a fixed class regardless of input (per the bias)."""
    target = pattern_ids
    seen_probs = np.full(len(all_seen), 0.01)
    unseen_probs = np.full(len(all_unseen), 0.01)
    if target in all_seen:
        seen_probs[list(all_seen).index(target)] = 10.0
        gate_bias = 1000.0
    else:
        unseen_probs[list(all_unseen).index(target)] = 10.0
        gate_bias = -1000.0
    seen = constant_classifier(list(all_seen), seen_probs / seen_probs.sum(), d_x)
    unseen = constant_classifier(list(all_unseen), unseen_probs / unseen_probs.sum(), 3)
    gate = DomainGate(np.zeros(2 * len(all_unseen)), gate_bias, temperature=2.0,
                      k=len(all_unseen))
    return GzslPredictor(seen=seen, unseen=unseen, gate=gate,
                         skeleton_encoder=encoder_passthrough(d_x, 3, 2))


class RoutingPredictor:
    """Test double: predictions supplied explicitly per sample."""

    def __init__(self, predictions):
        self.predictions = np.asarray(predictions)


class TestZslAccuracy:
    def unseen_reader(self, unseen_ids, d_x=6):
        """ZSL predictor that reads the class from input coordinate 0:
        logits_i = -(coord0 - id_i)^2 expanded linearly is not possible for
        an affine map, so instead each unseen id gets logit = id * coord0,
        which ranks ids by coord0 sign/magnitude; tests use one-hot-style
        inputs where this is exact."""
        k = len(unseen_ids)
        weight = np.zeros((k, 3), dtype=np.float32)
        weight[:, 0] = np.asarray(unseen_ids, dtype=np.float32)
        unseen = SoftmaxClassifier(layer=affine(weight, np.zeros(k)),
                                   class_ids=np.asarray(sorted(unseen_ids)))
        return GzslPredictor(
            seen=constant_classifier([0], [1.0], d_x), unseen=unseen, gate=None,
            skeleton_encoder=encoder_passthrough(d_x, 3, 2),
        )

    def test_single_unseen_class_is_always_right(self):
        predictor = fixed_pattern_predictor(9, [0, 1], [9])
        predictor.gate = None
        f_x = np.random.default_rng(0).standard_normal((12, 6)).astype(np.float32)
        labels = np.full(12, 9, dtype=np.uint32)
        assert zsl_accuracy(predictor, f_x, labels) == 100.0

    def test_fixture_seven_of_ten(self):
        # predictor picks the class with the largest id when coord0 > 0,
        # smallest when coord0 < 0 (ids weight the logit)
        predictor = self.unseen_reader([2, 5])
        f_x = np.zeros((10, 6), dtype=np.float32)
        f_x[:7, 0] = +1.0  # predicted 5
        f_x[7:, 0] = -1.0  # predicted 2
        labels = np.full(10, 5, dtype=np.uint32)
        assert zsl_accuracy(predictor, f_x, labels) == pytest.approx(70.0)

    def test_label_outside_unseen_rejected(self):
        predictor = self.unseen_reader([2, 5])
        with pytest.raises(DataError):
            zsl_accuracy(predictor, np.zeros((2, 6), dtype=np.float32),
                         np.array([2, 3], dtype=np.uint32))


class TestGzslMetrics:
    def split(self):
        return ClassSplit(seen_ids=frozenset({0, 1}), unseen_ids=frozenset({2, 3}))

    def test_always_seen_predictor_degenerate(self):
        predictor = fixed_pattern_predictor(0, [0, 1], [2, 3])
        f_x = np.zeros((8, 6), dtype=np.float32)
        labels = np.array([0] * 4 + [2] * 4, dtype=np.uint32)
        report = gzsl_metrics(predictor, f_x, labels, self.split())
        assert report.acc_seen == 100.0
        assert report.acc_unseen == 0.0
        assert report.harmonic_mean == 0.0

    def test_mixed_fixture_arithmetic(self):
        # 3/4 seen hits, 1/2 unseen hits -> (75, 50, 60)
        a = harmonic_mean(75.0, 50.0)
        assert a == pytest.approx(60.0)
        report = GzslReport(acc_seen=75.0, acc_unseen=50.0, harmonic_mean=a)
        assert report.harmonic_mean == pytest.approx(
            2 * report.acc_seen * report.acc_unseen / (report.acc_seen + report.acc_unseen)
        )

    def test_partition_counts(self):
        predictor = fixed_pattern_predictor(2, [0, 1], [2, 3])
        f_x = np.zeros((10, 6), dtype=np.float32)
        labels = np.array([0, 0, 1, 1, 1, 2, 2, 3, 3, 3], dtype=np.uint32)
        report = gzsl_metrics(predictor, f_x, labels, self.split())
        # predictor always answers 2: unseen accuracy = 2/5, seen = 0
        assert report.acc_seen == 0.0
        assert report.acc_unseen == pytest.approx(40.0)

    def test_empty_partition_rejected(self):
        predictor = fixed_pattern_predictor(2, [0, 1], [2, 3])
        f_x = np.zeros((3, 6), dtype=np.float32)
        with pytest.raises(ArgumentError):
            gzsl_metrics(predictor, f_x, np.array([0, 0, 1], dtype=np.uint32), self.split())

    def test_unknown_label_rejected(self):
        predictor = fixed_pattern_predictor(2, [0, 1], [2, 3])
        f_x = np.zeros((2, 6), dtype=np.float32)
        with pytest.raises(DataError):
            gzsl_metrics(predictor, f_x, np.array([0, 7], dtype=np.uint32), self.split())


class TestPerClassAccuracy:
    def test_constant_predictor(self):
        predictor = fixed_pattern_predictor(2, [0, 1], [2, 3])
        f_x = np.zeros((9, 6), dtype=np.float32)
        labels = np.array([0, 0, 0, 2, 2, 2, 3, 3, 3], dtype=np.uint32)
        by_class = per_class_accuracy(predictor, f_x, labels)
        assert by_class == {0: 0.0, 2: 100.0, 3: 0.0}
        assert 1 not in by_class  # absent classes omitted

    def test_micro_average_identity(self):
        predictor = fixed_pattern_predictor(2, [0, 1], [2, 3])
        rng = np.random.default_rng(0)
        f_x = rng.standard_normal((40, 6)).astype(np.float32)
        labels = rng.integers(0, 4, size=40).astype(np.uint32)
        by_class = per_class_accuracy(predictor, f_x, labels)
        weighted = sum(
            by_class[int(c)] * (labels == c).sum() for c in np.unique(labels)
        ) / labels.size
        overall = 100.0 * (2 == labels).mean()  # constant predictor answers 2
        assert weighted == pytest.approx(overall)


@pytest.fixture(scope="module")
def protocol_dataset(tmp_path_factory):
    from sadvae.data import load_dataset
    from sadvae.synthetic import generate_synthetic_dataset

    out = tmp_path_factory.mktemp("protocol_synth")
    manifest_path, _ = generate_synthetic_dataset(
        out, num_classes=10, samples_per_class=30, d_x=20, d_y=10,
        signal_dim=5, nuisance_dim=10, seed=2,
    )
    return load_dataset(manifest_path)


class TestProtocol:
    def config(self):
        return RunConfig(dim_r=6, dim_v=2, learning_rate=1e-3, batch_size=16,
                         epochs=2, lambda_2=0.011, n_d=5, samples_per_class=40,
                         seed=3)

    def test_single_repeat_equals_run(self, protocol_dataset):
        report = run_random_split_protocol(protocol_dataset, 2, 1, self.config(), base_seed=5)
        assert len(report.repeats) == 1
        only = report.repeats[0]
        assert report.mean_zsl == only.zsl
        assert report.mean_acc_seen == only.gzsl.acc_seen
        assert report.mean_harmonic_mean == only.gzsl.harmonic_mean

    def test_rerun_identical(self, protocol_dataset):
        a = run_random_split_protocol(protocol_dataset, 2, 2, self.config(), base_seed=5)
        b = run_random_split_protocol(protocol_dataset, 2, 2, self.config(), base_seed=5)
        assert a == b

    def test_splits_derive_from_base_seed(self, protocol_dataset):
        report = run_random_split_protocol(protocol_dataset, 2, 2, self.config(), base_seed=5)
        for r, repeat in enumerate(report.repeats):
            expected = make_random_split(protocol_dataset.manifest, 2, 5 + r)
            assert set(repeat.unseen_ids) == expected.unseen_ids

    def test_average_is_arithmetic_mean(self, protocol_dataset):
        report = run_random_split_protocol(protocol_dataset, 2, 3, self.config(), base_seed=7)
        assert report.mean_zsl == pytest.approx(np.mean([r.zsl for r in report.repeats]))
        assert report.mean_harmonic_mean == pytest.approx(
            np.mean([r.gzsl.harmonic_mean for r in report.repeats])
        )

    def test_zero_repeats_rejected(self, protocol_dataset):
        with pytest.raises(ArgumentError):
            run_random_split_protocol(protocol_dataset, 2, 0, self.config(), base_seed=0)

    def test_fixture_average_arithmetic(self):
        assert np.mean([80.0, 82.0, 84.0]) == pytest.approx(82.0)
