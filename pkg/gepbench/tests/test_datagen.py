"""Test the synthetic datasets and their transformations."""

import numpy as np
import pytest

from gepbench import config, datagen, nn
from gepbench.rng import Rng


def _spec(**kwargs):
    return datagen.SourceSpec(**kwargs)


def test_source_counting():

    data = datagen.make_source(_spec(n_classes=2, samples_per_class=1, seed=1))

    assert data.n_samples == 2
    assert sorted(data.labels.tolist()) == [0, 1]
    assert data.provenance == "source"


def test_source_zero_spread():

    spec = _spec(within_class_spread=0.0, samples_per_class=5, seed=2)
    data = datagen.make_source(spec)
    means = datagen.class_means(spec)

    assert np.array_equal(data.features, means[data.labels])


def test_class_means_separation():

    spec = _spec(n_classes=6, n_features=3, cluster_separation=4.0, seed=8)
    means = datagen.class_means(spec)
    dist = np.linalg.norm(means[:, np.newaxis] - means[np.newaxis], axis=-1)

    assert dist[np.triu_indices(6, k=1)].min() >= 4.0
    assert np.array_equal(means, datagen.class_means(spec))


def test_class_means_infeasible():

    spec = _spec(n_classes=50, n_features=1, seed=0)

    with pytest.raises(datagen.DatasetError, match="SourceSpec"):
        datagen.class_means(spec)


def test_default_source_separable():

    spec = _spec(seed=3)
    data = datagen.make_source(spec)
    train, val = datagen.split(data, (0.8, 0.2), seed=4)

    # Nearest class mean classifier
    means = datagen.class_means(spec)
    dist = np.linalg.norm(val.features[:, np.newaxis] - means[np.newaxis], axis=-1)
    assert np.mean(np.argmin(dist, axis=1) == val.labels) >= 0.95

    model = nn.train_sgd(train, nn.TrainConfig(seed=5), (spec.n_features, 32, spec.n_classes))
    assert nn.accuracy(model, val) >= 0.95


def test_target_zero_shift_matches_source():

    spec = _spec(seed=12)
    shift = datagen.ShiftSpec(kind="far", magnitude=0.0, seed=12)

    source = datagen.make_source(spec)
    target = datagen.make_target(spec, shift)

    assert np.array_equal(source.features, target.features)
    assert np.array_equal(source.labels, target.labels)
    assert target.provenance == "target:shift=far"


def test_target_zero_spread_distance():

    spec = _spec(within_class_spread=0.0, samples_per_class=4, seed=6)
    target = datagen.make_target(spec, datagen.ShiftSpec(kind="far", magnitude=2.0, seed=7))
    means = datagen.class_means(spec)

    dist = np.linalg.norm(target.features - means[target.labels], axis=1)
    assert dist == pytest.approx(np.full(target.n_samples, 2.0), abs=1e-12)


def test_target_default_magnitudes():

    assert datagen.ShiftSpec(kind="near").effective_magnitude == 0.5
    assert datagen.ShiftSpec(kind="far").effective_magnitude == 2.0
    assert datagen.ShiftSpec(kind="far", magnitude=1.0).effective_magnitude == 1.0

    spec = _spec(samples_per_class=10, seed=1)
    target = datagen.make_target(spec, datagen.ShiftSpec(samples_per_class=3, seed=2))
    assert target.class_counts().tolist() == [3, 3, 3, 3]


def test_corruption_zero_scale():

    base = datagen.make_source(_spec(samples_per_class=5, seed=1))
    for family in datagen.CORRUPTION_FAMILIES:
        spec = datagen.CorruptionSpec(family=family, severity=4, scale=0.0, seed=3)
        out = datagen.make_corrupted(base, spec)
        assert np.allclose(out.features, base.features, rtol=0, atol=1e-12)
        assert np.array_equal(out.labels, base.labels)


def test_corruption_recipe():

    x = np.array([[1.0, 2.0], [3.0, 4.0], [-1.0, 0.5], [0.0, 0.0]])
    base = datagen.LabeledDataset(x, np.array([0, 1, 0, 1]), 2)
    spec = datagen.CorruptionSpec(family="additive_noise", severity=3, seed=11)

    out = datagen.make_corrupted(base, spec)
    gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(11)))

    assert np.array_equal(out.features, x + 1.5 * gen.standard_normal((4, 2)))
    assert out.provenance == "source+corrupt:additive_noise:3"


@pytest.mark.parametrize("family", datagen.CORRUPTION_FAMILIES)
def test_corruption_monotone(family):

    scales = datagen.SEVERITY_SCALES[family]
    assert all(a < b for a, b in zip(scales[:-1], scales[1:]))

    base = datagen.make_source(_spec(samples_per_class=300, seed=21))
    displacement = [
        np.mean(
            np.abs(
                datagen.make_corrupted(
                    base, datagen.CorruptionSpec(family=family, severity=s, seed=5)
                ).features
                - base.features
            )
        )
        for s in range(1, 6)
    ]
    assert all(a <= b for a, b in zip(displacement[:-1], displacement[1:]))


def test_label_noise():

    base = datagen.make_source(_spec(n_classes=2, samples_per_class=500, seed=1))

    same = datagen.inject_label_noise(base, datagen.LabelNoiseSpec(rate=0.0, seed=1))
    assert np.array_equal(same.labels, base.labels)

    flipped = datagen.inject_label_noise(base, datagen.LabelNoiseSpec(rate=1.0, seed=1))
    assert np.array_equal(flipped.labels, 1 - base.labels)

    noisy = datagen.inject_label_noise(base, datagen.LabelNoiseSpec(rate=0.05, seed=2))
    assert np.count_nonzero(noisy.labels != base.labels) == 50
    assert np.array_equal(noisy.features, base.features)
    assert noisy.provenance == "source+label_noise(0.05)"


def test_label_noise_multiclass_always_changes():

    base = datagen.make_source(_spec(n_classes=5, samples_per_class=40, seed=3))
    noisy = datagen.inject_label_noise(base, datagen.LabelNoiseSpec(rate=0.3, seed=4))

    assert np.count_nonzero(noisy.labels != base.labels) == 60


def test_measurement_noise_identity():

    base = datagen.make_source(_spec(samples_per_class=5, seed=1))
    spec = datagen.MeasurementNoiseSpec(blur_sigma=0.0, additive_sigma=0.0, seed=1)

    assert np.array_equal(datagen.inject_measurement_noise(base, spec).features, base.features)


def test_measurement_noise_constant_row():

    base = datagen.LabeledDataset(np.full((2, 6), 3.5), np.array([0, 1]), 2)
    spec = datagen.MeasurementNoiseSpec(blur_sigma=1.5, additive_sigma=0.0)

    assert datagen.inject_measurement_noise(base, spec).features == pytest.approx(
        base.features, abs=1e-12
    )


def test_measurement_noise_recipe():

    base = datagen.LabeledDataset(np.array([[1.0, 0.0, 0.0, 0.0]]), np.array([0]), 1)
    spec = datagen.MeasurementNoiseSpec(blur_sigma=0.5, additive_sigma=0.07, seed=5)

    # Width 0.5 truncated at 1.5 keeps offsets -1, 0, 1 with weights
    # exp(-2), 1, exp(-2) before normalisation
    w1 = np.exp(-2.0) / (1.0 + 2.0 * np.exp(-2.0))
    w0 = 1.0 - 2.0 * w1
    assert (w0, w1) == pytest.approx((0.78699, 0.10651), abs=1e-5)
    # Reflection mirrors x0 to offset -1
    blurred = np.array([w0 + w1, w1, 0.0, 0.0])

    gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(5)))
    expected = blurred + 0.07 * gen.standard_normal((1, 4))[0]

    out = datagen.inject_measurement_noise(base, spec)
    assert out.features[0] == pytest.approx(expected, abs=1e-12)


def test_undersample():

    base = datagen.make_source(_spec(n_classes=3, samples_per_class=100, seed=1))

    same = datagen.undersample(base, datagen.UndersampleSpec(drop_fraction=0.0, seed=1))
    assert np.array_equal(same.features, base.features)

    thinned = datagen.undersample(base, datagen.UndersampleSpec(drop_fraction=0.2, seed=1))
    assert thinned.class_counts().tolist() == [80, 80, 100]

    gone = datagen.undersample(
        base, datagen.UndersampleSpec(target_classes=[2], drop_fraction=1.0, seed=1)
    )
    assert gone.class_counts().tolist() == [100, 100, 0]
    assert gone.n_classes == 3

    with pytest.raises(datagen.DatasetError):
        datagen.undersample(gone, datagen.UndersampleSpec(target_classes=[2], seed=1))


def test_slab_unshifted():

    data = datagen.make_slab(datagen.SlabSpec(n_samples=500, seed=1))

    assert np.mean((data.features[:, 0] > 0) == data.labels) == 1.0
    assert data.class_counts().tolist() == [250, 250]
    assert data.n_features == 3


def test_slab_shifted():

    spec = datagen.SlabSpec(n_samples=2000, shift_simple_feature=True, seed=4)
    data = datagen.make_slab(spec)

    sign_accuracy = np.mean((data.features[:, 0] > 0) == data.labels)
    assert sign_accuracy == pytest.approx(0.5, abs=0.05)

    # The slab coordinates still determine the label
    slab_rule = datagen.slab_index(data.features[:, 1], spec.n_slabs) % 2
    assert np.mean(slab_rule == data.labels) >= 0.95
    assert data.provenance == "slab:shifted"


def test_slab_spec_strict_bool():

    with pytest.raises(config.GepConfigError):
        datagen.SlabSpec.from_config({"shift_simple_feature": "yes"})


def test_split_counts():

    base = datagen.make_source(_spec(n_classes=3, samples_per_class=10, seed=1))
    train, val = datagen.split(base, (0.8, 0.2), seed=2)

    assert train.class_counts().tolist() == [8, 8, 8]
    assert val.class_counts().tolist() == [2, 2, 2]
    assert train.provenance == "source+split:0"

    # Every row lands in exactly one part
    rows = np.concatenate([train.features, val.features])
    assert np.array_equal(np.sort(rows, axis=0), np.sort(base.features, axis=0))


def test_split_deterministic():

    base = datagen.make_source(_spec(samples_per_class=20, seed=1))

    assert datagen.split(base, seed=7) == datagen.split(base, seed=7)
    assert datagen.split(base, seed=7)[0] != datagen.split(base, seed=8)[0]


def test_split_too_small():

    base = datagen.make_source(_spec(n_classes=2, samples_per_class=1, seed=1))

    with pytest.raises(datagen.DatasetError):
        datagen.split(base, (0.8, 0.2), seed=0)


def test_scramble_feature():

    base = datagen.make_source(_spec(samples_per_class=20, seed=1))
    out = datagen.scramble_feature(base, 0, seed=3)

    assert np.array_equal(np.sort(out.features[:, 0]), np.sort(base.features[:, 0]))
    assert not np.array_equal(out.features[:, 0], base.features[:, 0])
    assert np.array_equal(out.features[:, 1:], base.features[:, 1:])

    with pytest.raises(datagen.DatasetError):
        datagen.scramble_feature(base, 8, seed=3)


def test_dataset_validation():

    with pytest.raises(datagen.DatasetError):
        datagen.LabeledDataset(np.zeros((2, 2)), np.array([0, 2]), 2)

    with pytest.raises(datagen.DatasetError):
        datagen.LabeledDataset(np.zeros((2, 2)), np.array([0.5, 1]), 2)

    with pytest.raises(datagen.DatasetError):
        datagen.LabeledDataset(np.zeros((0, 2)), np.array([], dtype=int), 2)

    data = datagen.LabeledDataset(np.zeros((2, 2)), np.array([0.0, 1.0]), 2)
    assert data.labels.dtype.kind == "i"
    with pytest.raises(ValueError):
        data.features[0, 0] = 1.0


def test_spec_validation():

    with pytest.raises(config.GepConfigError):
        datagen.ShiftSpec.from_config({"kind": "sideways"})

    with pytest.raises(config.GepConfigError):
        datagen.CorruptionSpec.from_config({"severity": 6})

    with pytest.raises(config.GepConfigError):
        datagen.UndersampleSpec.from_config({"target_classes": [-1]})

    with pytest.raises(config.GepConfigError):
        datagen.SourceSpec.from_config({"cluster_separation": 0.0})


def test_measurement_noise_kernel_support():

    row = np.zeros((1, 6))
    row[0, 2] = 1.0
    base = datagen.LabeledDataset(row, np.array([0]), 1)

    out = datagen.inject_measurement_noise(
        base, datagen.MeasurementNoiseSpec(blur_sigma=0.5, additive_sigma=0.0)
    ).features[0]

    w1 = np.exp(-2.0) / (1.0 + 2.0 * np.exp(-2.0))
    assert out == pytest.approx([0.0, w1, 1.0 - 2.0 * w1, w1, 0.0, 0.0], abs=1e-12)

    # Width 1 reaches offsets up to 3, nothing further
    row = np.zeros((1, 9))
    row[0, 4] = 1.0
    out = datagen.inject_measurement_noise(
        datagen.LabeledDataset(row, np.array([0]), 1),
        datagen.MeasurementNoiseSpec(blur_sigma=1.0, additive_sigma=0.0),
    ).features[0]
    assert out[0] == 0.0 and out[8] == 0.0
    assert out[1] > 0.0 and out[7] > 0.0
