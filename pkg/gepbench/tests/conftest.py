"""Pytest fixtures and helpers that can be used by all unit tests."""

import json
import tempfile

import numpy as np
import pytest
from click.testing import CliRunner

from .. import datagen, harness
from ..scripts.runner import cli


# A benchmark config small enough to run in a few seconds
tiny_config = {
    "seed": 3,
    "n_seeds": 2,
    "methods": ["conf", "lms", "ma", "ma_eps"],
    "hidden_dims": [8],
    "train": {"epochs": 4, "batch_size": 16, "learning_rate": 0.1},
    "fidelity_epochs": 4,
    "ensemble_size": 3,
    "diversity_noise": 0.05,
    "augmentation": {"count": 4},
    "source": {"n_classes": 3, "n_features": 4, "samples_per_class": 20},
    "shifts": [{"kind": "near", "samples_per_class": 10}, {"kind": "far", "samples_per_class": 10}],
    "target_samples_per_class": 20,
    "corruption_families": ["additive_noise", "feature_dropout"],
    "severities": [1, 3],
    "sweep_sizes": [1, 2, 3],
    "slab": {"n_samples": 100, "n_slabs": 3},
}


@pytest.fixture
def tiny_cfg():
    """A fast ExperimentConfig."""
    return harness.ExperimentConfig.from_config(tiny_config)


@pytest.fixture(scope="session")
def small_source():
    """A well separated three class source dataset."""
    spec = datagen.SourceSpec(
        n_classes=3, n_features=4, samples_per_class=30, cluster_separation=6.0, seed=11
    )
    return spec, datagen.make_source(spec)


@pytest.fixture
def toy_dataset():
    """Six labelled points in two dimensions."""
    features = np.array(
        [[0.0, 0.0], [0.1, 0.2], [1.0, 1.0], [0.9, 1.1], [2.0, 0.0], [2.1, -0.1]]
    )
    labels = np.array([0, 0, 1, 1, 2, 2])
    return datagen.LabeledDataset(features, labels, 3)


def write_config(directory, configdict=None):
    """Write a config dictionary as JSON into `directory`, returning its path."""
    path = directory / "config.json"
    path.write_text(json.dumps(tiny_config if configdict is None else configdict))
    return path


def run_cli(parameters, configdict=None):
    """
    Run the gepbench CLI with given parameters and config.

    Parameters
    ----------
    parameters : List[str]
        Parameters to pass to the cli, for example `["bench-shift", "--out", d]`
        (see `--help`). A `--config` option is appended pointing at the config.
    configdict : dict, optional
        Config to write to a temporary file. Defaults to `tiny_config`. If
        `False` no config option is added.

    Returns
    -------
    result : `click.testing.Result`
        Holds the captured result. Try accessing e.g. `result.exit_code`, `result.output`.
    """
    runner = CliRunner()
    if configdict is False:
        return runner.invoke(cli, parameters)

    with tempfile.NamedTemporaryFile("w+", suffix=".json") as configfile:
        configfile.write(json.dumps(tiny_config if configdict is None else configdict))
        configfile.flush()
        return runner.invoke(cli, [*parameters, "--config", configfile.name])
