"""Qualitative trends of the benchmarks at the default settings.

These run the full ten seeds and take minutes. Deselect them with
``pytest -m "not slow"``.
"""

import numpy as np
import pytest

from gepbench import harness

pytestmark = pytest.mark.slow

# A trend holds if it shows in at least this many of the ten seeds
MAJORITY = 6


def test_severity_lowers_accuracy():

    cfg = harness.ExperimentConfig(methods=["conf"], corruption_families=["additive_noise"])
    report = harness.run_shift_benchmark(cfg)

    holds = 0
    for seed in range(cfg.n_seeds):
        # Records come sorted by seed within a target
        curve = [
            report.select(target=f"corrupt:additive_noise:{s}")[seed].true_accuracy
            for s in range(1, 6)
        ]
        holds += bool(np.all(np.diff(curve) <= 0))
    assert holds >= MAJORITY

    for diag in (
        report.metadata["seeds"][str(i)]["conditions"]["clean"]["calibration"]["conf"]
        for i in range(cfg.n_seeds)
    ):
        assert diag["val_error"] <= max(1, diag["largest_tie"]) / diag["n_val"] + 1e-12


def test_ensemble_size_saturates():

    report = harness.run_ensemble_sweep(harness.ExperimentConfig(methods=["ma"]))
    assert report.metadata["sizes"] == [2, 4, 6, 8, 10]

    def far(k):
        return report.cell(f"M={k}", "ma", "far")

    # More members, less spread across seeds
    assert far(10).std <= far(2).std

    # Little left to gain past four members
    assert abs(far(10).mae - far(4).mae) / far(4).mae < 0.2


def test_simplicity_bias_overconfidence():

    cfg = harness.ExperimentConfig(methods=["conf"])
    report = harness.run_simplicity_bias(cfg)

    for i in range(cfg.n_seeds):
        reliance = report.metadata["seeds"][str(i)]["conditions"]["biased"]["reliance"]
        assert reliance["train_accuracy"] >= 0.99

    biased = report.cell("biased", "conf", "slab:shifted")
    assert biased.mean_signed_error > 0.1

    shrinks = 0
    for seed in range(cfg.n_seeds):
        gap = {
            condition: report.select(condition, "conf", "slab:shifted")[seed].signed_error
            for condition in ("biased", "scrambled")
        }
        shrinks += gap["scrambled"] < gap["biased"]
    assert shrinks >= MAJORITY
