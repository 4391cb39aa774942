"""Test the command line interface."""

import json

import numpy as np
import pytest

from gepbench import __version__, fileformats, gep, harness, scoring
from gepbench.rng import split, stream
from gepbench.scripts import runner

from .conftest import run_cli, tiny_config


SUBCOMMANDS = [
    "gen",
    "train",
    "score",
    "calibrate",
    "predict",
    "bench-shift",
    "bench-fidelity",
    "sweep-ensemble",
    "bench-slab",
    "report",
]


def _conf_only(**kwargs):
    cfg = dict(tiny_config, methods=["conf"], n_seeds=1)
    cfg.update(kwargs)
    return cfg


def _read_json(path):
    with open(path) as fh:
        return json.load(fh)


@pytest.mark.parametrize("subcommand", SUBCOMMANDS)
def test_help(subcommand):

    result = run_cli([subcommand, "--help"], configdict=False)

    assert result.exit_code == 0
    assert "--out" in result.output


def test_version():

    result = run_cli(["--version"], configdict=False)

    assert result.exit_code == 0
    assert __version__ in result.output


def test_unknown_subcommand():

    result = run_cli(["bench-everything"], configdict=False)
    assert result.exit_code == runner.EXIT_INVALID


def test_missing_config(tmp_path):

    missing = tmp_path / "nope.json"
    result = run_cli(["bench-shift", "--out", str(tmp_path / "out"), "--config", str(missing)], False)

    assert result.exit_code == runner.EXIT_INVALID
    assert str(missing) in result.output
    assert not (tmp_path / "out").exists()


def test_config_required(tmp_path):

    result = run_cli(["bench-shift", "--out", str(tmp_path)], configdict=False)
    assert result.exit_code == runner.EXIT_INVALID


def test_invalid_config(tmp_path):

    result = run_cli(["bench-shift", "--out", str(tmp_path / "out")], {"n_seeds": 0})

    assert result.exit_code == runner.EXIT_INVALID
    assert "n_seeds" in result.output


def test_dispatch_returns_code(tmp_path):

    assert runner.dispatch(["--help"]) == runner.EXIT_OK
    assert runner.dispatch(["bench-shift", "--out", str(tmp_path)]) == runner.EXIT_INVALID


def test_bench_shift_reproducible(tmp_path):

    for name in ("a", "b"):
        result = run_cli(["bench-shift", "--out", str(tmp_path / name)], _conf_only())
        assert result.exit_code == 0, result.output

    manifest = _read_json(tmp_path / "a" / "run_manifest.json")
    assert manifest["subcommand"] == "bench-shift"
    assert manifest["seeds"]["root"] == 3
    assert len(manifest["seeds"]["derived"]) == 1
    assert "report.json" in manifest["artifacts"]
    assert "severity_clean_additive_noise.svg" in manifest["artifacts"]

    for artifact in manifest["artifacts"] + ["run_manifest.json"]:
        a = (tmp_path / "a" / artifact).read_bytes()
        b = (tmp_path / "b" / artifact).read_bytes()
        assert a == b, artifact


def test_seed_override(tmp_path):

    run_cli(["bench-shift", "--out", str(tmp_path / "a")], _conf_only())
    result = run_cli(["bench-shift", "--out", str(tmp_path / "b"), "--seed", "4"], _conf_only())
    assert result.exit_code == 0, result.output

    a = fileformats.read_report(tmp_path / "a" / "report.json")
    b = fileformats.read_report(tmp_path / "b" / "report.json")
    assert b.config["seed"] == 4
    assert [r.true_accuracy for r in a.records] != [r.true_accuracy for r in b.records]

    ma = _read_json(tmp_path / "a" / "run_manifest.json")
    mb = _read_json(tmp_path / "b" / "run_manifest.json")
    assert ma["config_sha256"] != mb["config_sha256"]


def test_jobs_do_not_change_hash(tmp_path):

    run_cli(["bench-shift", "--out", str(tmp_path / "a")], _conf_only())
    result = run_cli(["bench-shift", "--out", str(tmp_path / "b"), "--jobs", "2"], _conf_only())
    assert result.exit_code == 0, result.output

    for name in ("run_manifest.json", "report.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_psutil_timing(tmp_path):

    result = run_cli(["bench-shift", "--out", str(tmp_path), "--psutil"], _conf_only())

    assert result.exit_code == 0, result.output
    assert (tmp_path / "timing.csv").exists()
    assert "timing.csv" in _read_json(tmp_path / "run_manifest.json")["artifacts"]


def test_other_benchmarks(tmp_path):

    cfg = _conf_only(methods=["conf", "ma"], fidelity=["clean", "label_noise"])

    result = run_cli(["bench-fidelity", "--out", str(tmp_path / "fid")], cfg)
    assert result.exit_code == 0, result.output
    fid = fileformats.read_report(tmp_path / "fid" / "report.json")
    assert {r.condition for r in fid.records} == {"clean", "label_noise"}

    result = run_cli(["sweep-ensemble", "--out", str(tmp_path / "sweep"), "--sizes", "1,3"], cfg)
    assert result.exit_code == 0, result.output
    assert (tmp_path / "sweep" / "ensemble_size_far.svg").exists()

    result = run_cli(["bench-slab", "--out", str(tmp_path / "slab")], cfg)
    assert result.exit_code == 0, result.output
    assert (tmp_path / "slab" / "simplicity_gap.svg").exists()

    result = run_cli(["sweep-ensemble", "--out", str(tmp_path / "bad"), "--sizes", "0,2"], cfg)
    assert result.exit_code == runner.EXIT_INVALID


def test_report_subcommand(tmp_path):

    run_cli(["bench-shift", "--out", str(tmp_path / "run")], _conf_only())

    result = run_cli(
        ["report", "--report", str(tmp_path / "run" / "report.json"), "--out", str(tmp_path / "again")],
        configdict=False,
    )
    assert result.exit_code == 0, result.output

    for name in ("report.json", "records.csv", "summary.csv", "run_manifest.json"):
        assert (tmp_path / "again" / name).exists()
    assert (tmp_path / "again" / "report.json").read_bytes() == (
        tmp_path / "run" / "report.json"
    ).read_bytes()

    broken = tmp_path / "broken.json"
    broken.write_text("{}")
    result = run_cli(["report", "--report", str(broken), "--out", str(tmp_path / "x")], False)
    assert result.exit_code == runner.EXIT_INVALID


def test_score_logits_bundle(tmp_path):

    rng = np.random.default_rng(0)
    logits = [rng.standard_normal((50, 10)) for _ in range(10)]
    labels = rng.integers(0, 10, size=50)
    manifest = fileformats.write_logits_bundle(tmp_path / "bundle", logits, labels)

    result = run_cli(
        ["score", "--method", "ma", "--logits", str(manifest), "--out", str(tmp_path / "ma")],
        configdict=False,
    )
    assert result.exit_code == 0, result.output

    scores = fileformats.read_scores_csv(tmp_path / "ma" / "scores.csv", "ma").scores
    assert len(scores) == 50
    assert np.allclose(scores * 10, np.round(scores * 10))
    assert scores.min() >= 0.1 and scores.max() <= 1.0
    assert fileformats.read_matrix(tmp_path / "ma" / "scores.gepb")[:, 0] == pytest.approx(scores)
    assert "accuracy" in _read_json(tmp_path / "ma" / "accuracy.json")

    result = run_cli(
        ["score", "--method", "lms", "--logits", str(manifest), "--out", str(tmp_path / "lms")],
        configdict=False,
    )
    assert result.exit_code == runner.EXIT_INVALID


def test_score_usage_errors(tmp_path):

    result = run_cli(["score", "--method", "conf", "--out", str(tmp_path)], configdict=False)
    assert result.exit_code == runner.EXIT_INVALID

    result = run_cli(
        ["train", "--epsilon", "0.1", "--out", str(tmp_path)], configdict=False
    )
    assert result.exit_code == runner.EXIT_INVALID


def test_predict_pipeline(tmp_path):

    result = run_cli(["gen", "--out", str(tmp_path / "gen"), "--gepb"])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "gen" / "target_corrupt_additive_noise_3.csv").exists()
    assert (tmp_path / "gen" / "train.features.gepb").exists()

    result = run_cli(
        ["train", "--out", str(tmp_path / "model"), "--data", str(tmp_path / "gen" / "train.csv")]
    )
    assert result.exit_code == 0, result.output
    artifacts = _read_json(tmp_path / "model" / "run_manifest.json")["artifacts"]
    assert "model.json" in artifacts and "model.w0.gepb" in artifacts

    for split_name in ("val", "target_far"):
        result = run_cli(
            [
                "score",
                "--method",
                "conf",
                "--model",
                str(tmp_path / "model" / "model.json"),
                "--data",
                str(tmp_path / "gen" / f"{split_name}.csv"),
                "--out",
                str(tmp_path / split_name),
            ]
        )
        assert result.exit_code == 0, result.output

    result = run_cli(
        [
            "calibrate",
            "--scores",
            str(tmp_path / "val" / "scores.csv"),
            "--method",
            "conf",
            "--accuracy",
            str(tmp_path / "val" / "accuracy.json"),
            "--out",
            str(tmp_path / "cal"),
        ]
    )
    assert result.exit_code == 0, result.output
    threshold = _read_json(tmp_path / "cal" / "threshold.json")
    assert threshold["method"] == "conf"
    assert threshold["n_val"] == 12

    result = run_cli(
        [
            "predict",
            "--scores",
            str(tmp_path / "target_far" / "scores.csv"),
            "--threshold",
            str(tmp_path / "cal" / "threshold.json"),
            "--target",
            "far",
            "--truth",
            str(tmp_path / "target_far" / "accuracy.json"),
            "--out",
            str(tmp_path / "pred"),
        ]
    )
    assert result.exit_code == 0, result.output

    estimate = _read_json(tmp_path / "pred" / "estimate.json")
    far_scores = fileformats.read_scores_csv(tmp_path / "target_far" / "scores.csv", "conf")
    expected = gep.predict_accuracy(far_scores, threshold["tau"]).predicted_accuracy
    truth = _read_json(tmp_path / "target_far" / "accuracy.json")["accuracy"]

    assert estimate["predicted_accuracy"] == expected
    assert estimate["target"] == "far"
    assert estimate["n"] == 30
    assert estimate["abs_error"] == pytest.approx(abs(expected - truth))


def test_lms_ensemble_pipeline(tmp_path):

    run_cli(["gen", "--out", str(tmp_path / "gen")])

    result = run_cli(
        ["train", "--out", str(tmp_path / "ens"), "--ensemble", "3", "--epsilon", "0.05"]
    )
    assert result.exit_code == 0, result.output
    ensemble = fileformats.load_ensemble(tmp_path / "ens" / "ensemble.json")
    assert ensemble.size == 3
    assert ensemble.diversity_noise == 0.05

    result = run_cli(
        [
            "score",
            "--method",
            "ma",
            "--model",
            str(tmp_path / "ens" / "ensemble.json"),
            "--data",
            str(tmp_path / "gen" / "val.csv"),
            "--out",
            str(tmp_path / "ma"),
        ]
    )
    assert result.exit_code == 0, result.output

    result = run_cli(["train", "--out", str(tmp_path / "model")])
    result = run_cli(
        [
            "score",
            "--method",
            "lms",
            "--model",
            str(tmp_path / "model" / "model.json"),
            "--data",
            str(tmp_path / "gen" / "val.csv"),
            "--out",
            str(tmp_path / "lms"),
        ]
    )
    assert result.exit_code == 0, result.output
    scores = fileformats.read_scores_csv(tmp_path / "lms" / "scores.csv", "lms").scores
    # K = 4 in the test config
    assert np.allclose(scores * 4, np.round(scores * 4))

    # A single model cannot give agreement scores
    result = run_cli(
        [
            "score",
            "--method",
            "ma",
            "--model",
            str(tmp_path / "model" / "model.json"),
            "--data",
            str(tmp_path / "gen" / "val.csv"),
            "--out",
            str(tmp_path / "bad"),
        ]
    )
    assert result.exit_code == runner.EXIT_INVALID

    # lms follows the augmentation stream of the chosen seed index
    cfg = harness.ExperimentConfig.from_config(tiny_config)
    model = fileformats.load_model(tmp_path / "model" / "model.json")
    val = fileformats.read_dataset_csv(tmp_path / "gen" / "val.csv")
    for index in (0, 1):
        result = run_cli(
            [
                "score",
                "--method",
                "lms",
                "--index",
                str(index),
                "--model",
                str(tmp_path / "model" / "model.json"),
                "--data",
                str(tmp_path / "gen" / "val.csv"),
                "--out",
                str(tmp_path / f"lms{index}"),
            ]
        )
        assert result.exit_code == 0, result.output

        policy = cfg.augmentation.replace(seed=stream(split(cfg.seed, index), "augment"))
        expected = scoring.lms_score(model, val, policy).scores
        scores = fileformats.read_scores_csv(tmp_path / f"lms{index}" / "scores.csv", "lms")
        assert np.array_equal(scores.scores, expected)
