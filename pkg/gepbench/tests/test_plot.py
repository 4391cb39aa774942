"""Test the SVG plots."""

import xml.etree.ElementTree as ET

import pytest

from gepbench import harness, plot


def _by_id(path):
    root = ET.parse(path).getroot()
    return {el.get("id"): el for el in root.iter() if el.get("id")}


def _count(element, tag):
    return sum(1 for el in element.iter() if el.tag.endswith("}" + tag))


def _sweep_report():
    records = []
    for k in (2, 4, 6, 8, 10):
        for seed, err in enumerate((0.1 / k, 0.2 / k)):
            records.append(harness.EvaluationRecord(f"M={k}", "ma", "far", seed, 0.8, 0.8 + err))
    return harness.RunReport("ensemble_sweep", tuple(records), {"methods": ["ma"]})


def test_single_point(tmp_path):

    path = plot.emit_plot([plot.Series("conf", [1], [0.5])], tmp_path / "one.svg")

    ids = _by_id(path)
    assert _count(ids["series-0"], "use") == 1
    assert not any(i.startswith("errorbar-") for i in ids)


def test_series_validation():

    with pytest.raises(ValueError):
        plot.Series("x", [], [])

    with pytest.raises(ValueError):
        plot.Series("x", [1, 2], [0.5])

    with pytest.raises(ValueError):
        plot.Series("x", [1, 2], [0.5, 0.6], yerr=[0.1])

    with pytest.raises(ValueError):
        plot.emit_plot([], "never.svg")


def test_sweep_plot(tmp_path):

    report = _sweep_report()

    series = plot.sweep_series(report, "far")
    assert list(series[0].x) == [2, 4, 6, 8, 10]
    assert series[0].y[0] > series[0].y[-1]

    paths = plot.plot_report(report, tmp_path)
    assert [p.name for p in paths] == ["ensemble_size_far.svg"]

    ids = _by_id(paths[0])
    assert _count(ids["series-0"], "use") == 5
    assert sorted(i for i in ids if i.startswith("errorbar-")) == [
        f"errorbar-0-{j}" for j in range(5)
    ]


def test_plot_deterministic(tmp_path):

    report = _sweep_report()

    a = plot.plot_report(report, tmp_path / "a")[0]
    b = plot.plot_report(report, tmp_path / "b")[0]

    assert a.read_bytes() == b.read_bytes()


def test_severity_plots(tmp_path):

    records = [
        harness.EvaluationRecord("clean", m, f"corrupt:additive_noise:{s}", 0, 0.9, 0.9 - 0.01 * s)
        for m in ("conf", "ma")
        for s in (1, 2, 3)
    ]
    records.append(harness.EvaluationRecord("clean", "conf", "far", 0, 0.7, 0.8))
    report = harness.RunReport(
        "shift",
        tuple(records),
        {"methods": ["conf", "ma"], "corruption_families": ["additive_noise", "feature_dropout"]},
    )

    series = plot.severity_series(report, "clean", "additive_noise")
    assert [s.label for s in series] == ["conf", "ma"]
    assert list(series[0].x) == [1, 2, 3]
    assert plot.severity_series(report, "clean", "feature_dropout") == []

    # ma has no far record, so only conf gets a line in the MAE plot
    paths = plot.plot_report(report, tmp_path)
    assert [p.name for p in paths] == ["mae_clean.svg", "severity_clean_additive_noise.svg"]
    ids = _by_id(paths[0])
    assert "series-0" in ids and "series-1" not in ids


def test_gap_plot(tmp_path):

    records = [
        harness.EvaluationRecord(c, "conf", t, seed, 0.6, 0.6 + 0.1 * seed)
        for c in ("biased", "scrambled")
        for t in ("slab", "slab:shifted")
        for seed in (0, 1)
    ]
    report = harness.RunReport("simplicity_bias", tuple(records), {"methods": ["conf"]})

    series, targets = plot.gap_series(report)
    assert targets == ["slab", "slab:shifted"]
    assert [s.label for s in series] == ["conf (biased)", "conf (scrambled)"]
    assert series[0].y == [pytest.approx(0.05)] * 2

    paths = plot.plot_report(report, tmp_path)
    assert [p.name for p in paths] == ["simplicity_gap.svg"]


def _fidelity_report():
    records = []
    for ci, condition in enumerate(("clean", "label_noise", "undersample")):
        for method in ("conf", "ma"):
            for target in ("far", "source", "near", "corrupt:additive_noise:1"):
                for seed in (0, 1):
                    truth = 0.9 - 0.1 * ci - 0.01 * seed
                    records.append(
                        harness.EvaluationRecord(
                            condition, method, target, seed, truth, truth + 0.02 * (seed + 1)
                        )
                    )
    config = {
        "methods": ["conf", "ma"],
        "corruption_families": ["additive_noise"],
        "fidelity": ["clean", "label_noise", "undersample"],
    }
    return harness.RunReport("fidelity", tuple(records), config)


def test_shift_series():

    report = _fidelity_report()

    series, targets = plot.shift_series(report, "label_noise")
    assert targets == ["source", "near", "far"]
    assert [s.label for s in series] == ["conf", "ma"]
    # Errors 0.02 and 0.04 over the two seeds
    assert series[0].y == [pytest.approx(0.03)] * 3
    assert series[0].yerr == [pytest.approx(0.02 / 2**0.5)] * 3


def test_fidelity_series():

    report = _fidelity_report()

    series, conditions = plot.fidelity_series(report, "far")
    assert conditions == ["clean", "label_noise", "undersample"]
    assert [s.label for s in series] == ["conf true", "conf predicted", "ma true", "ma predicted"]
    assert series[0].y == pytest.approx([0.895, 0.795, 0.695])
    assert series[1].y == pytest.approx([0.925, 0.825, 0.725])
    assert series[0].yerr == pytest.approx([0.01 / 2**0.5] * 3)


def test_fidelity_plots(tmp_path):

    paths = plot.plot_report(_fidelity_report(), tmp_path)

    names = [p.name for p in paths]
    assert names[:3] == ["mae_clean.svg", "mae_label_noise.svg", "mae_undersample.svg"]
    assert "severity_undersample_additive_noise.svg" in names
    assert names[-3:] == ["fidelity_source.svg", "fidelity_near.svg", "fidelity_far.svg"]

    ids = _by_id(tmp_path / "fidelity_far.svg")
    assert sorted(i for i in ids if i.startswith("series-")) == [f"series-{i}" for i in range(4)]
    assert _count(ids["series-1"], "use") == 3
    assert "errorbar-3-2" in ids

    ids = _by_id(tmp_path / "mae_clean.svg")
    assert _count(ids["series-0"], "use") == 3
    assert "errorbar-1-2" in ids
