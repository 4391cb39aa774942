"""SVG plots of benchmark results.

Plots are drawn with matplotlib's SVG backend with a fixed hash salt and no
date stamp, so the same input always gives the same bytes. Every series is an
SVG group with id ``series-<i>`` holding one marker per point, and every error
bar is a separate group with id ``errorbar-<i>-<j>``.

- :py:class:`Series`
- :py:meth:`emit_plot`
- :py:meth:`plot_report`
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from . import misc


logger = logging.getLogger(__name__)

# Targets of the accuracy tables, from no shift to the strongest
SHIFT_TARGETS = ("source", "near", "far")

_RC = {
    "svg.hashsalt": "gepbench",
    "svg.fonttype": "none",
    "path.simplify": False,
}


@dataclass(frozen=True)
class Series:
    """A labelled line with optional symmetric error bars."""

    label: str
    x: Sequence[float]
    y: Sequence[float]
    yerr: Optional[Sequence[float]] = None

    def __post_init__(self):
        if len(self.x) != len(self.y) or len(self.x) == 0:
            raise ValueError(f"Series '{self.label}' needs matching, nonempty x and y.")
        if self.yerr is not None and len(self.yerr) != len(self.y):
            raise ValueError(f"Series '{self.label}' has {len(self.yerr)} errors for {len(self.y)} points.")


def emit_plot(series, path, title="", xlabel="", ylabel="", xticklabels=None):
    """Draw series as an SVG file.

    Parameters
    ----------
    series : list of Series
    path : path
    title, xlabel, ylabel : str
    xticklabels : list of str, optional
        Labels placed at the x values of the first series. By default the
        ticks sit at those x values, labelled with the values themselves.

    Returns
    -------
    path : Path
    """
    if not series:
        raise ValueError("Nothing to plot.")
    path = Path(path)

    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(6.0, 4.0))
        ax = fig.add_subplot(1, 1, 1)

        for ii, s in enumerate(series):
            (line,) = ax.plot(s.x, s.y, marker="o", label=s.label, gid=f"series-{ii}")
            if s.yerr is None:
                continue
            for jj, (x, y, e) in enumerate(zip(s.x, s.y, s.yerr)):
                ax.plot(
                    [x, x],
                    [y - e, y + e],
                    color=line.get_color(),
                    linewidth=1.0,
                    gid=f"errorbar-{ii}-{jj}",
                )

        ticks = list(series[0].x)
        ax.set_xticks(ticks)
        ax.set_xticklabels(
            xticklabels if xticklabels is not None else [f"{t:g}" for t in ticks]
        )
        ax.set_title(title)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.legend()
        ax.grid(True, alpha=0.3)

        with misc.lock_file(path) as tmp:
            fig.savefig(tmp, format="svg", metadata={"Date": None})

    logger.debug("Wrote plot %s", path)
    return path


def _cells(report, **match):
    return [
        c for c in report.summary if all(getattr(c, k) == v for k, v in match.items())
    ]


def _seed_std(values):
    # Across-seed sample standard deviation, zero for a single seed
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


def _targets(report):
    # The source and shift targets present, in order of shift strength
    present = {r.target for r in report.records}
    return [t for t in SHIFT_TARGETS if t in present]


def _conditions(report):
    present = {r.condition for r in report.records}
    order = list(report.config.get("fidelity", [])) + sorted(present)
    return [c for c in dict.fromkeys(order) if c in present]


def shift_series(report, condition):
    """MAE of every method on the source and shift targets, with across-seed std."""
    targets = _targets(report)
    out = []
    for method in report.config["methods"]:
        cells = {c.target: c for c in _cells(report, condition=condition, method=method)}
        if not targets or not all(t in cells for t in targets):
            continue
        out.append(
            Series(
                method,
                list(range(len(targets))),
                [cells[t].mae for t in targets],
                [cells[t].std for t in targets],
            )
        )
    return out, targets


def fidelity_series(report, target):
    """True and predicted accuracy of every method per training condition.

    Each method gives two series, ``<method> true`` and ``<method> predicted``,
    with the across-seed std as error bars.
    """
    conditions = _conditions(report)
    out = []
    for method in report.config["methods"]:
        groups = [report.select(c, method, target) for c in conditions]
        if not all(groups):
            continue
        x = list(range(len(conditions)))
        for kind in ("true", "predicted"):
            values = [[getattr(r, f"{kind}_accuracy") for r in rs] for rs in groups]
            out.append(
                Series(
                    f"{method} {kind}",
                    x,
                    [float(np.mean(v)) for v in values],
                    [_seed_std(v) for v in values],
                )
            )
    return out, conditions


def severity_series(report, condition, family):
    """MAE against severity for every method, with across-seed std."""
    out = []
    for method in report.config["methods"]:
        points = []
        for c in _cells(report, condition=condition, method=method):
            parts = c.target.split(":")
            if parts[0] == "corrupt" and parts[1] == family:
                points.append((int(parts[2]), c.mae, c.std))
        if points:
            x, y, e = zip(*sorted(points))
            out.append(Series(method, x, y, e))
    return out


def sweep_series(report, target):
    """MAE of MA against ensemble size on one target."""
    points = [
        (int(c.condition.split("=")[1]), c.mae, c.std)
        for c in _cells(report, method="ma", target=target)
    ]
    x, y, e = zip(*sorted(points))
    return [Series("ma", x, y, e)]


def gap_series(report):
    """Mean over-estimation (predicted - true) per method and training condition."""
    targets = sorted({c.target for c in report.summary})
    out = []
    for condition in ("biased", "scrambled"):
        for method in report.config["methods"]:
            cells = {c.target: c for c in _cells(report, condition=condition, method=method)}
            if not cells:
                continue
            y = [cells[t].mean_signed_error for t in targets]
            e = [
                _seed_std([r.signed_error for r in report.select(condition, method, t)])
                for t in targets
            ]
            out.append(Series(f"{method} ({condition})", list(range(len(targets))), y, e))
    return out, targets


def plot_report(report, directory):
    """Write the standard plots of a report into `directory`.

    Returns
    -------
    paths : list of Path
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []

    if report.benchmark in ("shift", "fidelity"):
        conditions = _conditions(report)
        for condition in conditions:
            series, targets = shift_series(report, condition)
            if series:
                paths.append(
                    emit_plot(
                        series,
                        directory / f"mae_{condition}.svg",
                        title=f"Accuracy prediction error ({condition})",
                        ylabel="MAE",
                        xticklabels=targets,
                    )
                )
        for condition in conditions:
            for family in report.config["corruption_families"]:
                series = severity_series(report, condition, family)
                if series:
                    paths.append(
                        emit_plot(
                            series,
                            directory / f"severity_{condition}_{family}.svg",
                            title=f"{family} ({condition})",
                            xlabel="severity",
                            ylabel="MAE",
                        )
                    )
        if report.benchmark == "fidelity":
            for target in _targets(report):
                series, names = fidelity_series(report, target)
                if series:
                    paths.append(
                        emit_plot(
                            series,
                            directory / f"fidelity_{target}.svg",
                            title=f"True and predicted accuracy ({target})",
                            ylabel="accuracy",
                            xticklabels=names,
                        )
                    )

    elif report.benchmark == "ensemble_sweep":
        for target in sorted({r.target for r in report.records}):
            if target.startswith("corrupt:"):
                continue
            paths.append(
                emit_plot(
                    sweep_series(report, target),
                    directory / f"ensemble_size_{target}.svg",
                    title=f"MA error against ensemble size ({target})",
                    xlabel="ensemble size",
                    ylabel="MAE",
                )
            )

    elif report.benchmark == "simplicity_bias":
        series, targets = gap_series(report)
        paths.append(
            emit_plot(
                series,
                directory / "simplicity_gap.svg",
                title="Over-estimation under simplicity bias",
                ylabel="predicted - true accuracy",
                xticklabels=targets,
            )
        )

    return paths
