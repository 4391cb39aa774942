"""Command line interface of gepbench.

Every subcommand writes only below its ``--out`` directory and finishes by
writing ``run_manifest.json`` there, recording the subcommand, the SHA-256 of
the canonical configuration, the seeds used and the paths of the artifacts.

Exit codes are 0 on success, 1 for invalid invocations or configurations and
2 for failures while running.
"""

import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

from .. import __version__, config, fileformats, gep, harness, misc, nn, plot, scoring
from ..profile import Profiler, timing_frame
from ..rng import split, stream


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_FAILURE = 2


class GepGroup(click.Group):
    """A click group mapping errors onto the exit codes of gepbench.

    Usage errors and :class:`~gepbench.config.GepConfigError` print to stderr
    and give exit code 1, malformed input files too. Any other exception gives
    exit code 2.
    """

    def main(self, *args, standalone_mode=True, **kwargs):
        try:
            rv = super().main(*args, standalone_mode=False, **kwargs)
            code = rv if isinstance(rv, int) else EXIT_OK
        except click.UsageError as e:
            e.show()
            code = EXIT_INVALID
        except click.Abort:
            click.echo("Aborted!", err=True)
            code = EXIT_INVALID
        except (config.GepConfigError, fileformats.FormatError) as e:
            click.echo(f"Error: {e}", err=True)
            code = EXIT_INVALID
        except Exception as e:
            logger.debug("Run failed", exc_info=True)
            click.echo(f"Error: {type(e).__name__}: {e}", err=True)
            code = EXIT_FAILURE

        if standalone_mode:
            sys.exit(code)
        return code


@click.group(cls=GepGroup)
@click.option(
    "-v",
    "--verbose",
    count=True,
    help="Lower the root log level by one step per use (WARNING, INFO, DEBUG).",
)
@click.version_option(__version__, prog_name="gepbench")
@click.pass_context
def cli(ctx, verbose):
    """Generalization error prediction benchmarks.

    Generate datasets, train classifiers, compute sample scores, calibrate
    thresholds and predict accuracies, or run whole benchmarks from a JSON
    config file.
    """
    ctx.obj = {"verbose": verbose}


def dispatch(argv=None):
    """Run the CLI on an argument list and return the exit code."""
    return cli.main(args=argv, prog_name="gepbench", standalone_mode=False)


def main():
    """Entry point of the ``gepbench`` console script."""
    sys.exit(dispatch())


# Shared options


def _config_option(required):
    return click.option(
        "--config",
        "configfile",
        type=click.Path(dir_okay=False),
        required=required,
        help="JSON experiment config."
        + ("" if required else " Built-in defaults are used if omitted."),
    )


_out_option = click.option(
    "--out",
    type=click.Path(file_okay=False, writable=True),
    required=True,
    help="Output directory. Nothing is written outside of it.",
)

_seed_option = click.option(
    "--seed",
    type=click.IntRange(0, 2**64 - 1),
    default=None,
    help="Override the root seed of the config.",
)

_jobs_option = click.option(
    "--jobs",
    type=click.IntRange(min=1),
    envvar="GEP_BENCH_JOBS",
    show_envvar=True,
    default=None,
    help="Number of worker processes. Overrides the config.",
)


def _profile_options(f):
    f = click.option(
        "--psutil",
        "use_psutil",
        is_flag=True,
        default=False,
        help=(
            "Write the CPU, memory and wall-clock usage of every seed to "
            "`timing.csv`. It is always logged at the INFO level."
        ),
    )(f)
    f = click.option(
        "--profiler",
        type=click.Choice(["cProfile", "pyinstrument"], case_sensitive=False),
        default="cProfile",
        help="Set the profiler to use. Default is cProfile.",
    )(f)
    f = click.option(
        "--profile",
        is_flag=True,
        default=False,
        help=(
            "Run the command in a profiler. This will output a `profile.prof` file "
            "if using cProfile or `profile.txt` for pyinstrument."
        ),
    )(f)
    return f


def _run_options(required_config):
    def decorator(f):
        f = _profile_options(f)
        f = _jobs_option(f)
        f = _seed_option(f)
        f = _out_option(f)
        f = _config_option(required_config)(f)
        return click.pass_context(f)

    return decorator


# Helpers


def _load_config(ctx, configfile, seed=None, jobs=None):
    # Validate the whole config before doing any work
    params = {} if configfile is None else config.load_file(configfile)
    try:
        cfg = harness.ExperimentConfig.from_config(params)
        overrides = {k: v for k, v in (("seed", seed), ("jobs", jobs)) if v is not None}
        if overrides:
            cfg = cfg.replace(**overrides)
    except config.GepConfigError as e:
        if e.file is None:
            e.file = configfile
        raise

    config.setup_logging(cfg.logging, ctx.obj["verbose"] if ctx.obj else 0)
    return cfg


def _outdir(out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _safe_name(name):
    return name.replace(":", "_").replace("=", "_")


def _write_manifest(out, subcommand, cfg, seeds, paths):
    manifest = {
        "subcommand": subcommand,
        "config_sha256": misc.config_hash(cfg.canonical()),
        "seeds": {"root": cfg.seed, "derived": [int(s) for s in seeds]},
        "artifacts": fileformats.relative_paths(paths, out),
        "version": __version__,
    }
    return _write_json(out / "run_manifest.json", manifest)


def _write_json(path, obj):
    with misc.lock_file(path) as tmp:
        with open(tmp, "w", newline="\n") as fh:
            fh.write(misc.canonical_json(obj))
    return Path(path)


def _read_json_file(path, what):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as e:
        raise fileformats.FormatError(f"Cannot open {what}: {e.strerror}", path) from e
    except json.JSONDecodeError as e:
        raise fileformats.FormatError(f"{what} is not valid JSON: {e}", path) from e


def _write_timing(report, out):
    path = out / "timing.csv"
    with misc.lock_file(path) as tmp:
        timing_frame(report.timing).to_csv(tmp, index=False, lineterminator="\n")
    return path


def _echo_summary(report):
    for c in report.summary:
        click.echo(
            f"{c.condition:>12s} {c.method:>6s} {c.target:>22s}  "
            f"mae={c.mae:.4f} std={c.std:.4f} n={c.n}"
        )


def _bench(ctx, name, runner, configfile, out, seed, jobs, profile, profiler, use_psutil, **kwargs):
    cfg = _load_config(ctx, configfile, seed, jobs)
    out = _outdir(out)
    logger.info("Running %s into %s", name, out)

    with Profiler(profile, profiler=profiler.lower(), path=out):
        report = runner(cfg, **kwargs)

    paths = fileformats.write_report(report, out) + plot.plot_report(report, out)
    if use_psutil:
        paths.append(_write_timing(report, out))

    seeds = [split(cfg.seed, i) for i in range(cfg.n_seeds)]
    _write_manifest(out, name, cfg, seeds, paths)
    _echo_summary(report)


# Subcommands


@cli.command()
@_run_options(required_config=False)
@click.option(
    "--index",
    type=click.IntRange(min=0),
    default=0,
    show_default=True,
    help="Seed index within the run to generate data for.",
)
@click.option(
    "--slab",
    is_flag=True,
    default=False,
    help="Generate the datasets of the simplicity-bias study instead.",
)
@click.option(
    "--gepb",
    is_flag=True,
    default=False,
    help="Also write features and labels as GEPB1 matrices.",
)
def gen(ctx, configfile, out, seed, jobs, profile, profiler, use_psutil, index, slab, gepb):
    """Generate the training, validation and target datasets of one seed as CSV."""
    cfg = _load_config(ctx, configfile, seed, jobs)
    out = _outdir(out)

    with Profiler(profile, profiler=profiler.lower(), path=out):
        if slab:
            train, val, targets = harness.slab_datasets(cfg, index)
        else:
            train, val, targets = harness.seed_datasets(cfg, index)

    datasets = {"train": train, "val": val}
    datasets.update({f"target_{_safe_name(k)}": v for k, v in targets.items()})

    paths = []
    for stem, data in datasets.items():
        paths.append(fileformats.write_dataset_csv(data, out / f"{stem}.csv"))
        if gepb:
            fileformats.write_matrix(data.features, out / f"{stem}.features.gepb")
            fileformats.write_matrix(
                data.labels[:, np.newaxis].astype(np.float64), out / f"{stem}.labels.gepb"
            )
            paths += [out / f"{stem}.features.gepb", out / f"{stem}.labels.gepb"]
        click.echo(f"{stem}: {data.n_samples} samples ({data.provenance})")

    _write_manifest(out, "gen", cfg, [split(cfg.seed, index)], paths)


@cli.command()
@_run_options(required_config=False)
@click.option(
    "--data",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Training set CSV. The training split of the config is generated if omitted.",
)
@click.option(
    "--index",
    type=click.IntRange(min=0),
    default=0,
    show_default=True,
    help="Seed index whose training stream (and data, without --data) is used.",
)
@click.option(
    "--ensemble",
    "ensemble_size",
    type=click.IntRange(min=1),
    default=None,
    help="Train an ensemble of this many members instead of a single model.",
)
@click.option(
    "--epsilon",
    type=click.FloatRange(0.0, 1.0),
    default=0.0,
    show_default=True,
    help="Label noise rate applied to the training data of every ensemble member.",
)
def train(
    ctx, configfile, out, seed, jobs, profile, profiler, use_psutil, data, index, ensemble_size, epsilon
):
    """Train a classifier or an ensemble and save it under the output directory."""
    if epsilon > 0 and ensemble_size is None:
        raise click.UsageError("--epsilon needs --ensemble.")
    cfg = _load_config(ctx, configfile, seed, jobs)
    out = _outdir(out)

    seed_i = split(cfg.seed, index)
    if data is None:
        train_set = harness.seed_datasets(cfg, index)[0]
    else:
        train_set = fileformats.read_dataset_csv(data)
    train_cfg = cfg.train.replace(seed=stream(seed_i, "train"))
    dims = cfg.dims(train_set.n_features, train_set.n_classes)

    with Profiler(profile, profiler=profiler.lower(), path=out):
        if ensemble_size is None:
            model = nn.train_sgd(train_set, train_cfg, dims)
            fileformats.save_model(model, out / "model.json")
            click.echo(f"Training accuracy: {nn.accuracy(model, train_set):.4f}")
        else:
            ens = scoring.train_ensemble(
                train_set, train_cfg, dims, ensemble_size, epsilon, jobs=cfg.jobs
            )
            fileformats.save_ensemble(ens, out / "ensemble.json")
            acc = gep.true_accuracy(scoring.ensemble_predict(ens, train_set), train_set.labels)
            click.echo(f"Training accuracy (majority vote): {acc:.4f}")

    # The manifests and every parameter file written next to them
    stem = "model" if ensemble_size is None else "ensemble"
    paths = sorted(p for p in out.glob(f"{stem}*") if p.is_file())
    _write_manifest(out, "train", cfg, [seed_i], paths)


@cli.command()
@_run_options(required_config=False)
@click.option(
    "--method",
    type=click.Choice(scoring.SCORE_METHODS),
    required=True,
    help="Scoring function.",
)
@click.option(
    "--model",
    "model_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Model manifest (conf, lms) or ensemble manifest (ma) written by `train`.",
)
@click.option(
    "--data",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Dataset CSV to score, used with --model.",
)
@click.option(
    "--logits",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Logits bundle manifest of externally trained models (conf, ma).",
)
@click.option(
    "--member",
    type=click.IntRange(min=0),
    default=0,
    show_default=True,
    help="Bundle member scored by conf.",
)
@click.option(
    "--index",
    type=click.IntRange(min=0),
    default=0,
    show_default=True,
    help="Seed index whose augmentation stream lms uses.",
)
def score(
    ctx,
    configfile,
    out,
    seed,
    jobs,
    profile,
    profiler,
    use_psutil,
    method,
    model_path,
    data,
    logits,
    member,
    index,
):
    """Score every sample of a dataset.

    Writes `scores.csv` (``sample_index,score``) and `scores.gepb`. When the
    labels are known, `accuracy.json` holds the accuracy of the deployed
    predictor (the model, or the majority vote of an ensemble). lms draws its
    augmentations from the "augment" stream of seed `--index`, as the
    benchmarks do.
    """
    cfg = _load_config(ctx, configfile, seed, jobs)
    if (logits is None) == (model_path is None):
        raise click.UsageError("Give exactly one of --model and --logits.")
    if model_path is not None and data is None:
        raise click.UsageError("--model needs --data.")
    if logits is not None and method == "lms":
        raise click.UsageError("lms needs a model to predict on augmented copies, not logits.")
    out = _outdir(out)

    accuracy = None
    with Profiler(profile, profiler=profiler.lower(), path=out):
        if logits is not None:
            bundle = fileformats.ingest_logits(logits)
            if member >= bundle.size:
                raise click.UsageError(f"--member {member} but the bundle has {bundle.size}.")
            scores = bundle.conf_scores(member) if method == "conf" else bundle.ma_scores()
            if bundle.labels is not None:
                accuracy = gep.true_accuracy(bundle.predictions(method, member), bundle.labels)
        elif method == "ma":
            if not fileformats.is_ensemble_manifest(model_path):
                raise click.UsageError("ma needs an ensemble manifest.")
            ens = fileformats.load_ensemble(model_path)
            dataset = fileformats.read_dataset_csv(data, ens.members[0].n_classes)
            scores = scoring.ma_score(ens, dataset)
            accuracy = gep.true_accuracy(scoring.ensemble_predict(ens, dataset), dataset.labels)
        else:
            if fileformats.is_ensemble_manifest(model_path):
                raise click.UsageError(f"{method} needs a single model manifest.")
            model = fileformats.load_model(model_path)
            dataset = fileformats.read_dataset_csv(data, model.n_classes)
            if method == "conf":
                scores = scoring.conf_score(model, dataset)
            else:
                policy = cfg.augmentation.replace(seed=stream(split(cfg.seed, index), "augment"))
                scores = scoring.lms_score(model, dataset, policy)
            accuracy = nn.accuracy(model, dataset)

    paths = [
        fileformats.write_scores_csv(scores, out / "scores.csv"),
        fileformats.write_scores_matrix(scores, out / "scores.gepb"),
    ]
    if accuracy is not None:
        paths.append(
            _write_json(out / "accuracy.json", {"accuracy": accuracy, "n": len(scores)})
        )
        click.echo(f"Accuracy: {accuracy:.4f}")
    click.echo(f"Scored {len(scores)} samples with {method}")
    _write_manifest(out, "score", cfg, [], paths)


def _read_scores(path, method):
    try:
        return fileformats.read_scores_csv(path, method)
    except ValueError as e:
        raise fileformats.FormatError(f"Invalid scores: {e}", path) from e


def _accuracy_value(text):
    # A number, or the accuracy.json written by `score`
    try:
        return float(text)
    except ValueError:
        pass
    d = _read_json_file(text, "accuracy file")
    try:
        return float(d["accuracy"])
    except (KeyError, TypeError, ValueError) as e:
        raise fileformats.FormatError("No 'accuracy' entry", text) from e


@cli.command()
@_run_options(required_config=False)
@click.option(
    "--scores",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help="Validation scores CSV written by `score`.",
)
@click.option(
    "--method",
    type=click.Choice(scoring.SCORE_METHODS),
    required=True,
    help="Scoring function that produced the scores.",
)
@click.option(
    "--accuracy",
    required=True,
    help="Validation accuracy, as a number or the accuracy.json written by `score`.",
)
def calibrate(
    ctx, configfile, out, seed, jobs, profile, profiler, use_psutil, scores, method, accuracy
):
    """Calibrate a threshold on validation scores, writing `threshold.json`."""
    cfg = _load_config(ctx, configfile, seed, jobs)
    out = _outdir(out)
    acc = _accuracy_value(accuracy)

    val_scores = _read_scores(scores, method)
    try:
        cal = gep.CalibrationInput(val_scores, acc)
    except gep.CalibrationError as e:
        raise click.BadParameter(str(e), param_hint="--accuracy") from e
    with Profiler(profile, profiler=profiler.lower(), path=out):
        threshold = gep.calibrate_threshold(cal)

    path = _write_json(
        out / "threshold.json",
        {
            "method": method,
            "tau": threshold.tau,
            "achieved_val_error": threshold.achieved_val_error,
            "n_val": threshold.n_val,
            "val_accuracy": acc,
        },
    )
    click.echo(f"tau={threshold.tau:.6g} (validation error {threshold.achieved_val_error:.4g})")
    _write_manifest(out, "calibrate", cfg, [], [path])


@cli.command()
@_run_options(required_config=False)
@click.option(
    "--scores",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help="Target scores CSV written by `score`.",
)
@click.option(
    "--threshold",
    "threshold_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help="threshold.json written by `calibrate`.",
)
@click.option("--target", default="", help="Name of the target stored on the estimate.")
@click.option(
    "--truth",
    default=None,
    help="True target accuracy (number or accuracy.json) to report the absolute error.",
)
def predict(
    ctx, configfile, out, seed, jobs, profile, profiler, use_psutil, scores, threshold_path, target, truth
):
    """Predict the accuracy on a target dataset, writing `estimate.json`."""
    cfg = _load_config(ctx, configfile, seed, jobs)
    out = _outdir(out)

    d = _read_json_file(threshold_path, "threshold file")
    try:
        method = d["method"]
        threshold = gep.Threshold(float(d["tau"]), float(d["achieved_val_error"]), int(d["n_val"]))
    except (KeyError, TypeError, ValueError) as e:
        raise fileformats.FormatError(f"Not a valid threshold file: {e}", threshold_path) from e

    target_scores = _read_scores(scores, method)
    with Profiler(profile, profiler=profiler.lower(), path=out):
        estimate = gep.predict_accuracy(target_scores, threshold, target=target)

    result = {
        "method": method,
        "predicted_accuracy": estimate.predicted_accuracy,
        "tau": estimate.tau,
        "target": target,
        "n": len(target_scores),
    }
    if truth is not None:
        t = _accuracy_value(truth)
        result["true_accuracy"] = t
        result["abs_error"] = abs(estimate.predicted_accuracy - t)
    path = _write_json(out / "estimate.json", result)
    click.echo(f"Predicted accuracy: {estimate.predicted_accuracy:.4f}")
    _write_manifest(out, "predict", cfg, [], [path])


@cli.command("bench-shift")
@_run_options(required_config=True)
def bench_shift(ctx, configfile, out, seed, jobs, profile, profiler, use_psutil):
    """Accuracy prediction on shifted and corrupted targets."""
    _bench(
        ctx, "bench-shift", harness.run_shift_benchmark,
        configfile, out, seed, jobs, profile, profiler, use_psutil,
    )


@cli.command("bench-fidelity")
@_run_options(required_config=True)
def bench_fidelity(ctx, configfile, out, seed, jobs, profile, profiler, use_psutil):
    """Accuracy prediction with degraded training data."""
    _bench(
        ctx, "bench-fidelity", harness.run_fidelity_benchmark,
        configfile, out, seed, jobs, profile, profiler, use_psutil,
    )


def _sizes(ctx, param, value):
    if value is None:
        return None
    try:
        sizes = [int(v) for v in value.split(",")]
    except ValueError as e:
        raise click.BadParameter(f"Expected comma separated integers, got '{value}'.") from e
    if min(sizes) < 1:
        raise click.BadParameter("Ensemble sizes must be positive.")
    return sizes


@cli.command("sweep-ensemble")
@_run_options(required_config=True)
@click.option(
    "--sizes",
    callback=_sizes,
    default=None,
    help="Comma separated ensemble sizes, e.g. 2,4,8. Defaults to sweep_sizes of the config.",
)
def sweep_ensemble(ctx, configfile, out, seed, jobs, profile, profiler, use_psutil, sizes):
    """Model agreement accuracy prediction against ensemble size."""
    _bench(
        ctx, "sweep-ensemble", harness.run_ensemble_sweep,
        configfile, out, seed, jobs, profile, profiler, use_psutil, sizes=sizes,
    )


@cli.command("bench-slab")
@_run_options(required_config=True)
def bench_slab(ctx, configfile, out, seed, jobs, profile, profiler, use_psutil):
    """Accuracy prediction under simplicity bias on the slab dataset."""
    _bench(
        ctx, "bench-slab", harness.run_simplicity_bias,
        configfile, out, seed, jobs, profile, profiler, use_psutil,
    )


@cli.command()
@click.option(
    "--report",
    "report_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help="report.json written by one of the bench subcommands.",
)
@_out_option
@click.pass_context
def report(ctx, report_path, out):
    """Re-emit the tables and plots of an existing report."""
    config.setup_logging({"root": "WARNING"}, ctx.obj["verbose"] if ctx.obj else 0)
    run = fileformats.read_report(report_path)
    out = _outdir(out)

    paths = fileformats.write_report(run, out) + plot.plot_report(run, out)
    cfg = harness.ExperimentConfig.from_config(run.config)
    seeds = [split(cfg.seed, i) for i in range(cfg.n_seeds)]
    _write_manifest(out, "report", cfg, seeds, paths)
    _echo_summary(run)
