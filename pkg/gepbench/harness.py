"""Benchmark runners.

Four studies are available, each repeated over `n_seeds` independent seeds
and aggregated into a :class:`RunReport`:

- :py:meth:`run_shift_benchmark` -- accuracy prediction on near and far
  shifted targets and on the corruption ladder.
- :py:meth:`run_fidelity_benchmark` -- the same targets, with the training
  split degraded by label noise, measurement noise or undersampling.
- :py:meth:`run_ensemble_sweep` -- model agreement as a function of
  ensemble size, evaluated on prefixes of one large ensemble.
- :py:meth:`run_simplicity_bias` -- accuracy prediction for a model trained
  on data with a simple but brittle feature, and for the same model trained
  with that feature scrambled.

Seeds
=====
Seed ``i`` of a run uses the seed ``split(cfg.seed, i)``, and every random
component inside it draws from a named stream of that seed (``"source"``,
``"split"``, ``"train"``, ``"augment"``, ``"shift:far"``, ...). Seeds are
therefore independent units of work: they run in parallel through joblib,
and reducing `n_seeds` leaves the records of the remaining seeds unchanged.
Any seed-specific value in the nested specifications of an
:class:`ExperimentConfig` is replaced by its stream seed.

Predictors
==========
The accuracy being predicted is that of the deployed predictor of each
method: the single model for "conf" and "lms", the majority vote of the
ensemble for "ma" and "ma_eps". Every method gets its own threshold,
calibrated on the validation split.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Tuple

import joblib
import numpy as np

from . import config, datagen, gep, misc, nn, scoring
from .profile import PSUtilProfiler
from .rng import SEED_MAX, split, stream


logger = logging.getLogger(__name__)

METHODS = ("conf", "lms", "ma", "ma_eps")
FIDELITY_CONDITIONS = ("clean", "label_noise", "measurement_noise", "undersample")

# Settings that change how a run executes but not what it computes
OPERATIONAL_KEYS = ("jobs", "logging")


class SeedRunError(RuntimeError):
    """A seed of a benchmark run failed.

    Attributes
    ----------
    seed_index : int
        Position of the seed in the run.
    detail : str
        Description of the underlying error.
    """

    def __init__(self, seed_index, detail):
        self.seed_index = seed_index
        self.detail = detail
        super().__init__(seed_index, detail)

    def __str__(self):
        return f"Seed {self.seed_index} failed: {self.detail}"


class ExperimentConfig(config.Reader):
    """Settings of a benchmark run.

    Attributes
    ----------
    seed : int
        Root seed of the run.
    n_seeds : int
        Number of repetitions. Default 10.
    methods : list of str
        Subset of "conf", "lms", "ma" and "ma_eps".
    hidden_dims : list of int
        Hidden layer widths of every classifier. Default ``[32]``.
    train : TrainConfig
        Training settings (200 epochs by default).
    fidelity_epochs : int
        Epochs used by the fidelity benchmark. Default 250.
    ensemble_size : int
        ``M``, members of the MA ensembles. Default 10.
    diversity_noise : float
        ``epsilon``, label noise rate of the MA_eps members. Default 0.02.
    augmentation : AugmentationPolicy
        LMS augmentation. ``count`` is ``K``, default 10.
    source : SourceSpec
        Source distribution.
    shifts : list of ShiftSpec
        Shifted targets, one per kind. Default near and far.
    target_samples_per_class : int
        Samples per class of the held-out test set and of every shift that
        does not set its own size. Default 500.
    corruption_families : list of str
        Families of the corruption ladder. Default all four.
    severities : list of int
        Severities evaluated for each family. Default 1 to 5.
    split : list of float
        Train and validation fractions. Default ``[0.8, 0.2]``.
    fidelity : list of str
        Conditions of the fidelity benchmark.
    label_noise, measurement_noise, undersample
        Settings of the fidelity conditions.
    sweep_sizes : list of int
        Ensemble sizes of the sweep. Default ``[2, 4, 6, 8, 10]``.
    slab : SlabSpec
        Dataset of the simplicity-bias study.
    jobs : int
        Seeds processed in parallel.
    logging : dict
        Log levels, see :func:`gepbench.config.logging_config`.
    """

    seed = config.int_in_range(0, SEED_MAX, default=0)
    n_seeds = config.int_in_range(1, default=10)
    methods = config.list_type(str, minlength=1, options=METHODS, default=list(METHODS))
    hidden_dims = config.list_type(int, default=[32])
    train = config.section(nn.TrainConfig)
    fidelity_epochs = config.int_in_range(1, default=250)
    ensemble_size = config.int_in_range(1, default=10)
    diversity_noise = config.float_in_range(0.0, 1.0, default=0.02)
    augmentation = config.section(scoring.AugmentationPolicy)
    source = config.section(datagen.SourceSpec)
    shifts = config.section_list(
        datagen.ShiftSpec, default=[{"kind": "near"}, {"kind": "far"}]
    )
    target_samples_per_class = config.int_in_range(1, default=500)
    corruption_families = config.list_type(
        str, options=datagen.CORRUPTION_FAMILIES, default=list(datagen.CORRUPTION_FAMILIES)
    )
    severities = config.list_type(int, options=[1, 2, 3, 4, 5], default=[1, 2, 3, 4, 5])
    split = config.list_type(length=2, default=[0.8, 0.2])
    fidelity = config.list_type(
        str, minlength=1, options=FIDELITY_CONDITIONS, default=list(FIDELITY_CONDITIONS)
    )
    label_noise = config.section(datagen.LabelNoiseSpec, default={"rate": 0.05})
    measurement_noise = config.section(
        datagen.MeasurementNoiseSpec, default={"blur_sigma": 0.5, "additive_sigma": 0.07}
    )
    undersample = config.section(
        datagen.UndersampleSpec, default={"target_classes": [0, 1], "drop_fraction": 0.2}
    )
    sweep_sizes = config.list_type(int, minlength=1, default=[2, 4, 6, 8, 10])
    slab = config.section(datagen.SlabSpec)
    jobs = config.int_in_range(1, default=1)
    logging = config.logging_config(default={"root": "WARNING"})

    def _finalise_config(self):
        kinds = [s.kind for s in self.shifts]
        if len(set(kinds)) != len(kinds):
            raise config.GepConfigError(f"Shift kinds must be unique, got {kinds}.")

        try:
            fractions = [float(f) for f in self.split]
        except (TypeError, ValueError) as e:
            raise config.GepConfigError(f"Invalid split {self.split}.") from e
        if min(fractions) <= 0 or abs(sum(fractions) - 1.0) > 1e-9:
            raise config.GepConfigError(
                f"Split fractions must be positive and sum to one, got {fractions}."
            )
        self.split = fractions

        if any(k < 1 for k in self.sweep_sizes):
            raise config.GepConfigError(f"Ensemble sizes must be positive: {self.sweep_sizes}.")
        if any(h < 1 for h in self.hidden_dims):
            raise config.GepConfigError(f"Hidden widths must be positive: {self.hidden_dims}.")

    def canonical(self):
        """Config dictionary without the operational settings (`jobs`, `logging`)."""
        out = self.to_config()
        for key in OPERATIONAL_KEYS:
            out.pop(key, None)
        return out

    def dims(self, n_features, n_classes):
        """Layer dimensions of a classifier for the given data shape."""
        return [n_features] + list(self.hidden_dims) + [n_classes]


@dataclass(frozen=True)
class EvaluationRecord:
    """Predicted and true accuracy of one method on one target for one seed.

    `abs_error` and `signed_error` (``predicted - true``, positive when the
    predictor is over-optimistic) are derived on construction.
    """

    condition: str
    method: str
    target: str
    seed: int
    true_accuracy: float
    predicted_accuracy: float
    abs_error: float = field(init=False)
    signed_error: float = field(init=False)

    def __post_init__(self):
        signed = self.predicted_accuracy - self.true_accuracy
        object.__setattr__(self, "signed_error", signed)
        object.__setattr__(self, "abs_error", abs(signed))

    @property
    def key(self):
        """Canonical sort key ``(condition, method, target, seed)``."""
        return (self.condition, self.method, self.target, self.seed)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(
            str(d["condition"]),
            str(d["method"]),
            str(d["target"]),
            int(d["seed"]),
            float(d["true_accuracy"]),
            float(d["predicted_accuracy"]),
        )


@dataclass(frozen=True)
class SummaryCell:
    """Aggregate of the records of one (condition, method, target) cell."""

    condition: str
    method: str
    target: str
    n: int
    mae: float
    std: float
    mean_true_accuracy: float
    mean_predicted_accuracy: float
    mean_signed_error: float

    @property
    def overestimates(self):
        """Whether the predictor is on average over-optimistic in this cell."""
        return self.mean_signed_error > 0

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["overestimates"] = self.overestimates
        return out


def aggregate(records):
    """Mean and spread of the absolute error per (condition, method, target).

    Parameters
    ----------
    records : list of EvaluationRecord

    Returns
    -------
    cells : list of SummaryCell
        Sorted by (condition, method, target). `std` is the sample standard
        deviation (``n - 1`` in the denominator), zero for a single record.
    """
    groups = {}
    for r in sorted(records, key=lambda r: r.key):
        groups.setdefault(r.key[:3], []).append(r)

    cells = []
    for (condition, method, target), rs in groups.items():
        errors = np.array([r.abs_error for r in rs])
        cells.append(
            SummaryCell(
                condition,
                method,
                target,
                len(rs),
                float(np.mean(errors)),
                float(np.std(errors, ddof=1)) if len(rs) > 1 else 0.0,
                float(np.mean([r.true_accuracy for r in rs])),
                float(np.mean([r.predicted_accuracy for r in rs])),
                float(np.mean([r.signed_error for r in rs])),
            )
        )
    return cells


@dataclass(frozen=True, eq=False)
class RunReport:
    """Records and summary of a benchmark run.

    Attributes
    ----------
    benchmark : str
        Which runner produced the report.
    records : tuple of EvaluationRecord
        Sorted by (condition, method, target, seed).
    config : dict
        Echo of the canonical experiment configuration.
    metadata : dict
        Per-seed diagnostics (calibration, training-set changes, ...).
    timing : dict
        Wall-clock and resource usage per seed. Not part of the serialised
        report.
    summary : tuple of SummaryCell
        Derived from the records.
    """

    benchmark: str
    records: Tuple[EvaluationRecord, ...]
    config: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    summary: Tuple[SummaryCell, ...] = field(init=False)

    def __post_init__(self):
        records = tuple(sorted(self.records, key=lambda r: r.key))
        keys = [r.key for r in records]
        if len(set(keys)) != len(keys):
            raise ValueError("Every (condition, method, target, seed) may appear only once.")
        object.__setattr__(self, "records", records)
        object.__setattr__(self, "summary", tuple(aggregate(records)))

    def cell(self, condition, method, target):
        """The summary cell of the given combination."""
        for c in self.summary:
            if (c.condition, c.method, c.target) == (condition, method, target):
                return c
        raise KeyError((condition, method, target))

    def select(self, condition=None, method=None, target=None):
        """Records matching all given fields."""
        return [
            r
            for r in self.records
            if (condition is None or r.condition == condition)
            and (method is None or r.method == method)
            and (target is None or r.target == target)
        ]

    def to_dict(self):
        """Plain data form of the report, without the timing."""
        return {
            "benchmark": self.benchmark,
            "config": self.config,
            "metadata": self.metadata,
            "records": [r.to_dict() for r in self.records],
            "summary": [c.to_dict() for c in self.summary],
        }

    def to_json(self):
        """Canonical JSON text of :meth:`to_dict`."""
        return misc.canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        """Rebuild a report, checking the stored summary against the records.

        Raises
        ------
        ValueError
            If the stored summary does not match the records.
        """
        report = cls(
            d["benchmark"],
            tuple(EvaluationRecord.from_dict(r) for r in d["records"]),
            d.get("config", {}),
            d.get("metadata", {}),
        )
        if "summary" in d and d["summary"] != [c.to_dict() for c in report.summary]:
            raise ValueError("Report summary does not match its records.")
        return report

    def __eq__(self, other):
        if not isinstance(other, RunReport):
            return NotImplemented
        return self.to_json() == other.to_json()

    __hash__ = None


def method_improvement(report, method, baseline="conf", target="far", condition="clean"):
    """Relative MAE reduction of `method` over `baseline` on one target.

    Returns
    -------
    improvement : float or None
        ``(mae_baseline - mae_method) / mae_baseline``; `None` when the
        baseline error is zero.
    """
    base = report.cell(condition, baseline, target).mae
    other = report.cell(condition, method, target).mae
    if base == 0:
        return None
    return (base - other) / base


# Per-seed building blocks


def _seed_source(cfg, seed):
    source_spec = cfg.source.replace(seed=stream(seed, "source"))
    data = datagen.make_source(source_spec)
    train, val = datagen.split(data, cfg.split, stream(seed, "split"))
    return source_spec, train, val


def _shift_targets(cfg, seed, source_spec):
    # Held-out in-distribution data, the shifted targets and the corruption ladder
    size = cfg.target_samples_per_class
    test = datagen.make_target(
        source_spec,
        datagen.ShiftSpec(magnitude=0.0, samples_per_class=size, seed=stream(seed, "test")),
    )
    targets = {"source": test}
    for shift in cfg.shifts:
        shift = shift.replace(
            samples_per_class=shift.samples_per_class or size,
            seed=stream(seed, f"shift:{shift.kind}"),
        )
        targets[shift.kind] = datagen.make_target(source_spec, shift)
    for family in cfg.corruption_families:
        family_seed = stream(seed, f"corruption:{family}")
        for severity in cfg.severities:
            spec = datagen.CorruptionSpec(family=family, severity=severity, seed=family_seed)
            targets[f"corrupt:{family}:{severity}"] = datagen.make_corrupted(test, spec)
    return targets


def _degrade(cfg, condition, train, seed):
    # Apply a training-data fidelity condition, returning the data and diagnostics
    if condition == "clean":
        out = train
    elif condition == "label_noise":
        spec = cfg.label_noise.replace(seed=stream(seed, "label_noise"))
        out = datagen.inject_label_noise(train, spec)
    elif condition == "measurement_noise":
        spec = cfg.measurement_noise.replace(seed=stream(seed, "measurement_noise"))
        out = datagen.inject_measurement_noise(train, spec)
    elif condition == "undersample":
        spec = cfg.undersample.replace(seed=stream(seed, "undersample"))
        out = datagen.undersample(train, spec)
    else:
        raise ValueError(f"Unknown fidelity condition '{condition}'.")

    diagnostics = {"n_train": out.n_samples, "class_counts": out.class_counts().tolist()}
    if out.n_samples == train.n_samples:
        diagnostics["changed_labels"] = int(np.count_nonzero(out.labels != train.labels))
    return out, diagnostics


def _fit(cfg, methods, train, train_cfg):
    # Train the predictors the requested methods need
    dims = cfg.dims(train.n_features, train.n_classes)
    fitted = {}
    if {"conf", "lms"} & set(methods):
        fitted["model"] = nn.train_sgd(train, train_cfg, dims)
    if "ma" in methods:
        fitted["ma"] = scoring.train_ensemble(train, train_cfg, dims, cfg.ensemble_size, 0.0)
    if "ma_eps" in methods:
        fitted["ma_eps"] = scoring.train_ensemble(
            train, train_cfg, dims, cfg.ensemble_size, cfg.diversity_noise
        )
    return fitted


def _method(method, fitted, policy):
    # Score and prediction functions of the deployed predictor of a method
    if method in ("conf", "lms"):
        model = fitted["model"]

        def predict(data):
            return nn.predict(model, data.features)

        if method == "conf":
            return (lambda data: scoring.conf_score(model, data)), predict
        return (lambda data: scoring.lms_score(model, data, policy)), predict

    ensemble = fitted[method]
    return (
        lambda data: scoring.ma_score(ensemble, data),
        lambda data: scoring.ensemble_predict(ensemble, data),
    )


def _evaluate(method, score_fn, predict_fn, val, targets, condition, index):
    # Calibrate on validation data, then predict and measure every target
    acc_val = gep.true_accuracy(predict_fn(val), val.labels)
    val_scores = score_fn(val)
    threshold = gep.calibrate_threshold(gep.CalibrationInput(val_scores, acc_val))
    val_estimate = gep.predict_accuracy(val_scores, threshold)

    diagnostics = {
        "acc_val": acc_val,
        "tau": threshold.tau,
        "predicted_val_accuracy": val_estimate.predicted_accuracy,
        "val_error": abs(val_estimate.predicted_accuracy - acc_val),
        "n_val": val.n_samples,
        # Exact calibration can only miss by ties: val_error <= max(1, largest_tie) / n_val
        "largest_tie": int(np.unique(val_scores.scores, return_counts=True)[1].max()),
    }

    records = []
    for name, target in targets.items():
        truth = gep.true_accuracy(predict_fn(target), target.labels)
        estimate = gep.predict_accuracy(score_fn(target), threshold, method, name)
        records.append(
            EvaluationRecord(condition, method, name, index, truth, estimate.predicted_accuracy)
        )
    return records, diagnostics


def _evaluate_methods(cfg, methods, fitted, val, targets, condition, index, seed):
    policy = cfg.augmentation.replace(seed=stream(seed, "augment"))
    records, calibration = [], {}
    for method in methods:
        score_fn, predict_fn = _method(method, fitted, policy)
        recs, calibration[method] = _evaluate(
            method, score_fn, predict_fn, val, targets, condition, index
        )
        records.extend(recs)
    return records, calibration


def _profiled(index, work, *args):
    # Run one seed, timing it and tagging any failure with the seed index
    prof = PSUtilProfiler(label=f"seed {index}", logger=logger)
    try:
        with prof:
            records, metadata = work(*args)
    except Exception as e:
        raise SeedRunError(index, f"{type(e).__name__}: {e}") from e
    return records, metadata, prof.usage


def _shift_seed(cfg, index, conditions, epochs):
    seed = split(cfg.seed, index)
    source_spec, train, val = _seed_source(cfg, seed)
    targets = _shift_targets(cfg, seed, source_spec)
    train_cfg = cfg.train.replace(seed=stream(seed, "train"), epochs=epochs)

    records, meta = [], {"seed": seed, "conditions": {}}
    for condition in conditions:
        degraded, train_diag = _degrade(cfg, condition, train, seed)
        fitted = _fit(cfg, cfg.methods, degraded, train_cfg)
        recs, calibration = _evaluate_methods(
            cfg, cfg.methods, fitted, val, targets, condition, index, seed
        )
        records.extend(recs)
        meta["conditions"][condition] = {"train": train_diag, "calibration": calibration}
        logger.debug("seed %d: finished condition %s", index, condition)
    return records, meta


def _sweep_seed(cfg, index, sizes):
    seed = split(cfg.seed, index)
    source_spec, train, val = _seed_source(cfg, seed)
    targets = _shift_targets(cfg, seed, source_spec)
    train_cfg = cfg.train.replace(seed=stream(seed, "train"))

    dims = cfg.dims(train.n_features, train.n_classes)
    full = scoring.train_ensemble(train, train_cfg, dims, max(sizes), 0.0)

    records, meta = [], {"seed": seed, "conditions": {}}
    for k in sizes:
        condition = f"M={k}"
        recs, calibration = _evaluate_methods(
            cfg, ["ma"], {"ma": full.prefix(k)}, val, targets, condition, index, seed
        )
        records.extend(recs)
        meta["conditions"][condition] = {"calibration": calibration}
    return records, meta


def _slab_data(cfg, slab, seed):
    data = datagen.make_slab(slab.replace(seed=stream(seed, "slab"), shift_simple_feature=False))
    train, val = datagen.split(data, cfg.split, stream(seed, "split"))

    test_spec = slab.replace(seed=stream(seed, "slab-test"), shift_simple_feature=False)
    targets = {
        "slab": datagen.make_slab(test_spec),
        "slab:shifted": datagen.make_slab(test_spec.replace(shift_simple_feature=True)),
    }
    return train, val, targets


def seed_datasets(cfg, index=0):
    """Training, validation and target datasets of one seed of the shift benchmark.

    Parameters
    ----------
    cfg : ExperimentConfig
    index : int
        Seed index within the run.

    Returns
    -------
    train, val : LabeledDataset
    targets : dict
        Target name to dataset, as evaluated by :func:`run_shift_benchmark`.
    """
    cfg = ExperimentConfig.from_config(cfg)
    seed = split(cfg.seed, index)
    source_spec, train, val = _seed_source(cfg, seed)
    return train, val, _shift_targets(cfg, seed, source_spec)


def slab_datasets(cfg, index=0, slab=None):
    """Training, validation and target datasets of one seed of the simplicity-bias study."""
    cfg = ExperimentConfig.from_config(cfg)
    slab = cfg.slab if slab is None else datagen.SlabSpec.from_config(slab)
    return _slab_data(cfg, slab, split(cfg.seed, index))


def _slab_seed(cfg, index, slab):
    seed = split(cfg.seed, index)
    train, val, targets = _slab_data(cfg, slab, seed)
    train_cfg = cfg.train.replace(seed=stream(seed, "train"))
    scramble_seed = stream(seed, "scramble")

    records, meta = [], {"seed": seed, "conditions": {}}
    for condition in ("biased", "scrambled"):
        tr, va = train, val
        if condition == "scrambled":
            tr = datagen.scramble_feature(train, 0, split(scramble_seed, 0))
            va = datagen.scramble_feature(val, 0, split(scramble_seed, 1))

        fitted = _fit(cfg, cfg.methods, tr, train_cfg)
        recs, calibration = _evaluate_methods(
            cfg, cfg.methods, fitted, va, targets, condition, index, seed
        )
        records.extend(recs)

        block = {"calibration": calibration}
        if "model" in fitted:
            # How much the single model leans on coordinate 0
            model = fitted["model"]
            ablated = datagen.scramble_feature(va, 0, split(scramble_seed, 2))
            block["reliance"] = {
                "train_accuracy": nn.accuracy(model, tr),
                "val_accuracy": nn.accuracy(model, va),
                "val_accuracy_simple_scrambled": nn.accuracy(model, ablated),
            }
        meta["conditions"][condition] = block
    return records, meta


def _run_seeds(cfg, work, *args):
    logger.info("Running %d seeds with %d jobs", cfg.n_seeds, cfg.jobs)
    results = joblib.Parallel(n_jobs=cfg.jobs)(
        joblib.delayed(_profiled)(index, work, cfg, index, *args)
        for index in range(cfg.n_seeds)
    )
    records, metadata, timing = [], {}, {}
    for index, (recs, meta, usage) in enumerate(results):
        records.extend(recs)
        metadata[str(index)] = meta
        timing[str(index)] = usage
    return records, metadata, timing


def _make_report(benchmark, cfg, results, extra=None):
    records, metadata, timing = results
    meta = {"seeds": metadata}
    meta.update(extra or {})
    report = RunReport(benchmark, tuple(records), cfg.canonical(), meta, timing)
    logger.info(
        "%s: %d records in %d cells", benchmark, len(report.records), len(report.summary)
    )
    return report


def _improvements(report, conditions):
    # Relative MAE change of every method against conf, per target
    if "conf" not in report.config["methods"]:
        return {}
    out = {}
    targets = sorted({r.target for r in report.records})
    for condition in conditions:
        for method in report.config["methods"]:
            if method == "conf":
                continue
            out[f"{condition}:{method}_vs_conf"] = {
                t: method_improvement(report, method, "conf", t, condition) for t in targets
            }
    return out


def _with_improvements(report, conditions):
    meta = dict(report.metadata)
    meta["improvements"] = _improvements(report, conditions)
    return RunReport(report.benchmark, report.records, report.config, meta, report.timing)


def run_shift_benchmark(cfg):
    """Predict accuracy on shifted and corrupted targets.

    Parameters
    ----------
    cfg : ExperimentConfig

    Returns
    -------
    report : RunReport
        Condition "clean", one target per shift kind, "source" (held-out
        in-distribution data) and ``corrupt:<family>:<severity>``.

    Raises
    ------
    SeedRunError
        If any seed fails.
    """
    cfg = ExperimentConfig.from_config(cfg)
    results = _run_seeds(cfg, _shift_seed, ["clean"], cfg.train.epochs)
    return _with_improvements(_make_report("shift", cfg, results), ["clean"])


def run_fidelity_benchmark(cfg):
    """The shift benchmark with degraded training data.

    Every condition in ``cfg.fidelity`` is applied to the same training split
    and trained for ``cfg.fidelity_epochs`` epochs. Metadata records the
    training set size, class counts and number of changed labels of each
    condition.

    Parameters
    ----------
    cfg : ExperimentConfig

    Returns
    -------
    report : RunReport
    """
    cfg = ExperimentConfig.from_config(cfg)
    conditions = [c for c in FIDELITY_CONDITIONS if c in cfg.fidelity]
    results = _run_seeds(cfg, _shift_seed, conditions, cfg.fidelity_epochs)
    return _with_improvements(_make_report("fidelity", cfg, results), conditions)


def run_ensemble_sweep(cfg, sizes=None):
    """Model agreement accuracy prediction as a function of ensemble size.

    One ensemble of ``max(sizes)`` members is trained per seed without label
    noise; size ``k`` is evaluated on its first ``k`` members. Conditions are
    named ``M=<k>``.

    Parameters
    ----------
    cfg : ExperimentConfig
    sizes : list of int, optional
        Defaults to ``cfg.sweep_sizes``.

    Returns
    -------
    report : RunReport
    """
    cfg = ExperimentConfig.from_config(cfg)
    sizes = list(cfg.sweep_sizes if sizes is None else sizes)
    if not sizes or min(sizes) < 1:
        raise ValueError(f"Ensemble sizes must be positive, got {sizes}.")
    sizes = sorted(set(sizes))
    results = _run_seeds(cfg, _sweep_seed, sizes)
    return _make_report("ensemble_sweep", cfg, results, {"sizes": sizes})


def run_simplicity_bias(cfg, slab=None):
    """Accuracy prediction under simplicity bias.

    Classifiers are trained on the slab dataset, calibrated on its validation
    split and evaluated on an unshifted ("slab") and a shifted
    ("slab:shifted") test set whose simple coordinate carries no label
    information. Condition "biased" trains on the data as is, "scrambled"
    on the same data with coordinate 0 permuted. Positive `signed_error`
    marks over-estimation.

    Parameters
    ----------
    cfg : ExperimentConfig
    slab : SlabSpec, optional
        Defaults to ``cfg.slab``.

    Returns
    -------
    report : RunReport
    """
    cfg = ExperimentConfig.from_config(cfg)
    slab = cfg.slab if slab is None else datagen.SlabSpec.from_config(slab)
    if slab is not cfg.slab:
        cfg = cfg.replace(slab=slab)
    results = _run_seeds(cfg, _slab_seed, slab)
    return _make_report("simplicity_bias", cfg, results)
