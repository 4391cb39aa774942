"""Synthetic datasets and the transformations applied to them.

Everything here is a pure function of a dataset and a seeded specification.
Datasets are immutable; each transformation returns a new
:class:`LabeledDataset` whose `provenance` tag records the step, so a tag like
``source+split:0+label_noise(0.05)`` reads as the history of the data.

Generators
==========
- :py:meth:`make_source`
- :py:meth:`make_target`
- :py:meth:`make_slab`

Corruption ladder
=================
:py:meth:`make_corrupted` applies one of four families at severity 1 to 5.
The perturbation scale for each family and severity is

================  ===================  ===============================================
family            scale, severity 1-5  effect
================  ===================  ===============================================
additive_noise    0.5, 1, 1.5, 2, 3    ``x + s * z``, ``z`` standard normal
feature_blur      0.5, 1, 1.5, 2, 3    Gaussian smoothing along the feature axis, width ``s``
feature_dropout   0.1, 0.2, 0.3, 0.4,  entries with ``u < s`` set to zero, ``u`` uniform
                  0.5
affine_warp       0.1, 0.2, 0.3, 0.4,  ``x @ (I + s * G / sqrt(d))``, ``G`` standard normal
                  0.6
================  ===================  ===============================================

Random draws come from ``Rng(spec.seed)`` with a single call of the shape of
the feature matrix (``G`` has shape ``d x d``).

Training-data fidelity
======================
- :py:meth:`inject_label_noise`
- :py:meth:`inject_measurement_noise`
- :py:meth:`undersample`

Utilities
=========
- :py:meth:`class_means`
- :py:meth:`split`
- :py:meth:`scramble_feature`
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import config, misc
from .nn import as_matrix
from .rng import SEED_MAX, Rng, stream


logger = logging.getLogger(__name__)

# Perturbation scale per corruption family, indexed by severity - 1
SEVERITY_SCALES = {
    "additive_noise": (0.5, 1.0, 1.5, 2.0, 3.0),
    "feature_blur": (0.5, 1.0, 1.5, 2.0, 3.0),
    "feature_dropout": (0.1, 0.2, 0.3, 0.4, 0.5),
    "affine_warp": (0.1, 0.2, 0.3, 0.4, 0.6),
}
CORRUPTION_FAMILIES = tuple(SEVERITY_SCALES)

# Default translation strengths of the two shift kinds
SHIFT_MAGNITUDES = {"near": 0.5, "far": 2.0}

# Smoothing kernels are cut off at this many standard deviations
BLUR_TRUNCATE = 3.0

MAX_PLACEMENT_TRIES = 1000


class DatasetError(ValueError):
    """A dataset could not be generated or transformed as requested."""


def _seed_prop():
    return config.int_in_range(0, SEED_MAX, default=0)


def _optional_float(minimum):
    # A non-negative float that may also be left unset
    def _prop(val):
        if val is None:
            return None
        if isinstance(val, bool):
            raise config.GepConfigError("Input %r is not a number" % (val,))
        val = float(val)
        if val < minimum:
            raise config.GepConfigError("Input %s is below %s" % (val, minimum))
        return val

    return config.Property(proptype=_prop, default=None)


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """A feature matrix with integer class labels.

    Attributes
    ----------
    features : np.ndarray[n_samples, n_features]
        Finite 64-bit features. Stored read-only.
    labels : np.ndarray[n_samples]
        Class indices in ``[0, n_classes)``.
    n_classes : int
    provenance : str
        Tag recording how the dataset was made.
    """

    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    provenance: str = "source"

    def __post_init__(self):
        features = as_matrix(self.features, "features").copy()
        labels = np.array(self.labels)
        n_classes = int(self.n_classes)

        if features.shape[0] < 1:
            raise DatasetError("A dataset needs at least one sample.")
        if labels.shape != (features.shape[0],):
            raise DatasetError(
                f"Expected {features.shape[0]} labels, got shape {labels.shape}."
            )
        if labels.dtype.kind not in "iu":
            if not np.all(np.mod(labels, 1) == 0):
                raise DatasetError("Labels must be integers.")
        labels = labels.astype(np.intp)
        if n_classes < 1 or labels.min() < 0 or labels.max() >= n_classes:
            raise DatasetError(f"Labels must lie in [0, {n_classes}).")

        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "n_classes", n_classes)

    @property
    def n_samples(self):
        """Number of rows."""
        return self.features.shape[0]

    @property
    def n_features(self):
        """Number of feature columns."""
        return self.features.shape[1]

    def class_counts(self):
        """Number of samples in each class, including empty ones."""
        return np.bincount(self.labels, minlength=self.n_classes)

    def derive(self, tag, features=None, labels=None):
        """A new dataset with some arrays replaced and `tag` appended to the provenance."""
        return LabeledDataset(
            self.features if features is None else features,
            self.labels if labels is None else labels,
            self.n_classes,
            f"{self.provenance}+{tag}",
        )

    def take(self, index, tag):
        """Select rows by index (or boolean mask)."""
        return self.derive(tag, self.features[index], self.labels[index])

    def __len__(self):
        return self.n_samples

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (
            self.n_classes == other.n_classes
            and self.provenance == other.provenance
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None


class SourceSpec(config.Reader):
    """Gaussian class clusters.

    Attributes
    ----------
    n_classes : int
        At least 2. Default 4.
    n_features : int
        Default 8.
    samples_per_class : int
        Default 125.
    cluster_separation : float
        Minimum distance between any two class means. Default 4.
    within_class_spread : float
        Standard deviation of each cluster. Zero puts every sample on its
        class mean. Default 1.
    seed : int
    """

    n_classes = config.int_in_range(2, default=4)
    n_features = config.int_in_range(1, default=8)
    samples_per_class = config.int_in_range(1, default=125)
    cluster_separation = config.float_in_range(0.0, None, default=4.0, open_start=True)
    within_class_spread = config.float_in_range(0.0, None, default=1.0)
    seed = _seed_prop()


class ShiftSpec(config.Reader):
    """A translation and widening of every class cluster.

    Attributes
    ----------
    kind : str
        "near" or "far".
    magnitude : float, optional
        Length of the mean translation. If unset, 0.5 for "near" and 2.0 for
        "far".
    samples_per_class : int, optional
        Target size per class. Defaults to the source's.
    seed : int
    """

    kind = config.enum(("near", "far"), default="near")
    magnitude = _optional_float(0.0)
    samples_per_class = config.Property(
        default=None, proptype=lambda v: None if v is None else _positive_int(v)
    )
    seed = _seed_prop()

    @property
    def effective_magnitude(self):
        """The magnitude, falling back to the default of `kind`."""
        return SHIFT_MAGNITUDES[self.kind] if self.magnitude is None else self.magnitude


def _strict_bool(val):
    if not isinstance(val, (bool, np.bool_)):
        raise config.GepConfigError("Input %r is not true or false" % (val,))
    return bool(val)


def _positive_int(val):
    if isinstance(val, bool) or not float(val).is_integer() or int(val) < 1:
        raise config.GepConfigError("Input %r is not a positive integer" % (val,))
    return int(val)


class CorruptionSpec(config.Reader):
    """One rung of the corruption ladder.

    Attributes
    ----------
    family : str
        One of :data:`CORRUPTION_FAMILIES`.
    severity : int
        1 to 5.
    scale : float, optional
        Explicit perturbation scale overriding the severity table. Zero gives
        an unperturbed copy.
    seed : int
    """

    family = config.enum(CORRUPTION_FAMILIES, default="additive_noise")
    severity = config.int_in_range(1, 5, default=1)
    scale = _optional_float(0.0)
    seed = _seed_prop()

    @property
    def effective_scale(self):
        """The perturbation scale actually applied."""
        if self.scale is not None:
            return self.scale
        return SEVERITY_SCALES[self.family][self.severity - 1]


class LabelNoiseSpec(config.Reader):
    """Random label flips.

    Attributes
    ----------
    rate : float
        Fraction of samples to flip, in ``[0, 1]``. Default 0.05.
    seed : int
    """

    rate = config.float_in_range(0.0, 1.0, default=0.05)
    seed = _seed_prop()


class MeasurementNoiseSpec(config.Reader):
    """Smoothing along the feature axis followed by additive noise.

    Attributes
    ----------
    blur_sigma : float
        Width of the Gaussian smoothing kernel. Default 0.5.
    additive_sigma : float
        Standard deviation of the additive noise. Default 0.07.
    seed : int
    """

    blur_sigma = config.float_in_range(0.0, None, default=0.5)
    additive_sigma = config.float_in_range(0.0, None, default=0.07)
    seed = _seed_prop()


class UndersampleSpec(config.Reader):
    """Random removal of part of some classes.

    Attributes
    ----------
    target_classes : list of int
        Classes to thin out. Default ``[0, 1]``.
    drop_fraction : float
        Fraction of each target class removed. Default 0.2.
    seed : int
    """

    target_classes = config.list_type(int, minlength=1, default=[0, 1])
    drop_fraction = config.float_in_range(0.0, 1.0, default=0.2)
    seed = _seed_prop()

    def _finalise_config(self):
        if any(c < 0 for c in self.target_classes):
            raise config.GepConfigError(
                f"Target classes must be non-negative, got {self.target_classes}."
            )


class SlabSpec(config.Reader):
    """A binary dataset with one simple feature and several slab-coded features.

    Coordinate 0 separates the classes by sign with a margin. Each of the
    `n_slab_features` following coordinates is split into `n_slabs` equal
    slabs on ``[-1, 1]`` with alternating class (even slabs class 0, odd
    slabs class 1).

    Attributes
    ----------
    n_samples : int
        Default 1000. Classes are balanced.
    simple_feature_margin : float
        ``|x_0|`` is drawn uniformly from ``[margin, 1]``. Default 0.1.
    n_slabs : int
        At least 3. Default 5.
    n_slab_features : int
        Default 2.
    slab_noise : float
        Gaussian noise added to the slab coordinates. Default 0.
    shift_simple_feature : bool
        Replace coordinate 0 with label-independent uniform noise on ``[-1, 1]``.
    seed : int
    """

    n_samples = config.int_in_range(2, default=1000)
    simple_feature_margin = config.float_in_range(0.0, 1.0, default=0.1, open_start=True)
    n_slabs = config.int_in_range(3, default=5)
    n_slab_features = config.int_in_range(1, default=2)
    slab_noise = config.float_in_range(0.0, None, default=0.0)
    shift_simple_feature = config.Property(default=False, proptype=_strict_bool)
    seed = _seed_prop()


def class_means(spec):
    """Seeded class means of a source distribution.

    Means are drawn i.i.d. normal with a per-coordinate scale of
    ``1.5 * separation / sqrt(2 * n_features)`` (a typical pairwise distance of
    1.5 separations) and redrawn until every pair is at least
    `cluster_separation` apart.

    Parameters
    ----------
    spec : SourceSpec

    Returns
    -------
    means : np.ndarray[n_classes, n_features]

    Raises
    ------
    DatasetError
        If no valid placement was found within the retry budget.
    """
    rng = Rng(stream(spec.seed, "means"))
    scale = 1.5 * spec.cluster_separation / np.sqrt(2 * spec.n_features)
    iu = np.triu_indices(spec.n_classes, k=1)

    for attempt in range(MAX_PLACEMENT_TRIES):
        means = scale * rng.standard_normal((spec.n_classes, spec.n_features))
        dist = np.linalg.norm(means[:, np.newaxis] - means[np.newaxis, :], axis=-1)
        if dist[iu].min() >= spec.cluster_separation:
            if attempt:
                logger.debug("Placed class means after %d attempts", attempt + 1)
            return means

    raise DatasetError(
        f"Could not place {spec.n_classes} class means {spec.cluster_separation} apart "
        f"in {spec.n_features} dimensions after {MAX_PLACEMENT_TRIES} attempts ({spec!r})."
    )


def _clusters(means, spread, samples_per_class, seed):
    n_classes, n_features = means.shape
    labels = np.repeat(np.arange(n_classes), samples_per_class)
    noise = Rng(seed).standard_normal((labels.size, n_features))
    return means[labels] + spread * noise, labels


def make_source(spec):
    """Draw a balanced dataset of Gaussian clusters.

    Parameters
    ----------
    spec : SourceSpec

    Returns
    -------
    data : LabeledDataset
        ``n_classes * samples_per_class`` rows ordered by class, tagged "source".
    """
    means = class_means(spec)
    features, labels = _clusters(
        means,
        spec.within_class_spread,
        spec.samples_per_class,
        stream(spec.seed, "samples"),
    )
    return LabeledDataset(features, labels, spec.n_classes, "source")


def make_target(source_spec, shift):
    """Draw a shifted version of a source distribution.

    Each class mean is moved along its own seeded random direction by the
    shift magnitude ``m``, and the cluster standard deviation is multiplied by
    ``sqrt(1 + m / 2)`` (covariance inflated by ``1 + m / 2``).

    Parameters
    ----------
    source_spec : SourceSpec
    shift : ShiftSpec

    Returns
    -------
    data : LabeledDataset
        Tagged ``target:shift=<kind>``.
    """
    magnitude = shift.effective_magnitude
    means = class_means(source_spec)

    directions = Rng(stream(shift.seed, "directions")).standard_normal(means.shape)
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)

    spc = shift.samples_per_class or source_spec.samples_per_class
    features, labels = _clusters(
        means + magnitude * directions,
        source_spec.within_class_spread * np.sqrt(1.0 + magnitude / 2.0),
        spc,
        stream(shift.seed, "samples"),
    )
    return LabeledDataset(
        features, labels, source_spec.n_classes, f"target:shift={shift.kind}"
    )


def make_corrupted(base, spec):
    """Apply one family of the corruption ladder.

    See the table in the module documentation for the scale of each severity.

    Parameters
    ----------
    base : LabeledDataset
    spec : CorruptionSpec

    Returns
    -------
    data : LabeledDataset
        Same labels, perturbed features.

    Raises
    ------
    DatasetError
        For an unknown family or a severity outside 1 to 5.
    """
    if spec.family not in SEVERITY_SCALES:
        raise DatasetError(f"Unknown corruption family '{spec.family}'.")
    if not 1 <= spec.severity <= 5:
        raise DatasetError(f"Severity {spec.severity} outside 1 to 5.")

    x = base.features
    s = spec.effective_scale
    rng = Rng(spec.seed)

    if spec.family == "additive_noise":
        out = x + s * rng.standard_normal(x.shape)
    elif spec.family == "feature_blur":
        out = _blur(x, s)
    elif spec.family == "feature_dropout":
        out = np.where(rng.uniform(size=x.shape) < s, 0.0, x)
    else:
        d = x.shape[1]
        warp = np.eye(d) + s * rng.standard_normal((d, d)) / np.sqrt(d)
        out = x @ warp

    return base.derive(f"corrupt:{spec.family}:{spec.severity}", features=out)


def _blur(x, sigma):
    # Gaussian smoothing of each row, reflecting at the ends. The kernel keeps
    # the integer offsets within BLUR_TRUNCATE widths of the centre.
    if sigma == 0:
        return np.array(x)
    radius = int(np.floor(BLUR_TRUNCATE * sigma))
    return ndimage.gaussian_filter1d(x, sigma, axis=1, mode="reflect", radius=radius)


def inject_label_noise(base, spec):
    """Flip a fixed number of labels to a different class.

    Exactly ``round(rate * n)`` samples (halves away from zero) are chosen
    without replacement. Each chosen label ``y`` becomes ``(y + k) % n_classes``
    with ``k`` uniform on ``1 .. n_classes - 1``, so a flip always changes the
    label and is uniform over the other classes.

    Parameters
    ----------
    base : LabeledDataset
    spec : LabelNoiseSpec

    Returns
    -------
    data : LabeledDataset
    """
    if base.n_classes < 2:
        raise DatasetError("Label noise needs at least two classes.")

    n = base.n_samples
    k = misc.round_half_away(spec.rate * n)
    rng = Rng(spec.seed)
    index = rng.choice(n, size=k, replace=False)
    offsets = rng.integers(1, base.n_classes, size=k)

    labels = np.array(base.labels)
    labels[index] = (labels[index] + offsets) % base.n_classes

    return base.derive(f"label_noise({spec.rate:g})", labels=labels)


def inject_measurement_noise(base, spec):
    """Smooth every row along the feature axis, then add Gaussian noise.

    The smoothing kernel is a Gaussian of width `blur_sigma` sampled at integer
    offsets ``|k| <= 3 * blur_sigma`` and normalised to unit sum (offsets -1 to
    1 for the default width 0.5). Rows are extended by reflection
    (``d c b a | a b c d | d c b a``). The noise is
    ``additive_sigma * Rng(seed).standard_normal(shape)``. Either step is skipped
    when its width is zero.

    Parameters
    ----------
    base : LabeledDataset
    spec : MeasurementNoiseSpec

    Returns
    -------
    data : LabeledDataset
    """
    out = _blur(base.features, spec.blur_sigma)
    if spec.additive_sigma > 0:
        out = out + spec.additive_sigma * Rng(spec.seed).standard_normal(out.shape)

    return base.derive(
        f"measurement_noise({spec.blur_sigma:g},{spec.additive_sigma:g})", features=out
    )


def undersample(base, spec):
    """Remove a fraction of the samples of some classes.

    For every target class with ``n_c`` samples, ``round(drop_fraction * n_c)``
    of them are removed, chosen uniformly without replacement. Remaining rows
    keep their order.

    Parameters
    ----------
    base : LabeledDataset
    spec : UndersampleSpec

    Returns
    -------
    data : LabeledDataset

    Raises
    ------
    DatasetError
        If a target class has no samples, or nothing would remain.
    """
    rng = Rng(spec.seed)
    keep = np.ones(base.n_samples, dtype=bool)

    for c in sorted(set(spec.target_classes)):
        members = np.flatnonzero(base.labels == c)
        if members.size == 0:
            raise DatasetError(f"Class {c} is absent from dataset '{base.provenance}'.")
        k = misc.round_half_away(spec.drop_fraction * members.size)
        keep[rng.choice(members, size=k, replace=False)] = False

    if not keep.any():
        raise DatasetError("Undersampling would remove every sample.")

    classes = ",".join(str(c) for c in sorted(set(spec.target_classes)))
    return base.take(keep, f"undersample({spec.drop_fraction:g};{classes})")


def make_slab(spec):
    """Draw the simplicity-bias dataset.

    Labels are balanced and shuffled. Coordinate 0 is
    ``(2y - 1) * uniform(margin, 1)``, or ``uniform(-1, 1)`` when
    `shift_simple_feature` is set. For each slab coordinate a slab of matching
    parity is chosen uniformly and the value drawn uniformly inside it, plus
    ``slab_noise`` Gaussian noise.

    Parameters
    ----------
    spec : SlabSpec

    Returns
    -------
    data : LabeledDataset
        ``1 + n_slab_features`` columns, two classes.
    """
    rng = Rng(stream(spec.seed, "slab"))
    n = spec.n_samples

    labels = rng.permutation(np.arange(n) % 2)

    magnitude = rng.uniform(spec.simple_feature_margin, 1.0, size=n)
    simple = (2 * labels - 1) * magnitude
    if spec.shift_simple_feature:
        simple = Rng(stream(spec.seed, "shift")).uniform(-1.0, 1.0, size=n)

    width = 2.0 / spec.n_slabs
    n_even = (spec.n_slabs + 1) // 2
    n_odd = spec.n_slabs // 2
    slabs = np.empty((n, spec.n_slab_features))
    for jj in range(spec.n_slab_features):
        pick = np.where(
            labels == 0,
            2 * rng.integers(0, n_even, size=n),
            2 * rng.integers(0, n_odd, size=n) + 1,
        )
        slabs[:, jj] = -1.0 + width * (pick + rng.uniform(size=n))
    if spec.slab_noise > 0:
        slabs += spec.slab_noise * rng.standard_normal(slabs.shape)

    features = np.column_stack([simple, slabs])
    tag = "slab:shifted" if spec.shift_simple_feature else "slab"
    return LabeledDataset(features, labels, 2, tag)


def slab_index(values, n_slabs):
    """Index of the slab each value on ``[-1, 1]`` falls in (clipped to the ends)."""
    idx = np.floor((np.asarray(values) + 1.0) * n_slabs / 2.0).astype(int)
    return np.clip(idx, 0, n_slabs - 1)


def split(base, fractions=(0.8, 0.2), seed=0):
    """Stratified random partition.

    Each class is shuffled with ``Rng(seed)`` (classes in increasing order) and
    cut into consecutive parts of ``round(f * n_c)`` samples, the last part
    taking the remainder. Rows keep their original order within each part.

    Parameters
    ----------
    base : LabeledDataset
    fractions : sequence of float
        Positive, summing to one.
    seed : int

    Returns
    -------
    parts : tuple of LabeledDataset
        One per fraction, tagged ``split:<i>``.

    Raises
    ------
    DatasetError
        If some class would leave a part without samples.
    """
    fractions = np.asarray(fractions, dtype=np.float64)
    if fractions.size < 2 or np.any(fractions <= 0) or abs(fractions.sum() - 1) > 1e-9:
        raise ValueError(f"Split fractions must be positive and sum to one, got {fractions}.")

    rng = Rng(seed)
    parts = [[] for _ in fractions]
    for c in range(base.n_classes):
        members = np.flatnonzero(base.labels == c)
        if members.size == 0:
            continue
        members = rng.permutation(members)
        counts = [misc.round_half_away(f * members.size) for f in fractions[:-1]]
        counts.append(members.size - sum(counts))
        if min(counts) < 1:
            raise DatasetError(
                f"Class {c} has {members.size} samples, too few to split by {fractions.tolist()}."
            )
        start = 0
        for part, count in zip(parts, counts):
            part.append(members[start : start + count])
            start += count

    return tuple(
        base.take(np.sort(np.concatenate(part)), f"split:{ii}")
        for ii, part in enumerate(parts)
    )


def scramble_feature(base, column, seed):
    """Randomly permute one feature column across samples.

    This destroys the information the column carries about the labels while
    keeping its marginal distribution.
    """
    if not 0 <= column < base.n_features:
        raise DatasetError(f"Column {column} outside [0, {base.n_features}).")
    features = np.array(base.features)
    features[:, column] = Rng(seed).permutation(features[:, column])
    return base.derive(f"scramble(f{column})", features=features)
