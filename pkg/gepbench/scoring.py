"""Sample-level scoring functions.

A score ``s(x)`` in ``[0, 1]`` is meant to be high for samples the deployed
predictor gets right. None of the scores here ever look at labels.

Scores
======
- :py:meth:`conf_score` -- maximum softmax probability of one model.
- :py:meth:`lms_score` -- local manifold smoothness: the fraction of `K`
  augmented copies of a sample predicted as the clean sample is.
- :py:meth:`ma_score` -- model agreement: the fraction of ensemble members
  voting for the modal class.

Each has a logit-level counterpart (:py:meth:`conf_from_logits`,
:py:meth:`votes_from_logits`, :py:meth:`ma_from_votes`) so that logits
computed elsewhere can be scored without a model.

Argmax ties, both in single-model predictions and in vote counts, go to the
lowest class index.

Ensembles
=========
- :py:meth:`train_ensemble`
- :py:meth:`ensemble_predict`
"""

import logging
from dataclasses import dataclass, field
from typing import Tuple

import joblib
import numpy as np

from . import config, nn
from .datagen import LabelNoiseSpec, inject_label_noise
from .rng import SEED_MAX, Rng, split


logger = logging.getLogger(__name__)

SCORE_METHODS = ("conf", "lms", "ma")


@dataclass(frozen=True, eq=False)
class ScoreVector:
    """Per-sample scores.

    Attributes
    ----------
    scores : np.ndarray[n_samples]
        Values in ``[0, 1]``, stored read-only.
    method : str
        One of "conf", "lms" or "ma".
    meta : dict
        Method parameters (``K``, ``M``, ``epsilon``) used to produce the scores.
    """

    scores: np.ndarray
    method: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        scores = np.array(self.scores, dtype=np.float64)
        if scores.ndim != 1:
            raise nn.DimensionError("Scores must be a vector", 1, scores.ndim)
        if self.method not in SCORE_METHODS:
            raise ValueError(f"Unknown score method '{self.method}'.")
        if np.any(~np.isfinite(scores)) or np.any((scores < 0) | (scores > 1)):
            raise ValueError("Scores must lie in [0, 1].")
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "meta", dict(self.meta))

    def __len__(self):
        return self.scores.size


class AugmentationPolicy(config.Reader):
    """Parametric augmentation used by LMS.

    Copy ``k`` of sample ``x`` is ``(x + jitter_sigma * z) * s`` with ``z``
    standard normal per feature and ``s`` uniform on `scale_range` per sample.

    Attributes
    ----------
    count : int
        Number of augmented copies ``K``. Default 10.
    jitter_sigma : float
        Default 0.5.
    scale_range : list of float
        ``[low, high]`` with ``0 < low <= 1 <= high``. Default ``[0.9, 1.1]``.
    seed : int
    """

    count = config.int_in_range(1, default=10)
    jitter_sigma = config.float_in_range(0.0, None, default=0.5)
    scale_range = config.list_type(length=2, default=[0.9, 1.1])
    seed = config.int_in_range(0, SEED_MAX, default=0)

    def _finalise_config(self):
        try:
            low, high = (float(v) for v in self.scale_range)
        except (TypeError, ValueError) as e:
            raise config.GepConfigError(f"Invalid scale_range {self.scale_range}.") from e
        if not 0 < low <= 1.0 <= high:
            raise config.GepConfigError(
                f"scale_range must satisfy 0 < low <= 1 <= high, got [{low}, {high}]."
            )
        self.scale_range = [low, high]


@dataclass(frozen=True, eq=False)
class Ensemble:
    """A list of models sharing one architecture.

    Attributes
    ----------
    members : tuple of MlpModel
    diversity_noise : float
        Label noise rate each member was trained with (0 for plain MA).
    """

    members: Tuple[nn.MlpModel, ...]
    diversity_noise: float = 0.0

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("An ensemble needs at least one member.")
        for ii, m in enumerate(members[1:], start=1):
            if m.layer_dims != members[0].layer_dims:
                raise nn.DimensionError(
                    f"Ensemble member {ii} has different layer dims",
                    members[0].layer_dims,
                    m.layer_dims,
                )
        if not 0.0 <= self.diversity_noise <= 1.0:
            raise ValueError(f"diversity_noise {self.diversity_noise} outside [0, 1].")
        object.__setattr__(self, "members", members)

    @property
    def size(self):
        """Number of members ``M``."""
        return len(self.members)

    def prefix(self, k):
        """The ensemble of the first `k` members."""
        if not 1 <= k <= self.size:
            raise ValueError(f"Prefix size {k} outside [1, {self.size}].")
        return Ensemble(self.members[:k], self.diversity_noise)

    def __eq__(self, other):
        if not isinstance(other, Ensemble):
            return NotImplemented
        return self.diversity_noise == other.diversity_noise and self.members == other.members

    __hash__ = None


def _features(data):
    return data.features if hasattr(data, "features") else np.asarray(data, dtype=np.float64)


def conf_from_logits(logits):
    """Maximum softmax probability of each row of a logits matrix."""
    return nn.softmax(np.atleast_2d(logits)).max(axis=-1)


def conf_score(model, data):
    """Confidence score of a single model.

    Parameters
    ----------
    model : MlpModel
    data : LabeledDataset or np.ndarray
        Only the features are used.

    Returns
    -------
    scores : ScoreVector
    """
    logits = nn.forward(model, np.atleast_2d(_features(data)))
    return ScoreVector(conf_from_logits(logits), "conf")


def augment(features, policy):
    """Augmented copies of a batch of feature vectors.

    Draws are ``Rng(policy.seed).standard_normal((K, n, d))`` followed by
    ``uniform(low, high, size=(K, n, 1))`` from the same generator.

    Parameters
    ----------
    features : np.ndarray[n, d]
    policy : AugmentationPolicy

    Returns
    -------
    copies : np.ndarray[K, n, d]
    """
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    k = policy.count
    low, high = policy.scale_range
    rng = Rng(policy.seed)
    jitter = rng.standard_normal((k,) + x.shape)
    scale = rng.uniform(low, high, size=(k, x.shape[0], 1))
    return (x[np.newaxis] + policy.jitter_sigma * jitter) * scale


def lms_score(model, data, policy):
    """Local manifold smoothness of a single model.

    Parameters
    ----------
    model : MlpModel
    data : LabeledDataset or np.ndarray
    policy : AugmentationPolicy

    Returns
    -------
    scores : ScoreVector
        Values on the lattice ``{0, 1/K, ..., 1}``.
    """
    x = np.atleast_2d(_features(data))
    clean = nn.predict(model, x)
    copies = augment(x, policy)
    k, n, d = copies.shape
    preds = nn.predict(model, copies.reshape(k * n, d)).reshape(k, n)
    scores = np.count_nonzero(preds == clean[np.newaxis], axis=0) / k
    return ScoreVector(scores, "lms", {"K": k})


def votes_from_logits(logits):
    """Argmax votes of a stack of member logits.

    Parameters
    ----------
    logits : np.ndarray[M, n, n_classes]

    Returns
    -------
    votes : np.ndarray[M, n]
    """
    logits = np.asarray(logits)
    if logits.ndim != 3:
        raise nn.DimensionError("Expected a stack of logits matrices", 3, logits.ndim)
    return np.argmax(logits, axis=-1)


def vote_counts(votes, n_classes=None):
    """Number of members voting for each class, per sample.

    Parameters
    ----------
    votes : np.ndarray[M, n]
    n_classes : int, optional
        Inferred from the largest vote if not given.

    Returns
    -------
    counts : np.ndarray[n, n_classes]
    """
    votes = np.atleast_2d(np.asarray(votes))
    if n_classes is None:
        n_classes = int(votes.max()) + 1
    return (votes[..., np.newaxis] == np.arange(n_classes)).sum(axis=0)


def ma_from_votes(votes, n_classes=None):
    """Fraction of members voting for the modal class of each sample."""
    votes = np.atleast_2d(np.asarray(votes))
    return vote_counts(votes, n_classes).max(axis=1) / votes.shape[0]


def majority_vote(votes, n_classes=None):
    """Modal class per sample, ties going to the lowest class."""
    return np.argmax(vote_counts(votes, n_classes), axis=1)


def _member_votes(ensemble, data):
    x = np.atleast_2d(_features(data))
    return np.stack([nn.predict(m, x) for m in ensemble.members])


def ma_score(ensemble, data):
    """Model agreement score of an ensemble.

    Parameters
    ----------
    ensemble : Ensemble
    data : LabeledDataset or np.ndarray

    Returns
    -------
    scores : ScoreVector
        Values on the lattice ``{1/M, ..., 1}``.
    """
    n_classes = ensemble.members[0].n_classes
    scores = ma_from_votes(_member_votes(ensemble, data), n_classes)
    return ScoreVector(
        scores, "ma", {"M": ensemble.size, "epsilon": ensemble.diversity_noise}
    )


def ensemble_predict(ensemble, data):
    """Majority vote prediction of an ensemble (ties to the lowest class)."""
    n_classes = ensemble.members[0].n_classes
    return majority_vote(_member_votes(ensemble, data), n_classes)


def _train_member(train, cfg, dims, epsilon, index):
    seed = split(cfg.seed, index)
    if epsilon > 0:
        train = inject_label_noise(train, LabelNoiseSpec(rate=epsilon, seed=seed))
    return nn.train_sgd(train, cfg.replace(seed=seed), dims)


def train_ensemble(train, cfg, dims, size=10, epsilon=0.0, jobs=1):
    """Train an ensemble, optionally on label-noised copies of the data.

    Member ``m`` uses the seed ``split(cfg.seed, m)`` both for its training
    run and for its label noise draw, so members are reproducible by position
    whatever the scheduling.

    Parameters
    ----------
    train : LabeledDataset
    cfg : TrainConfig
    dims : sequence of int
    size : int
        Number of members ``M``.
    epsilon : float
        Label noise rate for each member, in ``[0, 1]``. Zero trains on the
        clean labels.
    jobs : int
        Worker processes for joblib.

    Returns
    -------
    ensemble : Ensemble
    """
    if size < 1:
        raise ValueError(f"Ensemble size must be at least 1, got {size}.")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon {epsilon} outside [0, 1].")

    logger.debug("Training %d member ensemble (epsilon=%g)", size, epsilon)
    members = joblib.Parallel(n_jobs=jobs)(
        joblib.delayed(_train_member)(train, cfg, dims, epsilon, m) for m in range(size)
    )
    return Ensemble(tuple(members), epsilon)
