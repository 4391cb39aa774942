"""Thresholding generalization error predictor.

A sample counts as predicted-correct when its score is at least ``tau``; the
predicted accuracy of a dataset is the fraction of such samples. ``tau`` is
calibrated on validation data so that this fraction matches the validation
accuracy as closely as possible.

Calibration is exact. The count ``#{i : s_i >= tau}`` only changes at score
values, so it suffices to try the distinct scores plus one value above the
maximum (``max + 1``, counting nothing). Of all candidates reaching the
minimal error the smallest is returned.

- :py:meth:`calibrate_threshold`
- :py:meth:`predict_accuracy`
- :py:meth:`true_accuracy`
- :py:meth:`mae`
- :py:meth:`evaluate`
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .scoring import ScoreVector


logger = logging.getLogger(__name__)


class CalibrationError(ValueError):
    """Scores or labels unusable for calibration or evaluation."""


@dataclass(frozen=True)
class CalibrationInput:
    """Validation scores together with the measured validation accuracy."""

    val_scores: ScoreVector
    val_accuracy: float

    def __post_init__(self):
        if not 0.0 <= self.val_accuracy <= 1.0:
            raise CalibrationError(f"Validation accuracy {self.val_accuracy} outside [0, 1].")


@dataclass(frozen=True)
class Threshold:
    """A calibrated threshold.

    Attributes
    ----------
    tau : float
    achieved_val_error : float
        ``|acc_val - predicted_val_accuracy|`` at `tau`.
    n_val : int
        Number of validation samples used.
    """

    tau: float
    achieved_val_error: float
    n_val: int = 0


@dataclass(frozen=True)
class GepEstimate:
    """A predicted accuracy for one target dataset."""

    predicted_accuracy: float
    tau: float
    method: str = ""
    target: str = ""
    meta: dict = field(default_factory=dict, compare=False)


def _score_array(scores):
    values = scores.scores if isinstance(scores, ScoreVector) else np.asarray(scores)
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise CalibrationError("Cannot work with an empty score vector.")
    return values


def calibrate_threshold(cal):
    """Find the threshold best reproducing the validation accuracy.

    Parameters
    ----------
    cal : CalibrationInput

    Returns
    -------
    threshold : Threshold
        The smallest candidate ``tau`` minimising
        ``|acc_val - #{i : s_i >= tau} / n|``.

    Raises
    ------
    CalibrationError
        If there are no scores.
    """
    scores = _score_array(cal.val_scores)
    n = scores.size

    candidates = np.append(np.unique(scores), scores.max() + 1.0)
    # Number of scores >= each candidate
    counts = n - np.searchsorted(np.sort(scores), candidates, side="left")

    # Compare on the count scale to avoid dividing
    err = np.abs(cal.val_accuracy * n - counts)
    best = int(np.argmin(err))

    threshold = Threshold(float(candidates[best]), float(err[best] / n), n)
    logger.debug(
        "Calibrated tau=%.6g on %d samples (error %.3g)", threshold.tau, n, threshold.achieved_val_error
    )
    return threshold


def predict_accuracy(scores, threshold, method="", target=""):
    """Fraction of samples whose score is at least ``tau``.

    Parameters
    ----------
    scores : ScoreVector or array_like
    threshold : Threshold or float
    method, target : str, optional
        Tags stored on the estimate.

    Returns
    -------
    estimate : GepEstimate
    """
    values = _score_array(scores)
    tau = threshold.tau if isinstance(threshold, Threshold) else float(threshold)
    if not method and isinstance(scores, ScoreVector):
        method = scores.method
    predicted = np.count_nonzero(values >= tau) / values.size
    return GepEstimate(float(predicted), tau, method, target)


def true_accuracy(predictions, labels):
    """Fraction of positions where the prediction equals the label.

    Raises
    ------
    CalibrationError
        If the vectors are empty or of different length.
    """
    predictions = np.asarray(predictions).ravel()
    labels = np.asarray(labels).ravel()
    if predictions.size != labels.size:
        raise CalibrationError(
            f"{predictions.size} predictions but {labels.size} labels."
        )
    if predictions.size == 0:
        raise CalibrationError("Cannot compute the accuracy of nothing.")
    return float(np.count_nonzero(predictions == labels) / labels.size)


def mae(estimates, truths):
    """Mean absolute error between predicted and true accuracies.

    Parameters
    ----------
    estimates : list of GepEstimate or float
    truths : list of float

    Returns
    -------
    mae : float
    """
    predicted = np.array(
        [e.predicted_accuracy if isinstance(e, GepEstimate) else e for e in estimates],
        dtype=np.float64,
    )
    truths = np.asarray(truths, dtype=np.float64)
    if predicted.shape != truths.shape:
        raise CalibrationError(f"{predicted.size} estimates but {truths.size} truths.")
    if predicted.size == 0:
        raise CalibrationError("Cannot average over no estimates.")
    return float(np.mean(np.abs(predicted - truths)))


def evaluate(scores, threshold, truth, method="", target=""):
    """Predict an accuracy and compare it with the true one.

    Returns
    -------
    estimate : GepEstimate
    abs_error : float
    """
    estimate = predict_accuracy(scores, threshold, method, target)
    return estimate, abs(estimate.predicted_accuracy - truth)
