"""On-disk formats.

GEPB1 binary matrices
=====================
A GEPB1 file holds one 2D array of 32-bit floats::

    offset  size  content
    0       5     magic b"GEPB1"
    5       1     dtype code, 0x01 = IEEE-754 float32 little-endian
    6       4     n_rows, unsigned 32-bit little-endian
    10      4     n_cols, unsigned 32-bit little-endian
    14      4*r*c payload, row-major
    end-4   4     CRC-32 of every preceding byte, unsigned 32-bit little-endian

The CRC is CRC-32/ISO-HDLC (reflected polynomial 0xEDB88320, initial value and
final xor 0xFFFFFFFF), as computed by :func:`zlib.crc32`. Values are rounded
to nearest-even when converting from 64 to 32 bits. A 1x1 file is 22 bytes.

Readers raise a subclass of :class:`FormatError` for every malformed input:
:class:`BadMagicError`, :class:`DtypeError`, :class:`TruncatedError` or
:class:`ChecksumError`.

Logits bundles
==============
Logits of externally trained models are exchanged as a JSON manifest next to
GEPB1 files, one ``n_samples x n_classes`` matrix per member::

    {
      "dataset": "cifar-like-test",
      "n_classes": 10,
      "members": ["member_0.gepb", "member_1.gepb"],
      "labels": "labels.gepb"
    }

Paths are relative to the manifest. `labels` is optional and holds an
``n_samples x 1`` matrix of class indices.

Models
======
A model is a JSON manifest (``layer_dims``, ``activation``, and the file names
of its ``weights`` and ``biases``) plus one GEPB1 file per parameter array,
biases stored as ``1 x d``. An ensemble manifest lists model manifests.

CSV
===
- datasets: header ``f0,...,f{d-1},label``
- scores: header ``sample_index,score``
- report records and summary: one column per field of
  :class:`~gepbench.harness.EvaluationRecord` and
  :class:`~gepbench.harness.SummaryCell`.
"""

import json
import logging
import os
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from . import misc, nn
from .datagen import LabeledDataset
from .harness import RunReport
from .scoring import (
    Ensemble,
    ScoreVector,
    conf_from_logits,
    ma_from_votes,
    majority_vote,
    votes_from_logits,
)


logger = logging.getLogger(__name__)

MAGIC = b"GEPB1"
DTYPE_FLOAT32 = 0x01

_HEADER = struct.Struct("<5sBII")
_CRC = struct.Struct("<I")


class FormatError(Exception):
    """A file does not follow its documented format."""

    def __init__(self, message, path=None):
        self.path = None if path is None else str(path)
        super().__init__(message if path is None else f"{message} ({path})")


class BadMagicError(FormatError):
    """The file does not start with the GEPB1 magic."""


class DtypeError(FormatError):
    """Unsupported dtype code."""


class TruncatedError(FormatError):
    """The file is shorter (or longer) than its header says."""


class ChecksumError(FormatError):
    """The CRC does not match the content."""


class BundleError(FormatError):
    """A logits manifest or one of its members is invalid.

    Attributes
    ----------
    member : int or None
        Index of the offending member, if any.
    """

    def __init__(self, message, path=None, member=None):
        self.member = member
        super().__init__(message, path)


def encode_matrix(m):
    """Serialise a 2D array to GEPB1 bytes.

    Raises
    ------
    ValueError
        If the array is not 2D, or not finite in 32 bits.
    """
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise nn.DimensionError("Only matrices can be stored", 2, arr.ndim)
    payload = arr.astype("<f4")
    if not np.all(np.isfinite(payload)):
        raise ValueError("Matrix has entries that are not finite as 32-bit floats.")
    body = _HEADER.pack(MAGIC, DTYPE_FLOAT32, arr.shape[0], arr.shape[1]) + payload.tobytes(
        order="C"
    )
    return body + _CRC.pack(zlib.crc32(body))


def decode_matrix(data, path=None):
    """Parse GEPB1 bytes.

    Parameters
    ----------
    data : bytes
    path : str, optional
        Used in error messages.

    Returns
    -------
    matrix : np.ndarray[n_rows, n_cols]
        64-bit copy of the stored values.

    Raises
    ------
    FormatError
        One of its subclasses, describing the first problem found.
    """
    data = bytes(data)
    if data[: len(MAGIC)] != MAGIC:
        if len(data) < len(MAGIC) and MAGIC.startswith(data):
            raise TruncatedError("File ends inside the magic", path)
        raise BadMagicError("Not a GEPB1 file", path)
    if len(data) < len(MAGIC) + 1:
        raise TruncatedError("File ends before the dtype code", path)
    if data[len(MAGIC)] != DTYPE_FLOAT32:
        raise DtypeError(f"Unsupported dtype code 0x{data[len(MAGIC)]:02x}", path)
    if len(data) < _HEADER.size:
        raise TruncatedError("File ends inside the header", path)

    _, _, rows, cols = _HEADER.unpack_from(data)
    expected = _HEADER.size + 4 * rows * cols + _CRC.size
    if len(data) < expected:
        raise TruncatedError(
            f"Expected {expected} bytes for a {rows}x{cols} matrix, found {len(data)}", path
        )
    if len(data) > expected:
        raise TruncatedError(
            f"{len(data) - expected} unexpected trailing bytes after a {rows}x{cols} matrix",
            path,
        )

    (crc,) = _CRC.unpack_from(data, expected - _CRC.size)
    if zlib.crc32(data[: expected - _CRC.size]) != crc:
        raise ChecksumError("Checksum mismatch", path)

    values = np.frombuffer(data, dtype="<f4", count=rows * cols, offset=_HEADER.size)
    values = values.astype(np.float64).reshape(rows, cols)
    if not np.all(np.isfinite(values)):
        raise FormatError("Matrix contains non-finite values", path)
    return values


def write_matrix(m, path):
    """Write a matrix as a GEPB1 file."""
    data = encode_matrix(m)
    with misc.lock_file(path) as tmp:
        with open(tmp, "wb") as fh:
            fh.write(data)


def read_matrix(path):
    """Read a GEPB1 file; see :func:`decode_matrix`."""
    with open(path, "rb") as fh:
        data = fh.read()
    return decode_matrix(data, path)


@dataclass(frozen=True, eq=False)
class LogitsBundle:
    """Logits of several models on the same samples.

    Attributes
    ----------
    logits : np.ndarray[M, n_samples, n_classes]
    n_classes : int
    dataset : str
    labels : np.ndarray[n_samples], optional
    """

    logits: np.ndarray
    n_classes: int
    dataset: str = ""
    labels: Optional[np.ndarray] = None

    @property
    def size(self):
        """Number of members ``M``."""
        return self.logits.shape[0]

    @property
    def n_samples(self):
        return self.logits.shape[1]

    def conf_scores(self, member=0):
        """Confidence scores of one member."""
        return ScoreVector(conf_from_logits(self.logits[member]), "conf")

    def ma_scores(self):
        """Model agreement scores of the whole bundle."""
        return ScoreVector(
            ma_from_votes(votes_from_logits(self.logits), self.n_classes),
            "ma",
            {"M": self.size},
        )

    def predictions(self, method="conf", member=0):
        """Predictions of the deployed predictor of a method."""
        votes = votes_from_logits(self.logits)
        if method == "conf":
            return votes[member]
        return majority_vote(votes, self.n_classes)


def ingest_logits(manifest_path):
    """Load a logits bundle from its manifest.

    Raises
    ------
    BundleError
        For a bad manifest, a missing or corrupt member file, members of
        different shapes, or a disagreement with ``n_classes``. Member
        problems name the member index.
    """
    manifest_path = Path(manifest_path)
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except OSError as e:
        raise BundleError(f"Cannot open manifest: {e.strerror}", manifest_path) from e
    except json.JSONDecodeError as e:
        raise BundleError(f"Manifest is not valid JSON: {e}", manifest_path) from e

    if not isinstance(manifest, dict) or not isinstance(manifest.get("members"), list):
        raise BundleError("Manifest needs a list of 'members'", manifest_path)
    if not manifest["members"]:
        raise BundleError("Manifest lists no members", manifest_path)

    base = manifest_path.parent
    matrices = []
    for ii, name in enumerate(manifest["members"]):
        if not isinstance(name, str) or not name:
            raise BundleError(
                f"Member {ii} must be a file name, got {name!r}", manifest_path, ii
            )
        try:
            m = read_matrix(base / name)
        except OSError as e:
            raise BundleError(
                f"Member {ii} ({name}) cannot be read: {e.strerror}", manifest_path, ii
            ) from e
        except FormatError as e:
            raise BundleError(f"Member {ii} ({name}) is invalid: {e}", manifest_path, ii) from e
        if matrices and m.shape != matrices[0].shape:
            raise BundleError(
                f"Member {ii} has shape {m.shape}, member 0 has {matrices[0].shape}",
                manifest_path,
                ii,
            )
        matrices.append(m)

    n_classes = manifest.get("n_classes", matrices[0].shape[1])
    if n_classes != matrices[0].shape[1]:
        raise BundleError(
            f"Manifest says {n_classes} classes but members have {matrices[0].shape[1]}",
            manifest_path,
        )

    labels = None
    if manifest.get("labels"):
        if not isinstance(manifest["labels"], str):
            raise BundleError("Labels must be a file name", manifest_path)
        try:
            raw = read_matrix(base / manifest["labels"])
        except (OSError, FormatError) as e:
            raise BundleError(f"Labels cannot be read: {e}", manifest_path) from e
        if raw.shape != (matrices[0].shape[0], 1) or np.any(raw % 1 != 0):
            raise BundleError("Labels must be an n_samples x 1 matrix of integers", manifest_path)
        labels = raw[:, 0].astype(np.intp)
        if labels.min() < 0 or labels.max() >= n_classes:
            raise BundleError(f"Labels outside [0, {n_classes})", manifest_path)

    logger.debug("Ingested %d members from %s", len(matrices), manifest_path)
    return LogitsBundle(np.stack(matrices), int(n_classes), str(manifest.get("dataset", "")), labels)


def write_logits_bundle(directory, logits, labels=None, dataset=""):
    """Write member logits and a manifest ``manifest.json`` into `directory`.

    Parameters
    ----------
    directory : path
    logits : sequence of np.ndarray[n_samples, n_classes]
    labels : np.ndarray[n_samples], optional
    dataset : str

    Returns
    -------
    manifest_path : Path
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for ii, m in enumerate(logits):
        names.append(f"member_{ii}.gepb")
        write_matrix(m, directory / names[-1])
    manifest = {
        "dataset": dataset,
        "n_classes": int(np.asarray(logits[0]).shape[1]),
        "members": names,
    }
    if labels is not None:
        write_matrix(np.asarray(labels, dtype=np.float64)[:, np.newaxis], directory / "labels.gepb")
        manifest["labels"] = "labels.gepb"
    return _write_text(directory / "manifest.json", misc.canonical_json(manifest))


def _write_text(path, text):
    path = Path(path)
    with misc.lock_file(path) as tmp:
        with open(tmp, "w", newline="\n") as fh:
            fh.write(text)
    return path


def write_dataset_csv(data, path):
    """Write a dataset as CSV with header ``f0,...,f{d-1},label``."""
    df = pd.DataFrame(data.features, columns=[f"f{i}" for i in range(data.n_features)])
    df["label"] = data.labels
    with misc.lock_file(path) as tmp:
        df.to_csv(tmp, index=False, lineterminator="\n")
    return Path(path)


def read_dataset_csv(path, n_classes=None, provenance=None):
    """Read a dataset CSV.

    Parameters
    ----------
    path : path
    n_classes : int, optional
        Defaults to one more than the largest label.
    provenance : str, optional
        Defaults to ``csv:<file name>``.

    Raises
    ------
    FormatError
        If the header does not follow the schema.
    """
    df = pd.read_csv(path, float_precision="round_trip")
    columns = list(df.columns)
    expected = [f"f{i}" for i in range(len(columns) - 1)] + ["label"]
    if columns != expected or len(columns) < 2:
        raise FormatError(f"Unexpected dataset CSV header {columns}", path)
    labels = df["label"].to_numpy()
    features = df[expected[:-1]].to_numpy(dtype=np.float64)
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    tag = provenance if provenance is not None else f"csv:{Path(path).name}"
    return LabeledDataset(features, labels, n_classes, tag)


def write_scores_csv(scores, path):
    """Write a ScoreVector as CSV with header ``sample_index,score``."""
    df = pd.DataFrame({"sample_index": np.arange(len(scores)), "score": scores.scores})
    with misc.lock_file(path) as tmp:
        df.to_csv(tmp, index=False, lineterminator="\n")
    return Path(path)


def read_scores_csv(path, method):
    """Read a score CSV back into a ScoreVector of the given method."""
    df = pd.read_csv(path, float_precision="round_trip")
    if list(df.columns) != ["sample_index", "score"]:
        raise FormatError(f"Unexpected score CSV header {list(df.columns)}", path)
    if not np.array_equal(df["sample_index"].to_numpy(), np.arange(len(df))):
        raise FormatError("Sample indices must run 0..n-1 in order", path)
    return ScoreVector(df["score"].to_numpy(dtype=np.float64), method)


def write_scores_matrix(scores, path):
    """Write a ScoreVector as an ``n x 1`` GEPB1 matrix."""
    write_matrix(scores.scores[:, np.newaxis], path)
    return Path(path)


def write_report(report, directory):
    """Write a report as ``report.json``, ``records.csv`` and ``summary.csv``.

    Parameters
    ----------
    report : RunReport
    directory : path

    Returns
    -------
    paths : list of Path
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    paths = [_write_text(directory / "report.json", report.to_json())]

    records = pd.DataFrame([r.to_dict() for r in report.records])
    summary = pd.DataFrame([c.to_dict() for c in report.summary])
    for name, df in (("records.csv", records), ("summary.csv", summary)):
        with misc.lock_file(directory / name) as tmp:
            df.to_csv(tmp, index=False, lineterminator="\n")
        paths.append(directory / name)
    return paths


def read_report(path):
    """Load a ``report.json``.

    Raises
    ------
    FormatError
        If the file is not a valid report.
    """
    try:
        with open(path) as fh:
            d = json.load(fh)
        return RunReport.from_dict(d)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise FormatError(f"Not a valid report: {e}", path) from e


def save_model(model, path):
    """Save a model as a JSON manifest plus GEPB1 parameter files.

    Parameter files are written next to the manifest, named after its stem.

    Returns
    -------
    path : Path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    stem = path.stem
    weights, biases = [], []
    for ii, (w, b) in enumerate(zip(model.weights, model.biases)):
        weights.append(f"{stem}.w{ii}.gepb")
        biases.append(f"{stem}.b{ii}.gepb")
        write_matrix(w, path.parent / weights[-1])
        write_matrix(b[np.newaxis, :], path.parent / biases[-1])
    manifest = {
        "layer_dims": list(model.layer_dims),
        "activation": model.activation,
        "weights": weights,
        "biases": biases,
    }
    return _write_text(path, misc.canonical_json(manifest))


def load_model(path):
    """Load a model saved by :func:`save_model` (parameters at 32-bit precision)."""
    path = Path(path)
    try:
        with open(path) as fh:
            manifest = json.load(fh)
        weights = tuple(read_matrix(path.parent / n) for n in manifest["weights"])
        biases = tuple(read_matrix(path.parent / n)[0] for n in manifest["biases"])
        return nn.MlpModel(manifest["layer_dims"], weights, biases, manifest["activation"])
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise FormatError(f"Not a valid model manifest: {e}", path) from e


def save_ensemble(ensemble, path):
    """Save an ensemble as a manifest listing one model manifest per member."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    members = []
    for ii, m in enumerate(ensemble.members):
        members.append(f"{path.stem}.m{ii}.json")
        save_model(m, path.parent / members[-1])
    manifest = {"diversity_noise": ensemble.diversity_noise, "members": members}
    return _write_text(path, misc.canonical_json(manifest))


def load_ensemble(path):
    """Load an ensemble saved by :func:`save_ensemble`."""
    path = Path(path)
    try:
        with open(path) as fh:
            manifest = json.load(fh)
        members = tuple(load_model(path.parent / n) for n in manifest["members"])
        return Ensemble(members, float(manifest["diversity_noise"]))
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise FormatError(f"Not a valid ensemble manifest: {e}", path) from e


def is_ensemble_manifest(path):
    """Whether a JSON manifest describes an ensemble rather than a single model."""
    with open(path) as fh:
        return "members" in json.load(fh)


def relative_paths(paths, root):
    """Paths relative to `root` as sorted POSIX strings."""
    root = Path(root).resolve()
    return sorted(Path(os.path.abspath(p)).resolve().relative_to(root).as_posix() for p in paths)
