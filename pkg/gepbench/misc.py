"""Small helpers shared by the artifact writers: atomic files, canonical JSON, rounding."""

import hashlib
import json
import os

import numpy as np


def round_half_away(x):
    """Round to the nearest integer, halves going away from zero.

    This is the single rounding rule used wherever a count is derived from a
    fraction (``round(p * n)``). Python's :func:`round` and :func:`numpy.round`
    both round halves to even, which would give ``round(0.5 * 5) == 2``.

    Parameters
    ----------
    x : float

    Returns
    -------
    n : int

    Examples
    --------
    >>> round_half_away(2.5), round_half_away(-2.5), round_half_away(2.4)
    (3, -3, 2)
    """
    return int(np.sign(x) * np.floor(np.abs(x) + 0.5))


def canonical_json(obj):
    """Serialise to JSON with sorted keys and fixed separators.

    Semantically equal objects give identical strings. Floats use Python's
    shortest round-trip representation.

    Parameters
    ----------
    obj : object
        JSON-compatible data (dicts, lists, str, int, float, bool, None).

    Returns
    -------
    text : str
        Ends in a newline.
    """
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


def config_hash(config):
    """SHA-256 hex digest of the canonical JSON form of a config dictionary."""
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


class lock_file:
    """Manage a lock file around a file creation operation.

    The file is written under a hidden temporary name and only moved to its
    final name when the block exits cleanly, so a half-written output never
    appears under the final name.

    Parameters
    ----------
    name : str
        Final name for the file.
    preserve : bool, optional
        Keep the temporary file in the event of failure.

    Returns
    -------
    tmp_name : str
        File name to use in the locked block.

    Examples
    --------
    >>> with lock_file('report.json') as fname:  # doctest: +SKIP
    ...     with open(fname, 'w') as fh:
    ...         fh.write('{}')
    ...
    """

    def __init__(self, name, preserve=False):
        self.name = os.fspath(name)
        self.preserve = preserve

    def __enter__(self):

        with open(self.lockfile, "w+") as fh:
            fh.write("")

        return self.tmpfile

    def __exit__(self, exc_type, exc_val, exc_tb):

        # Failed block: drop the partial file unless asked to keep it
        if exc_type is not None:
            if not self.preserve and os.path.exists(self.tmpfile):
                os.remove(self.tmpfile)
        else:
            os.replace(self.tmpfile, self.name)

        os.remove(self.lockfile)

        return False

    @property
    def tmpfile(self):
        """Full path to the temporary file."""
        base, fname = os.path.split(self.name)
        return os.path.join(base, "." + fname)

    @property
    def lockfile(self):
        """Full path to the lockfile (with file extension)."""
        return self.tmpfile + ".lock"
