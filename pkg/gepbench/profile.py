"""Timing and resource usage of benchmark runs.

Two tools live here. :class:`Profiler` wraps a whole CLI invocation in a call
profiler and drops its output next to the run artifacts. :class:`PSUtilProfiler`
measures one block (a benchmark seed, typically) and hands back a usage
dictionary, which :func:`timing_frame` turns into the rows of ``timing.csv``.
"""

import time
from pathlib import Path

import numpy as np
import pandas as pd
import psutil


class Profiler:
    """Run a block under cProfile or pyinstrument.

    Parameters
    ----------
    profile : bool
        Do nothing if False.
    profiler : {"cprofile", "pyinstrument"}
        The call profiler. cProfile output goes to ``profile.prof`` and
        pyinstrument output to ``profile.txt``.
    path : path-like, optional
        Directory receiving the output, the working directory by default.
    """

    outputs = {"cprofile": "profile.prof", "pyinstrument": "profile.txt"}

    def __init__(self, profile=True, profiler="cprofile", path=None):
        if profiler not in self.outputs:
            raise ValueError(
                f"Unknown profiler {profiler!r}, expected one of {sorted(self.outputs)}."
            )

        self.profile = profile
        self.profiler = profiler
        self.path = Path.cwd() if path is None else Path(path)
        self._pr = None

    @property
    def output(self):
        """Where the profile is written."""
        return self.path / self.outputs[self.profiler]

    def __enter__(self):
        if not self.profile:
            return self

        if self.profiler == "cprofile":
            import cProfile

            self._pr = cProfile.Profile()
            self._pr.enable()
        else:
            import pyinstrument

            self._pr = pyinstrument.Profiler()
            self._pr.start()

        return self

    def __exit__(self, *args):
        if self._pr is None:
            return

        self.path.mkdir(parents=True, exist_ok=True)
        if self.profiler == "cprofile":
            self._pr.disable()
            self._pr.dump_stats(str(self.output))
        else:
            self._pr.stop()
            self.output.write_text(self._pr.output_text(unicode=True))
        self._pr = None


class PSUtilProfiler:
    """Measure wall time, CPU time and memory of the current process over a block.

    Bind the profiler to a name before the ``with`` statement to read the usage
    afterwards.

    >>> prof = PSUtilProfiler(label="seed 0")
    >>> with prof:
    ...     _ = sum(range(10))
    >>> sorted(prof.usage)  #doctest: +NORMALIZE_WHITESPACE
    ['available_memory', 'cpu_percent', 'cpu_times', 'memory', 'task_name',
     'time_s']

    Parameters
    ----------
    use_profiler : bool
        If False the block runs unmeasured and `usage` stays empty.
    label : str
        Name of the block, reported as ``task_name``.
    logger : logging.Logger, optional
        Receives a one-line INFO summary when the block ends.
    """

    def __init__(self, use_profiler=True, label="", logger=None):
        self.use_profiler = use_profiler
        self.label = label
        self.logger = logger

        self._process = psutil.Process()
        self._start = None
        self._usage = {}

    def __enter__(self):
        if self.use_profiler:
            self.start()
        return self

    def __exit__(self, *args):
        if self.use_profiler:
            self.stop()

    def start(self):
        """Take the reference measurement."""
        with self._process.oneshot():
            cpu = self._process.cpu_times()
            # Primes the counter so `stop` reports the load since now
            self._process.cpu_percent()
            rss = self._process.memory_info().rss
        self._start = (time.perf_counter(), np.array(cpu[:2]), rss)

    def stop(self):
        """Record the usage since `start`.

        The usage dictionary holds

        task_name : str
        time_s : float
            Wall-clock seconds.
        cpu_times : dict
            ``user`` and ``system`` CPU seconds.
        cpu_percent : float
            Mean load over the block, above 100 when several cores were busy.
        memory : int
            Change of the resident set size in bytes.
        available_memory : int
            System memory available at the end, in bytes.

        Raises
        ------
        RuntimeError
            If `start` was never called.
        """
        end = time.perf_counter()
        if self._start is None:
            raise RuntimeError("PSUtilProfiler.stop was called before start.")
        t0, cpu0, rss0 = self._start

        with self._process.oneshot():
            user, system = np.array(self._process.cpu_times()[:2]) - cpu0
            load = self._process.cpu_percent()
            rss = self._process.memory_info().rss

        self._usage = {
            "task_name": self.label,
            "time_s": end - t0,
            "cpu_times": {"user": float(user), "system": float(system)},
            "cpu_percent": load,
            "memory": rss - rss0,
            "available_memory": psutil.virtual_memory().available,
        }

        if self.logger is not None:
            self.logger.info(
                "%s ran for %.3fs (cpu %.2fs user, %.2fs system, load %.0f%%, rss %s)",
                self.label,
                end - t0,
                user,
                system,
                load,
                bytes2human(rss - rss0),
            )

    @property
    def usage(self):
        """A copy of the last recorded usage."""
        return dict(self._usage)


def timing_frame(timing):
    """Tabulate per-seed usage dictionaries.

    Parameters
    ----------
    timing : dict
        Usage dictionaries keyed by the seed index as a string, the form
        kept on a run report.

    Returns
    -------
    frame : pandas.DataFrame
        One row per seed in index order, led by a ``seed_index`` column.
        Nested entries such as ``cpu_times`` become ``cpu_times_user`` and
        ``cpu_times_system``.
    """
    rows = [
        {"seed_index": int(index), **usage}
        for index, usage in sorted(timing.items(), key=lambda kv: int(kv[0]))
    ]
    return pd.json_normalize(rows, sep="_")


def bytes2human(num):
    """Format a byte count with binary prefixes, e.g. ``1.5KiB``."""
    for unit in ["", "Ki", "Mi", "Gi", "Ti", "Pi", "Ei", "Zi"]:
        if abs(num) < 1024.0:
            return f"{num:3.1f}{unit}B"
        num /= 1024.0
    return f"{num:.1f}YiB"
