"""
gepbench
========

Generalization error prediction from sample-level scores, and benchmarks of
it under distribution shift, degraded training data and simplicity bias.

Submodules
==========

.. autosummary::
    :toctree: _autosummary

    config
    datagen
    fileformats
    gep
    harness
    misc
    nn
    plot
    profile
    rng
    scoring
"""

__version__ = "0.1.0"
