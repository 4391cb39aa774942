import os
import re

from setuptools import setup, find_packages


# Don't install requirements if on ReadTheDocs build system.
on_rtd = os.environ.get("READTHEDOCS", None) == "True"
if on_rtd:
    requires = []
else:
    # Load the PEP508 formatted requirements from the requirements.txt file. Needs
    # pip version > 19.0
    with open("requirements.txt", "r") as fh:
        requires = fh.readlines()


with open(os.path.join("gepbench", "__init__.py"), "r") as fh:
    version = re.search(r'^__version__ = "([^"]+)"', fh.read(), re.M).group(1)


setup(
    name="gepbench",
    version=version,
    packages=find_packages(),
    entry_points="""
        [console_scripts]
        gepbench=gepbench.scripts.runner:main
    """,
    python_requires=">=3.8",
    install_requires=requires,
    extras_require={
        "profiling": ["pyinstrument"],
        "test": ["pytest"],
    },
    description="Benchmarks for predicting the accuracy of classifiers on shifted data.",
    license="GPL v3.0",
)
