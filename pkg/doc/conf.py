# -*- coding: utf-8 -*-
#
# gepbench documentation build configuration file.
#
# This file is execfile()d with the current directory set to its containing dir.
#
# All configuration values have a default; values that are commented out
# serve to show the default.

import os
import sys

# If extensions (or modules to document with autodoc) are in another directory,
# add these directories to sys.path here.
sys.path.insert(0, os.path.abspath("../"))

import gepbench

# -- General configuration -----------------------------------------------------

# 'numpydoc' does not ship with sphinx, napoleon reads the numpy style.
extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.autosummary",
    "sphinx.ext.intersphinx",
    "sphinx.ext.mathjax",
    "sphinx.ext.viewcode",
    "sphinx.ext.napoleon",
    "sphinx.ext.autosectionlabel",
]

napoleon_google_docstring = False
napoleon_numpy_docstring = True
napoleon_include_init_with_doc = False
napoleon_include_private_with_doc = False
napoleon_include_special_with_doc = False
napoleon_use_admonition_for_examples = False
napoleon_use_admonition_for_notes = False
napoleon_use_admonition_for_references = False
napoleon_use_ivar = False
napoleon_use_param = True
napoleon_use_rtype = True
napoleon_type_aliases = None
napoleon_attr_annotations = True

autoclass_content = "both"  # include both class docstring and __init__
autodoc_default_options = {
    # Make sure that any autodoc declarations show the right members
    "members": True,
    "show-inheritance": True,
}
autosummary_generate = True  # Make _autosummary files and include them
autosummary_imported_members = False

intersphinx_mapping = {
    "numpy": ("https://numpy.org/doc/stable/", None),
    "python": ("https://docs.python.org/3", None),
}
intersphinx_cache_limit = 1

source_suffix = ".rst"
master_doc = "index"

project = "gepbench"
copyright = "2026, the gepbench developers"

version = gepbench.__version__
release = gepbench.__version__

exclude_patterns = ["_build"]
pygments_style = "sphinx"

# -- Options for HTML output ---------------------------------------------------

html_theme = "sphinx_rtd_theme"
htmlhelp_basename = "gepbenchdoc"

# -- Options for manual page output --------------------------------------------

man_pages = [("index", "gepbench", "gepbench Documentation", ["the gepbench developers"], 1)]
