# -*- coding: utf-8 -*-
#
# fracstefan documentation build configuration file.
#
# This file is execfile()d with the current directory set to its containing dir.

from datetime import date

import sys
import os

sys.path.insert(0, os.path.abspath(".."))
import fracstefan

# -- General configuration -----------------------------------------------------

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.doctest",
    "sphinx.ext.mathjax",
    "sphinx_copybutton",
]

templates_path = ["_templates"]

source_suffix = ".rst"

master_doc = "index"

project = "fracstefan"
copyright = f"2026-{date.today().year}, fracstefan developers"

# The short X.Y version.
version = ".".join(fracstefan.__version__.split(".")[:2])
# The full version, including alpha/beta/rc tags.
release = fracstefan.__version__

exclude_trees = ["_build"]

pygments_style = "sphinx"

# Members in source order, like the modules read:
autodoc_member_order = "bysource"

# -- Options for HTML output ---------------------------------------------------

html_theme = "python_docs_theme"

html_title = "fracstefan"

html_static_path = []

html_show_sourcelink = False

htmlhelp_basename = "fracstefan"

# -- Options for LaTeX output --------------------------------------------------

latex_documents = [
    (
        "index",
        "fracstefan.tex",
        "fracstefan Documentation",
        "fracstefan developers",
        "manual",
    ),
]
