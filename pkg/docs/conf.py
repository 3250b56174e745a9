#!/usr/bin/env python
#
# fieldroad documentation build configuration file.
#
import os
import sys

sys.path.insert(0, os.path.abspath("../src"))

import fieldroad

# -- General configuration ---------------------------------------------

extensions = ["sphinx.ext.autodoc", "sphinx.ext.napoleon", "sphinx.ext.viewcode"]
templates_path = ["_templates"]
source_suffix = ".rst"
master_doc = "index"

project = "fieldroad"
copyright = "2024, ACCESS-NRI"
author = "ACCESS-NRI & Contributors"

version = fieldroad.__version__
release = fieldroad.__version__

language = "en"
exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]
pygments_style = "sphinx"
todo_include_todos = False

# Numpy-style docstrings throughout the package
napoleon_google_docstring = False
napoleon_numpy_docstring = True

# -- Options for HTML output -------------------------------------------

html_theme = "alabaster"
html_static_path = ["_static"]
htmlhelp_basename = "fieldroaddoc"

# -- Options for manual page output ------------------------------------

man_pages = [
    (master_doc, "fieldroad", "fieldroad Documentation", [author], 1),
]
