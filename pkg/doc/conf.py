#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# robust-replay documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.
#
# All configuration values have a default; values that are commented out
# serve to show the default.

import sys, os, re

# The package is imported from the source tree.
sys.path.insert(0, os.path.abspath('..'))

# -- General configuration ------------------------------------------------

needs_sphinx = '1.6'

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.autosummary',
    'sphinx.ext.todo',
    'sphinx.ext.mathjax',
    'sphinx.ext.napoleon',
    'sphinx.ext.inheritance_diagram',
    "sphinx.ext.intersphinx",
    'sphinx.ext.viewcode',
    "sphinx_automodapi.automodapi",
]

autosummary_generate = True
autosummary_imported_members = False
automodapi_toctreedirnm = "code/api"
automodsumm_inherited_members = True

source_suffix = '.rst'

# The master toctree document.
master_doc = 'index'

# General information about the project.
project = 'robust-replay'
copyright = "Copyright 2026, The robust-replay Authors"
author = 'The robust-replay Authors'

# only the version module is imported, so building the docs needs no SciPy
from robust_replay._version import __version__
# The full version, including alpha/beta/rc tags.
release = __version__

# The short X.Y version.
version = re.match(r'^(\d+\.\d+)', release).expand(r'\1')

language = "en"

today_fmt = '%Y-%m-%d'

exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']

pygments_style = 'sphinx'

todo_include_todos = False

intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable/", None),
    "scipy": ("https://docs.scipy.org/doc/scipy/", None),
}


# -- Options for HTML output ----------------------------------------------

html_theme = 'alabaster'

html_theme_options = {
    "description": "Noise-robust episodic memory for online continual learning",
    "fixed_sidebar": True,
}

# Output file base name for HTML help builder.
htmlhelp_basename = 'RobustReplaydoc'


# -- Options for LaTeX output ---------------------------------------------

latex_elements = {}

latex_documents = [
    (master_doc, 'robust-replay.tex', 'robust-replay Documentation', author, 'manual'),
]


# -- Options for manual page output ---------------------------------------

man_pages = [
    (master_doc, 'robust-replay', 'robust-replay Documentation', [author], 1)
]


#============================================================

# the order in which autodoc lists the documented members
autodoc_member_order = 'bysource'

# inheritance_diagram graphviz attributes
inheritance_node_attrs = dict(color="lightskyblue1", fillcolor="lightskyblue1", style="filled")
