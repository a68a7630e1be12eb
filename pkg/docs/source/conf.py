# -*- coding: utf-8 -*-
#
# Configuration file for the Sphinx documentation builder.
#
# http://www.sphinx-doc.org/en/master/config

import os
import sys
sys.path.insert(0, os.path.abspath('../..'))

project = 'tailcore'
copyright = '2020, the tailcore developers'
author = 'the tailcore developers'

version = '0.1'
release = '0.1.0'

master_doc = 'index'

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.autosectionlabel',
    "sphinx_rtd_theme",
    'sphinx.ext.napoleon'
]

autodoc_mock_imports = ['numpy', 'np', 'pandas', 'pd', 'scipy']

autoclass_content = "both"

autodoc_default_options = {
    'members': True,
    'member-order': 'bysource',
}

source_suffix = '.rst'

exclude_patterns = []

pygments_style = None

html_theme = "sphinx_rtd_theme"

htmlhelp_basename = 'tailcoredoc'

latex_documents = [
    (master_doc, 'tailcore.tex', 'tailcore Documentation', author, 'manual'),
]

man_pages = [
    (master_doc, 'tailcore', 'tailcore Documentation', [author], 1)
]
