# -*- coding: utf-8 -*-
#
# adm-forecast documentation build configuration file.
#
# Only the settings this project changes are listed; see
# sphinx-doc.org for the rest.

import os
import sys

# Make ``src`` importable for autodoc.
sys.path.insert(0, os.path.abspath('..'))

# -- General configuration -----------------------------------------------------

extensions = ['sphinx.ext.autodoc', 'sphinx.ext.viewcode']
autodoc_mock_imports = ['matplotlib']
autodoc_member_order = 'bysource'

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'adm-forecast'
version = '0.1'
release = '0.1'

exclude_patterns = ['_build']
pygments_style = 'sphinx'

# -- Options for HTML output ---------------------------------------------------

html_theme = 'default'
html_static_path = ['_static']
htmlhelp_basename = 'adm-forecastdoc'

# -- Options for LaTeX and manual page output ----------------------------------

latex_documents = [
    ('index', 'adm-forecast.tex', u'adm-forecast Documentation',
     u'Galen Cuthbertson', 'manual'),
]

man_pages = [
    ('index', 'adm-forecast', u'adm-forecast Documentation',
     [u'Galen Cuthbertson'], 1)
]
