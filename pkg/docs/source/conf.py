# Sphinx configuration for the pclan documentation.
import os
import sys
sys.path.insert(0, os.path.abspath('../..'))

project = 'pclan'
copyright = '2026, pclan developers'
author = 'pclan developers'
release = '0.1.0'

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.napoleon',
    'sphinx.ext.mathjax',
    'autodocsumm',
]
autodoc_default_options = {'member-order': 'bysource'}

templates_path = ['_templates']
exclude_patterns = []

html_theme = 'sphinx_rtd_theme'
html_static_path = ['_static']
