"""
Transformation-optics cloaking toolkit.

Designs singular and approximate cloaks, solves their separated radial
problems, and traces rays through the resulting metrics.
"""

__version__ = "1.0.0"
