"""Two-dimensional scalar inverse scattering with the H02 and Y0 field models.

Submodules are imported on demand so that the command-line entry point can
configure BLAS threading before numpy is loaded.
"""

__version__ = "0.1.0"
