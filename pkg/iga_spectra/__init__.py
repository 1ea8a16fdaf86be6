"""
Spectral laboratory for isogeometric least-squares collocation (IGA-L)
of the Poisson problem on fixed NURBS benchmark domains
"""

__version__ = "0.1.0"
