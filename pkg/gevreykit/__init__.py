"""
gevreykit - Formal Gevrey index tool for nonlinear totally characteristic equations

Computes Newton polygons, the conditions (N), (GP) and (R), the indices
(s0, sigma0) and s1, exact formal solutions, and empirical Gevrey fits.
"""

__version__ = "0.1.0"
__author__ = "grigsbyanthony"
