"""Swendsen-Wang and random-cluster dynamics on complete d-ary trees.

Exact transition matrices and spectra for small trees, seeded samplers for
larger ones, spatial-mixing certificates, and the experiments built on them.
"""
__version__ = "0.1.0"
