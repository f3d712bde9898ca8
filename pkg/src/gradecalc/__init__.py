"""Desk-scale numerics on graded nilpotent Lie groups.

Subpackages: exact group law (algebra), grids and convolution (geometry),
left-invariant operators (calculus), heat semigroups (heatflow), Riesz and
Bessel kernels (potentials), Sobolev norms and probes (sobolev), and the
command-line verification suite (cli).
"""

__version__ = "0.1.0"
