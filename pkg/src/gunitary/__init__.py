"""Numerical toolkit for geometric unitaries in operator spaces.

Submodules: ``matcore`` (linear algebra), ``sdp`` (Hermitian SDPs),
``opspace`` (concrete operator and normed spaces), ``cbmap`` (Choi matrices,
cb norms, unital complete contractions), ``gamma`` (the seminorms γ_k^u and
n_cb), ``banach`` (level-1 analogues), ``ossys`` (matrix cones and operator
systems), ``mideal`` (complete M-summands and quotients).
"""

__version__ = "0.1.0"
