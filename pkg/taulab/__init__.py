"""
taulab - tau-functions and Fredholm determinants through linear-system realizations.

Every closed-form expansion shipped here (determinant series, partition series,
elliptic expansions, Cauchy/Toeplitz identities) is paired with an independent
quadrature oracle and exercised by the ``check`` suites.
"""

__version__ = "1.0.0"
