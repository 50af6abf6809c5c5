"""Monte Carlo laboratory for stochastic state reduction on symmetric Kaehler manifolds."""

__version__ = "0.1.0"
