"""Lower bounds on the neighbor count needed for k-NN network connectivity.

Trap geometry, exact bound evaluation, the (a, L) search, and seeded
Monte Carlo checks of the k-filling and connectivity claims.
"""

__version__ = "0.1.0"
