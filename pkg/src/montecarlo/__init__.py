"""
Monte Carlo at scale: packed lattice states, the monotone grand coupling and empirical experiments.
"""
