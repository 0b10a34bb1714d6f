"""
Application Package.

Symbolic decision trees: piecewise symbolic models whose splits and leaves
are sparse combinations of basis functions, learned by exact MILP.
"""
