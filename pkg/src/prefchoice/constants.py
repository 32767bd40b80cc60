"""Numerical and statistical constants used across the package.

Everything a threshold-sensitive result depends on lives here so that run
metadata can record the exact values in force.
"""

# Phase classification: |alpha - alpha_c| below this counts as critical.
PHASE_TOLERANCE = 1e-9

# Bisection interval width for psi roots and density-derivative roots.
BISECTION_TOLERANCE = 1e-12

# Maximum admissible |F1(psi)| residual reported by the psi solver.
PSI_RESIDUAL_TOLERANCE = 1e-10

# Grid used to bracket roots of the density derivative before refinement.
CRITICAL_GRID_POINTS = 4096

# Relative tolerance for treating two density values as the same maximum.
MAXIMIZER_VALUE_TOLERANCE = 1e-9

# Weight index total may drift from the closed-form total by at most this
# much before the index is rebuilt from the degrees.
WEIGHT_DRIFT_TOLERANCE = 1e-6

# Default Simpson panel count for the integrated tail mass.
DEFAULT_PANELS = 512

# Chi-square p-value floor for the sampling-law oracles.
CHI_SQUARE_P_MIN = 1e-3

# Sandwich tests allow this many binomial standard errors of slack.
SANDWICH_SE_FACTOR = 3.0

# Power-law fit defaults: lowest k used, and the minimum number of vertices
# of degree >= k for k to stay in the automatic fit range.
DEFAULT_FIT_K_MIN = 10
FIT_MIN_TAIL_COUNT = 100
MIN_FIT_POINTS = 5

# Location-histogram default resolution.
DEFAULT_BINS = 50

# Seeded generator used by the growth engine.
RNG_NAME = "mt19937"


def as_dict() -> dict:
    """Snapshot of every constant, for embedding in output metadata."""
    return {
        k: v
        for k, v in globals().items()
        if k.isupper() and isinstance(v, (int, float, str))
    }
