"""Global numeric tolerances.

``CIRCLEPATTERN_TOL`` in the environment overrides the relative tolerance
used for algebraic identities.
"""

import os

RTOL = float(os.environ.get("CIRCLEPATTERN_TOL", "1e-10"))

# |Arg cr| below this counts as a cocircular (zero-angle) edge
ARG_ZERO_TOL = 1e-8

# singular values below RANK_RTOL * s_max count as zero
RANK_RTOL = 1e-8

# minimal acceptable ratio between the last nonzero and first zero singular value
GAP_RATIO_MIN = 10.0

# |tr^2 - 4| below this makes a holonomy element parabolic (or the identity)
PARABOLIC_TOL = 1e-10

# |h_1|, |h_2| below this selects the Euclidean branch of the modulus
EUCLIDEAN_TOL = 1e-9

# default bound on the length of enumerated dual cycles
DUAL_CYCLE_BOUND = 12
