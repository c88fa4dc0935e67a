"""
Part of momclust. Distributed under the terms of the MIT License, see LICENSE.
"""

"""
Static values used by momclust.
"""

# Environment variable selecting the log level: quiet | info | trace
LOG_ENV_VAR = 'MOMENT_CLUSTER_LOG'
LOG_LEVEL_DEFAULT = 'quiet'

# Geometry
GEOMETRY_TOL = 1e-9
ARC_SAMPLES = 1000
CYLINDER_Z_MAX = 0.3
TRIANGLE_BULGE = 0.2

# Linear algebra
PINV_RCOND = 1e-10

# Interior-point solver defaults
SOLVER_MAX_ITERATIONS = 200
SOLVER_GAP_TOL = 1e-7
SOLVER_FEAS_TOL = 1e-7
SOLVER_STEP_FRACTION = 0.98
SOLVER_MIN_STEP = 1e-10
SOLVER_REGULARIZATION = 1e-12
SOLVER_MAX_NONMONOTONE = 5
SOLVER_SIGMA_FLOOR = 0.1
SOLVER_SIGMA_LAGGING = 0.5
SOLVER_INFEAS_TOL = 1e-6
PRESOLVE_RANK_TOL = 1e-10
PRESOLVE_DENSE_LIMIT = 3000

# Relaxations
ORDER_DNN = 'dnn'
ORDER_PSD = 'psd'
RELAXATION_R2P1 = 'r2p1'
RELAXATION_R2PP1 = 'r2pp1'
R2P1_MAX_VERTICES = 24

# Brute-force oracle caps
ORACLE_MAX_PARTITIONS = 10**7
ORACLE_MAX_SUBSETS = 10**6

# Synthetic generators
GEN_MIN_SEPARATION = 0.8
GEN_SPREAD = 0.1
GEN_NOISE = 0.05
GEN_MAX_DRAWS = 10000

# Report tolerances
RECOVERY_TOL = 1e-6

# CLI exit codes
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_MAX_ITERATIONS = 3
EXIT_REFUSED = 4
