import math


class NumericConstants:
    SQRT2 = math.sqrt(2.0)
    # modulus of the rectangular elastica
    Q_RECT = 1.0 / math.sqrt(2.0)
    EPS = 2.220446049250313e-16

    # grids
    MIN_DERIVATIVE_NODES = 4
    MIN_LENGTH_NODES = 2
    MIN_CURVATURE_NODES = 6
    MIN_PROBE_NODES = 16
    MIN_STATIONARY_NODES = 16
    PIN_TOL = 1e-12
    ROUNDOFF_FACTOR = 256.0

    # inner solver
    ARMIJO_SIGMA = 1e-4
    ARMIJO_SLACK = 8.0
    BB_STEP_MIN = 1e-10
    BB_STEP_MAX = 1e10
    MAX_BACKTRACKS = 60
    NONMONOTONE_MEMORY = 10
    # an inner solve that stops improving within STALL_RATIO of the rounding level has converged
    STALL_RATIO = 8.0
    STALL_WINDOW = 10

    # diagnostics
    COMPLEMENTARITY_GAP = 1e-6
    COMPLEMENTARITY_RATIO = 1e-8
    MONOTONE_TOL = 1e-10
    LEDGER_TOL = 1e-8
    DISSIPATION_TOL = 1e-10
    VI_SLACK = 10.0
    PROBE_RATIO = 10.0
    PROBE_CONTRAST = 10.0
    PROBE_REACH = 8
    BUMP_COUNT = 8

    # elastica
    CLAMPED_SCAN_MAX = 50.0
    CLAMPED_SCAN_POINTS = 501
    SHOOTING_SAMPLES = 2049
    PROFILE_OVERSAMPLING = 32
