class AppConstants:
    # run artifacts
    LEDGER_FILE = 'ledger.csv'
    MANIFEST_FILE = 'manifest.json'
    RESULT_FILE = 'result.json'
    VERDICT_FILE = 'verdict.json'
    SNAPSHOT_TEMPLATE = 'profile_{index:05d}.csv'
    FLOAT_FORMAT = '%.16e'
    INT_FORMAT = '%d'

    LEDGER_COLUMNS = ['i', 't', 'bending', 'length', 'energy', 'penalty',
                      'dissipation_cumsum', 'sup_du', 'active_count', 'mu_total']
    SNAPSHOT_COLUMNS = ['x', 'u', 'psi', 'mu_atom']
    PROFILE_COLUMNS = ['x', 'u']
    ARC_COLUMNS = ['s', 'k', 'theta', 'x', 'y']

    # manifest keys
    PARAMS = 'params'
    CONFIG = 'config'
    VERSION = 'version'
    WALL_TIME = 'wall_time'
    STATUS = 'status'
    SUMMARY = 'summary'
    ERROR = 'error'
    MESSAGE = 'message'
    EXIT_CODE = 'exit_code'

    # environment
    ENV_LOG_LEVEL = 'EOF_LOG_LEVEL'
    ENV_OUTPUT_DIR = 'EOF_OUTPUT_DIR'
    ENV_INNER_TOL = 'EOF_INNER_TOL'
    ENV_INNER_MAX_ITER = 'EOF_INNER_MAX_ITER'
    ENV_ACTIVATION_TOL = 'EOF_ACTIVATION_TOL'

    DEFAULT_LOG_LEVEL = 'INFO'
    DEFAULT_OUTPUT_DIR = './runs'
    DEFAULT_INNER_TOL = 1e-10
    DEFAULT_INNER_MAX_ITER = 20000
    DEFAULT_ACTIVATION_TOL = 1e-10
    DEFAULT_SNAPSHOT_STRIDE = 10
