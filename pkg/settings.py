SYMMETRY_TOL = 1e-12
NORMALIZATION_TOL = 1e-10
MOMENT_NORM_TOL = 1e-12

ORACLE_DIM_CAP = 512
JACOBI_MAX_SWEEPS = 60
JACOBI_OFF_TOL = 1e-12
LANCZOS_BREAKDOWN_TOL = 1e-13

DEGENERACY_TOL = 1e-9
OVERLAP_FLOOR = 1e-20
COMPLETE_TOL = 1e-10
HANKEL_TOL = 1e-8

LP_FEASTOL = 1e-9
LP_OPTTOL = 1e-9
LP_MAX_ITERATIONS = 20_000
LP_STALL_THRESHOLD = 50
LP_SINGULAR_COND = 1e15

TARGET_REGION_POINTS = 20
COMPLEMENT_REGION_POINTS = 200
THRESHOLD_GRID_POINTS = 200
GAMMA_MINUS = 0.3
GAMMA_PLUS = 0.3

CERTIFY_FACTOR = 4
CERTIFY_RETRIES = 3
CERTIFY_TOL = 1e-6

CLUSTER_LEVELS = 5
CLUSTER_SPACING = 0.02
CLUSTER1_CENTER = -0.4
GRID_LEVELS = 19
DEFAULT_GRID_LO = -0.9
GROUND_WEIGHT = 0.4
CLUSTER_WEIGHT = 0.2
GENERATOR_JITTER = 1e-6
GENERATOR_RETRIES = 8

WINDOW_DECIMALS = 1
