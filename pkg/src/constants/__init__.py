import os

PACKAGE_VERSION: str = "0.1.0"

PIPELINE_NAME: str = "infinitesimal-spectral"
ARTIFACT_DIR: str = "artifact"
CONFIG_DIR: str = "config"
SELECTION_LIBRARY_FILE_PATH = os.path.join(CONFIG_DIR, "selection_library.yaml")

RESULT_TABLE_FLOAT_FORMAT: str = "%.12e"
RESULT_METADATA_SUFFIX: str = ".meta.json"
STEADY_OBJECT_FILE_NAME: str = "steady_solution.pkl"

"""
Logging related constants start with LOG var name
"""
LOG_DIR_NAME: str = "logs"
LOG_MAX_FILE_SIZE: int = 5 * 1024 * 1024
LOG_BACKUP_COUNT: int = 3
LOG_FILE_LEVEL: str = "DEBUG"
LOG_CONSOLE_LEVEL: str = os.getenv("INFINITESIMAL_LOG_LEVEL", "INFO")
LOG_FORMAT: str = "[ %(asctime)s ] %(name)s - %(levelname)s - %(message)s"

TRAJECTORY_MAGIC: bytes = b"IFSM"
TRAJECTORY_FORMAT_VERSION: int = 1

"""
Hermite basis and quadrature related constants start with HERMITE var name
"""
HERMITE_DEFAULT_TRUNCATION: int = 32
HERMITE_QUADRATURE_ORDER: int = 128
HERMITE_WEIGHT_MASS_TOLERANCE: float = 1e-14

"""
Grid related constants start with GRID var name
"""
GRID_HALF_WIDTH: float = 12.0
GRID_POINTS: int = 2048
GRID_BOUNDARY_TOLERANCE: float = 1e-12
GRID_BOUNDARY_BAND: int = 3
GRID_MASS_TOLERANCE: float = 1e-6
GRID_CONVOLUTION_METHOD: str = "direct"

"""
Model (selection function and assumptions) related constants start with MODEL var name
"""
MODEL_SEARCH_INTERVAL: tuple = (-10.0, 10.0)
MODEL_SEARCH_SAMPLES: int = 4001
MODEL_REPORT_SAMPLES: int = 8001
MODEL_NORMAL_FORM_TOLERANCE: float = 1e-8
MODEL_DIFFERENCE_STEP: float = 1e-4
MODEL_H5_DELTA: float = 0.1
MODEL_H6_DELTA_PRIME: float = 0.25
MODEL_H2_MAX_EXPONENT: int = 8

"""
Steady solver related constants start with STEADY var name
"""
STEADY_SPECTRAL_TOLERANCE: float = 1e-12
STEADY_GRID_TOLERANCE: float = 1e-10
STEADY_MAX_ITERATIONS: int = 200
STEADY_GRID_MAX_ITERATIONS: int = 5000
STEADY_SPECTRAL_DAMPING: float = 1.0
STEADY_GRID_DAMPING: float = 0.5
STEADY_NEIGHBORHOOD_CONSTANT: float = 10.0
STEADY_CONDITION_LIMIT: float = 1e12
STEADY_DEGENERATE_PIVOT: float = 1e-14
STEADY_DIVERGENCE_STREAK: int = 3
STEADY_RESIDUAL_FACTOR: float = 10.0
STEADY_KAPPA: float = 1.0
STEADY_R_TILDE: float = 1.0

"""
Dynamics related constants start with DYNAMICS var name
"""
DYNAMICS_MAX_STEP: float = 0.1
DYNAMICS_GROWTH_STEP_CONSTANT: float = 0.5
DYNAMICS_BLOW_UP_GUARD: float = 1e6
DYNAMICS_NEGATIVITY_TOLERANCE: float = 1e-10
DYNAMICS_POSITIVITY_SAFETY: float = 0.9
DYNAMICS_FIT_WINDOW: tuple = (0.2, 1.0)
DYNAMICS_SNAPSHOT_STRIDE: int = 10

"""
Diagnostics related constants start with DIAGNOSTICS var name
"""
DIAGNOSTICS_DEFAULT_MOMENT_ORDER: int = 6
DIAGNOSTICS_MAX_MOMENT_ORDER: int = 8
DIAGNOSTICS_TAIL_TOLERANCE: float = 1e-12
DIAGNOSTICS_TAIL_DIVERGENCE: float = 1e-8

"""
Validation suite related constants start with VALIDATION var name
"""
VALIDATION_SEED: int = 20240601
VALIDATION_PRODUCT_MAX_ORDER: int = 16
VALIDATION_BILINEAR_PAIRS: int = 1000
VALIDATION_RANDOM_STATES: int = 100
VALIDATION_RANDOM_RHS: int = 100
VALIDATION_EPSILONS: tuple = (0.2, 0.1, 0.05)
VALIDATION_PRODUCT_TOLERANCE: float = 1e-12
VALIDATION_ORTHONORMALITY_TOLERANCE: float = 1e-10
VALIDATION_CONSISTENCY_TOLERANCE: float = 1e-6
VALIDATION_MOMENT_LAW_TOLERANCE: float = 1e-6
VALIDATION_VARIANCE_TOLERANCE: float = 1e-8
VALIDATION_DICTIONARY_TOLERANCE: float = 1e-8
VALIDATION_SCALING_VARIATION: float = 0.05
VALIDATION_SCALING_BOUND: float = 10.0
VALIDATION_RESIDUAL_TOLERANCE: float = 1e-10
VALIDATION_SABOTAGE_ENTRY: tuple = (4, 2)
VALIDATION_SABOTAGE_FACTOR: float = 1.1
VALIDATION_REFERENCE_EPS: float = 0.1

"""
Exit codes of the command line harness
"""
EXIT_SUCCESS: int = 0
EXIT_VALIDATION_FAILURE: int = 2
EXIT_SOLVER_DIVERGENCE: int = 3
EXIT_CONFIG_ERROR: int = 4
