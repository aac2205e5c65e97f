import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


def get_int_env(env_var: str, default: int) -> int:
    """Read an integer from the environment, falling back to the default"""
    value = os.getenv(env_var)
    if value is None or value.strip() == "":
        return default
    return int(value)


# Logging
LOG_LEVEL = os.getenv("SINGD_LOG_LEVEL", "INFO")

# Seeding
SEED_ENV_VAR = "SINGD_SEED"
DEFAULT_SEED = 0

# Output locations
DEFAULT_OUTPUT_DIR = os.getenv("SINGD_OUTPUT_DIR", os.path.join("outputs", "runs"))
METRICS_FILENAME = "metrics.csv"
SUMMARY_FILENAME = "summary.json"
CSV_SCHEMA_HEADER = "# singd-kit v1"

# Numeric tolerances
SYMMETRY_TOLERANCE = 1e-8  # relative, checked before projections
PIVOT_TOLERANCE = 1e-12  # relative to max |entry|, Gauss-Jordan pivoting

# Exit codes
EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_DIVERGED = 3
EXIT_VERIFICATION_FAILED = 4
