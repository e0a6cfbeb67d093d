# config.py
import os
from dotenv import load_dotenv

load_dotenv()


def _env(name, default, cast=str):
    """Read an ORDCOP_* override from the environment"""
    value = os.getenv(f'ORDCOP_{name}')
    if value is None or value == '':
        return default
    return cast(value)


def _env_bool(value):
    return str(value).strip().lower() in ('1', 'true', 'yes', 'on')


BASE_DIR = os.path.abspath(os.path.dirname(__file__))
DATA_DIR = _env('DATA_DIR', os.path.join(BASE_DIR, 'data'))
OUTPUT_DIR = _env('OUTPUT_DIR', os.path.join(BASE_DIR, 'output'))
AUTO_MPG_PATH = _env('AUTO_MPG_PATH', os.path.join(DATA_DIR, 'auto-mpg.data'))
AUTO_MPG_URL = _env('AUTO_MPG_URL', 'https://archive.ics.uci.edu/ml/machine-learning-databases/auto-mpg/auto-mpg.data')
AUTO_MPG_DOWNLOAD = _env('AUTO_MPG_DOWNLOAD', True, _env_bool)
DOWNLOAD_TIMEOUT = _env('DOWNLOAD_TIMEOUT', 30, int)
LOG_LEVEL = _env('LOG_LEVEL', 'INFO')

# --- Reproducibility ---
DEFAULT_SEED = _env('DEFAULT_SEED', 20240601, int)

# --- Samples ---
MIN_SAMPLE_SIZE = _env('MIN_SAMPLE_SIZE', 10, int)

# --- Numerics ---
MULTISTART = _env('MULTISTART', 5, int)
OPTIMIZER_TOLERANCE = _env('OPTIMIZER_TOLERANCE', 1e-10, float)
ROOT_TOLERANCE = _env('ROOT_TOLERANCE', 1e-10, float)
BVN_ORDER = _env('BVN_ORDER', 64, int)
LIKELIHOOD_FLOOR = 1e-300

# --- Latent scores / beta copula ---
RHO_CLIP = _env('RHO_CLIP', 0.999, float)
BETA_COPULA_SEEDS = _env('BETA_COPULA_SEEDS', 1, int)

# --- KL atlas ---
KL_QUADRATURE_ORDER = _env('KL_QUADRATURE_ORDER', 201, int)
KL_TAIL_MASS = _env('KL_TAIL_MASS', 1e-9, float)
T_NU_GRID = (2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 20.0, 30.0, 50.0)
STRICT_TYPO_ROWS = _env('STRICT_TYPO_ROWS', False, _env_bool)
N_JOBS = _env('N_JOBS', 1, int)

# --- Output ---
SVG_SIZE_PX = _env('SVG_SIZE_PX', 600, int)
CSV_FLOAT_FORMAT = '%.10g'
