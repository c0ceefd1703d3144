"""
Конфигурация проекта Bernstein Lab
Все допуски и параметры сеток читаются из окружения (.env поддерживается).
"""
import os
import logging
from pathlib import Path
from typing import Any

from dotenv import load_dotenv

load_dotenv(dotenv_path=Path(__file__).parent / ".env", override=False)

logger = logging.getLogger(__name__)


def get_optional_env(key: str, default: str = "", var_type: type = str) -> Any:
    value = os.getenv(key, default)
    if var_type == bool:
        return value.lower() in ("true", "1", "yes", "on")
    try:
        return var_type(value) if value else var_type(default)
    except (ValueError, TypeError):
        logger.warning(f"Invalid value for {key}: '{value}', using default: {default}")
        return var_type(default)


def validate_positive(value: float, name: str, default: float) -> float:
    if not value > 0:
        logger.warning(f"⚠️ {name} must be positive, got {value}; using {default}")
        return default
    return value


def validate_density(value: int, name: str, default: int) -> int:
    if value < 10:
        logger.warning(f"⚠️ {name} must be >= 10, got {value}; using {default}")
        return default
    return value


# === LOGGING ===
LOG_LEVEL = get_optional_env("LOG_LEVEL", "INFO", str).upper()
if LOG_LEVEL not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
    LOG_LEVEL = "INFO"

# === ЛИНЕЙНАЯ АЛГЕБРА ===
ORTHO_TOL = validate_positive(get_optional_env("ORTHO_TOL", "1e-12", float), "ORTHO_TOL", 1e-12)
RANK_TOL = validate_positive(get_optional_env("RANK_TOL", "1e-10", float), "RANK_TOL", 1e-10)
CLUSTER_TOL = validate_positive(get_optional_env("CLUSTER_TOL", "1e-8", float), "CLUSTER_TOL", 1e-8)
# Защитная полоса у 0 и π/2: sinθ, cosθ должны быть не меньше
GUARD_BAND = validate_positive(get_optional_env("GUARD_BAND", "1e-6", float), "GUARD_BAND", 1e-6)
# Ниже этого sinθ·cosθ Φ_θ строится по парам сингулярных векторов
PHI_FORMULA_MIN = validate_positive(
    get_optional_env("PHI_FORMULA_MIN", "1e-3", float), "PHI_FORMULA_MIN", 1e-3
)
W_POSITIVE_TOL = validate_positive(
    get_optional_env("W_POSITIVE_TOL", "1e-12", float), "W_POSITIVE_TOL", 1e-12
)

# === КОНЕЧНЫЕ РАЗНОСТИ ===
FD_STEP = validate_positive(get_optional_env("FD_STEP", "1e-4", float), "FD_STEP", 1e-4)
JACOBIAN_STEP = validate_positive(
    get_optional_env("JACOBIAN_STEP", "1e-4", float), "JACOBIAN_STEP", 1e-4
)

# === СЕРТИФИКАЦИЯ ===
CERT_TOL = validate_positive(get_optional_env("CERT_TOL", "1e-10", float), "CERT_TOL", 1e-10)
AUSTERE_TOL = validate_positive(get_optional_env("AUSTERE_TOL", "1e-8", float), "AUSTERE_TOL", 1e-8)
DEFAULT_SEED = get_optional_env("DEFAULT_SEED", "0", int)
DEFAULT_DENSITY = validate_density(
    get_optional_env("DEFAULT_DENSITY", "50", int), "DEFAULT_DENSITY", 50
)
DEFAULT_SAMPLES = get_optional_env("DEFAULT_SAMPLES", "10000", int)
if DEFAULT_SAMPLES < 1:
    DEFAULT_SAMPLES = 10000
EPS0_MAX_R = get_optional_env("EPS0_MAX_R", "3", int)
if EPS0_MAX_R < 1:
    EPS0_MAX_R = 3

# === ПАРАЛЛЕЛИЗМ ===
WORKERS = get_optional_env("WORKERS", "4", int)
if WORKERS < 1:
    WORKERS = 1
CACHE_SIZE = get_optional_env("CACHE_SIZE", "256", int)
if CACHE_SIZE < 16:
    CACHE_SIZE = 16

# === PATHS ===
PROJECT_ROOT = Path(__file__).parent.resolve()
REPORT_DIR = Path(get_optional_env("REPORT_DIR", str(PROJECT_ROOT / "reports"), str))
REPORT_DB_PATH = Path(get_optional_env("REPORT_DB_PATH", str(PROJECT_ROOT / "runs.db"), str))

# === ВЕРСИЯ ОТЧЁТОВ ===
REPORT_SCHEMA_VERSION = 2
TOOLKIT_VERSION = "1.0.0"

logger.info(f"📋 Config: LOG_LEVEL={LOG_LEVEL}, CLUSTER_TOL={CLUSTER_TOL}, FD_STEP={FD_STEP}")
logger.debug(f"📋 Workers: {WORKERS}, seed={DEFAULT_SEED}, density={DEFAULT_DENSITY}")
