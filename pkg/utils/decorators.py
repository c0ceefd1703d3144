"""
Декораторы командного раннера: перевод исключений в коды выхода и учёт вызовов
"""
import asyncio
import logging
import time
from collections import defaultdict
from functools import wraps
from typing import Any, Callable

from exceptions import ConfigError, ContractFailure, GeometryError

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_CONTRACT_FAILURE = 1
EXIT_CONFIG_ERROR = 2


# === ERROR HANDLING ===
def handle_command_errors(func: Callable) -> Callable:
    """
    Декоратор для команд CLI.
    Команда возвращает код выхода; исключения логируются и переводятся в код.
    """
    @wraps(func)
    async def wrapper(*args, **kwargs) -> int:
        try:
            return await func(*args, **kwargs)
        except ConfigError as e:
            logger.error(f"🛑 Config error in {func.__name__}: {e}")
            return EXIT_CONFIG_ERROR
        except ContractFailure as e:
            logger.error(f"⚠️ Contract failed in {func.__name__}: {e}")
            return EXIT_CONTRACT_FAILURE
        except GeometryError as e:
            logger.error(f"⚠️ {type(e).__name__} in {func.__name__}: {e}")
            return EXIT_CONTRACT_FAILURE
        except asyncio.CancelledError:
            logger.debug(f"Task cancelled in {func.__name__}")
            raise
        except Exception as e:
            logger.error(f"Unexpected error in {func.__name__}: {e}", exc_info=True)
            return EXIT_CONTRACT_FAILURE
    return wrapper


# === USAGE STATISTICS ===
usage_stats: defaultdict[str, int] = defaultdict(int)
usage_runtime: defaultdict[str, float] = defaultdict(float)


def track_usage(action: str) -> Callable:
    """
    Декоратор для учёта вызовов и времени выполнения команд.

    Args:
        action: Название действия для статистики
    """
    def decorator(func: Callable) -> Callable:
        @wraps(func)
        async def wrapper(*args, **kwargs) -> Any:
            usage_stats[action] += 1
            started = time.perf_counter()
            try:
                return await func(*args, **kwargs)
            finally:
                usage_runtime[action] += time.perf_counter() - started
                logger.debug(
                    f"Usage tracked: {action} (total: {usage_stats[action]}, "
                    f"{usage_runtime[action]:.3f}s)"
                )
        return wrapper
    return decorator


def get_usage_stats() -> dict[str, int]:
    """Возвращает статистику использования"""
    return dict(usage_stats)


def get_usage_runtime(action: str) -> float:
    return usage_runtime.get(action, 0.0)


def reset_usage_stats() -> None:
    """Сбрасывает статистику использования"""
    usage_stats.clear()
    usage_runtime.clear()
