# Утилиты раннера: коды выхода и учёт вызовов команд
from utils.decorators import EXIT_CONFIG_ERROR, EXIT_CONTRACT_FAILURE, EXIT_PASS

__all__ = ["EXIT_PASS", "EXIT_CONTRACT_FAILURE", "EXIT_CONFIG_ERROR"]
