"""Исключения геометрического тулкита"""


class GeometryError(ValueError):
    """Базовая ошибка: нарушено предусловие численной операции."""


class RankDeficient(GeometryError):
    pass


class DimensionMismatch(GeometryError):
    pass


class FullSpace(GeometryError):
    pass


class DegenerateAngle(GeometryError):
    pass


class ClusterOutOfRange(GeometryError):
    pass


class NonPositiveW(GeometryError):
    pass


class RegionViolation(GeometryError):
    pass


class PreconditionViolated(GeometryError):
    pass


class RankDeficientJacobian(GeometryError):
    pass


class OutOfBox(GeometryError):
    pass


class AtVertex(GeometryError):
    pass


class NotSpherical(GeometryError):
    pass


class ConfigError(ValueError):
    """Некорректная конфигурация запуска CLI (exit 2)."""


class ContractFailure(RuntimeError):
    """Проверка контракта не прошла (exit 1); record содержит проваленную запись."""

    def __init__(self, message: str, record: dict | None = None):
        super().__init__(message)
        self.record = record or {}
