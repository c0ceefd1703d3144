"""
Реестр тестовых объектов лаборатории погружений.

Каждый объект задаёт погружение с базовой точкой по умолчанию; для графиков
дополнительно хранится сама функция (нужна для Δ_f).
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np

from exceptions import ConfigError
from submanifold_lab import (
    GraphFunction, Immersion, cone_over, graph_immersion, lawson_osserman,
)

logger = logging.getLogger(__name__)

SPHERE_RADIUS = 2.0
SMALL_CIRCLE_RADIUS = 0.5
AFFINE_A = np.array([[0.5, -0.25], [1.0, 2.0]])
AFFINE_B = np.array([0.125, -0.5])


@dataclass(frozen=True, eq=False)
class LabObject:
    name: str
    immersion: Immersion
    base_point: np.ndarray
    graph: Optional[GraphFunction] = None
    cone: bool = False
    minimal: bool = True
    description: str = ""
    expected_w: Optional[float] = None  # ⟨N, Q0⟩ для координатного Q0, если известно


def affine_graph(A: np.ndarray = AFFINE_A, b: np.ndarray = AFFINE_B) -> GraphFunction:
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = A.shape[1]
    return GraphFunction(
        func=lambda x: A @ x + b, n=n, m=A.shape[0],
        box=np.array([[-1.0, 1.0]] * n), name="affine",
    )


def sphere_graph(radius: float = SPHERE_RADIUS) -> GraphFunction:
    """Верхняя полусфера радиуса ρ как график над диском."""
    half = radius / 4.0
    return GraphFunction(
        func=lambda x: np.array([np.sqrt(radius ** 2 - x @ x)]), n=2, m=1,
        box=np.array([[-half, half]] * 2), name="sphere",
    )


def paraboloid_graph() -> GraphFunction:
    return GraphFunction(
        func=lambda x: np.array([0.5 * (x @ x)]), n=2, m=1,
        box=np.array([[-1.0, 1.0]] * 2), name="paraboloid",
    )


def lawson_osserman_graph() -> GraphFunction:
    return GraphFunction(
        func=lawson_osserman, n=4, m=3,
        box=np.array([[-1.5, 1.5]] * 4), homogeneous=True, name="lawson-osserman",
    )


def helicoid() -> Immersion:
    """(s, φ) ↦ (s cos φ, s sin φ, φ); главные кривизны ±1/(1+s²)."""
    return Immersion(
        func=lambda p: np.array([p[0] * np.cos(p[1]), p[0] * np.sin(p[1]), p[1]]),
        domain_dim=2, ambient_dim=3, box=np.array([[-1.0, 1.0], [-np.pi, np.pi]]),
        name="helicoid",
    )


def clifford_torus() -> Immersion:
    """S¹(1/√2) × S¹(1/√2) ⊂ S³."""
    scale = 1.0 / np.sqrt(2.0)
    return Immersion(
        func=lambda y: scale * np.array([np.cos(y[0]), np.sin(y[0]), np.cos(y[1]), np.sin(y[1])]),
        domain_dim=2, ambient_dim=4, box=np.array([[-np.pi, np.pi], [0.0, np.pi]]),
        name="clifford-torus",
    )


def small_circle(radius: float = SMALL_CIRCLE_RADIUS) -> Immersion:
    """Окружность радиуса radius на S², не минимальная при radius < 1."""
    height = np.sqrt(1.0 - radius ** 2)
    return Immersion(
        func=lambda y: np.array([radius * np.cos(y[0]), radius * np.sin(y[0]), height]),
        domain_dim=1, ambient_dim=3, box=np.array([[-np.pi, np.pi]]),
        name="small-circle",
    )


def _affine() -> LabObject:
    g = affine_graph()
    return LabObject("affine", graph_immersion(g), np.zeros(2), graph=g,
                     description="plane graph x ↦ (x, Ax + b)")


def _sphere() -> LabObject:
    g = sphere_graph()
    return LabObject("sphere", graph_immersion(g), np.zeros(2), graph=g, minimal=False,
                     description=f"round sphere of radius {SPHERE_RADIUS}, |H| = 2/ρ")


def _helicoid() -> LabObject:
    return LabObject("helicoid", helicoid(), np.array([0.5, 0.3]),
                     description="minimal helicoid in R^3")


def _clifford_cone() -> LabObject:
    return LabObject("clifford-cone", cone_over(clifford_torus()), np.array([1.0, 0.0, np.pi / 2.0]),
                     cone=True, description="cone over the Clifford torus in R^4")


def _lawson_osserman() -> LabObject:
    g = lawson_osserman_graph()
    return LabObject("lawson-osserman", graph_immersion(g), np.full(4, 0.5), graph=g, cone=True,
                     description="Lawson-Osserman minimal cone graph R^4 → R^3, ⟨N, Q0⟩ = 1/9",
                     expected_w=1.0 / 9.0)


def _small_circle_cone() -> LabObject:
    return LabObject("small-circle-cone", cone_over(small_circle()), np.array([1.0, 0.0]),
                     cone=True, minimal=False, description="cone over S^1(0.5) ⊂ S^2")


def _equator_cone() -> LabObject:
    return LabObject("equator-cone", cone_over(small_circle(1.0)), np.array([1.0, 0.0]),
                     cone=True, description="cone over the equator: a plane")


def _paraboloid() -> LabObject:
    g = paraboloid_graph()
    return LabObject("paraboloid", graph_immersion(g, rays=True), np.array([0.3, 0.2]), graph=g,
                     minimal=False, description="paraboloid, negative control for ray constancy")


REGISTRY: Dict[str, Callable[[], LabObject]] = {
    "affine": _affine,
    "sphere": _sphere,
    "helicoid": _helicoid,
    "clifford-cone": _clifford_cone,
    "lawson-osserman": _lawson_osserman,
    "small-circle-cone": _small_circle_cone,
    "equator-cone": _equator_cone,
    "paraboloid": _paraboloid,
}


def get_object(name: str) -> LabObject:
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise ConfigError(f"unknown object '{name}', expected one of {sorted(REGISTRY)}") from None
    logger.debug(f"LabObjects: building {name}")
    return factory()
