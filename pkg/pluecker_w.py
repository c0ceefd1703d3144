"""
w-функция грассманиана: скалярное произведение Плюккера ⟨P, Q0⟩
ориентированных единичных m-векторов, и v = 1/w.
"""
import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
import scipy.linalg

from config import W_POSITIVE_TOL
from exceptions import DimensionMismatch, NonPositiveW
from subspace_core import Subspace

logger = logging.getLogger(__name__)

# Порог области Бернштейна: w ≥ 1/3 (эквивалентно v ≤ 3)
BERNSTEIN_W_MIN = 1.0 / 3.0


@dataclass(frozen=True)
class WValue:
    w: float
    pair_dims: Tuple[int, int]
    angle_product: float


def _check_pair(P: Subspace, Q0: Subspace) -> None:
    if P.ambient_dim != Q0.ambient_dim:
        raise DimensionMismatch(f"ambient dimensions differ: {P.ambient_dim} vs {Q0.ambient_dim}")
    if P.dim != Q0.dim:
        raise DimensionMismatch(f"dim P = {P.dim} but dim Q0 = {Q0.dim}")


def _plucker_det(P: Subspace, Q0: Subspace) -> float:
    # LU с выбором ведущего элемента; det = ±Π diag(U)
    cross = P.oriented_frame().T @ Q0.oriented_frame()
    lu, piv = scipy.linalg.lu_factor(cross)
    swaps = int(np.sum(piv != np.arange(len(piv))))
    sign = -1.0 if swaps % 2 else 1.0
    return float(sign * np.prod(np.diag(lu)))


def w_from_angles(thetas: Sequence[float]) -> float:
    return float(np.prod(np.cos(np.asarray(thetas, dtype=float))))


def w_inner(P: Subspace, Q0: Subspace) -> WValue:
    """
    w(P, Q0) = det[⟨u_a, ε_b⟩] для ориентированных ортонормированных реперов.
    Положительно тогда и только тогда, когда 𝒫₀|_P сохраняет ориентацию.
    """
    from jordan_angles import flat_angles, jordan_decomposition

    _check_pair(P, Q0)
    w = _plucker_det(P, Q0)
    angle_product = w_from_angles(flat_angles(jordan_decomposition(P, Q0)))
    if abs(abs(w) - angle_product) > 1e-10:
        logger.warning(f"PlueckerW: |w|={abs(w):.3e} differs from Π cosθ={angle_product:.3e}")
    return WValue(w=w, pair_dims=(P.dim, P.ambient_dim - P.dim), angle_product=angle_product)


def v_value(P: Subspace, Q0: Subspace) -> float:
    """v = 1/w; определена только при w > W_POSITIVE_TOL."""
    _check_pair(P, Q0)
    w = _plucker_det(P, Q0)
    if w <= W_POSITIVE_TOL:
        raise NonPositiveW(f"w(P, Q0) = {w:.3e} is not positive")
    return 1.0 / w


def orientation_flip(P: Subspace, Q0: Subspace) -> float:
    _check_pair(P, Q0)
    return _plucker_det(P, Q0.reversed())


def bernstein_region(P: Subspace, Q0: Subspace) -> bool:
    """Попадает ли P в замкнутую область {w(·, Q0) ≥ 1/3}."""
    _check_pair(P, Q0)
    return _plucker_det(P, Q0) >= BERNSTEIN_W_MIN
