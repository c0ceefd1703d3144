"""
Ориентированные подпространства евклидова пространства и проекторы на них.

Подпространство хранится как ортонормированный репер (столбцы) плюс знак
ориентации: ориентированный единичный k-вектор равен orientation·f₁∧…∧f_k.
Проекторы строятся по требованию.
"""
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from config import ORTHO_TOL, RANK_TOL
from exceptions import DimensionMismatch, FullSpace, RankDeficient

logger = logging.getLogger(__name__)

PROJECTOR_IDEMPOTENT_TOL = 1e-10


def _permutation_sign(perm: Sequence[int]) -> int:
    """Знак перестановки через разложение на циклы"""
    perm = list(perm)
    seen = [False] * len(perm)
    sign = 1
    for start in range(len(perm)):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def positive_qr(a: np.ndarray, pivoting: bool = False):
    """QR с неотрицательной диагональю R (знаки переносятся в Q)."""
    if pivoting:
        q, r, piv = scipy.linalg.qr(a, mode="economic", pivoting=True)
    else:
        q, r = scipy.linalg.qr(a, mode="economic")
        piv = np.arange(a.shape[1])
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs, signs[:, None] * r, piv


@dataclass(frozen=True, eq=False)
class Subspace:
    """Ориентированное k-мерное подпространство ℝ^N."""

    frame: np.ndarray
    orientation: int = 1

    def __post_init__(self):
        frame = np.array(self.frame, dtype=float)
        if frame.ndim != 2:
            raise DimensionMismatch(f"frame must be a 2-d array of columns, got shape {frame.shape}")
        n_amb, k = frame.shape
        if not 1 <= k <= n_amb:
            raise DimensionMismatch(f"subspace dimension {k} outside [1, {n_amb}]")
        if self.orientation not in (1, -1):
            raise ValueError(f"orientation must be ±1, got {self.orientation}")
        gram_err = np.max(np.abs(frame.T @ frame - np.eye(k)))
        if gram_err > ORTHO_TOL:
            raise RankDeficient(f"frame is not orthonormal (Gram error {gram_err:.2e})")
        frame.setflags(write=False)
        object.__setattr__(self, "frame", frame)

    @property
    def ambient_dim(self) -> int:
        return self.frame.shape[0]

    @property
    def dim(self) -> int:
        return self.frame.shape[1]

    def projector(self) -> np.ndarray:
        return self.frame @ self.frame.T

    def oriented_frame(self) -> np.ndarray:
        """Репер, внешнее произведение которого равно ориентированному k-вектору."""
        frame = self.frame.copy()
        frame[:, 0] *= self.orientation
        return frame

    def reversed(self) -> "Subspace":
        return Subspace(self.frame, -self.orientation)

    def __repr__(self) -> str:
        return f"Subspace(dim={self.dim}, ambient_dim={self.ambient_dim}, orientation={self.orientation:+d})"


@dataclass(frozen=True, eq=False)
class ProjectionOperator:
    """Ортогональный проектор: симметричная идемпотентная матрица."""

    matrix: np.ndarray
    rank: int = field(init=False)

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionMismatch(f"projector must be square, got shape {mat.shape}")
        if np.max(np.abs(mat - mat.T)) > ORTHO_TOL:
            raise ValueError("projector is not symmetric")
        if np.max(np.abs(mat @ mat - mat)) > PROJECTOR_IDEMPOTENT_TOL:
            raise ValueError("projector is not idempotent")
        trace = float(np.trace(mat))
        rank = int(round(trace))
        if abs(trace - rank) > PROJECTOR_IDEMPOTENT_TOL:
            raise ValueError(f"projector trace {trace} is not an integer")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "rank", rank)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=float)


def projection_operator(S: Subspace) -> ProjectionOperator:
    return ProjectionOperator(S.projector())


def orthonormalize(raw_frame: Iterable[Sequence[float]]) -> Subspace:
    """
    Ортонормирует набор векторов (строки raw_frame).

    QR с выбором ведущего столбца плюс повторный проход ортогонализации.
    Ориентация равна знаку определителя матрицы перехода от raw_frame к реперу.
    """
    vectors = np.atleast_2d(np.asarray(list(raw_frame), dtype=float))
    a = vectors.T
    n_amb, k = a.shape
    if k > n_amb:
        raise RankDeficient(f"{k} vectors cannot be independent in R^{n_amb}")
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] < RANK_TOL * sv[0]:
        raise RankDeficient(f"numerical rank below {k} (smallest singular value {sv[-1]:.2e})")

    q, r, piv = positive_qr(a, pivoting=True)
    # повторная ортогонализация: R ≈ I с положительной диагональю, ориентация не меняется
    q, _, _ = positive_qr(q)
    orientation = _permutation_sign(piv)
    logger.debug(f"SubspaceCore: orthonormalized {k} vectors in R^{n_amb}, orientation={orientation:+d}")
    return Subspace(q, orientation)


def project(S: Subspace, x: Sequence[float]) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (S.ambient_dim,):
        raise DimensionMismatch(f"vector of shape {x.shape} vs ambient dimension {S.ambient_dim}")
    return S.frame @ (S.frame.T @ x)


def complement(S: Subspace) -> Subspace:
    """
    Ортогональное дополнение. Ориентация выбирается так, чтобы S ∧ S^⊥
    совпадало со стандартной ориентацией ℝ^N.
    """
    if S.dim == S.ambient_dim:
        raise FullSpace("complement of the whole space is empty")
    comp = scipy.linalg.null_space(S.frame.T)
    comp, _, _ = positive_qr(comp)
    det = np.linalg.det(np.hstack([S.oriented_frame(), comp]))
    return Subspace(comp, 1 if det > 0 else -1)


def coordinate_subspace(ambient_dim: int, indices: Sequence[int]) -> Subspace:
    """Подпространство, натянутое на координатные оси (в порядке indices)."""
    frame = np.zeros((ambient_dim, len(indices)))
    for col, idx in enumerate(indices):
        frame[idx, col] = 1.0
    return Subspace(frame)


def random_subspace(ambient_dim: int, k: int, rng: np.random.Generator) -> Subspace:
    return orthonormalize(rng.standard_normal((k, ambient_dim)))


def rotate_within(S: Subspace, rng: np.random.Generator) -> Subspace:
    """Другой ортонормированный репер того же ориентированного подпространства."""
    q, _, _ = positive_qr(rng.standard_normal((S.dim, S.dim)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    frame, _, _ = positive_qr(S.frame @ q)
    # positive_qr может перевернуть знаки столбцов; компенсируем ориентацией
    det = np.linalg.det(S.frame.T @ frame)
    return Subspace(frame, S.orientation * (1 if det > 0 else -1))
