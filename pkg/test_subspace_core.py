"""
Тестирование ориентированных подпространств и проекторов
"""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from exceptions import DimensionMismatch, FullSpace, RankDeficient
from subspace_core import (
    Subspace, complement, coordinate_subspace, orthonormalize, project,
    projection_operator, random_subspace, rotate_within,
)


# === ORTHONORMALIZE ===

def test_orthonormal_input_is_kept():
    """Уже ортонормированный набор не меняется"""
    sub = orthonormalize([(1, 0, 0), (0, 1, 0)])
    assert np.allclose(sub.frame, np.eye(3)[:, :2])
    assert sub.orientation == 1


def test_gram_schmidt_forced():
    sub = orthonormalize([(2, 0, 0), (1, 1, 0)])
    assert np.allclose(sub.projector(), np.diag([1.0, 1.0, 0.0]), atol=1e-12)
    assert sub.orientation == 1
    assert np.linalg.det(sub.oriented_frame()[:2, :2]) > 0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_random_vectors_span_is_preserved(seed):
    """5 случайных векторов в ℝ⁸: FᵀF = I и взаимные проекции совпадают"""
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((5, 8))
    sub = orthonormalize(raw)
    assert np.max(np.abs(sub.frame.T @ sub.frame - np.eye(5))) <= 1e-12
    residual = raw.T - sub.projector() @ raw.T
    assert np.max(np.abs(residual)) <= 1e-10
    # ориентация согласована с исходным набором
    assert np.linalg.det(sub.oriented_frame().T @ raw.T) > 0


def test_rank_deficient_input():
    with pytest.raises(RankDeficient):
        orthonormalize([(1, 2, 3), (2, 4, 6)])
    with pytest.raises(RankDeficient):
        orthonormalize(np.eye(3)[:, :2].T.tolist() + [[1, 1, 0], [0, 1, 1]])


def test_subspace_rejects_bad_frames():
    with pytest.raises(RankDeficient):
        Subspace(np.array([[1.0, 1.0], [0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(DimensionMismatch):
        Subspace(np.zeros(3))
    with pytest.raises(ValueError):
        Subspace(np.eye(3)[:, :1], orientation=0)


# === PROJECT / COMPLEMENT ===

def test_project_examples():
    S = coordinate_subspace(4, [0, 1])
    assert np.allclose(project(S, [1, 2, 3, 4]), [1, 2, 0, 0])
    x = np.array([0.3, -1.2, 0.0, 0.0])
    assert np.allclose(project(S, x), x)
    with pytest.raises(DimensionMismatch):
        project(S, [1, 2, 3])


def test_projection_operator_rank_and_idempotence():
    rng = np.random.default_rng(3)
    S = random_subspace(7, 3, rng)
    op = projection_operator(S)
    assert op.rank == 3
    assert np.allclose(op.matrix @ op.matrix, op.matrix, atol=1e-12)
    with pytest.raises(ValueError):
        type(op)(2.0 * op.matrix)


def test_complement_of_coordinate_plane():
    comp = complement(coordinate_subspace(4, [0, 1]))
    assert comp.dim == 2
    assert np.allclose(comp.projector(), np.diag([0.0, 0.0, 1.0, 1.0]), atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_complement_orientation(seed):
    """S ∧ S^⊥ совпадает со стандартной ориентацией"""
    rng = np.random.default_rng(seed)
    S = random_subspace(6, 2 + seed % 3, rng)
    comp = complement(S)
    assert S.dim + comp.dim == 6
    assert np.max(np.abs(S.frame.T @ comp.frame)) <= 1e-12
    assert np.linalg.det(np.hstack([S.oriented_frame(), comp.oriented_frame()])) > 0


def test_complement_of_full_space():
    with pytest.raises(FullSpace):
        complement(coordinate_subspace(3, [0, 1, 2]))


# === ORIENTATION ===

@pytest.mark.parametrize("seed", range(10))
def test_rotate_within_keeps_oriented_subspace(seed):
    rng = np.random.default_rng(100 + seed)
    S = random_subspace(5, 3, rng)
    R = rotate_within(S, rng)
    assert np.allclose(S.projector(), R.projector(), atol=1e-12)
    assert np.linalg.det(S.oriented_frame().T @ R.oriented_frame()) > 0


def test_reversed_flips_orientation():
    S = coordinate_subspace(3, [0, 2])
    assert S.reversed().orientation == -1
    assert S.reversed().reversed().orientation == 1
    assert np.linalg.det(S.oriented_frame().T @ S.reversed().oriented_frame()) < 0
