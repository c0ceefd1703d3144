"""
Численная дифференциальная геометрия погружений: графики над ℝⁿ и конусы
над сферическими погружениями.

Все производные считаются центральными разностями. Вторая фундаментальная
форма выражается в ортонормированном касательном репере, полученном
QR-разложением матрицы Якоби; средняя кривизна H = Σ_i B(e_i, e_i).
Лапласиан понимается как div grad.
"""
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from cachetools import LRUCache

from config import CACHE_SIZE, CLUSTER_TOL, FD_STEP, JACOBIAN_STEP, W_POSITIVE_TOL
from curvature_algebra import SecondFundamentalFormTable, laplacian_v_quadratic
from exceptions import (
    AtVertex, DimensionMismatch, NonPositiveW, NotSpherical, OutOfBox,
    PreconditionViolated, RankDeficientJacobian,
)
from jordan_angles import aligned_bases, flat_angles, jordan_decomposition
from pluecker_w import BERNSTEIN_W_MIN, w_inner
from subspace_core import Subspace, positive_qr, complement, random_subspace

logger = logging.getLogger(__name__)

JACOBIAN_RANK_MIN = 1e-8
SPHERE_TOL = 1e-10
SPHERE_CHECK_POINTS = 8
LO_SCALE = np.sqrt(5.0) / 2.0


# === TYPES ===

@dataclass(frozen=True, eq=False)
class GraphFunction:
    """f = (f¹..f^m): ℝⁿ → ℝ^m на прямоугольнике box (n×2)."""

    func: Callable[[np.ndarray], np.ndarray]
    n: int
    m: int
    box: np.ndarray
    homogeneous: bool = False
    name: str = ""

    def __call__(self, x: np.ndarray) -> np.ndarray:
        value = np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float).reshape(self.m)
        if not np.all(np.isfinite(value)):
            raise OutOfBox(f"{self.name or 'graph'}: non-finite value at {x}")
        return value


@dataclass(frozen=True, eq=False)
class Immersion:
    """
    Отображение F: box ⊂ ℝⁿ → ℝ^{n+m}.

    ray_scale(x, s) переводит точку области в точку того же луча с
    множителем s; для конусов он задан, для прочих погружений None.
    """

    func: Callable[[np.ndarray], np.ndarray]
    domain_dim: int
    ambient_dim: int
    box: np.ndarray
    step: float = FD_STEP
    ray_scale: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    ray_step_scales: bool = False
    name: str = ""

    def __post_init__(self):
        box = np.array(self.box, dtype=float).reshape(self.domain_dim, 2)
        if np.any(box[:, 0] >= box[:, 1]):
            raise ValueError("box lower bounds must be below upper bounds")
        object.__setattr__(self, "box", box)

    @property
    def codim(self) -> int:
        return self.ambient_dim - self.domain_dim

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float).reshape(self.ambient_dim)

    def contains(self, x: np.ndarray, margin: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x - margin >= self.box[:, 0]) and np.all(x + margin <= self.box[:, 1]))

    def center(self) -> np.ndarray:
        return self.box.mean(axis=1)


@dataclass(frozen=True, eq=False)
class ImmersedPatch:
    base_point: np.ndarray
    metric: np.ndarray
    jacobian: np.ndarray
    tangent_frame: np.ndarray   # N×n, ориентация по координатам области
    normal_frame: np.ndarray    # N×m, det[E, N] = +1
    sff: np.ndarray             # h[α, i, j] в репере tangent_frame
    mean_curvature: np.ndarray
    step: float
    error_order: int = 2

    @property
    def n(self) -> int:
        return self.tangent_frame.shape[1]

    @property
    def m(self) -> int:
        return self.normal_frame.shape[1]

    def normal_space(self) -> Subspace:
        return Subspace(self.normal_frame)

    def tangent_space(self) -> Subspace:
        return Subspace(self.tangent_frame)


# === FINITE DIFFERENCES ===

def _require_box(im: Immersion, x: np.ndarray, margin: float) -> None:
    if not im.contains(x, margin):
        raise OutOfBox(f"{im.name or 'immersion'}: stencil of radius {margin:.1e} around {x} leaves the box")


def _jacobian(im: Immersion, x: np.ndarray, step: float) -> np.ndarray:
    n = im.domain_dim
    cols = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = step
        cols.append((im(x + e) - im(x - e)) / (2.0 * step))
    return np.column_stack(cols)


def _hessian(im: Immersion, x: np.ndarray, step: float) -> np.ndarray:
    """∂ᵢ∂ⱼF, массив n×n×N."""
    n = im.domain_dim
    center = im(x)
    hess = np.zeros((n, n, im.ambient_dim))
    basis = np.eye(n) * step
    for i in range(n):
        hess[i, i] = (im(x + basis[i]) - 2.0 * center + im(x - basis[i])) / step ** 2
        for j in range(i + 1, n):
            mixed = (im(x + basis[i] + basis[j]) - im(x + basis[i] - basis[j])
                     - im(x - basis[i] + basis[j]) + im(x - basis[i] - basis[j])) / (4.0 * step ** 2)
            hess[i, j] = hess[j, i] = mixed
    return hess


def _frames(jac: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Касательный репер E, треугольная R (J = E R) и нормальный репер N."""
    sv = np.linalg.svd(jac, compute_uv=False)
    if sv[-1] < JACOBIAN_RANK_MIN:
        raise RankDeficientJacobian(f"smallest Jacobian singular value {sv[-1]:.2e}")
    tangent, r_factor, _ = positive_qr(jac)
    normal = scipy.linalg.null_space(jac.T)
    if normal.shape[1] and np.linalg.det(np.hstack([tangent, normal])) < 0:
        normal[:, 0] = -normal[:, 0]
    return tangent, r_factor, normal


def patch_at(im: Immersion, x: Sequence[float], step: Optional[float] = None) -> ImmersedPatch:
    """Локальные данные погружения в точке x; погрешность O(step²)."""
    x = np.asarray(x, dtype=float)
    step = im.step if step is None else step
    if x.shape != (im.domain_dim,):
        raise DimensionMismatch(f"point of shape {x.shape} vs domain dimension {im.domain_dim}")
    _require_box(im, x, step)

    jac = _jacobian(im, x, step)
    tangent, r_factor, normal = _frames(jac)
    hess = _hessian(im, x, step)
    r_inv = np.linalg.inv(r_factor)
    sff_coord = np.einsum("ijk,ka->aij", hess, normal)
    sff = np.einsum("ki,akl,lj->aij", r_inv, sff_coord, r_inv)
    sff = 0.5 * (sff + sff.transpose(0, 2, 1))
    mean_curvature = normal @ np.trace(sff, axis1=1, axis2=2)
    return ImmersedPatch(
        base_point=x, metric=jac.T @ jac, jacobian=jac,
        tangent_frame=tangent, normal_frame=normal, sff=sff,
        mean_curvature=mean_curvature, step=step,
    )


def mean_curvature_residual(im: Immersion, x: Sequence[float], step: Optional[float] = None) -> float:
    return float(np.linalg.norm(patch_at(im, x, step).mean_curvature))


# === GAUSS MAP ===

def gauss_w(patch: ImmersedPatch, Q0: Subspace) -> float:
    """w = ⟨ν₁∧…∧ν_m, Q0⟩."""
    if Q0.dim != patch.m or Q0.ambient_dim != patch.normal_frame.shape[0]:
        raise DimensionMismatch(f"Q0 of dim {Q0.dim} vs normal dimension {patch.m}")
    return w_inner(patch.normal_space(), Q0).w


def _w_at(im: Immersion, Q0: Subspace, x: np.ndarray, inner_step: float) -> float:
    _, _, normal = _frames(_jacobian(im, x, inner_step))
    return float(np.linalg.det(normal.T @ Q0.oriented_frame()))


def slope_delta(g: GraphFunction, x: Sequence[float], step: float = FD_STEP) -> float:
    """Δ_f = √det(I + Dfᵀ Df)."""
    x = np.asarray(x, dtype=float)
    box = np.asarray(g.box, dtype=float)
    if np.any(x - step < box[:, 0]) or np.any(x + step > box[:, 1]):
        raise OutOfBox(f"{g.name or 'graph'}: {x} too close to the box boundary")
    df = np.column_stack([
        (g(x + step * e) - g(x - step * e)) / (2.0 * step) for e in np.eye(g.n)
    ])
    return float(np.sqrt(np.linalg.det(np.eye(g.n) + df.T @ df)))


# === CONSTRUCTIONS ===

def graph_immersion(g: GraphFunction, step: float = FD_STEP, rays: Optional[bool] = None) -> Immersion:
    """
    x ↦ (x, f(x)). Лучи области задаются для однородных f; rays=True
    включает их принудительно (отрицательный контроль для conelike_check).
    """
    rays = g.homogeneous if rays is None else rays
    return Immersion(
        func=lambda x: np.concatenate([x, g(x)]),
        domain_dim=g.n, ambient_dim=g.n + g.m, box=g.box, step=step,
        ray_scale=(lambda x, s: s * np.asarray(x)) if rays else None,
        ray_step_scales=rays,
        name=f"graph({g.name})" if g.name else "graph",
    )


def coordinate_q0(im: Immersion) -> Subspace:
    """span(ε_{n+1}, …, ε_{n+m})"""
    frame = np.zeros((im.ambient_dim, im.codim))
    frame[im.domain_dim:, :] = np.eye(im.codim)
    return Subspace(frame)


def reparametrize(im: Immersion, A: np.ndarray, b: Sequence[float]) -> Immersion:
    """y ↦ im(Ay + b) на прямоугольнике, чей образ лежит в исходном."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = im.domain_dim
    if A.shape != (n, n):
        raise DimensionMismatch(f"A must be {n}×{n}")
    center_y = np.linalg.solve(A, im.center() - b)
    half = float(np.min(np.diff(im.box, axis=1))) / 2.0
    half_y = half / (np.linalg.norm(A, 2) * np.sqrt(n))
    box = np.column_stack([center_y - half_y, center_y + half_y])
    return Immersion(
        func=lambda y: im(A @ y + b), domain_dim=n, ambient_dim=im.ambient_dim,
        box=box, step=im.step, name=f"reparam({im.name})",
    )


def blow_down(g: GraphFunction, t: float) -> GraphFunction:
    """f_t(x) = f(tx)/t; конусы являются неподвижными точками семейства."""
    if t <= 0:
        raise ValueError("t must be positive")
    return GraphFunction(
        func=lambda x: g(t * np.asarray(x)) / t, n=g.n, m=g.m,
        box=np.asarray(g.box, dtype=float) / t, homogeneous=g.homogeneous,
        name=f"blowdown({g.name}, {t:g})",
    )


def lawson_osserman(x: Sequence[float]) -> np.ndarray:
    """(√5/2)|x|·η(x/|x|), η: отображение Хопфа S³ → S²."""
    x = np.asarray(x, dtype=float)
    if x.shape != (4,):
        raise DimensionMismatch(f"expected a point of R^4, got shape {x.shape}")
    radius = np.linalg.norm(x)
    if radius <= 1e-12:
        raise AtVertex("the cone map is not differentiable at the vertex")
    z1 = complex(x[0], x[1])
    z2 = complex(x[2], x[3])
    prod = z1 * z2.conjugate()
    hopf = np.array([abs(z1) ** 2 - abs(z2) ** 2, 2.0 * prod.real, 2.0 * prod.imag])
    return LO_SCALE * hopf / radius


def cone_over(spherical_im: Immersion, t_range: Tuple[float, float] = (0.25, 4.0)) -> Immersion:
    """(t, y) ↦ t·x(y). Образ x должен лежать на единичной сфере."""
    rng = np.random.default_rng(0)
    box = spherical_im.box
    probes = [spherical_im.center()] + list(rng.uniform(box[:, 0], box[:, 1], size=(SPHERE_CHECK_POINTS, len(box))))
    for y in probes:
        radius = np.linalg.norm(spherical_im(y))
        if abs(radius - 1.0) > SPHERE_TOL:
            raise NotSpherical(f"|x(y)| = {radius:.12f} at y = {y}")
    lo, hi = t_range
    if not 0 < lo < hi:
        raise ValueError("t_range must satisfy 0 < lo < hi")

    def scale_ray(p: np.ndarray, s: float) -> np.ndarray:
        p = np.array(p, dtype=float)
        p[0] *= s
        return p

    return Immersion(
        func=lambda p: p[0] * spherical_im(p[1:]),
        domain_dim=spherical_im.domain_dim + 1, ambient_dim=spherical_im.ambient_dim,
        box=np.vstack([[lo, hi], box]), step=spherical_im.step,
        ray_scale=scale_ray, ray_step_scales=False,
        name=f"cone({spherical_im.name})",
    )


# === GAUSS MAP ALONG RAYS ===

def conelike_check(im: Immersion, Q0: Subspace, ray_samples: int = 5, rays: int = 4, seed: int = 0) -> float:
    """Максимальный по лучам разброс v; для конусов v постоянна на лучах."""
    if im.ray_scale is None:
        raise PreconditionViolated(f"{im.name or 'immersion'} has no ray structure")
    rng = np.random.default_rng(seed)
    center = im.center()
    half = np.diff(im.box, axis=1).ravel() / 2.0
    scales = np.linspace(0.7, 1.4, ray_samples)
    worst = 0.0
    for _ in range(rays):
        base = center + rng.uniform(-0.2, 0.2, size=im.domain_dim) * half
        values = []
        for s in scales:
            point = im.ray_scale(base, s)
            step = im.step * s if im.ray_step_scales else im.step
            if not im.contains(point, 2.0 * step):
                continue
            w = gauss_w(patch_at(im, point, step), Q0)
            if w <= W_POSITIVE_TOL:
                raise NonPositiveW(f"w = {w:.3e} on the ray through {base}")
            values.append(1.0 / w)
        if len(values) > 1:
            worst = max(worst, float(np.max(values) - np.min(values)))
    logger.debug(f"SubmanifoldLab: conelike variation {worst:.3e} on {im.name}")
    return worst


def bernstein_probe(im: Immersion, points: Sequence[Sequence[float]], q0_samples: int = 8,
                    seed: int = 0) -> List[dict]:
    """
    Для каждого случайного Q0 считается минимум ⟨N, Q0⟩ по точкам.
    Только отрицательная проба: перебрать все Q0 нельзя.
    """
    rng = np.random.default_rng(seed)
    normals = [patch_at(im, p).normal_space() for p in points]
    records = []
    for k in range(q0_samples):
        q0 = random_subspace(im.ambient_dim, im.codim, rng)
        values = [w_inner(normal, q0).w for normal in normals]
        min_w = float(np.min(values))
        records.append({"q0_index": k, "min_w": min_w, "below_threshold": bool(min_w < BERNSTEIN_W_MIN)})
    return records


# === ALIGNED FRAMES ===

def aligned_sff_table(patch: ImmersedPatch, Q0: Subspace) -> SecondFundamentalFormTable:
    """h в согласованных базисах: нормали u_α, касательные v_i."""
    bases = aligned_bases(patch.normal_space(), Q0)
    tangent_change = patch.tangent_frame.T @ bases.v
    normal_change = patch.normal_frame.T @ bases.u
    h = np.einsum("ba,ki,bkl,lj->aij", normal_change, tangent_change, patch.sff, tangent_change)
    h = 0.5 * (h + h.transpose(0, 2, 1))
    lambdas = np.tan(bases.thetas[: bases.r])
    return SecondFundamentalFormTable(lambdas, h)


def aligned_tangent_frame(patch: ImmersedPatch, Q0: Subspace) -> np.ndarray:
    return aligned_bases(patch.normal_space(), Q0).v


def tangent_angle_report(patch: ImmersedPatch, Q0: Subspace, atol: float = 1e-9) -> dict:
    """Ненулевые углы Arg(N, Q0) и Arg(T, Q0^⊥) должны совпадать."""
    d_normal = jordan_decomposition(patch.normal_space(), Q0, CLUSTER_TOL)
    d_tangent = jordan_decomposition(patch.tangent_space(), complement(Q0), CLUSTER_TOL)

    def nonzero(d):
        angles = flat_angles(d)
        return np.sort(angles[np.cos(angles) ** 2 < 1.0 - CLUSTER_TOL])

    a, b = nonzero(d_normal), nonzero(d_tangent)
    deviation = float(np.max(np.abs(a - b), initial=0.0)) if a.shape == b.shape else float("inf")
    return {
        "normal_angles": a.tolist(), "tangent_angles": b.tolist(),
        "max_deviation": deviation, "consistent": bool(deviation <= atol),
    }


# === DIRECT LAPLACIAN ===

class _StencilV:
    """v и метрика в узлах шаблона; узлы кешируются."""

    def __init__(self, im: Immersion, Q0: Subspace, inner_step: float):
        self.im = im
        self.Q0 = Q0
        self.inner_step = inner_step
        self.cache = LRUCache(maxsize=CACHE_SIZE)

    def _evaluate(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        key = tuple(x.tolist())
        if key in self.cache:
            return self.cache[key]
        jac = _jacobian(self.im, x, self.inner_step)
        _, _, normal = _frames(jac)
        w = float(np.linalg.det(normal.T @ self.Q0.oriented_frame()))
        if w <= W_POSITIVE_TOL:
            raise NonPositiveW(f"w = {w:.3e} at stencil node {x}")
        value = (1.0 / w, jac.T @ jac)
        self.cache[key] = value
        return value

    def v(self, x: np.ndarray) -> float:
        return self._evaluate(x)[0]

    def metric(self, x: np.ndarray) -> np.ndarray:
        return self._evaluate(x)[1]


def laplacian_v_direct(im: Immersion, Q0: Subspace, x: Sequence[float], step: Optional[float] = None,
                       inner_step: float = JACOBIAN_STEP) -> float:
    """Δv = gⁱʲ∂ᵢ∂ⱼv + (1/√g)∂ᵢ(√g gⁱʲ)∂ⱼv центральными разностями."""
    x = np.asarray(x, dtype=float)
    step = im.step if step is None else step
    if Q0.dim != im.codim:
        raise DimensionMismatch(f"Q0 of dim {Q0.dim} vs codimension {im.codim}")
    _require_box(im, x, step + inner_step)

    stencil = _StencilV(im, Q0, inner_step)
    n = im.domain_dim
    basis = np.eye(n) * step
    v0 = stencil.v(x)
    grad = np.array([(stencil.v(x + basis[i]) - stencil.v(x - basis[i])) / (2.0 * step) for i in range(n)])
    hess = np.zeros((n, n))
    for i in range(n):
        hess[i, i] = (stencil.v(x + basis[i]) - 2.0 * v0 + stencil.v(x - basis[i])) / step ** 2
        for j in range(i + 1, n):
            hess[i, j] = hess[j, i] = (
                stencil.v(x + basis[i] + basis[j]) - stencil.v(x + basis[i] - basis[j])
                - stencil.v(x - basis[i] + basis[j]) + stencil.v(x - basis[i] - basis[j])
            ) / (4.0 * step ** 2)

    def weighted_inverse(p: np.ndarray) -> np.ndarray:
        g = stencil.metric(p)
        return np.sqrt(np.linalg.det(g)) * np.linalg.inv(g)

    g0 = stencil.metric(x)
    g_inv = np.linalg.inv(g0)
    sqrt_g = np.sqrt(np.linalg.det(g0))
    divergence = np.zeros(n)
    for i in range(n):
        d_i = (weighted_inverse(x + basis[i]) - weighted_inverse(x - basis[i])) / (2.0 * step)
        divergence += d_i[i, :]
    value = float(np.sum(g_inv * hess) + divergence @ grad / sqrt_g)
    logger.debug(f"SubmanifoldLab: Δv={value:.6e} at {x} ({len(stencil.cache)} stencil nodes)")
    return value


def log_gradient_w_direct(im: Immersion, Q0: Subspace, x: Sequence[float], step: Optional[float] = None,
                          inner_step: float = JACOBIAN_STEP) -> np.ndarray:
    """∇_{e_i} log w в согласованном касательном репере e_i = v_i."""
    x = np.asarray(x, dtype=float)
    step = im.step if step is None else step
    _require_box(im, x, step + inner_step)
    n = im.domain_dim
    coord_grad = np.zeros(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = step
        w_plus = _w_at(im, Q0, x + e, inner_step)
        w_minus = _w_at(im, Q0, x - e, inner_step)
        if min(w_plus, w_minus) <= W_POSITIVE_TOL:
            raise NonPositiveW(f"w is not positive near {x}")
        coord_grad[i] = (np.log(w_plus) - np.log(w_minus)) / (2.0 * step)
    patch = patch_at(im, x, step)
    frame = aligned_tangent_frame(patch, Q0)
    coefficients = np.linalg.solve(patch.metric, patch.jacobian.T @ frame)
    return coord_grad @ coefficients


def laplacian_v_bridge(im: Immersion, Q0: Subspace, x: Sequence[float], step: Optional[float] = None) -> dict:
    """Сравнение прямого Δv с v · v⁻¹Δv по согласованной таблице h."""
    patch = patch_at(im, x, step)
    w = gauss_w(patch, Q0)
    if w <= W_POSITIVE_TOL:
        raise NonPositiveW(f"w = {w:.3e} at {x}")
    table = aligned_sff_table(patch, Q0)
    quadratic = (1.0 / w) * laplacian_v_quadratic(table)
    direct = laplacian_v_direct(im, Q0, x, step)
    return {"v": 1.0 / w, "direct": direct, "quadratic": quadratic, "difference": abs(direct - quadratic)}


# === CODAZZI ===

def _normal_hessian(im: Immersion, x: np.ndarray, step: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """B(∂ᵢ, ∂ⱼ) как векторы ℝ^N, проектор на нормали и гессиан."""
    jac = _jacobian(im, x, step)
    metric = jac.T @ jac
    normal_projector = np.eye(im.ambient_dim) - jac @ np.linalg.solve(metric, jac.T)
    hess = _hessian(im, x, step)
    return np.einsum("pq,ijq->ijp", normal_projector, hess), normal_projector, hess


def codazzi_residual(im: Immersion, x: Sequence[float], step: Optional[float] = None) -> float:
    """
    max |(∇_{e_k}B)(e_i, e_j) − (∇_{e_i}B)(e_k, e_j)| в ортонормированном репере.
    Первая разность от второй производной: порядок не ниже первого по step.
    """
    x = np.asarray(x, dtype=float)
    step = im.step if step is None else step
    _require_box(im, x, 2.0 * step)
    n = im.domain_dim

    b0, projector, hess = _normal_hessian(im, x, step)
    jac = _jacobian(im, x, step)
    metric = jac.T @ jac
    # Γ^l_{ki} = g^{lm} ⟨∂k∂iF, ∂mF⟩
    christoffel = np.einsum("lm,kiq,qm->lki", np.linalg.inv(metric), hess, jac)

    basis = np.eye(n) * step
    cov = np.zeros((n, n, n, im.ambient_dim))  # cov[k, i, j] = (∇_k B)_{ij}
    for k in range(n):
        b_plus, _, _ = _normal_hessian(im, x + basis[k], step)
        b_minus, _, _ = _normal_hessian(im, x - basis[k], step)
        d_k = np.einsum("pq,ijq->ijp", projector, (b_plus - b_minus) / (2.0 * step))
        cov[k] = (d_k
                  - np.einsum("li,ljp->ijp", christoffel[:, k, :], b0)
                  - np.einsum("lj,ilp->ijp", christoffel[:, k, :], b0))

    _, r_factor, _ = _frames(jac)
    r_inv = np.linalg.inv(r_factor)
    cov_frame = np.einsum("ka,ib,jc,kijp->abcp", r_inv, r_inv, r_inv, cov)
    diff = cov_frame - cov_frame.transpose(1, 0, 2, 3)
    return float(np.max(np.linalg.norm(diff, axis=-1), initial=0.0))
