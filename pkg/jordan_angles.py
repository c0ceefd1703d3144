"""
Углы Жордана (главные углы) между подпространствами.

Углы считаются по сингулярным значениям перекрёстной матрицы Грама
ортонормированных реперов; малые углы уточняются через синусы
(SVD перекрёстной матрицы с дополнением Q0^⊥). Кратности определяются
кластеризацией cos²θ с допуском cluster_tol.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
import scipy.linalg

from config import CLUSTER_TOL, GUARD_BAND, PHI_FORMULA_MIN, W_POSITIVE_TOL
from exceptions import (
    ClusterOutOfRange, DegenerateAngle, DimensionMismatch, NonPositiveW,
)
from subspace_core import Subspace, complement

logger = logging.getLogger(__name__)

AngleMultiset = List[Tuple[float, int]]


@dataclass(frozen=True, eq=False)
class AngleCluster:
    """Угол θ, его кратность и репер пространства углов P_θ."""

    theta: float
    multiplicity: int
    frame: np.ndarray          # направления углов в P (столбцы)
    partner_frame: np.ndarray  # ε = sec θ·𝒫₀u в Q0; нули при θ = π/2
    member_thetas: np.ndarray  # углы до усреднения, в порядке столбцов frame


@dataclass(frozen=True, eq=False)
class JordanAngleDecomposition:
    P: Subspace
    Q0: Subspace
    clusters: Tuple[AngleCluster, ...]
    tolerance: float

    @property
    def multiplicities(self) -> List[int]:
        return [c.multiplicity for c in self.clusters]

    def as_multiset(self) -> AngleMultiset:
        return [(c.theta, c.multiplicity) for c in self.clusters]

    def is_zero_cluster(self, cluster: AngleCluster) -> bool:
        return np.cos(cluster.theta) ** 2 >= 1.0 - self.tolerance

    def nonzero_clusters(self) -> List[AngleCluster]:
        return [c for c in self.clusters if not self.is_zero_cluster(c)]

    @property
    def r(self) -> int:
        """Число ненулевых углов с учётом кратности."""
        return sum(c.multiplicity for c in self.nonzero_clusters())

    @property
    def zero_multiplicity(self) -> int:
        return self.P.dim - self.r


def _cross_gram_angles(P: Subspace, Q0: Subspace):
    """
    Углы (по возрастанию), направления в P и парные векторы в Q0.

    Косинусы дают точность для больших углов, синусы для малых.
    """
    k, l = P.dim, Q0.dim
    c = P.frame.T @ Q0.frame
    y, sigma, zt = np.linalg.svd(c, full_matrices=True)
    cos_vals = np.zeros(k)
    cos_vals[: len(sigma)] = np.clip(sigma, 0.0, 1.0)

    sin_desc = np.zeros(k)
    if l < Q0.ambient_dim:
        q_perp = complement(Q0)
        s = np.linalg.svd(P.frame.T @ q_perp.frame, compute_uv=False)
        sin_desc[: len(s)] = np.clip(s, 0.0, 1.0)
    sin_asc = sin_desc[::-1]

    theta = np.where(cos_vals ** 2 >= 0.5, np.arcsin(sin_asc), np.arccos(cos_vals))
    directions = P.frame @ y
    partners = np.zeros((P.ambient_dim, k))
    z = zt.T
    for j in range(min(k, l)):
        if sigma[j] > 0.0:
            partners[:, j] = Q0.frame @ z[:, j]
    return theta, directions, partners


def jordan_decomposition(P: Subspace, Q0: Subspace, cluster_tol: float = CLUSTER_TOL) -> JordanAngleDecomposition:
    """
    Разложение P на пространства углов относительно Q0.

    Собственные значения 𝒫∘𝒫₀ на P, отличающиеся меньше чем на cluster_tol
    (в шкале cos²θ), объединяются в один кластер. Кластеры идут по убыванию θ.
    """
    if P.ambient_dim != Q0.ambient_dim:
        raise DimensionMismatch(f"ambient dimensions differ: {P.ambient_dim} vs {Q0.ambient_dim}")
    if cluster_tol <= 0:
        raise ValueError("cluster_tol must be positive")

    theta, directions, partners = _cross_gram_angles(P, Q0)
    order = np.arange(len(theta))[::-1]  # SVD даёт углы по возрастанию
    mu = np.cos(theta) ** 2

    groups: List[List[int]] = []
    for idx in order:
        if groups and abs(mu[idx] - mu[groups[-1][-1]]) <= cluster_tol:
            groups[-1].append(idx)
        else:
            groups.append([idx])

    clusters = []
    for group in groups:
        members = sorted(group)  # внутри кластера порядок сингулярных векторов
        clusters.append(AngleCluster(
            theta=float(np.mean(theta[members])),
            multiplicity=len(members),
            frame=directions[:, members],
            partner_frame=partners[:, members],
            member_thetas=theta[members],
        ))
    logger.debug(
        f"JordanAngles: {len(clusters)} clusters, "
        f"multiplicities={[c.multiplicity for c in clusters]}"
    )
    return JordanAngleDecomposition(P=P, Q0=Q0, clusters=tuple(clusters), tolerance=cluster_tol)


def flat_angles(decomposition: JordanAngleDecomposition) -> np.ndarray:
    """Все углы с учётом кратности, по убыванию."""
    if not decomposition.clusters:
        return np.zeros(0)
    values = np.concatenate([c.member_thetas for c in decomposition.clusters])
    return np.sort(values)[::-1]


# === LEMMA-LEVEL STRUCTURE ===

@dataclass
class SymmetryReport:
    arg_p_q: AngleMultiset
    arg_q_p: AngleMultiset
    arg_perp: AngleMultiset       # Arg(P^⊥, Q0^⊥)
    arg_perp_rev: AngleMultiset   # Arg(Q0^⊥, P^⊥)
    m: int
    n: int
    r: int
    m0: int
    m0_perp: int
    tolerance: float = field(default=CLUSTER_TOL)

    @staticmethod
    def _flatten(ms: AngleMultiset, nonzero_only: bool = False, zero_tol: float = 0.0) -> np.ndarray:
        values = []
        for theta, mult in ms:
            if nonzero_only and np.cos(theta) ** 2 >= 1.0 - zero_tol:
                continue
            values.extend([theta] * mult)
        return np.sort(np.array(values))

    def violations(self, atol: float = 1e-9) -> List[str]:
        """Список нарушенных равенств (пустой, если всё согласовано)."""
        problems = []
        a = self._flatten(self.arg_p_q)
        b = self._flatten(self.arg_q_p)
        if a.shape != b.shape or np.max(np.abs(a - b), initial=0.0) > atol:
            problems.append("Arg(P,Q0) != Arg(Q0,P)")
        a_nz = self._flatten(self.arg_p_q, True, self.tolerance)
        c_nz = self._flatten(self.arg_perp, True, self.tolerance)
        if a_nz.shape != c_nz.shape or np.max(np.abs(a_nz - c_nz), initial=0.0) > atol:
            problems.append("nonzero parts of Arg(P,Q0) and Arg(P^⊥,Q0^⊥) differ")
        c = self._flatten(self.arg_perp)
        d = self._flatten(self.arg_perp_rev)
        if c.shape != d.shape or np.max(np.abs(c - d), initial=0.0) > atol:
            problems.append("Arg(P^⊥,Q0^⊥) != Arg(Q0^⊥,P^⊥)")
        if self.m0 != self.m - self.r:
            problems.append(f"m0={self.m0} != m - r = {self.m - self.r}")
        if self.m0_perp != self.n - self.r:
            problems.append(f"m0_perp={self.m0_perp} != n - r = {self.n - self.r}")
        return problems


def symmetry_report(P: Subspace, Q0: Subspace, cluster_tol: float = CLUSTER_TOL) -> SymmetryReport:
    if P.ambient_dim != Q0.ambient_dim:
        raise DimensionMismatch(f"ambient dimensions differ: {P.ambient_dim} vs {Q0.ambient_dim}")
    p_perp, q_perp = complement(P), complement(Q0)
    d_pq = jordan_decomposition(P, Q0, cluster_tol)
    d_qp = jordan_decomposition(Q0, P, cluster_tol)
    d_perp = jordan_decomposition(p_perp, q_perp, cluster_tol)
    d_perp_rev = jordan_decomposition(q_perp, p_perp, cluster_tol)
    return SymmetryReport(
        arg_p_q=d_pq.as_multiset(),
        arg_q_p=d_qp.as_multiset(),
        arg_perp=d_perp.as_multiset(),
        arg_perp_rev=d_perp_rev.as_multiset(),
        m=P.dim,
        n=P.ambient_dim - P.dim,
        r=d_pq.r,
        m0=d_pq.zero_multiplicity,
        m0_perp=d_perp.zero_multiplicity,
        tolerance=cluster_tol,
    )


def r_theta(P: Subspace, Q0: Subspace, cluster_index: int, cluster_tol: float = CLUSTER_TOL) -> Subspace:
    """R_θ = P_θ + (Q0)_θ для кластера с данным номером."""
    d_pq = jordan_decomposition(P, Q0, cluster_tol)
    if not 0 <= cluster_index < len(d_pq.clusters):
        raise ClusterOutOfRange(f"cluster {cluster_index} of {len(d_pq.clusters)}")
    cluster = d_pq.clusters[cluster_index]
    d_qp = jordan_decomposition(Q0, P, cluster_tol)
    match = min(d_qp.clusters, key=lambda c: abs(np.cos(c.theta) ** 2 - np.cos(cluster.theta) ** 2))
    span = scipy.linalg.orth(np.hstack([cluster.frame, match.frame]))
    return Subspace(scipy.linalg.qr(span, mode="economic")[0])


@dataclass(frozen=True, eq=False)
class AntiInvolution:
    """Φ_θ на R_θ = P_θ ⊕ P_θ^⊥ в репере [u₁..u_k, v₁..v_k]."""

    theta: float
    domain: Subspace
    matrix: np.ndarray
    p_frame: np.ndarray
    perp_frame: np.ndarray
    used_formula: bool

    def apply(self, xi: np.ndarray) -> np.ndarray:
        coords = self.domain.frame.T @ np.asarray(xi, dtype=float)
        return self.domain.frame @ (self.matrix @ coords)


def _perp_partner(P: Subspace, u: np.ndarray, eps: np.ndarray, theta: float, use_formula: bool) -> np.ndarray:
    """v = Φ_θ(u) = −sec θ csc θ (𝒫^⊥∘𝒫₀)u, либо нормированное −𝒫^⊥ε."""
    if use_formula:
        p0u = eps * np.cos(theta)
        w = p0u - P.frame @ (P.frame.T @ p0u)
        return -w / (np.cos(theta) * np.sin(theta))
    w = eps - P.frame @ (P.frame.T @ eps)
    return -w / np.linalg.norm(w)


def anti_involution(P: Subspace, Q0: Subspace, theta_cluster_index: int,
                    cluster_tol: float = CLUSTER_TOL) -> AntiInvolution:
    """
    Антиинволютивный автоморфизм Φ_θ выбранного кластера.

    В хорошо обусловленном режиме (sinθ·cosθ ≥ PHI_FORMULA_MIN) используется
    проекционная формула, иначе согласованные пары сингулярных векторов.
    """
    decomposition = jordan_decomposition(P, Q0, cluster_tol)
    if not 0 <= theta_cluster_index < len(decomposition.clusters):
        raise ClusterOutOfRange(
            f"cluster {theta_cluster_index} of {len(decomposition.clusters)}"
        )
    cluster = decomposition.clusters[theta_cluster_index]
    theta = cluster.theta
    if np.sin(theta) < GUARD_BAND or np.cos(theta) < GUARD_BAND:
        raise DegenerateAngle(f"θ={theta:.3e} is within the guard band of 0 or π/2")

    use_formula = np.sin(theta) * np.cos(theta) >= PHI_FORMULA_MIN
    if not use_formula:
        logger.warning(f"JordanAngles: near-degenerate θ={theta:.3e}, building Φ from singular vectors")

    u = cluster.frame
    perp = np.column_stack([
        _perp_partner(P, u[:, j], cluster.partner_frame[:, j], cluster.member_thetas[j], use_formula)
        for j in range(cluster.multiplicity)
    ])
    # симметричная ортонормализация: минимальная поправка к v
    perp, _ = scipy.linalg.polar(perp)
    k = cluster.multiplicity
    identity = np.eye(k)
    zeros = np.zeros((k, k))
    matrix = np.block([[zeros, -identity], [identity, zeros]])
    domain = Subspace(np.hstack([u, perp]))
    return AntiInvolution(
        theta=theta, domain=domain, matrix=matrix,
        p_frame=u, perp_frame=perp, used_formula=bool(use_formula),
    )


def anti_involution_residuals(phi: AntiInvolution, P: Subspace, Q0: Subspace) -> dict:
    """Невязки свойств (i)–(iv) для Φ_θ."""
    theta = phi.theta
    k = phi.p_frame.shape[1]
    frame = phi.domain.frame
    full = frame @ phi.matrix @ frame.T
    p_proj = P.projector()
    q_proj = Q0.projector()
    q_perp = np.eye(P.ambient_dim) - q_proj

    images = full @ frame
    isometry = np.max(np.abs(np.linalg.norm(images, axis=0) - np.linalg.norm(frame, axis=0)))
    isometry = max(isometry, np.max(np.abs(phi.matrix.T @ phi.matrix - np.eye(2 * k))))
    square = np.max(np.abs(full @ full @ frame + frame))
    phi_u = full @ phi.p_frame
    phi_v = full @ phi.perp_frame
    swap = max(np.max(np.abs(p_proj @ phi_u)), np.max(np.abs(phi_v - p_proj @ phi_v)))
    sec = 1.0 / np.cos(theta)
    formula_u = sec * (q_proj @ phi.p_frame) - (np.cos(theta) * phi.p_frame - np.sin(theta) * phi_u)
    formula_v = sec * (q_perp @ phi.perp_frame) - (np.cos(theta) * phi.perp_frame - np.sin(theta) * phi_v)
    # допуск формул зависит от разброса углов внутри кластера
    return {
        "isometry": float(isometry),
        "square_plus_identity": float(square),
        "swap": float(swap),
        "formula": float(max(np.max(np.abs(formula_u)), np.max(np.abs(formula_v)))),
    }


# === ALIGNED BASES ===

@dataclass(frozen=True, eq=False)
class AlignedBases:
    eps: np.ndarray     # N×m, базис Q0
    u: np.ndarray       # N×m, базис P
    v: np.ndarray       # N×n, базис P^⊥
    thetas: np.ndarray  # длина max(m, n); θ_i = 0 при i ≥ m
    r: int

    def residuals(self, Q0: Subspace) -> dict:
        m = self.u.shape[1]
        n = self.v.shape[1]
        q_proj = Q0.projector()
        res_u = q_proj @ self.u - self.eps * np.cos(self.thetas[:m])
        eps_padded = np.zeros((self.u.shape[0], n))
        cols = min(m, n)
        eps_padded[:, :cols] = self.eps[:, :cols]
        res_v = q_proj @ self.v + eps_padded * np.sin(self.thetas[:n])
        return {
            "P0u": float(np.max(np.abs(res_u), initial=0.0)),
            "P0v": float(np.max(np.abs(res_v), initial=0.0)),
        }


def aligned_bases(P: Subspace, Q0: Subspace, cluster_tol: float = CLUSTER_TOL) -> AlignedBases:
    """
    Согласованные базисы ε (Q0), u (P), v (P^⊥):
    𝒫₀u_α = cosθ_α ε_α, 𝒫₀v_i = −sinθ_i ε_i, v_α = Φ_{θ_α}(u_α).
    """
    from pluecker_w import w_inner

    if P.dim != Q0.dim:
        raise DimensionMismatch(f"dim P = {P.dim} but dim Q0 = {Q0.dim}")
    w = w_inner(P, Q0).w
    if w <= W_POSITIVE_TOL:
        raise NonPositiveW(f"w(P, Q0) = {w:.3e} is not positive")

    decomposition = jordan_decomposition(P, Q0, cluster_tol)
    m = P.dim
    n = P.ambient_dim - m

    u_cols, eps_cols, thetas, nonzero = [], [], [], []
    for cluster in decomposition.clusters:
        is_zero = decomposition.is_zero_cluster(cluster)
        for j in range(cluster.multiplicity):
            u_cols.append(cluster.frame[:, j])
            eps_cols.append(cluster.partner_frame[:, j])
            thetas.append(0.0 if is_zero else float(cluster.member_thetas[j]))
            nonzero.append(not is_zero)
    u = np.column_stack(u_cols)
    eps = np.column_stack(eps_cols)
    r = int(sum(nonzero))

    if np.linalg.det(P.oriented_frame().T @ u) < 0:
        u[:, -1] = -u[:, -1]
        eps[:, -1] = -eps[:, -1]
    if np.linalg.det(Q0.oriented_frame().T @ eps) < 0:
        logger.warning("JordanAngles: ε-basis came out negatively oriented despite w > 0")

    v_cols = []
    for alpha in range(r):
        use_formula = np.sin(thetas[alpha]) * np.cos(thetas[alpha]) >= PHI_FORMULA_MIN
        v_cols.append(_perp_partner(P, u[:, alpha], eps[:, alpha], thetas[alpha], use_formula))
    if v_cols:
        v_head, _ = scipy.linalg.polar(np.column_stack(v_cols))
    else:
        v_head = np.zeros((P.ambient_dim, 0))
    if n > r:
        tail = scipy.linalg.null_space(np.hstack([u, v_head]).T)
        v = np.hstack([v_head, tail])
    else:
        v = v_head

    padded = np.zeros(max(m, n))
    padded[:m] = thetas
    logger.debug(f"JordanAngles: aligned bases with r={r}, m={m}, n={n}")
    return AlignedBases(eps=eps, u=u, v=v, thetas=padded, r=r)


# === DIAGNOSTICS ===

@dataclass
class PathDiagnostic:
    steps: int
    max_angle_jump: float
    multiplicity_changes: int


def cluster_path_diagnostic(path: Sequence[Tuple[Subspace, Subspace]],
                            cluster_tol: float = CLUSTER_TOL) -> PathDiagnostic:
    """
    Непрерывность кластеров вдоль дискретного пути (P_t, Q0_t).
    Только диагностика: количественного модуля непрерывности нет.
    """
    prev_angles, prev_mults = None, None
    max_jump, changes = 0.0, 0
    for P, Q0 in path:
        d = jordan_decomposition(P, Q0, cluster_tol)
        angles = flat_angles(d)
        mults = tuple(d.multiplicities)
        if prev_angles is not None:
            max_jump = max(max_jump, float(np.max(np.abs(angles - prev_angles), initial=0.0)))
            if mults != prev_mults:
                changes += 1
        prev_angles, prev_mults = angles, mults
    return PathDiagnostic(steps=len(path), max_angle_jump=max_jump, multiplicity_changes=changes)
