"""
Алгебра квадратичной формы v⁻¹Δv по коэффициентам второй фундаментальной формы.

Все индексы нумеруются с нуля: h[α, i, j] = ⟨B(e_i, e_j), ν_α⟩, нормали
α < r и касательные i < r спарены с ненулевыми углами, λ_α = tg θ_α.

Группировка суммы:
    v⁻¹Δv = Σ_{i,j≥r} |h_{·,ij}|²   (плоская часть)
          + Σ_{α≥r} Σ_{(i,j) ⊄ [r,n)²} h²_{α,ij}   (нормали с нулевым углом)
          + Σ_{i≥r} I_i + Σ_{i≥r, α<β} II + Σ_{α<β<γ} III + Σ_α IV_α
"""
import enum
import logging
from dataclasses import asdict, dataclass, field
from itertools import combinations, product
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.optimize

from config import AUSTERE_TOL, CERT_TOL, DEFAULT_DENSITY, EPS0_MAX_R
from exceptions import DimensionMismatch, PreconditionViolated, RegionViolation

logger = logging.getLogger(__name__)

THETA0 = float(np.arctan(np.sqrt(2.0)))
SQRT2 = float(np.sqrt(2.0))
LAMBDA_MAX = float(np.sqrt(8.0))  # при r = 1 условие v ≤ 3 даёт λ ≤ √8
REGION_SLACK = 1e-9
BOUND_FLOOR = 1e-9
AUSTERE_RANDOM_DIRECTIONS = 64
AUSTERE_DIRECTION_SEED = 20240101
REJECTION_ATTEMPTS = 10_000


# === TYPES ===

@dataclass(frozen=True, eq=False)
class SecondFundamentalFormTable:
    """Коэффициенты h[α, i, j] (m×n×n) и λ₁ ≥ … ≥ λ_r > 0."""

    lambdas: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        lambdas = np.array(self.lambdas, dtype=float).reshape(-1)
        h = np.array(self.h, dtype=float)
        if h.ndim != 3 or h.shape[1] != h.shape[2]:
            raise DimensionMismatch(f"h must have shape (m, n, n), got {h.shape}")
        m, n = h.shape[0], h.shape[1]
        r = len(lambdas)
        if r > min(m, n):
            raise DimensionMismatch(f"r={r} exceeds min(m, n)={min(m, n)}")
        if np.any(lambdas <= 0):
            raise ValueError("lambdas must be strictly positive")
        if np.any(np.diff(lambdas) > 1e-9 * max(1.0, float(np.max(lambdas, initial=0.0)))):
            raise ValueError("lambdas must be in descending order")
        scale = max(1.0, float(np.max(np.abs(h), initial=0.0)))
        if np.max(np.abs(h - h.transpose(0, 2, 1)), initial=0.0) > 1e-12 * scale:
            raise ValueError("h must be symmetric in (i, j)")
        h = 0.5 * (h + h.transpose(0, 2, 1))
        lambdas.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "h", h)

    @property
    def m(self) -> int:
        return self.h.shape[0]

    @property
    def n(self) -> int:
        return self.h.shape[1]

    @property
    def r(self) -> int:
        return len(self.lambdas)

    def norm_sq(self) -> float:
        """|B|²"""
        return float(np.sum(self.h ** 2))

    def v_squared(self) -> float:
        return float(np.prod(1.0 + self.lambdas ** 2))


@dataclass(frozen=True)
class RegionPoint:
    """Точка области Ω = {u > 3 > v ≥ w > 1, uvw ≤ 9}."""

    u: float
    v: float
    w: float

    def __post_init__(self):
        if not (self.u > 3.0 > self.v >= self.w > 1.0):
            raise RegionViolation(f"({self.u}, {self.v}, {self.w}) violates u > 3 > v ≥ w > 1")
        if self.u * self.v * self.w > 9.0 * (1.0 + 1e-12):
            raise RegionViolation(f"uvw = {self.u * self.v * self.w} exceeds 9")


@dataclass
class Certificate:
    """Запись сертификата; сериализуется в JSON отчёта."""

    lemma: str
    samples: int
    seed: Optional[int]
    extremal_value: float
    argext: dict
    tolerance: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["pass"] = data.pop("passed")
        return data


class ChunkExtremum(NamedTuple):
    value: float
    argext: dict
    count: int


def sample_chunks(samples: int, seed: int, chunk_size: int = 2048) -> List[Tuple[int, np.random.SeedSequence]]:
    """
    Разбиение выборки на куски с независимыми потоками ГПСЧ.
    Разбиение зависит только от (samples, seed), но не от числа потоков.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    counts = [chunk_size] * (samples // chunk_size)
    if samples % chunk_size:
        counts.append(samples % chunk_size)
    children = np.random.SeedSequence(seed).spawn(len(counts))
    return list(zip(counts, children))


def merge_minima(parts: Sequence[ChunkExtremum]) -> ChunkExtremum:
    best = min(parts, key=lambda p: p.value)
    return ChunkExtremum(best.value, best.argext, sum(p.count for p in parts))


# === TERMS ===

def term_I(lambdas: Sequence[float], h_col: Sequence[float]) -> float:
    """I_i = Σ(2+2λ_α²)h_{α,iα}² + Σ_{α≠β} λ_αλ_β h_{α,iα}h_{β,iβ}."""
    lam = np.asarray(lambdas, dtype=float)
    h = np.asarray(h_col, dtype=float)
    if lam.shape != h.shape or lam.ndim != 1:
        raise DimensionMismatch(f"lambdas {lam.shape} and h_col {h.shape} must be equal 1-d shapes")
    if len(lam) < 1:
        raise DimensionMismatch("term I needs r >= 1")
    weighted = lam * h
    cross = np.sum(weighted) ** 2 - np.sum(weighted ** 2)
    return float(np.sum((2.0 + 2.0 * lam ** 2) * h ** 2) + cross)


def term_II(lam_a: float, lam_b: float, h_ab: float, h_ba: float) -> float:
    return 2.0 * h_ab ** 2 + 2.0 * h_ba ** 2 + 2.0 * lam_a * lam_b * h_ab * h_ba


def term_III(a: float, b: float, c: float, x: float, y: float, z: float) -> float:
    return (2.0 * (x ** 2 + y ** 2 + z ** 2)
            + 2.0 * a * b * x * y + 2.0 * b * c * y * z + 2.0 * c * a * z * x)


def term_III_matrix(a: float, b: float, c: float) -> np.ndarray:
    return np.array([
        [2.0, a * b, c * a],
        [a * b, 2.0, b * c],
        [c * a, b * c, 2.0],
    ])


def term_IV(lambdas: Sequence[float], alpha: int, h_block: np.ndarray) -> float:
    """
    IV_α по блоку h_block[β, i, j] (β, i, j < r).

    (1+2λ_α²)h_{α,αα}² + Σ_{β≠α}(h_{α,ββ}² + (2+2λ_β²)h_{β,αβ}²)
    + Σ_{β≠γ} λ_βλ_γ h_{β,αβ}h_{γ,αγ} + 2Σ_{β≠α} λ_αλ_β h_{α,ββ}h_{β,αβ}
    """
    lam = np.asarray(lambdas, dtype=float)
    block = np.asarray(h_block, dtype=float)
    r = len(lam)
    if block.shape != (r, r, r):
        raise DimensionMismatch(f"h_block must have shape ({r}, {r}, {r}), got {block.shape}")
    if not 0 <= alpha < r:
        raise IndexError(f"alpha={alpha} outside [0, {r})")
    c = np.array([block[beta, alpha, beta] for beta in range(r)])
    value = (1.0 + 2.0 * lam[alpha] ** 2) * block[alpha, alpha, alpha] ** 2
    weighted = lam * c
    value += np.sum(weighted) ** 2 - np.sum(weighted ** 2)
    for beta in range(r):
        if beta == alpha:
            continue
        a_beta = block[alpha, beta, beta]
        value += a_beta ** 2 + (2.0 + 2.0 * lam[beta] ** 2) * c[beta] ** 2
        value += 2.0 * lam[alpha] * lam[beta] * a_beta * c[beta]
    return float(value)


def iv_matrix(lambdas: Sequence[float], alpha: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Матрицы форм IV_α и знаменателя в переменных
    z = (h_{α,αα}, h_{α,ββ} (β≠α), h_{β,αβ} (β≠α)).
    """
    lam = np.asarray(lambdas, dtype=float)
    r = len(lam)
    others = [beta for beta in range(r) if beta != alpha]
    dim = 1 + 2 * len(others)
    # индексы переменных c_β = h_{β,αβ}
    c_index = {alpha: 0}
    for k, beta in enumerate(others):
        c_index[beta] = 1 + len(others) + k

    mat = np.zeros((dim, dim))
    mat[0, 0] = 1.0 + 2.0 * lam[alpha] ** 2
    for k, beta in enumerate(others):
        a_idx, c_idx = 1 + k, c_index[beta]
        mat[a_idx, a_idx] = 1.0
        mat[c_idx, c_idx] = 2.0 + 2.0 * lam[beta] ** 2
        mat[a_idx, c_idx] = mat[c_idx, a_idx] = lam[alpha] * lam[beta]
    for beta, gamma in product(range(r), repeat=2):
        if beta != gamma:
            mat[c_index[beta], c_index[gamma]] += lam[beta] * lam[gamma]
    denom = np.diag([1.0] + [1.0] * len(others) + [2.0] * len(others))
    return mat, denom


# === GROUPED SUM ===

def grouped_terms(T: SecondFundamentalFormTable) -> dict:
    """Суммы по группам разложения v⁻¹Δv."""
    h, lam, r, n, m = T.h, T.lambdas, T.r, T.n, T.m
    tail = slice(r, n)
    flat = float(np.sum(h[:, tail, tail] ** 2))
    flat_normal = float(np.sum(h[r:] ** 2) - np.sum(h[r:, tail, tail] ** 2))

    sum_I = sum_II = sum_III = sum_IV = 0.0
    if r > 0:
        for i in range(r, n):
            sum_I += term_I(lam, [h[alpha, i, alpha] for alpha in range(r)])
            for a, b in combinations(range(r), 2):
                sum_II += term_II(lam[a], lam[b], h[a, i, b], h[b, i, a])
        for a, b, c in combinations(range(r), 3):
            sum_III += term_III(lam[a], lam[b], lam[c], h[a, b, c], h[b, c, a], h[c, a, b])
        block = h[:r, :r, :r]
        for alpha in range(r):
            sum_IV += term_IV(lam, alpha, block)
    return {
        "flat": flat, "flat_normal": flat_normal,
        "I": sum_I, "II": sum_II, "III": sum_III, "IV": sum_IV,
    }


def laplacian_v_quadratic(T: SecondFundamentalFormTable) -> float:
    """
    Полная сгруппированная сумма v⁻¹Δv. Знак гарантирован только при
    Π(1+λ²) ≤ 9; вне этой области значение просто вычисляется.
    """
    if T.v_squared() > 9.0 + REGION_SLACK:
        logger.debug(f"CurvatureAlgebra: v²={T.v_squared():.4f} outside the v ≤ 3 regime")
    return float(sum(grouped_terms(T).values()))


def laplacian_v_ungrouped(T: SecondFundamentalFormTable) -> float:
    """|B|² + 2Σλ_α²h_{α,iα}² + Σ_iΣ_{α≠β}λ_αλ_β(h_{α,iα}h_{β,iβ} + h_{α,iβ}h_{β,iα})."""
    h, lam, r = T.h, T.lambdas, T.r
    total = T.norm_sq()
    if r == 0:
        return total
    diag = np.stack([h[alpha, :, alpha] for alpha in range(r)])  # diag[α, i] = h_{α,iα}
    total += 2.0 * float(np.sum((lam[:, None] ** 2) * diag ** 2))
    for a, b in product(range(r), repeat=2):
        if a == b:
            continue
        total += lam[a] * lam[b] * float(np.sum(diag[a] * diag[b] + h[a, :, b] * h[b, :, a]))
    return float(total)


def log_gradient_w(T: SecondFundamentalFormTable) -> np.ndarray:
    """w⁻¹∇_{e_i}w = Σ_α λ_α h_{α,iα}."""
    grad = np.zeros(T.n)
    for alpha in range(T.r):
        grad += T.lambdas[alpha] * T.h[alpha, :, alpha]
    return grad


# === REGION Ω ===

def region_f(p: RegionPoint) -> float:
    if not isinstance(p, RegionPoint):
        p = RegionPoint(*p)
    return 1.0 / (3.0 - p.u) + 1.0 / (3.0 - p.v) + 1.0 / (3.0 - p.w)


def region_f_corner(eps: float) -> float:
    """Значение f в максимуме компактной подобласти Ω_ε."""
    if eps <= 0:
        raise RegionViolation("eps must be positive")
    return region_f(RegionPoint(9.0 / (1.0 + eps) ** 2, 1.0 + eps, 1.0 + eps))


def _f_on_constraint(vw: np.ndarray) -> float:
    # f возрастает по u, поэтому максимум при u = 9/(vw)
    v, w = float(vw[0]), float(vw[1])
    if v * w >= 3.0:
        return -np.inf
    u = 9.0 / (v * w)
    return 1.0 / (3.0 - u) + 1.0 / (3.0 - v) + 1.0 / (3.0 - w)


def scan_region_f(grid_density: int) -> Tuple[float, RegionPoint]:
    """Сетка по (v, w) на ограничении uvw = 9 плюс уточнение L-BFGS-B."""
    if grid_density < 10:
        raise ValueError("grid_density must be >= 10")
    nodes = np.linspace(1.0 + BOUND_FLOOR, 3.0, grid_density + 1)[:-1]
    best_val, best_vw = -np.inf, None
    for i, v in enumerate(nodes):
        for w in nodes[: i + 1]:
            val = _f_on_constraint(np.array([v, w]))
            if val > best_val:
                best_val, best_vw = val, np.array([v, w])

    result = scipy.optimize.minimize(
        lambda vw: -_f_on_constraint(vw) if np.isfinite(_f_on_constraint(vw)) else 1e6,
        best_vw,
        method="L-BFGS-B",
        bounds=[(1.0 + BOUND_FLOOR, 3.0 - BOUND_FLOOR)] * 2,
    )
    refined = _f_on_constraint(result.x)
    if np.isfinite(refined) and refined > best_val:
        best_val, best_vw = refined, result.x

    v, w = sorted(best_vw, reverse=True)
    point = RegionPoint(9.0 / (v * w), v, w)
    logger.debug(f"CurvatureAlgebra: scan_region_f density={grid_density}, max={best_val:.12f}")
    return float(best_val), point


# === LAMBDA REGION AND SAMPLING ===

def in_lambda_region(lambdas: Sequence[float], v_max: float = 3.0) -> bool:
    lam = np.asarray(lambdas, dtype=float)
    return bool(np.prod(1.0 + lam ** 2) <= v_max ** 2 + REGION_SLACK)


def _sample_lambdas(rng: np.random.Generator, r: int, v_max: float) -> np.ndarray:
    upper = np.sqrt(v_max ** 2 - 1.0)
    for _ in range(REJECTION_ATTEMPTS):
        lam = rng.uniform(0.0, upper, size=r)
        if np.all(lam > 0) and np.prod(1.0 + lam ** 2) <= v_max ** 2:
            return np.sort(lam)[::-1]
    logger.warning(f"CurvatureAlgebra: λ rejection budget exhausted for r={r}, v_max={v_max}")
    # равные углы на границе области
    return np.full(r, np.sqrt(v_max ** (2.0 / r) - 1.0)) if r else np.zeros(0)


def sample_table(rng: np.random.Generator, n: int, m: int, r: int, v_max: float = 3.0) -> SecondFundamentalFormTable:
    """h_{α,ij} ~ U[−1, 1], симметризация; λ отбором по Π(1+λ²) ≤ v_max²."""
    raw = rng.uniform(-1.0, 1.0, size=(m, n, n))
    h = 0.5 * (raw + raw.transpose(0, 2, 1))
    return SecondFundamentalFormTable(_sample_lambdas(rng, r, v_max), h)


def case_b_table(n: int, m: int, t: float, indices: Optional[Sequence[int]] = None) -> SecondFundamentalFormTable:
    """
    Семейство случая равенства: r = 2, λ = (√2, √2),
    h_{0,i1} = −h_{1,i0} = t при i из indices (по умолчанию все i ≥ 2).
    """
    if n < 3 or m < 2:
        raise DimensionMismatch("the equality family needs n >= 3 and m >= 2")
    indices = range(2, n) if indices is None else indices
    h = np.zeros((m, n, n))
    for i in indices:
        if not 2 <= i < n:
            raise IndexError(f"index {i} outside [2, {n})")
        h[0, i, 1] = h[0, 1, i] = t
        h[1, i, 0] = h[1, 0, i] = -t
    return SecondFundamentalFormTable([SQRT2, SQRT2], h)


# === CERTIFICATES ===

def certify_II(products: int = 20, h_pairs: int = 10_000, seed: int = 0) -> Certificate:
    """Обход сетки λ_aλ_b ∈ (0, 2] и случайных пар (h_ab, h_ba)."""
    rng = np.random.default_rng(seed)
    grid = np.linspace(2.0 / products, 2.0, products)
    pairs = rng.uniform(-1.0, 1.0, size=(h_pairs, 2))
    values = (2.0 * pairs[:, 0] ** 2 + 2.0 * pairs[:, 1] ** 2)[None, :] \
        + 2.0 * grid[:, None] * (pairs[:, 0] * pairs[:, 1])[None, :]
    k, j = np.unravel_index(np.argmin(values), values.shape)
    minimum = float(values[k, j])

    ts = np.linspace(-1.0, 1.0, 100)
    equality = max(abs(term_II(SQRT2, SQRT2, t, -t)) for t in ts)
    passed = minimum >= -1e-12 and equality <= 1e-12
    return Certificate(
        lemma="II", samples=products * h_pairs, seed=seed, extremal_value=minimum,
        argext={"product": float(grid[k]), "h_ab": float(pairs[j, 0]), "h_ba": float(pairs[j, 1])},
        tolerance=1e-12, passed=bool(passed), details={"equality_residual": float(equality)},
    )


def _sample_abc(rng: np.random.Generator, count: int) -> np.ndarray:
    accepted = []
    total = 0
    attempts = 0
    while total < count and attempts < REJECTION_ATTEMPTS:
        batch = rng.uniform(0.0, LAMBDA_MAX, size=(max(4 * count, 64), 3))
        batch = batch[(batch > 0).all(axis=1)]
        keep = batch[np.prod(1.0 + batch ** 2, axis=1) <= 9.0]
        accepted.append(keep)
        total += len(keep)
        attempts += 1
    if total < count:
        logger.warning(f"CurvatureAlgebra: only {total} of {count} (a, b, c) samples accepted")
    abc = np.concatenate(accepted)[:count]
    return -np.sort(-abc, axis=1)


def iii_chunk(count: int, seed_seq: np.random.SeedSequence) -> ChunkExtremum:
    abc = _sample_abc(np.random.default_rng(seed_seq), count)
    a, b, c = abc[:, 0], abc[:, 1], abc[:, 2]
    mats = np.empty((len(abc), 3, 3))
    mats[:, 0, 0] = mats[:, 1, 1] = mats[:, 2, 2] = 2.0
    mats[:, 0, 1] = mats[:, 1, 0] = a * b
    mats[:, 1, 2] = mats[:, 2, 1] = b * c
    mats[:, 0, 2] = mats[:, 2, 0] = c * a
    smallest = np.linalg.eigvalsh(mats)[:, 0]
    k = int(np.argmin(smallest))
    return ChunkExtremum(
        float(smallest[k]), {"a": float(a[k]), "b": float(b[k]), "c": float(c[k])}, len(abc)
    )


def iii_certificate(merged: ChunkExtremum, seed: int) -> Certificate:
    return Certificate(
        lemma="III", samples=merged.count, seed=seed, extremal_value=merged.value,
        argext=merged.argext, tolerance=1e-12, passed=bool(merged.value > 0.0),
    )


def certify_III_positive(samples: int, seed: int) -> Certificate:
    """Наименьшее собственное значение формы III на выборке из области (a, b, c)."""
    merged = merge_minima([iii_chunk(c, s) for c, s in sample_chunks(samples, seed)])
    return iii_certificate(merged, seed)


def _random_shape(rng: np.random.Generator) -> Tuple[int, int, int]:
    n = int(rng.integers(1, 5))
    m = int(rng.integers(1, 5))
    r = int(rng.integers(0, min(n, m) + 1))
    return n, m, r


def prop35_chunk(count: int, seed_seq: np.random.SeedSequence) -> ChunkExtremum:
    rng = np.random.default_rng(seed_seq)
    best = ChunkExtremum(np.inf, {}, count)
    for _ in range(count):
        n, m, r = _random_shape(rng)
        table = sample_table(rng, n, m, r)
        value = laplacian_v_quadratic(table)
        if value < best.value:
            best = ChunkExtremum(value, {
                "n": n, "m": m, "r": r, "lambdas": table.lambdas.tolist(),
                "norm_sq": table.norm_sq(),
            }, count)
    return best


def prop35_certificate(merged: ChunkExtremum, seed: int) -> Certificate:
    return Certificate(
        lemma="prop35", samples=merged.count, seed=seed, extremal_value=merged.value,
        argext=merged.argext, tolerance=CERT_TOL, passed=bool(merged.value >= -CERT_TOL),
    )


def certify_prop35(samples: int, seed: int) -> Certificate:
    """Минимум v⁻¹Δv по случайным таблицам с v ≤ 3."""
    merged = merge_minima([prop35_chunk(c, s) for c, s in sample_chunks(samples, seed, 512)])
    return prop35_certificate(merged, seed)


# === ε₀ ===

def lambda_grid(r: int, density: int) -> np.ndarray:
    """Убывающие наборы λ из равномерной сетки с Π(1+λ²) ≤ 9."""
    base = np.linspace(LAMBDA_MAX / density, LAMBDA_MAX, density)
    mesh = np.stack(np.meshgrid(*([base] * r), indexing="ij"), axis=-1).reshape(-1, r)
    if r > 1:
        mesh = mesh[np.all(np.diff(mesh, axis=1) <= 0, axis=1)]
    return mesh[np.prod(1.0 + mesh ** 2, axis=1) <= 9.0 + REGION_SLACK]


def estimate_eps0(r: int, density: int = DEFAULT_DENSITY, h_samples: int = 1000, seed: int = 0) -> float:
    """
    Оценка ε₀: минимум отношения IV_α к знаменателю по сетке λ.
    На каждом узле минимум равен наименьшему обобщённому собственному значению;
    случайные h дают проверочную верхнюю оценку.
    """
    if not 1 <= r <= EPS0_MAX_R:
        raise ValueError(f"r must be in [1, {EPS0_MAX_R}]")
    if density < 2:
        raise ValueError("density must be >= 2")
    grid = lambda_grid(r, density)
    rng = np.random.default_rng(seed)
    best = np.inf
    sampled = np.inf
    for alpha in range(r):
        mats, denoms = zip(*(iv_matrix(lam, alpha) for lam in grid))
        mats, denoms = np.array(mats), np.array(denoms)
        scale = 1.0 / np.sqrt(np.diagonal(denoms, axis1=1, axis2=2))
        normalized = mats * scale[:, :, None] * scale[:, None, :]
        best = min(best, float(np.min(np.linalg.eigvalsh(normalized)[:, 0])))
        if h_samples:
            z = rng.standard_normal((h_samples, mats.shape[1]))
            k = int(rng.integers(len(grid)))
            num = np.einsum("si,ij,sj->s", z, mats[k], z)
            den = np.einsum("si,ij,sj->s", z, denoms[k], z)
            sampled = min(sampled, float(np.min(num / den)))
    if sampled < best - 1e-9:
        logger.warning(f"CurvatureAlgebra: sampled ratio {sampled} below eigenvalue bound {best}")
    logger.debug(f"CurvatureAlgebra: ε₀ estimate for r={r}: {best:.6f} (sampled {sampled:.6f})")
    return best


def generalized_min_ratio(lambdas: Sequence[float], alpha: int) -> float:
    mat, denom = iv_matrix(lambdas, alpha)
    return float(scipy.linalg.eigh(mat, denom, eigvals_only=True)[0])


# === EQUALITY CASE ===

class EqualityCase(enum.Enum):
    CASE_A = "CaseA"
    CASE_B = "CaseB"
    INCONSISTENT = "Inconsistent"


@dataclass
class EqualityClassification:
    case: EqualityCase
    theta0: Optional[float] = None
    S: Optional[np.ndarray] = None  # S_{ν₁ν₂}(e_i) = h_{1,i0}
    residual: float = 0.0


def classify_equality_case(T: SecondFundamentalFormTable, tol: float) -> EqualityClassification:
    value = laplacian_v_quadratic(T)
    if value > tol:
        raise PreconditionViolated(f"v⁻¹Δv = {value:.3e} exceeds tol {tol:.1e}")
    if T.v_squared() > 9.0 + tol:
        raise PreconditionViolated(f"v² = {T.v_squared():.6f} exceeds 9")

    if T.norm_sq() <= tol:
        return EqualityClassification(EqualityCase.CASE_A, residual=T.norm_sq())

    if T.r != 2 or np.max(np.abs(T.lambdas - SQRT2)) > tol:
        logger.debug(f"CurvatureAlgebra: r={T.r}, λ={T.lambdas} do not match the rigid angle")
        return EqualityClassification(EqualityCase.INCONSISTENT)

    s = np.array(T.h[1, :, 0])
    s[:2] = 0.0
    expected = np.zeros_like(T.h)
    expected[0, :, 1] = expected[0, 1, :] = -s
    expected[1, :, 0] = expected[1, 0, :] = s
    residual = float(np.max(np.abs(T.h - expected)))
    if residual > tol:
        return EqualityClassification(EqualityCase.INCONSISTENT, residual=residual)
    theta0 = float(np.mean(np.arctan(T.lambdas)))
    return EqualityClassification(EqualityCase.CASE_B, theta0=theta0, S=s, residual=residual)


# === AUSTERE ===

class AustereCheck(NamedTuple):
    austere: bool
    simple: bool


def _normal_directions(m: int) -> np.ndarray:
    directions = [np.eye(m)[a] for a in range(m)]
    for a, b in combinations(range(m), 2):
        for sign in (1.0, -1.0):
            d = np.zeros(m)
            d[a], d[b] = 1.0, sign
            directions.append(d / SQRT2)
    rng = np.random.default_rng(AUSTERE_DIRECTION_SEED)
    gauss = rng.standard_normal((AUSTERE_RANDOM_DIRECTIONS, m))
    directions.extend(gauss / np.linalg.norm(gauss, axis=1, keepdims=True))
    return np.array(directions)


def is_austere(T: SecondFundamentalFormTable, tol: float = AUSTERE_TOL) -> bool:
    for nu in _normal_directions(T.m):
        b_nu = np.tensordot(nu, T.h, axes=1)
        eig = np.linalg.eigvalsh(b_nu)
        if np.max(np.abs(eig + eig[::-1])) > tol:
            return False
    return True


def simple_direction(T: SecondFundamentalFormTable, tol: float = AUSTERE_TOL) -> Optional[np.ndarray]:
    """
    Единичный v₀ с B(v₀, v₀) = 0 и B|_{v₀^⊥} = 0, если такой есть.
    Кандидаты берутся из пересечения образов ненулевых h_α.
    """
    n = T.n
    acc = np.zeros((n, n))
    nonzero = 0
    for h_alpha in T.h:
        eig, vec = np.linalg.eigh(h_alpha)
        rng_basis = vec[:, np.abs(eig) > tol]
        if rng_basis.shape[1] == 0:
            continue
        nonzero += 1
        acc += np.eye(n) - rng_basis @ rng_basis.T
    if nonzero == 0:
        return None
    eig, vec = np.linalg.eigh(acc)
    for k in np.flatnonzero(eig <= tol):
        v0 = vec[:, k]
        perp = scipy.linalg.null_space(v0[None, :])
        ok = all(
            abs(v0 @ h_alpha @ v0) <= tol
            and np.max(np.abs(perp.T @ h_alpha @ perp), initial=0.0) <= tol
            for h_alpha in T.h
        )
        if ok:
            return v0 if v0[np.argmax(np.abs(v0))] > 0 else -v0
    return None


def austere_check(T: SecondFundamentalFormTable, tol: float = AUSTERE_TOL) -> AustereCheck:
    austere = is_austere(T, tol)
    if not austere:
        return AustereCheck(False, False)
    stacked = T.h.reshape(T.m, -1)
    span_dim = int(np.linalg.matrix_rank(stacked, tol=tol)) if stacked.size else 0
    simple = span_dim >= 2 and simple_direction(T, tol) is not None
    return AustereCheck(True, bool(simple))
