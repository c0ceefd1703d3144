"""
Тестирование лаборатории погружений: локальные данные, w, Δ_f, конусы,
прямой Δv и его сверка с квадратичной формой
"""
import numpy as np
import pytest

from curvature_algebra import SecondFundamentalFormTable, austere_check, log_gradient_w
from exceptions import (
    AtVertex, DimensionMismatch, NonPositiveW, NotSpherical, OutOfBox,
    PreconditionViolated, RankDeficientJacobian,
)
from lab_objects import (
    affine_graph, clifford_torus, get_object, helicoid, lawson_osserman_graph,
    paraboloid_graph, small_circle, sphere_graph,
)
from submanifold_lab import (
    GraphFunction, Immersion, aligned_sff_table, bernstein_probe, blow_down, codazzi_residual,
    conelike_check, cone_over, coordinate_q0, gauss_w, graph_immersion, laplacian_v_bridge,
    laplacian_v_direct, lawson_osserman, log_gradient_w_direct, mean_curvature_residual,
    patch_at, reparametrize, slope_delta, tangent_angle_report,
)

# двоичные шаги: для аффинных отображений разности считаются без округления
DYADIC_STEP = 2.0 ** -13
DYADIC_INNER = 2.0 ** -17


def _unit_points(count, seed):
    rng = np.random.default_rng(seed)
    points = rng.standard_normal((count, 4))
    return points / np.linalg.norm(points, axis=1, keepdims=True)


def _positive_q0(im, x, step=None):
    q0 = coordinate_q0(im)
    return q0 if gauss_w(patch_at(im, x, step), q0) > 0 else q0.reversed()


# === PATCH ===

def test_affine_graph_is_flat():
    im = graph_immersion(affine_graph())
    patch = patch_at(im, np.zeros(2), DYADIC_STEP)
    assert np.max(np.abs(patch.sff)) <= 1e-9
    assert np.linalg.norm(patch.mean_curvature) <= 1e-9
    assert patch.error_order == 2


def test_sphere_mean_curvature():
    """|H| = 2/ρ для сферы радиуса ρ (H = след B)"""
    g = sphere_graph(2.0)
    assert mean_curvature_residual(graph_immersion(g), [0.1, -0.05], 1e-4) == pytest.approx(1.0, abs=1e-5)


def test_helicoid_is_minimal_and_austere():
    im = helicoid()
    x = np.array([0.5, 0.3])
    patch = patch_at(im, x, 1e-4)
    assert np.linalg.norm(patch.mean_curvature) < 1e-5
    principal = np.linalg.eigvalsh(patch.sff[0])
    expected = 1.0 / (1.0 + x[0] ** 2)
    assert np.allclose(np.abs(principal), expected, atol=1e-5)
    assert austere_check(SecondFundamentalFormTable([], patch.sff), 1e-6).austere


def test_patch_errors():
    im = graph_immersion(affine_graph())
    with pytest.raises(OutOfBox):
        patch_at(im, [0.99995, 0.0], 1e-4)
    with pytest.raises(DimensionMismatch):
        patch_at(im, [0.0, 0.0, 0.0])
    folded = Immersion(func=lambda x: np.array([x[0], x[0], 0.0]), domain_dim=2, ambient_dim=3,
                       box=np.array([[-1.0, 1.0]] * 2))
    with pytest.raises(RankDeficientJacobian):
        patch_at(folded, [0.0, 0.0])


# === GAUSS MAP / SLOPE ===

def test_flat_graph_has_w_one():
    g = GraphFunction(func=lambda x: np.zeros(2), n=3, m=2, box=np.array([[-1.0, 1.0]] * 3))
    im = graph_immersion(g)
    assert gauss_w(patch_at(im, np.zeros(3)), coordinate_q0(im)) == pytest.approx(1.0, abs=1e-14)
    assert slope_delta(g, np.zeros(3)) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("theta", [0.2, np.pi / 6, 1.1])
def test_tilted_plane(theta):
    g = GraphFunction(func=lambda x: np.array([np.tan(theta) * x[0]]), n=2, m=1,
                      box=np.array([[-1.0, 1.0]] * 2))
    im = graph_immersion(g)
    assert gauss_w(patch_at(im, [0.1, 0.2]), coordinate_q0(im)) == pytest.approx(np.cos(theta), abs=1e-12)


def test_slope_delta_of_linear_map():
    g = GraphFunction(func=lambda x: np.array([x[0], 0.0]), n=2, m=2, box=np.array([[-1.0, 1.0]] * 2))
    assert slope_delta(g, [0.3, 0.1]) == pytest.approx(np.sqrt(2.0), abs=1e-12)
    A = np.array([[0.5, -0.25], [1.0, 2.0]])
    s = np.linalg.svd(A, compute_uv=False)
    assert slope_delta(affine_graph(A), [0.0, 0.0]) == pytest.approx(np.prod(np.sqrt(1.0 + s ** 2)), rel=1e-10)


@pytest.mark.parametrize("name", ["paraboloid", "sphere", "lawson-osserman"])
def test_slope_delta_is_reciprocal_of_w(name):
    obj = get_object(name)
    im = obj.immersion
    w = gauss_w(patch_at(im, obj.base_point), coordinate_q0(im))
    assert slope_delta(obj.graph, obj.base_point) * w == pytest.approx(1.0, abs=1e-8)


def test_slope_delta_out_of_box():
    with pytest.raises(OutOfBox):
        slope_delta(paraboloid_graph(), [1.0, 0.0])


# === LAWSON-OSSERMAN ===

def test_lawson_osserman_map():
    x = np.array([0.3, -0.7, 0.2, 0.5])
    assert np.allclose(lawson_osserman(2.0 * x), 2.0 * lawson_osserman(x), atol=1e-14)
    assert np.linalg.norm(lawson_osserman(x)) == pytest.approx(np.sqrt(5.0) / 2.0 * np.linalg.norm(x))
    with pytest.raises(AtVertex):
        lawson_osserman(np.zeros(4))


@pytest.mark.parametrize("seed", range(4))
def test_lawson_osserman_cone(seed):
    """⟨N, Q0⟩ = 1/9, Δ_f = 9 и H = 0 на единичной сфере"""
    g = lawson_osserman_graph()
    im = graph_immersion(g)
    q0 = coordinate_q0(im)
    for x in _unit_points(5, seed):
        patch = patch_at(im, x, 1e-4)
        assert gauss_w(patch, q0) == pytest.approx(1.0 / 9.0, abs=1e-6)
        assert slope_delta(g, x) == pytest.approx(9.0, abs=1e-5)
        assert np.linalg.norm(patch.mean_curvature) < 1e-5


def test_lawson_osserman_is_fixed_by_blow_down():
    g = lawson_osserman_graph()
    scaled = blow_down(g, 3.0)
    x = np.array([0.2, 0.1, -0.3, 0.25])
    assert np.allclose(scaled(x), g(x), atol=1e-14)
    with pytest.raises(ValueError):
        blow_down(g, 0.0)


def test_codazzi_residual():
    im = graph_immersion(affine_graph())
    assert codazzi_residual(im, np.zeros(2), 2.0 ** -10) <= 1e-10
    assert codazzi_residual(graph_immersion(sphere_graph()), [0.1, 0.05], 1e-3) <= 1e-2
    lo = graph_immersion(lawson_osserman_graph())
    assert codazzi_residual(lo, np.full(4, 0.5), 1e-3) <= 1e-2


# === CONES ===

def test_equator_cone_is_flat():
    im = cone_over(small_circle(1.0))
    patch = patch_at(im, [1.5, 0.4])
    assert np.max(np.abs(patch.sff)) <= 1e-6


def test_clifford_cone_is_minimal():
    im = cone_over(clifford_torus())
    for x in ([1.0, 0.0, np.pi / 2], [2.0, 0.7, 1.2], [0.8, -1.5, 2.0]):
        assert mean_curvature_residual(im, x, 1e-4) < 1e-5


def test_small_circle_cone_is_not_minimal():
    assert mean_curvature_residual(cone_over(small_circle(0.5)), [1.0, 0.3]) > 0.1


def test_cone_needs_spherical_link():
    flat_circle = Immersion(
        func=lambda y: np.array([0.5 * np.cos(y[0]), 0.5 * np.sin(y[0]), 0.0]),
        domain_dim=1, ambient_dim=3, box=np.array([[-np.pi, np.pi]]),
    )
    with pytest.raises(NotSpherical):
        cone_over(flat_circle)


def test_gauss_map_is_constant_on_rays():
    im = cone_over(clifford_torus())
    q0 = _positive_q0(im, np.array([1.0, 0.0, np.pi / 2]))
    assert conelike_check(im, q0, ray_samples=5, rays=4, seed=0) <= 1e-9
    lo = graph_immersion(lawson_osserman_graph())
    assert conelike_check(lo, coordinate_q0(lo)) <= 1e-9


def test_paraboloid_is_a_negative_control():
    im = graph_immersion(paraboloid_graph(), rays=True)
    assert conelike_check(im, coordinate_q0(im), seed=1) > 1e-3
    with pytest.raises(PreconditionViolated):
        conelike_check(helicoid(), coordinate_q0(helicoid()))


def test_bernstein_probe_records():
    im = cone_over(clifford_torus())
    points = [[1.0, 0.1, 1.0], [1.5, -0.4, 2.0], [2.0, 1.0, 1.5]]
    records = bernstein_probe(im, points, q0_samples=4, seed=3)
    assert len(records) == 4
    for record in records:
        assert set(record) == {"q0_index", "min_w", "below_threshold"}
        assert -1.0 <= record["min_w"] <= 1.0


# === ALIGNED FRAMES ===

def test_tangent_and_normal_angles_agree():
    obj = get_object("lawson-osserman")
    patch = patch_at(obj.immersion, obj.base_point)
    report = tangent_angle_report(patch, coordinate_q0(obj.immersion))
    assert report["consistent"]
    assert len(report["normal_angles"]) == len(report["tangent_angles"]) > 0


def test_log_gradient_matches_table():
    g = sphere_graph()
    im = graph_immersion(g)
    x = np.array([0.2, 0.1])
    q0 = coordinate_q0(im)
    table = aligned_sff_table(patch_at(im, x, 1e-4), q0)
    assert table.r == 1
    direct = log_gradient_w_direct(im, q0, x, 1e-4)
    assert np.allclose(direct, log_gradient_w(table), atol=1e-6)


# === DIRECT LAPLACIAN ===

def test_affine_laplacian_is_zero():
    im = graph_immersion(affine_graph())
    q0 = coordinate_q0(im)
    assert laplacian_v_direct(im, q0, np.zeros(2), DYADIC_STEP, DYADIC_INNER) == pytest.approx(0.0, abs=1e-10)


def test_bridge_on_lawson_osserman():
    im = graph_immersion(lawson_osserman_graph())
    result = laplacian_v_bridge(im, coordinate_q0(im), np.full(4, 0.5), 1e-3)
    assert result["v"] == pytest.approx(9.0, abs=1e-4)
    assert abs(result["direct"]) <= 1e-3
    assert abs(result["quadratic"]) <= 1e-3
    assert result["difference"] <= 1e-3


def test_bridge_on_helicoid():
    im = helicoid()
    x = np.array([0.5, 0.3])
    result = laplacian_v_bridge(im, _positive_q0(im, x), x, 1e-3)
    assert result["difference"] <= 1e-3
    assert result["direct"] >= -1e-4


def test_bridge_on_clifford_cone():
    """Δv ≈ 2√2 в базовой точке: мост сверяет ненулевые величины"""
    im = cone_over(clifford_torus())
    x = np.array([1.0, 0.0, np.pi / 2])
    result = laplacian_v_bridge(im, _positive_q0(im, x), x, 1e-3)
    assert result["v"] == pytest.approx(np.sqrt(2.0), abs=1e-6)
    assert result["quadratic"] == pytest.approx(2.0 * np.sqrt(2.0), rel=1e-3)
    assert result["difference"] <= 1e-3


def test_bridge_error_is_second_order():
    im = cone_over(clifford_torus())
    x = np.array([1.0, 0.0, np.pi / 2])
    q0 = _positive_q0(im, x)
    fine = laplacian_v_bridge(im, q0, x, 1e-3)["difference"]
    coarse = laplacian_v_bridge(im, q0, x, 2e-3)["difference"]
    assert coarse / fine >= 3.0


def test_clifford_cone_laplacian_is_nonnegative():
    im = cone_over(clifford_torus())
    x = np.array([1.0, 0.0, np.pi / 2])
    q0 = _positive_q0(im, x)
    assert 1.0 / gauss_w(patch_at(im, x), q0) <= 3.0
    assert laplacian_v_direct(im, q0, x, 1e-3) >= -1e-4


def test_nonpositive_w_on_stencil():
    im = graph_immersion(affine_graph())
    with pytest.raises(NonPositiveW):
        laplacian_v_direct(im, coordinate_q0(im).reversed(), np.zeros(2), 1e-3)


# === CHART INDEPENDENCE ===

def test_reparametrization_invariance():
    g = sphere_graph()
    im = graph_immersion(g)
    x0 = np.array([0.1, -0.05])
    A = np.array([[1.0, 0.3], [-0.2, 0.9]])
    moved = reparametrize(im, A, x0)
    y0 = np.zeros(2)
    q0 = coordinate_q0(im)
    w_x = gauss_w(patch_at(im, x0, 1e-4), q0)
    w_y = gauss_w(patch_at(moved, y0, 1e-4), q0)
    assert w_y == pytest.approx(w_x, abs=1e-8)
    assert mean_curvature_residual(moved, y0, 1e-3) == pytest.approx(mean_curvature_residual(im, x0, 1e-3), abs=1e-6)
    assert laplacian_v_direct(moved, q0, y0, 1e-3) == pytest.approx(laplacian_v_direct(im, q0, x0, 1e-3), abs=1e-3)
    with pytest.raises(DimensionMismatch):
        reparametrize(im, np.eye(3), np.zeros(3))
