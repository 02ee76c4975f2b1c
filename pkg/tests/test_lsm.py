import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softscat.curvekit import chamfer, circle, is_admissible, is_simple_polygon, make_cavity, sample_equispaced
from softscat.forward import ScatteringSetup, circle_oracle, forward_map
from softscat.lsm import (
    LOG_FLOOR,
    ExtractionError,
    IndicatorField,
    LsmConfig,
    build_lsm_matrix,
    extract_initial_curve,
    herglotz_field,
    indicator,
    indicator_field,
    lsm_initial_guess,
    lsm_prefactor,
    point_source_rhs,
    star_design,
    star_fit,
)

K1 = ScatteringSetup(1.0)


@pytest.fixture(scope="module")
def disk_system():
    data = circle_oracle(1.0, K1)
    A = build_lsm_matrix(data, K1)
    pts = np.random.default_rng(0).uniform(-2, 2, size=(100, 2))
    return A, pts


def tikhonov(A, G, g, alpha):
    return np.linalg.norm(A @ g - G, axis=0) ** 2 + alpha**2 * np.linalg.norm(g, axis=0) ** 2


def cone_field(n=201):
    xs = ys = np.linspace(-2, 2, n)
    X, Y = np.meshgrid(xs, ys)
    return IndicatorField(xs, ys, np.hypot(X, Y))


class TestMatrix:
    def test_shape(self):
        assert build_lsm_matrix(circle_oracle(1.0, K1), K1).shape == (10, 10)

    def test_prefactor_magnitude(self):
        assert abs(lsm_prefactor(1.0, 10)) == pytest.approx(0.5013, abs=1e-4)
        assert abs(lsm_prefactor(1.0, 10)) == pytest.approx(math.sqrt(8 * math.pi) / 10, rel=1e-15)

    def test_entries(self):
        setup = ScatteringSetup(2.0)
        data = forward_map(circle(0.7), setup)
        A = build_lsm_matrix(data, setup)
        grid = data.grid()
        ref = lsm_prefactor(2.0, setup.n_directions) * grid[5, 3]
        assert abs(A[3, 5] - ref) <= 1e-15 * abs(ref)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            build_lsm_matrix(circle_oracle(1.0, K1), ScatteringSetup(2.0))


class TestHerglotz:
    def test_normal_equations(self, disk_system):
        A, pts = disk_system
        alpha = 1e-3
        g = herglotz_field(A, pts, K1.receivers, 1.0, alpha)
        G = point_source_rhs(pts, K1.receivers, 1.0)
        lhs = (A.conj().T @ A + alpha**2 * np.eye(A.shape[1])) @ g
        rhs = A.conj().T @ G
        rel = np.linalg.norm(lhs - rhs, axis=0) / np.linalg.norm(rhs, axis=0)
        assert np.max(rel) < 1e-10

    def test_lstsq_oracle(self, disk_system):
        # the stacked least-squares problem [A; alpha I] g = [G; 0]
        A, pts = disk_system
        alpha = 0.05
        g = herglotz_field(A, pts[:5], K1.receivers, 1.0, alpha)
        G = point_source_rhs(pts[:5], K1.receivers, 1.0)
        M = np.vstack([A, alpha * np.eye(A.shape[1])])
        b = np.vstack([G, np.zeros((A.shape[1], 5))])
        ref = np.linalg.lstsq(M, b, rcond=None)[0]
        assert np.max(np.abs(g - ref)) < 1e-10 * np.max(np.abs(ref))

    def test_perturbation_increases_functional(self, disk_system):
        A, pts = disk_system
        alpha = 1e-3
        g = herglotz_field(A, pts, K1.receivers, 1.0, alpha)
        G = point_source_rhs(pts, K1.receivers, 1.0)
        rng = np.random.default_rng(3)
        d = 1e-3 * (rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape))
        assert np.all(tikhonov(A, G, g + d, alpha) > tikhonov(A, G, g, alpha))

    def test_large_alpha_limit(self, disk_system):
        A, pts = disk_system
        g_small = herglotz_field(A, pts, K1.receivers, 1.0, 1e-3)
        g_big = herglotz_field(A, pts, K1.receivers, 1.0, 1e8)
        assert np.max(np.abs(g_big)) < 1e-12 * np.max(np.abs(g_small))

    def test_bad_alpha(self, disk_system):
        A, pts = disk_system
        with pytest.raises(ValueError):
            herglotz_field(A, pts, K1.receivers, 1.0, 0.0)

    def test_point_on_receiver(self):
        with pytest.raises(ValueError):
            point_source_rhs(K1.receivers[:1], K1.receivers, 1.0)

    @pytest.mark.parametrize("k", [1.0, 5.0])
    def test_interior_small_exterior_large(self, k):
        # classical orientation: bounded densities inside, large outside
        setup = ScatteringSetup(k)
        field = indicator_field(circle_oracle(1.0, setup), setup)
        X, Y = np.meshgrid(field.xs, field.ys)
        r = np.hypot(X, Y)
        g = np.exp(field.values)
        assert g[(r > 1.2) & (r < 2)].mean() > 2 * g[r < 0.8].mean()


class TestIndicator:
    def test_formula(self):
        g = np.array([[3.0, 0.0], [4.0, 1j]])
        assert np.allclose(indicator(g), [math.log(5.0), 0.0], rtol=0, atol=1e-15)

    def test_zero_density_floored(self, caplog):
        h = indicator(np.zeros((3, 2)))
        assert np.all(h == LOG_FLOOR) and np.all(np.isfinite(h))
        assert "floored" in caplog.text

    @settings(max_examples=40, deadline=None)
    @given(st.floats(1e-3, 1e3), st.integers(0, 1000))
    def test_scaling_shifts_log(self, s, seed):
        g = np.random.default_rng(seed).normal(size=(6, 4)) + 0.5
        assert np.allclose(indicator(s * g) - indicator(g), math.log(s), rtol=0, atol=1e-12)

    def test_csv_layout(self):
        field = IndicatorField(np.array([0.0, 1.0]), np.array([2.0]), np.array([[0.5, 0.25]]))
        assert field.csv() == "x,y,h\n0,2,0.5\n1,2,0.25\n"


class TestExtraction:
    def test_cone_gives_unit_circle(self):
        # h = |x| on [-2,2]^2 runs from 0 to 2 sqrt(2); this normalized level is |x| = 1
        field = cone_field()
        curve = extract_initial_curve(field, LsmConfig(level=1 / (2 * math.sqrt(2))))
        nodes = sample_equispaced(curve, 1.0).nodes
        r = np.hypot(nodes[:, 0], nodes[:, 1])
        h = field.xs[1] - field.xs[0]
        assert np.max(np.abs(r - 1.0)) < h

    def test_star_fit_orthogonality(self):
        rng = np.random.default_rng(5)
        theta = np.sort(rng.uniform(-np.pi, np.pi, 300))
        rr = 1 + 0.2 * np.cos(3 * theta) + 0.05 * rng.normal(size=300)
        pts = np.column_stack([rr * np.cos(theta), rr * np.sin(theta)])
        center, coef, design, r = star_fit(pts, 10, np.zeros(2))
        res = r - design @ coef
        assert np.max(np.abs(design.T @ res)) < 1e-10 * np.linalg.norm(r)

    def test_star_fit_exact_recovery(self):
        theta = np.linspace(-np.pi, np.pi, 200, endpoint=False)
        true = np.zeros(21)
        true[0], true[3], true[10 + 2] = 1.0, 0.2, -0.1
        rr = star_design(theta, 10) @ true
        pts = np.column_stack([rr * np.cos(theta), rr * np.sin(theta)])
        _, coef, _, _ = star_fit(pts, 10, np.zeros(2))
        assert np.max(np.abs(coef - true)) < 1e-12

    def test_disk_chamfer(self):
        curve, _ = lsm_initial_guess(circle_oracle(1.0, K1), K1)
        assert chamfer(sample_equispaced(circle(), 1.0), sample_equispaced(curve, 1.0)) < 0.2

    def test_disk_level_set_circular(self):
        curve, _ = lsm_initial_guess(circle_oracle(1.0, K1), K1)
        nodes = sample_equispaced(curve, 1.0).nodes
        c = nodes.mean(axis=0)
        r = np.hypot(*(nodes - c).T)
        assert np.max(np.abs(r - r.mean())) < 0.1

    def test_cavity_output_admissible(self):
        truth = make_cavity(0.51, 6.67, 3.3)
        data = forward_map(truth, K1)
        curve, _ = lsm_initial_guess(data, K1)
        assert is_simple_polygon(sample_equispaced(curve, 1.0).nodes)
        assert is_admissible(curve, 1.0)

    def test_constant_field(self):
        field = IndicatorField(np.linspace(0, 1, 40), np.linspace(0, 1, 40), np.ones((40, 40)))
        with pytest.raises(ExtractionError):
            extract_initial_curve(field)

    def test_no_closed_contour(self):
        # a ramp has only open level lines
        xs = np.linspace(0, 1, 40)
        field = IndicatorField(xs, xs, np.tile(xs, (40, 1)))
        with pytest.raises(ExtractionError, match="different level"):
            extract_initial_curve(field)

    @pytest.mark.parametrize(
        "kwargs", [dict(alpha=0.0), dict(resolution=16), dict(level=1.0), dict(n_star=0), dict(box=(1, 0, 0, 1))]
    )
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            LsmConfig(**kwargs)
