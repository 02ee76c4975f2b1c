"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS`` or ``criterion N: FAIL`` line
with the measured numbers, then asserts the outcome.
"""

import time

import numpy as np
import pytest
from scipy import optimize

from softscat.cli import EXIT_OK, main
from softscat.continuation import (
    FrequencyGrid,
    ScifConfig,
    cif,
    run_trials,
    scif_sample_path,
    synthesize,
)
from softscat.curvekit import (
    FourierCurve,
    area_error,
    chamfer,
    circle,
    from_polar,
    in_cavity,
    is_admissible,
    is_simple_polygon,
    make_cavity,
    node_count,
    sample_equispaced,
    save_curve,
    star,
)
from softscat.forward import ScatteringSetup, circle_oracle, forward_map
from softscat.frechet import fd_jacobian, jacobian_for, n_h_rule
from softscat.lsm import LsmConfig, build_lsm_matrix, herglotz_field, lsm_initial_guess, point_source_rhs
from softscat.sfopt import (
    OptimizerSettings,
    gaussian_filter,
    gn_step,
    sd_step,
    solve_single_frequency,
    step_length_filter,
)


@pytest.fixture
def report(capsys):
    def emit(number: int, ok: bool, detail: str, elapsed: float):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} ({detail}; {elapsed:.1f} s)")
        assert ok, detail

    return emit


def lemniscate() -> FourierCurve:
    n = 256
    t = 2 * np.pi * np.arange(n) / n
    z = (np.cos(t) + 1j * np.sin(t) * np.cos(t)) / (1 + np.sin(t) ** 2)
    f = np.fft.fft(z) / n
    idx = np.arange(-63, 64) % n
    return FourierCurve.from_z_coeffs(f[idx], 2 * np.pi)


@pytest.fixture(scope="module")
def star_cif():
    truth = star()
    t0 = time.perf_counter()
    data = synthesize(truth, FrequencyGrid.up_to(10.0))
    res = cif(data, settings=OptimizerSettings(method="sd", filter="gaussian"))
    return truth, res, time.perf_counter() - t0


def test_criterion_1_forward_accuracy(report):
    t0 = time.perf_counter()
    worst_oracle = worst_conv = 0.0
    for k in (1.0, 5.0, 10.0):
        setup = ScatteringSetup(k)
        u = forward_map(circle(), setup).values
        ref = circle_oracle(1.0, setup).values
        worst_oracle = max(worst_oracle, float(np.max(np.abs(u - ref) / np.abs(ref))))
        n = node_count(circle().length, k)
        u2 = forward_map(circle(), setup, n_nodes=2 * n).values
        worst_conv = max(worst_conv, float(np.max(np.abs(u - u2) / np.abs(u2))))
    elapsed = time.perf_counter() - t0
    ok = worst_oracle < 1e-7 and worst_conv < 1e-7 and elapsed < 60
    report(1, ok, f"oracle error {worst_oracle:.2e}, N to 2N change {worst_conv:.2e}", elapsed)


def test_criterion_2_jacobian(report):
    t0 = time.perf_counter()
    worst = 0.0
    for curve in (circle(), star()):
        for k in (1.0, 5.0):
            setup = ScatteringSetup(k)
            exact = jacobian_for(curve, setup).matrix
            best = np.inf
            for delta in (1e-3, 1e-4, 1e-5):
                approx = fd_jacobian(curve, setup, n_h_rule(k), delta).matrix
                err = np.max(np.linalg.norm(approx - exact, axis=0) / np.linalg.norm(exact, axis=0))
                best = min(best, float(err))
            worst = max(worst, best)
    elapsed = time.perf_counter() - t0
    report(2, worst < 1e-5 and elapsed < 120, f"worst best-delta column error {worst:.2e}", elapsed)


def test_criterion_3_optimizer_units(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    sd_err = gn_err = 0.0
    for _ in range(5):
        J = rng.normal(size=(30, 7)) + 1j * rng.normal(size=(30, 7))
        r = rng.normal(size=30) + 1j * rng.normal(size=30)
        delta = J.real.T @ r.real + J.imag.T @ r.imag
        t = sd_step(J, r).c @ delta / (delta @ delta)
        jd = J @ delta
        best = optimize.minimize_scalar(
            lambda s: float(np.linalg.norm(r - s * jd) ** 2), bracket=(0, 10 * t + 1), method="golden", tol=1e-12
        ).x
        sd_err = max(sd_err, abs(t - best) / max(1.0, abs(best)))
        M = np.vstack([J.real, J.imag])
        b = np.concatenate([r.real, r.imag])
        gn_err = max(gn_err, float(np.max(np.abs(gn_step(J, r).c - np.linalg.solve(M.T @ M, M.T @ b)))))
    c = rng.normal(size=21)
    n_h = 10
    filters_exact = True
    for level in range(11):
        f = np.exp(-(np.arange(1, n_h + 1) ** 2) / ((10.0**-level) ** 2 * n_h**2))
        expected = np.concatenate([[c[0]], c[1 : n_h + 1] * f, c[n_h + 1 :] * f])
        filters_exact &= bool(np.array_equal(gaussian_filter(c, level).c, expected))
        filters_exact &= bool(np.array_equal(step_length_filter(c, level).c, c / 2**level))
    elapsed = time.perf_counter() - t0
    ok = sd_err < 1e-8 and gn_err < 1e-8 and filters_exact
    report(3, ok, f"sd vs golden {sd_err:.1e}, gn vs normal equations {gn_err:.1e}, filters exact {filters_exact}", elapsed)


def test_criterion_4_constraints(report, star_cif):
    t0 = time.perf_counter()
    verdicts = {
        "circle": bool(is_admissible(circle(), 1.0)),
        "lemniscate": bool(is_admissible(lemniscate(), 1.0)),
        "mode-25 star": bool(
            is_admissible(from_polar(lambda th: 1 + 0.3 * np.cos(25 * th), lambda th: -7.5 * np.sin(25 * th)), 1.0)
        ),
    }
    lemniscate_simple = is_simple_polygon(sample_equispaced(lemniscate(), 1.0).nodes)
    expected = {"circle": True, "lemniscate": False, "mode-25 star": False}
    verdicts_ok = verdicts == expected and not lemniscate_simple

    # every accepted iterate in a set of logged runs
    checked = bad = 0
    measured = forward_map(star(0.15, 3), ScatteringSetup(1.0), n_nodes=600)
    for method in ("sd", "gn", "sd-gn", "min(sd,gn)", "sd-min(sd,gn)"):
        for filt in ("gaussian", "step-length"):
            settings = OptimizerSettings(method=method, filter=filt, n_sd=2, maxit=6)
            _, stats = solve_single_frequency(circle(1.1), measured, ScatteringSetup(1.0), settings)
            for row in stats.rows:
                checked += 1
                bad += not is_admissible(row["curve"], 1.0, settings.constraint)
    _, res, _ = star_cif
    for stats in res.stats:
        for row in stats.rows:
            checked += 1
            bad += not is_admissible(row["curve"], stats.k)
    elapsed = time.perf_counter() - t0
    ok = verdicts_ok and bad == 0 and checked > 0
    report(4, ok, f"verdicts {verdicts}, {checked} accepted iterates checked, {bad} inadmissible", elapsed)


def test_criterion_5_star_cif(report, star_cif):
    truth, res, elapsed = star_cif
    eps = area_error(sample_equispaced(truth, 10.0), sample_equispaced(res.curve, 10.0))
    # best residual never increases within a frequency visit
    increases = sum(v.residual_out > v.residual_in for v in res.path.visits)
    ok = eps < 1e-2 and increases == 0 and elapsed < 900
    report(5, ok, f"area error {eps:.2e} after {len(res.path)} frequencies, {increases} residual increases", elapsed)


def test_criterion_6_scif_paths(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    lengths = [len(scif_sample_path(ScifConfig(p=0.603), 117, rng)) for _ in range(10_000)]
    mean = float(np.mean(lengths))
    unit = scif_sample_path(ScifConfig(p=1.0), 117, rng).indices
    elapsed = time.perf_counter() - t0
    ok = abs(mean - 567) < 0.05 * 567 and unit == list(range(1, 118)) and elapsed < 10
    report(6, ok, f"mean length {mean:.1f} vs 567, p=1 path is the sweep {unit == list(range(1, 118))}", elapsed)


@pytest.mark.slow
def test_criterion_7_cavity_spread(report):
    t0 = time.perf_counter()
    truth = make_cavity(0.51, 6.67, 3.3)
    data = synthesize(truth, FrequencyGrid.up_to(8.0), n_nodes=3000)
    summary = run_trials("scif", 8, 0, data, OptimizerSettings(), p=0.603, truth=truth)
    mask = in_cavity(summary.reference_nodes, sample_equispaced(truth, 8.0))
    inside = float(np.mean(summary.spread[mask]))
    outside = float(np.mean(summary.spread[~mask]))
    ratio = inside / outside if outside > 0 else float("inf")
    failed = sum(not t.ok for t in summary.trials)
    elapsed = time.perf_counter() - t0
    ok = ratio >= 3 and elapsed < 7200
    detail = (
        f"cavity spread {inside:.3e}, exterior spread {outside:.3e}, ratio {ratio:.2f}, "
        f"{int(mask.sum())}/{mask.size} cavity nodes, {failed} failed trials"
    )
    report(7, ok, detail, elapsed)


def test_criterion_8_lsm(report):
    t0 = time.perf_counter()
    setup = ScatteringSetup(1.0)
    data = circle_oracle(1.0, setup)
    curve, _ = lsm_initial_guess(data, setup)
    dist = chamfer(sample_equispaced(circle(), 1.0), sample_equispaced(curve, 1.0))
    A = build_lsm_matrix(data, setup)
    pts = LsmConfig().points()[::97]
    alpha = LsmConfig().alpha
    g = herglotz_field(A, pts, setup.receivers, 1.0, alpha)
    G = point_source_rhs(pts, setup.receivers, 1.0)
    lhs = (A.conj().T @ A + alpha**2 * np.eye(A.shape[1])) @ g
    rhs = A.conj().T @ G
    normal_err = float(np.max(np.linalg.norm(lhs - rhs, axis=0) / np.linalg.norm(rhs, axis=0)))
    elapsed = time.perf_counter() - t0
    report(8, dist < 0.2 and normal_err < 1e-10, f"Chamfer {dist:.3f}, normal equations {normal_err:.1e}", elapsed)


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_criterion_9_determinism(report, tmp_path):
    t0 = time.perf_counter()
    save_curve(star(), tmp_path / "star.fc")
    save_curve(circle(1.2), tmp_path / "other.fc")

    def run_all(out):
        out.mkdir()
        cmds = [
            ["synthesize", str(tmp_path / "star.fc"), "-o", str(out / "data.csv"), "--k-max", "1.5",
             "--noise", "0.01", "--seed", "5"],
            ["reconstruct", str(out / "data.csv"), "-o", str(out / "cif"), "--truth", str(tmp_path / "star.fc")],
            ["reconstruct", str(out / "data.csv"), "-o", str(out / "scif"), "--mode", "scif", "--n-trials", "3",
             "--seed", "11", "--truth", str(tmp_path / "star.fc")],
            ["reconstruct", str(out / "data.csv"), "-o", str(out / "rand"), "--mode", "random-init-cif",
             "--n-trials", "2", "--seed", "2", "--k-max", "1.25"],
            ["lsm-init", str(out / "data.csv"), "-o", str(out / "lsm")],
            ["metrics", str(tmp_path / "star.fc"), str(tmp_path / "other.fc"), "-o", str(out / "metrics.csv")],
            ["plot", "overlay", str(tmp_path / "star.fc"), str(tmp_path / "other.fc"), "-o", str(out / "overlay.svg")],
            ["plot", "residuals", str(out / "cif" / "visits.csv"), "-o", str(out / "res.svg")],
            ["plot", "spread", str(out / "scif" / "spread.csv"), "-o", str(out / "spread.png")],
        ]
        return [main(c) for c in cmds]

    codes_a = run_all(tmp_path / "a")
    codes_b = run_all(tmp_path / "b")
    ta, tb = _tree(tmp_path / "a"), _tree(tmp_path / "b")
    differing = sorted(name for name in set(ta) | set(tb) if ta.get(name) != tb.get(name))
    elapsed = time.perf_counter() - t0
    ok = all(c == EXIT_OK for c in codes_a + codes_b) and not differing
    report(9, ok, f"{len(ta)} files compared, {len(differing)} differ, exit codes {sorted(set(codes_a + codes_b))}", elapsed)
