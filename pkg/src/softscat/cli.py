"""scatcli: synthesize data, reconstruct obstacles, LSM initial guesses, metrics, plots.

Exit codes: 0 success, 2 invalid input or configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import plotting
from .continuation import (
    MultiFrequencyData,
    PathRecord,
    cif,
    run_trials,
    scif,
    scif_sample_path,
    ScifConfig,
    synthesize,
    trial_rng,
)
from .curvekit import (
    CurveError,
    CurveParseError,
    MetricUndefinedError,
    ReparametrizationError,
    ShapeGenerationError,
    area_error,
    chamfer,
    is_admissible,
    load_curve,
    sample_equispaced,
    save_curve,
)
from .dataset import DatasetError, add_noise, curve_hash, load_dataset, save_dataset
from .forward import FactorizationError, NearFieldError, ResolutionError
from .lsm import ExtractionError, LsmConfig, extract_initial_curve, indicator_field
from .runconfig import ConfigError, GridConfig, RunConfig
from .sfopt import RankDeficiencyError

logger = logging.getLogger("softscat.cli")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

NUMERICAL_ERRORS = (
    FactorizationError,
    ResolutionError,
    NearFieldError,
    RankDeficiencyError,
    ReparametrizationError,
    ShapeGenerationError,
    ExtractionError,
    MetricUndefinedError,
    np.linalg.LinAlgError,
    FloatingPointError,
)
VALIDATION_ERRORS = (ConfigError, DatasetError, CurveParseError, CurveError, FileNotFoundError, ValueError)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {
        "k_min": ("grid", "k_min"),
        "dk": ("grid", "dk"),
        "n_k": ("grid", "n"),
        "radius": ("sensors", "radius"),
        "method": ("optimizer", "method"),
        "filter": ("optimizer", "filter"),
        "maxit": ("optimizer", "maxit"),
        "n_sd": ("optimizer", "n_sd"),
    }
    for attr, (section, key) in overrides.items():
        val = getattr(args, attr, None)
        if val is not None:
            setattr(getattr(cfg, section), key, val)
    for attr in ("mode", "seed", "n_trials", "p", "noise", "synthesis_nodes", "max_path_len"):
        val = getattr(args, attr, None)
        if val is not None:
            setattr(cfg, attr, val)
    k_max = getattr(args, "k_max", None)
    if k_max is not None:
        cfg.grid.n = int(round((k_max - cfg.grid.k_min) / cfg.grid.dk)) + 1
    return cfg.validate()


def _metrics_csv(rows: list[tuple[str, object]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "value"])
    for name, value in rows:
        w.writerow([name, f"{value:.17g}" if isinstance(value, float) else value])
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _visits_csv(path: PathRecord) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["visit", "index", "k", "residual_in", "residual_out", "iterations", "n_pde", "reason", "admissible"])
    for i, v in enumerate(path.visits, 1):
        w.writerow([i, v.index, f"{v.k:.17g}", f"{v.residual_in:.17g}", f"{v.residual_out:.17g}",
                    v.iterations, v.n_pde, v.reason, int(v.admissible)])
    return buf.getvalue()


def _iterations_csv(stats_list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["visit", "k", "iteration", "residual", "update_norm", "filter_attempts", "n_pde", "step"])
    for i, st in enumerate(stats_list, 1):
        for row in st.rows:
            w.writerow([i, f"{st.k:.17g}", row["iteration"], f"{row['residual']:.17g}",
                        f"{row['update_norm']:.17g}", row["filter_attempts"], row["n_pde"], row["step"]])
    return buf.getvalue()


def _write_run(out: Path, result, data: MultiFrequencyData, truth=None, figures: bool = True) -> list[tuple[str, object]]:
    """Curves per visit, CSV logs and figures for one continuation run."""
    out.mkdir(parents=True, exist_ok=True)
    (out / "curves").mkdir(exist_ok=True)
    for i, curve in enumerate(result.curves, 1):
        save_curve(curve, out / "curves" / f"visit_{i:04d}.fc")
    save_curve(result.curve, out / "final.fc")
    _write(out / "visits.csv", _visits_csv(result.path))
    _write(out / "iterations.csv", _iterations_csv(result.stats))
    k_top = data.setups[-1].k
    rows = [
        ("visits", len(result.path)),
        ("n_pde", result.n_pde),
        ("final_residual", float(result.final_residual)),
        ("final_k", float(k_top)),
    ]
    if truth is not None:
        st, sa = sample_equispaced(truth, k_top), sample_equispaced(result.curve, k_top)
        rows += [("chamfer", float(chamfer(st, sa))), ("area_error", float(area_error(st, sa)))]
    if figures:
        curves = [sample_equispaced(result.curve, k_top).nodes]
        labels = ["reconstruction"]
        if truth is not None:
            curves.insert(0, sample_equispaced(truth, k_top).nodes)
            labels.insert(0, "truth")
        plotting.plot_overlay(curves, labels, out / "overlay.svg")
        plotting.plot_residuals([v.k for v in result.path.visits], result.residuals, out / "residuals.svg")
    return rows


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_synthesize(args) -> int:
    cfg = _load_config(args)
    curve = load_curve(args.curve)
    grid = cfg.grid.build()
    k_max = grid[len(grid) - 1]
    if not is_admissible(curve, grid[0], cfg.optimizer.build().constraint):
        logger.warning("input curve is not admissible at k=%g; synthesizing anyway", grid[0])
    data = synthesize(curve, grid, cfg.setup_factory(), cfg.synthesis_nodes)
    if cfg.noise > 0:
        data = add_noise(data, cfg.noise, trial_rng(cfg.seed, 0, stream=0x6E6F6973))
    prov = {"curve_sha256": curve_hash(curve), "curve_file": Path(args.curve).name,
            "noise": cfg.noise, "seed": cfg.seed, "synthesis_nodes": cfg.synthesis_nodes}
    save_dataset(data, args.out, prov)
    logger.info("wrote %d frequencies up to k=%g to %s", len(grid), k_max, args.out)
    return EXIT_OK


def _initial_curve(args, data: MultiFrequencyData, cfg: RunConfig):
    if args.init is None:
        return None
    if args.init == "lsm":
        lcfg = LsmConfig(level=args.level)
        field = indicator_field(data.data[0], data.setups[0], lcfg)
        return extract_initial_curve(field, lcfg, data.setups[0].k, cfg.optimizer.build().constraint)
    return load_curve(args.init)


def cmd_reconstruct(args) -> int:
    cfg = _load_config(args)
    data, _prov = load_dataset(args.data)
    n_k = cfg.grid.n if args.n_k is not None or args.k_max is not None else len(data.grid)
    if n_k > len(data.grid):
        raise ConfigError(f"dataset has {len(data.grid)} frequencies, {n_k} requested")
    data = data.truncated(n_k)
    cfg.grid = GridConfig(data.grid.k_min, data.grid.dk, n_k)
    settings = cfg.optimizer.build()
    truth = load_curve(args.truth) if args.truth else None
    init = _initial_curve(args, data, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "config.json", cfg.to_json())

    if cfg.mode == "cif" or (cfg.mode == "scif" and cfg.n_trials == 1 and cfg.p == 1.0):
        res = cif(data, init, settings)
        rows = _write_run(out, res, data, truth, figures=not args.no_figures)
        _write(out / "summary.csv", _metrics_csv([("mode", cfg.mode)] + rows))
        return EXIT_OK

    if cfg.mode == "scif" and cfg.n_trials == 1:
        rng = trial_rng(cfg.seed, 0)
        path = scif_sample_path(ScifConfig(cfg.p, cfg.seed, 1, cfg.max_path_len), n_k, rng)
        res = scif(data, init, path, settings)
        rows = _write_run(out, res, data, truth, figures=not args.no_figures)
        _write(out / "summary.csv", _metrics_csv([("mode", cfg.mode), ("seed", cfg.seed)] + rows))
        return EXIT_OK

    summary = run_trials(cfg.mode, cfg.n_trials, cfg.seed, data, settings, cfg.p, init, truth, cfg.max_path_len)
    k_top = data.setups[-1].k
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial", "seed", "residual", "chamfer", "path_length", "n_pde", "error"])
    for t in summary.trials:
        tdir = out / f"trial_{t.trial:03d}"
        if t.ok:
            tdir.mkdir(parents=True, exist_ok=True)
            save_curve(t.curve, tdir / "final.fc")
            save_curve(t.init, tdir / "init.fc")
            _write(tdir / "visits.csv", _visits_csv(t.path))
        w.writerow([t.trial, t.seed, f"{t.residual:.17g}", "" if t.chamfer is None else f"{t.chamfer:.17g}",
                    "" if t.path is None else len(t.path), t.n_pde, t.error or ""])
    _write(out / "ensemble.csv", buf.getvalue())
    rows: list[tuple[str, object]] = [("mode", cfg.mode), ("n_trials", cfg.n_trials),
                                      ("failed_trials", sum(not t.ok for t in summary.trials))]
    if summary.best_by_residual is not None:
        best = summary.best_by_residual
        save_curve(best.curve, out / "best_residual.fc")
        rows += [("best_residual_trial", best.trial), ("best_residual", float(best.residual))]
        if summary.best_by_chamfer is not None:
            save_curve(summary.best_by_chamfer.curve, out / "best_chamfer.fc")
            rows += [("best_chamfer_trial", summary.best_by_chamfer.trial),
                     ("best_chamfer", float(summary.best_by_chamfer.chamfer))]
        if truth is not None:
            st, sb = sample_equispaced(truth, k_top), sample_equispaced(best.curve, k_top)
            rows += [("best_residual_area_error", float(area_error(st, sb)))]
        sbuf = io.StringIO()
        sw = csv.writer(sbuf, lineterminator="\n")
        sw.writerow(["node", "x", "y", "spread"])
        for i, ((x, y), s) in enumerate(zip(summary.reference_nodes, summary.spread)):
            sw.writerow([i, f"{x:.17g}", f"{y:.17g}", f"{s:.17g}"])
        _write(out / "spread.csv", sbuf.getvalue())
        rows += [("mean_spread", float(np.mean(summary.spread))), ("max_spread", float(np.max(summary.spread)))]
        if not args.no_figures:
            others = [sample_equispaced(c, k_top).nodes for c in summary.ensemble.curves]
            plotting.plot_spread(summary.reference_nodes, summary.spread, out / "spread.svg", others)
            curves, labels = [summary.reference_nodes], ["best residual"]
            if truth is not None:
                curves.insert(0, sample_equispaced(truth, k_top).nodes)
                labels.insert(0, "truth")
            plotting.plot_overlay(curves, labels, out / "overlay.svg")
    _write(out / "summary.csv", _metrics_csv(rows))
    return EXIT_OK


def cmd_lsm_init(args) -> int:
    data, _ = load_dataset(args.data)
    if abs(data.grid.k_min - args.k) > 1e-12:
        raise DatasetError(f"dataset does not contain k={args.k} as its first frequency (k_1={data.grid.k_min})")
    setup, d = data.setups[0], data.data[0]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    levels = [args.level] if not args.sweep else [round(x, 2) for x in np.arange(0.2, 0.85, 0.1)]
    cfg = LsmConfig(alpha=args.alpha, n_star=args.n_star, resolution=args.resolution, level=levels[0])
    field = indicator_field(d, setup, cfg)
    _write(out / "indicator.csv", field.csv())
    main_curve = None
    for lev in levels:
        lcfg = LsmConfig(cfg.alpha, cfg.n_star, cfg.box, cfg.resolution, lev)
        try:
            curve = extract_initial_curve(field, lcfg, setup.k)
        except ExtractionError as exc:
            if not args.sweep:
                raise
            logger.warning("level %.2f: %s", lev, exc)
            continue
        name = "init.fc" if not args.sweep else f"init_level_{lev:.2f}.fc"
        save_curve(curve, out / name)
        if main_curve is None or abs(lev - args.level) < 1e-9:
            main_curve = curve
        if not args.no_figures:
            fig = "indicator.svg" if not args.sweep else f"indicator_level_{lev:.2f}.svg"
            plotting.plot_indicator(field.xs, field.ys, field.values, out / fig, sample_equispaced(curve, setup.k).nodes)
    if main_curve is None:
        raise ExtractionError("no level in the sweep produced a closed contour")
    if args.sweep:
        save_curve(main_curve, out / "init.fc")
    return EXIT_OK


def cmd_metrics(args) -> int:
    a, b = load_curve(args.curve_a), load_curve(args.curve_b)
    sa, sb = sample_equispaced(a, args.k), sample_equispaced(b, args.k)
    text = _metrics_csv([("chamfer", float(chamfer(sa, sb))), ("area_error", float(area_error(sa, sb)))])
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def cmd_plot(args) -> int:
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.kind == "overlay":
        curves = [sample_equispaced(load_curve(p), args.k).nodes for p in args.inputs]
        labels = args.labels.split(",") if args.labels else [Path(p).stem for p in args.inputs]
        if len(labels) != len(curves):
            raise ValueError("need one label per curve")
        plotting.plot_overlay(curves, labels, out)
    elif args.kind == "residuals":
        rows = _read_csv(args.inputs[0])
        if not rows or "residual_out" not in rows[0]:
            raise ValueError("residual plot needs a visits.csv file")
        plotting.plot_residuals([float(r["k"]) for r in rows], [float(r["residual_out"]) for r in rows], out)
    elif args.kind == "spread":
        rows = _read_csv(args.inputs[0])
        if not rows or "spread" not in rows[0]:
            raise ValueError("spread plot needs a spread.csv file")
        nodes = np.array([[float(r["x"]), float(r["y"])] for r in rows])
        plotting.plot_spread(nodes, np.array([float(r["spread"]) for r in rows]), out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _grid_args(p):
    g = p.add_argument_group("frequency grid")
    g.add_argument("--k-min", type=float)
    g.add_argument("--dk", type=float)
    g.add_argument("--n-k", type=int, help="number of grid frequencies")
    g.add_argument("--k-max", type=float, help="alternative to --n-k")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS, help="more logging (repeatable)")
    parser = argparse.ArgumentParser(prog="scatcli", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", parents=[common], help="forward data for a curve on a frequency grid")
    p.add_argument("curve", help="curve file")
    p.add_argument("-o", "--out", required=True, help="dataset CSV to write")
    p.add_argument("--config")
    _grid_args(p)
    p.add_argument("--radius", type=float, help="receiver circle radius")
    p.add_argument("--noise", type=float, help="relative complex Gaussian noise level")
    p.add_argument("--seed", type=int)
    p.add_argument("--synthesis-nodes", type=int, help="minimum boundary nodes for the truth curve")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("reconstruct", parents=[common], help="run CIF, SCIF or random-start trials")
    p.add_argument("data", help="dataset CSV")
    p.add_argument("-o", "--out", required=True, help="result directory")
    p.add_argument("--config")
    _grid_args(p)
    p.add_argument("--mode", choices=("cif", "scif", "random-init-cif"))
    p.add_argument("--method")
    p.add_argument("--filter")
    p.add_argument("--maxit", type=int)
    p.add_argument("--n-sd", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-trials", type=int)
    p.add_argument("--p", type=float, help="probability of stepping up in SCIF")
    p.add_argument("--max-path-len", type=int)
    p.add_argument("--init", help="initial curve file, or 'lsm'")
    p.add_argument("--level", type=float, default=0.5, help="LSM contour level when --init lsm")
    p.add_argument("--truth", help="truth curve file for error metrics")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("lsm-init", parents=[common], help="linear sampling initial guess at the lowest frequency")
    p.add_argument("data")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--k", type=float, default=1.0, help="expected lowest frequency")
    p.add_argument("--alpha", type=float, default=1e-3)
    p.add_argument("--n-star", type=int, default=10)
    p.add_argument("--resolution", type=int, default=201)
    p.add_argument("--level", type=float, default=0.5)
    p.add_argument("--sweep", action="store_true", help="extract at levels 0.2, 0.3, ..., 0.8")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_lsm_init)

    p = sub.add_parser("metrics", parents=[common], help="Chamfer distance and area error between two curves")
    p.add_argument("curve_a", help="reference (truth) curve")
    p.add_argument("curve_b")
    p.add_argument("--k", type=float, default=1.0, help="sampling frequency for the node polygons")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("plot", parents=[common], help="render figures from curve or CSV files")
    p.add_argument("kind", choices=("overlay", "residuals", "spread"))
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--out", required=True, help="figure path (.svg or .png)")
    p.add_argument("--labels", help="comma separated labels for overlay")
    p.add_argument("--k", type=float, default=1.0)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NUMERICAL_ERRORS as exc:
        print(f"scatcli: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except VALIDATION_ERRORS as exc:
        print(f"scatcli: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
