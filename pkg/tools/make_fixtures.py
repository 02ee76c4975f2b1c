"""Regenerate the approximate benchmark outlines in src/softscat/data/.

The plane and letter outlines used in the literature are spline curves whose
coordinates were never published.  These are hand-traced polygons with rounded
corners, low-pass filtered and refitted in arclength.  They are
approximations, not the originals.
"""

from __future__ import annotations

import argparse

import numpy as np
from shapely.geometry import Polygon

from softscat.curvekit import (
    FourierCurve,
    fixture_path,
    is_admissible,
    resample_arclength,
    save_curve,
    speed_deviation,
    trimmed,
)

PLANE = [
    (1.5, 0.0), (1.25, 0.22), (0.45, 0.22), (-0.05, 1.2), (-0.5, 1.2), (-0.3, 0.22),
    (-0.9, 0.22), (-1.15, 0.65), (-1.45, 0.65), (-1.3, 0.0),
]
COMPLICATED_PLANE = [
    (1.55, 0.0), (1.3, 0.22), (0.55, 0.22), (0.25, 0.62), (0.3, 0.8), (0.0, 0.8), (-0.2, 1.35),
    (-0.65, 1.35), (-0.4, 0.22), (-0.95, 0.22), (-1.2, 0.7), (-1.5, 0.7), (-1.35, 0.0),
]
LETTER_H = [
    (-0.9, -1.0), (-0.45, -1.0), (-0.45, -0.2), (0.45, -0.2), (0.45, -1.0), (0.9, -1.0),
    (0.9, 1.0), (0.45, 1.0), (0.45, 0.2), (-0.45, 0.2), (-0.45, 1.0), (-0.9, 1.0),
]


def letter_e(arm: float) -> list[tuple[float, float]]:
    """'E' with arms reaching x = arm (larger arm means deeper gaps)."""
    return [
        (-0.8, -1.0), (arm, -1.0), (arm, -0.6), (-0.35, -0.6), (-0.35, -0.2), (arm - 0.15, -0.2),
        (arm - 0.15, 0.2), (-0.35, 0.2), (-0.35, 0.6), (arm, 0.6), (arm, 1.0), (-0.8, 1.0),
    ]


# name: (vertices, mirror about the x axis, corner radius, arclength taper width, modes)
SHAPES = {
    "simple_plane": (PLANE, True, 0.2, 30.0, 201),
    "complicated_plane": (COMPLICATED_PLANE, True, 0.15, 40.0, 281),
    "letter_h": (LETTER_H, False, None, 30.0, 201),
    "letter_e1": (letter_e(0.4), False, None, 30.0, 201),
    "letter_e2": (letter_e(0.6), False, None, 30.0, 201),
    "letter_e3": (letter_e(0.8), False, None, 30.0, 201),
}


def densify(vertices, n: int = 4096) -> np.ndarray:
    v = np.asarray(vertices, dtype=float)
    closed = np.vstack([v, v[:1]])
    seg = np.hypot(*np.diff(closed, axis=0).T)
    s = np.concatenate([[0], np.cumsum(seg)])
    t = np.linspace(0, s[-1], n, endpoint=False)
    return np.column_stack([np.interp(t, s, closed[:, 0]), np.interp(t, s, closed[:, 1])])


def rounded(vertices, radius: float) -> np.ndarray:
    """Round convex and concave corners to the given radius (opening then closing)."""
    poly = Polygon(vertices).buffer(-radius, quad_segs=64).buffer(2 * radius, quad_segs=64)
    poly = poly.buffer(-radius, quad_segs=64)
    return np.array(poly.exterior.coords)[:-1]


def smooth(points: np.ndarray, width: float) -> np.ndarray:
    z = points[:, 0] + 1j * points[:, 1]
    f = np.fft.fft(z)
    m = np.fft.fftfreq(z.size, 1 / z.size)
    z = np.fft.ifft(f * np.exp(-((m / width) ** 2)))
    return np.column_stack([z.real, z.imag])


def arclength_taper(points: np.ndarray, width: float, rounds: int = 3, n: int = 1024) -> np.ndarray:
    """Gaussian low-pass in the arclength modes, repeated so the spectrum of the
    refitted arclength curve decays fast enough for truncation."""
    for _ in range(rounds):
        fit = resample_arclength(points, n_modes=n // 2 - 1)
        zc = fit.coeffs_z * np.exp(-((fit.modes / width) ** 2))
        z = FourierCurve.from_z_coeffs(zc, fit.length)._grid_values(n)
        points = np.column_stack([z.real, z.imag])
    return points


def build(name: str) -> FourierCurve:
    verts, mirror, radius, width, n_modes = SHAPES[name]
    verts = list(verts)
    if mirror:
        verts = verts + [(x, -y) for x, y in reversed(verts[1:-1])]
    if radius is None:
        pts = smooth(densify(verts), 12.0)
    else:
        pts = smooth(densify(rounded(verts, radius)), 40.0)
    pts = arclength_taper(pts[::4], width)
    return trimmed(resample_arclength(pts, n_modes=n_modes), rel_tol=1e-13)


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("names", nargs="*", default=sorted(SHAPES))
    args = parser.parse_args(argv)
    for name in args.names:
        curve = build(name)
        adm = is_admissible(curve, 1.0)
        save_curve(curve, fixture_path(name))
        print(
            f"{name}: modes={curve.n_modes} L={curve.length:.4f} admissible(k=1)={adm.ok} "
            f"ratio={adm.energy_ratio:.4f} speed_dev={speed_deviation(curve):.1e}"
        )


if __name__ == "__main__":
    main()
