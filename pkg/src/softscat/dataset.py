"""Multi-frequency dataset files.

Layout: a JSON header spread over lines starting with ``#``, then CSV
records ``k_index,dir_index,rec_index,re,im`` (all indices zero-based, data
direction-major within a frequency) in 17-significant-digit decimal.
"""

from __future__ import annotations

import hashlib
import io
import json
from pathlib import Path

import numpy as np

from .continuation import FrequencyGrid, MultiFrequencyData
from .curvekit import FourierCurve, format_curve
from .forward import ScatteringData, ScatteringSetup

FORMAT = "softscat-dataset"
VERSION = 1
COLUMNS = "k_index,dir_index,rec_index,re,im"


class DatasetError(ValueError):
    pass


def curve_hash(curve: FourierCurve) -> str:
    return hashlib.sha256(format_curve(curve).encode()).hexdigest()


def add_noise(data: MultiFrequencyData, level: float, rng: np.random.Generator) -> MultiFrequencyData:
    """Additive complex Gaussian noise with ||e|| ~ level * ||u|| at each frequency."""
    if level == 0:
        return data
    noisy = []
    for d in data.data:
        m = d.values.size
        e = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2 * m)
        noisy.append(ScatteringData(d.values + level * d.norm() * e, d.n_directions, d.n_receivers))
    return MultiFrequencyData(data.grid, data.setups, noisy)


def format_dataset(data: MultiFrequencyData, provenance: dict | None = None) -> str:
    g = data.grid
    header = {
        "format": FORMAT,
        "version": VERSION,
        "grid": {"k_min": g.k_min, "dk": g.dk, "n": g.n},
        "frequencies": [
            {"k": s.k, "n_directions": s.n_directions, "n_receivers": s.n_receivers, "radius": s.radius}
            for s in data.setups
        ],
        "provenance": provenance or {},
    }
    buf = io.StringIO()
    for line in json.dumps(header, indent=1, sort_keys=True).splitlines():
        buf.write(f"# {line}\n")
    buf.write(COLUMNS + "\n")
    for ki, d in enumerate(data.data):
        grid = d.grid()
        for n in range(d.n_directions):
            for r in range(d.n_receivers):
                v = grid[n, r]
                buf.write(f"{ki},{n},{r},{v.real:.17g},{v.imag:.17g}\n")
    return buf.getvalue()


def save_dataset(data: MultiFrequencyData, path, provenance: dict | None = None) -> None:
    Path(path).write_text(format_dataset(data, provenance))


def parse_dataset(text: str, source: str = "<string>") -> tuple[MultiFrequencyData, dict]:
    head_lines, body = [], []
    for line in text.splitlines():
        if line.startswith("#"):
            if body:
                raise DatasetError(f"{source}: header line after data records")
            head_lines.append(line[1:])
        elif line.strip():
            body.append(line)
    try:
        header = json.loads("\n".join(head_lines))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{source}: malformed header ({exc})") from None
    if not isinstance(header, dict) or header.get("format") != FORMAT:
        raise DatasetError(f"{source}: not a {FORMAT} file")
    if header.get("version") != VERSION:
        raise DatasetError(f"{source}: unsupported dataset version {header.get('version')}")
    try:
        gh = header["grid"]
        grid = FrequencyGrid(float(gh["k_min"]), float(gh["dk"]), int(gh["n"]))
        setups = [
            ScatteringSetup(float(f["k"]), int(f["n_directions"]), int(f["n_receivers"]), float(f["radius"]))
            for f in header["frequencies"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"{source}: bad header field ({exc})") from None
    if len(setups) != len(grid):
        raise DatasetError(f"{source}: header lists {len(setups)} frequencies, grid has {len(grid)}")
    if not body or body[0].strip() != COLUMNS:
        raise DatasetError(f"{source}: expected column line '{COLUMNS}'")
    records = body[1:]
    expected = sum(s.size for s in setups)
    if len(records) != expected:
        raise DatasetError(f"{source}: expected {expected} records, found {len(records)}")
    n_head = len(head_lines) + 2
    values = np.empty(expected, dtype=complex)
    pos = 0
    for ki, s in enumerate(setups):
        for n in range(s.n_directions):
            for r in range(s.n_receivers):
                line = records[pos]
                parts = line.split(",")
                lineno = n_head + pos
                if len(parts) != 5:
                    raise DatasetError(f"{source}:{lineno}: expected 5 fields, got {len(parts)}")
                try:
                    idx = (int(parts[0]), int(parts[1]), int(parts[2]))
                    values[pos] = complex(float(parts[3]), float(parts[4]))
                except ValueError as exc:
                    raise DatasetError(f"{source}:{lineno}: {exc}") from None
                if not np.isfinite(values[pos]):
                    raise DatasetError(f"{source}:{lineno}: non-finite value")
                if idx != (ki, n, r):
                    raise DatasetError(f"{source}:{lineno}: indices {idx} out of order (expected {(ki, n, r)})")
                pos += 1
    data, start = [], 0
    for s in setups:
        data.append(ScatteringData(values[start : start + s.size], s.n_directions, s.n_receivers))
        start += s.size
    try:
        mfd = MultiFrequencyData(grid, setups, data)
    except ValueError as exc:
        raise DatasetError(f"{source}: {exc}") from None
    return mfd, header.get("provenance", {})


def load_dataset(path) -> tuple[MultiFrequencyData, dict]:
    path = Path(path)
    return parse_dataset(path.read_text(), str(path))
