"""Bit-exact CSV, PPM and manifest output, plus CSV readers for round trips."""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .scan import AXIS_NAMES, LabelField, MembranePoint, PointRecord

LABEL_TAIL = ["signature", "omega", "neg_ln_omega", "cycles", "degenerate"]
MEMBRANE_TAIL = ["sig_a", "sig_b", "width"]
PROFILE_COLUMNS = ["distance", "omega", "neg_ln_omega", "signature"]
CROSSING_COLUMNS = ["t", "sig_before", "sig_after", "width"]
WHITE = (255, 255, 255)


class OutputError(ValueError):
    """Refused to serialise a value (NaN or infinite)."""


def fmt(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise OutputError(f"refusing to write non-finite value {x!r}")
    return "%.17g" % x


def coord_columns(dim: int) -> list[str]:
    return list(AXIS_NAMES[:dim]) if dim <= 3 else [f"x{i}" for i in range(dim)]


def _write_rows(path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    # render everything first so a refused value leaves no partial file
    body = [list(header)] + [list(r) for r in rows]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(body)


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def _dim_of(header: list[str], tail: list[str], path) -> int:
    dim = len(header) - len(tail)
    if dim < 1 or header[dim:] != tail or header[:dim] != coord_columns(dim):
        raise ValueError(f"{path}: unexpected header {header}")
    return dim


# -- label fields ---------------------------------------------------------------


def write_label_csv(f: LabelField, path) -> None:
    pts = f.positions()
    rows = (
        [fmt(c) for c in pts[i]] + [
            f.signatures[i], fmt(f.omega[i]), fmt(f.neg_ln_omega[i]),
            str(int(f.cycles[i])), str(int(bool(f.degenerate[i]))),
        ]
        for i in range(f.grid.size)
    )
    _write_rows(path, coord_columns(f.grid.dim) + LABEL_TAIL, rows)


def read_label_csv(path) -> list[PointRecord]:
    header, rows = _read_rows(path)
    dim = _dim_of(header, LABEL_TAIL, path)
    return [
        PointRecord(tuple(float(c) for c in r[:dim]), r[dim], float(r[dim + 1]),
                    float(r[dim + 2]), int(r[dim + 3]), r[dim + 4] == "1")
        for r in rows
    ]


# -- membranes ------------------------------------------------------------------


def write_membrane_csv(points: Sequence[MembranePoint], path, dim: int | None = None) -> None:
    if dim is None:
        if not points:
            raise ValueError("dimension needed for an empty membrane file")
        dim = len(points[0].position)
    rows = ([fmt(c) for c in p.position] + [p.sig_a, p.sig_b, fmt(p.width)] for p in points)
    _write_rows(path, coord_columns(dim) + MEMBRANE_TAIL, rows)


def read_membrane_csv(path) -> list[MembranePoint]:
    header, rows = _read_rows(path)
    dim = _dim_of(header, MEMBRANE_TAIL, path)
    return [
        MembranePoint(tuple(float(c) for c in r[:dim]), r[dim], r[dim + 1], float(r[dim + 2]))
        for r in rows
    ]


# -- ray profiles -----------------------------------------------------------------


def write_profile_csv(profile, path) -> None:
    rows = (
        [fmt(d), fmt(o), fmt(y), s]
        for d, o, y, s in zip(profile.distances, profile.omega, profile.neg_ln_omega,
                              profile.signatures)
    )
    _write_rows(path, PROFILE_COLUMNS, rows)


def read_profile_csv(path) -> list[tuple[float, float, float, str]]:
    header, rows = _read_rows(path)
    if header != PROFILE_COLUMNS:
        raise ValueError(f"{path}: unexpected header {header}")
    return [(float(d), float(o), float(y), s) for d, o, y, s in rows]


# -- trajectory crossings -----------------------------------------------------------


def write_crossings_csv(events, path, dim: int) -> None:
    header = ["t"] + coord_columns(dim) + CROSSING_COLUMNS[1:]
    rows = (
        [fmt(e.t)] + [fmt(c) for c in e.position] + [e.sig_before, e.sig_after, fmt(e.width)]
        for e in events
    )
    _write_rows(path, header, rows)


def read_crossings_csv(path):
    from .trajectory import CrossingEvent

    header, rows = _read_rows(path)
    dim = len(header) - len(CROSSING_COLUMNS)
    if dim < 1 or header != ["t"] + coord_columns(dim) + CROSSING_COLUMNS[1:]:
        raise ValueError(f"{path}: unexpected header {header}")
    return [
        CrossingEvent(float(r[0]), tuple(float(c) for c in r[1:dim + 1]),
                      r[dim + 1], r[dim + 2], float(r[dim + 3]))
        for r in rows
    ]


# -- raster ---------------------------------------------------------------------------


def fnv1a32(data: bytes) -> int:
    h = 0x811C9DC5
    for byte in data:
        h = ((h ^ byte) * 0x01000193) & 0xFFFFFFFF
    return h


def signature_colour(signature: str) -> tuple[int, int, int]:
    h = fnv1a32(signature.encode("utf-8"))
    return (h >> 16) & 255, (h >> 8) & 255, h & 255


def colour_collisions(signatures: Iterable[str]) -> list[list[str]]:
    """Groups of distinct signatures that share a colour (white included)."""
    by_colour: dict[tuple[int, int, int], set[str]] = defaultdict(set)
    for s in set(signatures):
        by_colour[signature_colour(s)].add(s)
    return sorted(sorted(g) for c, g in by_colour.items() if len(g) > 1 or c == WHITE)


def render_rgb(f: LabelField) -> np.ndarray:
    """(height, width, 3) uint8 image; row 0 is the top of the second free axis."""
    if not f.grid.is_plane:
        raise ValueError("raster output needs a plane scan (two free axes)")
    palette = {s: signature_colour(s) for s in set(f.signatures)}
    rgb = np.array([WHITE if d else palette[s] for s, d in zip(f.signatures, f.degenerate)],
                   dtype=np.uint8)
    return rgb.reshape(f.grid.shape + (3,))[::-1]


def write_ppm(f: LabelField, path) -> None:
    img = render_rgb(f)
    h, w, _ = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if len(parts) < 4 or parts[0] != b"P6" or parts[3] != b"255":
        raise ValueError(f"{path}: not a P6 image with maxval 255")
    w, h = int(parts[1]), int(parts[2])
    # pixel bytes may start with whitespace, so slice from the end
    return np.frombuffer(data[len(data) - w * h * 3:], dtype=np.uint8).reshape(h, w, 3)


# -- manifest ---------------------------------------------------------------------------


def write_manifest(path, sections: Sequence[tuple[str, Sequence[str]]]) -> None:
    """Plain-text manifest made of ``[title]`` blocks of preformatted lines."""
    out = []
    for title, lines in sections:
        out.append(f"[{title}]")
        out.extend(lines)
        out.append("")
    Path(path).write_text("\n".join(out), encoding="utf-8")
