"""Aura extent, intergroup-similarity fields and far-field ray profiles."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .ia import IASettings, root_groups
from .metrics import Metric, MetricSpec, ObjectConfig
from .scan import DrifterField, LabelField, bisect_many, evaluate_parallel

# aura cube edge / fixed-object size reported for the two-object configuration
REFERENCE_RATIOS = {Metric.ED: 6.4, Metric.CB: 10.3, Metric.XR: 6.8}

MAX_DISTANCE = 1e12


class AuraError(RuntimeError):
    pass


def lattice_directions(dim: int = 3) -> np.ndarray:
    """The 3**dim - 1 axis and diagonal unit vectors (26 in 3-D)."""
    vecs = [v for v in itertools.product((-1, 0, 1), repeat=dim) if any(v)]
    arr = np.array(vecs, dtype=float)
    return arr / np.linalg.norm(arr, axis=1, keepdims=True)


def fibonacci_directions(count: int) -> np.ndarray:
    i = np.arange(count) + 0.5
    z = 1.0 - 2.0 * i / count
    r = np.sqrt(1.0 - z * z)
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


@dataclass(frozen=True, eq=False)
class AuraReport:
    directions: np.ndarray
    radii: np.ndarray
    edges: np.ndarray
    outside_signature: str
    fo_extent: float
    ratio: float
    metric: Metric | None = None

    @property
    def cube_edge(self) -> float:
        return float(self.edges.max())

    @property
    def reference_ratio(self) -> float | None:
        return REFERENCE_RATIOS.get(self.metric)

    def as_text(self) -> str:
        lines = [
            f"metric = {self.metric.value if self.metric else ''}",
            f"outside_signature = {self.outside_signature}",
            f"fo_extent = {self.fo_extent:.17g}",
            f"cube_edge = {self.cube_edge:.17g}",
            "edges = " + ",".join(f"{e:.17g}" for e in self.edges),
            f"ratio = {self.ratio:.17g}",
            f"reference_ratio = {self.reference_ratio if self.reference_ratio else 'n/a'}",
            f"directions = {len(self.radii)}",
        ]
        for u, r in zip(self.directions, self.radii):
            lines.append("radius[" + ",".join(f"{c:.6f}" for c in u) + f"] = {r:.17g}")
        return "\n".join(lines) + "\n"


def _isolates(signature: str, cfg: ObjectConfig) -> bool:
    return frozenset({cfg.drifter}) in root_groups(signature, cfg.names)


def aura_extent(
    cfg: ObjectConfig,
    spec: MetricSpec,
    ia: IASettings = IASettings(),
    directions: np.ndarray | None = None,
    r_max: float | None = None,
    growth: float = 1.1,
    tol: float = 1e-13,
    workers: int = 1,
) -> AuraReport:
    """March rays out of the fixed-object centroid to the last grouping change.

    Radii grow by ``growth`` per step up to ``r_max``; the outermost change is
    then bisected to ``tol``.  Everything from 1.5x the outermost radius to
    ``r_max`` must share one signature that isolates the drifter at the root.
    """
    fo = cfg.fo_extent
    if directions is None:
        directions = lattice_directions(cfg.dim)
    directions = np.asarray(directions, dtype=float)
    if len(directions) < min(26, 3**cfg.dim - 1):
        raise ValueError("need at least 26 directions (all lattice directions below 3-D)")
    if r_max is None:
        r_max = 50.0 * fo
    if not r_max > fo:
        raise ValueError("r_max must exceed the fixed-object extent")
    r0 = 1e-2 * fo
    k_max = math.ceil(math.log(r_max / r0) / math.log(growth))
    radii = r0 * growth ** np.arange(k_max)
    radii = np.append(radii[radii < r_max], r_max)
    centre = cfg.centroid
    fld = DrifterField(cfg, spec, ia)
    pts = centre + (directions[:, None, :] * radii[None, :, None]).reshape(-1, cfg.dim)
    sigs = np.array(evaluate_parallel(fld, pts, workers).signatures, dtype=object)
    sigs = sigs.reshape(len(directions), len(radii))

    outside = sigs[0, -1]
    starts = np.empty(len(directions))
    brackets = []
    for d, row in enumerate(sigs):
        if row[-1] != outside:
            raise AuraError(
                f"signatures at r_max differ between directions ({outside!r} vs {row[-1]!r}); "
                "aura not enclosed; raise r_max"
            )
        inside = np.flatnonzero(row != outside)
        if inside.size == 0:
            starts[d] = r0
            continue
        k = int(inside[-1])
        if k + 1 >= len(radii) - 1:
            raise AuraError("aura not enclosed; raise r_max")
        brackets.append((d, radii[k], radii[k + 1]))
    out_radii = starts
    if brackets:
        rows = np.array([d for d, _, _ in brackets])
        lo = np.array([[a] for _, a, _ in brackets])
        hi = np.array([[b] for _, _, b in brackets])
        u = directions[rows]

        def evaluate(r, live):
            return fld.evaluate(centre + r * u[live]).signatures

        lo, hi, _ = bisect_many(evaluate, lo, hi, lambda m, sig: sig != outside, tol, 200)
        lo, hi = lo[:, 0], hi[:, 0]
        out_radii[rows] = (lo + hi) / 2.0
    if np.any(1.5 * out_radii > r_max):
        raise AuraError("aura not enclosed; raise r_max")
    if not _isolates(outside, cfg):
        raise AuraError(f"outside signature {outside!r} does not isolate the drifter")
    out_radii = np.array(out_radii)
    ends = centre + directions * out_radii[:, None]
    edges = ends.max(axis=0) - ends.min(axis=0)
    return AuraReport(directions, out_radii, edges, outside, fo, float(edges.max() / fo), spec.kind)


def omega_field(f: LabelField) -> np.ndarray:
    """The stored -ln(Omega) channel shaped like the scan grid."""
    return np.asarray(f.neg_ln_omega).reshape(f.grid.shape)


def _fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float((resid**2).sum()) / ss_tot
    return float(slope), float(intercept), r2


@dataclass(frozen=True, eq=False)
class RayProfile:
    origin: np.ndarray
    direction: np.ndarray
    distances: np.ndarray
    omega: np.ndarray
    neg_ln_omega: np.ndarray
    signatures: list[str]
    tail_start: int
    slope: float
    intercept: float
    r2: float
    log_slope: float
    log_intercept: float
    log_r2: float
    note: str = ""

    @property
    def tail_signature(self) -> str:
        return self.signatures[-1]


def far_field_profile(
    cfg: ObjectConfig,
    spec: MetricSpec,
    ia: IASettings = IASettings(),
    direction=(1.0, 1.0, 1.0),
    d_min: float | None = None,
    d_max: float | None = None,
    samples: int = 64,
    origin=None,
    workers: int = 1,
) -> RayProfile:
    """-ln(Omega) along a log-spaced ray with linear and log-linear tail fits.

    The fits use the trailing run of samples that share the last signature.
    """
    fo = cfg.fo_extent
    d_min = 10.0 * fo if d_min is None else float(d_min)
    d_max = 1e3 * fo if d_max is None else float(d_max)
    if samples < 16:
        raise ValueError("need at least 16 samples")
    if not d_min > 0 or d_max / d_min < 10:
        raise ValueError("need d_min > 0 and d_max / d_min >= 10")
    note = ""
    if d_max > MAX_DISTANCE:
        note = f"d_max {d_max:g} clamped to {MAX_DISTANCE:g}"
        d_max = MAX_DISTANCE
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    o = cfg.centroid if origin is None else np.asarray(origin, dtype=float)
    dist = np.geomspace(d_min, d_max, samples)
    ev = evaluate_parallel(DrifterField(cfg, spec, ia), o + dist[:, None] * u, workers)
    sigs = ev.signatures
    start = samples - 1
    while start > 0 and sigs[start - 1] == sigs[-1]:
        start -= 1
    y = ev.neg_ln_omega
    tail = slice(start, samples)
    if samples - start >= 2:
        lin = _fit(dist[tail], y[tail])
        log = _fit(np.log(dist[tail]), y[tail])
    else:
        lin = log = (math.nan, math.nan, math.nan)
    return RayProfile(o, u, dist, ev.omega, y, sigs, start, *lin, *log, note)
