"""Membrane crossings along a drifter path."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .ia import IASettings
from .metrics import MetricSpec, ObjectConfig
from .scan import DrifterField, _bisect

DENSE_FACTOR = 4


@dataclass(frozen=True)
class PathSpec:
    waypoints: tuple[tuple[float, ...], ...]
    samples_per_unit: float = 50.0
    kind: str = "polyline"

    def __post_init__(self):
        pts = tuple(tuple(float(c) for c in w) for w in self.waypoints)
        object.__setattr__(self, "waypoints", pts)
        if len(pts) < 2:
            raise ValueError("a path needs at least two waypoints")
        if self.kind not in ("segment", "polyline"):
            raise ValueError(f"unknown path kind {self.kind!r}")
        if self.kind == "segment" and len(pts) != 2:
            raise ValueError("a segment has exactly two waypoints")
        if any(len(p) != len(pts[0]) for p in pts):
            raise ValueError("waypoints differ in dimension")
        if any(a == b for a, b in zip(pts, pts[1:])):
            raise ValueError("consecutive waypoints must differ")
        if not self.samples_per_unit > 0:
            raise ValueError("samples_per_unit must be positive")

    @property
    def _cumulative(self) -> np.ndarray:
        w = np.array(self.waypoints)
        seg = np.linalg.norm(np.diff(w, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self) -> float:
        return float(self._cumulative[-1])

    def reversed(self) -> "PathSpec":
        return PathSpec(self.waypoints[::-1], self.samples_per_unit, self.kind)

    def position(self, t: float) -> np.ndarray:
        """Point at arc-length fraction ``t`` in [0, 1]."""
        w = np.array(self.waypoints)
        cum = self._cumulative
        s = min(max(t, 0.0), 1.0) * cum[-1]
        i = min(int(np.searchsorted(cum, s, side="right")) - 1, len(w) - 2)
        frac = (s - cum[i]) / (cum[i + 1] - cum[i])
        return w[i] + frac * (w[i + 1] - w[i])


@dataclass(frozen=True)
class CrossingEvent:
    t: float
    position: tuple[float, ...]
    sig_before: str
    sig_after: str
    width: float


def trace(path: PathSpec, classify: Callable[[np.ndarray], str], tol: float = 1e-12,
          max_events_per_interval: int = 16) -> list[CrossingEvent]:
    """Sample ``path``, re-check each quiet interval at 4x density, refine crossings."""
    n = max(2, math.ceil(path.length * path.samples_per_unit))
    ts = np.linspace(0.0, 1.0, n * DENSE_FACTOR + 1)
    coarse = ts[::DENSE_FACTOR]

    def classify_many(tt):
        if isinstance(classify, DrifterField):
            return classify.evaluate(np.array([path.position(t) for t in tt])).signatures
        return [classify(path.position(t)) for t in tt]

    sigs = dict(zip(coarse.tolist(), classify_many(coarse)))
    # dense re-check only inside intervals whose ends agree
    extra = []
    for a, b in zip(coarse[:-1], coarse[1:]):
        if sigs[float(a)] == sigs[float(b)]:
            extra.extend(np.linspace(a, b, DENSE_FACTOR + 1)[1:-1].tolist())
    if extra:
        sigs.update(zip(extra, classify_many(extra)))
    ordered = sorted(sigs)

    t_tol = tol / path.length

    def at(x):
        return classify(path.position(float(x[0])))

    events = []
    for a, b in zip(ordered[:-1], ordered[1:]):
        sa, sb = sigs[a], sigs[b]
        lo_t = a
        for _ in range(max_events_per_interval):
            if sa == sb:
                break
            lo, hi, s_hi = _bisect(at, np.array([lo_t]), np.array([b]), sa, t_tol, 200)
            after = s_hi if s_hi is not None else sb
            t = float((lo[0] + hi[0]) / 2.0)
            events.append(CrossingEvent(
                t, tuple(float(c) for c in path.position(t)), sa, after,
                float((hi[0] - lo[0]) * path.length),
            ))
            lo_t, sa = float(hi[0]), after
    return sorted(events, key=lambda e: e.t)


def trace_path(cfg: ObjectConfig, spec: MetricSpec, ia: IASettings, path: PathSpec,
               tol: float = 1e-12) -> list[CrossingEvent]:
    return trace(path, DrifterField(cfg, spec, ia), tol)
