"""Object configurations and (dis)similarity matrices.

Three metrics are supported: Euclidean distance (ED), city-block monomers
hybridized by geometric mean (CB) and the exponential shape metric (XR).
Dissimilarities are turned into similarities with ``s = 1 / (1 + d)``.

Every kernel works on a stack of configurations ``(N, n, P)`` so the field
scanner can evaluate thousands of drifter positions at once.  Reductions over
the parameter axis are written as explicit loops so that a point's result is
bit-identical whatever batch it is evaluated in.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

RESERVED_CHARS = frozenset("()- ")


class ConfigError(ValueError):
    """Invalid object configuration or metric settings."""


class Metric(str, enum.Enum):
    ED = "ED"
    CB = "CB"
    XR = "XR"

    @classmethod
    def parse(cls, text: str) -> "Metric":
        try:
            return cls(text.strip().upper())
        except ValueError:
            raise ConfigError(f"unknown metric {text!r} (expected ed, cb or xr)") from None


class Semantics(str, enum.Enum):
    SIMILARITY = "similarity"
    DISSIMILARITY = "dissimilarity"


@dataclass(frozen=True)
class ObjectConfig:
    """Named objects with coordinates; one of them is the drifter."""

    names: tuple[str, ...]
    coords: tuple[tuple[float, ...], ...]
    drifter: str = "Dr"

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(
            self, "coords", tuple(tuple(float(c) for c in row) for row in self.coords)
        )
        if len(self.names) != len(self.coords):
            raise ConfigError("names and coordinates differ in length")
        for name in self.names:
            if not name or RESERVED_CHARS & set(name):
                raise ConfigError(
                    f"invalid object name {name!r}: must be nonempty without '(', ')', '-' or spaces"
                )
        if len(set(self.names)) != len(self.names):
            raise ConfigError("object names must be unique")
        if self.drifter not in self.names:
            raise ConfigError(f"drifter {self.drifter!r} is not among the objects")
        if len(self.names) < 3:
            raise ConfigError("need at least two fixed objects plus the drifter")
        dim = len(self.coords[0])
        if dim < 1:
            raise ConfigError("objects need at least one coordinate")
        for name, row in zip(self.names, self.coords):
            if len(row) != dim:
                raise ConfigError(
                    f"object {name!r} has {len(row)} coordinates, expected {dim}"
                )
            if not all(math.isfinite(c) for c in row):
                raise ConfigError(f"object {name!r} has non-finite coordinates")

    @classmethod
    def from_mapping(cls, objects: Mapping[str, Sequence[float]], drifter: str = "Dr"):
        return cls(tuple(objects), tuple(tuple(v) for v in objects.values()), drifter)

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def dim(self) -> int:
        return len(self.coords[0])

    @property
    def drifter_index(self) -> int:
        return self.names.index(self.drifter)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coords, dtype=float)

    @property
    def fixed_names(self) -> tuple[str, ...]:
        return tuple(nm for nm in self.names if nm != self.drifter)

    @property
    def fixed_array(self) -> np.ndarray:
        keep = [i for i, nm in enumerate(self.names) if nm != self.drifter]
        return self.array[keep]

    @property
    def centroid(self) -> np.ndarray:
        return self.fixed_array.mean(axis=0)

    @property
    def fo_extent(self) -> float:
        """Diameter of the fixed-object set."""
        pts = self.fixed_array
        diff = pts[:, None, :] - pts[None, :, :]
        return float(np.sqrt((diff**2).sum(axis=-1)).max())

    def with_drifter(self, position: Iterable[float]) -> "ObjectConfig":
        pos = tuple(float(c) for c in position)
        coords = list(self.coords)
        coords[self.drifter_index] = pos
        return ObjectConfig(self.names, tuple(coords), self.drifter)

    def translated(self, shift: Iterable[float]) -> "ObjectConfig":
        v = tuple(float(c) for c in shift)
        coords = tuple(tuple(c + d for c, d in zip(row, v)) for row in self.coords)
        return ObjectConfig(self.names, coords, self.drifter)

    def relabeled(self, order: Sequence[int]) -> "ObjectConfig":
        return ObjectConfig(
            tuple(self.names[i] for i in order),
            tuple(self.coords[i] for i in order),
            self.drifter,
        )


@dataclass(frozen=True)
class MetricSpec:
    kind: Metric = Metric.ED
    b: float = 1.50
    cb_floor: float = 1e-9
    conversion: str = "reciprocal"

    def __post_init__(self):
        object.__setattr__(self, "kind", Metric.parse(str(getattr(self.kind, "value", self.kind))))
        if not self.b > 1.0:
            raise ConfigError(f"XR base b must be > 1, got {self.b}")
        if not self.cb_floor > 0.0:
            raise ConfigError(f"cb_floor must be > 0, got {self.cb_floor}")
        if self.conversion != "reciprocal":
            raise ConfigError(f"unsupported conversion {self.conversion!r}")


@dataclass(frozen=True, eq=False)
class SquareMatrix:
    names: tuple[str, ...]
    values: np.ndarray
    semantics: Semantics

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        n = len(self.names)
        if vals.shape != (n, n):
            raise ConfigError(f"matrix shape {vals.shape} does not match {n} names")
        vals.setflags(write=False)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "semantics", Semantics(self.semantics))

    @property
    def n(self) -> int:
        return len(self.names)

    def __getitem__(self, pair: tuple[str, str]) -> float:
        i, j = (self.names.index(p) for p in pair)
        return float(self.values[i, j])

    def restrict(self, labels: Iterable[str]) -> "SquareMatrix":
        keep = [i for i, nm in enumerate(self.names) if nm in set(labels)]
        return SquareMatrix(
            tuple(self.names[i] for i in keep), self.values[np.ix_(keep, keep)], self.semantics
        )


# -- stacked kernels ---------------------------------------------------------


def _abs_diff(points: np.ndarray, p: int) -> np.ndarray:
    col = points[..., p]
    return np.abs(col[..., :, None] - col[..., None, :])


def _euclid_stack(points: np.ndarray) -> np.ndarray:
    acc = np.zeros(points.shape[:-1] + points.shape[-2:-1])
    for p in range(points.shape[-1]):
        d = _abs_diff(points, p)
        acc += d * d
    return np.sqrt(acc)


def _monomer_log_stack(points: np.ndarray, p: int, spec: MetricSpec) -> np.ndarray:
    """Natural log of one monomer matrix (dissimilarity for CB, similarity for XR)."""
    d = _abs_diff(points, p)
    if spec.kind is Metric.XR:
        return -d * math.log(spec.b)
    if spec.kind is Metric.CB:
        return np.log(np.maximum(d, spec.cb_floor))
    raise ConfigError("Euclidean distances are not hybridized from monomers")


def _hybrid_log_stack(points: np.ndarray, spec: MetricSpec) -> np.ndarray:
    acc = np.zeros(points.shape[:-1] + points.shape[-2:-1])
    P = points.shape[-1]
    for p in range(P):
        acc += _monomer_log_stack(points, p, spec)
    return acc / P


def _duplicates(points: np.ndarray) -> np.ndarray:
    same = np.ones(points.shape[:-1] + points.shape[-2:-1], dtype=bool)
    for p in range(points.shape[-1]):
        same &= _abs_diff(points, p) == 0.0
    return same


def similarity_stack(points: np.ndarray, spec: MetricSpec) -> tuple[np.ndarray, np.ndarray]:
    """Similarities and their natural logs for a stack of configurations.

    ``points`` has shape ``(..., n, P)``; both outputs have shape ``(..., n, n)``
    with unit diagonal.  The log channel is computed directly (never as
    ``log(s)``) so far-field intergroup similarities survive underflow.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[-2]
    eye = np.eye(n, dtype=bool)
    if spec.kind is Metric.XR:
        log_s = _hybrid_log_stack(points, spec)
        s = np.exp(log_s)
    else:
        if spec.kind is Metric.ED:
            d = _euclid_stack(points)
        else:
            d = np.exp(_hybrid_log_stack(points, spec))
            d[_duplicates(points)] = 0.0
        s = 1.0 / (1.0 + d)
        log_s = -np.log1p(d)
    s[..., eye] = 1.0
    log_s[..., eye] = 0.0
    return s, log_s


# -- single-matrix operations -------------------------------------------------


def euclidean_dissimilarity(cfg: ObjectConfig) -> SquareMatrix:
    return SquareMatrix(cfg.names, _euclid_stack(cfg.array), Semantics.DISSIMILARITY)


def monomer_matrix(cfg: ObjectConfig, p: int, spec: MetricSpec) -> SquareMatrix:
    """Per-parameter matrix: floored |dx| for CB, ``b**-|dx|`` for XR."""
    if not 0 <= p < cfg.dim:
        raise ConfigError(f"parameter index {p} out of range for dimension {cfg.dim}")
    if spec.kind is Metric.ED:
        raise ConfigError("Euclidean distances are not hybridized from monomers")
    eye = np.eye(cfg.n, dtype=bool)
    if spec.kind is Metric.XR:
        vals = np.exp(_monomer_log_stack(cfg.array, p, spec))
        vals[eye] = 1.0
        return SquareMatrix(cfg.names, vals, Semantics.SIMILARITY)
    vals = np.maximum(_abs_diff(cfg.array, p), spec.cb_floor)
    vals[eye] = 0.0
    return SquareMatrix(cfg.names, vals, Semantics.DISSIMILARITY)


def hybridize_geometric_mean(monomers: Sequence[SquareMatrix]) -> SquareMatrix:
    """Cell-wise geometric mean of monomer matrices, evaluated in log space."""
    if not monomers:
        raise ConfigError("need at least one monomer matrix")
    first = monomers[0]
    for m in monomers[1:]:
        if m.names != first.names or m.semantics != first.semantics:
            raise ConfigError("monomer matrices disagree in names or semantics")
    n = first.n
    off = ~np.eye(n, dtype=bool)
    acc = np.zeros((n, n))
    for m in monomers:
        if np.any(m.values[off] <= 0):
            raise ConfigError("monomer entries must be positive off the diagonal")
        acc[off] += np.log(m.values[off])
    out = np.exp(acc / len(monomers))
    out[~off] = 1.0 if first.semantics is Semantics.SIMILARITY else 0.0
    return SquareMatrix(first.names, out, first.semantics)


def similarity_matrix(cfg: ObjectConfig, spec: MetricSpec) -> SquareMatrix:
    """The similarity matrix the grouping engine consumes."""
    s, _ = similarity_stack(cfg.array, spec)
    return SquareMatrix(cfg.names, s, Semantics.SIMILARITY)

