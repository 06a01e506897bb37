"""Drifter field scans, transition detection and boundary refinement."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .ia import IASettings, classify_stack, is_degenerate
from .metrics import MetricSpec, ObjectConfig, similarity_stack

AXIS_NAMES = "xyz"
DEFAULT_BUDGET = 1 << 22
CHUNK = 4096

Classifier = Callable[[np.ndarray], str]


class BudgetError(ValueError):
    pass


def axis_index(name: str | int) -> int:
    if isinstance(name, int):
        return name
    name = name.strip().lower()
    if name in AXIS_NAMES:
        return AXIS_NAMES.index(name)
    if name.startswith("x") and name[1:].isdigit():
        return int(name[1:])
    raise ValueError(f"unknown axis {name!r}")


def axis_name(index: int, dim: int) -> str:
    return AXIS_NAMES[index] if dim <= 3 else f"x{index}"


def axis_values(lo: float, hi: float, steps: int) -> np.ndarray:
    """``lo + i * h`` with ``h = (hi - lo) / (steps - 1)`` and ``hi`` exact.

    Doubling the number of intervals nests grids bit-exactly.
    """
    h = (hi - lo) / (steps - 1)
    vals = lo + np.arange(steps) * h
    vals[-1] = hi
    return vals


@dataclass(frozen=True)
class ScanGrid:
    """Free axes ``(axis, lo, hi, steps)`` plus fixed ``(axis, value)`` pairs.

    Flattened order has the first free axis varying fastest.
    """

    dim: int
    free: tuple[tuple[int, float, float, int], ...]
    fixed: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        free = tuple((int(a), float(lo), float(hi), int(st)) for a, lo, hi, st in self.free)
        fixed = tuple((int(a), float(v)) for a, v in self.fixed)
        object.__setattr__(self, "free", free)
        object.__setattr__(self, "fixed", fixed)
        used = [a for a, *_ in free] + [a for a, _ in fixed]
        if sorted(used) != list(range(self.dim)):
            raise ValueError("every axis must be either free or fixed exactly once")
        if not free:
            raise ValueError("need at least one free axis")
        for a, lo, hi, st in free:
            if not lo < hi:
                raise ValueError(f"axis {axis_name(a, self.dim)}: min must be < max")
            if st < 2:
                raise ValueError(f"axis {axis_name(a, self.dim)}: need at least 2 steps")

    @classmethod
    def plane(cls, axis="z", value=0.5, bounds=((-3.0, 4.0), (-3.0, 4.0)), steps=256, dim=3):
        fixed_ax = axis_index(axis)
        free_axes = [a for a in range(dim) if a != fixed_ax]
        if isinstance(steps, int):
            steps = (steps,) * len(free_axes)
        free = tuple((a, lo, hi, st) for a, (lo, hi), st in zip(free_axes, bounds, steps))
        return cls(dim, free, ((fixed_ax, value),))

    @property
    def shape(self) -> tuple[int, ...]:
        """Array shape of per-point data, slowest free axis first."""
        return tuple(st for *_, st in reversed(self.free))

    @property
    def size(self) -> int:
        return math.prod(st for *_, st in self.free)

    @property
    def is_plane(self) -> bool:
        return len(self.free) == 2

    def translated(self, shift: Sequence[float]) -> "ScanGrid":
        free = tuple((a, lo + shift[a], hi + shift[a], st) for a, lo, hi, st in self.free)
        fixed = tuple((a, v + shift[a]) for a, v in self.fixed)
        return ScanGrid(self.dim, free, fixed)

    def with_steps(self, steps: int) -> "ScanGrid":
        return ScanGrid(self.dim, tuple((a, lo, hi, steps) for a, lo, hi, _ in self.free), self.fixed)

    def axis_coords(self) -> list[np.ndarray]:
        return [axis_values(lo, hi, st) for _, lo, hi, st in self.free]

    def positions(self) -> np.ndarray:
        pts = np.empty((self.size, self.dim))
        for a, v in self.fixed:
            pts[:, a] = v
        mesh = np.meshgrid(*self.axis_coords(), indexing="ij")
        for (a, *_), m in zip(self.free, mesh):
            pts[:, a] = m.ravel(order="F")
        return pts


class PointRecord(NamedTuple):
    position: tuple[float, ...]
    signature: str
    omega: float
    neg_ln_omega: float
    cycles: int
    degenerate: bool


@dataclass(frozen=True, eq=False)
class Evaluation:
    signatures: list[str]
    log_omega: np.ndarray
    cycles: np.ndarray
    degenerate: np.ndarray

    @property
    def omega(self) -> np.ndarray:
        return np.maximum(np.exp(self.log_omega), math.ulp(0.0))

    @property
    def neg_ln_omega(self) -> np.ndarray:
        return 0.0 - self.log_omega

    @classmethod
    def concat(cls, parts: Sequence["Evaluation"]) -> "Evaluation":
        return cls(
            [s for p in parts for s in p.signatures],
            np.concatenate([p.log_omega for p in parts]),
            np.concatenate([p.cycles for p in parts]),
            np.concatenate([p.degenerate for p in parts]),
        )


@dataclass(frozen=True)
class DrifterField:
    """Grouping of the drifter against fixed objects at arbitrary positions."""

    cfg: ObjectConfig
    spec: MetricSpec = MetricSpec()
    ia: IASettings = IASettings()

    def evaluate(self, positions: np.ndarray) -> Evaluation:
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        if positions.shape[1] != self.cfg.dim:
            raise ValueError(f"positions must have {self.cfg.dim} coordinates")
        parts = []
        base = self.cfg.array
        k = self.cfg.drifter_index
        for start in range(0, len(positions), CHUNK):
            chunk = positions[start:start + CHUNK]
            pts = np.repeat(base[None], len(chunk), axis=0)
            pts[:, k, :] = chunk
            s, log_s = similarity_stack(pts, self.spec)
            c = classify_stack(s, log_s, self.cfg.names, self.cfg.drifter, self.ia)
            parts.append(Evaluation(c.signatures, c.log_omega, c.cycles, c.degenerate))
        return Evaluation.concat(parts)

    def signature(self, position) -> str:
        return self.evaluate(np.asarray(position, dtype=float)[None]).signatures[0]

    def record(self, position) -> PointRecord:
        ev = self.evaluate(np.asarray(position, dtype=float)[None])
        return PointRecord(
            tuple(float(c) for c in position), ev.signatures[0], float(ev.omega[0]),
            float(ev.neg_ln_omega[0]), int(ev.cycles[0]), bool(ev.degenerate[0]),
        )

    __call__ = signature


def _evaluate_chunk(args):
    fld, positions = args
    return fld.evaluate(positions)


def evaluate_parallel(fld: DrifterField, positions: np.ndarray, workers: int = 1) -> Evaluation:
    """Evaluate positions in fixed chunks; results are independent of ``workers``."""
    chunks = [positions[i:i + CHUNK] for i in range(0, len(positions), CHUNK)]
    if not chunks:
        raise ValueError("no positions to evaluate")
    if workers <= 1 or len(chunks) == 1:
        parts = [fld.evaluate(c) for c in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_evaluate_chunk, [(fld, c) for c in chunks]))
    return Evaluation.concat(parts)


@dataclass(frozen=True, eq=False)
class LabelField:
    grid: ScanGrid
    signatures: tuple[str, ...]
    omega: np.ndarray
    neg_ln_omega: np.ndarray
    cycles: np.ndarray
    degenerate: np.ndarray

    def positions(self) -> np.ndarray:
        return self.grid.positions()

    def records(self) -> list[PointRecord]:
        pts = self.positions()
        return [
            PointRecord(tuple(float(c) for c in pts[i]), self.signatures[i], float(self.omega[i]),
                        float(self.neg_ln_omega[i]), int(self.cycles[i]), bool(self.degenerate[i]))
            for i in range(self.grid.size)
        ]

    def signature_grid(self) -> np.ndarray:
        return np.array(self.signatures, dtype=object).reshape(self.grid.shape)

    def distinct(self) -> set[str]:
        return set(self.signatures)


def scan(
    cfg: ObjectConfig,
    spec: MetricSpec,
    grid: ScanGrid,
    ia: IASettings = IASettings(),
    workers: int = 1,
    budget: int = DEFAULT_BUDGET,
) -> LabelField:
    if grid.dim != cfg.dim:
        raise ValueError(f"grid has {grid.dim} axes, objects have {cfg.dim} coordinates")
    if grid.size > budget:
        raise BudgetError(
            f"scan needs {grid.size} samples (~{grid.size * cfg.n * cfg.n * 8 * 6 / 1e6:.0f} MB "
            f"working set), budget is {budget}"
        )
    ev = evaluate_parallel(DrifterField(cfg, spec, ia), grid.positions(), workers)
    return LabelField(grid, tuple(ev.signatures), ev.omega, ev.neg_ln_omega, ev.cycles, ev.degenerate)


def detect_transitions(f: LabelField) -> list[tuple[int, int]]:
    """Axis-aligned neighbour pairs (flat indices, ascending) with unequal signatures."""
    _, ids = np.unique(np.array(f.signatures, dtype=object), return_inverse=True)
    ids = ids.reshape(f.grid.shape)
    flat = np.arange(f.grid.size).reshape(f.grid.shape)
    edges = []
    for ax in range(ids.ndim):
        a = [slice(None)] * ids.ndim
        b = [slice(None)] * ids.ndim
        a[ax] = slice(None, -1)
        b[ax] = slice(1, None)
        diff = ids[tuple(a)] != ids[tuple(b)]
        edges.append(np.stack([flat[tuple(a)][diff], flat[tuple(b)][diff]], axis=1))
    both = np.concatenate(edges)
    both.sort(axis=1)
    both = both[np.lexsort((both[:, 1], both[:, 0]))]
    return [(int(i), int(j)) for i, j in both]


@dataclass(frozen=True)
class MembranePoint:
    position: tuple[float, ...]
    sig_a: str
    sig_b: str
    width: float
    direction: tuple[float, ...] | None = field(default=None, compare=False)


def _bisect(classify: Classifier, lo, hi, keep: str, tol: float, max_steps: int):
    """Shrink ``[lo, hi]`` keeping ``classify(lo) == keep`` and ``classify(hi) != keep``."""
    s_hi = None
    for _ in range(max_steps):
        if float(np.linalg.norm(hi - lo)) < tol:
            break
        mid = (lo + hi) / 2.0
        if np.array_equal(mid, lo) or np.array_equal(mid, hi):
            break
        s_mid = classify(mid)
        if s_mid == keep:
            lo = mid
        else:
            hi, s_hi = mid, s_mid
    return lo, hi, s_hi


def bisect_many(
    evaluate: Callable[[np.ndarray, np.ndarray], Sequence[str]],
    lo: np.ndarray,
    hi: np.ndarray,
    low_side: Callable[[int, str], bool],
    tol: float,
    max_steps: int = 60,
):
    """Lock-step bisection of many segments with one batched evaluation per step.

    ``evaluate(points, rows)`` classifies the midpoints of the listed rows.
    ``low_side(m, sig)`` says whether a signature belongs with segment m's
    ``lo`` end.  Returns shrunken ``lo``, ``hi`` and the last signature seen on
    each ``hi`` side (``None`` if the ``hi`` end never moved).
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    s_hi: list[str | None] = [None] * len(lo)
    for _ in range(max_steps):
        mid = (lo + hi) / 2.0
        live = (np.linalg.norm(hi - lo, axis=1) >= tol)
        live &= ~np.all(mid == lo, axis=1) & ~np.all(mid == hi, axis=1)
        idx = np.flatnonzero(live)
        if idx.size == 0:
            break
        sigs = evaluate(mid[idx], idx)
        for m, sig in zip(idx, sigs):
            if low_side(int(m), sig):
                lo[m] = mid[m]
            else:
                hi[m] = mid[m]
                s_hi[m] = sig
    return lo, hi, s_hi


def refine_boundary(
    a, b, classify: Classifier, tol: float = 1e-12, max_steps: int = 60
) -> MembranePoint:
    """Bisect a segment whose endpoints group differently.

    The bracket always keeps ``a``'s signature on its near side, so with a third
    signature in between the boundary returned is the one bounding ``a``'s
    region.  ``width`` is the final bracket length, which may exceed ``tol`` if
    ``max_steps`` or floating-point resolution ran out first.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    sa, sb = classify(a), classify(b)
    if sa == sb:
        raise ValueError(f"both endpoints have signature {sa!r}")
    lo, hi, s_hi = _bisect(classify, a, b, sa, tol, max_steps)
    span = b - a
    return MembranePoint(
        tuple(float(c) for c in (lo + hi) / 2.0),
        sa,
        s_hi if s_hi is not None else sb,
        float(np.linalg.norm(hi - lo)),
        tuple(float(c) for c in span / np.linalg.norm(span)),
    )


def refine_transitions(
    f: LabelField, fld: DrifterField, edges: Sequence[tuple[int, int]], tol: float = 1e-12,
    max_steps: int = 60,
) -> list[MembranePoint]:
    """Refine many scan edges at once; same contract as :func:`refine_boundary`."""
    if not edges:
        return []
    pts = f.positions()
    ia, ib = np.array(edges).T
    keep = [f.signatures[i] for i in ia]
    for i, j in edges:
        if f.signatures[i] == f.signatures[j]:
            raise ValueError(f"edge {(i, j)} does not cross a transition")
    lo, hi, s_hi = bisect_many(
        lambda x, _: fld.evaluate(x).signatures, pts[ia], pts[ib],
        lambda m, sig: sig == keep[m], tol, max_steps,
    )
    span = pts[ib] - pts[ia]
    unit = span / np.linalg.norm(span, axis=1, keepdims=True)
    return [
        MembranePoint(
            tuple(float(c) for c in (lo[m] + hi[m]) / 2.0), keep[m],
            s_hi[m] if s_hi[m] is not None else f.signatures[ib[m]],
            float(np.linalg.norm(hi[m] - lo[m])), tuple(float(c) for c in unit[m]),
        )
        for m in range(len(edges))
    ]


def measure_ima_thickness(
    entry: MembranePoint,
    classify: Classifier,
    probe_scale: float = 1e-4,
    tol: float = 1e-13,
    levels: int = 40,
) -> float:
    """Width of any band of a third (or tie) signature straddling a boundary.

    Probes ``entry.position + s * direction`` for ``s = ±probe_scale * 2**-k``
    and locates the band edges by bisection.  A clean two-label boundary
    measures 0.
    """
    if entry.direction is None:
        raise ValueError("membrane point has no probe direction")
    p = np.asarray(entry.position, dtype=float)
    u = np.asarray(entry.direction, dtype=float)

    def at(s):
        return p + s * u

    def sig(s):
        return classify(at(s))

    outer_lo, outer_hi = sig(-probe_scale), sig(probe_scale)
    if outer_lo == outer_hi:
        # bisection needs an interior anchor when both faces agree
        anchor = None
        for k in range(levels):
            for s in (-probe_scale * 2.0**-k, probe_scale * 2.0**-k):
                t = sig(s)
                if t != outer_lo or is_degenerate(t):
                    anchor = s
                    break
            if anchor is not None:
                break
        else:
            return 0.0
        left_end = right_end = anchor
    else:
        left_end, right_end = probe_scale, -probe_scale

    # parametrise along u so bisection runs on scalars
    def scalar_classify(x):
        return sig(float(x[0]))

    _, l1, _ = _bisect(scalar_classify, np.array([-probe_scale]), np.array([left_end]),
                       outer_lo, tol, 200)
    _, r0, _ = _bisect(scalar_classify, np.array([probe_scale]), np.array([right_end]),
                       outer_hi, tol, 200)
    return max(0.0, float(r0[0] - l1[0]))


def measure_ima_thickness_many(
    entries: Sequence[MembranePoint],
    fld: DrifterField,
    probe_scale: float = 1e-4,
    tol: float = 1e-13,
    levels: int = 40,
) -> np.ndarray:
    """:func:`measure_ima_thickness` for many points, bisected in lock-step.

    Points whose two outer faces agree need the interior probe search and are
    measured one at a time.
    """
    if any(e.direction is None for e in entries):
        raise ValueError("membrane point has no probe direction")
    out = np.zeros(len(entries))
    if not entries:
        return out
    p = np.array([e.position for e in entries], dtype=float)
    u = np.array([e.direction for e in entries], dtype=float)
    faces = fld.evaluate(np.concatenate([p - probe_scale * u, p + probe_scale * u])).signatures
    lo_face, hi_face = faces[:len(entries)], faces[len(entries):]
    split = [m for m in range(len(entries)) if lo_face[m] != hi_face[m]]
    for m in range(len(entries)):
        if lo_face[m] == hi_face[m]:
            out[m] = measure_ima_thickness(entries[m], fld, probe_scale, tol, levels)
    if not split:
        return out
    rows = np.array(split)

    def evaluate(s, live):
        return fld.evaluate(p[rows[live]] + s * u[rows[live]]).signatures

    # left edge: from -scale towards +scale keeping the low face
    n = len(rows)
    _, l1, _ = bisect_many(evaluate, np.full((n, 1), -probe_scale), np.full((n, 1), probe_scale),
                           lambda m, sig: sig == lo_face[rows[m]], tol, 200)
    _, r0, _ = bisect_many(evaluate, np.full((n, 1), probe_scale), np.full((n, 1), -probe_scale),
                           lambda m, sig: sig == hi_face[rows[m]], tol, 200)
    out[rows] = np.maximum(0.0, r0[:, 0] - l1[:, 0])
    return out
