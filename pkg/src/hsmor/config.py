"""Run configuration: INI-style text with [objects], [metric], [ia], [task], [run].

Example::

    [objects]
    A = 1, 1, 0
    B = 0, 0, 1
    Dr = 0.5, 0.5, 0.5

    [metric]
    kind = ed

    [task]
    type = scan
    x = -3, 4
    y = -3, 4
    z = 0.5
    steps = 256

Unknown sections and keys are errors.  Every error message carries the line
number of the offending entry.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from typing import Union

from .aura import lattice_directions
from .ia import IASettings
from .metrics import ConfigError, MetricSpec, ObjectConfig
from .scan import DEFAULT_BUDGET, ScanGrid, axis_name
from .trajectory import PathSpec

TASKS = ("scan", "aura", "omega-profile", "trajectory", "refine")

_SECTION_KEYS = {
    "metric": {"kind", "b", "cb_floor"},
    "ia": {"max_cycles", "tie_epsilon"},
    "run": {"drifter", "out", "workers"},
}
_TASK_KEYS = {
    "scan": {"steps"},
    "refine": {"steps", "max_points", "tol"},
    "aura": {"growth", "r_max", "tol", "directions"},
    "omega-profile": {"direction", "d_min", "d_max", "samples", "origin"},
    "trajectory": {"waypoints", "kind", "samples_per_unit", "tol"},
}


@dataclass(frozen=True)
class ScanTask:
    grid: ScanGrid


@dataclass(frozen=True)
class RefineTask:
    grid: ScanGrid
    max_points: int = 100
    tol: float = 1e-12


@dataclass(frozen=True)
class AuraTask:
    growth: float = 1.1
    r_max: float | None = None
    tol: float = 1e-13
    directions: int = 26


@dataclass(frozen=True)
class ProfileTask:
    direction: tuple[float, ...]
    d_min: float | None = None
    d_max: float | None = None
    samples: int = 64
    origin: tuple[float, ...] | None = None


@dataclass(frozen=True)
class TrajectoryTask:
    path: PathSpec
    tol: float = 1e-12


Task = Union[ScanTask, RefineTask, AuraTask, ProfileTask, TrajectoryTask]


@dataclass(frozen=True)
class RunConfig:
    objects: ObjectConfig
    metric: MetricSpec
    ia: IASettings
    kind: str
    task: Task
    out: str | None = None
    workers: int = 1
    text: str = ""


def _line_map(text: str) -> dict[tuple[str, str | None], int]:
    lines: dict[tuple[str, str | None], int] = {}
    section = ""
    for no, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            lines.setdefault((section, None), no)
        elif "=" in s:
            lines.setdefault((section, s.split("=", 1)[0].strip()), no)
    return lines


class _Reader:
    """Typed access to one section with line-numbered errors."""

    def __init__(self, parser, lines, section):
        self.section = section
        self.items = dict(parser.items(section)) if parser.has_section(section) else {}
        self.lines = lines

    def line(self, key=None) -> int:
        return self.lines.get((self.section, key), self.lines.get((self.section, None), 0))

    def fail(self, key, msg) -> ConfigError:
        return ConfigError(f"line {self.line(key)}: [{self.section}] {msg}")

    def has(self, key) -> bool:
        return key in self.items

    def raw(self, key, default=None):
        if key not in self.items:
            if default is None:
                raise self.fail(None, f"missing key {key!r}")
            return default
        return self.items[key]

    def float(self, key, default=None, positive=False) -> float | None:
        if key not in self.items and default is None:
                return None
        text = self.raw(key, str(default))
        try:
            v = float(text)
        except ValueError:
            raise self.fail(key, f"{key} = {text!r} is not a number") from None
        if not math.isfinite(v) or (positive and not v > 0):
            raise self.fail(key, f"{key} must be {'positive' if positive else 'finite'}")
        return v

    def int(self, key, default=None, minimum=1) -> int:
        text = self.raw(key, None if default is None else str(default))
        try:
            v = int(text)
        except ValueError:
            raise self.fail(key, f"{key} = {text!r} is not an integer") from None
        if v < minimum:
            raise self.fail(key, f"{key} must be >= {minimum}")
        return v

    def vector(self, key, dim=None, text=None) -> tuple[float, ...]:
        text = self.raw(key) if text is None else text
        try:
            v = tuple(float(c) for c in text.split(","))
        except ValueError:
            raise self.fail(key, f"{key} = {text!r} is not a comma-separated list of numbers") from None
        if not all(math.isfinite(c) for c in v):
            raise self.fail(key, f"{key} has non-finite values")
        if dim is not None and len(v) != dim:
            raise self.fail(key, f"{key} has {len(v)} coordinates, expected {dim}")
        return v

    def check_unknown(self, allowed):
        for key in self.items:
            if key not in allowed:
                raise self.fail(key, f"unknown key {key!r}")


def _grid(r: _Reader, dim: int) -> ScanGrid:
    steps_text = r.raw("steps", "256")
    try:
        steps = [int(s) for s in steps_text.split(",")]
    except ValueError:
        raise r.fail("steps", f"steps = {steps_text!r} is not an integer list") from None
    free, fixed = [], []
    for a in range(dim):
        name = axis_name(a, dim)
        v = r.vector(name)
        if len(v) == 1:
            fixed.append((a, v[0]))
        elif len(v) == 2:
            free.append((a, v[0], v[1]))
        else:
            raise r.fail(name, f"{name} takes a value or 'min, max'")
    if len(steps) == 1:
        steps = steps * len(free)
    if len(steps) != len(free):
        raise r.fail("steps", f"steps lists {len(steps)} values for {len(free)} free axes")
    try:
        grid = ScanGrid(dim, tuple((a, lo, hi, st) for (a, lo, hi), st in zip(free, steps)),
                        tuple(fixed))
    except ValueError as exc:
        raise r.fail(None, str(exc)) from None
    if grid.size > DEFAULT_BUDGET:
        raise r.fail("steps", f"grid has {grid.size} points, limit is {DEFAULT_BUDGET}")
    return grid


def _task(r: _Reader, kind: str, dim: int) -> Task:
    allowed = {"type"} | _TASK_KEYS[kind]
    if kind in ("scan", "refine"):
        allowed |= {axis_name(a, dim) for a in range(dim)}
    r.check_unknown(allowed)
    if kind == "scan":
        return ScanTask(_grid(r, dim))
    if kind == "refine":
        return RefineTask(_grid(r, dim), r.int("max_points", 100),
                          r.float("tol", 1e-12, positive=True))
    if kind == "aura":
        growth = r.float("growth", 1.1)
        if not growth > 1.0:
            raise r.fail("growth", "growth must be > 1")
        n_dir = r.int("directions", len(lattice_directions(dim)), minimum=min(26, 3**dim - 1))
        if dim != 3 and n_dir != len(lattice_directions(dim)):
            raise r.fail("directions", "custom direction counts are only available in 3-D")
        return AuraTask(growth, r.float("r_max", positive=True),
                        r.float("tol", 1e-13, positive=True), n_dir)
    if kind == "omega-profile":
        direction = r.vector("direction", dim)
        if not any(direction):
            raise r.fail("direction", "direction must be nonzero")
        origin = r.vector("origin", dim) if r.has("origin") else None
        return ProfileTask(direction, r.float("d_min", positive=True),
                           r.float("d_max", positive=True), r.int("samples", 64, minimum=16), origin)
    # trajectory
    text = r.raw("waypoints")
    pts = tuple(r.vector("waypoints", dim, part) for part in text.split(";"))
    try:
        path = PathSpec(pts, r.float("samples_per_unit", 50.0, positive=True),
                        r.raw("kind", "polyline"))
    except ValueError as exc:
        raise r.fail("waypoints", str(exc)) from None
    return TrajectoryTask(path, r.float("tol", 1e-12, positive=True))


def parse_config(text: str, task: str | None = None) -> RunConfig:
    """Parse and validate a run configuration.

    ``task`` (the CLI subcommand) fills in a missing ``[task] type`` and must
    agree with it when both are present.
    """
    parser = configparser.ConfigParser(
        interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",),
        default_section="\0none",
    )
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"line {exc.lineno}: duplicate key {exc.option!r} in [{exc.section}]") from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"line {exc.lineno}: duplicate section [{exc.section}]") from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"line {exc.lineno}: expected a [section] header") from None
    except configparser.ParsingError as exc:
        no, line = exc.errors[0]
        raise ConfigError(f"line {no}: cannot parse {line!r}") from None
    lines = _line_map(text)
    known = {"objects", "metric", "ia", "task", "run"}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"line {lines.get((section, None), 0)}: unknown section [{section}]")
    if not parser.has_section("objects"):
        raise ConfigError("line 0: missing [objects] section")

    run = _Reader(parser, lines, "run")
    run.check_unknown(_SECTION_KEYS["run"])
    drifter = run.raw("drifter", "Dr")

    objs = _Reader(parser, lines, "objects")
    names = list(objs.items)
    if not names:
        raise objs.fail(None, "no objects defined")
    dim = len(objs.vector(names[0]))
    coords = [objs.vector(nm, dim) for nm in names]
    try:
        objects = ObjectConfig(tuple(names), tuple(coords), drifter)
    except ConfigError as exc:
        if "drifter" in str(exc):
            raise run.fail("drifter", str(exc)) from None
        culprit = next((nm for nm in names if repr(nm) in str(exc)), None)
        raise objs.fail(culprit, str(exc)) from None

    m = _Reader(parser, lines, "metric")
    m.check_unknown(_SECTION_KEYS["metric"])
    try:
        metric = MetricSpec(m.raw("kind", "ed"), m.float("b", 1.5), m.float("cb_floor", 1e-9))
    except ConfigError as exc:
        bad = next((k for k in ("b", "cb_floor", "kind") if k in str(exc)), None)
        raise m.fail(bad, str(exc)) from None

    s = _Reader(parser, lines, "ia")
    s.check_unknown(_SECTION_KEYS["ia"])
    ia = IASettings(s.int("max_cycles", 10_000), s.float("tie_epsilon", 1e-13, positive=True))

    t = _Reader(parser, lines, "task")
    kind = t.items.get("type", task)
    if kind is None:
        raise t.fail(None, "task type missing")
    if kind not in TASKS:
        raise t.fail("type", f"unknown task type {kind!r} (expected one of {', '.join(TASKS)})")
    if task is not None and kind != task:
        raise t.fail("type", f"config describes task {kind!r}, not {task!r}")
    return RunConfig(
        objects, metric, ia, kind, _task(t, kind, dim),
        run.items.get("out"), run.int("workers", 1), text,
    )
