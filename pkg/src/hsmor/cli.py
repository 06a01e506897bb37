"""Command-line entry point: ``hsmor TASK --config FILE [--out DIR] [--workers N]``.

Exit codes: 0 success, 1 configuration or usage error, 2 runtime or I/O error.
"""
from __future__ import annotations

import argparse
import hashlib
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .aura import aura_extent, far_field_profile, fibonacci_directions, lattice_directions
from .config import TASKS, RunConfig, parse_config
from .io import (
    colour_collisions, write_crossings_csv, write_label_csv, write_manifest,
    write_membrane_csv, write_ppm, write_profile_csv,
)
from .metrics import ConfigError
from .scan import DrifterField, detect_transitions, refine_transitions, scan
from .trajectory import trace_path

EXIT_CONFIG = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hsmor", description="Drifter grouping fields over fixed objects.")
    p.add_argument("task", choices=TASKS)
    p.add_argument("--config", required=True, help="INI-style run configuration")
    p.add_argument("--out", help="output directory (default: [run] out, else out/TASK)")
    p.add_argument("--workers", type=int, help="worker processes (default: [run] workers, else 1)")
    return p


def _pick(n: int, k: int) -> np.ndarray:
    """``k`` evenly spread indices out of ``n`` (all of them if ``k >= n``)."""
    if k >= n:
        return np.arange(n)
    return np.unique(np.round(np.linspace(0, n - 1, k)).astype(int))


def run_task(rc: RunConfig, out: Path, workers: int) -> tuple[list[str], list[str]]:
    """Run the configured task into ``out``; returns (files written, summary lines)."""
    cfg, spec, ia, task = rc.objects, rc.metric, rc.ia, rc.task
    files: list[str] = []
    summary: list[str] = []
    if rc.kind == "scan":
        f = scan(cfg, spec, task.grid, ia, workers)
        write_label_csv(f, out / "labels.csv")
        files.append("labels.csv")
        if task.grid.is_plane:
            write_ppm(f, out / "labels.ppm")
            files.append("labels.ppm")
        counts = {s: f.signatures.count(s) for s in sorted(f.distinct())}
        summary += [f"points = {f.grid.size}"] + [f"count[{s}] = {c}" for s, c in counts.items()]
        clashes = colour_collisions(f.signatures)
        summary += [f"colour_collision = {' | '.join(g)}" for g in clashes] or ["colour_collisions = none"]
    elif rc.kind == "refine":
        f = scan(cfg, spec, task.grid, ia, workers)
        edges = detect_transitions(f)
        chosen = [edges[i] for i in _pick(len(edges), task.max_points)]
        points = refine_transitions(f, DrifterField(cfg, spec, ia), chosen, task.tol)
        write_membrane_csv(points, out / "membrane.csv", cfg.dim)
        files.append("membrane.csv")
        widths = [p.width for p in points]
        summary += [f"transition_edges = {len(edges)}", f"refined = {len(points)}"]
        if widths:
            summary.append(f"max_width = {max(widths):.17g}")
    elif rc.kind == "aura":
        dirs = lattice_directions(cfg.dim)
        if task.directions != len(dirs):
            dirs = fibonacci_directions(task.directions)
        rep = aura_extent(cfg, spec, ia, dirs, task.r_max, task.growth, task.tol, workers)
        (out / "aura.txt").write_text(rep.as_text(), encoding="utf-8")
        files.append("aura.txt")
        summary += [f"ratio = {rep.ratio:.17g}", f"outside_signature = {rep.outside_signature}"]
    elif rc.kind == "omega-profile":
        prof = far_field_profile(cfg, spec, ia, task.direction, task.d_min, task.d_max,
                                 task.samples, task.origin, workers)
        write_profile_csv(prof, out / "profile.csv")
        files.append("profile.csv")
        summary += [
            f"tail_start = {prof.tail_start}", f"linear_r2 = {prof.r2:.17g}",
            f"log_r2 = {prof.log_r2:.17g}", f"slope = {prof.slope:.17g}",
        ]
        if prof.note:
            summary.append(f"note = {prof.note}")
    else:
        events = trace_path(cfg, spec, ia, task.path, task.tol)
        write_crossings_csv(events, out / "crossings.csv", cfg.dim)
        files.append("crossings.csv")
        summary.append(f"crossings = {len(events)}")
    return files, summary


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        rc = parse_config(text, args.task)
        workers = rc.workers if args.workers is None else args.workers
        if workers < 1:
            raise ConfigError("--workers must be >= 1")
    except (OSError, UnicodeDecodeError) as exc:
        print(f"hsmor: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"hsmor: {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out or rc.out or Path("out") / rc.kind)
    start = time.perf_counter()
    try:
        out.mkdir(parents=True, exist_ok=True)
        files, summary = run_task(rc, out, workers)
        wall = time.perf_counter() - start
        digests = [
            f"{name} sha256={hashlib.sha256((out / name).read_bytes()).hexdigest()}" for name in files
        ]
        write_manifest(out / "manifest.txt", [
            ("command", ["hsmor " + " ".join(argv)]),
            ("versions", [f"hsmor = {__version__}", f"numpy = {np.__version__}",
                          f"python = {platform.python_version()}"]),
            ("run", [f"task = {rc.kind}", f"workers = {workers}", f"wall_seconds = {wall:.3f}"]),
            ("outputs", digests),
            ("summary", summary),
            ("config", text.splitlines()),
        ])
    except Exception as exc:  # any failure past validation is a runtime error
        print(f"hsmor: {rc.kind} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"hsmor: {rc.kind} done in {wall:.2f} s -> {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
