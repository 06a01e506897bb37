"""Refine membrane points of the two-object field and measure their thickness."""
import argparse
from collections import Counter

import numpy as np

from hsmor.metrics import Metric, MetricSpec, ObjectConfig
from hsmor.scan import (
    DrifterField, ScanGrid, detect_transitions, measure_ima_thickness_many,
    refine_transitions, scan,
)

CFG = ObjectConfig(("A", "B", "Dr"), ((1, 1, 0), (0, 0, 1), (0.5, 0.5, 0.5)))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=128)
    ap.add_argument("--points", type=int, default=100)
    ap.add_argument("--metric", default="ed")
    args = ap.parse_args()
    spec = MetricSpec(Metric.parse(args.metric))
    f = scan(CFG, spec, ScanGrid.plane("z", 0.5, ((-3.0, 4.0), (-3.0, 4.0)), args.steps))
    edges = detect_transitions(f)
    pick = np.unique(np.round(np.linspace(0, len(edges) - 1, args.points)).astype(int))
    fld = DrifterField(CFG, spec)
    pts = refine_transitions(f, fld, [edges[i] for i in pick])
    thick = measure_ima_thickness_many(pts, fld)
    widths = np.array([p.width for p in pts])
    print(f"{len(edges)} transition edges, {len(pts)} refined")
    print(f"refine width: max {widths.max():.3e}, median {np.median(widths):.3e}")
    print(f"IMA thickness: max {thick.max():.3e}, median {np.median(thick):.3e}")
    for (a, b), count in sorted(Counter((p.sig_a, p.sig_b) for p in pts).items()):
        print(f"  {a!r:>14} | {b!r:<14} {count}")


if __name__ == "__main__":
    main()
