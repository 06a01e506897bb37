"""Cross-sections of the two-object field under each metric (PPM + CSV per plane)."""
import argparse
import time
from pathlib import Path

from hsmor.io import write_label_csv, write_ppm
from hsmor.metrics import Metric, MetricSpec, ObjectConfig
from hsmor.scan import ScanGrid, scan

CFG = ObjectConfig(("A", "B", "Dr"), ((1, 1, 0), (0, 0, 1), (0.5, 0.5, 0.5)))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/cross_sections")
    ap.add_argument("--steps", type=int, default=256)
    ap.add_argument("--z", type=float, nargs="+", default=[0.0, 0.5, 1.0])
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for kind in Metric:
        for z in args.z:
            grid = ScanGrid.plane("z", z, ((-3.0, 4.0), (-3.0, 4.0)), args.steps)
            t = time.perf_counter()
            f = scan(CFG, MetricSpec(kind), grid, workers=args.workers)
            stem = f"{kind.value.lower()}_z{z:g}"
            write_label_csv(f, out / f"{stem}.csv")
            write_ppm(f, out / f"{stem}.ppm")
            counts = {s: f.signatures.count(s) for s in sorted(f.distinct())}
            print(f"{stem}: {time.perf_counter() - t:.1f} s  {counts}")


if __name__ == "__main__":
    main()
