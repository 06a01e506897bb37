"""Aura bounding-cube size relative to the fixed-object extent, per metric."""
import argparse

from hsmor.aura import REFERENCE_RATIOS, aura_extent, fibonacci_directions
from hsmor.metrics import Metric, MetricSpec, ObjectConfig

CFG = ObjectConfig(("A", "B", "Dr"), ((1, 1, 0), (0, 0, 1), (0.5, 0.5, 0.5)))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--directions", type=int, default=26,
                    help="26 = axis/diagonal set, otherwise a Fibonacci sphere of this size")
    args = ap.parse_args()
    dirs = None if args.directions == 26 else fibonacci_directions(args.directions)
    print(f"{'metric':6s} {'cube edge':>10s} {'ratio':>8s} {'reference':>9s}  outside")
    for kind in Metric:
        rep = aura_extent(CFG, MetricSpec(kind), directions=dirs)
        print(f"{kind.value:6s} {rep.cube_edge:10.4f} {rep.ratio:8.3f} "
              f"{REFERENCE_RATIOS[kind]:9.1f}  {rep.outside_signature}")


if __name__ == "__main__":
    main()
