"""Membrane crossings along a straight drifter path through the two-object field."""
import argparse

from hsmor.ia import IASettings
from hsmor.metrics import Metric, MetricSpec, ObjectConfig
from hsmor.trajectory import PathSpec, trace_path

CFG = ObjectConfig(("A", "B", "Dr"), ((1, 1, 0), (0, 0, 1), (0.5, 0.5, 0.5)))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--start", type=float, nargs=3, default=[-4.0, -3.9, 0.5])
    ap.add_argument("--end", type=float, nargs=3, default=[5.0, 5.1, 0.5])
    ap.add_argument("--metric", default="ed")
    args = ap.parse_args()
    path = PathSpec((tuple(args.start), tuple(args.end)), kind="segment")
    events = trace_path(CFG, MetricSpec(Metric.parse(args.metric)), IASettings(), path)
    for e in events:
        pos = ", ".join(f"{c:.6f}" for c in e.position)
        print(f"t={e.t:.12f} ({pos})  {e.sig_before!r} -> {e.sig_after!r}  width={e.width:.1e}")
    print(f"{len(events)} crossings")


if __name__ == "__main__":
    main()
