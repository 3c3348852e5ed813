"""Run the sigma-compare experiment and print its summary."""
import argparse

from nonlocal_eikonal.experiments import RUNNERS, default_plan, experiment_passed
from nonlocal_eikonal.output import dumps

NAME = "sigma-compare"

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=f"runs/{NAME}")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--subset", help="comma separated P values (table2 only)")
    args = ap.parse_args()
    subset = [float(s) for s in args.subset.split(",")] if args.subset else None
    plan = default_plan(NAME, outputs=args.out, subset=subset, workers=args.threads)
    result = RUNNERS[NAME](plan)
    result.pop("snapshots", None)
    result.pop("series", None)
    print(dumps(result))
    print("PASS" if experiment_passed(NAME, result) else "FAIL")
