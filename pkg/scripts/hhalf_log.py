"""Squared H^{1/2} norm of eps-ramps against |log eps| on the interval and the cylinder boundary."""

import argparse
from pathlib import Path

from halflap import io
from halflap.hhalf import TraceDomain, log_bound_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, default=2.0 ** -10)
    ap.add_argument("--out", type=Path, default=Path("results/hhalf"))
    args = ap.parse_args()
    eps = [2.0 ** -k for k in range(3, 9)]
    args.out.mkdir(parents=True, exist_ok=True)
    for name, dom in (("interval", TraceDomain.interval_box(1, args.h)),
                      ("cylinder_boundary", TraceDomain.cylinder_boundary(1, args.h))):
        rep = log_bound_experiment(dom, eps)
        io.write_csv(args.out / f"{name}.csv", ("eps", "l2_part", "seminorm", "total"), rep.rows())
        print(f"{name}: slope={rep.slope:.4f} intercept={rep.intercept:.4f} R2={rep.r2:.6f}")
        for e, t in zip(rep.eps, rep.total):
            print(f"   eps={e:<10g} norm^2={t:.5f}")


if __name__ == "__main__":
    main()
