"""Energy growth E(R) over nested cylinders, for the explicit 1-D layer or a 2-D minimiser.

    python3 scripts/energy_law.py --n 1 --h 0.05
    python3 scripts/energy_law.py --n 2 --h 0.125 --rmax 16
"""

import argparse
from pathlib import Path

from halflap import layers, io
from halflap.energy import energy_scan, normalised_totals, scaling_fit
from halflap.grid import CylinderDomain
from halflap.nonlinearity import sine
from halflap.solver import SolveConfig, minimize_cylinder


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1, choices=(1, 2))
    ap.add_argument("--h", type=float, default=0.05)
    ap.add_argument("--rmax", type=float, default=64.0)
    ap.add_argument("--out", type=Path, default=Path("results/energy_law"))
    args = ap.parse_args()

    radii = [r for r in (4.0, 8.0, 16.0, 32.0, 64.0) if r <= args.rmax]
    dom = CylinderDomain.build(args.n, args.rmax, args.h)
    if args.n == 1:
        fld = dom.field(layers.layer_extension)
    else:
        sol = minimize_cylinder(dom, sine(), layers.tilted((0.6, 0.8)), SolveConfig(init="data"))
        print(f"solver: {sol.status} after {sol.iterations} iterations")
        fld = sol.field
    scan = energy_scan(fld, sine(), radii)
    args.out.mkdir(parents=True, exist_ok=True)
    io.write_csv(args.out / f"scan_n{args.n}.csv", ("R", "dirichlet", "potential", "total", "c_u"),
                 [(e.R, e.dirichlet, e.potential, e.total, e.c_u) for e in scan])
    for e, nt in zip(scan, normalised_totals(scan)):
        print(f"R={e.R:6g}  dirichlet={e.dirichlet:.5f}  potential={e.potential:.5f}  "
              f"total={e.total:.5f}  total/(R^(n-1) log R)={nt:.4f}")
    if len(scan) >= 4:
        fit = scaling_fit(scan)
        print(f"fit: a={fit.a:.5f} b={fit.b:.5f} R2={fit.r2:.6f} trend_flag={fit.trend_flag}")


if __name__ == "__main__":
    main()
