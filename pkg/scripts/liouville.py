"""Quotients sigma_i = v_{x_i} / phi for a tilted layer and for a radial bump."""

import argparse

import numpy as np

from halflap import layers
from halflap.grid import CylinderDomain
from halflap.symmetry import liouville_check, stability_witness


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--h", type=float, default=0.02)
    args = ap.parse_args()
    d = CylinderDomain.from_bounds([(-2.0, 2.0)] * 2, 2.0, args.h)
    fld = d.field(layers.tilted((0.6, 0.8)))
    rep = liouville_check(fld, stability_witness(fld, 1), radii=(1.5, 2.0))
    print("tilted layer:", rep.report())
    bump = d.field(lambda x, y, l: np.exp(-(x * x + y * y) / (1 + l) ** 2) + 0 * l)
    rep = liouville_check(bump, d.field(lambda x, y, l: 1.0 + 0 * x))
    print("radial bump: one_dimensional =", rep.one_dimensional, "deviation =", rep.deviation)


if __name__ == "__main__":
    main()
