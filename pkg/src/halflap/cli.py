"""Command-line front end: ``halflap <subcommand> [--config PATH] [--out DIR] [--seed N] [--threads N]``.

Exit codes: 0 success, 2 invalid input, 3 solver did not converge, 4 a
property check failed. Failures print one ``halflap: exit=<code> reason=<tag>
detail=<text>`` line on stderr.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy.fft

from . import io, layers
from .config import SUBCOMMANDS, ConfigError, ExperimentConfig, parse_ini
from .energy import energy_scan, gradient_decay_profile, normalised_totals, scaling_fit
from .extension import MollifierKernel, mollifier_extend, poisson_extend
from .grid import CylinderDomain, ScalarField, UniformGrid, WedgeDomain, axis_count, laplacian_residual
from .hhalf import TraceDomain, log_bound_experiment
from .nonlinearity import builtin, sine
from .solver import DiscreteEnergy, SolverError, minimize_cylinder, saddle_minimize
from .symmetry import liouville_check, stability_witness

log = logging.getLogger("halflap")

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_PROPERTY = 0, 2, 3, 4


class PropertyFailure(RuntimeError):
    pass


def _nl(cfg: ExperimentConfig):
    return builtin(cfg.nonlinearity, cfg.coefficients)


def _direction(cfg: ExperimentConfig):
    if cfg.direction is not None:
        return cfg.direction
    e = [0.0] * cfg.n
    e[-1] = 1.0
    return e


def _cylinder(cfg: ExperimentConfig, R: Optional[float] = None) -> CylinderDomain:
    return CylinderDomain.build(cfg.n, cfg.R if R is None else R, cfg.h, height=cfg.height,
                                base_shape=cfg.base_shape)


def _scan_rows(scan):
    return [(e.R, e.dirichlet, e.potential, e.total, e.c_u) for e in scan]


SCAN_HEADER = ("R", "dirichlet", "potential", "total", "c_u")


def _write_scan(out: Path, stem: str, scan, fit):
    io.write_csv(out / f"{stem}.csv", SCAN_HEADER, _scan_rows(scan))
    rep = fit.report() if fit is not None else {}
    rep["normalised"] = " ".join(io.fmt(x) for x in normalised_totals(scan))
    io.write_report(out / f"{stem}_fit.txt", rep)


def _write_decay(out: Path, prof):
    io.write_csv(out / "decay.csv", ("lambda", "sup_grad", "scaled"),
                 zip(prof.levels, prof.sup, prof.scaled))


# ---------------------------------------------------------------------------
# pipelines

def run_layer(cfg: ExperimentConfig, out: Path) -> dict:
    dom = _cylinder(cfg)
    fld = dom.field(layers.tilted(_direction(cfg)))
    lap = laplacian_residual(fld)
    model = DiscreteEnergy(dom.grid, dom.mask, dom.free, sine())
    defect = model.neumann_defect(fld.values)
    res = {"h": cfg.h, "laplacian_sup": float(np.max(np.abs(lap.values))),
           "neumann_sup": float(np.max(np.abs(defect))), "bound": 5 * cfg.h}
    _write_decay(out, gradient_decay_profile(fld))
    io.write_report(out / "layer_report.txt", res)
    if max(res["laplacian_sup"], res["neumann_sup"]) > 5 * cfg.h:
        raise PropertyFailure("explicit layer residual exceeds 5h")
    return res


def run_minimize(cfg: ExperimentConfig, out: Path) -> dict:
    dom = _cylinder(cfg)
    sol = minimize_cylinder(dom, _nl(cfg), layers.tilted(_direction(cfg)), cfg.solver)
    io.dump_field(out / "solution.field", sol.field)
    rep = sol.report()
    io.write_report(out / "solution_report.txt", rep)
    _write_decay(out, gradient_decay_profile(sol))
    radii = [r for r in cfg.radii if r <= min(cfg.R, dom.grid.upper(dom.n))]
    if len(radii) >= 1:
        scan = energy_scan(sol, _nl(cfg), radii)
        fit = scaling_fit(scan) if len(radii) >= 4 else None
        _write_scan(out, "energy", scan, fit)
    return rep


def run_saddle(cfg: ExperimentConfig, out: Path) -> dict:
    wedge = WedgeDomain.build(cfg.m, cfg.R, cfg.L, cfg.h)
    nl = _nl(cfg)
    sol = saddle_minimize(wedge, nl, cfg.solver)
    io.dump_field(out / "saddle.field", sol.reflected)
    rep = sol.report()
    rep["trivial"] = int(sol.trivial)
    io.write_report(out / "saddle_report.txt", rep)
    radii = [r for r in cfg.radii if r <= min(cfg.R, cfg.L)]
    if radii:
        scan = energy_scan(sol, nl, radii, c_offset=0.0, domain=wedge)
        _write_scan(out, "energy", scan, scaling_fit(scan) if len(radii) >= 4 else None)
    if sol.trivial:
        raise PropertyFailure("saddle minimiser is identically zero")
    return rep


def run_energy_scan(cfg: ExperimentConfig, out: Path) -> dict:
    nl = _nl(cfg)
    Rmax = max(cfg.radii)
    if cfg.source == "explicit":
        dom = CylinderDomain.build(cfg.n, Rmax, cfg.h, base_shape=cfg.base_shape)
        fld = dom.field(layers.tilted(_direction(cfg)))
    else:
        dom = _cylinder(cfg, Rmax)
        fld = minimize_cylinder(dom, nl, layers.tilted(_direction(cfg)), cfg.solver).field
    scan = energy_scan(fld, nl, cfg.radii, base_shape=cfg.base_shape)
    fit = scaling_fit(scan) if len(scan) >= 4 else None
    _write_scan(out, "energy", scan, fit)
    return fit.report() if fit else {}


def run_hhalf(cfg: ExperimentConfig, out: Path) -> dict:
    if cfg.hhalf_geometry == "interval":
        dom = TraceDomain.interval_box(cfg.hhalf_n, cfg.hhalf_h)
    else:
        dom = TraceDomain.cylinder_boundary(cfg.hhalf_n, cfg.hhalf_h)
    rep = log_bound_experiment(dom, cfg.eps, c0=cfg.c0)
    io.write_csv(out / "hhalf.csv", ("eps", "l2_part", "seminorm", "total"), rep.rows())
    io.write_report(out / "hhalf_fit.txt", rep.report())
    return rep.report()


def run_symmetry(cfg: ExperimentConfig, out: Path) -> dict:
    if cfg.n < 2:
        raise ConfigError("symmetry needs domain.n >= 2")
    e = cfg.direction or [0.6, 0.8] + [0.0] * (cfg.n - 2)
    dom = CylinderDomain.from_bounds([(-cfg.R, cfg.R)] * cfg.n, cfg.height or cfg.R, cfg.h)
    fld = dom.field(layers.tilted(e))
    axis = int(np.argmax(np.abs(e)))
    phi = stability_witness(fld, axis)
    rep = liouville_check(fld, phi).report()
    io.write_report(out / "symmetry_report.txt", rep)
    return rep


def run_extend(cfg: ExperimentConfig, out: Path) -> dict:
    c = axis_count(-cfg.half_width, cfg.half_width, cfg.extend_h)
    g = UniformGrid((-cfg.half_width,), (cfg.extend_h,), (c,))
    u = ScalarField(g, layers.layer_trace(g.coords(0)))
    steps = int(round(cfg.lambda_max / cfg.lambda_step))
    levels = cfg.lambda_step * np.arange(steps + 1)
    if cfg.extend_kind == "poisson":
        v = poisson_extend(u, levels)
        x, lam = v.grid.mesh()
        err = float(np.max(np.abs(v.values - layers.layer_extension(x, lam))))
        rep = {"kind": "poisson", "max_error": err}
    else:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            v = mollifier_extend(u, levels, MollifierKernel.standard(1))
        rep = {"kind": "mollifier", "l2_warnings": len(caught)}
    io.dump_field(out / "extension.field", v)
    io.write_report(out / "extend_report.txt", rep)
    return rep


def run_selftest(cfg: ExperimentConfig, out: Path) -> dict:
    from .selftest import run
    passed, total = run(verbose=True)
    rep = {"passed": passed, "total": total}
    io.write_report(out / "selftest_report.txt", rep)
    if passed != total:
        raise PropertyFailure(f"{total - passed} self-test checks failed")
    return rep


PIPELINES = {
    "layer": run_layer, "minimize": run_minimize, "saddle": run_saddle,
    "energy-scan": run_energy_scan, "hhalf": run_hhalf, "symmetry": run_symmetry,
    "extend": run_extend, "selftest": run_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="halflap", description="Half-Laplacian extension experiments.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", type=Path, help="INI file with experiment settings")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None, help="FFT workers (0 = all cores)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


class _ArgError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgError(message)


def _fail(code: int, reason: str, detail: str) -> int:
    detail = " ".join(str(detail).split())
    print(f"halflap: exit={code} reason={reason} detail={detail}", file=sys.stderr)
    return code


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    parser.__class__ = _Parser
    try:
        args = parser.parse_args(argv)
    except _ArgError as exc:
        return _fail(EXIT_INVALID, "usage", exc)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = args.config.read_text() if args.config else ""
        cfg = parse_ini(text, args.subcommand)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.threads is not None:
            cfg.threads = args.threads
        cfg.out = str(args.out)
        cfg.validate()
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
    except (ConfigError, OSError) as exc:
        return _fail(EXIT_INVALID, "validation", exc)
    workers = cfg.threads or (os.cpu_count() or 1)
    try:
        with scipy.fft.set_workers(workers):
            result = PIPELINES[cfg.subcommand](cfg, out)
    except SolverError as exc:
        if exc.solution is not None and exc.solution.model is not None:
            io.dump_field(out / "last_iterate.field", exc.solution.field)
        return _fail(EXIT_SOLVER, exc.reason, exc)
    except PropertyFailure as exc:
        return _fail(EXIT_PROPERTY, "property", exc)
    except (ConfigError, ValueError) as exc:
        return _fail(EXIT_INVALID, "validation", exc)
    for k, v in result.items():
        log.info("%s=%s", k, io.fmt(v))
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
