"""Command-line driver: every experiment writes CSV/JSON records and, on request, SVG figures.

Exit codes: 0 success, 1 usage, 2 configuration or invalid parameters,
3 numerical non-convergence, 4 assertion or certificate failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from types import SimpleNamespace

import numpy as np

from conefree import __version__
from conefree.cone import ConeParams, ConePoint, geodesic_distance
from conefree.grids import ConvergenceError, PolarGrid, ScalarField
from conefree.records import dumps_json, header_block, write_atomic

EXIT_USAGE, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CERT = 1, 2, 3, 4
WORKERS_ENV = "CONEFREE_WORKERS"

log = logging.getLogger("conefree")


class UsageError(Exception):
    pass


class ConfigError(Exception):
    pass


class CertificateFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# parsing helpers ---------------------------------------------------------------


def _pair(text: str, kind=float) -> tuple:
    try:
        a, b = (kind(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected two comma-separated values, got {text!r}") from exc
    return a, b


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _sweep(text: str) -> tuple[str, list[float]]:
    try:
        key, rng = text.split("=", 1)
        a, b, n = rng.split(":")
        n = int(n)
        if n < 1:
            raise ValueError
        values = [float(a)] if n == 1 else list(np.linspace(float(a), float(b), n))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"sweep must look like key=a:b:n, got {text!r}") from exc
    return key.strip().replace("-", "_"), [float(v) for v in values]


def boundary_function(spec: str, length: float):
    """Boundary data by name: ``cosN``, ``modeK``, ``const:c`` or ``slit``."""
    spec = spec.strip()
    if spec.startswith("const:"):
        c = float(spec.split(":", 1)[1])
        return lambda th: np.full_like(np.asarray(th, dtype=float), c)
    if spec == "slit":
        from conefree.vertex_examples import slit_profile

        return slit_profile(length)
    if spec.startswith("mode"):
        k = int(spec[4:])
        return lambda th: np.cos(2.0 * math.pi * k * np.asarray(th, dtype=float) / length)
    if spec.startswith("cos"):
        n = int(spec[3:])
        turns = n * length / (2.0 * math.pi)
        if abs(turns - round(turns)) > 1e-5 * max(1.0, turns):
            raise ConfigError(f"cos{n} is not periodic on a cone of length {length}; use mode<K> instead")
        return lambda th: np.cos(n * np.asarray(th, dtype=float))
    raise ConfigError(f"unknown boundary data {spec!r}")


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    return max(1, n)


def _config_of(args, skip=("func", "config", "command", "verbose", "out")) -> dict:
    out = {k: v for k, v in vars(args).items() if k not in skip}
    out["command"] = args.command
    out["version"] = __version__
    return out


def _emit(path: str | None, text: str) -> None:
    if path:
        write_atomic(path, text)
    else:
        sys.stdout.write(text)


# commands ----------------------------------------------------------------------


def cmd_geodesic(args) -> int:
    cone = ConeParams(args.l)
    p = ConePoint.on(cone, *args.p)
    q = ConePoint.on(cone, *args.q)
    d, through = geodesic_distance(p, q, cone)
    _emit(args.out, dumps_json({"distance": d, "through_vertex": through, "config": _config_of(args)}))
    return 0


def cmd_harmonic(args) -> int:
    from conefree.fourier import FourierHarmonic

    cone = ConeParams(args.l)
    with open(args.coeffs) as fh:
        h = FourierHarmonic.from_csv(fh.read(), cone)
    alpha, r0, r1, n = args.scan
    n = int(n)
    if n < 2 or not 0 < r0 < r1:
        raise ConfigError("scan needs 0 < r0 < r1 and n >= 2")
    scan, violations = h.scaled_energy_scan(alpha, np.linspace(r0, r1, n))
    bad = {v[1] for v in violations}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r", "value", "violation_flag"])
    for r, v in scan:
        w.writerow([repr(r), repr(v), int(r in bad)])
    _emit(args.out, header_block(_config_of(args)) + buf.getvalue())
    return 0


def _minimize_one(params: dict, directory: str, plot: bool) -> dict:
    from conefree.minimizer import MinimizeOptions, ProblemSpec, minimize_J

    cone = ConeParams(params["l"])
    spec = ProblemSpec(cone, params["lambda_plus"], params["lambda_minus"], boundary_function(params["boundary"], cone.length),
                       name=params["boundary"])
    nr, nt = params["grid"]
    grid = PolarGrid(cone, int(nr), int(nt))
    res = minimize_J(spec, grid, MinimizeOptions(starts=params["starts"]))
    res.write(directory, params)
    if plot:
        from conefree.plotting import field_figure

        write_atomic(os.path.join(directory, "field.svg"), field_figure(res.field, res.free_boundary))
    return res.summary()


def cmd_minimize(args) -> int:
    base = _config_of(args)
    base.pop("sweep")
    base.pop("plot")
    jobs = []
    if args.sweep:
        key, values = args.sweep
        if key not in base:
            raise ConfigError(f"cannot sweep unknown parameter {key!r}")
        for v in values:
            params = dict(base, **{key: v})
            jobs.append((params, os.path.join(args.out, f"{key}={v:.6g}")))
    else:
        jobs.append((base, args.out))
    # check the boundary data before spending time on any job
    for params, _ in jobs:
        boundary_function(params["boundary"], params["l"])
    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        summaries = list(pool.map(lambda job: _minimize_one(job[0], job[1], args.plot), jobs))
    index = [dict(directory=os.path.relpath(d, args.out), **s) for (_, d), s in zip(jobs, summaries)]
    if args.sweep:
        write_atomic(os.path.join(args.out, "sweep.json"), dumps_json({"config": base, "runs": index}))
    sys.stdout.write(dumps_json(index if args.sweep else index[0]))
    if not all(s["converged"] for s in summaries):
        return EXIT_NUMERIC
    if not all(s["certificate"] for s in summaries):
        return EXIT_CERT
    return 0


def cmd_competitor(args) -> int:
    from conefree.competitor import (
        ContainmentError,
        FEMSettings,
        auto_competitor,
        run_iteration,
        strict_improvement_check,
    )

    settings = FEMSettings(h=args.grid_h)
    cart_h = args.cartesian_h or None
    config = _config_of(args)
    if args.c == "auto":
        try:
            trace, check = auto_competitor(args.l, args.kmax, settings, stop_early=False, cartesian_h=cart_h,
                                           workers=_workers())
        except ContainmentError as exc:
            raise CertificateFailure(str(exc)) from exc
    else:
        try:
            c = Fraction(args.c)
        except ValueError as exc:
            raise ConfigError(f"c must be a number or 'auto', got {args.c!r}") from exc
        trace = run_iteration(c, args.kmax, settings, workers=_workers())
        try:
            check = strict_improvement_check(args.l, c, trace, settings, cartesian_h=cart_h)
        except ContainmentError as exc:
            check = None
            log.warning("%s", exc)
    os.makedirs(args.out, exist_ok=True)
    header = header_block(config)
    write_atomic(os.path.join(args.out, "trace.json"), dumps_json({"config": config, "trace": json.loads(trace.to_json())}))
    write_atomic(os.path.join(args.out, "convergence.csv"), header + trace.to_csv())
    result = {"config": config, "strict_improvement": None if check is None else check.to_dict(),
              "recurrence_violations": trace.check()}
    write_atomic(os.path.join(args.out, "strict.json"), dumps_json(result))
    if args.plot:
        from conefree.plotting import competitor_figure

        write_atomic(os.path.join(args.out, "competitor.svg"), competitor_figure(trace))
    sys.stdout.write(dumps_json(result))
    if trace.check() or check is None or check.gap >= 0:
        return EXIT_CERT
    if check.cartesian_gap is not None and check.cartesian_gap >= 0:
        return EXIT_CERT
    return 0


def _load_result(directory: str):
    with open(os.path.join(directory, "summary.json")) as fh:
        cfg = json.load(fh)["config"]
    length = float(cfg["l"])
    nr, nt = (int(float(v)) for v in cfg["grid"].strip("()[] ").split(","))
    grid = PolarGrid(ConeParams(length), nr, nt)
    with open(os.path.join(directory, "field.csv")) as fh:
        field = ScalarField.from_csv(fh.read(), grid)
    return cfg, field


def cmd_monotonicity(args) -> int:
    from conefree.monotonicity import MonotoneScan, acf_phi, dirichlet_on_discs, weiss_scan

    cfg, u = _load_result(args.input)
    r0, r1, n = args.radii
    radii = np.linspace(r0, r1, int(n))
    lp, lm = float(cfg["lambda_plus"]), float(cfg["lambda_minus"])
    if args.which == "weiss":
        scan = weiss_scan(u, SimpleNamespace(lambda_plus=lp, lambda_minus=lm), radii)
        ylabel = "W(r)"
    elif args.which == "acf":
        scan = acf_phi(u.positive_part, u.negative_part, args.alpha, radii)
        ylabel = "Phi(r)"
    else:
        vals = dirichlet_on_discs(u, radii) / radii ** (2.0 * args.alpha)
        scan = MonotoneScan.build(radii, vals, 1e-3 * float(np.abs(vals).max()))
        ylabel = "r^(-2 alpha) D(r)"
    out = args.out or args.input
    config = dict(_config_of(args), source=cfg)
    stem = f"{args.which}_scan"
    write_atomic(os.path.join(out, stem + ".csv"), header_block(config) + scan.to_csv())
    if not args.no_plot:
        from conefree.plotting import scan_figure

        write_atomic(os.path.join(out, stem + ".svg"), scan_figure(scan.radii, scan.values, scan.violations, ylabel))
    sys.stdout.write(dumps_json({"which": args.which, "violations": len(scan.violations), "tolerance": scan.tolerance}))
    return EXIT_CERT if scan.violations else 0


def cmd_example_vertex(args) -> int:
    from conefree.minimizer import MinimizeOptions, ProblemSpec
    from conefree.contour import extract_free_boundary
    from conefree.vertex_examples import multi_phase_paste, positive_components, verify_local_minimality

    cone = ConeParams(args.l)
    nr, nt = args.grid
    grid = PolarGrid(cone, int(nr), int(nt))
    u = multi_phase_paste(args.l, args.phases, grid, threshold=args.threshold)
    spec = ProblemSpec(cone, 1.0, 0.0, lambda th: np.zeros_like(np.asarray(th, dtype=float)), name="own")
    report = verify_local_minimality(u, spec, args.perturbations, args.seed, MinimizeOptions(starts=1),
                                     run_descent=not args.no_descent)
    fb = extract_free_boundary(u)
    count, _ = positive_components(u)
    config = _config_of(args)
    os.makedirs(args.out, exist_ok=True)
    write_atomic(os.path.join(args.out, "field.csv"), header_block(config) + u.to_csv())
    write_atomic(os.path.join(args.out, "free_boundary.csv"), header_block(config) + fb.to_csv())
    body = {"config": config, "report": report.to_dict(), "vertex_distance": fb.vertex_distance,
            "positive_components": count}
    write_atomic(os.path.join(args.out, "report.json"), dumps_json(body))
    if args.plot:
        from conefree.plotting import field_figure

        write_atomic(os.path.join(args.out, "field.svg"), field_figure(u, fb))
    sys.stdout.write(dumps_json(body))
    ok = report.min_gap >= -1e-6 and (args.no_descent or report.descent_gap >= -1e-6)
    return 0 if ok else EXIT_CERT


# parser --------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="conefree", description=__doc__.splitlines()[0], allow_abbrev=False)
    p.add_argument("--config", help="INI file; keys of [DEFAULT] and [<command>] become option defaults")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("geodesic", allow_abbrev=False, help="distance between two cone points")
    g.add_argument("--l", type=float, required=True)
    g.add_argument("--p", type=_pair, required=True, metavar="R,THETA")
    g.add_argument("--q", type=_pair, required=True, metavar="R,THETA")
    g.add_argument("--out")
    g.set_defaults(func=cmd_geodesic)

    h = sub.add_parser("harmonic", allow_abbrev=False, help="scaled Dirichlet energy scan of a Fourier harmonic")
    h.add_argument("--l", type=float, required=True)
    h.add_argument("--coeffs", required=True, help="CSV with columns k,a_k,b_k")
    h.add_argument("--scan", type=_floats, required=True, metavar="ALPHA,R0,R1,N")
    h.add_argument("--out")
    h.set_defaults(func=cmd_harmonic)

    m = sub.add_parser("minimize", allow_abbrev=False, help="discrete minimizer with given boundary data")
    m.add_argument("--l", type=float, required=True)
    m.add_argument("--lambda-plus", type=float, required=True)
    m.add_argument("--lambda-minus", type=float, required=True)
    m.add_argument("--boundary", required=True, help="cosN, modeK, const:c or slit")
    m.add_argument("--grid", type=lambda s: _pair(s, int), default=(64, 256), metavar="NR,NTHETA")
    m.add_argument("--starts", type=int, default=4)
    m.add_argument("--sweep", type=_sweep, metavar="KEY=A:B:N")
    m.add_argument("--out", default="minimize_out")
    m.add_argument("--plot", action="store_true")
    m.set_defaults(func=cmd_minimize)

    c = sub.add_parser("competitor", allow_abbrev=False, help="half-plane competitor iteration and strict-improvement test")
    c.add_argument("--l", type=float, required=True)
    c.add_argument("--c", default="auto")
    c.add_argument("--kmax", type=int, default=8)
    c.add_argument("--grid-h", type=float, default=1.0 / 256)
    c.add_argument("--cartesian-h", type=float, default=0.0,
                   help="also compute the direct energy gap on a graded Cartesian grid with this spacing (0: off)")
    c.add_argument("--out", default="competitor_out")
    c.add_argument("--plot", action="store_true")
    c.set_defaults(func=cmd_competitor)

    mo = sub.add_parser("monotonicity", allow_abbrev=False, help="monotone-quantity scan of a stored minimizer")
    mo.add_argument("--input", required=True, help="directory written by 'minimize'")
    mo.add_argument("--which", choices=("weiss", "acf", "dirichlet"), required=True)
    mo.add_argument("--radii", type=_floats, default=[0.1, 0.9, 17], metavar="R0,R1,N")
    mo.add_argument("--alpha", type=float, default=2.0)
    mo.add_argument("--out")
    mo.add_argument("--no-plot", action="store_true")
    mo.set_defaults(func=cmd_monotonicity)

    e = sub.add_parser("example-vertex", allow_abbrev=False, help="phases meeting at the vertex and their minimality check")
    e.add_argument("--l", type=float, required=True)
    e.add_argument("--phases", type=int, default=1)
    e.add_argument("--threshold", type=float, default=None)
    e.add_argument("--grid", type=lambda s: _pair(s, int), default=(64, 256), metavar="NR,NTHETA")
    e.add_argument("--perturbations", type=int, default=200)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--no-descent", action="store_true")
    e.add_argument("--out", default="example_out")
    e.add_argument("--plot", action="store_true")
    e.set_defaults(func=cmd_example_vertex)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cp = configparser.ConfigParser()
    try:
        with open(known.config) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {known.config}: {exc}") from exc
    subs = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices
    for name, sp in subs.items():
        section = cp[name] if cp.has_section(name) else cp.defaults()
        dests = {a.dest: a for a in sp._actions}
        values = {}
        for key, raw in section.items():
            dest = key.replace("-", "_")
            if dest not in dests:
                if cp.has_section(name) and key not in cp.defaults():
                    raise ConfigError(f"unknown key {key!r} in section [{name}]")
                continue
            action = dests[dest]
            try:
                if isinstance(action, argparse._StoreTrueAction):
                    values[dest] = cp.getboolean(name if cp.has_section(name) else "DEFAULT", key)
                else:
                    values[dest] = action.type(raw) if action.type else raw
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise ConfigError(f"bad value for {key!r}: {exc}") from exc
            action.required = False
        sp.set_defaults(**values)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a command is required")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except (ConfigError, FileNotFoundError) as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except ConvergenceError as exc:
        sys.stderr.write(f"no convergence: {exc}\n")
        return EXIT_NUMERIC
    except CertificateFailure as exc:
        sys.stderr.write(f"certificate failure: {exc}\n")
        return EXIT_CERT
    except ValueError as exc:
        sys.stderr.write(f"invalid parameters: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
