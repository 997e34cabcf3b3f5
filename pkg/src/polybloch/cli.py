"""Command-line driver: reproducible experiment runs from a single config file.

Flags choose the subcommand, verbosity, and output locations; every
physics parameter comes from the config.  Exit codes: 0 success, 2 config
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import block as block_mod
from . import scanner, series, simple
from .config import ExperimentConfig, csv_header_line, write_json
from .errors import ConfigError, SpectralError
from .geometry import classify, inequality_report
from .oracle import bloch_solve


def _log(args, *message):
    if args.verbose:
        print(*message, file=sys.stderr)


def _load(args) -> ExperimentConfig:
    return ExperimentConfig.load(args.config)


def cmd_params(args) -> int:
    cfg = _load(args)
    lat = cfg.lattice()
    rows = []
    for rho in cfg.rho_list():
        cas = cfg.cascade(rho, d=lat.dimension)
        checks = [
            {"name": name, "lhs": lhs, "rhs": rhs, "holds": ok}
            for name, lhs, rhs, ok in inequality_report(cas)
        ]
        rows.append({
            "rho": rho, "mode": cas.mode, "d": cas.d, "l": cas.l, "s": cas.s,
            "m": cas.m, "alpha": cas.alpha, "alpha_k": list(cas.alpha_k),
            "k1": cas.k1, "p": cas.p, "p1": cas.p1, "eps1": cas.eps1,
            "checks": checks,
        })
        print(f"rho = {rho}: m = {cas.m}, alpha = 1/{cas.m}, alpha_1 = {cas.alpha_k[0]!r}, "
              f"k1 = {cas.k1}, p = {cas.p!r}, p1 = {cas.p1}, eps1 = {cas.eps1!r}")
        for check in checks:
            status = "PASS" if check["holds"] else "FAIL"
            print(f"  [{status}] {check['name']}: lhs = {check['lhs']!r}, rhs = {check['rhs']!r}")
    out = cfg.output_dir(args.output_dir) / "params.json"
    write_json(out, cfg, rows)
    _log(args, f"wrote {out}")
    return 0


def cmd_classify(args) -> int:
    cfg = _load(args)
    lat = cfg.lattice()
    sec = cfg.section("classify")
    points = sec.get("points")
    if not points:
        raise ConfigError("missing [classify].points")
    rho = float(sec.get("rho", cfg.rho_list()[0]))
    cas = cfg.cascade(rho, d=lat.dimension)
    results = []
    for point in points:
        x = np.asarray(point, dtype=float)
        verdict = classify(lat, x, cas)
        results.append({
            "point": [float(c) for c in x],
            "level": verdict.level,
            "directions": [list(g.coords) for g in verdict.directions],
            "margins": list(verdict.margins),
            "min_pool_margin": verdict.min_pool_margin,
        })
    out = cfg.output_dir(args.output_dir) / "classify.json"
    write_json(out, cfg, {"rho": rho, "verdicts": results})
    print(f"classified {len(results)} points -> {out}")
    return 0


def cmd_predict(args) -> int:
    cfg = _load(args)
    lat = cfg.lattice()
    q = cfg.potential(lat)
    l = cfg.degree()
    sec = cfg.section("predict")
    centers = sec.get("centers")
    if not centers:
        raise ConfigError("missing [predict].centers")
    rho = float(sec.get("rho", cfg.rho_list()[0]))
    cas = cfg.cascade(rho, d=lat.dimension)
    k_max = int(sec.get("order", cas.known_order()))
    results = []
    for center in centers:
        v = np.asarray(center, dtype=float)
        exp = series.known_part_sequence(v, l, q, cas, k_max=k_max)
        results.append({
            "center": [float(c) for c in v],
            "f_values": list(exp.f_values),
            "predictions": {str(k): exp.prediction(k) for k in range(1, k_max + 1)},
            "known_part": exp.known_part(),
        })
    out = cfg.output_dir(args.output_dir) / "predict.json"
    write_json(out, cfg, results)
    print(f"predicted {len(results)} centers -> {out}")
    return 0


def cmd_verify(args) -> int:
    cfg = _load(args)
    lat = cfg.lattice()
    q = cfg.potential(lat)
    l = cfg.degree()
    sec = cfg.section("verify")
    direction = sec.get("direction")
    if direction is None:
        raise ConfigError("missing [verify].direction")
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    orders = [int(k) for k in sec.get("orders", [1, 2])]
    rhos = cfg.rho_list()
    cas = cfg.cascade(rhos[0], d=lat.dimension)
    window = sec.get("window_radius")
    table = series.order_sweep(lat, l, q, [rho * u for rho in rhos], orders, cas,
                               window_radius=None if window is None else float(window))
    out_dir = cfg.output_dir(args.output_dir)
    csv_path = out_dir / "verify.csv"
    with open(csv_path, "w") as fh:
        fh.write(csv_header_line(cfg))
        table.write_csv(fh)
    slopes = {str(k): table.slopes[k] for k in orders}
    write_json(out_dir / "verify.json", cfg, {"direction": [float(c) for c in u], "slopes": slopes})
    for row in table.rows:
        print(f"rho = {row.rho!r} k = {row.k}: |Lambda - P_k| = {row.error!r} (weight {row.weight!r})")
    print(f"slopes: {slopes} -> {csv_path}")
    return 0


def cmd_resonant_check(args) -> int:
    cfg = _load(args)
    lat = cfg.lattice()
    q = cfg.potential(lat)
    l = cfg.degree()
    sec = cfg.section("resonant_check")
    points = sec.get("points")
    if not points:
        raise ConfigError("missing [resonant_check].points")
    window = float(sec.get("window_radius", series.required_window_radius(q, cfg.cascade(cfg.rho_list()[0], d=lat.dimension))))
    out_dir = cfg.output_dir(args.output_dir)
    rows = []
    for point in points:
        v = np.asarray(point, dtype=float)
        rho = float(sec.get("rho", np.linalg.norm(v)))
        cas = cfg.cascade(rho, d=lat.dimension)
        verdict = classify(lat, v, cas)
        if not verdict.is_resonant:
            raise SpectralError(f"point {point} is non-resonant; resonant-check needs a resonant point")
        iset = block_mod.build_index_set(lat, v, verdict.directions, cas)
        blk = block_mod.assemble_block(iset, l, q)
        spectrum = bloch_solve(lat, l, q, v, window, refine=True)
        match = block_mod.match_resonant(spectrum, blk)
        rows.append({
            "v": [float(c) for c in v],
            "k": verdict.level,
            "directions": [list(g.coords) for g in verdict.directions],
            "b_k": iset.size,
            "j": match.block_index,
            "lambda_j": float(blk.eigenvalues[match.block_index]),
            "Lambda_N": float(spectrum.eigenvalues[match.oracle_index]),
            "deviation": match.deviation,
        })
        print(f"v = {point}: level {verdict.level}, b_k = {iset.size}, deviation = {match.deviation!r}")
    csv_path = out_dir / "resonant_check.csv"
    with open(csv_path, "w") as fh:
        fh.write(csv_header_line(cfg))
        fh.write("v,k,directions,b_k,j,lambda_j,Lambda_N,deviation\n")
        for r in rows:
            fh.write(",".join([
                "(" + " ".join(repr(c) for c in r["v"]) + ")", str(r["k"]),
                "(" + ";".join("_".join(map(str, d)) for d in r["directions"]) + ")",
                str(r["b_k"]), str(r["j"]), repr(r["lambda_j"]), repr(r["Lambda_N"]), repr(r["deviation"]),
            ]) + "\n")
    write_json(out_dir / "resonant_check.json", cfg, rows)
    return 0


def cmd_simple_check(args) -> int:
    cfg = _load(args)
    lat = cfg.lattice()
    q = cfg.potential(lat)
    l = cfg.degree()
    sec = cfg.section("simple_check")
    points = sec.get("points")
    if not points:
        raise ConfigError("missing [simple_check].points")
    results = []
    for point in points:
        v = np.asarray(point, dtype=float)
        rho = float(sec.get("rho", np.linalg.norm(v)))
        cas = cfg.cascade(rho, d=lat.dimension)
        try:
            report = simple.check_simplicity(lat, v, cas, l, q)
        except ValueError as err:
            raise SpectralError(f"simple-check precondition failed at {point}: {err}") from err
        results.append({
            "v": [float(c) for c in v],
            "f_value": report.f_value,
            "eps1": report.eps1,
            "member": report.member,
            "margins": [
                {"coords": list(e.coords), "level": e.level, "kind": e.kind,
                 "competitor_value": e.competitor_value, "margin": e.margin}
                for e in report.entries
            ],
        })
        print(f"v = {point}: member = {report.member} ({len(report.entries)} competitors)")
    out = cfg.output_dir(args.output_dir) / "simple_check.json"
    write_json(out, cfg, results)
    return 0


def cmd_bloch(args) -> int:
    cfg = _load(args)
    lat = cfg.lattice()
    q = cfg.potential(lat)
    l = cfg.degree()
    sec = cfg.section("bloch")
    centers = sec.get("centers")
    if not centers:
        raise ConfigError("missing [bloch].centers")
    order = int(sec.get("order", 2))
    results = []
    for center in centers:
        v = np.asarray(center, dtype=float)
        rho = float(sec.get("rho", np.linalg.norm(v)))
        cas = cfg.cascade(rho, d=lat.dimension)
        window = float(sec.get("window_radius", series.required_window_radius(q, cas)))
        spectrum = bloch_solve(lat, l, q, v, window, refine=True)
        gamma0, _ = lat.reduce(v)
        n = spectrum.dominant_index(gamma0.coords)
        report = simple.bloch_verify(spectrum, n, gamma0.coords, order, q)
        results.append({
            "center": [float(c) for c in v],
            "weight": report.weight,
            "residual_mass": report.residual_mass,
            "normalization_predicted": report.normalization_predicted,
            "normalization_measured": report.normalization_measured,
            "coefficients": [
                {"offset": list(r.offset),
                 "predicted_first_order": [r.predicted_first_order.real, r.predicted_first_order.imag],
                 "predicted_total": [r.predicted_total.real, r.predicted_total.imag],
                 "measured": [r.measured.real, r.measured.imag]}
                for r in report.rows
            ],
        })
        print(f"center {center}: weight {report.weight!r}, residual mass {report.residual_mass!r}")
    out = cfg.output_dir(args.output_dir) / "bloch.json"
    write_json(out, cfg, results)
    return 0


def cmd_bands(args) -> int:
    cfg = _load(args)
    lat = cfg.lattice()
    q = cfg.potential(lat)
    l = cfg.degree()
    sec = cfg.section("bands")
    grid = tuple(int(n) for n in sec.get("grid", [16] * lat.dimension))
    n_bands = int(sec.get("n_bands", 20))
    radius = sec.get("basis_radius")
    table = scanner.band_functions(lat, l, q, grid, n_bands,
                                   basis_radius=None if radius is None else float(radius),
                                   workers=cfg.workers())
    out_dir = cfg.output_dir(args.output_dir)
    csv_path = out_dir / "bands.csv"
    with open(csv_path, "w") as fh:
        fh.write(csv_header_line(cfg))
        table.write_csv(fh)
    write_json(out_dir / "bands.json", cfg, {
        "grid": list(grid), "n_bands": n_bands, "basis_radius": table.basis_radius,
        "band_min": [float(x) for x in table.band_min],
        "band_max": [float(x) for x in table.band_max],
    })
    print(f"bands: {n_bands} over {grid} grid (basis radius {table.basis_radius!r}) -> {csv_path}")
    return 0


def cmd_gaps(args) -> int:
    cfg = _load(args)
    lat = cfg.lattice()
    q = cfg.potential(lat)
    l = cfg.degree()
    sec = cfg.section("gaps")
    grid = tuple(int(n) for n in sec.get("grid", [16] * lat.dimension))
    n_bands = int(sec.get("n_bands", 30))
    e_min = float(sec.get("e_min", 0.0))
    radius = sec.get("basis_radius")
    e_max = sec.get("e_max")
    if e_max is None:
        probe = scanner.band_functions(lat, l, q, (8,) * lat.dimension, n_bands,
                                       basis_radius=None if radius is None else float(radius),
                                       workers=cfg.workers())
        e_max = float(probe.band_min[-1]) * 0.999
        radius = probe.basis_radius
    report, coarse, fine = scanner.stable_gap_report(
        lat, l, q, grid, n_bands, e_min, float(e_max),
        basis_radius=None if radius is None else float(radius), workers=cfg.workers())
    out = cfg.output_dir(args.output_dir) / "gaps.json"
    write_json(out, cfg, {
        "e_min": report.e_min, "e_max": report.e_max,
        "gaps": [list(g) for g in report.gaps],
        "stable": report.stable,
        "grids": [list(coarse.grid_counts), list(fine.grid_counts)],
    })
    print(f"gaps in ({report.e_min!r}, {report.e_max!r}]: {len(report.gaps)} (stable = {report.stable}) -> {out}")
    return 0


def cmd_isoenergetic(args) -> int:
    cfg = _load(args)
    lat = cfg.lattice()
    q = cfg.potential(lat)
    l = cfg.degree()
    sec = cfg.section("isoenergetic")
    rays = sec.get("rays")
    if not rays:
        raise ConfigError("missing [isoenergetic].rays")
    results = []
    for rho in cfg.rho_list():
        cas = cfg.cascade(rho, d=lat.dimension)
        roots = simple.isoenergetic_sample(lat, rho, l, q, cas, rays)
        results.append({
            "rho": rho,
            "roots": [
                {"direction": list(r.direction), "radius": r.radius,
                 "point": None if r.point is None else list(r.point),
                 "f_value": r.f_value, "skipped": r.skipped}
                for r in roots
            ],
        })
        found = sum(1 for r in roots if r.skipped is None)
        print(f"rho = {rho}: {found}/{len(roots)} rays crossed")
    out = cfg.output_dir(args.output_dir) / "isoenergetic.json"
    write_json(out, cfg, results)
    return 0


def cmd_measure(args) -> int:
    cfg = _load(args)
    lat = cfg.lattice()
    sec = cfg.section("measure")
    n_samples = int(sec.get("n_samples", 10000))
    results = []
    for rho in cfg.rho_list():
        cas = cfg.cascade(rho, d=lat.dimension)
        est = scanner.measure_fraction(lat, rho, cas, n_samples, seed=cfg.seed())
        results.append({
            "rho": rho, "n_samples": n_samples,
            "fractions": est.fractions, "stderr": est.stderr,
        })
        print(f"rho = {rho}: fractions {est.fractions}")
    out = cfg.output_dir(args.output_dir) / "measure.json"
    write_json(out, cfg, results)
    return 0


_COMMANDS = {
    "params": cmd_params,
    "classify": cmd_classify,
    "predict": cmd_predict,
    "verify": cmd_verify,
    "resonant-check": cmd_resonant_check,
    "simple-check": cmd_simple_check,
    "bloch": cmd_bloch,
    "bands": cmd_bands,
    "gaps": cmd_gaps,
    "isoenergetic": cmd_isoenergetic,
    "measure": cmd_measure,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polybloch",
        description="Spectral experiments for periodic polyharmonic operators",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("-c", "--config", required=True, help="experiment config (YAML)")
        p.add_argument("-o", "--output-dir", default=None, help="override the output directory")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except SpectralError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
