"""Scenario runner.

    switchcost run scenario.json [--engine quad|mc|both] [--seed N]
                                 [--regions] [--extremal] [--out-dir DIR] [--jobs J]

Exit codes: 0 success, 1 some solve did not converge (outputs are still
written, with converged=false rows), 2 the scenario could not be parsed or
validated.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import demand as dm
from . import regions as rg
from . import solver as sv
from .market import ScenarioError, ValidationError, load_scenario
from .oracle import mc_demand
from .quadrature import QuadratureError

log = logging.getLogger("switchcost")

SWEEP_COLUMNS = ["scenario_id", "s", "n", "firm", "price", "demand_total", "exit_mass",
                 "dPds_fd", "dPds_ift", "stable", "converged"]
EQUILIBRIUM_COLUMNS = ["scenario_id", "s", "n", "firm", "price_own", "price_switch", "iterations",
                       "converged", "residual", "stable", "extremal_gap", "heuristic"]
DIAGNOSTIC_COLUMNS = ["scenario_id", "s", "n", "firm", "foc", "soc", "dfoc_ds", "dfoc_ds_edge",
                      "row_sum", "slope_condition", "sym_eig_max", "br_spectral_radius",
                      "stable_nsd", "stable_br", "criteria_agree"]
DEMAND_COLUMNS = ["scenario_id", "s", "n", "firm", "engine", "price_own", "price_switch",
                  "initial_mass", "switch_in_mass", "total_mass", "exit_mass", "total_se", "exit_se"]
CONDITION_COLUMNS = ["scenario_id", "n", "firm", "family", "params", "cost", "condition", "holds",
                     "margin", "worst_price", "worst_point"]
REGION_MASS_COLUMNS = ["scenario_id", "s", "panel", "stay", "switch", "exit",
                       "marginal_length_X", "marginal_length_Y",
                       "marginal_length_exact_X", "marginal_length_exact_Y"]


def fmt(x) -> str:
    """Deterministic text for a CSV cell."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if np.isnan(x):
            return "nan"
        if x == 0.0:
            return "0"
        return format(x, ".12g")
    return str(x)


def write_csv(path: Path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r.get(c)) for c in columns])


@dataclass
class PointResult:
    n: int
    s: float
    sweep: list = field(default_factory=list)
    equilibrium: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    demand: list = field(default_factory=list)
    prices: np.ndarray = None
    converged: bool = True
    error: str = None


def _demand_rows(sid, config, prices, engine, seed, N, jobs):
    rows = []
    po, ps = prices.own, prices.switch
    engines = ["quad", "mc"] if engine == "both" else [engine]
    for eng in engines:
        if eng == "quad":
            bd = dm.demand_breakdown(config, prices)
        else:
            bd = mc_demand(config, prices, N, seed, jobs)
        for i in range(config.n):
            rows.append({
                "scenario_id": sid, "s": config.s, "n": config.n, "firm": i, "engine": eng,
                "price_own": po[i], "price_switch": ps[i],
                "initial_mass": bd.initial_mass[i], "switch_in_mass": bd.switch_in_mass[i],
                "total_mass": bd.total_mass[i], "exit_mass": bd.exit_mass,
                "total_se": None if bd.total_se is None else bd.total_se[i],
                "exit_se": bd.exit_se,
            })
    return rows


def _evaluate_point(sc, config, args, opts) -> PointResult:
    """Fixed-price evaluation (scenario supplies prices)."""
    out = PointResult(config.n, config.s)
    prices = sv._to_profile(config, sv._start_vector(config, sc.prices))
    out.prices = prices
    out.demand = _demand_rows(sc.id, config, prices, args.engine, args.seed, sc.mc_samples, args.jobs)
    return out


def _solve_point(sc, config, args, opts) -> PointResult:
    out = PointResult(config.n, config.s)
    sid = sc.id
    try:
        if args.extremal:
            low, high = sv.extremal_equilibria(config, opts)
            res = sv.solve_equilibrium(config, sc.start, opts=opts) if sc.start is not None else low
            res.extremal_gap, res.heuristic = low.extremal_gap, low.heuristic
        else:
            res = sv.solve_equilibrium(config, sc.start, opts=opts)
    except QuadratureError as exc:
        out.converged, out.error = False, str(exc)
        return out
    out.prices = res.prices
    out.converged = res.converged
    cs = None
    if res.converged:
        try:
            cs = sv.comparative_statics(config, P_star=res.prices, opts=opts)
        except (sv.ComparativeStaticsError, sv.DegenerateEquilibrium, ValueError) as exc:
            out.error = str(exc)
            log.warning("comparative statics at n=%d s=%s: %s", config.n, config.s, exc)

    coords = dm.price_coordinates(config)
    x = res.vector(config.discriminatory)
    # demand for the sweep table: per segment in discriminatory mode
    if args.engine == "mc":
        bd = mc_demand(config, res.prices, sc.mc_samples, args.seed, args.jobs)
    else:
        bd = dm.demand_breakdown(config, res.prices)
    for r, (i, which) in enumerate(coords):
        if which == "own":
            dem, label = bd.initial_mass[i], f"{i}:own"
        elif which == "switch":
            dem, label = bd.switch_in_mass[i], f"{i}:switch"
        else:
            dem, label = bd.total_mass[i], i
        out.sweep.append({
            "scenario_id": sid, "s": config.s, "n": config.n, "firm": label, "price": x[r],
            "demand_total": dem, "exit_mass": bd.exit_mass,
            "dPds_fd": None if cs is None else cs.dPds_fd[r],
            "dPds_ift": None if cs is None else cs.dPds_ift[r],
            "stable": res.stable, "converged": res.converged,
        })
    for i in range(config.n):
        out.equilibrium.append({
            "scenario_id": sid, "s": config.s, "n": config.n, "firm": i,
            "price_own": res.prices.own[i], "price_switch": res.prices.switch[i],
            "iterations": res.iterations, "converged": res.converged, "residual": res.residual,
            "stable": res.stable, "extremal_gap": res.extremal_gap,
            "heuristic": res.heuristic if args.extremal else None,
        })
    if res.converged:
        J, dF = sv.jacobian(config, res.prices)
        st = res.stability
        rows = J.sum(axis=1)
        g = dm.foc_vector(config, res.prices)
        for r, (i, which) in enumerate(coords):
            brk = dm.dfoc_ds(config, res.prices, i, which, breakdown=True)
            out.diagnostics.append({
                "scenario_id": sid, "s": config.s, "n": config.n,
                "firm": i if which == "both" else f"{i}:{which}",
                "foc": g[r], "soc": J[r, r], "dfoc_ds": dF[r], "dfoc_ds_edge": brk.support_edge,
                "row_sum": rows[r], "slope_condition": bool(rows[r] < 0.0),
                "sym_eig_max": None if st is None else float(np.max(st.sym_eigenvalues)),
                "br_spectral_radius": None if st is None else st.br_spectral_radius,
                "stable_nsd": None if st is None else st.negative_semidefinite,
                "stable_br": None if st is None else st.br_contraction,
                "criteria_agree": None if st is None else st.criteria_agree,
            })
    out.demand = _demand_rows(sid, config, res.prices, args.engine, args.seed, sc.mc_samples, args.jobs)
    return out


def _region_outputs(sc, out_dir: Path, points, resolution):
    """Region grids, polylines and masses for every duopoly point."""
    spec = sc.regions if isinstance(sc.regions, dict) else {}
    resolution = int(spec.get("resolution", resolution))
    poly_rows, mass_rows = [], []
    targets = []
    s_list = spec.get("s")
    if s_list is not None:
        s_list = s_list if isinstance(s_list, list) else [s_list]
    for pt in points:
        if pt.n != 2:
            continue
        if s_list is not None and not any(abs(pt.s - s) < 1e-12 for s in s_list):
            continue
        prices = spec.get("prices")
        if prices is None:
            if pt.prices is None:
                continue
            prices = pt.prices
        targets.append((pt.s, prices))
    if s_list is not None and not targets and spec.get("prices") is not None:
        targets = [(s, spec["prices"]) for s in s_list]
    written = []
    for s, prices in targets:
        config = sc.config(2, s)
        grid = rg.region_grid(config, prices, resolution)
        c = grid.centers
        for init in (0, 1):
            path = out_dir / f"regions_s{fmt(s)}_init{rg.PANEL_NAMES[init]}.csv"
            lab = grid.labels[init]
            with open(path, "w", newline="") as fh:
                fh.write("vX,vY,label\n")
                cx = [fmt(v) for v in c]
                for ix in range(resolution):
                    row = lab[ix]
                    fh.write("".join(f"{cx[ix]},{cx[iy]},{int(row[iy])}\n" for iy in range(resolution)))
            written.append(path)
        for k, pl in enumerate(grid.polylines):
            for j, (vx, vy) in enumerate(pl.points):
                poly_rows.append({"scenario_id": sc.id, "s": s, "panel": rg.PANEL_NAMES[pl.panel],
                                  "firm": rg.PANEL_NAMES[pl.firm],
                                  "kind": pl.kind.replace("0", "X").replace("1", "Y"), "segment": k,
                                  "vertex": j, "vX": vx, "vY": vy})
        for pm in rg.region_masses(config, prices, resolution):
            mass_rows.append({"scenario_id": sc.id, "s": s, "panel": rg.PANEL_NAMES[pm.panel],
                              "stay": pm.stay, "switch": pm.switch, "exit": pm.exit,
                              "marginal_length_X": pm.marginal_length[0],
                              "marginal_length_Y": pm.marginal_length[1],
                              "marginal_length_exact_X": pm.marginal_length_exact[0],
                              "marginal_length_exact_Y": pm.marginal_length_exact[1]})
    if targets:
        write_csv(out_dir / "polylines.csv",
                  ["scenario_id", "s", "panel", "firm", "kind", "segment", "vertex", "vX", "vY"], poly_rows)
        write_csv(out_dir / "region_masses.csv", REGION_MASS_COLUMNS, mass_rows)
    return written


def run(args) -> int:
    try:
        sc = load_scenario(args.scenario)
        opts = sv.SolverOptions.from_dict(sc.solver)
    except ScenarioError as exc:
        print(f"error: {args.scenario}: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"error: {args.scenario}: invalid scenario", file=sys.stderr)
        for e in exc.errors:
            print(f"  - {e}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {args.scenario}: {exc}", file=sys.stderr)
        return 2
    if args.seed is None:
        args.seed = sc.seed
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    points = [(n, s) for n in sc.firms for s in sc.s_values]
    task = _evaluate_point if sc.prices is not None else _solve_point

    def work(pt):
        n, s = pt
        return task(sc, sc.config(n, s), args, opts)

    if args.jobs > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(work, points))
    else:
        results = [work(p) for p in points]

    if sc.prices is None:
        write_csv(out_dir / "sweep.csv", SWEEP_COLUMNS, [r for p in results for r in p.sweep])
        write_csv(out_dir / "equilibrium.csv", EQUILIBRIUM_COLUMNS, [r for p in results for r in p.equilibrium])
        write_csv(out_dir / "diagnostics.csv", DIAGNOSTIC_COLUMNS, [r for p in results for r in p.diagnostics])
    write_csv(out_dir / "demand.csv", DEMAND_COLUMNS, [r for p in results for r in p.demand])

    cond_rows = []
    for n in sc.firms:
        cfg = sc.config(n, sc.s_values[0])
        for i, entries in sv.condition_diagnostics(cfg).items():
            d = cfg.dists[i]
            for e in entries:
                cond_rows.append({"scenario_id": sc.id, "n": n, "firm": i, "family": d.family,
                                  "params": " ".join(fmt(p) for p in d.params), "cost": cfg.c[i],
                                  **e.as_row()})
    write_csv(out_dir / "conditions.csv", CONDITION_COLUMNS, cond_rows)

    if args.regions:
        _region_outputs(sc, out_dir, results, 400)

    failed = [p for p in results if not p.converged]
    for p in failed:
        print(f"warning: no convergence at n={p.n} s={fmt(p.s)}" + (f": {p.error}" if p.error else ""),
              file=sys.stderr)
    return 1 if failed else 0


def build_parser():
    p = argparse.ArgumentParser(prog="switchcost", description="Price competition with switching costs.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario file")
    r.add_argument("scenario", help="scenario JSON file")
    r.add_argument("--engine", choices=["quad", "mc", "both"], default="quad",
                   help="demand engine for reported demand (equilibria always use quadrature)")
    r.add_argument("--seed", type=int, default=None, help="Monte Carlo seed (overrides the scenario)")
    r.add_argument("--regions", action="store_true", help="write duopoly region grids")
    r.add_argument("--extremal", action="store_true", help="also iterate from the lowest and highest prices")
    r.add_argument("--out-dir", default="out", help="output directory (default: ./out)")
    r.add_argument("--jobs", type=int, default=1, help="worker threads for sweep points and Monte Carlo")
    r.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 2
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
