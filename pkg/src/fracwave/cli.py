"""Batch experiment driver.

Subcommands: simulate | spectrum | observability | invert | selftest.
Every run writes a manifest.json echoing the fully resolved configuration
(defaults included); identical config and seed give byte-identical CSVs.

Exit codes: 0 success, 1 config error, 2 numerical failure, 3 acceptance failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config
from .errors import ConfigError, FracwaveError, NumericsError
from .fraccalc import TimeGrid
from .observability import (
    ObservationSetup,
    build_observation_map,
    injectivity_report,
    invert_source,
    synthesize_observations,
    write_recovery_csv,
    write_singular_values_csv,
)
from .solver import (
    LaplaceContour,
    route_difference,
    solve_resolvent,
    solve_spectral_oracle,
    solve_timestep,
    states_at,
)
from .spectral import compute_riesz_data, eigendecompose, verify_identities, write_spectrum_csv

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICS = 2
EXIT_ACCEPTANCE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; config errors are 1
        raise ConfigError(message)


def _write_manifest(
    outdir: str, command: str, cfg: ExperimentConfig | None, outputs: list, extra: dict | None = None
):
    manifest = {
        "command": command,
        "version": __version__,
        "config": cfg.resolved() if cfg is not None else None,
        "outputs": sorted(os.path.basename(p) for p in outputs),
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(outdir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _write_slices(outdir: str, route: str, times, states) -> list:
    paths = []
    for t, state in zip(times, states):
        path = os.path.join(outdir, f"u_{route}_t{t:.6g}.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("node,value\n")
            for i, v in enumerate(state):
                fh.write(f"{i},{v:.17g}\n")
        paths.append(path)
    return paths


def cmd_simulate(cfg: ExperimentConfig, outdir: str) -> int:
    op = cfg.build_operator()
    source = cfg.build_source()
    alpha = cfg.problem.alpha
    times = cfg.solver_times()
    outputs = []
    solutions = {}
    route_meta = {}
    riesz = None
    for route in cfg.solver.routes:
        if route == "timestep":
            grid = TimeGrid(cfg.problem.T, cfg.problem.K)
            sol = solve_timestep(op, source, alpha, grid)
            states = states_at(sol, times)
        elif route == "resolvent":
            sol = solve_resolvent(
                op, source, alpha, times, contour=LaplaceContour(cfg.solver.talbot_nodes)
            )
            states = sol.states
        else:
            if riesz is None:
                eigsys = eigendecompose(op, cfg.spectral.cluster_tol)
                riesz = compute_riesz_data(op, eigsys, cfg.spectral.contour_nodes)
            sol = solve_spectral_oracle(riesz, source, alpha, times)
            states = sol.states
        solutions[route] = states
        route_meta[route] = sol.params
        outputs += _write_slices(outdir, route, times, states)

    diff_path = os.path.join(outdir, "route_differences.csv")
    with open(diff_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "route_a", "route_b", "relative_l2_difference"])
        names = list(solutions)
        for ia in range(len(names)):
            for ib in range(ia + 1, len(names)):
                scale = lambda x: max(float(np.linalg.norm(x)), 1e-300)
                for it, t in enumerate(times):
                    xa, xb = solutions[names[ia]][it], solutions[names[ib]][it]
                    rel = np.linalg.norm(xa - xb) / max(scale(xa), scale(xb))
                    writer.writerow([f"{t:.17g}", names[ia], names[ib], f"{rel:.6g}"])
    outputs.append(diff_path)
    _write_manifest(outdir, "simulate", cfg, outputs, extra={"solver_metadata": route_meta})
    return EXIT_OK


def cmd_spectrum(cfg: ExperimentConfig, outdir: str) -> int:
    op = cfg.build_operator()
    eigsys = eigendecompose(op, cfg.spectral.cluster_tol)
    riesz = compute_riesz_data(op, eigsys, cfg.spectral.contour_nodes)
    report = verify_identities(op, riesz)
    path = os.path.join(outdir, "spectrum.csv")
    write_spectrum_csv(riesz, report, path)
    _write_manifest(outdir, "spectrum", cfg, [path])
    return EXIT_OK


def _observation_setup(cfg: ExperimentConfig, mesh) -> ObservationSetup:
    return ObservationSetup(
        cfg.observation_omega(mesh),
        cfg.observation_times(),
        route=cfg.observation.route,
        route_params={
            "K": cfg.observation.timestep_K,
            "contour_nodes": cfg.spectral.contour_nodes
            if cfg.observation.route == "spectral"
            else cfg.solver.talbot_nodes,
            "cluster_tol": cfg.spectral.cluster_tol,
        },
    )


def cmd_observability(cfg: ExperimentConfig, outdir: str) -> int:
    if cfg.problem.kind != "elliptic":
        raise ConfigError("observability requires an elliptic problem")
    op = cfg.build_operator()
    mesh = cfg.build_mesh()
    setup = _observation_setup(cfg, mesh)
    obsmap = build_observation_map(op, cfg.problem.alpha, setup)
    rep = injectivity_report(obsmap)
    sv_path = os.path.join(outdir, "singular_values.csv")
    mf_path = os.path.join(outdir, "observation_map.json")
    write_singular_values_csv(obsmap, sv_path, mf_path)
    verdict_path = os.path.join(outdir, "verdict.json")
    with open(verdict_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "numerical_rank": rep.numerical_rank,
                "expected_rank": rep.expected_rank,
                "sigma_min": rep.sigma_min,
                "sigma_max": rep.sigma_max,
                "condition": rep.condition if np.isfinite(rep.condition) else "inf",
                "rank_threshold": rep.rank_threshold,
                "verdict": "injective" if rep.injective else "rank-deficient",
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    _write_manifest(outdir, "observability", cfg, [sv_path, mf_path, verdict_path])
    return EXIT_OK


def cmd_invert(cfg: ExperimentConfig, outdir: str) -> int:
    if cfg.problem.kind != "elliptic":
        raise ConfigError("invert requires an elliptic problem")
    op = cfg.build_operator()
    mesh = cfg.build_mesh()
    source = cfg.build_source(mesh)
    setup = _observation_setup(cfg, mesh)
    alpha = cfg.problem.alpha
    obsmap = build_observation_map(op, alpha, setup)
    inv = cfg.inversion
    try:
        data = synthesize_observations(obsmap, source, noise=inv.noise, seed=inv.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    result = invert_source(
        op,
        alpha,
        setup,
        data,
        method=inv.method,
        reg_scale=inv.reg_scale,
        tsvd_rank=inv.tsvd_rank,
        observation_map=obsmap,
    )
    rec_path = os.path.join(outdir, "recovery.csv")
    write_recovery_csv(source, result, rec_path)
    truth = np.concatenate([source.a, source.b])
    guess = np.concatenate([result.a_hat, result.b_hat])
    denom = float(np.linalg.norm(truth))
    summary_path = os.path.join(outdir, "recovery_summary.json")
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "relative_error": float(np.linalg.norm(guess - truth)) / denom
                if denom > 0
                else 0.0,
                "data_residual": result.residual,
                "effective_condition": result.effective_condition,
                "noise": inv.noise,
                "seed": inv.seed,
                **result.params,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    _write_manifest(outdir, "invert", cfg, [rec_path, summary_path])
    return EXIT_OK


def cmd_selftest(only: str | None) -> int:
    from .acceptance import run_all

    selection = None
    if only:
        try:
            selection = {int(v) for v in only.replace(",", " ").split()}
        except ValueError as exc:
            raise ConfigError(f"--only expects criterion numbers, got {only!r}") from exc
    ok = run_all(emit=print, only=selection)
    return EXIT_OK if ok else EXIT_ACCEPTANCE


def build_parser() -> _Parser:
    parser = _Parser(
        prog="fracwave",
        description=(
            "Numerical laboratory for time-fractional wave dynamics with "
            "non-symmetric elliptic operators: forward simulation, spectral "
            "projections, subdomain observability, and inverse source recovery."
        ),
    )
    sub = parser.add_subparsers(dest="command")
    for name, doc in [
        ("simulate", "run forward solver routes and cross-route diff report"),
        ("spectrum", "eigenvalue clusters, Riesz projections, identity residuals"),
        ("observability", "build the observation map and report its injectivity"),
        ("invert", "synthesize observations and recover the source pair"),
    ]:
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", required=True, help="experiment config (INI)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument(
            "--route",
            choices=["timestep", "resolvent", "spectral", "all"],
            help="override configured route(s)",
        )
        p.add_argument("--seed", type=int, help="override the inversion seed")
    p = sub.add_parser("selftest", help="run the acceptance suite")
    p.add_argument("--only", help="comma-separated criterion numbers to run")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return EXIT_OK
        if args.command == "selftest":
            return cmd_selftest(args.only)
        cfg = load_config(args.config)
        if args.route:
            routes = (
                ("timestep", "resolvent", "spectral") if args.route == "all" else (args.route,)
            )
            cfg.solver.routes = routes
            if args.route != "all":
                cfg.observation.route = args.route
        if args.seed is not None:
            cfg.inversion.seed = args.seed
        os.makedirs(args.out, exist_ok=True)
        handler = {
            "simulate": cmd_simulate,
            "spectrum": cmd_spectrum,
            "observability": cmd_observability,
            "invert": cmd_invert,
        }[args.command]
        return handler(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    except FracwaveError as exc:  # pragma: no cover - catch-all for package errors
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICS


if __name__ == "__main__":
    sys.exit(main())
