"""Command-line interface: ``scalesep {simulate,decompose,scree,predict,eval}``.

Exit codes: 0 success, 1 bad input, 2 solver did not converge (outputs are
still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import io
from .blp import oracle_blp, separate
from .completion import RankRule, SolverConfig, default_max_rank, scree
from .covmodel import ScaleSepError, as_symcov, build_band_mask, empirical_covariance
from .experiments import METHODS, run_eval, summarize
from .pipeline import decompose
from .simgen import SCENARIOS, ScenarioConfig, generate, rel_mise
from .spectra import spectrum

log = logging.getLogger("scalesep")

EXIT_OK, EXIT_INPUT, EXIT_NOCONV = 0, 1, 2


def _solver(args) -> SolverConfig:
    cfg = SolverConfig()
    if getattr(args, "solver_config", None):
        cfg = SolverConfig.from_json(Path(args.solver_config).read_text())
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "restarts", None) is not None:
        overrides["restarts"] = args.restarts
    return SolverConfig(**{**cfg.__dict__, **overrides})


def _covariance_input(args):
    """Returns (covariance, column mean or None)."""
    M = io.load_matrix(args.input)
    if args.covariance:
        return as_symcov(M), None
    mean = M.mean(axis=0) if args.center else None
    return empirical_covariance(M, center=args.center), mean


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _save_scree(path, result):
    with Path(path).open("w", newline="") as fh:
        for rank, value in zip(result.ranks, result.normalized):
            fh.write(f"{int(rank)},{value:.17g}\n")
    return Path(path)


def cmd_decompose(args) -> int:
    started = time.time()
    Rn, mean = _covariance_input(args)
    cfg = _solver(args)
    rule = RankRule.parse(args.rank_rule)
    D = decompose(Rn, args.half_band, rule, args.max_rank, cfg)
    out = _out(args)
    files = [
        io.save_matrix(out / "Rn.csv", D.Rn),
        io.save_matrix(out / "Lhat.csv", D.Lhat),
        io.save_matrix(out / "Bhat.csv", D.Bhat),
        io.save_matrix(out / "Rhat.csv", D.Rhat),
        io.save_matrix(out / "Delta.csv", D.delta),
        _save_scree(out / "scree.csv", D.scree),
        io.save_spectrum(out / "spectrum_L.csv", D.L_spectrum),
        io.save_spectrum(out / "spectrum_B.csv", D.B_spectrum),
        io.save_spectrum(out / "spectrum_R.csv", D.R_spectrum),
        io.save_matrix(out / "mean.csv", np.zeros(Rn.shape[0]) if mean is None else mean),
    ]
    fit = D.scree.at(D.rank)
    results = {
        "selected_rank": D.rank,
        "rule": str(rule),
        "leveled": D.selection.leveled,
        "half_band": D.half_band,
        "normalized_fits": [float(v) for v in D.scree.normalized],
        "fit_converged": fit.converged,
        "fit_iterations": fit.iterations,
        "dykstra_converged": D.dykstra.converged,
        "dykstra_iterations": D.dykstra.iterations,
        "centered": mean is not None,
    }
    files.append(io.write_json(out / "decomposition.json", results))
    config = {"half_band": args.half_band, "max_rank": args.max_rank, "rank_rule": str(rule),
              "center": args.center, "covariance_input": args.covariance,
              "solver": json.loads(cfg.to_json())}
    io.write_manifest(out, "decompose", config, [args.input], files, cfg.seed, results, started)
    print(f"rank {D.rank} ({rule}), half-band {D.half_band}, converged={D.converged}")
    return EXIT_OK if D.converged else EXIT_NOCONV


def cmd_scree(args) -> int:
    started = time.time()
    Rn, _ = _covariance_input(args)
    cfg = _solver(args)
    mask = build_band_mask(Rn.shape[0], args.half_band)
    result = scree(Rn, mask, args.max_rank or default_max_rank(Rn.shape[0]), cfg)
    out = _out(args)
    path = _save_scree(out / "scree.csv", result)
    config = {"half_band": mask.half_band, "max_rank": int(result.ranks[-1]),
              "center": args.center, "covariance_input": args.covariance,
              "solver": json.loads(cfg.to_json())}
    converged = all(f.converged for f in result.fits)
    io.write_manifest(out, "scree", config, [args.input], [path], cfg.seed,
                      {"normalized_fits": [float(v) for v in result.normalized]}, started)
    for rank, value in zip(result.ranks, result.normalized):
        print(f"{int(rank):3d}  {value:.6g}")
    return EXIT_OK if converged else EXIT_NOCONV


def _load_decomposition(d: Path):
    meta = json.loads((d / "decomposition.json").read_text())
    Lhat = io.load_matrix(d / "Lhat.csv")
    Bhat = io.load_matrix(d / "Bhat.csv")
    mean = io.load_matrix(d / "mean.csv").ravel()
    return SimpleNamespace(
        L_spectrum=spectrum(Lhat).leading(meta["selected_rank"]),
        R_spectrum=spectrum(Lhat + Bhat),
        mean=mean if meta.get("centered") else None,
    )


def cmd_predict(args) -> int:
    started = time.time()
    decomp_dir = Path(args.decomposition)
    D = _load_decomposition(decomp_dir)
    K = D.L_spectrum.K
    X = io.load_matrix(args.input, allow_empty=True)
    if X.size == 0:
        X = np.zeros((0, K))
    if X.shape[1] != K:
        raise ScaleSepError(f"samples have {X.shape[1]} columns, decomposition has K={K}")
    sep = separate(X, D, D.mean)
    out = _out(args)
    files = [io.save_matrix(out / "Yhat.csv", sep.Yhat),
             io.save_matrix(out / "What.csv", sep.What),
             io.save_matrix(out / "scores.csv", sep.scores)]
    results = {"rhat": sep.rhat, "n": int(X.shape[0])}
    if args.truth and X.shape[0]:
        truth = Path(args.truth)
        Ltrue = io.load_matrix(truth / "Ltrue.csv")
        Rtrue = io.load_matrix(truth / "Rtrue.csv")
        Ypi = oracle_blp(X, Ltrue, Rtrue)
        results["relMISE"] = rel_mise(sep.Yhat, Ypi)
        files.append(io.save_matrix(out / "Ypi.csv", Ypi))
        files.append(io.write_json(out / "relmise.json", {"relMISE": results["relMISE"]}))
        print(f"relMISE {results['relMISE']:.6g}")
    inputs = [args.input, decomp_dir / "Lhat.csv", decomp_dir / "Bhat.csv"]
    io.write_manifest(out, "predict", {"decomposition": str(decomp_dir), "truth": args.truth},
                      inputs, files, None, results, started)
    return EXIT_OK


def _scenario(args) -> ScenarioConfig:
    return ScenarioConfig.from_scenario(args.scenario, args.combo, args.regime, args.n, args.k,
                                        args.seed, r=args.r, delta=args.delta)


def cmd_simulate(args) -> int:
    started = time.time()
    cfg = _scenario(args)
    truth = generate(cfg)
    out = _out(args)
    files = [io.save_matrix(out / f"{name}.csv", M) for name, M in [
        ("samples", truth.samples), ("Y", truth.Ysample), ("W", truth.Wsample),
        ("Ltrue", truth.Ltrue), ("Btrue", truth.Btrue), ("Rtrue", truth.Rtrue),
        ("Lsample", truth.Lsample), ("Bsample", truth.Bsample), ("Rsample", truth.Rsample),
        ("eta", truth.eta),
    ]]
    files.append(io.write_json(out / "metadata.json", truth.metadata()))
    io.write_manifest(out, "simulate", json.loads(cfg.to_json()), [], files, cfg.seed, {}, started)
    print(f"scenario {args.scenario.upper()} ({cfg.smooth_basis}+{cfg.rough_kind}), "
          f"r={cfg.r}, delta={cfg.delta}, n={cfg.n}, K={cfg.K} -> {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    started = time.time()
    cfg = _scenario(args)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    unknown = set(methods) - set(METHODS)
    if unknown or not methods:
        raise ScaleSepError(f"methods must be drawn from {METHODS}, got {args.methods!r}")
    if "ours" not in methods:
        methods = ("ours",) + methods
    solver = _solver(args)
    rows = run_eval(cfg, args.reps, methods, args.half_band, solver, args.threads)
    summary = summarize(rows, methods)
    out = _out(args)
    names = list(dict.fromkeys(methods))
    err_path = out / "errors.csv"
    with err_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replicate", "seed"] + [f"err_{m}" for m in names])
        for row in rows:
            w.writerow([row["replicate"], row["seed"]] + [f"{row[m]:.17g}" for m in names])
    files = [err_path, io.write_json(out / "summary.json", summary)]
    config = {**json.loads(cfg.to_json()), "reps": args.reps, "methods": names,
              "half_band": args.half_band, "solver": json.loads(solver.to_json())}
    io.write_manifest(out, "eval", config, [], files, cfg.seed, summary, started)
    for m in names:
        s = summary[m]
        print(f"Err({m})/Err(ours): median {s['median']:.3f} ({s['q1']:.3f}, {s['q3']:.3f})")
    return EXIT_OK


def _add_covariance_args(p):
    p.add_argument("--input", required=True, help="n x K samples CSV (or K x K with --covariance)")
    p.add_argument("--covariance", action="store_true", help="input is already a covariance matrix")
    p.add_argument("--half-band", type=int, default=None, help="band half-width (default ceil(K/4))")
    p.add_argument("--max-rank", type=int, default=None)
    p.add_argument("--center", action=argparse.BooleanOptionalAction, default=True)
    _add_solver_args(p)
    p.add_argument("--out", required=True)


def _add_solver_args(p):
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--solver-config", default=None, help="SolverConfig JSON file")


def _add_scenario_args(p):
    p.add_argument("--scenario", default="A", type=str.upper, choices=sorted(SCENARIOS))
    p.add_argument("--combo", type=int, default=3, choices=range(1, 7))
    p.add_argument("--regime", type=int, default=1, choices=(1, 2))
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--r", type=int, default=None, help="override the combination's rank")
    p.add_argument("--delta", type=float, default=None, help="override the combination's band scale")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scalesep", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="split a covariance into low-rank and banded parts")
    _add_covariance_args(p)
    p.add_argument("--rank-rule", default="c=1e-4", help="c=VAL | tau=VAL | fixed=R")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("scree", help="normalised masked fits for ranks 1..max-rank")
    _add_covariance_args(p)
    p.set_defaults(func=cmd_scree)

    p = sub.add_parser("predict", help="separate curves into smooth and rough parts")
    p.add_argument("--input", required=True)
    p.add_argument("--decomposition", required=True, help="output directory of `decompose`")
    p.add_argument("--truth", default=None, help="output directory of `simulate` (adds relMISE)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", help="generate a scenario dataset with its truth bundle")
    _add_scenario_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eval", help="replicated Err comparison against KL truncation")
    _add_scenario_args(p)
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--methods", default="ours,kl")
    p.add_argument("--half-band", type=int, default=10)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--solver-config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScaleSepError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
