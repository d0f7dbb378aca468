"""Replicated simulation comparisons: our estimator against KL truncation."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from .completion import RankRule, SolverConfig
from .pipeline import decompose
from .simgen import ScenarioConfig, err, generate, kl_truncate

METHODS = ("ours", "kl")


def thread_cap(default: int | None = None) -> int:
    env = os.environ.get("SCALESEP_THREADS")
    if env:
        return max(1, int(env))
    return default or os.cpu_count() or 1


def estimate_L(method: str, Rn: np.ndarray, rank: int, half_band: int,
               cfg: SolverConfig | None = None, variance_target: float = 0.95) -> np.ndarray:
    if method == "ours":
        return decompose(Rn, half_band, RankRule.fixed(rank), cfg=cfg).Lhat
    if method == "kl":
        return kl_truncate(Rn, variance_target)
    raise ValueError(f"unknown method {method!r}")


def run_replicate(cfg: ScenarioConfig, methods=METHODS, half_band: int = 10,
                  solver: SolverConfig | None = None) -> dict:
    """Err of each method's estimate of the sample smooth covariance L_n."""
    truth = generate(cfg)
    Rn = truth.Rsample
    out = {"seed": cfg.seed}
    cache = {}
    for m in methods:
        if m not in cache:
            cache[m] = err(estimate_L(m, Rn, cfg.r, half_band, solver), truth.Lsample)
        out[m] = cache[m]
    return out


def _run(args):
    return run_replicate(*args)


def run_eval(base: ScenarioConfig, reps: int, methods=METHODS, half_band: int = 10,
             solver: SolverConfig | None = None, threads: int | None = None) -> list[dict]:
    """Replicate r uses seed ``base.seed + r``; results come back in replicate order."""
    if reps < 1:
        raise ValueError("need at least one replicate")
    jobs = [(replace(base, seed=base.seed + k), tuple(methods), half_band, solver) for k in range(reps)]
    workers = min(thread_cap(threads), reps)
    if workers == 1:
        rows = [_run(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run, jobs))
    for k, row in enumerate(rows):
        row["replicate"] = k
    return rows


def summarize(rows: list[dict], methods=METHODS, reference: str = "ours") -> dict:
    """Median and quartiles of Err(method) / Err(reference) for every method."""
    summary = {}
    for m in methods:
        ratios = np.array([row[m] / row[reference] for row in rows])
        q1, med, q3 = np.quantile(ratios, [0.25, 0.5, 0.75])
        summary[m] = {"median": float(med), "q1": float(q1), "q3": float(q3), "n": len(rows)}
    return summary
