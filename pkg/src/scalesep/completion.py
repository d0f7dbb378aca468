"""Band-masked low-rank matrix completion.

For each candidate rank i the off-band part of a covariance matrix R is fitted
by C C^T with C of shape (K, i), minimising

    f(C) = || P o (R - C C^T) ||_F^2

where P is the band mask. The minima over a range of ranks form the scree
sequence, from which a rank is picked by a threshold or a penalty rule.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import asdict, dataclass, field

import numpy as np

from .covmodel import BandMask, DimensionError, ScaleSepError, as_symcov, symmetrize

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 1e-4


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 5000
    restarts: int = 0
    seed: int = 0
    shrink: float = 0.5
    slope: float = 1e-4
    grad_tol: float = 1e-8
    memory: int = 10
    jitter: float = 0.5

    def to_json(self) -> str:
        d = asdict(self)
        d["lineSearch"] = {"shrink": d.pop("shrink"), "slope": d.pop("slope")}
        d["maxIter"] = d.pop("max_iter")
        d["gradTol"] = d.pop("grad_tol")
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> SolverConfig:
        d = json.loads(text)
        ls = d.pop("lineSearch", {})
        kw = {
            "tol": d.get("tol", cls.tol),
            "max_iter": d.get("maxIter", cls.max_iter),
            "restarts": d.get("restarts", cls.restarts),
            "seed": d.get("seed", cls.seed),
            "shrink": ls.get("shrink", cls.shrink),
            "slope": ls.get("slope", cls.slope),
            "grad_tol": d.get("gradTol", cls.grad_tol),
            "memory": d.get("memory", cls.memory),
            "jitter": d.get("jitter", cls.jitter),
        }
        return cls(**kw)


@dataclass
class RankFit:
    rank: int
    fit: float
    C: np.ndarray = field(repr=False)
    iterations: int
    converged: bool
    trace: list = field(default_factory=list, repr=False)


@dataclass
class ScreeResult:
    fits: list
    normalizer: float

    @property
    def ranks(self) -> np.ndarray:
        return np.array([f.rank for f in self.fits])

    @property
    def values(self) -> np.ndarray:
        return np.array([f.fit for f in self.fits])

    @property
    def normalized(self) -> np.ndarray:
        if self.normalizer == 0:
            return np.zeros(len(self.fits))
        return self.values / self.normalizer

    def at(self, rank: int) -> RankFit:
        for f in self.fits:
            if f.rank == rank:
                return f
        raise KeyError(rank)


@dataclass(frozen=True)
class RankRule:
    kind: str  # "threshold" | "penalty" | "fixed"
    value: float

    @classmethod
    def threshold(cls, c: float = DEFAULT_THRESHOLD) -> RankRule:
        return cls("threshold", float(c))

    @classmethod
    def penalty(cls, tau: float) -> RankRule:
        return cls("penalty", float(tau))

    @classmethod
    def fixed(cls, r: int) -> RankRule:
        return cls("fixed", int(r))

    @classmethod
    def parse(cls, text: str) -> RankRule:
        m = re.fullmatch(r"\s*(c|tau|fixed)\s*=\s*(\S+)\s*", text)
        if not m:
            raise ScaleSepError(f"rank rule must be c=VAL, tau=VAL or fixed=R, got {text!r}")
        key, val = m.groups()
        if key == "fixed":
            try:
                r = int(val)
            except ValueError:
                raise ScaleSepError(f"fixed rank must be an integer, got {val!r}") from None
            if r < 1:
                raise ScaleSepError("fixed rank must be positive")
            return cls.fixed(r)
        try:
            v = float(val)
        except ValueError:
            raise ScaleSepError(f"{key} must be a number, got {val!r}") from None
        if v <= 0:
            raise ScaleSepError(f"{key} must be positive")
        return cls.threshold(v) if key == "c" else cls.penalty(v)

    def __str__(self) -> str:
        key = {"threshold": "c", "penalty": "tau", "fixed": "fixed"}[self.kind]
        val = int(self.value) if self.kind == "fixed" else self.value
        return f"{key}={val}"


@dataclass(frozen=True)
class RankSelection:
    selected_rank: int
    rule: RankRule
    leveled: bool = True


def _check(R, C, mask):
    R = np.asarray(R, dtype=float)
    C = np.asarray(C, dtype=float)
    if C.ndim == 1:
        C = C[:, None]
    P = mask.matrix if isinstance(mask, BandMask) else np.asarray(mask, dtype=float)
    K = R.shape[0]
    if R.shape != (K, K) or P.shape != (K, K) or C.shape[0] != K:
        raise DimensionError(f"shape mismatch: R {R.shape}, C {C.shape}, mask {P.shape}")
    return R, C, P


def masked_objective(R, C, mask) -> float:
    R, C, P = _check(R, C, mask)
    E = P * (R - C @ C.T)
    return float(np.sum(E * E))


def masked_gradient(R, C, mask) -> np.ndarray:
    """Gradient 4 (P o (C C^T - R)) C; relies on P and R being symmetric."""
    R, C, P = _check(R, C, mask)
    return 4.0 * (P * (C @ C.T - R)) @ C


def spectral_init(R: np.ndarray, i: int, floor: float = 1e-6) -> np.ndarray:
    """U_i Sigma_i^{1/2} from the top-i eigenpairs of R.

    Eigenvalues below ``floor * lambda_1`` are raised to that level rather than
    clamped to zero: a zero column has zero gradient and would never move.
    """
    w, U = np.linalg.eigh(symmetrize(R))
    order = np.argsort(w)[::-1][:i]
    low = floor * max(w[order[0]], 0.0)
    return U[:, order] * np.sqrt(np.maximum(w[order], low))


def random_init(R: np.ndarray, i: int, rng: np.random.Generator) -> np.ndarray:
    K = R.shape[0]
    scale = np.sqrt(max(np.mean(np.abs(np.diag(R))), 1e-300) / i)
    return scale * rng.standard_normal((K, i))


def jittered_init(R: np.ndarray, i: int, rng: np.random.Generator, jitter: float) -> np.ndarray:
    """Spectral start plus Gaussian noise of relative Frobenius size ``jitter``."""
    C0 = spectral_init(R, i)
    scale = jitter * np.linalg.norm(C0) / np.sqrt(C0.size)
    if scale == 0:
        return random_init(R, i, rng)
    return C0 + scale * rng.standard_normal(C0.shape)


def _descend(R, P, C0, cfg: SolverConfig, normalizer: float):
    """Limited-memory quasi-Newton descent with Armijo backtracking.

    Every accepted step satisfies the sufficient-decrease condition, so the
    objective trace is non-increasing.
    """
    C = C0.copy()
    shape = C.shape

    def fg(C):
        E = P * (C @ C.T - R)
        return float(np.sum(E * E)), (4.0 * E @ C)

    f, G = fg(C)
    trace = [f]
    grad_stop = cfg.grad_tol * (1.0 + np.sqrt(normalizer))
    floor = 1e-28 * normalizer
    s_hist, y_hist = [], []
    converged = False
    it = 0
    while it < cfg.max_iter:
        if f <= floor or np.max(np.abs(G)) < grad_stop:
            converged = True
            break
        if len(trace) > 5:
            old = trace[-6]
            if old > 0 and (old - f) / old < cfg.tol:
                converged = True
                break
        g = G.ravel()
        d = _two_loop(g, s_hist, y_hist)
        slope = float(g @ d)
        if slope >= 0:
            s_hist.clear()
            y_hist.clear()
            d = -g
            slope = -float(g @ g)
        t = 1.0
        if not s_hist:
            # no curvature information yet: cap the trial step length
            t = 0.1 * np.sqrt(max(f, 1e-300)) / max(np.linalg.norm(g), 1e-300)
        accepted = False
        for _ in range(60):
            Cn = C + t * d.reshape(shape)
            fn, Gn = fg(Cn)
            if fn <= f + cfg.slope * t * slope:
                accepted = True
                break
            t *= cfg.shrink
        it += 1
        if not accepted:
            if s_hist:
                s_hist.clear()
                y_hist.clear()
                continue
            # steepest descent cannot make progress at working precision
            converged = True
            break
        s = (Cn - C).ravel()
        y = (Gn - G).ravel()
        if float(s @ y) > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)
            if len(s_hist) > cfg.memory:
                s_hist.pop(0)
                y_hist.pop(0)
        C, f, G = Cn, fn, Gn
        trace.append(f)
    return C, f, it, converged, trace


def _two_loop(g, s_hist, y_hist):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / float(y @ s)
        a = rho * float(s @ q)
        alphas.append((a, rho, s, y))
        q -= a * y
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        q *= float(s @ y) / float(y @ y)
    for a, rho, s, y in reversed(alphas):
        b = rho * float(y @ q)
        q += (a - b) * s
    return -q


def complete_at_rank(R, i: int, mask: BandMask, cfg: SolverConfig | None = None,
                     warm_start=None, init: str = "spectral") -> RankFit:
    """Approximate minimiser of the masked fit at rank i.

    Starts from the spectral initialiser (``init="spectral"``), a seeded
    jittered copy of it (``"jitter"``) or a seeded Gaussian point
    (``"random"``); also from ``warm_start`` zero-padded to i columns if
    given, and from ``cfg.restarts`` jittered spectral starts. The best
    local minimum is kept.
    """
    cfg = cfg or SolverConfig()
    R = as_symcov(R)
    K = R.shape[0]
    if not 1 <= i <= K:
        raise ScaleSepError(f"rank {i} outside [1, {K}]")
    if mask.K != K:
        raise DimensionError(f"mask is {mask.K}x{mask.K}, R is {K}x{K}")
    P = mask.matrix
    normalizer = float(np.sum((P * R) ** 2))

    starts = []
    if init == "spectral":
        starts.append(spectral_init(R, i))
    elif init == "jitter":
        starts.append(jittered_init(R, i, np.random.default_rng([cfg.seed, i, 0]), cfg.jitter))
    elif init == "random":
        starts.append(random_init(R, i, np.random.default_rng([cfg.seed, i, 0])))
    else:
        raise ScaleSepError(f"unknown init {init!r}")
    if warm_start is not None:
        W = np.asarray(warm_start, dtype=float)
        if W.ndim == 1:
            W = W[:, None]
        if W.shape[0] != K or W.shape[1] > i:
            raise DimensionError(f"warm start of shape {W.shape} does not fit rank {i}")
        starts.append(np.hstack([W, np.zeros((K, i - W.shape[1]))]))
    for k in range(cfg.restarts):
        starts.append(jittered_init(R, i, np.random.default_rng([cfg.seed, i, k + 1]), cfg.jitter))

    best = None
    for C0 in starts:
        C, f, its, conv, trace = _descend(R, P, C0, cfg, normalizer)
        if best is None or f < best.fit:
            best = RankFit(i, f, C, its, conv, trace)
    if not best.converged:
        log.warning("rank %d: no convergence after %d iterations (fit %.3g)", i, best.iterations, best.fit)
    return best


def default_max_rank(K: int) -> int:
    return max(1, min(-(-K // 4) - 1, 10))


def scree(R, mask: BandMask, max_rank: int | None = None, cfg: SolverConfig | None = None) -> ScreeResult:
    """Fits f(1..max_rank), each rank warm-started from the previous one."""
    R = as_symcov(R)
    K = R.shape[0]
    if max_rank is None:
        max_rank = default_max_rank(K)
    if not 1 <= max_rank <= K - 1:
        raise ScaleSepError(f"max rank {max_rank} outside [1, {K - 1}]")
    normalizer = float(np.sum((mask.matrix * R) ** 2))
    fits = []
    prev = None
    for i in range(1, max_rank + 1):
        fit = complete_at_rank(R, i, mask, cfg, warm_start=None if prev is None else prev.C)
        fits.append(fit)
        prev = fit
    return ScreeResult(fits, normalizer)


def select_rank(result: ScreeResult, rule: RankRule) -> RankSelection:
    """Pick a rank from normalised fits f(i) / ||P o R||_F^2."""
    if not result.fits:
        raise ScaleSepError("empty scree")
    ranks = result.ranks
    fits = result.normalized
    if rule.kind == "fixed":
        return RankSelection(int(rule.value), rule)
    if rule.kind == "threshold":
        below = np.flatnonzero(fits < rule.value)
        if below.size == 0:
            log.warning("scree never drops below c=%g; using max rank %d", rule.value, ranks[-1])
            return RankSelection(int(ranks[-1]), rule, leveled=False)
        return RankSelection(int(ranks[below[0]]), rule)
    if rule.kind == "penalty":
        # argmin picks the first (smallest) rank on ties
        return RankSelection(int(ranks[np.argmin(fits + rule.value * ranks)]), rule)
    raise ScaleSepError(f"unknown rule {rule.kind!r}")
