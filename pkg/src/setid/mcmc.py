"""One-sided GMM criterion, blocked random-walk sampler and level-set extraction.

The criterion is ``L_n(theta) = n v' W v`` where ``v`` stacks the signed
equality residuals and the one-sided violations of the sample moments.  The
sampler targets the quasi-posterior ``exp(-L_n(theta))`` under a uniform
prior on the parameter box.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    AcceptanceRateWarning,
    AllProposalsRejected,
    EmptySetAtCutoff,
    EstimationError,
    NonFiniteCriterion,
    SetIdError,
    SolveError,
)
from .moments import MomentSystem

log = logging.getLogger(__name__)

TOL_CRIT = 1e-10
TARGET_ACCEPT = 0.3
ACCEPT_WINDOW = (0.1, 0.6)


@dataclass(frozen=True)
class Criterion:
    value: float
    q_plus: NDArray
    W: NDArray


def eval_criterion(ms: MomentSystem) -> Criterion:
    """``n v' W v`` with ``v`` the violation vector of ``ms``."""
    v = ms.violation()
    W = ms.weight
    val = float(ms.n * v @ W @ v)
    return Criterion(value=max(val, 0.0), q_plus=v, W=W)


def criterion_from_factory(ms_factory: Callable[[NDArray], MomentSystem]) -> Callable[[NDArray], float]:
    """Wrap a moment factory into ``theta -> L_n``; solver failures map to ``+inf``."""

    def crit(theta: NDArray) -> float:
        try:
            return eval_criterion(ms_factory(theta)).value
        except SolveError:
            return float("inf")

    return crit


# ---------------------------------------------------------------------------
# sampler


@dataclass
class MCMCConfig:
    """Sampler settings.

    Parameters
    ----------
    chains : int
    steps : int
        Post-burn-in sweeps per chain.
    burn_in : int
        Adaptive sweeps discarded before sampling.
    retained : int, optional
        Keep only the last ``retained`` draws per chain.
    seed : int
    blocks : sequence of index sequences, optional
        Parameter blocks updated in turn (one block per sweep step).
    init : array_like, optional
        Starting point (box midpoint by default).
    init_scale : float
        Initial proposal scale as a fraction of each coordinate's range.
    workers : int
        Threads used to run chains concurrently.
    """

    chains: int = 2
    steps: int = 5_000
    burn_in: int = 1_000
    retained: int | None = None
    seed: int = 0
    blocks: Sequence[Sequence[int]] | None = None
    init: ArrayLike | None = None
    init_scale: float = 0.1
    workers: int = 1
    target_accept: float = TARGET_ACCEPT

    def __post_init__(self):
        if self.chains < 1 or self.steps < 1 or self.burn_in < 0:
            raise ValueError("chains and steps must be positive, burn_in nonnegative")
        if self.retained is not None and not 1 <= self.retained <= self.steps:
            raise ValueError("retained must lie in [1, steps]")


@dataclass(frozen=True)
class IdentifiedSetDraws:
    """Merged sampler output.

    Attributes
    ----------
    draws : ndarray, shape (M, n_theta)
    crit : ndarray, shape (M,)
    chain : ndarray, shape (M,)
        Chain index of each draw.
    acceptance : ndarray, shape (chains, n_blocks)
        Post-adaptation acceptance rates.
    n : int
        Sample size entering the criterion (sets the default cutoff).
    """

    draws: NDArray
    crit: NDArray
    chain: NDArray
    acceptance: NDArray
    n: int
    names: tuple[str, ...]
    blocks: tuple[tuple[int, ...], ...]
    scales: NDArray
    burn_in: int
    meta: dict = field(default_factory=dict)

    @property
    def acceptance_rate(self) -> float:
        return float(self.acceptance.mean())


def default_blocks(n_theta: int, friction: ArrayLike | None = None) -> tuple[tuple[int, ...], ...]:
    """Two blocks from the structural/friction partition, or one block."""
    if friction is not None:
        f = np.asarray(friction, dtype=bool)
        s = tuple(int(i) for i in np.flatnonzero(~f))
        r = tuple(int(i) for i in np.flatnonzero(f))
        out = tuple(b for b in (s, r) if b)
        if out:
            return out
    return (tuple(range(n_theta)),)


def _run_chain(crit, bounds, blocks, cfg: MCMCConfig, ss: np.random.SeedSequence, x0: NDArray):
    rng = np.random.default_rng(ss)
    lo, hi = bounds[:, 0], bounds[:, 1]
    width = hi - lo
    x = x0.copy()
    L = crit(x)
    if not np.isfinite(L):
        raise NonFiniteCriterion(f"criterion is not finite at the initial point {x0}")
    nb = len(blocks)
    chols = [np.diag(cfg.init_scale * width[list(b)]) for b in blocks]
    log_scale = np.array([np.log(2.38 / np.sqrt(len(b))) for b in blocks])
    burn = cfg.burn_in
    total = burn + cfg.steps
    out = np.empty((cfg.steps, x.size))
    out_L = np.empty(cfg.steps)
    acc = np.zeros(nb)
    hist = np.empty((burn, x.size)) if burn else None
    cov_set = burn // 2
    for it in range(total):
        for k, b in enumerate(blocks):
            idx = list(b)
            prop = x.copy()
            prop[idx] += np.exp(log_scale[k]) * chols[k] @ rng.standard_normal(len(idx))
            if np.any(prop[idx] < lo[idx]) or np.any(prop[idx] > hi[idx]):
                a = 0.0
            else:
                Lp = crit(prop)
                a = float(np.exp(min(0.0, L - Lp))) if np.isfinite(Lp) else 0.0
                if rng.random() < a:
                    x, L = prop, Lp
            if it < burn:
                # Robbins-Monro step towards the target acceptance
                log_scale[k] += (a - cfg.target_accept) / (it + 1) ** 0.6
            else:
                acc[k] += a
        if it < burn:
            hist[it] = x
            if it + 1 == cov_set and cov_set >= 10 * x.size:
                for k, b in enumerate(blocks):
                    idx = list(b)
                    C = np.atleast_2d(np.cov(hist[: it + 1, idx], rowvar=False))
                    C += 1e-10 * np.diag(width[idx] ** 2)
                    try:
                        chols[k] = np.linalg.cholesky(C)
                        log_scale[k] = np.log(2.38 / np.sqrt(len(idx)))
                    except np.linalg.LinAlgError:
                        pass
        else:
            out[it - burn] = x
            out_L[it - burn] = L
    rates = acc / cfg.steps
    scales = np.array([np.exp(log_scale[k]) * np.sqrt(np.mean(np.diag(chols[k] @ chols[k].T)))
                       for k in range(nb)])
    return out, out_L, rates, scales


def run_mcmc(
    ms_factory: Callable[[NDArray], MomentSystem] | None,
    bounds: ArrayLike,
    config: MCMCConfig | None = None,
    criterion: Callable[[NDArray], float] | None = None,
    names: Sequence[str] | None = None,
    friction: ArrayLike | None = None,
    n: int | None = None,
) -> IdentifiedSetDraws:
    """Sample the quasi-posterior ``exp(-L_n)`` over a box.

    Parameters
    ----------
    ms_factory : callable or None
        ``theta -> MomentSystem``; ignored when ``criterion`` is given.
    bounds : array_like, shape (n_theta, 2)
        Box of the uniform prior.
    config : MCMCConfig
    criterion : callable, optional
        Direct ``theta -> L_n`` evaluator.
    names : sequence of str, optional
    friction : array_like of bool, optional
        Partition used for the default two-block split.
    n : int, optional
        Sample size for the cutoff rule; taken from the moment system at the
        initial point when omitted.

    Raises
    ------
    NonFiniteCriterion
        When the criterion is not finite at the starting point.
    AllProposalsRejected
        When a chain accepts nothing after adaptation.
    """
    cfg = config or MCMCConfig()
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(bounds)) or np.any(bounds[:, 0] >= bounds[:, 1]):
        raise EstimationError("bounds must be finite with lower < upper")
    d = bounds.shape[0]
    if criterion is None:
        if ms_factory is None:
            raise ValueError("either ms_factory or criterion is required")
        criterion = criterion_from_factory(ms_factory)
    x0 = bounds.mean(axis=1) if cfg.init is None else np.asarray(cfg.init, dtype=float).reshape(-1)
    if n is None:
        n = ms_factory(x0).n if ms_factory is not None else 1
    blocks = tuple(tuple(int(i) for i in b) for b in cfg.blocks) if cfg.blocks else default_blocks(d, friction)
    if sorted(i for b in blocks for i in b) != list(range(d)):
        raise ValueError("blocks must partition the parameter indices")
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.chains)

    def job(c):
        return _run_chain(criterion, bounds, blocks, cfg, seeds[c], x0)

    if cfg.workers > 1 and cfg.chains > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(job, range(cfg.chains)))
    else:
        results = [job(c) for c in range(cfg.chains)]

    keep = cfg.retained or cfg.steps
    draws, crit, chain, rates, scales = [], [], [], [], []
    for c, (out, out_L, r, s) in enumerate(results):
        draws.append(out[-keep:])
        crit.append(out_L[-keep:])
        chain.append(np.full(keep, c))
        rates.append(r)
        scales.append(s)
    rates = np.array(rates)
    if np.any(rates.max(axis=1) == 0.0):
        raise AllProposalsRejected("a chain rejected every proposal after adaptation")
    lo_ok, hi_ok = ACCEPT_WINDOW
    if rates.mean() < lo_ok or rates.mean() > hi_ok:
        warnings.warn(f"acceptance rate {rates.mean():.3f} outside [{lo_ok}, {hi_ok}]",
                      AcceptanceRateWarning, stacklevel=2)
    log.info("mcmc: %d chains, acceptance %.3f", cfg.chains, rates.mean())
    return IdentifiedSetDraws(
        draws=np.vstack(draws), crit=np.concatenate(crit), chain=np.concatenate(chain),
        acceptance=rates, n=int(n), names=tuple(names) if names else tuple(f"theta{i + 1}" for i in range(d)),
        blocks=blocks, scales=np.array(scales), burn_in=cfg.burn_in,
        meta={"seed": cfg.seed, "chains": cfg.chains, "steps": cfg.steps},
    )


# ---------------------------------------------------------------------------
# level sets


@dataclass(frozen=True)
class SetEstimate:
    """Level-set estimate of the identified set.

    Attributes
    ----------
    mask : ndarray of bool
        Draws with ``L - min L <= nu`` (or ``L <= nu`` in absolute mode).
    nu : float
    quantiles : ndarray, shape (n_theta, 2)
        2.5% and 97.5% quantiles of the retained draws.
    lower, upper : ndarray
        Coordinate-wise extremes of the retained draws.
    sharp_mask : ndarray of bool
        Draws whose criterion is numerically zero.
    sweep : list of dict
        Retained counts and extremes over the cutoff schedule.
    """

    mask: NDArray
    nu: float
    quantiles: NDArray
    lower: NDArray
    upper: NDArray
    sharp_mask: NDArray
    sweep: list
    names: tuple[str, ...]


def cutoff_schedule(n: int) -> dict[str, float]:
    """Cutoffs between 1 and n: ``log n``, ``2 log n`` and ``sqrt n``."""
    return {"log_n": float(np.log(n)), "2log_n": float(2.0 * np.log(n)), "sqrt_n": float(np.sqrt(n))}


def extract_set(
    draws: IdentifiedSetDraws,
    nu: float | None = None,
    nu_schedule: dict[str, float] | None = None,
    mode: str = "relative",
    tol_crit: float = TOL_CRIT,
    probs: tuple[float, float] = (0.025, 0.975),
) -> SetEstimate:
    """Cutoff set estimate, confidence quantiles and cutoff sensitivity.

    Parameters
    ----------
    nu : float, optional
        Cutoff (``2 log n`` by default).
    nu_schedule : dict, optional
        Named cutoffs for the sensitivity sweep.
    mode : {"relative", "absolute"}
        ``relative`` keeps ``L - min L <= nu`` (log quasi-posterior gap);
        ``absolute`` keeps ``L <= nu``.

    Raises
    ------
    EmptySetAtCutoff
        When no draw survives; carries the smallest cutoff that would keep one.
    """
    if draws.draws.shape[0] == 0:
        raise EstimationError("no draws")
    L = draws.crit
    finite = np.isfinite(L)
    if not finite.any():
        raise EmptySetAtCutoff("every draw has an infinite criterion", suggested_cutoff=None)
    nu = cutoff_schedule(draws.n)["2log_n"] if nu is None else float(nu)
    base = float(L[finite].min()) if mode == "relative" else 0.0
    gap = L - base

    def members(cut):
        return finite & (gap <= cut)

    mask = members(nu)
    if not mask.any():
        raise EmptySetAtCutoff(f"no draw has criterion below {nu}", suggested_cutoff=float(gap[finite].min()))
    kept = draws.draws[mask]
    q = np.quantile(kept, probs, axis=0).T
    sweep = []
    schedule = nu_schedule if nu_schedule is not None else cutoff_schedule(draws.n)
    prev = None
    for name, cut in sorted(schedule.items(), key=lambda kv: kv[1]):
        m = members(cut)
        if prev is not None:
            assert np.all(m[prev]), "level sets must be nested"
        prev = m
        entry = {"name": name, "nu": float(cut), "count": int(m.sum())}
        if m.any():
            entry["lower"] = draws.draws[m].min(axis=0).tolist()
            entry["upper"] = draws.draws[m].max(axis=0).tolist()
        sweep.append(entry)
    return SetEstimate(mask=mask, nu=nu, quantiles=q, lower=kept.min(axis=0), upper=kept.max(axis=0),
                       sharp_mask=finite & (L <= tol_crit), sweep=sweep, names=draws.names)


def sharp_endpoint(draws: IdentifiedSetDraws, coord: int = 0, upper: bool = True,
                   tol_crit: float = TOL_CRIT, n_batches: int = 20) -> tuple[float, float]:
    """Extreme retained draw with zero criterion and its batch-means MC error.

    The draws are split into ``n_batches`` consecutive batches per chain
    order; the standard error is the spread of the batch extremes over
    ``sqrt(n_batches)``.
    """
    zero = np.isfinite(draws.crit) & (draws.crit <= tol_crit)
    x = draws.draws[:, coord]
    if not zero.any():
        raise EmptySetAtCutoff("no draw has a zero criterion",
                               suggested_cutoff=float(np.nanmin(draws.crit)))
    pick = np.max if upper else np.min
    est = float(pick(x[zero]))
    ext = []
    for idx in np.array_split(np.arange(x.size), n_batches):
        z = zero[idx]
        if z.any():
            ext.append(pick(x[idx][z]))
    se = float(np.std(ext, ddof=1) / np.sqrt(len(ext))) if len(ext) > 1 else float("inf")
    return est, se


def quantile_table(est: SetEstimate, units: Sequence[str] | None = None) -> list[dict]:
    """Rows ``parameter, unit, q2.5, q97.5`` for the confidence-set table."""
    units = list(units) if units is not None else [""] * len(est.names)
    return [{"parameter": nm, "unit": u, "q2.5": float(lo), "q97.5": float(hi)}
            for nm, u, (lo, hi) in zip(est.names, units, est.quantiles)]


__all__ = ["Criterion", "eval_criterion", "criterion_from_factory", "MCMCConfig", "IdentifiedSetDraws",
           "run_mcmc", "SetEstimate", "extract_set", "cutoff_schedule", "sharp_endpoint",
           "quantile_table", "default_blocks", "SetIdError"]
