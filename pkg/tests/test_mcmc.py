from __future__ import annotations

import warnings

import numpy as np
import pytest
from scipy import stats

from setid.economies import simulate_consumption
from setid.errors import AllProposalsRejected, EmptySetAtCutoff, NonFiniteCriterion
from setid.mcmc import (
    MCMCConfig,
    cutoff_schedule,
    default_blocks,
    eval_criterion,
    extract_set,
    quantile_table,
    run_mcmc,
    sharp_endpoint,
)
from setid.moments import MomentSystem, consumption_moment_factory


def quiet_run(*args, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run_mcmc(*args, **kw)


def test_criterion_worked_example():
    ms = MomentSystem(np.full((100, 1), -0.3), [1])
    assert eval_criterion(ms).value == pytest.approx(9.0, rel=1e-12)


def test_criterion_zero_when_restrictions_hold():
    ms = MomentSystem(np.column_stack([np.full(50, 0.2), np.full(50, -0.1), np.zeros(50)]), [1, -1, 0])
    assert eval_criterion(ms).value == 0.0


def test_criterion_uses_weight_matrix():
    ms = MomentSystem(np.full((10, 2), -1.0), [1, 1], W=[[2.0, 0.5], [0.5, 1.0]])
    assert eval_criterion(ms).value == pytest.approx(10 * 4.0)


def test_flat_criterion_recovers_uniform_prior():
    bounds = np.array([[-1.0, 3.0], [0.0, 1.0]])
    d = quiet_run(None, bounds, MCMCConfig(chains=2, steps=20_000, burn_in=1000, seed=1),
                  criterion=lambda th: 0.0)
    thin = d.draws[::20]
    for j in range(2):
        u = (thin[:, j] - bounds[j, 0]) / (bounds[j, 1] - bounds[j, 0])
        assert stats.kstest(u, "uniform").pvalue > 0.01


def test_quadratic_criterion_matches_gaussian_target():
    sigma = 0.5
    d = quiet_run(None, [[-5.0, 5.0]], MCMCConfig(chains=1, steps=200_000, burn_in=2000, seed=2),
                  criterion=lambda th: 0.5 * float(th[0] ** 2) / sigma ** 2)
    x = d.draws[:, 0]
    assert np.var(x) == pytest.approx(sigma ** 2, rel=0.05)
    assert np.mean(np.abs(x) <= sigma) == pytest.approx(stats.norm.cdf(1) - stats.norm.cdf(-1), rel=0.05)


def test_segment_identified_set_is_covered():
    n = 1000

    def crit(th):
        t, s = th
        return n * (max(0.2 - t, 0.0) ** 2 + max(t - 0.8, 0.0) ** 2 + (s - 0.5) ** 2)

    d = quiet_run(None, [[0.0, 1.0], [0.0, 1.0]], MCMCConfig(chains=2, steps=10_000, burn_in=1000, seed=3),
                  criterion=crit, n=n)
    est = extract_set(d)
    kept = d.draws[est.mask, 0]
    grid = np.linspace(0.2, 0.8, 200)
    near = np.min(np.abs(grid[:, None] - kept[None, :]), axis=1) <= 0.01
    assert near.mean() >= 0.99


def test_seed_determinism_and_worker_independence():
    crit = lambda th: 10.0 * float(np.sum(th ** 2))  # noqa: E731
    cfg = dict(chains=3, steps=500, burn_in=100, seed=7)
    a = quiet_run(None, [[-1, 1], [-1, 1]], MCMCConfig(**cfg), criterion=crit)
    b = quiet_run(None, [[-1, 1], [-1, 1]], MCMCConfig(**cfg, workers=3), criterion=crit)
    np.testing.assert_array_equal(a.draws, b.draws)
    c = quiet_run(None, [[-1, 1], [-1, 1]], MCMCConfig(**{**cfg, "seed": 8}), criterion=crit)
    assert not np.array_equal(a.draws, c.draws)


def test_level_sets_are_nested():
    d = quiet_run(None, [[-3.0, 3.0]], MCMCConfig(chains=2, steps=3000, burn_in=500, seed=4),
                  criterion=lambda th: float(th[0] ** 2), n=400)
    est = extract_set(d)
    counts = [e["count"] for e in est.sweep]
    assert counts == sorted(counts)
    cuts = sorted(cutoff_schedule(400).values())
    masks = [np.isfinite(d.crit) & (d.crit - d.crit.min() <= c) for c in cuts]
    for small, big in zip(masks, masks[1:]):
        assert np.all(big[small])


def test_consumption_set_matches_analytic_interval():
    s = simulate_consumption(5000, seed=11)
    fac = consumption_moment_factory(s.c, s.regime, include_survey=True)
    d = quiet_run(fac, [[0.0, 1.4]], MCMCConfig(chains=2, steps=4000, burn_in=1000, seed=5))
    sharp = d.draws[(d.crit <= 1e-12), 0]
    hausdorff = max(abs(sharp.min() - 0.0), abs(sharp.max() - s.survey_bound))
    assert hausdorff < 0.02
    est, se = sharp_endpoint(d)
    assert est <= s.survey_bound + 1e-12


def test_empty_set_reports_suggested_cutoff():
    d = quiet_run(None, [[-1.0, 1.0]], MCMCConfig(chains=1, steps=300, burn_in=50, seed=0),
                  criterion=lambda th: 5.0 + float(th[0] ** 2))
    with pytest.raises(EmptySetAtCutoff) as exc:
        extract_set(d, nu=1.0, mode="absolute")
    assert exc.value.suggested_cutoff >= 5.0


def test_nonfinite_start_rejected():
    with pytest.raises(NonFiniteCriterion):
        run_mcmc(None, [[-1.0, 1.0]], MCMCConfig(chains=1, steps=10, burn_in=0), criterion=lambda th: np.inf)


def test_all_proposals_rejected():
    def crit(th):
        return 0.0 if th[0] == 0.0 else np.inf

    with pytest.raises(AllProposalsRejected):
        quiet_run(None, [[-1.0, 1.0]], MCMCConfig(chains=1, steps=50, burn_in=10), criterion=crit)


def test_config_validation():
    with pytest.raises(ValueError):
        MCMCConfig(chains=0)
    with pytest.raises(ValueError):
        MCMCConfig(steps=10, retained=20)
    with pytest.raises(ValueError):
        run_mcmc(None, [[0, 1], [0, 1]], MCMCConfig(blocks=[[0]]), criterion=lambda th: 0.0)


def test_default_blocks_follow_friction_partition():
    assert default_blocks(3, [False, True, False]) == ((0, 2), (1,))
    assert default_blocks(2) == ((0, 1),)


def test_quantile_table_rows():
    d = quiet_run(None, [[0.0, 1.0]], MCMCConfig(chains=1, steps=500, burn_in=50, seed=0),
                  criterion=lambda th: 0.0, names=["mu"])
    rows = quantile_table(extract_set(d), units=["ratio"])
    assert rows[0]["parameter"] == "mu" and rows[0]["unit"] == "ratio"
    assert rows[0]["q2.5"] < rows[0]["q97.5"]
