"""scikit-learn style wrappers around set estimation and wedge extraction."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .mcmc import MCMCConfig, cutoff_schedule, extract_set, quantile_table, run_mcmc
from .moments import InstrumentSet, model_moment_factory
from .qp import wedges_from_set


class IdentifiedSetEstimator(BaseEstimator):
    """Quasi-Bayesian set estimate of the frictionless parameters.

    Parameters
    ----------
    spec : ModelSpec, optional
        Model whose forecast-error moments define the criterion.
    moment_factory : callable, optional
        ``X -> (theta -> MomentSystem)``; used when ``spec`` is None.
    bounds : array_like, shape (n_theta, 2), optional
        Prior box; taken from ``spec`` when omitted.
    lag_depth, include_constant
        Instrument settings for the model path.
    chains, steps, burn_in, seed, workers
        Sampler settings.
    cutoff : float or {"log_n", "2log_n", "sqrt_n"}
        Level-set cutoff on the criterion gap.

    Attributes
    ----------
    draws_ : IdentifiedSetDraws
    set_estimate_ : SetEstimate
    lower_, upper_ : ndarray
        Coordinate-wise extremes of the set estimate.
    quantiles_ : list of dict
    """

    def __init__(self, spec=None, moment_factory=None, bounds=None, lag_depth=1, include_constant=True,
                 chains=2, steps=2000, burn_in=500, seed=0, workers=1, cutoff="2log_n"):
        self.spec = spec
        self.moment_factory = moment_factory
        self.bounds = bounds
        self.lag_depth = lag_depth
        self.include_constant = include_constant
        self.chains = chains
        self.steps = steps
        self.burn_in = burn_in
        self.seed = seed
        self.workers = workers
        self.cutoff = cutoff

    def _factory(self, X, survey=None):
        if self.spec is not None:
            inst = InstrumentSet(lag_depth=self.lag_depth, include_constant=self.include_constant)
            return model_moment_factory(self.spec, X, inst, survey)
        if self.moment_factory is None:
            raise ValueError("either spec or moment_factory is required")
        return self.moment_factory(X)

    def fit(self, X, y=None, survey=None):
        """Sample the quasi-posterior on ``X`` and extract the level set.

        ``survey`` is an optional :class:`~setid.moments.SurveySeries`.
        """
        if self.spec is None:
            X = np.asarray(X, dtype=float)
        fac = self._factory(X, survey)
        if self.bounds is not None:
            bounds = np.asarray(self.bounds, dtype=float)
        elif self.spec is not None:
            bounds = self.spec.params.bounds
        else:
            raise ValueError("bounds are required without a spec")
        names = self.spec.params.names if self.spec is not None else None
        friction = self.spec.params.friction if self.spec is not None else None
        init = self.spec.params.values if self.spec is not None else None
        cfg = MCMCConfig(chains=self.chains, steps=self.steps, burn_in=self.burn_in, seed=self.seed,
                         workers=self.workers, init=init)
        self.draws_ = run_mcmc(fac, bounds, cfg, names=names, friction=friction)
        sched = cutoff_schedule(self.draws_.n)
        nu = sched[self.cutoff] if isinstance(self.cutoff, str) else float(self.cutoff)
        self.set_estimate_ = extract_set(self.draws_, nu=nu, nu_schedule=sched)
        self.lower_ = self.set_estimate_.lower
        self.upper_ = self.set_estimate_.upper
        self.quantiles_ = quantile_table(self.set_estimate_)
        self.moment_factory_ = fac
        return self

    def contains(self, theta) -> np.ndarray:
        """Box-hull membership of each row of ``theta``."""
        check_is_fitted(self, "set_estimate_")
        th = np.atleast_2d(np.asarray(theta, dtype=float))
        return np.all((th >= self.lower_) & (th <= self.upper_), axis=1)


class WedgeExtractor(TransformerMixin, BaseEstimator):
    """Wedge envelopes over a set estimate.

    ``transform`` returns the per-period band ``[lower_1..lower_k,
    upper_1..upper_k]`` of the wedge paths ``(1 - M_t) e_t`` across the
    retained draws.

    Parameters
    ----------
    estimator : IdentifiedSetEstimator
        Fitted in :meth:`fit` unless it already is.
    max_draws : int
    """

    def __init__(self, estimator=None, max_draws=100, workers=1):
        self.estimator = estimator
        self.max_draws = max_draws
        self.workers = workers

    def fit(self, X, y=None, survey=None):
        est = self.estimator if self.estimator is not None else IdentifiedSetEstimator()
        if not hasattr(est, "set_estimate_"):
            est.fit(X, survey=survey)
        self.estimator_ = est
        fac = est.moment_factory_
        self.envelope_ = wedges_from_set(est.draws_, est.set_estimate_.mask, fac,
                                         max_draws=self.max_draws, workers=self.workers)
        return self

    def transform(self, X=None):
        check_is_fitted(self, "envelope_")
        return np.hstack([self.envelope_.path_lower, self.envelope_.path_upper])


__all__ = ["IdentifiedSetEstimator", "WedgeExtractor"]
