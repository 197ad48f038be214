"""Moment equalities and inequalities built from filtered forecast errors.

Each row of a moment system is a time series of contributions
``(Y_t - C X_{t|t-1})_j * phi_k(Y_{t-1}, Y_{t-2}, ...)``.  A direction tag per
row says what the population mean must satisfy: ``+1`` for ``>= 0``, ``-1``
for ``<= 0`` and ``0`` for ``= 0``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import stats

from .errors import (
    AlphaBlockRankDeficient,
    DegenerateSurvey,
    DegenerateSurveyWarning,
    DimensionMismatch,
    InstrumentRankDeficient,
    MomentError,
)

RANK_TOL = 1e-10


# ---------------------------------------------------------------------------
# instruments


@dataclass(frozen=True)
class InstrumentSet:
    """Instruments built from strictly lagged observations.

    Parameters
    ----------
    lag_depth : int
        Number of lags of each selected observable (``>= 1``).
    include_constant : bool
        Prepend a column of ones.
    columns : sequence of int, optional
        Observables used as lagged instruments (all by default).
    builder : callable, optional
        Custom map from the lag tensor ``lags[t, k, :] = Y_{t-1-k}`` to a
        ``(T, n_phi)`` matrix.  It never sees contemporaneous data.
    labels : sequence of str, optional
    """

    lag_depth: int = 1
    include_constant: bool = True
    columns: tuple[int, ...] | None = None
    builder: Callable[[NDArray], NDArray] | None = None
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.lag_depth < 1:
            raise ValueError("lag_depth must be at least 1")
        if self.columns is not None:
            object.__setattr__(self, "columns", tuple(int(c) for c in self.columns))

    @property
    def start(self) -> int:
        """First period with a complete set of lags."""
        return self.lag_depth

    def lag_tensor(self, data: NDArray) -> NDArray:
        """``(T - lag_depth, lag_depth, n_Y)`` array of strictly lagged data."""
        Y = _as_2d(data)
        T = Y.shape[0]
        d = self.lag_depth
        out = np.empty((T - d, d, Y.shape[1]))
        for k in range(d):
            out[:, k, :] = Y[d - 1 - k: T - 1 - k]
        return out

    def build(self, data: ArrayLike) -> NDArray:
        """Instrument matrix aligned with periods ``start, ..., T-1``."""
        lags = self.lag_tensor(np.asarray(data, dtype=float))
        if self.builder is not None:
            phi = np.asarray(self.builder(lags), dtype=float)
            if phi.ndim == 1:
                phi = phi[:, None]
            if phi.shape[0] != lags.shape[0]:
                raise DimensionMismatch("instrument builder returned the wrong number of rows")
        else:
            cols = list(range(lags.shape[2])) if self.columns is None else list(self.columns)
            phi = lags[:, :, cols].reshape(lags.shape[0], -1)
        if self.include_constant:
            phi = np.hstack([np.ones((phi.shape[0], 1)), phi])
        return phi

    def names(self, n_phi: int, obs_names: Sequence[str] | None = None) -> list[str]:
        if self.labels and len(self.labels) == n_phi:
            return list(self.labels)
        out = ["const"] if self.include_constant else []
        if self.builder is None:
            cols = self.columns
            n_y = (n_phi - len(out)) // self.lag_depth
            cols = list(range(n_y)) if cols is None else list(cols)
            for k in range(self.lag_depth):
                for c in cols:
                    base = obs_names[c] if obs_names is not None else f"y{c + 1}"
                    out.append(f"{base}_lag{k + 1}")
        while len(out) < n_phi:
            out.append(f"phi{len(out) + 1}")
        return out


def _as_2d(x) -> NDArray:
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def check_instrument_rank(phi: NDArray) -> int:
    """Rank of the instrument second-moment matrix; warns when deficient."""
    M = phi.T @ phi / max(phi.shape[0], 1)
    sv = np.linalg.svd(M, compute_uv=False)
    rank = int(np.sum(sv > RANK_TOL * max(sv[0], 1e-300))) if sv.size else 0
    if rank < phi.shape[1]:
        warnings.warn(f"instrument second-moment matrix has rank {rank} < {phi.shape[1]}",
                      InstrumentRankDeficient, stacklevel=3)
    return rank


# ---------------------------------------------------------------------------
# survey data


@dataclass(frozen=True)
class SurveySeries:
    """Aggregated qualitative survey shares.

    Parameters
    ----------
    b : array_like, shape (T,)
        Shares in ``[0, 1]``.
    question_id : str
    target_observables : sequence of int
        Observables the survey bound applies to.
    """

    b: NDArray
    question_id: str = "survey"
    target_observables: tuple[int, ...] = (0,)

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if not np.all(np.isfinite(b)) or np.any(b < 0.0) or np.any(b > 1.0):
            raise ValueError("survey shares must lie in [0, 1]")
        b.setflags(write=False)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "target_observables", tuple(int(i) for i in self.target_observables))

    @property
    def degenerate(self) -> str | None:
        if np.all(self.b == 0.0):
            return "zero"
        if np.all(self.b == 1.0):
            return "one"
        return None


# ---------------------------------------------------------------------------
# moment systems


@dataclass(frozen=True)
class MomentSystem:
    """Stacked moment rows.

    Attributes
    ----------
    contributions : ndarray, shape (n, r)
        Per-period contributions; the sample moment is the column mean.
    directions : ndarray, shape (r,)
        ``+1``: mean ``>= 0``; ``-1``: mean ``<= 0``; ``0``: mean ``= 0``.
    labels : tuple of str
    blocks : tuple of str
        ``"alpha"`` for necessary rows, ``"beta"`` for supernumerary rows.
    W : ndarray, optional
        Weighting matrix (identity when omitted).
    meta : dict
        Free-form metadata (nuisance estimates, approximations in use).
    """

    contributions: NDArray
    directions: NDArray
    labels: tuple[str, ...] = ()
    blocks: tuple[str, ...] = ()
    W: NDArray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        q = _as_2d(self.contributions)
        d = np.asarray(self.directions, dtype=int).reshape(-1)
        if d.size != q.shape[1]:
            raise DimensionMismatch("one direction per moment row is required")
        if not set(np.unique(d)).issubset({-1, 0, 1}):
            raise ValueError("directions must be -1, 0 or +1")
        labels = tuple(self.labels) or tuple(f"m{i + 1}" for i in range(d.size))
        blocks = tuple(self.blocks) or ("alpha",) * d.size
        if len(labels) != d.size or len(blocks) != d.size:
            raise DimensionMismatch("labels and blocks must match the number of rows")
        W = self.W
        if W is not None:
            W = np.atleast_2d(np.asarray(W, dtype=float))
            if W.shape != (d.size, d.size):
                raise DimensionMismatch("W must be r x r")
            if np.min(np.linalg.eigvalsh(0.5 * (W + W.T))) < -1e-10:
                raise ValueError("W must be positive semi-definite")
        object.__setattr__(self, "contributions", q)
        object.__setattr__(self, "directions", d)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "W", W)

    @property
    def n(self) -> int:
        return self.contributions.shape[0]

    @property
    def r(self) -> int:
        return self.contributions.shape[1]

    @property
    def q_bar(self) -> NDArray:
        return self.contributions.mean(axis=0)

    @property
    def weight(self) -> NDArray:
        return np.eye(self.r) if self.W is None else self.W

    def violation(self, q_bar: NDArray | None = None) -> NDArray:
        """Signed equality residuals and one-sided violations ``max(-d q, 0)``."""
        q = self.q_bar if q_bar is None else q_bar
        one_sided = np.maximum(-self.directions * q, 0.0)
        return np.where(self.directions == 0, q, one_sided)

    def stack(self, other: "MomentSystem") -> "MomentSystem":
        """Concatenate rows; contributions are aligned on the most recent periods."""
        n = min(self.n, other.n)
        q = np.hstack([self.contributions[-n:], other.contributions[-n:]])
        W = None
        if self.W is not None or other.W is not None:
            W = np.zeros((self.r + other.r,) * 2)
            W[: self.r, : self.r] = self.weight
            W[self.r:, self.r:] = other.weight
        return MomentSystem(q, np.concatenate([self.directions, other.directions]),
                            self.labels + other.labels, self.blocks + other.blocks, W,
                            {**self.meta, **other.meta})

    def with_weight(self, W: ArrayLike | None) -> "MomentSystem":
        return replace(self, W=None if W is None else np.asarray(W, dtype=float))

    def select(self, block: str) -> "MomentSystem":
        idx = [i for i, b in enumerate(self.blocks) if b == block]
        W = None if self.W is None else self.W[np.ix_(idx, idx)]
        return MomentSystem(self.contributions[:, idx], self.directions[idx],
                            tuple(self.labels[i] for i in idx), tuple(self.blocks[i] for i in idx), W,
                            dict(self.meta))


def _kron_rows(resid: NDArray, phi: NDArray) -> NDArray:
    """Row-wise Kronecker product ``resid_t kron phi_t``."""
    return (resid[:, :, None] * phi[:, None, :]).reshape(resid.shape[0], -1)


def build_macro_moments(
    ss,
    filt,
    data: ArrayLike,
    instruments: InstrumentSet,
    signs: ArrayLike,
    obs_names: Sequence[str] | None = None,
    block: str = "alpha",
) -> MomentSystem:
    """Forecast-error moments ``(Y_t - C X_{t|t-1}) kron phi(Y_{t-1}, ...)``.

    Parameters
    ----------
    ss : StateSpace
        Used only for dimension checks.
    filt : FilterOutput
        Forecast errors ``a_t`` from filtering ``data`` through ``ss``.
    data : array_like, shape (T, n_Y)
    instruments : InstrumentSet
    signs : array_like, shape (n_Y,)
        Friction sign per observable; each is replicated over instruments.
    """
    Y = _as_2d(data)
    a = _as_2d(filt.a)
    if a.shape != Y.shape or ss.C.shape[0] != Y.shape[1]:
        raise DimensionMismatch("filter output does not match the data")
    signs = np.asarray(signs, dtype=int).reshape(-1)
    if signs.size != Y.shape[1]:
        raise DimensionMismatch("one sign per observable is required")
    phi = instruments.build(Y)
    check_instrument_rank(phi)
    resid = a[instruments.start:]
    q = _kron_rows(resid, phi)
    n_phi = phi.shape[1]
    obs = list(obs_names) if obs_names is not None else [f"y{j + 1}" for j in range(Y.shape[1])]
    inames = instruments.names(n_phi, obs)
    labels = tuple(f"{obs[j]}*{inames[k]}" for j in range(Y.shape[1]) for k in range(n_phi))
    return MomentSystem(q, np.repeat(signs, n_phi), labels, (block,) * q.shape[1],
                        meta={"residuals": resid})


def survey_residual(e: NDArray, yhat: NDArray, b: NDArray) -> tuple[NDArray, float]:
    """Residual ``e - lambda1 * yhat * b`` with ``lambda1`` fitted by least squares.

    The regression has no intercept.  With ``yhat * b`` identically zero the
    nuisance is set to 0 and ``e`` is returned unchanged.
    """
    g = yhat * b
    gg = float(np.dot(g, g))
    lam1 = float(np.dot(g, e) / gg) if gg > 0.0 else 0.0
    return e - lam1 * g, lam1


def build_survey_moments(
    ss,
    filt,
    data: ArrayLike,
    survey: SurveySeries,
    instruments: InstrumentSet,
    signs: ArrayLike,
    allow_degenerate: bool = True,
    obs_names: Sequence[str] | None = None,
    block: str = "beta",
) -> MomentSystem:
    """Survey-augmented rows ``(e_t - lambda1 * Yhat_t * b_t) kron phi``.

    For each target observable the nuisance slope is re-estimated by least
    squares of the forecast error on ``Yhat * b``.  The conditional
    expectation of the survey share is replaced by its realisation.  A
    survey that is identically zero makes the rows equalities.

    Raises
    ------
    DegenerateSurvey
        If the survey is constant at 0 or 1 and ``allow_degenerate`` is False.
        Otherwise a :class:`DegenerateSurveyWarning` is emitted.
    """
    Y = _as_2d(data)
    a = _as_2d(filt.a)
    b = survey.b
    if b.size != Y.shape[0]:
        raise DimensionMismatch(f"survey has {b.size} periods, data has {Y.shape[0]}")
    deg = survey.degenerate
    if deg is not None:
        msg = f"survey '{survey.question_id}' is identically {0 if deg == 'zero' else 1}"
        if not allow_degenerate:
            raise DegenerateSurvey(msg)
        warnings.warn(msg, DegenerateSurveyWarning, stacklevel=2)
    signs = np.asarray(signs, dtype=int).reshape(-1)
    yhat = _as_2d(filt.y_pred)
    phi = instruments.build(Y)
    s0 = instruments.start
    n_phi = phi.shape[1]
    obs = list(obs_names) if obs_names is not None else [f"y{j + 1}" for j in range(Y.shape[1])]
    inames = instruments.names(n_phi, obs)
    cols, dirs, labels, lam = [], [], [], {}
    for j in survey.target_observables:
        if not 0 <= j < Y.shape[1]:
            raise DimensionMismatch(f"survey target {j} is not an observable")
        u, lam1 = survey_residual(a[s0:, j], yhat[s0:, j], b[s0:])
        lam[obs[j]] = lam1
        cols.append(u[:, None] * phi)
        d = 0 if deg == "zero" else int(signs[j])
        dirs.extend([d] * n_phi)
        labels.extend(f"{survey.question_id}:{obs[j]}*{inames[k]}" for k in range(n_phi))
    q = np.hstack(cols)
    return MomentSystem(q, np.array(dirs), tuple(labels), (block,) * q.shape[1],
                        meta={"lambda1": lam,
                              "survey_expectation": "realised share used for E(B_t | X_{t-1})"})


# ---------------------------------------------------------------------------
# refinement diagnostics


def bartlett_hac(x: ArrayLike, bandwidth: int) -> NDArray:
    """Bartlett-kernel long-run covariance of the columns of ``x`` (demeaned)."""
    x = _as_2d(x)
    x = x - x.mean(axis=0)
    T = x.shape[0]
    S = x.T @ x / T
    for lag in range(1, min(int(bandwidth), T - 1) + 1):
        w = 1.0 - lag / (bandwidth + 1.0)
        G = x[lag:].T @ x[:-lag] / T
        S += w * (G + G.T)
    return 0.5 * (S + S.T)


@dataclass(frozen=True)
class RefinementReport:
    informative: bool
    orthogonal_share: float
    orthogonal_mean: NDArray
    statistic: float
    p_value: float
    projection: NDArray


def sargan_refinement_check(
    ms: MomentSystem,
    data=None,
    share_tol: float = 1e-10,
    alpha: float = 0.05,
    bandwidth: int = 0,
) -> RefinementReport:
    """Does the supernumerary block carry information beyond the necessary one?

    The supernumerary contributions are regressed period by period on the
    necessary contributions.  The residual is the component orthogonal to
    the necessary block.  ``informative`` is True when that component has
    non-negligible energy and its mean is significantly nonzero
    (``chi2`` test with a Bartlett long-run covariance).

    Raises
    ------
    AlphaBlockRankDeficient
        If the necessary block lacks full column rank.
    """
    A = ms.select("alpha").contributions
    Bm = ms.select("beta").contributions
    if A.shape[1] == 0 or Bm.shape[1] == 0:
        raise MomentError("both necessary and supernumerary blocks are required")
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] <= RANK_TOL * sv[0] or A.shape[0] < A.shape[1]:
        raise AlphaBlockRankDeficient("necessary block does not have full column rank")
    Pi, *_ = np.linalg.lstsq(A, Bm, rcond=None)
    U = Bm - A @ Pi
    total = float(np.sum(Bm * Bm))
    share = float(np.sum(U * U) / total) if total > 0 else 0.0
    u_bar = U.mean(axis=0)
    if share <= share_tol:
        return RefinementReport(False, share, u_bar, 0.0, 1.0, Pi)
    S = bartlett_hac(U, bandwidth)
    stat = float(U.shape[0] * u_bar @ np.linalg.pinv(S) @ u_bar)
    pval = float(stats.chi2.sf(stat, df=U.shape[1]))
    return RefinementReport(bool(share > share_tol), share, u_bar, stat, pval, Pi)


def capital_lower_bounds(K: ArrayLike, K_lag: ArrayLike, B: ArrayLike, zeta: ArrayLike,
                         lambda1: float) -> tuple[float, float]:
    """Lower bounds on the capital persistence from the macro and survey rows.

    Returns ``(phi_k, phi_k + phi_s)`` where
    ``phi_k = (zeta'K_lag)^{-1} zeta'K`` and
    ``phi_s = |lambda1| (zeta'K_lag)^{-1} zeta'(K_lag * B)``.
    """
    K, K_lag, B, zeta = (np.asarray(v, dtype=float).reshape(-1) for v in (K, K_lag, B, zeta))
    den = float(zeta @ K_lag)
    if den == 0.0:
        raise MomentError("instrument is orthogonal to lagged capital")
    phi_k = float(zeta @ K) / den
    phi_s = abs(lambda1) * float(zeta @ (K_lag * B)) / den
    return phi_k, phi_k + phi_s


# ---------------------------------------------------------------------------
# factories


def consumption_moment_factory(c: ArrayLike, regime: ArrayLike | None = None,
                               include_survey: bool = False) -> Callable[[NDArray], MomentSystem]:
    """Moment factory for the partial-equilibrium consumption model.

    The frictionless prediction is ``mu c_{t-1}`` and the instrument is
    ``c_{t-1}``.  The macro row is ``E[(c_t - mu c_{t-1}) c_{t-1}] >= 0``.  The
    survey row replaces the residual by its component orthogonal to
    ``mu c_{t-1} b_t``, with ``b_t`` the constrained-regime share.
    """
    c = np.asarray(c, dtype=float).reshape(-1)
    c0, c1 = c[:-1], c[1:]
    b = None if regime is None else np.asarray(regime, dtype=float).reshape(-1)[: c0.size]
    if include_survey and b is None:
        raise ValueError("survey rows need the regime shares")

    def factory(theta) -> MomentSystem:
        mu = float(np.asarray(theta, dtype=float).reshape(-1)[0])
        yhat = mu * c0
        e = c1 - yhat
        rows = [e * c0]
        labels = ["c*c_lag1"]
        blocks = ["alpha"]
        if include_survey:
            u, _ = survey_residual(e, yhat, b)
            rows.append(u * c0)
            labels.append("survey:c*c_lag1")
            blocks.append("beta")
        return MomentSystem(np.column_stack(rows), np.ones(len(rows), dtype=int), tuple(labels),
                            tuple(blocks), meta={"residuals": e})

    return factory


def model_moment_factory(
    spec,
    data: ArrayLike,
    instruments: InstrumentSet | None = None,
    survey: SurveySeries | None = None,
    W: ArrayLike | None = None,
) -> Callable[[NDArray], MomentSystem]:
    """``theta -> MomentSystem`` through solve, state space and Kalman filter."""
    from .kalman import run_filter
    from .model import assemble_state_space, solve_re

    Y = _as_2d(data)
    inst = instruments or InstrumentSet()

    def factory(theta) -> MomentSystem:
        values = np.asarray(theta, dtype=float).reshape(-1)
        ss = assemble_state_space(solve_re(spec, values), spec)
        filt = run_filter(ss, Y)
        ms = build_macro_moments(ss, filt, Y, inst, spec.friction_signs, spec.obs_names)
        if survey is not None:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DegenerateSurveyWarning)
                ms = ms.stack(build_survey_moments(ss, filt, Y, survey, inst, spec.friction_signs,
                                                   obs_names=spec.obs_names))
        return ms.with_weight(W) if W is not None else ms

    return factory
