"""Least-squares fit of the contention model to a throughput curve.

Given measured (cores, throughput-per-cycle) points, recover the mean
lock service time s (and optionally the mean think time a) that the
closed-form model explains them with, plus RSS and R-squared.

The optimizer is deterministic: a 64x64 logarithmic grid scan over
s in [50, 2000] x a in [100, 64000] cycles, then coordinate descent
with golden-section line searches until the relative step falls below
1e-4.  Residuals are unweighted by default; relative weighting is
available via `relative_weights`.

A scikit-learn compatible wrapper (MachineRepairmanRegressor) exposes
the same fit through the estimator API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .model import state_probabilities, ModelParams

__all__ = [
    "DegenerateInputError",
    "NonConvergenceError",
    "FitInput",
    "FitResult",
    "model_curve",
    "fit_model",
    "r_squared",
    "MachineRepairmanRegressor",
]

S_GRID_RANGE = (50.0, 2000.0)
A_GRID_RANGE = (100.0, 64000.0)
GRID_SIZE = 64
REL_STEP_TOL = 1e-4
MAX_SWEEPS = 100


class DegenerateInputError(ValueError):
    """All throughputs equal: total sum of squares is zero."""


class NonConvergenceError(RuntimeError):
    """Coordinate descent hit the iteration cap; best-so-far attached."""

    def __init__(self, message: str, best: "FitResult") -> None:
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class FitInput:
    """Points to fit plus which parameters are free.

    n_limit drops points above a core count (the model only explains
    a single fixed-service-time regime).
    """

    points: tuple[tuple[int, float], ...]
    fit_a: bool = True
    fixed_a: float | None = None
    n_limit: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", tuple((int(n), float(t)) for n, t in self.points))
        kept = self.selected_points()
        if len(kept) < 3:
            raise ValueError(f"need at least 3 points (after n_limit), got {len(kept)}")
        ns = [n for n, _ in kept]
        if len(set(ns)) != len(ns):
            raise ValueError("core counts must be distinct")
        if any(n < 1 for n in ns):
            raise ValueError("core counts must be >= 1")
        if any(t <= 0.0 for _, t in kept):
            raise ValueError("throughputs must be > 0")
        if not self.fit_a and (self.fixed_a is None or self.fixed_a <= 0.0):
            raise ValueError("fixed_a must be a positive think time when fit_a is false")

    def selected_points(self) -> list[tuple[int, float]]:
        pts = self.points
        if self.n_limit is not None:
            pts = tuple(p for p in pts if p[0] <= self.n_limit)
        return sorted(pts)


@dataclass(frozen=True)
class FitResult:
    s_hat: float
    a_hat: float
    rss: float
    r_squared: float


def model_curve(ns, s: float, a: float) -> np.ndarray:
    """Model throughput at each core count in ns."""
    out = np.empty(len(ns))
    for i, n in enumerate(ns):
        dist = state_probabilities(ModelParams(int(n), s, a))
        out[i] = (1.0 - dist.probs[0]) / s
    return out


def r_squared(points, curve) -> float:
    """1 - RSS/TSS between measured points and a model curve.

    Both arguments are sequences of (n, throughput) covering the same
    core counts.
    """
    pts = dict((int(n), float(t)) for n, t in points)
    crv = dict((int(n), float(t)) for n, t in curve)
    if set(pts) != set(crv):
        raise ValueError("points and curve must cover the same core counts")
    y = np.array([pts[n] for n in sorted(pts)])
    f = np.array([crv[n] for n in sorted(pts)])
    tss = float(np.sum((y - y.mean()) ** 2))
    if tss == 0.0:
        raise DegenerateInputError("all throughputs are equal; R-squared undefined")
    rss = float(np.sum((y - f) ** 2))
    return 1.0 - rss / tss


def _golden_section(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Minimize f on [lo, hi]; returns (argmin, min). Tolerance is relative."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol * max(abs(a), abs(b), 1e-300):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def fit_model(fit_input: FitInput, relative_weights: bool = False) -> FitResult:
    """Fit (s, a) to the selected points by deterministic least squares."""
    pts = fit_input.selected_points()
    ns = [n for n, _ in pts]
    y = np.array([t for _, t in pts])
    tss = float(np.sum((y - y.mean()) ** 2))
    if tss == 0.0:
        raise DegenerateInputError("all throughputs are equal; nothing to fit")
    w = 1.0 / y if relative_weights else np.ones_like(y)

    def rss_at(s: float, a: float) -> float:
        resid = (y - model_curve(ns, s, a)) * w
        return float(np.sum(resid * resid))

    s_grid = np.geomspace(*S_GRID_RANGE, GRID_SIZE)
    if fit_input.fit_a:
        a_grid = np.geomspace(*A_GRID_RANGE, GRID_SIZE)
    else:
        a_grid = np.array([fit_input.fixed_a])
    best_s, best_a, best_rss = s_grid[0], a_grid[0], math.inf
    for s in s_grid:
        for a in a_grid:
            r = rss_at(s, a)
            if r < best_rss:
                best_s, best_a, best_rss = float(s), float(a), r

    # coordinate descent: golden-section along log-s, then log-a
    span = 4.0  # bracket half-width factor around the current point
    for _ in range(MAX_SWEEPS):
        prev_s, prev_a = best_s, best_a
        ls, best_rss = _golden_section(
            lambda u: rss_at(math.exp(u), best_a),
            math.log(best_s / span), math.log(best_s * span), REL_STEP_TOL / 10,
        )
        best_s = math.exp(ls)
        if fit_input.fit_a:
            la, best_rss = _golden_section(
                lambda u: rss_at(best_s, math.exp(u)),
                math.log(best_a / span), math.log(best_a * span), REL_STEP_TOL / 10,
            )
            best_a = math.exp(la)
        step = max(abs(best_s - prev_s) / prev_s, abs(best_a - prev_a) / prev_a)
        if step < REL_STEP_TOL:
            break
        span = max(1.0 + 4.0 * step, 1.001)  # shrink brackets as we close in
    else:
        best = FitResult(best_s, best_a, best_rss, 1.0 - best_rss / tss)
        raise NonConvergenceError(
            f"coordinate descent did not converge in {MAX_SWEEPS} sweeps", best
        )
    return FitResult(best_s, best_a, best_rss, 1.0 - best_rss / tss)


class MachineRepairmanRegressor(RegressorMixin, BaseEstimator):
    """Scikit-learn estimator facade over fit_model.

    X is a column of core counts, y the measured throughput in
    completions per cycle.  After fit, `service_time_` and
    `think_time_` hold the recovered parameters in cycles.
    """

    def __init__(self, fit_think_time: bool = True, fixed_think_time: float | None = None,
                 n_limit: int | None = None, relative_weights: bool = False):
        self.fit_think_time = fit_think_time
        self.fixed_think_time = fixed_think_time
        self.n_limit = n_limit
        self.relative_weights = relative_weights

    def _validate(self, X) -> np.ndarray:
        X = np.asarray(X)
        if X.ndim == 2 and X.shape[1] == 1:
            X = X[:, 0]
        if X.ndim != 1:
            raise ValueError("X must be a 1-D sequence or single-column array of core counts")
        return X

    def fit(self, X, y):
        X = self._validate(X)
        y = np.asarray(y, dtype=float)
        if y.shape != X.shape:
            raise ValueError("X and y must have the same length")
        result = fit_model(
            FitInput(
                points=tuple(zip((int(v) for v in X), (float(v) for v in y))),
                fit_a=self.fit_think_time,
                fixed_a=self.fixed_think_time,
                n_limit=self.n_limit,
            ),
            relative_weights=self.relative_weights,
        )
        self.service_time_ = result.s_hat
        self.think_time_ = result.a_hat
        self.rss_ = result.rss
        self.r_squared_ = result.r_squared
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "service_time_"):
            raise RuntimeError("estimator is not fitted")
        X = self._validate(X)
        return model_curve([int(v) for v in X], self.service_time_, self.think_time_)

    def score(self, X, y, sample_weight=None):  # noqa: D102 - RegressorMixin contract
        return super().score(X, y, sample_weight=sample_weight)
