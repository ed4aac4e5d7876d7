"""Risk propagation for new subjects and conditional survival curves."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Hashable

import numpy as np

from . import nn
from .train import DeepHazardModel

log = logging.getLogger(__name__)


@dataclass
class SurvivalCurve:
    eval_times: np.ndarray
    values: np.ndarray
    subject: Hashable = None


def risk_path(model: DeepHazardModel, covariates) -> np.ndarray:
    """Interval risks ``h_0..h_M`` for grid-aligned covariates.

    ``covariates`` has shape ``(M+1, p)`` for one subject or ``(n, M+1, p)``
    for a batch; network ``j`` sees ``Z(t_j)`` followed by the risks of
    networks ``0..j-1``.
    """
    Z = np.asarray(covariates, dtype=float)
    single = Z.ndim == 2
    if single:
        Z = Z[None]
    n, m1, p = Z.shape
    if m1 != len(model.networks):
        raise ValueError(f"covariates cover {m1} grid points, model has {len(model.networks)} intervals")
    if p != model.n_covariates:
        raise ValueError(f"covariates have dimension {p}, model was trained on {model.n_covariates}")
    H = np.zeros((n, m1))
    for j, net in enumerate(model.networks):
        feats = np.concatenate([Z[:, j, :], H[:, :j]], axis=1)
        H[:, j], _ = nn.forward(net, feats, train=False)
    return H[0] if single else H


def cumulative_risk(grid, H, t) -> np.ndarray:
    """``int_0^t h(u) du`` for the piecewise-constant risk paths in ``H`` (``(n, M+1)``)."""
    H = np.atleast_2d(H)
    t = np.atleast_1d(np.asarray(t, float))
    edges = grid.edges
    J = grid.interval_of(t)
    widths = np.diff(edges)
    # full intervals before J plus the partial one
    full = np.concatenate([np.zeros((H.shape[0], 1)), np.cumsum(H * widths, axis=1)], axis=1)
    return full[:, J] + H[:, J] * (t - edges[J])


def survival_at(model: DeepHazardModel, H, t) -> np.ndarray:
    """Unmonotonized survival ``exp(-Lambda0(t) - int_0^t h)``, clamped to ``[0, 1]``.

    Returns shape ``(n, len(t))`` for ``H`` of shape ``(n, M+1)``.
    """
    t = np.atleast_1d(np.asarray(t, float))
    if np.any(t < 0) or np.any(t > model.grid.tau):
        raise ValueError(f"survival requested outside [0, tau={model.grid.tau}]")
    logS = -model.baseline(t)[None, :] - cumulative_risk(model.grid, H, t)
    return np.clip(np.exp(np.minimum(logS, 0.0)), 0.0, 1.0)


def monotonize(values) -> np.ndarray:
    """Running minimum along the last axis."""
    return np.minimum.accumulate(np.asarray(values, float), axis=-1)


def evaluation_grid(model: DeepHazardModel, times) -> np.ndarray:
    return np.unique(np.concatenate(([0.0], model.baseline.knots, model.grid.edges, np.asarray(times, float))))


def predict_survival(model: DeepHazardModel, covariates, times, H=None) -> np.ndarray:
    """Monotone survival for each subject at ``times``, shape ``(n, len(times))``.

    The running minimum is taken over every knot of the piecewise structure,
    not just the requested times.  Times beyond the horizon are evaluated at it.
    """
    times = np.asarray(times, float)
    if np.any(times > model.grid.tau):
        warnings.warn(f"{int(np.sum(times > model.grid.tau))} requested times exceed tau={model.grid.tau}; evaluated at tau")
        times = np.minimum(times, model.grid.tau)
    if H is None:
        H = risk_path(model, covariates)
    H = np.atleast_2d(H)
    grid_t = evaluation_grid(model, times)
    S = monotonize(survival_at(model, H, grid_t))
    return S[:, np.searchsorted(grid_t, times)]


def predict_curves(model: DeepHazardModel, covariates, times=None, ids=None) -> list[SurvivalCurve]:
    H = np.atleast_2d(risk_path(model, covariates))
    grid_t = evaluation_grid(model, [] if times is None else np.minimum(times, model.grid.tau))
    S = monotonize(survival_at(model, H, grid_t))
    ids = range(len(H)) if ids is None else ids
    return [SurvivalCurve(grid_t, S[i], sid) for i, sid in enumerate(ids)]


def conditional_variance(curve: SurvivalCurve, tau: float) -> float:
    """``int_0^tau 2 t S(t) dt - (int_0^tau S(t) dt)^2`` by the trapezoid rule on the curve's grid.

    The curve is taken as 1 at time 0 and flat after its last time.
    """
    t = np.asarray(curve.eval_times, float)
    s = np.asarray(curve.values, float)
    keep = t <= tau
    t, s = t[keep], s[keep]
    if t.size == 0 or t[0] > 0:
        t, s = np.concatenate(([0.0], t)), np.concatenate(([1.0], s))
    if t[-1] < tau:
        t, s = np.concatenate((t, [tau])), np.concatenate((s, [s[-1]]))
    var = np.trapezoid(2 * t * s, t) - np.trapezoid(s, t) ** 2
    if var < 0:
        warnings.warn(f"conditional variance {var:.3g} < 0 from discretisation; clamped to 0")
        var = 0.0
    return float(var)
