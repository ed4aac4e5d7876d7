"""Least-squares hazard contrast restricted to one interval, plus the full-sample decomposition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .survival_data import WorkingDataset


@dataclass(frozen=True)
class LossBreakdown:
    data_term: float
    penalty_term: float

    @property
    def total(self) -> float:
        return self.data_term + self.penalty_term


def _check(h, ds: WorkingDataset) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if h.shape != (ds.n_j,):
        raise ValueError(f"risk vector has shape {h.shape}, dataset has {ds.n_j} records")
    if np.any(np.diff(ds.x) < 0):
        raise ValueError("working dataset is not sorted by time")
    return h


def _risk_sets(x):
    """For each sorted position r, the first index whose time equals ``x[r]``.

    The risk set at time ``x[r]`` is every record from that index on.
    """
    return np.searchsorted(x, x, side="left")


def _suffix(v):
    return np.cumsum(v[::-1])[::-1]


def mean_risk_at(h, ds: WorkingDataset, t) -> float:
    """Average risk over records still at risk at ``t`` (``x_j >= t``)."""
    h = _check(h, ds)
    start = np.searchsorted(ds.x, t, side="left")
    if start >= ds.n_j:
        raise ValueError(f"empty risk set at t={t}")
    return float(h[start:].mean())


def _pieces(h, ds: WorkingDataset):
    h = _check(h, ds)
    # the quadratic term is translation invariant; centring keeps the suffix sums well conditioned
    hc = h - h.mean()
    n_j = ds.n_j
    first = _risk_sets(ds.x)
    counts = n_j - first
    S = _suffix(hc)
    Q = _suffix(hc * hc)
    hbar = S[first] / counts  # centred mean over the risk set at x_r
    gaps = np.diff(np.concatenate(([ds.lower], ds.x)))
    return h, hc, first, counts, S, Q, hbar, gaps


def interval_loss(h, ds: WorkingDataset) -> float:
    """Data term of the interval loss for risks ``h`` aligned to ``ds``.

    ``1/(2n) sum_r gap_r sum_{i>=r} (h_i - hbar(x_r))^2 - 1/n sum_i delta_i (h_i - hbar(x_i))``
    where ``n`` is the size of the full training set.
    """
    h, hc, first, counts, S, Q, hbar, gaps = _pieces(h, ds)
    idx = np.arange(ds.n_j)
    # sum_{i>=r} (h_i - m)^2 with m the mean of the same set; gaps vanish wherever idx != first
    sq = np.where(gaps > 0, Q[idx] - S[idx] ** 2 / (ds.n_j - idx), 0.0)
    sq = np.maximum(sq, 0.0)
    quad = np.dot(gaps, sq) / (2.0 * ds.n_total)
    event = np.dot(ds.delta, hc - hbar) / ds.n_total
    return float(quad - event)


def interval_loss_grad(h, ds: WorkingDataset) -> np.ndarray:
    """Exact ``d interval_loss / d h``, including the dependence of every ``hbar`` on ``h``."""
    h, hc, first, counts, S, Q, hbar, gaps = _pieces(h, ds)
    n = ds.n_total
    # quadratic: d/dh_k = 1/n * sum_{r<=k} gap_r (h_k - hbar_r)
    G = np.cumsum(gaps)
    GM = np.cumsum(gaps * hbar)
    grad = (hc * G - GM) / n
    # event term: -1/n * (delta_k - sum_{i: first_i <= k} delta_i / count_i)
    w = np.zeros(ds.n_j)
    np.add.at(w, first, ds.delta / counts)
    grad -= (ds.delta - np.cumsum(w)) / n
    return grad


def interval_loss_direct(h, ds: WorkingDataset) -> float:
    """Reference evaluation of the integral form by looping over every gap and record."""
    h = _check(h, ds)
    n = ds.n_total
    cuts = np.unique(np.concatenate(([ds.lower], ds.x)))
    quad = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        at_risk = ds.x >= b
        if not at_risk.any():
            continue
        hb = h[at_risk].mean()
        quad += np.sum((h[at_risk] - hb) ** 2) * (b - a)
    event = 0.0
    for i in range(ds.n_j):
        if ds.delta[i]:
            event += h[i] - h[ds.x >= ds.x[i]].mean()
    return quad / (2 * n) - event / n


def _segments(x, edges, extra=()):
    cuts = np.unique(np.concatenate(([0.0], np.asarray(x, float), np.asarray(edges, float), np.asarray(extra, float))))
    cuts = cuts[cuts <= edges[-1]]
    return cuts[:-1], cuts[1:]


def gamma_decomposition(risk_matrix, baseline_knots, baseline_rates, x, delta, edges):
    """Full-sample contrast pieces ``(gamma1, gamma2, gamma3)`` over ``[0, tau]``.

    ``risk_matrix[i, j]`` is subject ``i``'s risk on interval ``[edges[j], edges[j+1])``;
    the baseline hazard is the step function taking ``baseline_rates[k]`` on
    ``[baseline_knots[k], baseline_knots[k+1])`` (zero before the first knot).
    All integrands are piecewise constant, so integration is exact.
    """
    H = np.asarray(risk_matrix, float)
    x = np.asarray(x, float)
    delta = np.asarray(delta)
    edges = np.asarray(edges, float)
    n = len(x)
    lam0 = _step_lookup(baseline_knots, baseline_rates)

    a, b = _segments(x, edges, baseline_knots)
    mid = 0.5 * (a + b)
    Y = x[:, None] >= b[None, :]  # (n, segments)
    J = np.clip(np.searchsorted(edges, mid, side="right") - 1, 0, H.shape[1] - 1)
    hseg = H[:, J]
    cnt = Y.sum(axis=0)
    hbar = np.where(cnt > 0, (hseg * Y).sum(axis=0) / np.maximum(cnt, 1), 0.0)
    l0 = lam0(mid)
    w = b - a

    g1 = np.sum(w * cnt * (l0 + hbar) ** 2) / (2 * n)
    g2 = np.sum(w * (Y * (hseg - hbar) ** 2).sum(axis=0)) / (2 * n)
    g3 = np.sum(w * (l0 + hbar) * (Y * (hseg - hbar)).sum(axis=0)) / n

    ev = np.flatnonzero((delta == 1) & (x <= edges[-1]))
    if ev.size:
        hi, hb, l0e = _at_event_times(H, x, edges, lam0, ev)
        g1 -= np.sum(l0e + hb) / n
        g2 -= np.sum(hi - hb) / n
    return float(g1), float(g2), float(g3)


def gamma_direct(risk_matrix, baseline_knots, baseline_rates, x, delta, edges) -> float:
    """The contrast evaluated at ``f = lambda0 + h`` without any decomposition."""
    H = np.asarray(risk_matrix, float)
    x = np.asarray(x, float)
    delta = np.asarray(delta)
    edges = np.asarray(edges, float)
    n = len(x)
    lam0 = _step_lookup(baseline_knots, baseline_rates)
    a, b = _segments(x, edges, baseline_knots)
    mid = 0.5 * (a + b)
    J = np.clip(np.searchsorted(edges, mid, side="right") - 1, 0, H.shape[1] - 1)
    total = 0.0
    for i in range(n):
        f = lam0(mid) + H[i, J]
        total += np.sum(f**2 * (x[i] >= b) * (b - a)) / (2 * n)
        if delta[i] == 1 and x[i] <= edges[-1]:
            j = min(int(np.searchsorted(edges, x[i], side="right")) - 1, H.shape[1] - 1)
            total -= (lam0(np.array([x[i]]))[0] + H[i, j]) / n
    return float(total)


def _at_event_times(H, x, edges, lam0, ev):
    J = np.clip(np.searchsorted(edges, x[ev], side="right") - 1, 0, H.shape[1] - 1)
    hi = H[ev, J]
    hb = np.empty(len(ev))
    for k, (i, j) in enumerate(zip(ev, J)):
        risk = x >= x[i]
        hb[k] = H[risk, j].mean()
    return hi, hb, lam0(x[ev])


def _step_lookup(knots, values):
    knots = np.asarray(knots, float)
    values = np.asarray(values, float)

    def f(t):
        k = np.searchsorted(knots, t, side="right") - 1
        return np.where(k >= 0, values[np.clip(k, 0, None)], 0.0)

    return f
