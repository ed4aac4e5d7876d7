"""Concordance indices, integrated squared survival error and a proportional-hazards check."""

from __future__ import annotations

from typing import Callable

import numpy as np


def _comparable(times, events, i):
    return (times > times[i]) | ((times == times[i]) & (events == 0))


def c_index_td(times, events, survival) -> float:
    """Antolini's time-dependent concordance.

    For each event time ``t_i`` the subject's own survival ``S_i(t_i)`` is
    compared with ``S_j(t_i)`` of every subject ``j`` still event-free then
    (later time, or same time but censored).  A pair is concordant when
    ``S_i(t_i) < S_j(t_i)``; ties count one half.

    ``survival`` is either a callable mapping an array of times to an
    ``(n, len(times))`` survival matrix, or such a matrix evaluated at ``times``
    itself (column ``k`` belongs to ``times[k]``).
    """
    times = np.asarray(times, float)
    events = np.asarray(events).astype(int)
    n = len(times)
    if n < 2:
        raise ValueError("need at least two subjects")
    ev = np.flatnonzero(events == 1)
    if callable(survival):
        uniq, inv = np.unique(times[ev], return_inverse=True)
        S = np.asarray(survival(uniq), float)
        col = dict(zip(ev, inv))
    else:
        S = np.asarray(survival, float)
        if S.shape != (n, n):
            raise ValueError(f"survival matrix must be ({n}, {n}), got {S.shape}")
        col = {i: i for i in ev}
    num = 0.0
    den = 0
    for i in ev:
        comp = _comparable(times, events, i)
        comp[i] = False
        if not comp.any():
            continue
        si = S[i, col[i]]
        sj = S[comp, col[i]]
        num += np.sum(si < sj) + 0.5 * np.sum(si == sj)
        den += int(comp.sum())
    if den == 0:
        raise ValueError("no comparable pairs")
    return float(num / den)


def c_index_traditional(times, events, risk) -> float:
    """Harrell-type concordance: the earlier event should carry the higher risk."""
    times = np.asarray(times, float)
    events = np.asarray(events).astype(int)
    risk = np.asarray(risk, float)
    if len(times) < 2:
        raise ValueError("need at least two subjects")
    num = 0.0
    den = 0
    for k in np.flatnonzero(events == 1):
        later = times > times[k]
        if not later.any():
            continue
        num += np.sum(risk[later] < risk[k]) + 0.5 * np.sum(risk[later] == risk[k])
        den += int(later.sum())
    if den == 0:
        raise ValueError("no comparable pairs")
    return float(num / den)


def imspe(predicted: Callable, truth: Callable, tau: float, grid_size: int = 200) -> float:
    """``(1/tau) int_0^tau mean_i (S_hat_i(t) - S_i(t))^2 dt`` by the trapezoid rule.

    ``predicted`` and ``truth`` map an array of times to ``(n, len(times))`` matrices.
    """
    t = np.linspace(0.0, tau, grid_size)
    err = np.mean((np.asarray(predicted(t)) - np.asarray(truth(t))) ** 2, axis=0)
    return float(np.trapezoid(err, t) / tau)


def nelson_aalen(times, events):
    """Distinct event times and the cumulative hazard right after each."""
    times = np.asarray(times, float)
    events = np.asarray(events).astype(int)
    ev_t = np.unique(times[events == 1])
    at_risk = np.array([np.sum(times >= u) for u in ev_t])
    deaths = np.array([np.sum((times == u) & (events == 1)) for u in ev_t])
    return ev_t, np.cumsum(deaths / at_risk)


def _na_at(ev_t, cum, t):
    k = np.searchsorted(ev_t, t, side="right") - 1
    return np.where(k >= 0, cum[np.clip(k, 0, None)], 0.0)


def ph_diagnostic(times, events, group) -> tuple[np.ndarray, np.ndarray]:
    """Ratio of group-1 to group-0 Nelson-Aalen cumulative hazards over the pooled event times.

    Under proportional hazards the ratio is flat.  Times where group 0 has no
    cumulative hazard yet are dropped.
    """
    times = np.asarray(times, float)
    events = np.asarray(events).astype(int)
    group = np.asarray(group).astype(bool)
    curves = []
    for g in (group, ~group):
        if not np.any(events[g] == 1):
            raise ValueError("each group needs at least one event")
        curves.append(nelson_aalen(times[g], events[g]))
    t = np.unique(times[events == 1])
    a = _na_at(*curves[0], t)
    b = _na_at(*curves[1], t)
    ok = b > 0
    return t[ok], a[ok] / b[ok]
