"""Right-censored outcomes with time-varying covariates and per-interval working datasets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    """Measurement times ``t_0 < ... < t_M`` and the administrative horizon ``tau``.

    Interval ``j`` spans ``[t_j, t_{j+1})`` with ``t_{M+1} = tau``.  The first
    interval always starts at time 0: covariates measured at ``t_0`` describe
    the subject from the origin onwards.
    """

    points: tuple[float, ...]
    tau: float

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "tau", float(self.tau))
        if len(pts) == 0:
            raise ValueError("time grid needs at least one measurement time")
        if pts[0] < 0:
            raise ValueError("measurement times must be nonnegative")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError(f"measurement times must be strictly increasing: {pts}")
        if not self.tau > pts[-1]:
            raise ValueError(f"tau={self.tau} must exceed the last measurement time {pts[-1]}")

    @property
    def M(self) -> int:
        return len(self.points) - 1

    @property
    def n_intervals(self) -> int:
        return len(self.points)

    @property
    def edges(self) -> np.ndarray:
        """Interval boundaries ``(0, t_1, ..., t_M, tau)``."""
        return np.array((0.0,) + self.points[1:] + (self.tau,))

    def lower(self, j: int) -> float:
        return 0.0 if j == 0 else self.points[j]

    def upper(self, j: int) -> float:
        return self.points[j + 1] if j < self.M else self.tau

    def interval_of(self, t):
        """Index ``J`` with ``t_J <= t < t_{J+1}``; times past ``t_M`` map to ``M``."""
        idx = np.searchsorted(np.asarray(self.points[1:]), t, side="right")
        return idx


@dataclass(frozen=True)
class SurvivalRecord:
    id: Hashable
    x: float
    delta: int
    covariates: np.ndarray  # (M+1, p), row k measured at grid point t_k

    def __post_init__(self):
        cov = np.asarray(self.covariates, dtype=float)
        if cov.ndim == 1:
            cov = cov[:, None]
        cov.setflags(write=False)
        object.__setattr__(self, "covariates", cov)
        if not np.isfinite(self.x) or self.x < 0:
            raise ValueError(f"record {self.id!r}: observed time must be finite and >= 0, got {self.x}")
        if self.delta not in (0, 1):
            raise ValueError(f"record {self.id!r}: event indicator must be 0 or 1, got {self.delta}")


@dataclass(frozen=True)
class WorkingRecord:
    x_j: float
    delta_j: int
    z_tilde: np.ndarray
    source: int  # row of the originating record in the training set


@dataclass(frozen=True)
class WorkingDataset:
    """Interval-``j`` view of the data, stored column-wise and sorted by ``x``.

    Ties in ``x`` put events before censorings, then follow the original
    record order.
    """

    j: int
    x: np.ndarray
    delta: np.ndarray
    z_tilde: np.ndarray
    source: np.ndarray
    n_total: int
    lower: float
    upper: float

    @property
    def n_j(self) -> int:
        return len(self.x)

    @property
    def records(self) -> list[WorkingRecord]:
        return [
            WorkingRecord(float(x), int(d), z, int(s))
            for x, d, z, s in zip(self.x, self.delta, self.z_tilde, self.source)
        ]


def records_to_arrays(records: Sequence[SurvivalRecord]):
    """Stack records into ``(x, delta, Z)`` with ``Z`` of shape ``(n, M+1, p)``."""
    if len(records) == 0:
        raise ValueError("no records")
    x = np.array([r.x for r in records], dtype=float)
    delta = np.array([r.delta for r in records], dtype=np.int64)
    shapes = {r.covariates.shape for r in records}
    if len(shapes) != 1:
        raise ValueError(f"records disagree on covariate shape: {sorted(shapes)}")
    Z = np.stack([r.covariates for r in records])
    return x, delta, Z


def default_tau(x) -> float:
    """Smallest horizon that keeps every observed time strictly inside follow-up."""
    return float(np.nextafter(np.max(np.asarray(x, dtype=float)), np.inf))


def censor_at_horizon(x, delta, tau):
    """Administrative censoring: anything at or beyond ``tau`` becomes censored at ``tau``."""
    x = np.asarray(x, dtype=float)
    delta = np.asarray(delta, dtype=np.int64)
    beyond = x >= tau
    return np.where(beyond, tau, x), np.where(beyond, 0, delta)


def working_order(x, delta) -> np.ndarray:
    """Sort permutation: ascending ``x``, events first among ties, then input order."""
    n = len(x)
    return np.lexsort((np.arange(n), 1 - np.asarray(delta), np.asarray(x)))


def build_working_dataset(records, grid: TimeGrid, j: int, prior_risks=None) -> WorkingDataset:
    """Construct ``D_j``: drop subjects gone before the interval, censor survivors at its end.

    ``records`` is either a sequence of :class:`SurvivalRecord` or an ``(x, delta, Z)``
    tuple as produced by :func:`records_to_arrays`.  ``prior_risks`` holds the
    outputs of networks ``0..j-1`` for every record, shape ``(n, j)``.
    """
    if isinstance(records, tuple):
        x, delta, Z = records
    else:
        x, delta, Z = records_to_arrays(records)
    n = len(x)
    if not 0 <= j <= grid.M:
        raise ValueError(f"interval index {j} outside 0..{grid.M}")
    if Z.shape[1] != grid.n_intervals:
        raise ValueError(f"covariates cover {Z.shape[1]} grid points, grid has {grid.n_intervals}")
    if prior_risks is None:
        prior_risks = np.zeros((n, 0))
    prior_risks = np.asarray(prior_risks, dtype=float).reshape(n, -1)
    if prior_risks.shape[1] != j:
        raise ValueError(
            f"interval {j} needs {j} prior risk columns, got {prior_risks.shape[1]}; "
            "networks must be evaluated in interval order"
        )

    lo, hi = grid.lower(j), grid.upper(j)
    keep = np.flatnonzero(x >= lo)
    if keep.size == 0:
        raise ValueError(f"no at-risk subjects in interval {j} (t >= {lo})")
    xs, ds = x[keep], delta[keep]
    past = xs >= hi
    xj = np.where(past, hi, xs)
    dj = np.where(past, 0, ds).astype(np.int64)
    zt = np.concatenate([Z[keep, j, :], prior_risks[keep]], axis=1)

    order = working_order(xj, dj)
    return WorkingDataset(
        j=j,
        x=xj[order],
        delta=dj[order],
        z_tilde=zt[order],
        source=keep[order],
        n_total=n,
        lower=lo,
        upper=hi,
    )


def at_risk_count(ds: WorkingDataset, t: float) -> int:
    """Number of records with ``x_j >= t``."""
    if not ds.lower <= t <= ds.upper:
        raise ValueError(f"t={t} outside interval [{ds.lower}, {ds.upper}]")
    return ds.n_j - int(np.searchsorted(ds.x, t, side="left"))


def align_to_grid(measured_times, measured_values, grid: TimeGrid | Sequence[float]) -> np.ndarray:
    """Pick, for every grid point, the measurement closest in time (earlier wins ties)."""
    times = np.asarray(measured_times, dtype=float)
    values = np.asarray(measured_values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if times.size == 0:
        raise ValueError("no measurements to align")
    if np.any(np.diff(times) < 0):
        raise ValueError("measurement times must be sorted ascending")
    points = np.asarray(grid.points if isinstance(grid, TimeGrid) else grid, dtype=float)
    out = np.empty((len(points), values.shape[1]))
    for k, t in enumerate(points):
        dist = np.abs(t - times)
        # distances equal up to rounding count as ties; the earlier measurement wins
        near = np.flatnonzero(dist <= dist.min() + 1e-12 * max(1.0, abs(t)))
        out[k] = values[near[0]]
    return out
