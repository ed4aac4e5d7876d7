"""Sequential training of the per-interval networks and the baseline cumulative hazard."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict

import numpy as np

from . import nn
from .loss import LossBreakdown, interval_loss, interval_loss_grad
from .survival_data import (
    SurvivalRecord,
    TimeGrid,
    WorkingDataset,
    build_working_dataset,
    censor_at_horizon,
    records_to_arrays,
)

log = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1


@dataclass
class TrainConfig:
    widths: list[int] = field(default_factory=lambda: [10, 10])
    activations: list[str] = field(default_factory=lambda: ["relu"])
    dropouts: list[float] = field(default_factory=lambda: [0.2])
    optimizer: str = "adam"
    lr: float = 1e-2
    penalty_lambda: float = 0.0
    penalty_p: int = 2
    max_epochs: int = 1000
    early_stopping: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.early_stopping < 0:
            raise ValueError("early stopping threshold must be >= 0")
        if isinstance(self.activations, str):
            self.activations = [self.activations]
        if isinstance(self.dropouts, (int, float)):
            self.dropouts = [float(self.dropouts)]
        nn.Penalty(self.penalty_lambda, self.penalty_p)
        nn.Optimizer(self.optimizer, self.lr)
        for a in self.activations:
            nn.Activation.parse(a)

    @property
    def penalty(self) -> nn.Penalty:
        return nn.Penalty(self.penalty_lambda, self.penalty_p)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class StepFunction:
    """Right-continuous step function: ``values[k]`` on ``[knots[k], knots[k+1])``, 0 before."""

    knots: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        if len(self.knots) == 0:
            return np.zeros(np.shape(t))
        k = np.searchsorted(self.knots, t, side="right") - 1
        return np.where(k >= 0, self.values[np.clip(k, 0, None)], 0.0)


@dataclass
class IntervalReport:
    j: int
    n_j: int
    n_events: int
    epochs: int
    initial_loss: float
    final_loss: float
    losses: list[float] = field(repr=False, default_factory=list)


@dataclass
class DeepHazardModel:
    grid: TimeGrid
    networks: list[nn.IntervalNetwork]
    baseline: StepFunction
    risk_matrix: np.ndarray | None = None
    config: TrainConfig | None = None
    reports: list[IntervalReport] = field(default_factory=list, repr=False)

    @property
    def n_covariates(self) -> int:
        return self.networks[0].input_dim

    def to_dict(self) -> dict:
        return {
            "format": "deephazard-model",
            "version": MODEL_FORMAT_VERSION,
            "grid": {"points": list(self.grid.points), "tau": self.grid.tau},
            "networks": [net.to_dict() for net in self.networks],
            "baseline": {"knots": self.baseline.knots.tolist(), "values": self.baseline.values.tolist()},
            "train_config": self.config.to_dict() if self.config else None,
            "risk_matrix": self.risk_matrix.tolist() if self.risk_matrix is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DeepHazardModel":
        if d.get("format") != "deephazard-model":
            raise ValueError("not a deephazard model document")
        if d.get("version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {d.get('version')}")
        grid = TimeGrid(tuple(d["grid"]["points"]), d["grid"]["tau"])
        nets = [nn.IntervalNetwork.from_dict(n) for n in d["networks"]]
        if len(nets) != grid.n_intervals:
            raise ValueError(f"model has {len(nets)} networks for {grid.n_intervals} intervals")
        base = StepFunction(np.array(d["baseline"]["knots"], float), np.array(d["baseline"]["values"], float))
        rm = d.get("risk_matrix")
        cfg = d.get("train_config")
        return cls(grid, nets, base, None if rm is None else np.array(rm, float), TrainConfig(**cfg) if cfg else None)


def _loss_and_grads(net, ds, penalty, train, rng):
    risk, tape = nn.forward(net, ds.z_tilde, train=train, rng=rng)
    data = interval_loss(risk, ds)
    upstream = interval_loss_grad(risk, ds)
    grads = nn.backward(net, tape, upstream)
    mask = net.weight_mask()
    pval, pgrads = nn.penalty_value_and_grad(penalty, [p for p, w in zip(net.params(), mask) if w])
    it = iter(pgrads)
    grads = [g + next(it) if w else g for g, w in zip(grads, mask)]
    return LossBreakdown(data, pval), grads


def train_interval_network(ds: WorkingDataset, cfg: TrainConfig, rng: np.random.Generator, net=None):
    """Full-batch descent on the interval loss plus penalty.

    Stops after ``cfg.max_epochs`` or once the relative change of the total
    loss between consecutive epochs drops below ``cfg.early_stopping``.
    Returns ``(network, report)``.
    """
    if ds.n_j < 2:
        raise ValueError(f"interval {ds.j} has {ds.n_j} at-risk subjects; need at least 2 (shorten the grid so its last point precedes more observed times)")
    if net is None:
        net = nn.build_network(ds.z_tilde.shape[1], cfg.widths, cfg.activations, cfg.dropouts, rng)
    opt = nn.Optimizer(cfg.optimizer, cfg.lr)
    penalty = cfg.penalty
    losses = []
    prev = None
    epochs = 0
    for epoch in range(cfg.max_epochs):
        loss, grads = _loss_and_grads(net, ds, penalty, True, rng)
        total = loss.total
        if not np.isfinite(total):
            raise FloatingPointError(f"interval {ds.j}: loss diverged at epoch {epoch} (lr={cfg.lr})")
        losses.append(total)
        if prev is not None and abs(total - prev) / (abs(prev) + 1e-12) < cfg.early_stopping:
            break
        prev = total
        try:
            opt.step(net.params(), grads)
        except FloatingPointError as exc:
            raise FloatingPointError(f"interval {ds.j}: {exc} at epoch {epoch} (lr={cfg.lr})") from None
        epochs = epoch + 1
    final, _ = _loss_and_grads(net, ds, penalty, False, None)
    report = IntervalReport(
        j=ds.j,
        n_j=ds.n_j,
        n_events=int(ds.delta.sum()),
        epochs=epochs,
        initial_loss=losses[0] if losses else final.total,
        final_loss=final.total,
        losses=losses,
    )
    return net, report


def fit(records, grid: TimeGrid, cfg: TrainConfig, baseline_variant: str = "integral") -> DeepHazardModel:
    """Train networks ``0..M`` in order, feeding each the outputs of its predecessors."""
    x, delta, Z = records if isinstance(records, tuple) else records_to_arrays(records)
    x, delta = censor_at_horizon(x, delta, grid.tau)
    data = (x, delta, Z)
    rng = np.random.default_rng(cfg.seed)
    n = len(x)
    H = np.zeros((n, grid.n_intervals))
    nets, reports = [], []
    for j in range(grid.n_intervals):
        try:
            ds = build_working_dataset(data, grid, j, H[:, :j])
        except ValueError as exc:
            if "no at-risk" in str(exc):
                raise ValueError(f"{exc}; shorten the grid so its last point precedes more observed times") from None
            raise
        net, rep = train_interval_network(ds, cfg, rng)
        log.info("interval %d: n_j=%d events=%d epochs=%d loss %.6g -> %.6g", j, rep.n_j, rep.n_events, rep.epochs, rep.initial_loss, rep.final_loss)
        feats = np.concatenate([Z[:, j, :], H[:, :j]], axis=1)
        H[:, j], _ = nn.forward(net, feats, train=False)
        nets.append(net)
        reports.append(rep)
    knots, values = baseline_knots(H, x, delta, grid, variant=baseline_variant)
    return DeepHazardModel(grid, nets, StepFunction(knots, values), H, cfg, reports)


def _breakpoints(x, edges, extra=()):
    cuts = np.unique(np.concatenate(([0.0], x, edges, np.asarray(extra, float))))
    return cuts[cuts <= edges[-1]]


def baseline_cumhaz(risk_matrix, x, delta, grid: TimeGrid, t, variant: str = "integral"):
    """Cumulative baseline hazard estimate at times ``t``.

    ``sum_{X_l <= t} delta_l / r_l - int_0^t hbar(u) du`` where ``r_l`` counts
    subjects with ``X >= X_l`` and ``hbar(u)`` averages the interval risk over
    those still at risk at ``u``.  With ``variant="interval"`` the integral runs
    to the end of the interval containing ``t`` instead of stopping at ``t``.
    """
    H = np.asarray(risk_matrix, float)
    x = np.asarray(x, float)
    delta = np.asarray(delta)
    t = np.atleast_1d(np.asarray(t, float))
    edges = grid.edges
    if variant not in ("integral", "interval"):
        raise ValueError(f"unknown baseline variant {variant!r}")

    xs = np.sort(x)
    at_risk = len(x) - np.searchsorted(xs, x, side="left")
    ev = delta == 1

    cuts = _breakpoints(x, edges, t)
    a, b = cuts[:-1], cuts[1:]
    J = np.clip(np.searchsorted(edges, 0.5 * (a + b), side="right") - 1, 0, grid.M)
    # on (a, b] the risk set is {X >= b}
    order = np.argsort(x, kind="stable")
    Hs = H[order]
    start = np.searchsorted(xs, b, side="left")
    cnt = len(x) - start
    hbar = np.zeros(len(b))
    for j in range(grid.n_intervals):
        sel = (J == j) & (cnt > 0)
        if sel.any():
            suffix = np.concatenate((np.cumsum(Hs[::-1, j])[::-1], [0.0]))
            hbar[sel] = suffix[start[sel]] / cnt[sel]
    integral = np.concatenate(([0.0], np.cumsum(hbar * (b - a))))

    upto = t
    if variant == "interval":
        upto = edges[np.minimum(grid.interval_of(t) + 1, grid.n_intervals)]
    idx = np.searchsorted(cuts, upto, side="left")
    idx = np.clip(idx, 0, len(cuts) - 1)

    jumps = np.where(ev, 1.0 / at_risk, 0.0)[order]
    na = np.concatenate(([0.0], np.cumsum(jumps)))[np.searchsorted(xs, t, side="right")]
    return na - integral[idx]


def baseline_knots(risk_matrix, x, delta, grid: TimeGrid, variant: str = "integral"):
    """Baseline estimate at the sorted distinct observed times, ready for step interpolation."""
    knots = np.unique(np.asarray(x, float))
    return knots, baseline_cumhaz(risk_matrix, x, delta, grid, knots, variant=variant)


def interval_baseline_cumhaz(ds: WorkingDataset, risks, t):
    """Interval-specific cumulative baseline increment built from ``D_j`` alone.

    Zero before the interval, constant after it.  Summing over all intervals
    reproduces :func:`baseline_cumhaz`.
    """
    risks = np.asarray(risks, float)
    t = np.atleast_1d(np.asarray(t, float))
    out = np.zeros(len(t))
    x, d = ds.x, ds.delta
    for k, tk in enumerate(t):
        if tk < ds.lower:
            continue
        end = min(tk, ds.upper)
        total = 0.0
        for i in np.flatnonzero((d == 1) & (x <= end)):
            total += 1.0 / np.sum(x >= x[i])
        cuts = np.unique(np.concatenate(([ds.lower], x[(x > ds.lower) & (x < end)], [end])))
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            risk = x >= hi
            if risk.any():
                total -= risks[risk].mean() * (hi - lo)
        out[k] = total
    return out
