"""Survival data with time-varying covariates drawn by inverse-transform sampling.

Each subject has base covariates ``z0``; the observed process is
``Z(t) = sqrt(min(t, 0.6)) * z0``.  Event times solve
``Lambda(T | z0) = -log(omega)`` for a uniform ``omega``, where the total
hazard is ``4 t^3`` plus a model-specific covariate term.  Censoring times are
uniform on ``(0, c)`` with ``c`` tuned to a target censoring fraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .survival_data import SurvivalRecord

PLATEAU = 0.6
HORIZON_CAP = 1e3

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_GL8_X, _GL8_W = np.polynomial.legendre.leggauss(8)


def _baseline_cubic(u):
    return 4.0 * u**3


def _zero(u, Z):
    return np.zeros(np.broadcast_shapes(np.shape(u), np.shape(Z)[:-1]))


def _m1(u, Z):
    z1, z2, z3 = Z[..., 0], Z[..., 1], Z[..., 2]
    return z1 * z2 + z1 * z3 + z1 * z2 * z3


def _m2(u, Z):
    z1, z2, z3 = Z[..., 0], Z[..., 1], Z[..., 2]
    return np.cos(u) * z1 * z2 + np.abs(np.log(u + 1)) * z1 * z2 + u**3 * z3**2


def _m3(u, Z):
    z1, z2, z3 = Z[..., 0], Z[..., 1], Z[..., 2]
    return (
        _m2(u, Z)
        + np.cos(z1 * z3)
        + z1 * z3
        + (1 + u**2) / (u + 1) * z1 * z2
        + z1**3 * z2**4
    )


def _m4(u, Z):
    z1, z2, z3 = Z[..., 0], Z[..., 1], Z[..., 2]
    return z1 * z2 / (u + 1) + 1.0 / (z1 * z2 * z3**2 + 1)


def _m5(u, Z):
    z = lambda k: Z[..., k - 1]  # noqa: E731  (1-based covariate names)
    return (
        np.cos(u) * z(1) * z(2)
        + np.abs(np.log(u + 1)) * z(1) * z(2)
        + u**3 * z(3) ** 2
        + 1.0 / (1 + z(20) * z(1) + np.sqrt(u))
    )


def _m6(u, Z):
    z = lambda k: Z[..., k - 1]  # noqa: E731
    return (
        np.cos(u) * z(1) * z(2)
        + np.abs(np.log(u + 1)) * z(3) * z(4)
        + u**3 * z(5) ** 2
        + np.cos(z(6) * z(7))
        + z(8) * z(9)
        + (1 + u**2) / (u + 1) * z(10) * z(11)
        + z(12) ** 3 * z(13) ** 4
        + 1.0 / (1 + z(20) * z(14) + np.sqrt(u))
    )


def _wide_bounds(extra):
    low, high = [0.0] * 20, [20.0] * 20
    for k, (lo, hi) in extra.items():
        low[k - 1], high[k - 1] = lo, hi
    return tuple(low), tuple(high)


@dataclass(frozen=True)
class SimModelSpec:
    """Total hazard ``baseline(t) + hazard(t, Z(t))`` with uniform base covariates."""

    name: str
    hazard: Callable
    low: tuple[float, ...]
    high: tuple[float, ...]
    baseline: Callable = _baseline_cubic
    clip_negative: bool = False  # use the positive part of the total hazard

    @property
    def p(self) -> int:
        return len(self.low)

    def total_hazard(self, u, Z):
        lam = self.baseline(u) + self.hazard(u, Z)
        return np.maximum(lam, 0.0) if self.clip_negative else lam

    def draw_base(self, n, rng) -> np.ndarray:
        return rng.uniform(self.low, self.high, size=(n, self.p))

    def check_nonnegative(self, rng, draws: int = 10_000, horizon: float = 2.0) -> float:
        """Smallest total hazard seen over random ``(t, z0)``; raises if negative."""
        z0 = self.draw_base(draws, rng)
        t = rng.uniform(0.0, horizon, size=draws)
        raw = self.baseline(t) + self.hazard(t, covariate_path(z0, t))
        if not np.all(np.isfinite(raw)):
            raise FloatingPointError(f"{self.name}: non-finite hazard")
        low = float(raw.min())
        if low < 0 and not self.clip_negative:
            k = int(raw.argmin())
            raise ValueError(f"{self.name}: negative hazard {low:.4g} at t={t[k]:.4g}")
        return low


MODELS: dict[int, SimModelSpec] = {
    1: SimModelSpec("model1", _m1, (0.0, 0.0, 0.0), (10.0, 20.0, 30.0)),
    2: SimModelSpec("model2", _m2, (0.0,) * 3, (20.0,) * 3),
    3: SimModelSpec("model3", _m3, (0.0,) * 3, (20.0,) * 3),
    4: SimModelSpec("model4", _m4, (0.0,) * 3, (20.0,) * 3),
    5: SimModelSpec("model5", _m5, *_wide_bounds({1: (5, 20), 19: (3, 4), 20: (3, 4), 16: (0, 1), 17: (0, 1), 18: (0, 1)})),
    # cos(Z6 Z7) can outweigh the other terms near t = 0, so the hazard is truncated at zero
    6: SimModelSpec(
        "model6",
        _m6,
        *_wide_bounds({1: (5, 20), 4: (3, 4), 19: (3, 4), 20: (3, 4), 16: (0, 1), 17: (0, 1), 18: (0, 1)}),
        clip_negative=True,
    ),
}

PURE_BASELINE = SimModelSpec("pure-baseline", _zero, (0.0,), (1.0,))
CONSTANT_HAZARD = SimModelSpec("constant-hazard", lambda u, Z: np.ones_like(_zero(u, Z)), (0.0,), (1.0,), baseline=lambda u: 0.0 * u)


def get_model(model) -> SimModelSpec:
    if isinstance(model, SimModelSpec):
        return model
    if model in ("pure-baseline", "baseline"):
        return PURE_BASELINE
    if model in ("constant", "constant-hazard"):
        return CONSTANT_HAZARD
    try:
        return MODELS[int(model)]
    except (KeyError, ValueError):
        raise ValueError(f"unknown simulation model {model!r}; choose 1-6") from None


def covariate_path(z0, t) -> np.ndarray:
    """``sqrt(t) * z0`` up to the plateau at 0.6, constant afterwards."""
    t = np.asarray(t, float)
    if np.any(t < 0):
        raise ValueError("covariate path is defined for t >= 0")
    return np.sqrt(np.minimum(t, PLATEAU))[..., None] * np.asarray(z0, float)


# -- cumulative hazard -------------------------------------------------------

def _simpson(f, a, b, fa, fm, fb):
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def _adaptive_simpson(f, a, b, tol, depth=60):
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = _simpson(f, a, b, fa, fm, fb)
    return _asr(f, a, b, fa, fm, fb, whole, tol, depth)


def _asr(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = _simpson(f, a, m, fa, flm, fm)
    right = _simpson(f, m, b, fm, frm, fb)
    delta = left + right - whole
    # absolute tolerance, floored at what double precision can resolve for this magnitude
    if depth <= 0 or abs(delta) <= max(15.0 * tol, 1e-14 * abs(left + right)):
        return left + right + delta / 15.0
    return _asr(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) + _asr(f, m, b, fm, frm, fb, right, tol / 2, depth - 1)


def cumulative_hazard_true(spec, z0, t, tol: float = 1e-10) -> float:
    """``int_0^t total_hazard(u, Z(u)) du`` by adaptive Simpson with a break at the plateau.

    Below the plateau the integral is taken in ``s = sqrt(u)``, which turns
    the ``sqrt(u)`` covariate path into a smooth integrand.
    """
    spec = get_model(spec)
    z0 = np.asarray(z0, float)
    if t < 0:
        raise ValueError("t must be >= 0")

    def lam(u, Z):
        v = float(spec.total_hazard(u, Z))
        if v < 0 and not spec.clip_negative:
            raise ValueError(f"{spec.name}: negative hazard {v:.4g} at u={u:.6g}")
        return v

    head = math.sqrt(min(t, PLATEAU))
    total = _adaptive_simpson(lambda s: lam(s * s, s * z0) * 2.0 * s, 0.0, head, tol / 2) if head > 0 else 0.0
    if t > PLATEAU:
        zp = math.sqrt(PLATEAU) * z0
        total += _adaptive_simpson(lambda u: lam(u, zp), PLATEAU, float(t), tol / 2)
    return total


def _gl_integral(spec, z0, lo, hi, below: bool, nodes, weights):
    """Integrals over panels ``[lo[i, k], hi[i, k]]`` for subject ``i`` (``z0`` is ``(n, p)``).

    With ``below`` the panel bounds are in ``s = sqrt(u)`` on the rising part
    of the covariate path; otherwise they are plain times past the plateau.
    """
    half = 0.5 * (hi - lo)
    v = half[..., None] * nodes + (0.5 * (hi + lo))[..., None]
    if below:
        u, root, jac = v * v, v, 2.0 * v
    else:
        u, root, jac = v, np.full_like(v, math.sqrt(PLATEAU)), 1.0
    Z = root[..., None] * z0[:, None, None, :]
    return half * ((spec.total_hazard(u, Z) * jac) @ weights)


def cumulative_hazard_batch(spec, z0s, t, panels: int = 24) -> np.ndarray:
    """Vectorised cumulative hazard for subjects ``z0s`` (``(n, p)``) at times ``t`` (``(n,)``).

    Composite 16-point Gauss-Legendre: ``panels`` equal pieces in ``sqrt(u)``
    below the plateau and ``panels`` equal pieces in ``u`` above it.
    """
    spec = get_model(spec)
    z0s = np.atleast_2d(np.asarray(z0s, float))
    t = np.broadcast_to(np.asarray(t, float), (len(z0s),))
    out = np.zeros(len(z0s))
    frac = np.arange(panels + 1) / panels
    head = np.sqrt(np.minimum(t, PLATEAU))
    out += _gl_integral(spec, z0s, head[:, None] * frac[:-1], head[:, None] * frac[1:], True, _GL_X, _GL_W).sum(axis=1)
    tail = np.maximum(t - PLATEAU, 0.0)
    if np.any(tail > 0):
        ua = PLATEAU + tail[:, None] * frac[None, :-1]
        ub = PLATEAU + tail[:, None] * frac[None, 1:]
        out += np.where(tail > 0, _gl_integral(spec, z0s, ua, ub, False, _GL_X, _GL_W).sum(axis=1), 0.0)
    return out


def true_cumhaz_matrix(spec, z0s, times, chunk: int = 200) -> np.ndarray:
    """Cumulative hazard of every subject at every time in ``times``, shape ``(n, len(times))``.

    Integrates once over a merged partition of the time axis and accumulates,
    so the cost is linear in the number of times.
    """
    spec = get_model(spec)
    z0s = np.atleast_2d(np.asarray(z0s, float))
    times = np.asarray(times, float)
    if times.size == 0:
        return np.zeros((len(z0s), 0))
    tmax = float(times.max())
    head = np.minimum(np.linspace(0.0, math.sqrt(min(tmax, PLATEAU)), 65) ** 2, min(tmax, PLATEAU))
    cuts = [head, times, [0.0]]
    if tmax > PLATEAU:
        cuts.append(np.linspace(PLATEAU, tmax, max(2, int(math.ceil((tmax - PLATEAU) / 0.02)) + 1)))
    cuts = np.unique(np.concatenate(cuts))
    a, b = cuts[:-1], cuts[1:]
    below = b <= PLATEAU
    pos = np.searchsorted(cuts, times)
    out = np.empty((len(z0s), len(times)))
    for start in range(0, len(z0s), chunk):
        z = z0s[start : start + chunk]
        m = len(z)
        seg = np.empty((m, len(a)))
        seg[:, below] = _gl_integral(spec, z, np.broadcast_to(np.sqrt(a[below]), (m, below.sum())), np.broadcast_to(np.sqrt(b[below]), (m, below.sum())), True, _GL8_X, _GL8_W)
        seg[:, ~below] = _gl_integral(spec, z, np.broadcast_to(a[~below], (m, (~below).sum())), np.broadcast_to(b[~below], (m, (~below).sum())), False, _GL8_X, _GL8_W)
        cum = np.concatenate([np.zeros((len(z), 1)), np.cumsum(seg, axis=1)], axis=1)
        out[start : start + chunk] = cum[:, pos]
    return out


# -- event times ------------------------------------------------------------

def sample_event_times(spec, z0s, omegas, tol: float = 1e-10, cap: float = HORIZON_CAP, chunk: int = 2000):
    """Solve ``exp(-Lambda(T)) = omega`` per subject by safeguarded Newton on a bisection bracket.

    Returns ``(T, beyond)``; ``beyond`` flags subjects whose cumulative hazard
    never reaches ``-log(omega)`` before ``cap`` (their ``T`` is ``cap``).
    """
    spec = get_model(spec)
    z0s = np.atleast_2d(np.asarray(z0s, float))
    omegas = np.asarray(omegas, float)
    if np.any((omegas <= 0) | (omegas >= 1)):
        raise ValueError("omega must lie in (0, 1)")
    T = np.empty(len(z0s))
    beyond = np.zeros(len(z0s), bool)
    for s in range(0, len(z0s), chunk):
        T[s : s + chunk], beyond[s : s + chunk] = _solve(spec, z0s[s : s + chunk], -np.log(omegas[s : s + chunk]), tol, cap)
    return T, beyond


def _solve(spec, z0s, target, tol, cap):
    n = len(z0s)
    lo = np.zeros(n)
    hi = np.ones(n)
    while True:
        short = cumulative_hazard_batch(spec, z0s, hi) < target
        short &= hi < cap
        if not short.any():
            break
        hi[short] = np.minimum(hi[short] * 2.0, cap)
    beyond = cumulative_hazard_batch(spec, z0s, hi) < target
    t = 0.5 * (lo + hi)
    active = ~beyond
    for _ in range(200):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        ti = t[idx]
        F = cumulative_hazard_batch(spec, z0s[idx], ti) - target[idx]
        below = F < 0
        lo[idx] = np.where(below, ti, lo[idx])
        hi[idx] = np.where(below, hi[idx], ti)
        rate = spec.total_hazard(ti, covariate_path(z0s[idx], ti))
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = ti - F / rate
        ok = np.isfinite(newton) & (newton > lo[idx]) & (newton < hi[idx])
        nxt = np.where(ok, newton, 0.5 * (lo[idx] + hi[idx]))
        done = (np.abs(nxt - ti) < tol) | (hi[idx] - lo[idx] < tol)
        t[idx] = nxt
        active[idx[done]] = False
    t[beyond] = cap
    return t, beyond


def sample_event_time(spec, z0, omega, tol: float = 1e-10) -> float:
    if not 0 < omega < 1:
        raise ValueError("omega must lie in (0, 1)")
    T, _ = sample_event_times(spec, np.atleast_2d(z0), np.array([omega]), tol=tol)
    return float(T[0])


# -- censoring ---------------------------------------------------------------

def expected_censoring(T, c) -> float:
    """Probability that ``C ~ U(0, c)`` falls before the event, averaged over ``T``."""
    if math.isinf(c):
        return 0.0
    return float(np.mean(np.minimum(T, c) / c))


def calibrate_censoring(spec, target: float, n_pilot: int = 4000, rng=None, T_pilot=None) -> float:
    """Upper bound ``c`` of the uniform censoring law giving the target censored fraction.

    Uses pilot event times and the exact conditional censoring probability
    ``min(T, c) / c``; ``target == 0`` returns ``inf``.
    """
    if not 0 <= target < 1:
        raise ValueError("target censoring level must be in [0, 1)")
    if target == 0:
        return math.inf
    spec = get_model(spec)
    if T_pilot is None:
        rng = np.random.default_rng(rng)
        z0 = spec.draw_base(n_pilot, rng)
        T_pilot, _ = sample_event_times(spec, z0, rng.uniform(size=n_pilot))
    T_pilot = np.asarray(T_pilot, float)
    lo, hi = math.log(T_pilot.min() * 1e-3 + 1e-300), math.log(T_pilot.max() * 1e6)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        frac = expected_censoring(T_pilot, math.exp(mid))
        if abs(frac - target) < 1e-4:
            break
        if frac > target:
            lo = mid
        else:
            hi = mid
    c = math.exp(mid)
    if abs(expected_censoring(T_pilot, c) - target) > 0.01:
        raise ValueError(f"censoring level {target} not attainable for {spec.name}")
    return c


# -- datasets ----------------------------------------------------------------

class TrueSurvival:
    """True conditional survival ``S(t | Z(t))`` for simulated subjects."""

    def __init__(self, spec, z0s):
        self.spec = get_model(spec)
        self.z0s = np.atleast_2d(np.asarray(z0s, float))

    def __len__(self):
        return len(self.z0s)

    def __call__(self, times) -> np.ndarray:
        return np.exp(-true_cumhaz_matrix(self.spec, self.z0s, times))

    def at(self, subject: int, t: float) -> float:
        return math.exp(-cumulative_hazard_true(self.spec, self.z0s[subject], t))

    def subset(self, idx) -> "TrueSurvival":
        return TrueSurvival(self.spec, self.z0s[idx])


@dataclass
class SimOutput:
    records: list[SurvivalRecord]
    true_survival: TrueSurvival
    achieved_censoring: float
    seed: int
    z0: np.ndarray
    event_times: np.ndarray
    censor_bound: float
    beyond_support: int = 0
    grid: tuple[float, ...] = field(default=())


def generate_dataset(spec, n: int, grid, target_censoring: float = 0.0, seed: int = 0, n_pilot: int = 4000) -> SimOutput:
    """Simulate ``n`` subjects with covariates recorded at the measurement times ``grid``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    spec = get_model(spec)
    main_ss, pilot_ss = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(main_ss)
    z0 = spec.draw_base(n, rng)
    omega = rng.uniform(size=n)
    u_c = rng.uniform(size=n)
    T, beyond = sample_event_times(spec, z0, omega)
    c = calibrate_censoring(spec, target_censoring, n_pilot, np.random.default_rng(pilot_ss))
    C = c * u_c if math.isfinite(c) else np.full(n, np.inf)
    X = np.minimum(T, C)
    delta = (T <= C).astype(int)
    pts = np.asarray(grid, float)
    Zg = covariate_path(z0[:, None, :], pts[None, :])  # (n, M+1, p)
    records = [SurvivalRecord(i, float(X[i]), int(delta[i]), Zg[i]) for i in range(n)]
    return SimOutput(
        records=records,
        true_survival=TrueSurvival(spec, z0),
        achieved_censoring=float(1 - delta.mean()),
        seed=seed,
        z0=z0,
        event_times=T,
        censor_bound=c,
        beyond_support=int(beyond.sum()),
        grid=tuple(float(p) for p in pts),
    )
