"""Annealing schedules: linear, geodesic boundary-value solutions, QAOA angles.

A schedule is a strictly monotone map s: [0,1] -> [0,1] with s(0)=0, s(1)=1,
evaluated in normalized time u = t/T. The two Hamiltonian weights follow as
s1(t) = 1 - s(t/T) and s2(t) = s(t/T). Geodesic schedules solve

    s'' = -Gamma(s) s'^2,   s(0)=0, s(1)=1,

by shooting on the initial slope, where Gamma is either a synthetic bump force
centered on a predicted bottleneck or the log-derivative of a measured gap
profile.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline, PchipInterpolator
from scipy.optimize import brentq

from .errors import InvalidArgumentError, ShootingError

__all__ = [
    "ScheduleFunction",
    "GeodesicParams",
    "linear_schedule",
    "lorentzian_force",
    "gaussian_force",
    "solve_geodesic",
    "exact_christoffel_schedule",
    "qaoa_angles",
]

DEFAULT_GRID = 1025


class ScheduleFunction:
    """Sampled monotone schedule on a uniform normalized-time grid.

    Between samples the schedule is interpolated with a monotone cubic
    (PCHIP), which preserves strict monotonicity and the [0,1] range.
    """

    def __init__(self, samples):
        samples = np.asarray(samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size < 2:
            raise InvalidArgumentError("schedule needs a 1-d array of >= 2 samples")
        if samples[0] != 0.0 or samples[-1] != 1.0:
            raise InvalidArgumentError("schedule must have s(0)=0 and s(1)=1 exactly")
        if not np.all(np.diff(samples) > 0.0):
            raise InvalidArgumentError("schedule samples must be strictly increasing")
        if samples.min() < 0.0 or samples.max() > 1.0:
            raise InvalidArgumentError("schedule samples must lie in [0,1]")
        self.samples = samples
        self.u = np.linspace(0.0, 1.0, samples.size)
        self._is_linear = bool(np.array_equal(samples, self.u))
        self._interp = None if self._is_linear else PchipInterpolator(self.u, samples)

    def s(self, u):
        """Schedule value s(u) for u in [0,1] (clamped)."""
        u = np.clip(u, 0.0, 1.0)
        if self._is_linear:
            return u
        return self._interp(u)

    def s1(self, t, T):
        """Driver weight s1(t) = 1 - s(t/T)."""
        return 1.0 - self.s(np.asarray(t) / T)

    def s2(self, t, T):
        """Problem weight s2(t) = s(t/T)."""
        return self.s(np.asarray(t) / T)

    def derivative(self, u):
        """ds/du at u (from the interpolant)."""
        u = np.clip(u, 0.0, 1.0)
        if self._is_linear:
            return np.ones_like(np.asarray(u, dtype=np.float64))
        return self._interp.derivative()(u)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["u", "s"])
            for u, s in zip(self.u, self.samples):
                w.writerow([repr(float(u)), repr(float(s))])

    @classmethod
    def read_csv(cls, path) -> "ScheduleFunction":
        with open(path) as f:
            rows = list(csv.reader(f))
        if not rows or rows[0] != ["u", "s"]:
            raise InvalidArgumentError(f"{path}: expected header 'u,s'")
        return cls(np.array([float(r[1]) for r in rows[1:]]))


def linear_schedule(n_samples: int = DEFAULT_GRID) -> ScheduleFunction:
    """The one-component linear schedule s(u) = u."""
    return ScheduleFunction(np.linspace(0.0, 1.0, n_samples))


@dataclass
class GeodesicParams:
    """Bump-force parameters: center (predicted bottleneck), width, amplitude."""

    center: float
    sigma: float = 0.05
    gamma0: float = 3.20

    def __post_init__(self):
        if not 0.0 < self.center < 1.0:
            raise InvalidArgumentError("center must lie strictly inside (0,1)")
        if self.sigma <= 0.0:
            raise InvalidArgumentError("sigma must be positive")
        if self.gamma0 <= 0.0:
            raise InvalidArgumentError("gamma0 must be positive")


def lorentzian_force(p: GeodesicParams, s):
    """Cauchy-bump force -gamma0 (s - c) / ((s - c)^2 + sigma^2)."""
    d = np.asarray(s, dtype=np.float64) - p.center
    return -p.gamma0 * d / (d * d + p.sigma * p.sigma)


def gaussian_force(p: GeodesicParams, s):
    """Gaussian-bump force -gamma0 (s - c) / (2 sigma^2).

    The half log-derivative of a Gaussian bump is linear and unbounded, so
    this force is much stiffer than the Cauchy one at equal gamma0; use a
    smaller amplitude or a wider sigma.
    """
    d = np.asarray(s, dtype=np.float64) - p.center
    return -p.gamma0 * d / (2.0 * p.sigma * p.sigma)


_SHOOT_TOL = 1e-12
_OVERSHOOT_CAP = 1.5


def _shoot(force, v0, dense=False):
    """Integrate s''=-force(s) s'^2 from (0, v0) over u in [0,1].

    Returns (mismatch s(1)-1, solution). Trajectories escaping past the
    overshoot cap are scored by how early they escaped so the mismatch stays
    sign-correct for bracketing.
    """

    def rhs(u, y):
        return (y[1], -force(y[0]) * y[1] * y[1])

    def escaped(u, y):
        return y[0] - _OVERSHOOT_CAP

    escaped.terminal = True
    escaped.direction = 1.0

    sol = solve_ivp(
        rhs,
        (0.0, 1.0),
        (0.0, v0),
        method="DOP853",
        rtol=_SHOOT_TOL,
        atol=_SHOOT_TOL,
        events=escaped,
        dense_output=dense,
    )
    if sol.t_events[0].size:
        return (_OVERSHOOT_CAP - 1.0) + (1.0 - sol.t_events[0][0]), sol
    if not sol.success:
        raise ShootingError(f"shooting integration failed: {sol.message}")
    return sol.y[0, -1] - 1.0, sol


def _solve_bvp_scaled(force_at_scale, scales, n_samples):
    """Shooting with continuation over a ramp of force scales.

    ``force_at_scale(c)`` must return the force callable at continuation
    parameter c; ``scales`` ends at the target. Returns the schedule samples.
    """
    v_guess = 1.0
    last_ok = None
    for c in scales:
        force = force_at_scale(c)

        def mismatch(v):
            return _shoot(force, v)[0]

        try:
            lo = hi = v_guess
            for _ in range(80):
                if mismatch(lo) < 0.0:
                    break
                lo /= 4.0
            else:
                raise ShootingError("could not bracket initial slope from below")
            for _ in range(80):
                if mismatch(hi) > 0.0:
                    break
                hi *= 4.0
            else:
                raise ShootingError("could not bracket initial slope from above")
            v_guess = brentq(mismatch, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=200)
        except ShootingError as exc:
            if last_ok is None:
                raise ShootingError(str(exc)) from None
            c_ok, v_ok = last_ok
            raise ShootingError(
                str(exc),
                last_gamma0=c_ok,
                last_schedule=_sample_shot(force_at_scale(c_ok), v_ok, n_samples),
            ) from None
        last_ok = (c, v_guess)
    c_ok, v_ok = last_ok
    return _sample_shot(force_at_scale(c_ok), v_ok, n_samples)


def _polish_to_grid(s, force, max_iter=60):
    """Newton-project samples onto the output grid's discretized ODE.

    The shooting solution satisfies the continuous ODE, but a uniform grid
    cannot represent its boundary layers exactly; damped Newton on the
    tridiagonal second-difference system drives the discrete residual

        s_{k+1} - 2 s_k + s_{k-1} + force(s_k) ((s_{k+1} - s_{k-1}) / 2)^2

    to machine precision while staying O(h^2)-close to the true geodesic.
    Returns the input unchanged if the iteration stalls or breaks
    monotonicity.
    """
    from scipy.linalg import solve_banded

    def residual(x):
        d = 0.5 * (x[2:] - x[:-2])
        return x[2:] - 2.0 * x[1:-1] + x[:-2] + force(x[1:-1]) * d * d

    eps = 1e-7
    x = s.copy()
    r = residual(x)
    for _ in range(max_iter):
        if np.abs(r).max() < 1e-14:
            break
        d = 0.5 * (x[2:] - x[:-2])
        g = force(x[1:-1])
        gp = (force(x[1:-1] + eps) - force(x[1:-1] - eps)) / (2.0 * eps)
        m = x.size - 2
        ab = np.zeros((3, m))
        ab[0, 1:] = 1.0 + g[:-1] * d[:-1]
        ab[1, :] = -2.0 + gp * d * d
        ab[2, :-1] = 1.0 - g[1:] * d[1:]
        try:
            delta = solve_banded((1, 1), ab, -r)
        except np.linalg.LinAlgError:
            return s
        step = 1.0
        for _ in range(40):
            trial = x.copy()
            trial[1:-1] += step * delta
            r_trial = residual(trial)
            if np.abs(r_trial).max() <= np.abs(r).max():
                break
            step *= 0.5
        else:
            return s
        x = trial
        r = r_trial
    else:
        return s
    if np.all(np.diff(x) > 0.0) and x.min() >= 0.0 and x.max() <= 1.0:
        return x
    return s


def _sample_shot(force, v0, n_samples):
    _, sol = _shoot(force, v0, dense=True)
    u = np.linspace(0.0, 1.0, n_samples)
    s = sol.sol(u)[0]
    s[0] = 0.0
    s[-1] = 1.0
    np.clip(s, 0.0, 1.0, out=s)
    s = _polish_to_grid(s, force)
    return ScheduleFunction(s)


def solve_geodesic(
    p: GeodesicParams,
    bump: str = "cauchy",
    n_samples: int = DEFAULT_GRID,
    continuation_start: float = 1.0,
    continuation_step: float = 0.25,
) -> ScheduleFunction:
    """Geodesic schedule for a bump force centered on a bottleneck estimate.

    For amplitudes above ``continuation_start`` the shooting problem is solved
    repeatedly along a ramp of amplitudes (steps <= ``continuation_step``),
    re-using the previous initial slope, which keeps the root bracketing cheap
    for strong forces.
    """
    if bump == "cauchy":
        base = lorentzian_force
    elif bump == "gaussian":
        base = gaussian_force
    else:
        raise InvalidArgumentError(f"unknown bump shape {bump!r}")

    if p.gamma0 <= continuation_start:
        gammas = [p.gamma0]
    else:
        n_steps = int(np.ceil((p.gamma0 - continuation_start) / continuation_step))
        gammas = list(continuation_start + (p.gamma0 - continuation_start)
                      * np.arange(n_steps + 1) / n_steps)

    def force_at(g):
        pg = GeodesicParams(center=p.center, sigma=p.sigma, gamma0=g)
        return lambda s: base(pg, s)

    return _solve_bvp_scaled(force_at, gammas, n_samples)


def exact_christoffel_schedule(gap, n_samples: int = DEFAULT_GRID) -> ScheduleFunction:
    """Geodesic schedule driven by the measured gap profile.

    The force is -d/ds log(gap) from finite differences on the profile grid
    (central in the interior, one-sided at the ends), interpolated with a
    cubic spline. Continuation ramps the force scale up to 1.
    """
    s_grid = np.asarray(gap.s, dtype=np.float64)
    gaps = np.asarray(gap.gap, dtype=np.float64)
    if np.any(gaps <= 0.0):
        raise InvalidArgumentError("gap profile contains nonpositive samples")
    gamma_data = -np.gradient(np.log(gaps), s_grid)
    spline = CubicSpline(s_grid, gamma_data)

    def force_at(c):
        return lambda s: c * spline(np.clip(s, 0.0, 1.0))

    return _solve_bvp_scaled(force_at, [0.25, 0.5, 0.75, 1.0], n_samples)


def qaoa_angles(sched: ScheduleFunction, T: float, p: int):
    """Per-layer angles (beta_k, gamma_k) = tau * (s1, s2)(T k / p), tau = T/p."""
    if p < 1:
        raise InvalidArgumentError("p must be >= 1")
    if T <= 0.0:
        raise InvalidArgumentError("T must be positive")
    tau = T / p
    t = T * np.arange(1, p + 1) / p
    return tau * sched.s1(t, T), tau * sched.s2(t, T)
