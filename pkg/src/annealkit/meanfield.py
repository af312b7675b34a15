"""Classical spin dynamics: Bloch-vector evolution under an annealing schedule.

Each spin carries a unit vector n_i = (nx, ny, nz) starting at (1, 0, 0) and
precessing under

    nx' =  2 s2(t) m_i ny
    ny' = -2 s2(t) m_i nx + 2 s1(t) nz
    nz' = -2 s1(t) ny

with the local field m_i(t) = h_i + sum_j J_ij nz_j(t). The sign pattern
sigma*_i = sign(nz_i(T)) is the mean-field solution of the instance; spins
whose final magnetization stays near zero are the frustrated ones.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegrationError, InvalidArgumentError
from .instance import IsingInstance
from .schedule import ScheduleFunction

__all__ = [
    "SpinTrajectory",
    "FrustrationReport",
    "integrate_meanfield",
    "mf_energy",
    "ea_parameter",
    "frustration_report",
]

STORE_POINTS = 513
UNRESOLVED_EPS = 1e-12


@dataclass(eq=False)
class SpinTrajectory:
    """Time-resolved Bloch vectors plus the data needed to replay them.

    ``n`` has shape (n_times, n_spins, 3). ``sigma_star`` is the final sign
    pattern; spins with |nz(T)| below the resolution floor get +1 and are
    flagged in ``unresolved``. Dense interpolation at arbitrary t in [0, T]
    is available through :meth:`n_at`.
    """

    times: np.ndarray
    n: np.ndarray
    sigma_star: np.ndarray
    local_fields: np.ndarray
    unresolved: np.ndarray
    schedule: ScheduleFunction
    T: float
    tol: float
    _dense: object = None

    def n_at(self, t):
        """Bloch vectors at time(s) t from the integrator's dense output."""
        t = np.asarray(t, dtype=np.float64)
        y = self._dense(t)
        if t.ndim == 0:
            return y.reshape(-1, 3)
        return y.T.reshape(t.size, -1, 3)

    @property
    def n_spins(self) -> int:
        return self.n.shape[1]

    @property
    def max_norm_drift(self) -> float:
        """max over stored times and spins of | |n_i| - 1 |."""
        norms = np.linalg.norm(self.n, axis=2)
        return float(np.abs(norms - 1.0).max())

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["t", "spin", "nx", "ny", "nz"])
            for k, t in enumerate(self.times):
                for i in range(self.n_spins):
                    w.writerow([repr(float(t)), i] + [repr(float(v)) for v in self.n[k, i]])


def _bloch_rhs(J, h, sched, T):
    def rhs(t, y):
        n = y.reshape(-1, 3)
        u = t / T
        s2 = sched.s(u)
        s1 = 1.0 - s2
        m = h + J @ n[:, 2]
        a = 2.0 * s2 * m
        b = 2.0 * s1
        out = np.empty_like(n)
        out[:, 0] = a * n[:, 1]
        out[:, 1] = -a * n[:, 0] + b * n[:, 2]
        out[:, 2] = -b * n[:, 1]
        return out.ravel()

    return rhs


def integrate_meanfield(
    inst: IsingInstance,
    sched: ScheduleFunction,
    T: float,
    tol: float = 1e-8,
    n_store: int = STORE_POINTS,
) -> SpinTrajectory:
    """Integrate the Bloch equations from n_i(0) = (1,0,0) over [0, T].

    Uses an adaptive high-order Runge-Kutta with dense output; spins are not
    renormalized, so norm drift is a direct accuracy signal.
    """
    if T <= 0.0:
        raise InvalidArgumentError("T must be positive")
    if tol <= 0.0:
        raise InvalidArgumentError("tol must be positive")
    N = inst.n_spins
    y0 = np.zeros(3 * N)
    y0[0::3] = 1.0
    times = np.linspace(0.0, T, n_store)
    sol = solve_ivp(
        _bloch_rhs(inst.J, inst.h, sched, T),
        (0.0, T),
        y0,
        method="DOP853",
        rtol=tol,
        atol=tol,
        dense_output=True,
        t_eval=times,
    )
    if not sol.success:
        raise IntegrationError(f"mean-field integration failed: {sol.message}",
                               t=float(sol.t[-1]) if sol.t.size else 0.0)
    n = sol.y.T.reshape(n_store, N, 3)
    nzT = n[-1, :, 2]
    unresolved = np.abs(nzT) < UNRESOLVED_EPS
    sigma_star = np.where(unresolved, 1.0, np.sign(nzT))
    local_fields = inst.h[None, :] + n[:, :, 2] @ inst.J
    return SpinTrajectory(
        times=times,
        n=n,
        sigma_star=sigma_star,
        local_fields=local_fields,
        unresolved=unresolved,
        schedule=sched,
        T=T,
        tol=tol,
        _dense=sol.sol,
    )


def mf_energy(inst: IsingInstance, traj: SpinTrajectory, t: float) -> float:
    """Mean-field energy -s1 sum_i nx_i - s2 (h.nz + nz.J.nz / 2) at time t."""
    if not 0.0 <= t <= traj.T:
        raise InvalidArgumentError(f"t={t} outside [0, {traj.T}]")
    n = traj.n_at(t)
    s2 = float(traj.schedule.s(t / traj.T))
    s1 = 1.0 - s2
    nz = n[:, 2]
    return float(-s1 * n[:, 0].sum() - s2 * (inst.h @ nz + 0.5 * nz @ (inst.J @ nz)))


def ea_parameter(traj: SpinTrajectory) -> np.ndarray:
    """Local Edwards-Anderson parameter q_i = nz_i^2 at every stored time."""
    return traj.n[:, :, 2] ** 2


@dataclass
class FrustrationReport:
    """Per-spin frustration scores 1 - |nz(T)| and the descending ranking."""

    scores: np.ndarray
    ranking: np.ndarray


def frustration_report(traj: SpinTrajectory) -> FrustrationReport:
    """Score spins by how far they stay from full localization at t = T."""
    scores = 1.0 - np.abs(traj.n[-1, :, 2])
    # stable sort on -score: ties broken by spin index
    ranking = np.argsort(-scores, kind="stable")
    return FrustrationReport(scores=scores, ranking=ranking)
