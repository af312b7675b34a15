"""Gaussian fluctuations around a mean-field trajectory.

The quadratic quasi-particle Hamiltonian around the trajectory is encoded by
two n x n blocks:

    A_ii = 2 s1 nx_i / (1 + sigma*_i nz_i) + 2 s2 sigma*_i m_i
    A_ij = -s2 J_ij n+_i n-_j          (i != j)
    B_ij = +s2 J_ij n+_i n+_j,  B_ii = 0

with n+-_i = sigma*_i nx_i +- i ny_i. The equal-time statistical matrix F
(2n x 2n) evolves as  i dF/dt = [sigma3 H, F]  from F(0) = -i sigma3, where
H = [[A, B], [B^dag, conj(A)]] and sigma3 = diag(1, -1). Its first-block
diagonal yields quasi-particle numbers N_i = (i F_ii - 1)/2; combined with the
Edwards-Anderson parameter and a stereographic weight they form the
localization susceptibility chi_i whose interior peaks predict the adiabatic
bottleneck.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.signal import find_peaks

from .errors import IntegrationError, InvalidArgumentError
from .instance import IsingInstance
from .meanfield import FrustrationReport, SpinTrajectory

__all__ = [
    "ParamagnonBlocks",
    "FluctuationRecord",
    "BottleneckCandidate",
    "build_blocks",
    "evolve_statistical_function",
    "localization_susceptibility",
    "detect_bottlenecks",
]

DENOM_FLOOR = 1e-9
MARGINS = (0.05, 0.97)
PROMINENCE_FRAC = 0.10
MIN_SEPARATION = 0.02
MAX_CANDIDATES = 3


@dataclass(eq=False)
class ParamagnonBlocks:
    """Quadratic-Hamiltonian blocks evaluated at one time."""

    t: float
    A: np.ndarray
    B: np.ndarray
    regularized: np.ndarray  # spins whose A_ii denominator hit the floor


def _blocks_at(J, h, sigma_star, s2, n_t):
    nx, ny, nz = n_t[:, 0], n_t[:, 1], n_t[:, 2]
    s1 = 1.0 - s2
    m = h + J @ nz
    denom = 1.0 + sigma_star * nz
    reg = denom < DENOM_FLOOR
    denom = np.maximum(denom, DENOM_FLOOR)
    np_i = sigma_star * nx + 1j * ny
    nm_i = np.conj(np_i)
    A = (-s2) * J * np.outer(np_i, nm_i)
    np.fill_diagonal(A, 2.0 * s1 * nx / denom + 2.0 * s2 * sigma_star * m)
    B = s2 * J * np.outer(np_i, np_i)
    return A, B, reg


def build_blocks(inst: IsingInstance, traj: SpinTrajectory, t: float) -> ParamagnonBlocks:
    """Evaluate the fluctuation-Hamiltonian blocks at time t."""
    if not 0.0 <= t <= traj.T:
        raise InvalidArgumentError(f"t={t} outside [0, {traj.T}]")
    s2 = float(traj.schedule.s(t / traj.T))
    A, B, reg = _blocks_at(inst.J, inst.h, traj.sigma_star, s2, traj.n_at(t))
    return ParamagnonBlocks(t=t, A=A, B=B, regularized=reg)


@dataclass(eq=False)
class FluctuationRecord:
    """Statistical matrix, quasi-particle numbers and susceptibilities over time.

    ``F`` has shape (n_times, 2n, 2n); ``number``, ``chi`` and ``z_norm2``
    are (n_times, n_spins). ``pole_flags`` marks spins whose regularization
    floor was hit at any stored time (excluded from peak detection).
    ``spectrum_deviation`` is the worst distance of eig(iF) from {+-1}.
    """

    times: np.ndarray
    s: np.ndarray
    F: np.ndarray
    number: np.ndarray
    chi: np.ndarray
    z_norm2: np.ndarray
    pole_flags: np.ndarray
    tol: float
    spectrum_deviation: float = 0.0
    spectrum_warning: bool = False

    @property
    def n_spins(self) -> int:
        return self.number.shape[1]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["s", "spin", "N", "chi"])
            for k, sk in enumerate(self.s):
                for i in range(self.n_spins):
                    w.writerow([repr(float(sk)), i,
                                repr(float(self.number[k, i])),
                                repr(float(self.chi[k, i]))])


def evolve_statistical_function(
    inst: IsingInstance,
    traj: SpinTrajectory,
    tol: float = 1e-8,
) -> FluctuationRecord:
    """Evolve F(t,t) from -i sigma3 along the trajectory and derive N_i, chi_i.

    The matrix ODE steps adaptively with blocks rebuilt from the trajectory's
    dense output; F is stored on the trajectory's output grid. The similarity
    structure of the flow conserves the spectrum of iF at {+-1}; the worst
    deviation is recorded, and exceeding 100*tol raises the warning flag.

    ``tol`` is the target for accumulated (global) error; internal local
    step tolerances are set two orders tighter so the spectrum drift over
    long anneals stays well below it.
    """
    if tol <= 0.0:
        raise InvalidArgumentError("tol must be positive")
    N = inst.n_spins
    T = traj.T
    sched = traj.schedule
    sig3 = np.concatenate([np.ones(N), -np.ones(N)])
    J, h, sigma_star = inst.J, inst.h, traj.sigma_star
    dense = traj._dense

    def rhs(t, y):
        F = y.view(np.complex128).reshape(2 * N, 2 * N)
        n_t = dense(t).reshape(N, 3)
        s2 = float(sched.s(t / T))
        A, B, _ = _blocks_at(J, h, sigma_star, s2, n_t)
        H = np.empty((2 * N, 2 * N), dtype=np.complex128)
        H[:N, :N] = A
        H[:N, N:] = B
        H[N:, :N] = np.conj(B)
        H[N:, N:] = np.conj(A)
        M = sig3[:, None] * H
        dF = -1j * (M @ F - F @ M)
        return dF.ravel().view(np.float64)

    F0 = (-1j * np.diag(sig3)).astype(np.complex128)
    y0 = F0.ravel().view(np.float64).copy()
    sol = solve_ivp(
        rhs,
        (0.0, T),
        y0,
        method="DOP853",
        rtol=0.01 * tol,
        atol=0.01 * tol,
        t_eval=traj.times,
    )
    if not sol.success:
        raise IntegrationError(f"statistical-function integration failed: {sol.message}",
                               t=float(sol.t[-1]) if sol.t.size else 0.0)
    F = np.ascontiguousarray(sol.y.T).view(np.complex128).reshape(-1, 2 * N, 2 * N)

    diag = np.einsum("kii->ki", 1j * F[:, :N, :N]).real
    number = 0.5 * (diag - 1.0)

    dev = 0.0
    target = np.concatenate([-np.ones(N), np.ones(N)])
    for k in range(F.shape[0]):
        ev = np.linalg.eigvals(1j * F[k])
        order = np.argsort(ev.real)
        dev = max(dev, float(np.abs(ev[order] - target).max()))

    record = FluctuationRecord(
        times=traj.times,
        s=traj.times / T,
        F=F,
        number=number,
        chi=np.zeros_like(number),
        z_norm2=np.zeros_like(number),
        pole_flags=np.zeros(N, dtype=bool),
        tol=tol,
        spectrum_deviation=dev,
        spectrum_warning=bool(dev > 100.0 * tol),
    )
    record.chi, record.z_norm2, record.pole_flags = _susceptibility_arrays(record, traj)
    return record


def _susceptibility_arrays(record: FluctuationRecord, traj: SpinTrajectory):
    nx = traj.n[:, :, 0]
    ny = traj.n[:, :, 1]
    nz = traj.n[:, :, 2]
    q = nz * nz
    denom = 1.0 + traj.sigma_star[None, :] * nz
    flags = (denom < DENOM_FLOOR).any(axis=0)
    denom = np.maximum(denom, DENOM_FLOOR)
    z2 = (nx * nx + ny * ny) / (denom * denom)
    chi = q * (1.0 + z2) ** 2 * record.number
    return chi, z2, flags


def localization_susceptibility(record: FluctuationRecord, traj: SpinTrajectory) -> np.ndarray:
    """chi_i(t) = q_i (1 + |z_i|^2)^2 N_i on the shared storage grid.

    z_i is the stereographic projection of the Bloch vector taken on the
    sigma*_i branch, so the pole sits opposite the spin's final orientation;
    denominators are floored and flagged.
    """
    if record.times.shape != traj.times.shape or not np.array_equal(record.times, traj.times):
        raise InvalidArgumentError("record and trajectory use different time grids")
    chi, _, _ = _susceptibility_arrays(record, traj)
    return chi


@dataclass
class BottleneckCandidate:
    """One predicted bottleneck location with its ranking evidence."""

    position: float
    chi_peak: float
    spin: int
    frustration: float
    number_peak: float
    rank: int
    low_confidence: bool = False

    def to_dict(self) -> dict:
        return {
            "position": self.position,
            "chi_peak": self.chi_peak,
            "spin": self.spin,
            "frustration": self.frustration,
            "number_peak": self.number_peak,
            "rank": self.rank,
            "low_confidence": self.low_confidence,
        }


def detect_bottlenecks(
    record: FluctuationRecord,
    frustration: FrustrationReport,
    max_candidates: int = MAX_CANDIDATES,
    margins: tuple = MARGINS,
    prominence_frac: float = PROMINENCE_FRAC,
    min_separation: float = MIN_SEPARATION,
) -> list:
    """Rank interior chi peaks into bottleneck candidates.

    Peaks are discrete local maxima inside the exclusion margins with
    prominence at least ``prominence_frac`` of the global interior maximum,
    ranked by the owning spin's frustration score and then by the quasi-
    particle number at the peak. Near-duplicate positions (within
    ``min_separation``) keep only the best-ranked occurrence. Without any
    qualifying peak, the interior maximum of the summed chi is returned as a
    single low-confidence candidate.
    """
    if record.times.size == 0:
        raise InvalidArgumentError("empty fluctuation record")
    s = record.s
    lo, hi = margins
    interior = (s > lo) & (s < hi)
    if not interior.any():
        raise InvalidArgumentError("margins exclude the whole grid")
    usable = ~record.pole_flags

    chi_interior = record.chi[:, usable][interior]
    global_max = float(chi_interior.max()) if chi_interior.size else 0.0

    found = []
    if global_max > 0.0:
        for i in np.flatnonzero(usable):
            peaks, _ = find_peaks(record.chi[:, i], prominence=prominence_frac * global_max)
            for k in peaks:
                if not interior[k]:
                    continue
                found.append(
                    BottleneckCandidate(
                        position=float(s[k]),
                        chi_peak=float(record.chi[k, i]),
                        spin=int(i),
                        frustration=float(frustration.scores[i]),
                        number_peak=float(record.number[k, i]),
                        rank=0,
                    )
                )

    if not found:
        total = record.chi[:, usable].sum(axis=1) if usable.any() else record.chi.sum(axis=1)
        masked = np.where(interior, total, -np.inf)
        k = int(np.argmax(masked))
        spins = np.flatnonzero(usable) if usable.any() else np.arange(record.n_spins)
        i = int(spins[np.argmax(record.chi[k, spins])])
        return [
            BottleneckCandidate(
                position=float(s[k]),
                chi_peak=float(record.chi[k, i]),
                spin=i,
                frustration=float(frustration.scores[i]),
                number_peak=float(record.number[k, i]),
                rank=1,
                low_confidence=True,
            )
        ]

    found.sort(key=lambda c: (-c.frustration, -c.number_peak, c.spin, c.position))
    kept = []
    for cand in found:
        if any(abs(cand.position - k.position) < min_separation for k in kept):
            continue
        kept.append(cand)
        if len(kept) == max_candidates:
            break
    for r, cand in enumerate(kept, start=1):
        cand.rank = r
    return kept


def write_candidates_json(candidates, path) -> None:
    with open(path, "w") as f:
        json.dump([c.to_dict() for c in candidates], f, indent=1, sort_keys=True)
        f.write("\n")
