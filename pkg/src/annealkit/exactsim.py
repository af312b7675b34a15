"""Exact small-N quantum reference: spectra, gaps, metric, Trotter evolution.

The annealing Hamiltonian is H(s) = s1 H_X + s2 H_Z with H_X = -sum_i X_i and
H_Z the diagonal instance Hamiltonian. State vectors are indexed by the bit
pattern of spins (bit i <-> spin i, bit value 0 <-> spin +1). Trotterized
evolution alternates the diagonal phase multiply U_Z and the tensor-product
X rotation U_X with angles beta_k = tau s1, gamma_k = tau s2.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateSpectrumError, InvalidArgumentError, SizeGuardError
from .instance import IsingInstance, assignment_energies
from .schedule import ScheduleFunction

__all__ = [
    "SpectrumRecord",
    "GapProfile",
    "LevelDistribution",
    "classical_energies",
    "instantaneous_spectrum",
    "gap_profile",
    "metric_tensor",
    "scalar_metric",
    "trotter_evolve",
    "success_probability",
    "eigenstate_distribution",
]

DIAG_GUARD = 14
METRIC_GUARD = 12
STATE_GUARD = 22
DEGENERACY_EPS = 1e-12


def classical_energies(inst: IsingInstance, max_n: int = STATE_GUARD) -> np.ndarray:
    """Diagonal of H_Z over all basis states (offset included)."""
    return assignment_energies(inst, max_n=max_n)


def _apply_hx(psi: np.ndarray, n: int) -> np.ndarray:
    """H_X |psi> = -sum_i X_i |psi> via index bit flips."""
    out = np.zeros_like(psi)
    idx = np.arange(psi.size)
    for i in range(n):
        out -= psi[idx ^ (1 << i)]
    return out


def _dense_hamiltonian(inst: IsingInstance, s: float, energies: np.ndarray) -> np.ndarray:
    n = inst.n_spins
    dim = 1 << n
    H = np.zeros((dim, dim))
    np.fill_diagonal(H, s * energies)
    idx = np.arange(dim)
    for i in range(n):
        H[idx, idx ^ (1 << i)] = -(1.0 - s)
    return H


@dataclass(eq=False)
class SpectrumRecord:
    """Instantaneous eigenvalues (ascending) and optional eigenvectors."""

    s: float
    energies: np.ndarray
    vectors: np.ndarray | None = None


def instantaneous_spectrum(
    inst: IsingInstance,
    s: float,
    want_vectors: bool = False,
    max_n: int = DIAG_GUARD,
) -> SpectrumRecord:
    """Dense eigen-decomposition of H(s) = (1-s) H_X + s H_Z."""
    if not 0.0 <= s <= 1.0:
        raise InvalidArgumentError("s must lie in [0,1]")
    if inst.n_spins > max_n:
        raise SizeGuardError(f"n={inst.n_spins} exceeds diagonalization guard {max_n}")
    H = _dense_hamiltonian(inst, s, classical_energies(inst))
    if want_vectors:
        w, v = np.linalg.eigh(H)
        return SpectrumRecord(s=s, energies=w, vectors=v)
    w = np.linalg.eigvalsh(H)
    return SpectrumRecord(s=s, energies=w)


def _gap_at(inst: IsingInstance, s: float, energies: np.ndarray) -> float:
    H = _dense_hamiltonian(inst, s, energies)
    w = scipy.linalg.eigh(H, subset_by_index=(0, 1), eigvals_only=True)
    return float(w[1] - w[0])


@dataclass(eq=False)
class GapProfile:
    """Sampled gap Delta(s) on a dyadic grid plus refined minimum location."""

    s: np.ndarray
    gap: np.ndarray
    s_star: float
    resolution_exponent: int
    degenerate: bool = False

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["s", "gap"])
            for sk, g in zip(self.s, self.gap):
                w.writerow([repr(float(sk)), repr(float(g))])


_INV_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def gap_profile(
    inst: IsingInstance,
    resolution_exponent: int = 5,
    refine_exponent: int = 10,
    max_n: int = DIAG_GUARD,
) -> GapProfile:
    """Gap Delta(s) on a 2^-r grid, with the minimum refined to 2^-refine.

    The refinement is a golden-section search bracketing the coarse argmin;
    every evaluated point enters the profile. ``s_star`` is the argmin over
    all samples. A gap below the degeneracy floor flags the instance.
    """
    if inst.n_spins > max_n:
        raise SizeGuardError(f"n={inst.n_spins} exceeds diagonalization guard {max_n}")
    if resolution_exponent < 1:
        raise InvalidArgumentError("resolution_exponent must be >= 1")
    energies = classical_energies(inst)
    m = 1 << resolution_exponent
    s_vals = list(np.arange(m + 1) / m)
    gaps = [_gap_at(inst, s, energies) for s in s_vals]

    k_min = int(np.argmin(gaps))
    a = s_vals[max(k_min - 1, 0)]
    b = s_vals[min(k_min + 1, m)]
    target = 2.0 ** (-refine_exponent)
    x1 = b - _INV_GOLDEN * (b - a)
    x2 = a + _INV_GOLDEN * (b - a)
    f1 = _gap_at(inst, x1, energies)
    f2 = _gap_at(inst, x2, energies)
    s_vals += [x1, x2]
    gaps += [f1, f2]
    while b - a > target:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INV_GOLDEN * (b - a)
            f1 = _gap_at(inst, x1, energies)
            s_vals.append(x1)
            gaps.append(f1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INV_GOLDEN * (b - a)
            f2 = _gap_at(inst, x2, energies)
            s_vals.append(x2)
            gaps.append(f2)

    s_arr = np.asarray(s_vals)
    gap_arr = np.asarray(gaps)
    order = np.argsort(s_arr)
    s_arr, gap_arr = s_arr[order], gap_arr[order]
    keep = np.concatenate([[True], np.diff(s_arr) > 0.0])
    s_arr, gap_arr = s_arr[keep], gap_arr[keep]
    s_star = float(s_arr[np.argmin(gap_arr)])
    return GapProfile(
        s=s_arr,
        gap=gap_arr,
        s_star=s_star,
        resolution_exponent=resolution_exponent,
        degenerate=bool(gap_arr.min() < DEGENERACY_EPS),
    )


def metric_tensor(inst: IsingInstance, s: float, max_n: int = METRIC_GUARD) -> np.ndarray:
    """2x2 adiabatic metric from the full eigenbasis at s.

    g_{mu nu} = Re sum_{l>0} <l|d_mu H|0><0|d_nu H|l> / (E_l - E_0)^2 with
    d_1 H = H_X and d_2 H = H_Z.
    """
    if inst.n_spins > max_n:
        raise SizeGuardError(f"n={inst.n_spins} exceeds metric guard {max_n}")
    rec = instantaneous_spectrum(inst, s, want_vectors=True, max_n=max_n)
    w, v = rec.energies, rec.vectors
    if w[1] - w[0] < DEGENERACY_EPS:
        raise DegenerateSpectrumError(f"ground state degenerate at s={s}")
    v0 = v[:, 0]
    energies = classical_energies(inst)
    wx = v.T @ _apply_hx(v0, inst.n_spins)
    wz = v.T @ (energies * v0)
    de2 = (w - w[0]) ** 2
    de2[0] = np.inf
    g = np.empty((2, 2))
    g[0, 0] = np.sum(wx * wx / de2)
    g[1, 1] = np.sum(wz * wz / de2)
    g[0, 1] = g[1, 0] = np.sum(wx * wz / de2)
    return g


def scalar_metric(inst: IsingInstance, s: float, max_n: int = METRIC_GUARD) -> float:
    """Pullback of the metric along the one-parameter family (ds1, ds2) = (-1, +1)."""
    g = metric_tensor(inst, s, max_n=max_n)
    return float(g[0, 0] - 2.0 * g[0, 1] + g[1, 1])


def _apply_ux(psi: np.ndarray, n: int, beta: float) -> None:
    """In-place psi <- prod_i exp(i beta X_i) psi."""
    if beta == 0.0:
        return
    c = np.cos(beta)
    s = 1j * np.sin(beta)
    for i in range(n):
        shaped = psi.reshape(-1, 2, 1 << i)
        a0 = shaped[:, 0, :].copy()
        a1 = shaped[:, 1, :]
        shaped[:, 0, :] = c * a0 + s * a1
        shaped[:, 1, :] = s * a0 + c * a1


def trotter_evolve(
    inst: IsingInstance,
    sched: ScheduleFunction,
    T: float,
    p: int,
    order: int = 2,
    max_n: int = STATE_GUARD,
    energies: np.ndarray | None = None,
) -> np.ndarray:
    """Final state of the p-layer Trotterized anneal from the uniform state.

    Order 1 applies U_X(beta_k) U_Z(gamma_k) with angles sampled at layer
    endpoints; order 2 applies the symmetric splitting with angles sampled at
    interval midpoints (adjacent X half-rotations merged).
    """
    n = inst.n_spins
    if n > max_n:
        raise SizeGuardError(f"n={n} exceeds state-vector guard {max_n}")
    if p < 1:
        raise InvalidArgumentError("p must be >= 1")
    if T <= 0.0:
        raise InvalidArgumentError("T must be positive")
    if order not in (1, 2):
        raise InvalidArgumentError("order must be 1 or 2")
    if energies is None:
        energies = classical_energies(inst, max_n=max_n)
    tau = T / p
    psi = np.full(1 << n, 2.0 ** (-n / 2.0), dtype=np.complex128)
    if order == 1:
        t = T * np.arange(1, p + 1) / p
        beta = tau * np.asarray(sched.s1(t, T), dtype=np.float64)
        gamma = tau * np.asarray(sched.s2(t, T), dtype=np.float64)
        for k in range(p):
            psi *= np.exp(-1j * gamma[k] * energies)
            _apply_ux(psi, n, beta[k])
    else:
        t = T * (np.arange(1, p + 1) - 0.5) / p
        beta = tau * np.asarray(sched.s1(t, T), dtype=np.float64)
        gamma = tau * np.asarray(sched.s2(t, T), dtype=np.float64)
        _apply_ux(psi, n, 0.5 * beta[0])
        for k in range(p - 1):
            psi *= np.exp(-1j * gamma[k] * energies)
            _apply_ux(psi, n, 0.5 * (beta[k] + beta[k + 1]))
        psi *= np.exp(-1j * gamma[p - 1] * energies)
        _apply_ux(psi, n, 0.5 * beta[p - 1])
    return psi


def success_probability(state: np.ndarray, inst: IsingInstance) -> float:
    """Total probability of measuring any minimal-energy basis state."""
    energies = classical_energies(inst)
    if state.shape != energies.shape:
        raise InvalidArgumentError("state dimension does not match instance")
    emin = energies.min()
    mask = energies <= emin + 1e-9
    return float(np.sum(np.abs(state[mask]) ** 2))


@dataclass(eq=False)
class LevelDistribution:
    """Probability mass per distinct classical energy level (ascending)."""

    energies: np.ndarray
    masses: np.ndarray
    most_likely: int

    def to_rows(self):
        return [
            {"level": int(k), "energy": float(e), "mass": float(m)}
            for k, (e, m) in enumerate(zip(self.energies, self.masses))
        ]


def eigenstate_distribution(
    state: np.ndarray,
    inst: IsingInstance,
    decimals: int = 9,
) -> LevelDistribution:
    """Collapse a state onto the distinct classical levels of the instance.

    Levels within 10^-decimals in energy are merged; ``most_likely`` is the
    index (0 = ground level) carrying the largest mass.
    """
    energies = classical_energies(inst)
    if state.shape != energies.shape:
        raise InvalidArgumentError("state dimension does not match instance")
    rounded = np.round(energies, decimals=decimals)
    levels, inverse = np.unique(rounded, return_inverse=True)
    masses = np.bincount(inverse, weights=np.abs(state) ** 2, minlength=levels.size)
    return LevelDistribution(
        energies=levels,
        masses=masses,
        most_likely=int(np.argmax(masses)),
    )
