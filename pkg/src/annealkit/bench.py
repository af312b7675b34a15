"""Hard-instance mining, schedule comparisons, and ensemble statistics.

Mining is a two-stage filter over randomly generated instances: keep those
whose linear mean-field evolution leaves at least one spin nearly unmagnetized
(frustration screen), then keep those whose linear-schedule success
probability falls below a cutoff (hardness screen). The comparison harness
runs, per instance and final time, the linear baseline and the full
semi-classical pipeline (mean-field -> fluctuations -> bottleneck candidates
-> geodesic schedules), and aggregates success probabilities with geometric
means over the sub-ensemble that is actually hard for the baseline.
"""

from __future__ import annotations

import csv
import functools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.integrate import solve_ivp

from .errors import InvalidArgumentError
from .exactsim import (
    classical_energies,
    eigenstate_distribution,
    success_probability,
    trotter_evolve,
)
from .fluctuations import detect_bottlenecks, evolve_statistical_function
from .instance import IsingInstance, generate_sk
from .meanfield import frustration_report, integrate_meanfield
from .schedule import GeodesicParams, ScheduleFunction, linear_schedule, solve_geodesic

__all__ = [
    "MiningConfig",
    "MiningResult",
    "ScheduleSpec",
    "EnsembleReport",
    "mine_hard_instances",
    "run_comparison",
    "geometric_mean",
    "effective_probability_bound",
    "excited_state_histogram",
]

_SCREEN_BATCH = 64


def geometric_mean(values) -> float:
    """k-th root of the product of k positive values, accumulated in log space."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise InvalidArgumentError("geometric mean of an empty list")
    if np.any(values <= 0.0):
        raise InvalidArgumentError("geometric mean requires strictly positive values")
    return float(np.exp(np.mean(np.log(values))))


def effective_probability_bound(P: float, candidates: int, runs: int = 1) -> float:
    """Worst-case success bound 1 - (1-P)^(1/C) when C candidate schedules
    share the run budget and only one of them has success probability P."""
    if not 0.0 < P < 1.0:
        raise InvalidArgumentError("P must lie strictly inside (0,1)")
    if candidates < 1 or runs < 1:
        raise InvalidArgumentError("candidates and runs must be >= 1")
    p_fail = (1.0 - P) ** runs
    return 1.0 - p_fail ** (1.0 / (candidates * runs))


# ---------------------------------------------------------------------------
# mining


@dataclass
class MiningConfig:
    """Two-stage hard-instance filter parameters."""

    n: int
    pool_size: int
    seed: int
    frustration_threshold: float = 0.1
    screening_T: float = 128.0
    p_cutoff: float = 0.005
    trotter_step: float = 0.125
    target_count: int | None = None
    screen_tol: float = 1e-6

    def __post_init__(self):
        if self.pool_size < 1:
            raise InvalidArgumentError("pool_size must be >= 1")
        if not 0.0 <= self.frustration_threshold < 1.0:
            raise InvalidArgumentError("frustration_threshold must lie in [0,1)")
        if not 0.0 < self.p_cutoff <= 1.0:
            raise InvalidArgumentError("p_cutoff must lie in (0,1]")
        if self.screening_T <= 0.0 or self.trotter_step <= 0.0:
            raise InvalidArgumentError("screening_T and trotter_step must be positive")


@dataclass
class MiningResult:
    """Kept instances plus the filter statistics of the whole run."""

    instances: list
    pool_used: int
    stage1_pass: int
    stage2_pass: int
    config: MiningConfig

    def __len__(self):
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)

    def stats_dict(self) -> dict:
        return {
            "pool_used": self.pool_used,
            "stage1_pass": self.stage1_pass,
            "stage2_pass": self.stage2_pass,
            "kept": len(self.instances),
        }


def _final_nz_batch(batch, T, tol):
    """Final nz per spin for a batch of instances under the linear schedule."""
    B = len(batch)
    N = batch[0].n_spins
    J = np.stack([inst.J for inst in batch])
    h = np.stack([inst.h for inst in batch])
    y0 = np.zeros((B, N, 3))
    y0[:, :, 0] = 1.0

    def rhs(t, y):
        n = y.reshape(B, N, 3)
        s2 = t / T
        s1 = 1.0 - s2
        m = h + np.einsum("bij,bj->bi", J, n[:, :, 2])
        a = 2.0 * s2 * m
        out = np.empty_like(n)
        out[:, :, 0] = a * n[:, :, 1]
        out[:, :, 1] = -a * n[:, :, 0] + 2.0 * s1 * n[:, :, 2]
        out[:, :, 2] = -2.0 * s1 * n[:, :, 1]
        return out.ravel()

    sol = solve_ivp(rhs, (0.0, T), y0.ravel(), method="DOP853", rtol=tol, atol=tol)
    return sol.y[:, -1].reshape(B, N, 3)[:, :, 2]


def _apply_ux_batch(psi, n, beta):
    if beta == 0.0:
        return
    c = np.cos(beta)
    s = 1j * np.sin(beta)
    B = psi.shape[0]
    for i in range(n):
        shaped = psi.reshape(B, -1, 2, 1 << i)
        a0 = shaped[:, :, 0, :].copy()
        a1 = shaped[:, :, 1, :]
        shaped[:, :, 0, :] = c * a0 + s * a1
        shaped[:, :, 1, :] = s * a0 + c * a1


def _linear_success_batch(batch, T, step):
    """Order-2 linear-schedule success probability for a batch of instances."""
    n = batch[0].n_spins
    p = int(round(T / step))
    tau = T / p
    t = T * (np.arange(1, p + 1) - 0.5) / p
    s2 = t / T
    beta = tau * (1.0 - s2)
    gamma = tau * s2
    E = np.stack([classical_energies(inst) for inst in batch])
    B = len(batch)
    psi = np.full((B, 1 << n), 2.0 ** (-n / 2.0), dtype=np.complex128)
    _apply_ux_batch(psi, n, 0.5 * beta[0])
    for k in range(p - 1):
        psi *= np.exp(-1j * gamma[k] * E)
        _apply_ux_batch(psi, n, 0.5 * (beta[k] + beta[k + 1]))
    psi *= np.exp(-1j * gamma[p - 1] * E)
    _apply_ux_batch(psi, n, 0.5 * beta[p - 1])
    emin = E.min(axis=1, keepdims=True)
    mask = E <= emin + 1e-9
    return ((np.abs(psi) ** 2) * mask).sum(axis=1)


def mine_hard_instances(cfg: MiningConfig) -> MiningResult:
    """Generate, screen and keep hard instances, preserving generation order.

    Instance k of the pool is ``generate_sk(cfg.n, cfg.seed + k)``, so runs
    are deterministic and every kept instance records its own seed. Screening
    is batched; with ``target_count`` set, mining stops as soon as enough
    instances survived.
    """
    kept = []
    stage1 = 0
    stage2 = 0
    pool_used = 0
    for start in range(0, cfg.pool_size, _SCREEN_BATCH):
        stop = min(start + _SCREEN_BATCH, cfg.pool_size)
        batch = [generate_sk(cfg.n, cfg.seed + k) for k in range(start, stop)]
        pool_used = stop
        nz = _final_nz_batch(batch, cfg.screening_T, cfg.screen_tol)
        s1_mask = np.abs(nz).min(axis=1) <= cfg.frustration_threshold
        stage1 += int(s1_mask.sum())
        survivors = [inst for inst, ok in zip(batch, s1_mask) if ok]
        if survivors:
            probs = _linear_success_batch(survivors, cfg.screening_T, cfg.trotter_step)
            for inst, p in zip(survivors, probs):
                if p < cfg.p_cutoff:
                    stage2 += 1
                    kept.append(inst)
        if cfg.target_count is not None and len(kept) >= cfg.target_count:
            kept = kept[: cfg.target_count]
            break
    return MiningResult(
        instances=kept,
        pool_used=pool_used,
        stage1_pass=stage1,
        stage2_pass=stage2,
        config=cfg,
    )


# ---------------------------------------------------------------------------
# comparisons


@dataclass
class ScheduleSpec:
    """One schedule column of a comparison run.

    ``kind`` is "linear", "adaptive" (geodesic schedules on the per-instance
    bottleneck candidates) or "fixed_center" (one geodesic schedule at a fixed
    center shared by the whole ensemble).
    """

    name: str
    kind: str = "linear"
    order: int = 2
    center: float | None = None
    gamma0: float = 3.20
    sigma: float = 0.05
    baseline: bool = False

    def __post_init__(self):
        if self.kind not in ("linear", "adaptive", "fixed_center"):
            raise InvalidArgumentError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "fixed_center" and self.center is None:
            raise InvalidArgumentError("fixed_center spec needs a center")
        if self.order not in (1, 2):
            raise InvalidArgumentError("order must be 1 or 2")


def default_specs(effective_center: float | None = None) -> list:
    specs = [
        ScheduleSpec(name="linear", kind="linear", order=2, baseline=True),
        ScheduleSpec(name="adaptive", kind="adaptive", order=1),
    ]
    if effective_center is not None:
        specs.append(
            ScheduleSpec(name="effective", kind="fixed_center", order=1,
                         center=effective_center)
        )
    return specs


@functools.lru_cache(maxsize=512)
def _cached_geodesic(center: float, sigma: float, gamma0: float) -> ScheduleFunction:
    return solve_geodesic(GeodesicParams(center=center, sigma=sigma, gamma0=gamma0))


def _compare_one(inst, T, specs, step, max_candidates, mf_tol, fl_tol, diag_guard=14):
    p = int(round(T / step))
    row = {
        "label": inst.label,
        "seed": inst.seed,
        "n": inst.n_spins,
        "T": T,
        "status": "ok",
        "error": None,
        "p": {},
        "candidates": None,
        "p_candidates": {},
        "p_eff_bound": {},
        "most_likely_level": None,
    }
    try:
        energies = classical_energies(inst)
        lin = linear_schedule()
        needs_pipeline = any(s.kind == "adaptive" for s in specs)
        candidates = None
        if needs_pipeline:
            traj = integrate_meanfield(inst, lin, T, tol=mf_tol)
            record = evolve_statistical_function(inst, traj, tol=fl_tol)
            fr = frustration_report(traj)
            candidates = detect_bottlenecks(record, fr, max_candidates=max_candidates)
            row["candidates"] = [c.to_dict() for c in candidates]
        baseline_state = None
        for spec in specs:
            if spec.kind == "linear":
                state = trotter_evolve(inst, lin, T, p, order=spec.order, energies=energies)
                row["p"][spec.name] = success_probability(state, inst)
            elif spec.kind == "fixed_center":
                sched = _cached_geodesic(spec.center, spec.sigma, spec.gamma0)
                state = trotter_evolve(inst, sched, T, p, order=spec.order, energies=energies)
                row["p"][spec.name] = success_probability(state, inst)
            else:
                ps = []
                for cand in candidates:
                    sched = _cached_geodesic(cand.position, spec.sigma, spec.gamma0)
                    state = trotter_evolve(inst, sched, T, p, order=spec.order,
                                           energies=energies)
                    ps.append(success_probability(state, inst))
                row["p_candidates"][spec.name] = ps
                best = max(ps)
                row["p"][spec.name] = best
                if 0.0 < best < 1.0:
                    row["p_eff_bound"][spec.name] = effective_probability_bound(
                        best, candidates=len(ps)
                    )
            if spec.baseline:
                baseline_state = state
        if baseline_state is not None and inst.n_spins <= diag_guard:
            dist = eigenstate_distribution(baseline_state, inst)
            row["most_likely_level"] = dist.most_likely
    except Exception as exc:  # noqa: BLE001 - per-instance failures are data
        row["status"] = "error"
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _compare_one_star(args):
    return _compare_one(*args)


@dataclass
class EnsembleReport:
    """Per-instance comparison rows plus recomputable ensemble aggregates."""

    rows: list
    aggregates: list
    config: dict = field(default_factory=dict)

    def recompute_aggregates(self) -> list:
        return compute_aggregates(self.rows, self.config["specs"],
                                  self.config["cutoff"])

    def to_dict(self) -> dict:
        return {"config": self.config, "rows": self.rows, "aggregates": self.aggregates}

    def write_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=1, sort_keys=True)
            f.write("\n")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["T", "spec", "count", "geo_mean", "improvement_vs_baseline"])
            for agg in self.aggregates:
                w.writerow([
                    agg["T"], agg["spec"], agg["count"],
                    "" if agg["geo_mean"] is None else repr(agg["geo_mean"]),
                    "" if agg["improvement_vs_baseline"] is None
                    else repr(agg["improvement_vs_baseline"]),
                ])


def compute_aggregates(rows, spec_names_or_specs, cutoff) -> list:
    """Geometric means per (T, spec) over rows that are hard for the baseline.

    A row enters the sub-ensemble when its baseline probability is strictly
    below the cutoff; rows with errors or nonpositive probabilities are
    excluded and counted.
    """
    names = []
    baseline = None
    for s in spec_names_or_specs:
        if isinstance(s, ScheduleSpec):
            names.append(s.name)
            if s.baseline:
                baseline = s.name
        else:
            names.append(s["name"])
            if s.get("baseline"):
                baseline = s["name"]
    if baseline is None:
        baseline = names[0]
    T_values = sorted({row["T"] for row in rows})
    aggs = []
    for T in T_values:
        subset = [
            r for r in rows
            if r["T"] == T and r["status"] == "ok" and r["p"].get(baseline, 1.0) < cutoff
        ]
        base_vals = [r["p"][baseline] for r in subset if r["p"][baseline] > 0.0]
        base_geo = geometric_mean(base_vals) if base_vals else None
        for name in names:
            vals = [r["p"][name] for r in subset if r["p"].get(name, 0.0) > 0.0]
            geo = geometric_mean(vals) if vals else None
            aggs.append({
                "T": T,
                "spec": name,
                "count": len(vals),
                "excluded": len(subset) - len(vals),
                "geo_mean": geo,
                "improvement_vs_baseline": (
                    None if geo is None or base_geo is None else geo / base_geo
                ),
            })
    return aggs


def run_comparison(
    instances,
    T_list,
    specs=None,
    step: float = 0.125,
    cutoff: float = 0.005,
    max_candidates: int = 3,
    mf_tol: float = 1e-8,
    fl_tol: float = 1e-8,
    jobs: int = 1,
) -> EnsembleReport:
    """Compare schedule families over an ensemble of instances.

    Per (instance, T): the baseline probability, the adaptive pipeline with a
    geodesic schedule per bottleneck candidate (best one reported, worst-case
    effective bound recorded), optional fixed-center schedules, and the most
    likely final level under the baseline. Failures are recorded per row and
    excluded from aggregates.
    """
    specs = default_specs() if specs is None else list(specs)
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise InvalidArgumentError("schedule spec names must be unique")
    tasks = [
        (inst, float(T), specs, step, max_candidates, mf_tol, fl_tol)
        for inst in instances
        for T in T_list
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_compare_one_star, tasks, chunksize=1))
    else:
        rows = [_compare_one(*t) for t in tasks]
    config = {
        "T_list": [float(T) for T in T_list],
        "step": step,
        "cutoff": cutoff,
        "max_candidates": max_candidates,
        "specs": [asdict(s) for s in specs],
    }
    return EnsembleReport(
        rows=rows,
        aggregates=compute_aggregates(rows, specs, cutoff),
        config=config,
    )


def excited_state_histogram(
    instances,
    T: float,
    sched: ScheduleFunction | None = None,
    step: float = 0.125,
    order: int = 2,
) -> dict:
    """Histogram, per system size, of the most likely final level index."""
    sched = linear_schedule() if sched is None else sched
    p = int(round(T / step))
    out: dict = {}
    for inst in instances:
        state = trotter_evolve(inst, sched, T, p, order=order)
        lam = eigenstate_distribution(state, inst).most_likely
        out.setdefault(inst.n_spins, {})
        out[inst.n_spins][lam] = out[inst.n_spins].get(lam, 0) + 1
    return out
