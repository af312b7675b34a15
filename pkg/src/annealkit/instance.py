"""Ising problem instances: generation, parsing, serialization, brute force.

An instance is the pair (J, h) plus a constant energy offset, with the
classical energy convention

    E(a) = offset - sum_i [h_i + sum_{j>i} J_ij a_j] a_i,   a_i = +-1,

so the ground state of the instance is the optimal solution of the encoded
combinatorial problem. MAX 2-SAT formulas map onto instances whose energy
counts violated clauses exactly (truth convention: variable true <-> spin -1).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, ParseError, SizeGuardError

__all__ = [
    "IsingInstance",
    "ClauseSet",
    "generate_sk",
    "parse_max2sat",
    "map_clauses_to_ising",
    "energy",
    "brute_force_optimum",
    "assignment_energies",
    "save_instance",
    "load_instance",
]


@dataclass(eq=False)
class IsingInstance:
    """Couplings, fields and offset defining one Ising-encoded problem.

    ``J`` is the full symmetric coupling matrix with zero diagonal; ``h`` the
    local fields. Energies are dimensionless (transverse-field units).
    """

    n_spins: int
    J: np.ndarray
    h: np.ndarray
    offset: float = 0.0
    label: str | None = None
    seed: int | None = None

    def __post_init__(self):
        self.J = np.asarray(self.J, dtype=np.float64)
        self.h = np.asarray(self.h, dtype=np.float64)
        if self.n_spins < 1:
            raise InvalidArgumentError("n_spins must be >= 1")
        if self.J.shape != (self.n_spins, self.n_spins):
            raise InvalidArgumentError(
                f"J must be {self.n_spins}x{self.n_spins}, got {self.J.shape}"
            )
        if self.h.shape != (self.n_spins,):
            raise InvalidArgumentError(
                f"h must have length {self.n_spins}, got {self.h.shape}"
            )
        if not (np.isfinite(self.J).all() and np.isfinite(self.h).all()):
            raise InvalidArgumentError("couplings and fields must be finite")
        if np.any(np.diag(self.J) != 0.0):
            raise InvalidArgumentError("J must have zero diagonal")
        if not np.array_equal(self.J, self.J.T):
            raise InvalidArgumentError("J must be symmetric")

    def to_dict(self) -> dict:
        iu, ju = np.triu_indices(self.n_spins, k=1)
        vals = self.J[iu, ju]
        nz = vals != 0.0
        return {
            "n": self.n_spins,
            "h": self.h.tolist(),
            "J": [[int(i), int(j), float(v)] for i, j, v in zip(iu[nz], ju[nz], vals[nz])],
            "offset": float(self.offset),
            "label": self.label,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IsingInstance":
        n = int(d["n"])
        J = np.zeros((n, n))
        for i, j, v in d.get("J", []):
            if not (0 <= i < j < n):
                raise InvalidArgumentError(f"coupling index ({i},{j}) out of range for n={n}")
            J[i, j] = J[j, i] = v
        return cls(
            n_spins=n,
            J=J,
            h=np.asarray(d["h"], dtype=np.float64),
            offset=float(d.get("offset", 0.0)),
            label=d.get("label"),
            seed=d.get("seed"),
        )


@dataclass
class ClauseSet:
    """A 2-SAT formula: clauses of two literals, literal = (1-based var, negated)."""

    n_vars: int
    clauses: list = field(default_factory=list)

    def __post_init__(self):
        if self.n_vars < 1:
            raise InvalidArgumentError("n_vars must be >= 1")
        for c in self.clauses:
            if len(c) != 2:
                raise InvalidArgumentError("every clause must have exactly two literals")
            for var, neg in c:
                if not 1 <= var <= self.n_vars:
                    raise InvalidArgumentError(f"variable {var} out of range [1, {self.n_vars}]")
                if not isinstance(neg, bool):
                    raise InvalidArgumentError("negation flag must be a bool")


def generate_sk(n: int, seed: int) -> IsingInstance:
    """Random fully-connected instance: h_i and J_ij (i<j) i.i.d. standard normal."""
    if n < 2:
        raise InvalidArgumentError("generate_sk requires n >= 2")
    rng = np.random.default_rng(seed)
    h = rng.standard_normal(n)
    J = np.zeros((n, n))
    iu, ju = np.triu_indices(n, k=1)
    vals = rng.standard_normal(iu.size)
    J[iu, ju] = vals
    J[ju, iu] = vals
    return IsingInstance(n_spins=n, J=J, h=h, label=f"sk-n{n}-s{seed}", seed=seed)


def parse_max2sat(text: str) -> ClauseSet:
    """Parse the 2-SAT text format.

    Header ``p max2sat <n_vars> <n_clauses>``, then one clause per line as two
    nonzero integers (negative = negated) terminated by ``0``. Lines starting
    with ``c`` and blank lines are ignored.
    """
    n_vars = None
    n_clauses = None
    clauses = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            if n_vars is not None:
                raise ParseError("duplicate header", line=lineno)
            parts = line.split()
            if len(parts) != 4 or parts[1] != "max2sat":
                raise ParseError(f"bad header {line!r}", line=lineno)
            try:
                n_vars, n_clauses = int(parts[2]), int(parts[3])
            except ValueError:
                raise ParseError(f"bad header counts in {line!r}", line=lineno) from None
            if n_vars < 1 or n_clauses < 0:
                raise ParseError("header counts must be positive", line=lineno)
            continue
        if n_vars is None:
            raise ParseError("clause before header", line=lineno)
        try:
            nums = [int(tok) for tok in line.split()]
        except ValueError:
            raise ParseError(f"non-integer token in {line!r}", line=lineno) from None
        if len(nums) != 3 or nums[-1] != 0:
            raise ParseError("clause must be two nonzero integers terminated by 0", line=lineno)
        lits = []
        for v in nums[:2]:
            if v == 0:
                raise ParseError("literal must be nonzero", line=lineno)
            if abs(v) > n_vars:
                raise ParseError(f"variable {abs(v)} exceeds n_vars={n_vars}", line=lineno)
            lits.append((abs(v), v < 0))
        clauses.append((lits[0], lits[1]))
    if n_vars is None:
        raise ParseError("missing header", line=1)
    if len(clauses) != n_clauses:
        raise ParseError(
            f"header declared {n_clauses} clauses but found {len(clauses)}",
            line=len(text.splitlines()),
        )
    return ClauseSet(n_vars=n_vars, clauses=clauses)


def map_clauses_to_ising(cs: ClauseSet) -> IsingInstance:
    """Map a 2-SAT formula to an instance whose energy counts violated clauses.

    Truth convention: variable true <-> spin -1. Each clause contributes the
    projector onto its violating assignment, re-expressed in the (J, h, offset)
    sign convention; coefficients are exact multiples of 1/4, so energies are
    exact small integers in float arithmetic.
    """
    n = cs.n_vars
    h = np.zeros(n)
    J = np.zeros((n, n))
    offset = 0.0
    for (v1, neg1), (v2, neg2) in cs.clauses:
        e1 = -1.0 if neg1 else 1.0
        e2 = -1.0 if neg2 else 1.0
        a, b = v1 - 1, v2 - 1
        offset += 0.25
        h[a] -= 0.25 * e1
        h[b] -= 0.25 * e2
        if a == b:
            offset += 0.25 * e1 * e2
        else:
            J[a, b] -= 0.25 * e1 * e2
            J[b, a] -= 0.25 * e1 * e2
    return IsingInstance(n_spins=n, J=J, h=h, offset=offset)


def _check_assignment(inst: IsingInstance, a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (inst.n_spins,):
        raise InvalidArgumentError(
            f"assignment length {a.shape} does not match n_spins={inst.n_spins}"
        )
    if not np.all(np.abs(a) == 1.0):
        raise InvalidArgumentError("assignment entries must be exactly +1 or -1")
    return a


def energy(inst: IsingInstance, a) -> float:
    """Classical energy of an assignment, offset included."""
    a = _check_assignment(inst, a)
    return float(inst.offset - inst.h @ a - 0.5 * a @ (inst.J @ a))


def assignment_energies(inst: IsingInstance, max_n: int = 24) -> np.ndarray:
    """Energies of all 2^n assignments, indexed by bit pattern (bit i of the
    index is spin i, bit 0 <-> spin +1, bit 1 <-> spin -1)."""
    n = inst.n_spins
    if n > max_n:
        raise SizeGuardError(f"n={n} exceeds enumeration guard {max_n}")
    idx = np.arange(1 << n, dtype=np.int64)
    spins = [1.0 - 2.0 * ((idx >> i) & 1) for i in range(n)]
    e = np.full(1 << n, inst.offset)
    for i in range(n):
        e -= inst.h[i] * spins[i]
    iu, ju = np.nonzero(np.triu(inst.J, k=1))
    for i, j in zip(iu, ju):
        e -= inst.J[i, j] * spins[i] * spins[j]
    return e


def brute_force_optimum(inst: IsingInstance, max_n: int = 24):
    """Globally minimal assignment and its energy by exhaustive enumeration.

    Ties are broken by the lexicographically smallest spin vector with
    +1 ordered before -1.
    """
    e = assignment_energies(inst, max_n=max_n)
    emin = e.min()
    ties = np.flatnonzero(e == emin)
    # bit i of the index is spin i; lexicographic order over spin vectors
    # (+1 < -1) is order over the bit sequence (bit0, bit1, ...).
    n = inst.n_spins
    best = min(ties, key=lambda b: tuple((int(b) >> i) & 1 for i in range(n)))
    a = 1.0 - 2.0 * ((int(best) >> np.arange(n)) & 1)
    return a.astype(np.float64), float(emin)


def save_instance(inst: IsingInstance, path) -> None:
    with open(path, "w") as f:
        json.dump(inst.to_dict(), f, indent=1, sort_keys=True)
        f.write("\n")


def load_instance(path) -> IsingInstance:
    with open(path) as f:
        return IsingInstance.from_dict(json.load(f))
