"""Exact information theory over enumerated finite supports.

Everything here operates on explicit probability tables: entropy, KL
divergence, total variation, mutual information (two and three variables),
optimal couplings, and the Pinsker slack. All information quantities are in
nats; use :func:`nats_to_bits` to convert. Probabilities are 64-bit floats
with structural tolerance 1e-12 and identity tolerance 1e-10.

Conventions:
  * 0 * log 0 := 0 everywhere.
  * KL divergence with an absolute-continuity violation returns math.inf
    (a distinguished value, not an exception), so property sweeps stay total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

STRUCT_TOL = 1e-12
IDENTITY_TOL = 1e-10

__all__ = [
    "FinitePmf",
    "JointPmf",
    "entropy",
    "kl_divergence",
    "total_variation",
    "mutual_information",
    "conditional_mutual_information",
    "optimal_coupling",
    "pinsker_slack",
    "nats_to_bits",
    "apply_map_x",
    "PmfValidationError",
]


class PmfValidationError(ValueError):
    """Raised when a pmf or joint table violates its structural invariants."""


def _as_prob_array(probs) -> np.ndarray:
    arr = np.asarray(probs, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise PmfValidationError("probabilities must be finite")
    if np.any(arr < -STRUCT_TOL):
        raise PmfValidationError(f"negative probability: min={arr.min()}")
    arr = np.clip(arr, 0.0, None)
    total = arr.sum()
    if abs(total - 1.0) > STRUCT_TOL:
        raise PmfValidationError(f"probabilities sum to {total!r}, not 1")
    return arr


@dataclass(frozen=True)
class FinitePmf:
    """Probability mass function over an indexed finite outcome alphabet."""

    outcomes: tuple
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        outcomes = tuple(self.outcomes)
        if len(set(outcomes)) != len(outcomes):
            raise PmfValidationError("outcomes must be distinct")
        probs = _as_prob_array(self.probs)
        if len(outcomes) != probs.shape[0] or probs.ndim != 1:
            raise PmfValidationError("outcomes and probs must have equal length")
        probs.setflags(write=False)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "probs", probs)

    def __len__(self) -> int:
        return len(self.outcomes)

    @classmethod
    def uniform(cls, outcomes) -> "FinitePmf":
        outcomes = tuple(outcomes)
        n = len(outcomes)
        return cls(outcomes, np.full(n, 1.0 / n))

    @classmethod
    def point_mass(cls, outcome, outcomes) -> "FinitePmf":
        outcomes = tuple(outcomes)
        probs = np.zeros(len(outcomes))
        probs[outcomes.index(outcome)] = 1.0
        return cls(outcomes, probs)

    @classmethod
    def bernoulli(cls, q: float) -> "FinitePmf":
        """Pmf over outcomes (0, 1) with P(1) = q."""
        return cls((0, 1), np.array([1.0 - q, q]))

    def to_debug_text(self) -> str:
        """One ``outcome<TAB>prob`` line per entry, sorted by outcome id."""
        order = sorted(range(len(self.outcomes)), key=lambda i: repr(self.outcomes[i]))
        return "\n".join(f"{self.outcomes[i]}\t{self.probs[i]:.17g}" for i in order)


@dataclass(frozen=True)
class JointPmf:
    """Joint pmf over a product of two or three finite alphabets.

    ``table`` has one axis per alphabet; entry ``table[i, j(, k)]`` is the
    probability of the outcome tuple. Marginals and conditionals follow.
    """

    alphabets: tuple
    table: np.ndarray = field(repr=False)

    def __post_init__(self):
        alphabets = tuple(tuple(a) for a in self.alphabets)
        table = np.asarray(self.table, dtype=float)
        if table.ndim != len(alphabets) or table.ndim not in (2, 3):
            raise PmfValidationError("table arity must match the 2 or 3 alphabets")
        for ax, alpha in enumerate(alphabets):
            if len(set(alpha)) != len(alpha):
                raise PmfValidationError(f"axis {ax} outcomes must be distinct")
            if table.shape[ax] != len(alpha):
                raise PmfValidationError(f"axis {ax} length mismatch")
        flat = _as_prob_array(table.reshape(-1))
        table = flat.reshape(table.shape)
        table.setflags(write=False)
        object.__setattr__(self, "alphabets", alphabets)
        object.__setattr__(self, "table", table)

    @classmethod
    def from_table(cls, table) -> "JointPmf":
        """Joint over integer alphabets 0..n-1 per axis."""
        table = np.asarray(table, dtype=float)
        return cls(tuple(tuple(range(n)) for n in table.shape), table)

    def marginal(self, axis: int) -> FinitePmf:
        axes = tuple(a for a in range(self.table.ndim) if a != axis)
        return FinitePmf(self.alphabets[axis], self.table.sum(axis=axes))

    def swap(self) -> "JointPmf":
        """Transpose a two-variable joint."""
        if self.table.ndim != 2:
            raise PmfValidationError("swap applies to two-variable joints")
        return JointPmf((self.alphabets[1], self.alphabets[0]), self.table.T)


def nats_to_bits(x: float) -> float:
    return x / math.log(2.0)


def entropy(p: FinitePmf) -> float:
    """Shannon entropy in nats; 0 <= H <= log(support size)."""
    q = p.probs[p.probs > 0.0]
    return float(-(q * np.log(q)).sum())


def kl_divergence(p1: FinitePmf, p2: FinitePmf) -> float:
    """KL(p1 || p2) in nats over a shared alphabet.

    Returns math.inf when p1 places mass where p2 has none.
    """
    if p1.outcomes != p2.outcomes:
        raise PmfValidationError("KL divergence needs a shared alphabet")
    a, b = p1.probs, p2.probs
    support = a > 0.0
    if np.any(b[support] == 0.0):
        return math.inf
    return float((a[support] * np.log(a[support] / b[support])).sum())


def total_variation(p1: FinitePmf, p2: FinitePmf) -> float:
    """Half the L1 distance; equals the sup over events of the probability gap."""
    if p1.outcomes != p2.outcomes:
        raise PmfValidationError("total variation needs a shared alphabet")
    return float(0.5 * np.abs(p1.probs - p2.probs).sum())


def _mi_from_table(table: np.ndarray) -> float:
    px = table.sum(axis=1)
    py = table.sum(axis=0)
    outer = np.outer(px, py)
    mask = table > 0.0
    return float((table[mask] * np.log(table[mask] / outer[mask])).sum())


def mutual_information(j: JointPmf) -> float:
    """I(X;Y) in nats via the double sum over the joint table.

    Agrees with the expectation-of-KL form E_Y[KL(P_{X|Y} || P_X)] to 1e-10;
    symmetric in the two axes; bounded by min(H(X), H(Y)).
    """
    if j.table.ndim != 2:
        raise PmfValidationError("mutual_information takes a two-variable joint")
    return max(0.0, _mi_from_table(j.table))


def conditional_mutual_information(j: JointPmf) -> float:
    """I(X;Y|Z) = sum_z P(z) * I(X;Y | Z=z) for a three-variable joint."""
    if j.table.ndim != 3:
        raise PmfValidationError("conditional MI takes a three-variable joint")
    total = 0.0
    for k in range(j.table.shape[2]):
        pz = float(j.table[:, :, k].sum())
        if pz <= 0.0:
            continue
        total += pz * _mi_from_table(j.table[:, :, k] / pz)
    return max(0.0, total)


def optimal_coupling(p1: FinitePmf, p2: FinitePmf) -> JointPmf:
    """A coupling of (p1, p2) attaining P(X1 != X2) = TV(p1, p2).

    Diagonal mass min(p1, p2); the residual is the normalized outer product
    of the positive and negative parts of p1 - p2.
    """
    if p1.outcomes != p2.outcomes:
        raise PmfValidationError("coupling needs a shared alphabet")
    a, b = p1.probs, p2.probs
    n = len(a)
    table = np.zeros((n, n))
    np.fill_diagonal(table, np.minimum(a, b))
    diff = a - b
    tv = 0.5 * np.abs(diff).sum()
    if tv > 0.0:
        pos = np.clip(diff, 0.0, None)
        neg = np.clip(-diff, 0.0, None)
        table += np.outer(pos, neg) / tv
    return JointPmf((p1.outcomes, p2.outcomes), table)


def coupling_disagreement(j: JointPmf) -> float:
    """P(X1 != X2) under a coupling represented as a two-variable joint."""
    if j.table.ndim != 2 or j.table.shape[0] != j.table.shape[1]:
        raise PmfValidationError("disagreement needs a square coupling table")
    return float(j.table.sum() - np.trace(j.table))


def pinsker_slack(p1: FinitePmf, p2: FinitePmf) -> float:
    """sqrt(KL(p1||p2)/2) - TV(p1, p2); nonnegative up to 1e-12.

    Infinite divergence yields +inf slack.
    """
    kl = kl_divergence(p1, p2)
    if math.isinf(kl):
        return math.inf
    return math.sqrt(max(kl, 0.0) / 2.0) - total_variation(p1, p2)


def apply_map_x(j: JointPmf, g) -> JointPmf:
    """Push a deterministic map on the X alphabet through a two-variable joint.

    Rows with equal g(x) merge; useful for data-processing comparisons.
    """
    if j.table.ndim != 2:
        raise PmfValidationError("apply_map_x takes a two-variable joint")
    images = []
    index = {}
    rows = []
    for i, x in enumerate(j.alphabets[0]):
        gx = g(x)
        if gx not in index:
            index[gx] = len(images)
            images.append(gx)
            rows.append(np.array(j.table[i]))
        else:
            rows[index[gx]] = rows[index[gx]] + j.table[i]
    return JointPmf((tuple(images), j.alphabets[1]), np.stack(rows))
