"""Discrete-output learners and exact enumeration of their output channels.

Every learner maps a sample to a parameter vector drawn from a finite
codebook (grid quantization at step 1/m^2 unless stated), so the joint law of
(output, sample) can be enumerated exactly and fed to the information
machinery. Learners are pure given (sample, seed) and consume only the
instance geometry (dimension), never its bias; tie-breaking is lexicographic
everywhere (grid rounding breaks ties toward the smaller value), so outputs
are bit-stable across runs and worker counts.

Channel enumeration has two routes:
  * full: all 2^(d*m) sign patterns (budget-guarded);
  * factorized: for learners whose coordinate t depends only on column t of
    the sample, per-coordinate channels of size 2^m are built and combined.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .sco import HardInstance, Sample, project_ball

FULL_ENUM_BUDGET = 1 << 24


class BudgetExceededError(RuntimeError):
    """Enumeration would exceed the configured budget."""


def default_delta(m: int) -> float:
    """Default quantization step 1/m^2; risk perturbation O(sqrt(d)/m^2)."""
    return 1.0 / (m * m)


def round_half_down(x, delta: float):
    """Round to the grid delta*Z, ties toward the smaller grid value."""
    return np.ceil(np.asarray(x, dtype=float) / delta - 0.5) * delta


def quantize(w: np.ndarray, delta: float) -> np.ndarray:
    """Coordinate-wise grid rounding followed by unit-ball projection."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    return project_ball(round_half_down(w, delta))


# ---------------------------------------------------------------------------
# Learners
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeanLearner:
    """Outputs the sample mean zbar: the exact empirical risk minimizer."""

    kind = "mean"
    deterministic = True
    factorized = True
    mean_based = True

    def fit(self, s: Sample, inst: HardInstance, rng=None) -> np.ndarray:
        return s.mean

    def fit_batch(self, signs: np.ndarray, inst: HardInstance) -> np.ndarray:
        d = signs.shape[2]
        return signs.mean(axis=1, dtype=float) / math.sqrt(d)

    def fit_from_mean(self, zbar: np.ndarray, inst: HardInstance, m: int) -> np.ndarray:
        return np.array(zbar, dtype=float)

    def coord_outputs(self, patterns: np.ndarray, inst: HardInstance) -> np.ndarray:
        return patterns.mean(axis=1, dtype=float) / math.sqrt(inst.d)

    def delta_for(self, m: int) -> float | None:
        return None


@dataclass(frozen=True)
class QuantizedMeanLearner:
    """Sample mean rounded to the delta grid, per coordinate.

    Each coordinate is clipped to [-1/sqrt(d), 1/sqrt(d)] (the range of every
    reachable mean), which keeps the output in the ball without a joint
    projection, so the learner stays exactly coordinate-factorized.
    """

    delta: float | None = None  # None: 1/m^2 at fit time

    kind = "quantized_mean"
    deterministic = True
    factorized = True
    mean_based = True

    def delta_for(self, m: int) -> float:
        return self.delta if self.delta is not None else default_delta(m)

    def _quantize_coords(self, zbar: np.ndarray, d: int, m: int) -> np.ndarray:
        lim = 1.0 / math.sqrt(d)
        return np.clip(round_half_down(zbar, self.delta_for(m)), -lim, lim)

    def fit(self, s: Sample, inst: HardInstance, rng=None) -> np.ndarray:
        return self._quantize_coords(s.mean, s.d, s.m)

    def fit_batch(self, signs: np.ndarray, inst: HardInstance) -> np.ndarray:
        n, m, d = signs.shape
        return self._quantize_coords(signs.mean(axis=1, dtype=float) / math.sqrt(d), d, m)

    def fit_from_mean(self, zbar: np.ndarray, inst: HardInstance, m: int) -> np.ndarray:
        return self._quantize_coords(np.asarray(zbar, dtype=float), inst.d, m)

    def coord_outputs(self, patterns: np.ndarray, inst: HardInstance) -> np.ndarray:
        n, m = patterns.shape
        zbar = patterns.mean(axis=1, dtype=float) / math.sqrt(inst.d)
        return self._quantize_coords(zbar, inst.d, m)


def epsilon_net(d: int, m: int) -> np.ndarray:
    """Axis grid over [-1,1]^d (ceil(sqrt(m))+1 points per axis, so spacing
    <= 2/sqrt(m) and covering radius <= sqrt(d/m)), ball-projected and
    deduplicated, in lexicographic order."""
    if m < 1:
        raise ValueError("m must be >= 1")
    per_axis = math.ceil(math.sqrt(m)) + 1
    axis = np.linspace(-1.0, 1.0, per_axis)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    points = np.stack([g.reshape(-1) for g in grids], axis=1)
    norms = np.linalg.norm(points, axis=1)
    outside = norms > 1.0
    points[outside] /= norms[outside, None]
    return np.unique(points, axis=0)


@dataclass(frozen=True)
class EpsilonNetErm:
    """Empirical risk minimizer restricted to the ball net.

    The empirical risk is ||w - zbar||^2 plus a constant, so the minimizer is
    the net point nearest to zbar; ties go to the lexicographically smallest
    point. Empirical risk exceeds the ball minimum by at most the squared
    covering radius d/m <= sqrt(d/m) for d <= m, and the output entropy is
    capped by log of the net size.
    """

    kind = "epsilon_net_erm"
    deterministic = True
    factorized = False
    mean_based = True

    def net(self, inst: HardInstance, m: int) -> np.ndarray:
        return epsilon_net(inst.d, m)

    def fit(self, s: Sample, inst: HardInstance, rng=None) -> np.ndarray:
        return self.fit_from_mean(s.mean[None, :], inst, s.m)[0]

    def fit_from_mean(self, zbar: np.ndarray, inst: HardInstance, m: int) -> np.ndarray:
        net = self.net(inst, m)
        zbar = np.asarray(zbar, dtype=float)
        diff = zbar[:, None, :] - net[None, :, :]
        idx = np.argmin((diff * diff).sum(axis=2), axis=1)
        return net[idx]

    def fit_batch(self, signs: np.ndarray, inst: HardInstance) -> np.ndarray:
        n, m, d = signs.shape
        zbar = signs.mean(axis=1, dtype=float) / math.sqrt(d)
        return self.fit_from_mean(zbar, inst, m)

    def delta_for(self, m: int) -> float | None:
        return None


@dataclass(frozen=True)
class SgdLearner:
    """One projected pass with step 1/(2t), iterate averaging, then quantization.

    The per-point gradient of the squared-distance loss is 2(w - z_t), so the
    update is w <- (1 - 1/t) w + z_t / t and every iterate stays a convex
    combination of data points (inside the ball). The average of the iterates
    is rounded to the 1/m^2 grid for a finite codebook.
    """

    delta: float | None = None

    kind = "sgd"
    deterministic = True
    factorized = False
    mean_based = False

    def delta_for(self, m: int) -> float:
        return self.delta if self.delta is not None else default_delta(m)

    def fit(self, s: Sample, inst: HardInstance, rng=None) -> np.ndarray:
        return self.fit_batch(s.signs[None, :, :], inst)[0]

    def fit_batch(self, signs: np.ndarray, inst: HardInstance) -> np.ndarray:
        n, m, d = signs.shape
        points = signs.astype(float) / math.sqrt(d)
        w = np.zeros((n, d))
        acc = np.zeros((n, d))
        for t in range(1, m + 1):
            w = (1.0 - 1.0 / t) * w + points[:, t - 1, :] / t
            norms = np.linalg.norm(w, axis=1)
            over = norms > 1.0
            if np.any(over):
                w[over] /= norms[over, None]
            acc += w
        avg = acc / m
        out = round_half_down(avg, self.delta_for(m))
        norms = np.linalg.norm(out, axis=1)
        over = norms > 1.0
        if np.any(over):
            out[over] /= norms[over, None]
        return out


@dataclass(frozen=True)
class RegularizedErm:
    """Exact minimizer zbar/(1+lam) of the ridge-regularized empirical risk,
    quantized at 1/m^2. lam=0 recovers the mean learner up to quantization."""

    lam: float = 0.0
    delta: float | None = None

    kind = "regularized_erm"
    deterministic = True
    factorized = False
    mean_based = True

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")

    def delta_for(self, m: int) -> float:
        return self.delta if self.delta is not None else default_delta(m)

    def fit(self, s: Sample, inst: HardInstance, rng=None) -> np.ndarray:
        return quantize(s.mean / (1.0 + self.lam), self.delta_for(s.m))

    def fit_from_mean(self, zbar: np.ndarray, inst: HardInstance, m: int) -> np.ndarray:
        zbar = np.asarray(zbar, dtype=float) / (1.0 + self.lam)
        out = round_half_down(zbar, self.delta_for(m))
        norms = np.linalg.norm(out, axis=1)
        over = norms > 1.0
        if np.any(over):
            out[over] /= norms[over, None]
        return out

    def fit_batch(self, signs: np.ndarray, inst: HardInstance) -> np.ndarray:
        n, m, d = signs.shape
        zbar = signs.mean(axis=1, dtype=float) / math.sqrt(d)
        return self.fit_from_mean(zbar, inst, m)


@dataclass(frozen=True)
class SubsampleLearner:
    """Applies the base learner to the first k points only."""

    k: int
    base: object

    deterministic = True
    mean_based = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not self.base.deterministic:
            raise ValueError("subsample wraps deterministic learners")

    @property
    def kind(self) -> str:
        return f"subsample[{self.base.kind}, k={self.k}]"

    @property
    def factorized(self) -> bool:
        return self.base.factorized

    def _check(self, m: int):
        if not 1 <= self.k <= m:
            raise ValueError(f"k={self.k} out of range for m={m}")

    def fit(self, s: Sample, inst: HardInstance, rng=None) -> np.ndarray:
        self._check(s.m)
        return self.base.fit(Sample(s.points[: self.k]), inst, rng)

    def fit_batch(self, signs: np.ndarray, inst: HardInstance) -> np.ndarray:
        self._check(signs.shape[1])
        return self.base.fit_batch(signs[:, : self.k, :], inst)

    def coord_outputs(self, patterns: np.ndarray, inst: HardInstance) -> np.ndarray:
        self._check(patterns.shape[1])
        return self.base.coord_outputs(patterns[:, : self.k], inst)

    def delta_for(self, m: int) -> float | None:
        return self.base.delta_for(self.k)


@dataclass(frozen=True)
class RandomizedResponse:
    """With probability rho, replace the base answer by a uniform codebook
    element; rho=0 is the base learner, rho=1 carries zero information."""

    base: object
    rho: float

    deterministic = False
    factorized = False
    mean_based = False

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must be in [0, 1]")
        if not self.base.deterministic:
            raise ValueError("randomized response wraps deterministic learners")

    @property
    def kind(self) -> str:
        return f"randomized_response[{self.base.kind}, rho={self.rho}]"

    def fit(self, s: Sample, inst: HardInstance, rng=None) -> np.ndarray:
        if rng is None:
            raise ValueError("randomized response needs an rng")
        if rng.random() < self.rho:
            codebook = reachable_outputs(self.base, inst, s.m)
            return codebook[rng.integers(codebook.shape[0])]
        return self.base.fit(s, inst, rng)

    def delta_for(self, m: int) -> float | None:
        return self.base.delta_for(m)


def make_learner(kind: str, **params):
    """Config-facing factory. Wrapper kinds take base=<kind> plus base params."""
    kind = kind.strip().lower()
    if kind == "mean":
        return MeanLearner()
    if kind == "quantized_mean":
        return QuantizedMeanLearner(delta=params.get("delta"))
    if kind == "epsilon_net_erm":
        return EpsilonNetErm()
    if kind == "sgd":
        return SgdLearner(delta=params.get("delta"))
    if kind == "regularized_erm":
        return RegularizedErm(lam=params.get("lam", 0.0), delta=params.get("delta"))
    if kind == "subsample":
        base = make_learner(params.pop("base", "mean"), **{k: v for k, v in params.items() if k != "k"})
        return SubsampleLearner(k=int(params["k"]), base=base)
    if kind == "randomized_response":
        base = make_learner(params.pop("base", "mean"),
                            **{k: v for k, v in params.items() if k != "rho"})
        return RandomizedResponse(base=base, rho=float(params["rho"]))
    raise ValueError(f"unknown learner kind: {kind!r}")


# ---------------------------------------------------------------------------
# Exact channels
# ---------------------------------------------------------------------------


def enumerate_sign_space(m: int, d: int, budget: int = FULL_ENUM_BUDGET) -> np.ndarray:
    """All 2^(m*d) sign patterns as an (n, m, d) int8 tensor."""
    cells = m * d
    n = 1 << cells
    if n > budget:
        raise BudgetExceededError(f"2^{cells} sign patterns exceed budget {budget}")
    idx = np.arange(n, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(cells, dtype=np.int64)[None, :]) & 1
    return (2 * bits - 1).astype(np.int8).reshape(n, m, d)


def sign_space_probs(inst: HardInstance, signs: np.ndarray) -> np.ndarray:
    """Product-measure probability of each sign pattern under D(p)^m."""
    q = (1.0 + inst.p) / 2.0
    counts = (signs > 0).sum(axis=1)  # (n, d) plus-counts per coordinate
    m = signs.shape[1]
    return np.prod(q[None, :] ** counts * (1.0 - q)[None, :] ** (m - counts), axis=1)


@dataclass(frozen=True)
class Channel:
    """Exact joint law of (sample, learner output) over an enumerated space.

    ``cond`` is None for deterministic learners, in which case
    ``output_index`` holds the codebook row per sample; otherwise ``cond``
    carries one conditional pmf row per sample.
    """

    signs: np.ndarray = field(repr=False)          # (n, m, d) int8
    sample_probs: np.ndarray = field(repr=False)   # (n,)
    codebook: np.ndarray = field(repr=False)       # (K, d) lexicographic
    output_index: np.ndarray | None = field(repr=False, default=None)
    cond: np.ndarray | None = field(repr=False, default=None)

    @property
    def n_samples(self) -> int:
        return self.signs.shape[0]

    @property
    def deterministic(self) -> bool:
        return self.cond is None

    def output_marginal(self) -> np.ndarray:
        if self.deterministic:
            marg = np.zeros(self.codebook.shape[0])
            np.add.at(marg, self.output_index, self.sample_probs)
            return marg
        return self.sample_probs @ self.cond

    def mutual_information(self) -> float:
        """I(output; sample) in nats: H(output) - E_S[H(output | sample)]."""
        marg = self.output_marginal()
        h_out = float(-(marg[marg > 0] * np.log(marg[marg > 0])).sum())
        if self.deterministic:
            return max(0.0, h_out)
        rows = self.cond
        with np.errstate(divide="ignore", invalid="ignore"):
            row_ent = -np.where(rows > 0, rows * np.log(rows), 0.0).sum(axis=1)
        return max(0.0, h_out - float(self.sample_probs @ row_ent))

    def output_entropy(self) -> float:
        marg = self.output_marginal()
        return float(-(marg[marg > 0] * np.log(marg[marg > 0])).sum())

    def expected_generalization_gap(self, inst: HardInstance) -> float:
        """E[L_D(w_S) - L_S(w_S)], exact over the enumeration.

        The quadratic risks telescope: L_D(w) - L_S(w, S) = 2 w . (zbar - w*),
        so the constant-output gap is exactly zero in floating point too.
        """
        d = self.signs.shape[2]
        zbar = self.signs.mean(axis=1, dtype=float) / math.sqrt(d)  # (n, d)
        drift = zbar - inst.w_star
        if self.deterministic:
            w = self.codebook[self.output_index]
            return float(self.sample_probs @ (2.0 * (w * drift).sum(axis=1)))
        gap = 2.0 * drift @ self.codebook.T  # (n, K)
        return float(self.sample_probs @ (self.cond * gap).sum(axis=1))

    def expected_excess_risk(self, inst: HardInstance) -> float:
        """E[Delta_D(w_S)] = E||w_S - w*||^2, exact over the enumeration."""
        sub = ((self.codebook - inst.w_star) ** 2).sum(axis=1)  # (K,)
        if self.deterministic:
            return float(self.sample_probs @ sub[self.output_index])
        return float(self.sample_probs @ (self.cond @ sub))

    def to_csv(self, path) -> None:
        """Rows (sample_index, output_index, probability): conditional law."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample_index", "output_index", "probability"])
            if self.deterministic:
                for i, k in enumerate(self.output_index):
                    writer.writerow([i, int(k), "1"])
            else:
                for i in range(self.n_samples):
                    for k in np.nonzero(self.cond[i] > 0)[0]:
                        writer.writerow([i, int(k), f"{self.cond[i, k]:.17g}"])


def exact_channel(learner, inst: HardInstance, m: int,
                  budget: int = FULL_ENUM_BUDGET) -> Channel:
    """Exhaustive joint law of (sample, output) over supp(D(p)^m)."""
    signs = enumerate_sign_space(m, inst.d, budget)
    probs = sign_space_probs(inst, signs)
    if isinstance(learner, RandomizedResponse):
        base_outputs = learner.base.fit_batch(signs, inst)
        codebook = reachable_outputs(learner.base, inst, m, budget)
        base_idx = _index_in_codebook(base_outputs, codebook)
        n, big_k = signs.shape[0], codebook.shape[0]
        cond = np.full((n, big_k), learner.rho / big_k)
        cond[np.arange(n), base_idx] += 1.0 - learner.rho
        return Channel(signs, probs, codebook, cond=cond)
    outputs = learner.fit_batch(signs, inst)
    codebook, idx = np.unique(outputs, axis=0, return_inverse=True)
    return Channel(signs, probs, codebook, output_index=idx.astype(np.int64))


def _index_in_codebook(outputs: np.ndarray, codebook: np.ndarray) -> np.ndarray:
    key = {tuple(row): i for i, row in enumerate(codebook)}
    try:
        return np.array([key[tuple(row)] for row in outputs], dtype=np.int64)
    except KeyError as exc:
        raise ValueError("output outside the declared codebook") from exc


def reachable_outputs(learner, inst: HardInstance, m: int,
                      budget: int = FULL_ENUM_BUDGET) -> np.ndarray:
    """The learner's reachable codebook over supp(D(p)^m), lexicographic.

    Support is all sign patterns for any valid bias, so the set is
    p-independent. Factorized learners use per-coordinate level products;
    others enumerate the sample space.
    """
    if isinstance(learner, RandomizedResponse):
        return reachable_outputs(learner.base, inst, m, budget)
    if learner.factorized:
        patterns = enumerate_sign_space(m, 1, budget).reshape(-1, m)
        levels = np.unique(learner.coord_outputs(patterns, inst))
        if levels.shape[0] ** inst.d > budget:
            raise BudgetExceededError("codebook product grid exceeds budget")
        grids = np.meshgrid(*([levels] * inst.d), indexing="ij")
        return np.unique(np.stack([g.reshape(-1) for g in grids], axis=1), axis=0)
    if isinstance(learner, EpsilonNetErm):
        return learner.net(inst, m)
    signs = enumerate_sign_space(m, inst.d, budget)
    return np.unique(learner.fit_batch(signs, inst), axis=0)


# ---------------------------------------------------------------------------
# Factorized (per-coordinate) channels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoordinateChannel:
    """Exact law of (column pattern, output coordinate) for one coordinate."""

    patterns: np.ndarray = field(repr=False)  # (2^m, m) int8
    probs: np.ndarray = field(repr=False)     # (2^m,)
    values: np.ndarray = field(repr=False)    # (2^m,) deterministic outputs

    def mutual_information(self) -> float:
        _, inverse = np.unique(self.values, return_inverse=True)
        marg = np.zeros(inverse.max() + 1)
        np.add.at(marg, inverse, self.probs)
        marg = marg[marg > 0]
        return float(-(marg * np.log(marg)).sum())

    def mi_value_vs_sum(self) -> float:
        """I(output coordinate; column sign sum)."""
        sums = self.patterns.sum(axis=1, dtype=np.int64)
        return aggregated_mi(sums, self.values, self.probs)


def aggregated_mi(xs, ys, probs) -> float:
    """MI of two discrete variables given per-atom labels and probabilities."""
    _, xi = np.unique(np.asarray(xs), return_inverse=True)
    ys = np.asarray(ys)
    if ys.ndim == 1:
        _, yi = np.unique(ys, return_inverse=True)
    else:
        _, yi = np.unique(ys, axis=0, return_inverse=True)
    table = np.zeros((xi.max() + 1, yi.max() + 1))
    np.add.at(table, (xi, yi), probs)
    px = table.sum(axis=1)
    py = table.sum(axis=0)
    mask = table > 0
    outer = np.outer(px, py)
    return max(0.0, float((table[mask] * np.log(table[mask] / outer[mask])).sum()))


def coordinate_channels(learner, inst: HardInstance, m: int) -> list[CoordinateChannel]:
    if not learner.factorized:
        raise ValueError(f"{learner.kind} is not coordinate-factorized")
    patterns = enumerate_sign_space(m, 1).reshape(-1, m)
    values = learner.coord_outputs(patterns, inst)
    counts = (patterns > 0).sum(axis=1)
    out = []
    for t in range(inst.d):
        q = (1.0 + inst.p[t]) / 2.0
        probs = q ** counts * (1.0 - q) ** (m - counts)
        out.append(CoordinateChannel(patterns, probs, values))
    return out


def exact_mutual_information(learner, inst: HardInstance, m: int,
                             budget: int = FULL_ENUM_BUDGET) -> float:
    """I(w_S; S) in nats, via the factorized fast path when available.

    For a coordinate-factorized learner the pairs (w_S(t), S column t) are
    independent across t, so the per-coordinate MIs sum to the exact joint MI.
    """
    if getattr(learner, "factorized", False):
        return float(sum(c.mutual_information() for c in coordinate_channels(learner, inst, m)))
    if (1 << (m * inst.d)) <= budget:
        return exact_channel(learner, inst, m, budget).mutual_information()
    raise BudgetExceededError(
        f"2^{m * inst.d} samples exceed budget and {learner.kind} is not factorized")
