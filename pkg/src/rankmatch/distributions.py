"""Binned score distributions and rank-likelihood tables.

Everything downstream of this module works on binned (histogram) densities:
a score axis is a uniform grid of bins, a distribution is the probability
mass per bin, and all likelihood tables are log densities on that grid.
The main products are:

* ``order_statistic_table`` -- for a cohort of ``n`` i.i.d. draws, the
  density of the k-th smallest draw, for every k, as an ``n x bins`` table
  of log densities.  Rows are exact bin probabilities (binomial tail
  differences at the bin edges), evaluated in log space with log-factorial
  tables so large cohorts do not overflow.
* ``build_rank_likelihood_model`` -- Monte Carlo tables for the pair
  (instantaneous score, delayed score) conditioned on the pair's rank
  within a cohort, plus the expected log joint density used when the
  delayed score has not been revealed yet.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

# Log densities are floored here so that zero-mass bins stay representable
# and edge weights remain finite.
LOG_FLOOR = -700.0

# Bin probabilities smaller than this are treated as exact zeros: they sit
# below the cancellation noise of the binomial tail differences.
_PROB_FLOOR = 1e-13

_MIN_COHORTS = 10_000
_SHARD_COHORTS = 2048


@dataclass(frozen=True)
class BinAxis:
    """Uniform bin grid: bin b covers [lower + b*width, lower + (b+1)*width)."""

    lower: float
    width: float
    count: int

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("bin width must be positive")
        if self.count < 1:
            raise ValueError("axis needs at least one bin")

    @property
    def upper(self) -> float:
        return self.lower + self.width * self.count

    def centers(self) -> np.ndarray:
        return self.lower + self.width * (np.arange(self.count) + 0.5)

    def edges(self) -> np.ndarray:
        return self.lower + self.width * np.arange(self.count + 1)

    def index_flags(self, values) -> tuple[np.ndarray, np.ndarray]:
        """Bin indices plus a boolean mask of values that had to be clamped."""
        v = np.asarray(values, dtype=float)
        raw = np.floor((v - self.lower) / self.width).astype(np.int64)
        out_of_range = (raw < 0) | (raw >= self.count)
        return np.clip(raw, 0, self.count - 1), out_of_range

    def index(self, values) -> tuple[np.ndarray, int]:
        """Map values to bin indices, clamping out-of-range values.

        Returns (indices, number of clamped values).
        """
        idx, out_of_range = self.index_flags(values)
        return idx, int(np.count_nonzero(out_of_range))


def axis_for_step(lower: float, upper: float, step: float) -> BinAxis:
    """Axis whose bin centers are the multiples of ``step`` in [lower, upper]."""
    lo = float(np.ceil(lower / step) * step)
    hi = float(np.floor(upper / step) * step)
    count = int(round((hi - lo) / step)) + 1
    return BinAxis(lo - step / 2.0, step, count)


@dataclass
class DiscreteDistribution:
    """Probability mass on a uniform bin grid."""

    lower_bound: float
    bin_width: float
    mass: np.ndarray

    def __post_init__(self):
        self.mass = np.asarray(self.mass, dtype=float)
        if self.mass.ndim != 1 or self.mass.size < 2:
            raise ValueError("need a 1-d mass vector with at least two bins")
        if self.bin_width <= 0:
            raise ValueError("bin width must be positive")
        if np.any(self.mass < 0):
            raise ValueError("bin masses must be nonnegative")
        total = float(self.mass.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"bin masses must sum to 1, got {total!r}")
        self.mass.flags.writeable = False

    @property
    def axis(self) -> BinAxis:
        return BinAxis(self.lower_bound, self.bin_width, int(self.mass.size))

    def density(self) -> np.ndarray:
        return self.mass / self.bin_width

    def log_density(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.maximum(np.log(self.density()), LOG_FLOOR)

    def bin_index(self, values) -> tuple[np.ndarray, int]:
        return self.axis.index(values)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw scores uniformly within bins chosen by bin mass."""
        bins = rng.choice(self.mass.size, size=size, p=self.mass / self.mass.sum())
        return self.lower_bound + (bins + rng.random(size)) * self.bin_width


def discretize(density, lower: float, upper: float, bin_width: float) -> DiscreteDistribution:
    """Bin a density function: midpoint value times width, renormalized.

    ``density`` is any callable that maps an array of points to nonnegative
    density values.  Raises if the grid captures no mass.
    """
    if upper <= lower:
        raise ValueError("upper must exceed lower")
    count = int(round((upper - lower) / bin_width))
    if count < 2:
        raise ValueError("grid must contain at least two bins")
    centers = lower + bin_width * (np.arange(count) + 0.5)
    mass = np.asarray(density(centers), dtype=float) * bin_width
    if np.any(mass < 0):
        raise ValueError("density must be nonnegative")
    total = mass.sum()
    if total <= 0:
        raise ValueError("density places no mass on the grid")
    return DiscreteDistribution(lower, bin_width, mass / total)


def gaussian_distribution(mean: float = 0.0, std: float = 1.0,
                          bin_width: float = 0.01, span: float = 5.0) -> DiscreteDistribution:
    """Gaussian binned over mean +/- span standard deviations."""
    def pdf(x):
        z = (x - mean) / std
        return np.exp(-0.5 * z * z) / (std * np.sqrt(2.0 * np.pi))
    return discretize(pdf, mean - span * std, mean + span * std, bin_width)


def uniform_distribution(lower: float = 0.0, upper: float = 1.0,
                         bin_width: float = 0.01) -> DiscreteDistribution:
    return discretize(lambda x: np.ones_like(x), lower, upper, bin_width)


@dataclass
class OrderStatisticTable:
    """Log density of every order statistic of an i.i.d. cohort.

    ``log_density[k - 1][b]`` is the log density of the k-th smallest of
    ``cohort_size`` draws, on the source distribution's bin grid.
    """

    cohort_size: int
    lower_bound: float
    bin_width: float
    log_density: np.ndarray

    def __post_init__(self):
        self.log_density = np.asarray(self.log_density, dtype=float)
        if self.log_density.shape[0] != self.cohort_size:
            raise ValueError("one row per rank expected")
        self.log_density.flags.writeable = False

    @property
    def axis(self) -> BinAxis:
        return BinAxis(self.lower_bound, self.bin_width, int(self.log_density.shape[1]))

    def weights_for(self, scores) -> tuple[np.ndarray, int]:
        """Per-candidate edge weights: weights[i][k] = log p_(k+1)(score_i).

        Out-of-range scores are clamped to the nearest bin; the clamp count
        is returned alongside the matrix.
        """
        idx, clamped = self.axis.index(scores)
        return self.log_density[:, idx].T.copy(), clamped


def order_statistic_table(dist: DiscreteDistribution, cohort_size: int) -> OrderStatisticTable:
    """Exact order-statistic bin probabilities for an i.i.d. cohort.

    Treating each bin's mass as uniform within the bin, the probability that
    the k-th smallest of n draws lands in a bin is a difference of binomial
    upper tails evaluated at the bin's edge quantiles.  Tail terms are built
    in log space from a log-factorial table, so no binomial coefficient is
    ever formed directly and cohort sizes well past n = 170 stay finite.
    """
    n = int(cohort_size)
    if n < 1:
        raise ValueError("cohort size must be at least 1")
    u = np.concatenate(([0.0], np.cumsum(dist.mass)))
    u = np.clip(u, 0.0, 1.0)
    u[-1] = 1.0

    j = np.arange(n + 1)
    log_fact = gammaln(j + 1.0)
    log_choose = log_fact[n] - log_fact - log_fact[::-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        log_u = np.log(u)
        log_1mu = np.log1p(-u)
        # 0 * log(0) at the edge quantiles must give 0, not nan.
        a = np.where(j[:, None] == 0, 0.0, j[:, None] * log_u[None, :])
        b = np.where(j[:, None] == n, 0.0, (n - j)[:, None] * log_1mu[None, :])
    pmf = np.exp(log_choose[:, None] + a + b)
    tails = np.cumsum(pmf[::-1, :], axis=0)[::-1, :]

    prob = np.diff(tails[1:, :], axis=1)
    prob[prob < _PROB_FLOOR] = 0.0
    with np.errstate(divide="ignore"):
        log_density = np.maximum(np.log(prob / dist.bin_width), LOG_FLOOR)
    return OrderStatisticTable(n, dist.lower_bound, dist.bin_width, log_density)


def simulated_order_statistic_table(dist: DiscreteDistribution, cohort_size: int,
                                    cohorts: int = 10_000, seed: int = 0,
                                    ) -> OrderStatisticTable:
    """Order-statistic table estimated from simulated cohorts.

    Draws ``cohorts`` cohorts of ``cohort_size`` scores, sorts each, and
    histograms every rank over the source grid.  Empty bins keep the log
    floor.  The sampling noise in the resulting table is deliberate: the
    synthetic ranking experiments are calibrated against tables estimated
    this way, not against the exact construction.
    """
    n = int(cohort_size)
    if n < 1:
        raise ValueError("cohort size must be at least 1")
    if cohorts < 1:
        raise ValueError("need at least one simulated cohort")
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    ax = dist.axis
    counts = np.zeros((n, ax.count), dtype=np.int64)
    done = 0
    while done < cohorts:
        block = min(200_000, cohorts - done)
        draws = np.sort(dist.sample(rng, (block, n)), axis=1)
        idx, _ = ax.index_flags(draws.ravel())
        idx = idx.reshape(block, n)
        for k in range(n):
            counts[k] += np.bincount(idx[:, k], minlength=ax.count)
        done += block
    with np.errstate(divide="ignore"):
        log_density = np.log(counts / (cohorts * dist.bin_width))
    log_density = np.maximum(log_density, LOG_FLOOR)
    return OrderStatisticTable(n, dist.lower_bound, dist.bin_width, log_density)


def fit_gaussian(samples) -> tuple[float, float]:
    """Maximum-likelihood Gaussian fit (variance over n, not n - 1)."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise ValueError("need at least two samples to fit")
    mean = float(x.mean())
    var = float(x.var())
    if var <= 0.0:
        warnings.warn("degenerate sample variance; adding 1e-8 jitter")
        var += 1e-8
    return mean, var


def fit_mvn(samples) -> tuple[np.ndarray, np.ndarray]:
    """Maximum-likelihood multivariate Gaussian fit (covariance over n).

    A singular sample covariance gets 1e-8 added to its diagonal, with a
    warning, so downstream sampling stays possible.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2:
        raise ValueError("expected samples with shape (count, dims)")
    if x.shape[0] < 2:
        raise ValueError("need at least two samples to fit")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / x.shape[0]
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        warnings.warn("singular sample covariance; adding 1e-8 diagonal jitter")
        cov = cov + 1e-8 * np.eye(cov.shape[0])
    return mean, cov


def quantize(values, step: float):
    """Round to the nearest multiple of ``step``, halves toward +infinity."""
    if step <= 0:
        raise ValueError("quantization step must be positive")
    v = np.asarray(values, dtype=float)
    out = np.floor(v / step + 0.5) * step
    if np.isscalar(values) or getattr(values, "ndim", 1) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class CombinedScoreSpec:
    """Linear blend of the instantaneous components and the delayed score.

    ``weights`` covers the instantaneous components first, the delayed score
    last.  The blend is deterministic and defined for every score pair.
    """

    name: str
    weights: tuple[float, ...]

    def combined(self, instant, delayed) -> np.ndarray:
        d = np.asarray(delayed, dtype=float)
        s = np.asarray(instant, dtype=float).reshape(d.size, -1)
        if s.shape[1] + 1 != len(self.weights):
            raise ValueError("weight count does not match score components")
        w = np.asarray(self.weights, dtype=float)
        return s @ w[:-1] + w[-1] * d


def combined_score_spec(name: str, instant_dims: int) -> CombinedScoreSpec:
    """The two standard blends: f1 = delayed only, f2 = (.25, .25, .5)."""
    if name == "f1":
        return CombinedScoreSpec("f1", (0.0,) * instant_dims + (1.0,))
    if name == "f2":
        if instant_dims != 2:
            raise ValueError("f2 is defined for two instantaneous components")
        return CombinedScoreSpec("f2", (0.25, 0.25, 0.5))
    raise ValueError(f"unknown combined score spec {name!r}")


@dataclass
class JointGrid:
    """Joint mass of (instantaneous, delayed) scores on a product grid.

    Multi-dimensional instantaneous scores are flattened to a single axis in
    row-major order, so ``mass`` is always (flattened instant bins, delayed
    bins).
    """

    instant_axes: tuple[BinAxis, ...]
    delayed_axis: BinAxis
    mass: np.ndarray

    def __post_init__(self):
        self.mass = np.asarray(self.mass, dtype=float)
        s_bins = int(np.prod([ax.count for ax in self.instant_axes]))
        if self.mass.shape != (s_bins, self.delayed_axis.count):
            raise ValueError("mass grid does not match the axes")
        if np.any(self.mass < 0):
            raise ValueError("mass must be nonnegative")
        if abs(float(self.mass.sum()) - 1.0) > 1e-9:
            raise ValueError("mass must sum to 1")
        self.mass.flags.writeable = False

    def instant_index(self, instant) -> tuple[np.ndarray, int]:
        return flatten_instant_index(self.instant_axes, instant)


def flatten_instant_flags(axes: tuple[BinAxis, ...], instant) -> tuple[np.ndarray, np.ndarray]:
    """Row-major flat bin index of (possibly multi-dimensional) scores,
    plus a per-row mask of scores with any clamped component."""
    s = np.asarray(instant, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    if s.shape[1] != len(axes):
        raise ValueError("score dimensionality does not match the axes")
    flat = np.zeros(s.shape[0], dtype=np.int64)
    clamped = np.zeros(s.shape[0], dtype=bool)
    for dim, ax in enumerate(axes):
        idx, out_of_range = ax.index_flags(s[:, dim])
        clamped |= out_of_range
        flat = flat * ax.count + idx
    return flat, clamped


def flatten_instant_index(axes: tuple[BinAxis, ...], instant) -> tuple[np.ndarray, int]:
    flat, clamped = flatten_instant_flags(axes, instant)
    return flat, int(np.count_nonzero(clamped))


@dataclass
class MvnScoreSampler:
    """Samples (instantaneous, delayed) pairs from a joint Gaussian.

    The last component of ``mean``/``cov`` is the delayed score; everything
    before it is instantaneous.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float)

    def sample(self, rng: np.random.Generator, count: int) -> tuple[np.ndarray, np.ndarray]:
        draws = rng.multivariate_normal(self.mean, self.cov, size=count, method="cholesky")
        return draws[:, :-1], draws[:, -1]


@dataclass
class GridScoreSampler:
    """Samples score pairs from an explicit joint grid (bin centers)."""

    grid: JointGrid

    def sample(self, rng: np.random.Generator, count: int) -> tuple[np.ndarray, np.ndarray]:
        flat = rng.choice(self.grid.mass.size, size=count, p=self.grid.mass.ravel())
        s_flat, d_idx = np.divmod(flat, self.grid.delayed_axis.count)
        coords = []
        rest = s_flat
        for ax in reversed(self.grid.instant_axes):
            rest, here = np.divmod(rest, ax.count)
            coords.append(ax.centers()[here])
        instant = np.stack(list(reversed(coords)), axis=1)
        return instant, self.grid.delayed_axis.centers()[d_idx]


@dataclass
class RankLikelihoodModel:
    """Monte Carlo likelihood tables for score pairs conditioned on rank.

    For a cohort of ``cohort_size`` pairs ranked by the combined score
    (ties broken by draw order), the tables hold, per rank k:

    * ``log_joint[k - 1]`` -- log density of (instant, delayed) given rank k;
    * ``conditional[k - 1]`` -- mass of the delayed bin given rank k and the
      instant bin (each slice sums to 1 over delayed bins);
    * ``expected_log_joint[k - 1]`` -- conditional expectation of the log
      joint density over the unseen delayed score, per instant bin.  This is
      the edge weight for candidates whose delayed score is still hidden.
    """

    cohort_size: int
    instant_axes: tuple[BinAxis, ...]
    delayed_axis: BinAxis
    combined: CombinedScoreSpec
    log_joint: np.ndarray
    conditional: np.ndarray
    expected_log_joint: np.ndarray
    cohorts: int = 0
    clipped_fraction: float = 0.0

    def __post_init__(self):
        n_s = int(np.prod([ax.count for ax in self.instant_axes]))
        n_d = self.delayed_axis.count
        if self.log_joint.shape != (self.cohort_size, n_s, n_d):
            raise ValueError("log_joint shape does not match the axes")
        if self.conditional.shape != self.log_joint.shape:
            raise ValueError("conditional shape does not match log_joint")
        if self.expected_log_joint.shape != (self.cohort_size, n_s):
            raise ValueError("expected_log_joint shape does not match")

    def instant_index(self, instant) -> tuple[np.ndarray, int]:
        return flatten_instant_index(self.instant_axes, instant)

    def known_weights(self, instant, delayed) -> tuple[np.ndarray, int]:
        """Edge weights for revealed pairs: weights[i][k] = log joint at rank k+1."""
        s_idx, s_clamped = self.instant_index(instant)
        d_idx, d_clamped = self.delayed_axis.index(delayed)
        return self.log_joint[:, s_idx, d_idx].T.copy(), s_clamped + d_clamped

    def unknown_weights(self, instant) -> tuple[np.ndarray, int]:
        """Edge weights for candidates whose delayed score is hidden."""
        s_idx, clamped = self.instant_index(instant)
        return self.expected_log_joint[:, s_idx].T.copy(), clamped


def _rank_histogram_shard(args) -> tuple[np.ndarray, int]:
    (sampler, combined, cohort_size, instant_axes, delayed_axis,
     seed, shard_index, n_cohorts) = args
    rng = np.random.default_rng(np.random.SeedSequence([seed, shard_index]))
    m = n_cohorts * cohort_size
    instant, delayed = sampler.sample(rng, m)
    values = combined.combined(instant, delayed).reshape(n_cohorts, cohort_size)
    order = np.argsort(values, axis=1, kind="stable")

    s_flat, clipped = flatten_instant_flags(instant_axes, instant)
    d_idx, d_clipped = delayed_axis.index_flags(delayed)
    clipped = clipped | d_clipped

    n_s = int(np.prod([ax.count for ax in instant_axes]))
    n_d = delayed_axis.count
    cell = (s_flat * n_d + d_idx).reshape(n_cohorts, cohort_size)
    by_rank = np.take_along_axis(cell, order, axis=1)
    flat = (np.arange(cohort_size)[None, :] * (n_s * n_d) + by_rank).ravel()
    counts = np.bincount(flat, minlength=cohort_size * n_s * n_d)
    return counts.reshape(cohort_size, n_s, n_d), int(np.count_nonzero(clipped))


def build_rank_likelihood_model(sampler, combined: CombinedScoreSpec, cohort_size: int,
                                instant_axes: tuple[BinAxis, ...], delayed_axis: BinAxis,
                                cohorts: int = 100_000, seed: int = 0,
                                workers: int = 1) -> RankLikelihoodModel:
    """Estimate rank-conditional likelihood tables by cohort simulation.

    Draws ``cohorts`` independent cohorts of ``cohort_size`` score pairs from
    ``sampler`` (an object with ``sample(rng, count) -> (instant, delayed)``),
    ranks each cohort by the combined score, and histograms the pair observed
    at each rank.  Histogram cells get additive smoothing of 1/cohorts before
    normalization.  Sampling is sharded with one RNG stream per fixed-size
    shard, so results are identical for any worker count.

    Raises if more than 1% of sampled pairs fall outside the grid (the grid
    does not cover the sampler's support) or if ``cohorts`` is too small for
    stable tables.
    """
    if cohorts < _MIN_COHORTS:
        raise ValueError(f"need at least {_MIN_COHORTS} cohorts, got {cohorts}")
    instant_axes = tuple(instant_axes)
    shards = []
    start = 0
    index = 0
    while start < cohorts:
        size = min(_SHARD_COHORTS, cohorts - start)
        shards.append((sampler, combined, cohort_size, instant_axes,
                       delayed_axis, seed, index, size))
        start += size
        index += 1

    if workers <= 1:
        results = [_rank_histogram_shard(s) for s in shards]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_rank_histogram_shard, shards))

    counts = np.zeros_like(results[0][0])
    clipped = 0
    for shard_counts, shard_clipped in results:
        counts += shard_counts
        clipped += shard_clipped
    clipped_fraction = clipped / (cohorts * cohort_size)
    if clipped_fraction > 0.01:
        raise ValueError(
            f"grid does not cover the sampler support: "
            f"{clipped_fraction:.2%} of sampled pairs were clipped")

    smoothed = counts.astype(float) + 1.0 / cohorts
    joint_mass = smoothed / smoothed.sum(axis=(1, 2), keepdims=True)
    cell_volume = delayed_axis.width * float(np.prod([ax.width for ax in instant_axes]))
    with np.errstate(divide="ignore"):
        log_joint = np.maximum(np.log(joint_mass) - np.log(cell_volume), LOG_FLOOR)
    conditional = smoothed / smoothed.sum(axis=2, keepdims=True)
    expected_log_joint = np.einsum("ksd,ksd->ks", conditional, log_joint)

    return RankLikelihoodModel(
        cohort_size=cohort_size,
        instant_axes=instant_axes,
        delayed_axis=delayed_axis,
        combined=combined,
        log_joint=log_joint,
        conditional=conditional,
        expected_log_joint=expected_log_joint,
        cohorts=cohorts,
        clipped_fraction=clipped_fraction,
    )
