"""Randomized sparsification of grouped capacity matching.

The grouped problem matches N left nodes to k groups, group j usable
capacities[j] times (capacities sum to N).  Solving it naively duplicates
every group column to full capacity and runs the dense matcher on an N x N
matrix.  Sparsification keeps, for every (left node, group) pair, only a
random sample of about c*ln(n) of the group's duplicate slots; a perfect
matching still exists with high probability, and the sparse matcher then
only walks the sampled adjacency lists, which is what makes it cheaper --
its cost scales with the edge count, not with N^2 per phase.

A sampled graph can occasionally be infeasible or miss the dense optimum;
``solve_nk_sparse`` resamples on infeasibility, and ``survival_experiment``
measures how often the first sample is feasible and how often its optimum
agrees with the dense one.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ._hungarian import jv_sparse
from .assignment import MatchingResult, solve_nk_naive

DEFAULT_OVERSAMPLE = 10.0


@dataclass
class GroupedProblem:
    """N x k weights, per-group capacities summing to N, oversample factor c."""

    weights: np.ndarray
    capacities: np.ndarray
    c: float = DEFAULT_OVERSAMPLE

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        self.capacities = np.asarray(self.capacities, dtype=np.int64)
        if self.weights.ndim != 2:
            raise ValueError("weights must be a 2-d matrix")
        if self.capacities.shape != (self.weights.shape[1],):
            raise ValueError("need one capacity per group")
        if np.any(self.capacities < 1):
            raise ValueError("capacities must be positive")
        if int(self.capacities.sum()) != self.weights.shape[0]:
            raise ValueError("capacities must sum to the number of left nodes")
        if not np.isfinite(self.weights).all():
            raise ValueError("weights must be finite")
        if self.c <= 0:
            raise ValueError("oversample factor c must be positive")

    @property
    def n_left(self) -> int:
        return self.weights.shape[0]

    @property
    def n_groups(self) -> int:
        return self.weights.shape[1]

    def degrees(self) -> np.ndarray:
        """Sampled duplicates per (left node, group): min(ceil(c ln n_j), n_j).

        Clamped below at 1 so capacity-1 groups keep their only edge.
        """
        n = self.capacities.astype(float)
        raw = np.ceil(self.c * np.log(n)).astype(np.int64)
        return np.minimum(np.maximum(raw, 1), self.capacities)


@dataclass
class SparseGraph:
    """Sampled duplicate slots per (left node, group) for a grouped problem."""

    problem: GroupedProblem
    duplicates: tuple[np.ndarray, ...]   # per group: (n_left, degree_j) slot indices

    def degree_total(self) -> int:
        return int(sum(d.shape[1] for d in self.duplicates))

    def edge_count(self) -> int:
        return self.problem.n_left * self.degree_total()

    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Adjacency lists over the duplicated right nodes: (indptr, cols, wts)."""
        p = self.problem
        offsets = np.concatenate(([0], np.cumsum(p.capacities)))[:-1]
        cols = np.concatenate(
            [self.duplicates[g] + offsets[g] for g in range(p.n_groups)], axis=1)
        wts = np.concatenate(
            [np.repeat(p.weights[:, g:g + 1], self.duplicates[g].shape[1], axis=1)
             for g in range(p.n_groups)], axis=1)
        per_row = cols.shape[1]
        indptr = np.arange(p.n_left + 1, dtype=np.int64) * per_row
        return (indptr,
                np.ascontiguousarray(cols.ravel()),
                np.ascontiguousarray(wts.ravel()))


def sparsify(problem: GroupedProblem, seed: int) -> SparseGraph:
    """Sample duplicate slots uniformly without replacement, per (node, group)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    degrees = problem.degrees()
    duplicates = []
    for g in range(problem.n_groups):
        cap = int(problem.capacities[g])
        deg = int(degrees[g])
        picks = np.argsort(rng.random((problem.n_left, cap)), axis=1)[:, :deg]
        duplicates.append(np.ascontiguousarray(picks, dtype=np.int64))
    return SparseGraph(problem, tuple(duplicates))


class SparseInfeasibleError(RuntimeError):
    """Raised when every resampled graph failed to contain a perfect matching."""

    def __init__(self, attempts: int, degrees: np.ndarray):
        self.attempts = attempts
        self.degrees = np.asarray(degrees)
        super().__init__(
            f"no perfect matching in {attempts} sampled graphs "
            f"(per-group degrees {self.degrees.tolist()})")


@dataclass
class SparseSolveReport:
    """Outcome of a sparse solve: result plus sampling diagnostics."""

    result: MatchingResult
    matched_on_attempt: int
    retries: int
    degrees: np.ndarray
    edge_count: int


def _solve_graph(graph: SparseGraph) -> MatchingResult | None:
    p = graph.problem
    indptr, cols, wts = graph.csr()
    feasible, match, u, v = jv_sparse(p.n_left, p.n_left, indptr, cols, wts)
    if not feasible:
        return None
    assignment = np.asarray(match)
    column_group = np.repeat(np.arange(p.n_groups), p.capacities)
    groups = column_group[assignment]
    objective = float(p.weights[np.arange(p.n_left), groups].sum())
    result = MatchingResult(assignment, objective, np.asarray(u), np.asarray(v),
                            False, groups=groups)
    result.certificate_valid = (
        sparse_certificate_violation(indptr, cols, wts, result) is None)
    return result


def sparse_certificate_violation(indptr, cols, wts, result: MatchingResult,
                                 atol: float = 1e-9) -> str | None:
    """Certificate check restricted to the sampled edges.

    Dual feasibility is only required on edges that exist in the sparse
    graph; absent edges are absent, not floor-weighted.
    """
    u = result.row_duals
    v = result.col_duals
    if u is None or v is None:
        return "no dual prices attached"
    n_left = u.size
    a = result.assignment
    if np.unique(a).size != a.size:
        return "assignment reuses a right node"
    row = np.repeat(np.arange(n_left), np.diff(indptr))
    slack = u[row] + v[cols] - wts
    if np.any(slack < -atol):
        e = int(np.argmin(slack))
        return f"dual infeasible at sampled edge ({int(row[e])}, {int(cols[e])})"
    on_match = cols == a[row]
    covered = np.bincount(row[on_match], minlength=n_left)
    if np.any(covered == 0):
        i = int(np.argmin(covered))
        return f"left node {i} matched outside its sampled edges"
    bad = on_match & (np.abs(slack) > atol)
    if np.any(bad):
        e = int(np.argmax(bad))
        return f"matched edge ({int(row[e])}, {int(cols[e])}) not tight"
    return None


def solve_nk_sparse(problem: GroupedProblem, seed: int,
                    max_retries: int = 3) -> SparseSolveReport:
    """Solve the grouped problem on sparsified graphs, resampling on failure.

    Each attempt draws a fresh graph from a seed derived from (seed, attempt).
    Raises SparseInfeasibleError when max_retries attempts all fail.
    """
    degrees = problem.degrees()
    for attempt in range(1, max_retries + 1):
        graph = sparsify(problem, _attempt_seed(seed, attempt))
        result = _solve_graph(graph)
        if result is not None:
            return SparseSolveReport(
                result=result,
                matched_on_attempt=attempt,
                retries=attempt - 1,
                degrees=degrees,
                edge_count=graph.edge_count(),
            )
    raise SparseInfeasibleError(max_retries, degrees)


def _attempt_seed(seed: int, attempt: int) -> int:
    # stable mixing of (seed, attempt) into a single sparsify seed
    return int(np.random.SeedSequence([seed, attempt]).generate_state(1)[0])


@dataclass
class SurvivalStats:
    trials: int
    feasible: int
    agreed: int

    @property
    def feasibility_rate(self) -> float:
        return self.feasible / self.trials

    @property
    def agreement_rate(self) -> float:
        return self.agreed / self.trials


def survival_experiment(n: int, k: int, c: float, trials: int, seed: int,
                        atol: float = 1e-9) -> SurvivalStats:
    """First-attempt feasibility and optimum-agreement rates.

    Per trial: fresh uniform weights, equal capacities n per group, one
    sampled graph (no retries).  Agreement compares the sparse optimum to the
    dense optimum of the same weights.  Kept small (n * k <= 1000) because
    every trial also runs the dense solver.
    """
    if n * k > 1000:
        raise ValueError("survival experiment is limited to n * k <= 1000")
    feasible = 0
    agreed = 0
    caps = np.full(k, n, dtype=np.int64)
    for t in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([seed, t]))
        weights = rng.random((n * k, k))
        problem = GroupedProblem(weights, caps, c)
        graph = sparsify(problem, _attempt_seed(seed + 1_000_003, t))
        result = _solve_graph(graph)
        if result is None:
            continue
        feasible += 1
        dense = solve_nk_naive(weights, caps)
        if abs(result.objective - dense.objective) <= atol:
            agreed += 1
    return SurvivalStats(trials, feasible, agreed)


def bench_sparse_vs_naive(sizes, k: int, c: float, repeats: int,
                          seed: int) -> list[dict]:
    """Median wall-clock (ms) of the naive and sparse solvers per size.

    Returns one row per (size, solver): {"size", "solver", "median_ms",
    "repeats", "edges"}.  Fresh weights per repeat; the sparse timing
    includes graph sampling, the naive timing includes column duplication.
    """
    rows = []
    for n in sizes:
        caps = np.full(k, n, dtype=np.int64)
        naive_times = []
        sparse_times = []
        edges = 0
        for r in range(repeats):
            rng = np.random.default_rng(np.random.SeedSequence([seed, n, r]))
            weights = rng.random((n * k, k))
            problem = GroupedProblem(weights, caps, c)

            start = time.perf_counter()
            solve_nk_naive(weights, caps)
            naive_times.append((time.perf_counter() - start) * 1e3)

            start = time.perf_counter()
            report = solve_nk_sparse(problem, seed=seed + r)
            sparse_times.append((time.perf_counter() - start) * 1e3)
            edges = report.edge_count
        rows.append({"size": int(n), "solver": "naive",
                     "median_ms": float(np.median(naive_times)),
                     "repeats": int(repeats), "edges": int((n * k) ** 2)})
        rows.append({"size": int(n), "solver": "sparse",
                     "median_ms": float(np.median(sparse_times)),
                     "repeats": int(repeats), "edges": int(edges)})
    return rows
