"""Max-weight bipartite matching with verifiable optimality certificates.

``solve_max_matching`` matches every left node of a rectangular weight
matrix (rows <= columns) to a distinct column, maximizing total weight, and
returns dual prices that certify optimality: prices dominate every edge
weight and matched edges are tight.  ``verify_certificate`` re-checks that
certificate from scratch, ``brute_force_matching`` is an independent
enumeration oracle for small instances, and ``solve_nk_naive`` reduces the
grouped capacity problem (k columns, column j usable capacities[j] times) to
an ordinary matching by duplicating columns.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np

from ._hungarian import jv_dense

CERT_ATOL = 1e-9

_BRUTE_FORCE_MAX_LEFT = 8


@dataclass
class AssignmentProblem:
    """A rectangular assignment instance: weights[i][j], rows <= columns."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError("weights must be a 2-d matrix")
        n_left, n_right = self.weights.shape
        if n_left < 1:
            raise ValueError("need at least one left node")
        if n_left > n_right:
            raise ValueError("more left nodes than right nodes; transpose the problem")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")

    @property
    def n_left(self) -> int:
        return self.weights.shape[0]

    @property
    def n_right(self) -> int:
        return self.weights.shape[1]


@dataclass
class MatchingResult:
    """Assignment plus the dual certificate produced by the solver.

    ``assignment[i]`` is the column matched to left node i.  ``groups`` is
    populated only by the grouped-capacity solvers and maps each left node to
    its original group index.
    """

    assignment: np.ndarray
    objective: float
    row_duals: np.ndarray | None
    col_duals: np.ndarray | None
    certificate_valid: bool
    groups: np.ndarray | None = None


def solve_max_matching(problem: AssignmentProblem) -> MatchingResult:
    """Optimal left-saturating matching via the primal-dual method.

    Runs in O(n_left * n_right^2).  The returned duals always satisfy
    u[i] + v[j] >= w[i][j] with matched edges tight (up to 1e-9), and
    ``certificate_valid`` records an actual re-check of those conditions.
    """
    match, u, v = jv_dense(problem.weights)
    assignment = np.asarray(match)
    objective = float(problem.weights[np.arange(problem.n_left), assignment].sum())
    result = MatchingResult(assignment, objective, np.asarray(u), np.asarray(v), False)
    result.certificate_valid = certificate_violation(problem, result) is None
    return result


def certificate_violation(problem: AssignmentProblem, result: MatchingResult,
                          atol: float = CERT_ATOL) -> str | None:
    """First violated certificate condition, or None if the result checks out.

    Conditions, in order: (a) dual feasibility u[i] + v[j] >= w[i][j] - atol
    on every edge; (b) matched edges tight within atol; (c) assignment is
    left-saturating and injective.
    """
    w = problem.weights
    if result.row_duals is None or result.col_duals is None:
        return "no dual prices attached"
    u = np.asarray(result.row_duals, dtype=float)
    v = np.asarray(result.col_duals, dtype=float)
    if u.shape != (problem.n_left,) or v.shape != (problem.n_right,):
        return "dual price vectors have wrong shape"

    slack = u[:, None] + v[None, :] - w
    i, j = np.unravel_index(np.argmin(slack), slack.shape)
    if slack[i, j] < -atol:
        return f"dual infeasible at edge ({i}, {j}): slack {slack[i, j]:.3e}"

    a = np.asarray(result.assignment)
    if a.shape != (problem.n_left,) or np.any(a < 0) or np.any(a >= problem.n_right):
        return "assignment is not a total map into the columns"
    matched_slack = slack[np.arange(problem.n_left), a]
    worst = int(np.argmax(np.abs(matched_slack)))
    if abs(matched_slack[worst]) > atol:
        return (f"matched edge ({worst}, {a[worst]}) not tight: "
                f"slack {matched_slack[worst]:.3e}")

    if np.unique(a).size != a.size:
        return "assignment reuses a column"
    return None


def verify_certificate(problem: AssignmentProblem, result: MatchingResult,
                       atol: float = CERT_ATOL) -> bool:
    return certificate_violation(problem, result, atol) is None


@lru_cache(maxsize=32)
def _permutation_table(n_left: int, n_right: int) -> np.ndarray:
    table = np.array(list(permutations(range(n_right), n_left)), dtype=np.int64)
    table.flags.writeable = False
    return table


def brute_force_matching(problem: AssignmentProblem) -> MatchingResult:
    """Exhaustive oracle: tries every injective assignment.

    Refuses instances with more than 8 left nodes.  Returns no duals and
    ``certificate_valid`` False, since nothing is certified.
    """
    if problem.n_left > _BRUTE_FORCE_MAX_LEFT:
        raise ValueError("brute force is limited to 8 left nodes")
    perms = _permutation_table(problem.n_left, problem.n_right)
    totals = problem.weights[np.arange(problem.n_left)[None, :], perms].sum(axis=1)
    best = perms[int(np.argmax(totals))].copy()
    objective = float(problem.weights[np.arange(problem.n_left), best].sum())
    return MatchingResult(best, objective, None, None, False)


def expand_grouped(weights: np.ndarray, capacities) -> tuple[np.ndarray, np.ndarray]:
    """Duplicate group columns by capacity: returns (expanded, column group)."""
    w = np.asarray(weights, dtype=np.float64)
    caps = np.asarray(capacities, dtype=np.int64)
    if w.ndim != 2 or caps.ndim != 1 or caps.size != w.shape[1]:
        raise ValueError("need one capacity per group column")
    if np.any(caps < 0) or caps.sum() != w.shape[0]:
        raise ValueError("capacities must be nonnegative and sum to the row count")
    column_group = np.repeat(np.arange(caps.size), caps)
    return np.ascontiguousarray(w[:, column_group]), column_group


def solve_nk_naive(weights: np.ndarray, capacities) -> MatchingResult:
    """Grouped capacity matching by explicit column duplication.

    Column j of ``weights`` may be used up to capacities[j] times, with
    capacities summing to the row count.  The result's ``assignment`` indexes
    the duplicated columns (certificate-checkable against the expanded
    problem); ``groups`` maps each row back to its group.
    """
    expanded, column_group = expand_grouped(weights, capacities)
    result = solve_max_matching(AssignmentProblem(expanded))
    result.groups = column_group[result.assignment]
    return result
