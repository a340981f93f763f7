"""Online absolute rank prediction for streamed candidates.

Candidates arrive one per step from a cohort of known final size n.  At any
point the revealed candidates are matched to the cohort's order statistics
by maximum likelihood: edge weight of candidate i at rank k is the log
density of i's scores under the k-th order statistic, and the best
left-saturating matching of candidates to ranks is the rank prediction.

Rank orientation is fixed throughout: rank n is the highest score, rank 1
the lowest, so "top m" means predicted rank >= n - m + 1.  Ties between
candidates with identical (binned) scores are broken by arrival order, the
earlier arrival taking the lower rank.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .assignment import AssignmentProblem, solve_max_matching
from .distributions import OrderStatisticTable, RankLikelihoodModel


@dataclass
class CandidateRecord:
    """One streamed candidate.

    ``instant`` is the instantaneous score (scalar, or a vector when the
    model uses several components); ``delayed`` is None until the delayed
    score is revealed at step ``reveal`` (arrival + delay; infinity when it
    never arrives).
    """

    id: int
    arrival: int
    instant: float | np.ndarray
    delayed: float | None = None
    reveal: float = math.inf


@dataclass
class StreamConfig:
    """Shape of a candidate stream: cohort size, reveal delay, preprocessing."""

    cohort_size: int
    tau: float = math.inf
    quantize_step: float | None = None
    combined: str | None = None

    def __post_init__(self):
        if self.cohort_size < 1:
            raise ValueError("cohort size must be at least 1")
        if self.tau < 0:
            raise ValueError("reveal delay must be nonnegative")


@dataclass
class RankingSnapshot:
    """Prediction state after some step: predicted rank per revealed candidate."""

    step: int
    predicted_rank: dict[int, int]
    known: frozenset = frozenset()
    unknown: frozenset = frozenset()
    clamped: int = 0
    objective: float = 0.0


def stream_records(instants, delayeds, config: StreamConfig) -> list[CandidateRecord]:
    """Wrap score arrays into candidate records, one arrival per step.

    ``delayeds`` may be None for a fully-instantaneous stream; quantization
    from the config is applied to both score kinds.
    """
    from .distributions import quantize

    inst = np.asarray(instants, dtype=float)
    if config.quantize_step is not None:
        inst = quantize(inst, config.quantize_step)
    count = inst.shape[0]
    if delayeds is None:
        return [CandidateRecord(id=i, arrival=i + 1, instant=inst[i])
                for i in range(count)]
    d = np.asarray(delayeds, dtype=float)
    if config.quantize_step is not None:
        d = quantize(d, config.quantize_step)
    return [CandidateRecord(id=i, arrival=i + 1, instant=inst[i], delayed=float(d[i]),
                            reveal=(i + 1) + config.tau)
            for i in range(count)]


def true_ranks(values) -> np.ndarray:
    """1-based ranks by value (rank n = largest), ties by arrival order."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size, dtype=np.int64)
    ranks[order] = np.arange(1, v.size + 1)
    return ranks


def random_rank_baseline(n: int) -> float:
    """Expected |true - predicted| when the predicted rank is a uniform draw."""
    return (n * n - 1) / (3.0 * n)


def _assign_ranks(weights: np.ndarray, tie_keys, ids, cohort_size: int,
                  padding: float | None) -> tuple[dict[int, int], float]:
    """Solve the matching and normalize ranks within tie groups.

    Candidates sharing a tie key have identical weight rows, so their ranks
    are interchangeable; they are reassigned in arrival order (input order),
    earlier arrival getting the lower rank.
    """
    m = weights.shape[0]
    if padding is None:
        problem = AssignmentProblem(weights)
        result = solve_max_matching(problem)
        ranks = result.assignment[:m] + 1
        objective = result.objective
    else:
        full = np.full((cohort_size, cohort_size), float(padding))
        full[:m] = weights
        result = solve_max_matching(AssignmentProblem(full))
        ranks = result.assignment[:m] + 1
        objective = float(weights[np.arange(m), result.assignment[:m]].sum())

    ranks = np.asarray(ranks, dtype=np.int64)
    groups: dict = {}
    for pos, key in enumerate(tie_keys):
        groups.setdefault(key, []).append(pos)
    for members in groups.values():
        if len(members) > 1:
            for pos, rank in zip(members, sorted(int(ranks[p]) for p in members)):
                ranks[pos] = rank
    return {int(i): int(r) for i, r in zip(ids, ranks)}, float(objective)


def predict_ranks_full_info(scores, table: OrderStatisticTable, ids=None,
                            step: int = 0, padding: float | None = None) -> RankingSnapshot:
    """Rank prediction when every revealed candidate's score is complete.

    ``scores`` lists the revealed candidates in arrival order.  The matching
    is solved on the rectangular (revealed x cohort) weight matrix; passing
    ``padding`` instead fills the unrevealed rows with a constant weight and
    solves the square problem (the two agree, the rectangle is just cheaper).
    """
    s = np.atleast_1d(np.asarray(scores, dtype=float))
    if s.size > table.cohort_size:
        raise ValueError("more revealed candidates than the cohort size")
    if ids is None:
        ids = np.arange(s.size)
    weights, clamped = table.weights_for(s)
    bin_idx, _ = table.axis.index(s)
    predicted, objective = _assign_ranks(
        weights, [("s", int(b)) for b in bin_idx], ids, table.cohort_size, padding)
    return RankingSnapshot(step=step, predicted_rank=predicted,
                           known=frozenset(int(i) for i in ids),
                           clamped=clamped, objective=objective)


def predict_ranks_delayed(candidates, model: RankLikelihoodModel,
                          step: int = 0) -> RankingSnapshot:
    """Rank prediction when delayed scores may still be hidden.

    Revealed pairs weigh in with the rank-conditional log joint density at
    their (instant, delayed) bins; candidates whose delayed score is hidden
    use the expected log joint density over the conditional law of the
    delayed score given their instant bin.  The expectation tables are never
    touched when every delayed score is known.
    """
    m = len(candidates)
    if m > model.cohort_size:
        raise ValueError("more revealed candidates than the cohort size")
    instant = np.vstack([np.atleast_1d(np.asarray(c.instant, dtype=float))
                         for c in candidates])
    known_mask = np.array([c.delayed is not None for c in candidates])

    s_idx, s_clamped = model.instant_index(instant)
    clamped = s_clamped
    weights = np.empty((m, model.cohort_size))
    tie_keys: list = [None] * m
    if known_mask.any():
        delayed = np.array([c.delayed for c, k in zip(candidates, known_mask) if k],
                           dtype=float)
        d_idx, d_clamped = model.delayed_axis.index(delayed)
        clamped += d_clamped
        weights[known_mask] = model.log_joint[:, s_idx[known_mask], d_idx].T
        for pos, d in zip(np.flatnonzero(known_mask), d_idx):
            tie_keys[pos] = ("k", int(s_idx[pos]), int(d))
    if not known_mask.all():
        hidden = ~known_mask
        weights[hidden] = model.expected_log_joint[:, s_idx[hidden]].T
        for pos in np.flatnonzero(hidden):
            tie_keys[pos] = ("u", int(s_idx[pos]))

    ids = [c.id for c in candidates]
    predicted, objective = _assign_ranks(weights, tie_keys, ids,
                                         model.cohort_size, None)
    return RankingSnapshot(
        step=step, predicted_rank=predicted,
        known=frozenset(c.id for c, k in zip(candidates, known_mask) if k),
        unknown=frozenset(c.id for c, k in zip(candidates, known_mask) if not k),
        clamped=clamped, objective=objective)


def aadr(true, predicted_at_arrival) -> np.ndarray:
    """Average absolute difference in ranking, per arrival step.

    ``true`` and ``predicted_at_arrival`` are (trials, n) rank matrices (or
    single-trial vectors) aligned by arrival step; entry t of the result is
    the mean over trials of |true - predicted| for the step-t arrival.
    """
    t = np.atleast_2d(np.asarray(true, dtype=float))
    p = np.atleast_2d(np.asarray(predicted_at_arrival, dtype=float))
    if t.shape != p.shape:
        raise ValueError("rank matrices must have matching shapes")
    return np.abs(t - p).mean(axis=0)


@dataclass
class HireEvent:
    id: int
    step: int
    predicted_rank: int


@dataclass
class HiringLog:
    """Every hire decision made while a stream was running."""

    cohort_size: int
    top_m: int
    hires: list[HireEvent] = field(default_factory=list)
    snapshots: list[RankingSnapshot] = field(default_factory=list)

    def hired_ids(self) -> list[int]:
        return [h.id for h in self.hires]


def hiring_rule(records, predictor, cohort_size: int, top_m: int,
                keep_snapshots: bool = False) -> HiringLog:
    """Hire every candidate whose predicted rank enters the top ``top_m``.

    The predictor is re-run after every arrival and every delayed-score
    reveal; a candidate is hired at the first step its predicted rank
    reaches cohort_size - top_m + 1 or above, and never un-hired.
    ``predictor(view, step)`` receives the revealed candidates in arrival
    order, delayed scores masked until their reveal step.
    """
    if not 1 <= top_m <= cohort_size:
        raise ValueError("top_m must be between 1 and the cohort size")
    records = sorted(records, key=lambda r: r.arrival)
    threshold = cohort_size - top_m + 1
    last_step = max(max((r.arrival for r in records), default=0),
                    max((int(r.reveal) for r in records if math.isfinite(r.reveal)),
                        default=0))
    log = HiringLog(cohort_size=cohort_size, top_m=top_m)
    hired: set[int] = set()
    for step in range(1, last_step + 1):
        arrived = [r for r in records if r.arrival <= step]
        if not arrived:
            continue
        view = [r if r.reveal <= step else replace(r, delayed=None) for r in arrived]
        snapshot = predictor(view, step)
        if keep_snapshots or step == last_step:
            log.snapshots.append(snapshot)
        for candidate_id, rank in snapshot.predicted_rank.items():
            if rank >= threshold and candidate_id not in hired:
                hired.add(candidate_id)
                log.hires.append(HireEvent(candidate_id, step, rank))
    return log


def table_predictor(table: OrderStatisticTable):
    """Full-information predictor over a fitted order-statistic table."""
    def predict(view, step):
        scores = np.array([r.instant for r in view], dtype=float)
        return predict_ranks_full_info(scores, table,
                                       ids=[r.id for r in view], step=step)
    return predict


def model_predictor(model: RankLikelihoodModel):
    """Delayed-score predictor over rank-likelihood tables."""
    def predict(view, step):
        return predict_ranks_delayed(view, model, step=step)
    return predict
