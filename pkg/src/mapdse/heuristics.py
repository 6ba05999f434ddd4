"""Constructive mapping heuristics.

All four build a mapping task by task using the same load bookkeeping as
the analytic usage metric: a partially mapped problem charges each placed
task its compute cycles plus the endpoint costs of channels whose peer is
already placed. Pinned tasks are always forced onto their processor and
free tasks never go to pinned_only processors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import DseError
from .model import Mapping, Problem


@dataclass
class LoadState:
    """Ready times of a partial mapping, kept Eq-consistent with usage.

    ``ready_time`` maps processor id to accumulated cycles. ``place``
    commits a task and also bumps the processors of already placed peers
    whose channel endpoints just became live.
    """

    problem: Problem
    cycles: list[int]
    placed: list[Optional[int]]  # processor index per task, None = unplaced

    @classmethod
    def empty(cls, problem: Problem) -> "LoadState":
        return cls(problem, [0] * len(problem.proc_ids), [None] * problem.n_tasks)

    @property
    def ready_time(self) -> dict[str, int]:
        return dict(zip(self.problem.proc_ids, self.cycles))

    def cost_on(self, i: int, k: int) -> int:
        """Per-frame cost of placing task i on k, counting placed peers."""
        p = self.problem
        acc = p.compute[i][k] * p.firings[i]
        for c, peer, vol in p.incident[i]:
            z = self.placed[peer]
            if z is None:
                continue
            ch = p.channels[c]
            acc += vol * (ch.cost_local if z == k else ch.cost_shared)
        return acc

    def compute_only(self, i: int, k: int) -> int:
        p = self.problem
        return p.compute[i][k] * p.firings[i]

    def place(self, i: int, k: int) -> None:
        p = self.problem
        self.cycles[k] += self.cost_on(i, k)
        for c, peer, _ in p.incident[i]:
            z = self.placed[peer]
            if z is None or peer == i:
                continue
            ch = p.channels[c]
            vol = ch.tokens_per_firing * p.firings[peer]
            self.cycles[z] += vol * (ch.cost_local if z == k else ch.cost_shared)
        self.placed[i] = k


def _candidates(problem: Problem, i: int) -> list[int]:
    pin = problem.pinned_proc[i]
    if pin is not None:
        return [pin]
    if not problem.free_procs:
        raise DseError("E_NO_FREE_PROCESSORS", "free tasks but no free processors")
    return problem.free_procs


def _finish(problem: Problem, placed: Sequence[Optional[int]]) -> Mapping:
    assert all(k is not None for k in placed)
    return problem.mapping_from_locations([int(k) for k in placed])  # type: ignore[arg-type]


def mct(
    problem: Problem,
    order: Optional[Sequence[int]] = None,
    include_comm: bool = True,
) -> Mapping:
    """Minimum completion time: greedy argmin of ready + placement cost.

    ``order`` is a permutation of task declaration indices (default:
    chromosome gene order). With ``include_comm`` off the selection looks
    at compute cycles only; load bookkeeping always includes channels.
    """
    if order is None:
        order = problem.gene_order
    if sorted(order) != list(range(problem.n_tasks)):
        raise DseError("E_BAD_ORDER", "order must be a permutation of all tasks")
    loads = LoadState.empty(problem)
    for i in order:
        best_k, best_c = -1, None
        for k in _candidates(problem, i):
            c = loads.cycles[k] + (
                loads.cost_on(i, k) if include_comm else loads.compute_only(i, k)
            )
            if best_c is None or c < best_c:
                best_k, best_c = k, c
        loads.place(i, best_k)
    return _finish(problem, loads.placed)


def met(problem: Problem) -> Mapping:
    """Minimum execution time: per-task argmin of compute cycles alone."""
    placed: list[Optional[int]] = [None] * problem.n_tasks
    for i in range(problem.n_tasks):
        best_k, best_c = -1, None
        for k in _candidates(problem, i):
            c = problem.compute[i][k]
            if best_c is None or c < best_c:
                best_k, best_c = k, c
        placed[i] = best_k
    return _finish(problem, placed)


def min_min(problem: Problem, include_comm: bool = True) -> Mapping:
    """Commit, each round, the task with the globally smallest best
    completion time (ties: declaration order, then processor index)."""
    loads = LoadState.empty(problem)
    remaining = list(range(problem.n_tasks))
    while remaining:
        pick = None  # (completion, task pos, proc)
        for pos, i in enumerate(remaining):
            for k in _candidates(problem, i):
                c = loads.cycles[k] + (
                    loads.cost_on(i, k) if include_comm else loads.compute_only(i, k)
                )
                if pick is None or c < pick[0]:
                    pick = (c, pos, k)
        _, pos, k = pick
        loads.place(remaining.pop(pos), k)
    return _finish(problem, loads.placed)


def orb_like(problem: Problem) -> Mapping:
    """Balance-driven greedy pass in gene order.

    Chooses, per task, the processor that minimizes the resulting peak
    load, breaking ties by the spread (max - min over processors open to
    free tasks) and then by processor index. This is an approximation of
    load-balancing mappers that track both computation and communication;
    it is a one-pass baseline, not a faithful reimplementation of any
    particular tool.
    """
    loads = LoadState.empty(problem)
    elig = problem.free_procs
    for i in problem.gene_order:
        best = None  # (peak, spread, proc)
        for k in _candidates(problem, i):
            trial = list(loads.cycles)
            trial[k] += loads.cost_on(i, k)
            for c, peer, _ in problem.incident[i]:
                z = loads.placed[peer]
                if z is None or peer == i:
                    continue
                ch = problem.channels[c]
                vol = ch.tokens_per_firing * problem.firings[peer]
                trial[z] += vol * (ch.cost_local if z == k else ch.cost_shared)
            peak = max(trial)
            pool = [trial[e] for e in elig] or trial
            key = (peak, max(pool) - min(pool), k)
            if best is None or key < best:
                best = key
        loads.place(i, best[2])
    return _finish(problem, loads.placed)


HEURISTICS = {
    "mct": mct,
    "met": met,
    "minmin": min_min,
    "orb": orb_like,
}
