"""Analytic load metrics over mappings.

These are cheap static estimates used by the constructive heuristics and
the guided mutation operator; the simulator remains the authoritative
fitness oracle.

Processor usage charges, per frame, every task mapped to a processor
with its compute cycles plus the endpoint cost of every channel incident
to it (each endpoint pays for the tokens it moves: the writer for the
write, the reader for the read). A channel endpoint costs ``cost_local``
per token when both endpoints share a processor and ``cost_shared``
otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

from .errors import DseError
from .model import Mapping, Problem


@dataclass(frozen=True)
class UsageVector:
    processor_ids: tuple[str, ...]
    cycles: tuple[int, ...]
    eligible: tuple[bool, ...]  # False for pinned_only processors

    def as_dict(self) -> dict[str, int]:
        return dict(zip(self.processor_ids, self.cycles))

    def __getitem__(self, proc_id: str) -> int:
        return self.cycles[self.processor_ids.index(proc_id)]


@dataclass(frozen=True)
class MigrationBenefit:
    task: str
    from_proc: str
    to_proc: str
    cost_from: int
    cost_to: int
    benefit: int  # cost_from - cost_to


def usage_list(problem: Problem, loc: Sequence[int]) -> list[int]:
    """Per-frame usage per processor index, from task locations."""
    u = [0] * len(problem.proc_ids)
    compute = problem.compute
    firings = problem.firings
    channels = problem.channels
    for i, k in enumerate(loc):
        acc = compute[i][k] * firings[i]
        for c, peer, vol in problem.incident[i]:
            ch = channels[c]
            acc += vol * (ch.cost_local if loc[peer] == k else ch.cost_shared)
        u[k] += acc
    return u


def task_cost_on(problem: Problem, loc: Sequence[int], i: int, k: int) -> int:
    """Per-frame cost of task ``i`` if hosted on ``k``, peers unmoved."""
    acc = problem.compute[i][k] * problem.firings[i]
    channels = problem.channels
    for c, peer, vol in problem.incident[i]:
        ch = channels[c]
        here = k if peer == i else loc[peer]
        acc += vol * (ch.cost_local if here == k else ch.cost_shared)
    return acc


def usage_after_move(
    problem: Problem, loc: Sequence[int], usage: Sequence[int], i: int, to: int
) -> list[int]:
    """Usage after migrating task ``i`` to ``to``, computed incrementally.

    Exact: besides removing/adding the task's own cost this also adjusts
    peers already sitting on the source or target processor, whose
    channel endpoints flip between local and shared.
    """
    x = loc[i]
    u = list(usage)
    u[x] -= problem.compute[i][x] * problem.firings[i]
    u[to] += problem.compute[i][to] * problem.firings[i]
    channels = problem.channels
    firings = problem.firings
    for c, peer, vol in problem.incident[i]:
        ch = channels[c]
        z = loc[peer] if peer != i else to
        u[x] -= vol * (ch.cost_local if z == x else ch.cost_shared)
        u[to] += vol * (ch.cost_local if z == to else ch.cost_shared)
        if peer == i:
            continue
        delta = ch.tokens_per_firing * firings[peer] * (ch.cost_shared - ch.cost_local)
        if z == x:
            u[x] += delta  # peer's endpoint was local, turns shared
        elif z == to:
            u[to] -= delta  # peer's endpoint was shared, turns local
    return u


def pusage(problem: Problem, mapping: Mapping) -> UsageVector:
    """Per-frame usage of every processor under ``mapping``."""
    u = usage_list(problem, problem.locations(mapping))
    return UsageVector(
        processor_ids=tuple(problem.proc_ids),
        cycles=tuple(u),
        eligible=tuple(not p.pinned_only for p in problem.platform.processors),
    )


def migration_benefit(
    problem: Problem,
    mapping: Mapping,
    task: Union[int, str],
    frm: Union[int, str],
    to: Union[int, str],
) -> MigrationBenefit:
    """Cost difference of hosting ``task`` on ``frm`` vs ``to``.

    Positive benefit means the move lowers the task's own per-frame cost.
    Peer placements are taken from ``mapping`` (peers unmoved).
    """
    i = problem.resolve_task(task)
    x = problem.resolve_proc(frm)
    y = problem.resolve_proc(to)
    if x == y:
        raise DseError("E_SAME_PROCESSOR", "from and to must differ")
    loc = problem.locations(mapping)
    if loc[i] != x:
        raise DseError(
            "E_NOT_MAPPED_ON_FROM",
            f"{problem.task_ids[i]} is on {problem.proc_ids[loc[i]]}, "
            f"not {problem.proc_ids[x]}",
        )
    cost_from = task_cost_on(problem, loc, i, x)
    cost_to = task_cost_on(problem, loc, i, y)
    return MigrationBenefit(
        task=problem.task_ids[i],
        from_proc=problem.proc_ids[x],
        to_proc=problem.proc_ids[y],
        cost_from=cost_from,
        cost_to=cost_to,
        benefit=cost_from - cost_to,
    )


def makespan(usage: UsageVector) -> int:
    """Max usage across all processors."""
    return max(usage.cycles) if usage.cycles else 0


def imbalance(usage: UsageVector) -> int:
    """Max minus min usage across processors eligible for free tasks."""
    elig = [c for c, e in zip(usage.cycles, usage.eligible) if e]
    if not elig:
        return 0
    return max(elig) - min(elig)


def usage_variance(usage: UsageVector) -> float:
    """Population variance of eligible-processor usage."""
    elig = [c for c, e in zip(usage.cycles, usage.eligible) if e]
    if not elig:
        return 0.0
    mean = sum(elig) / len(elig)
    return sum((c - mean) ** 2 for c in elig) / len(elig)
