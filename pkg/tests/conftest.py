"""Shared builders for compact and randomized test problems."""

import random
from typing import Optional, Sequence, Union

import pytest

from mapdse import (
    AppGraph,
    Channel,
    Platform,
    Problem,
    Processor,
    Task,
    merge_apps,
)


class FlaggingRandom(random.Random):
    """Real rng that remembers whether shuffle was ever used."""

    shuffled = False

    def shuffle(self, x):
        self.shuffled = True
        super().shuffle(x)


def make_platform(
    n: int = 2,
    types: Optional[Sequence[str]] = None,
    bus: int = 1,
    pinned_only: Sequence[int] = (),
) -> Platform:
    """n processors pe0..pe{n-1}; one type per processor by default."""
    if types is None:
        types = [f"t{k}" for k in range(n)]
    procs = tuple(
        Processor(id=f"pe{k}", type=types[k], pinned_only=k in pinned_only)
        for k in range(n)
    )
    return Platform(processors=procs, bus_word_cycles=bus)


def make_problem(
    costs: Sequence[Union[int, dict, Sequence[int]]],
    edges: Sequence[tuple] = (),
    platform: Optional[Platform] = None,
    n_procs: int = 2,
    bus: int = 1,
    firings: Optional[Sequence[int]] = None,
    pins: Optional[dict] = None,
    app: str = "a",
    **channel_defaults,
) -> Problem:
    """Compact problem builder.

    costs: per task, either one int (same on every type), a list per
    processor type, or a full {type: cycles} dict. edges: (src, dst) or
    (src, dst, {channel overrides}) with task indexes.
    """
    if platform is None:
        platform = make_platform(n_procs, bus=bus)
    type_names = sorted({p.type for p in platform.processors})
    tasks = []
    for i, c in enumerate(costs):
        if isinstance(c, dict):
            cost = c
        elif isinstance(c, int):
            cost = {t: c for t in type_names}
        else:
            by_proc = {p.type: c[k] for k, p in enumerate(platform.processors)}
            cost = by_proc
        tasks.append(
            Task(
                id=f"t{i}",
                compute_cost=cost,
                firings_per_frame=firings[i] if firings else 1,
                pinned_to=(pins or {}).get(i),
            )
        )
    channels = []
    for e, edge in enumerate(edges):
        src, dst = edge[0], edge[1]
        kw = dict(channel_defaults)
        if len(edge) > 2:
            kw.update(edge[2])
        channels.append(Channel(id=f"c{e}", src=f"t{src}", dst=f"t{dst}", **kw))
    graph = AppGraph(name=app, tasks=tuple(tasks), channels=tuple(channels))
    return merge_apps([graph], platform)


def rand_problem(
    rng: random.Random,
    max_tasks: int = 12,
    max_procs: int = 4,
    with_pins: bool = False,
    multirate: bool = False,
    rate_safe: bool = False,
) -> Problem:
    """Random acyclic problem; always passes validation without errors.

    rate_safe keeps channels between equal-rate tasks only, so the
    network can actually sustain every frame (no starvation); without it
    multirate graphs may have mismatched producer/consumer rates, which
    the static metrics tolerate but a simulation run would starve on.
    """
    nproc = rng.randint(1, max_procs)
    pinned_idx = []
    if with_pins and nproc >= 2 and rng.random() < 0.5:
        pinned_idx = [nproc - 1]
    platform = make_platform(nproc, bus=rng.randint(0, 2), pinned_only=pinned_idx)

    n = rng.randint(1, max_tasks)
    tasks = []
    for i in range(n):
        cost = {p.type: rng.randint(1, 100) for p in platform.processors}
        pin = None
        if pinned_idx and rng.random() < 0.2:
            pin = f"pe{pinned_idx[0]}"
        tasks.append(
            Task(
                id=f"t{i}",
                compute_cost=cost,
                firings_per_frame=rng.randint(1, 3) if multirate else 1,
                pinned_to=pin,
            )
        )
    channels = []
    e = 0
    for i in range(n):
        for j in range(i + 1, n):
            if rate_safe and tasks[i].firings_per_frame != tasks[j].firings_per_frame:
                continue
            if rng.random() < 2.0 / max(n, 2):
                tpf = rng.randint(1, 3)
                channels.append(
                    Channel(
                        id=f"c{e}",
                        src=f"t{i}",
                        dst=f"t{j}",
                        tokens_per_firing=tpf,
                        token_size=rng.randint(1, 3),
                        capacity=tpf * rng.randint(2, 5),
                        cost_local=rng.randint(0, 5),
                        cost_shared=rng.randint(0, 15),
                    )
                )
                e += 1
    graph = AppGraph(name="r", tasks=tuple(tasks), channels=tuple(channels))
    return merge_apps([graph], platform)


def rand_locations(problem: Problem, rng: random.Random) -> list[int]:
    """Random task locations honoring pins; independent of Mapping codecs."""
    loc = []
    for i in range(problem.n_tasks):
        pin = problem.pinned_proc[i]
        loc.append(pin if pin is not None else rng.choice(problem.free_procs))
    return loc


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)
