"""Deterministic discrete-event simulation of mapped process networks.

Timing model, all integer cycles:

- A firing is read burst, compute, write burst. Each burst occupies the
  host processor without preemption; between bursts the process re-enters
  the processor's round-robin ready queue.
- A read burst starts once every input FIFO holds one firing's tokens
  and consumes them when it ends; a write burst starts once every output
  FIFO has room for one firing's tokens. Blocked processes leave the
  processor free.
- A channel endpoint costs cost_local per token when both endpoints are
  co-mapped, cost_shared otherwise. Cross-processor tokens additionally
  traverse the single shared bus (token_size * bus_word_cycles cycles per
  token, FCFS); they occupy FIFO space from the start of the write burst
  and become readable when the bus transfer completes. Co-mapped tokens
  become readable when the write burst ends and never touch the bus.
- Simultaneous events are ordered deterministically: bus deliveries
  first, then burst completions by (processor index, task declaration
  index). The same inputs always produce the same schedule, on any
  platform.

Frame accounting: task i has finished frame n once it completed
n * firings_per_frame firings; a frame is done when every task finished
it. fet is the steady-state per-frame time between the warmup frame and
the last frame; tet is the completion time of the last frame overall.

Because execution is self-timed, upstream stages may buffer several
frames ahead of the laggard that closes the warmup frame, so with
warmup_frames > 0 the windowed fet can dip below the busiest
processor's per-frame busy time on deeply pipelined graphs. The
unconditional guarantees are tet >= frames * max busy time (asserted
on every run) and, with warmup_frames = 0, fet >= that busy time.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Union

from .errors import DseError
from .metrics import UsageVector, pusage
from .model import Mapping, Problem, validate_mapping

TraceFn = Callable[[int, str, str, str, str], None]

# task states
_WAIT_TOKENS, _READY, _RUNNING, _WAIT_SPACE, _DONE = range(5)
# phases
_READ, _COMPUTE, _WRITE = range(3)
_PHASE_NAME = ("read", "compute", "write")
# event kinds, doubling as tie ranks: bus deliveries before completions
_EV_BUS, _EV_PHASE = 0, 1


@dataclass(frozen=True)
class SimConfig:
    frames: int = 12
    warmup_frames: int = 2
    deadlock_horizon: int = 1_000_000

    def validate(self) -> None:
        if self.frames < 1:
            raise DseError("E_BAD_SIM_CONFIG", "frames must be >= 1")
        if not 0 <= self.warmup_frames < self.frames:
            raise DseError("E_BAD_SIM_CONFIG", "need 0 <= warmup_frames < frames")
        if self.deadlock_horizon < 1:
            raise DseError("E_BAD_SIM_CONFIG", "deadlock_horizon must be >= 1")


@dataclass(frozen=True)
class EvalResult:
    fet: Fraction  # steady-state cycles per frame
    tet: int  # completion time of the last frame across all apps
    usage: UsageVector
    events: int
    deadlocked: bool


def objective_time(problem: Problem, result: EvalResult) -> Union[Fraction, float]:
    """GA objective: fet for one app, tet when apps share the platform."""
    if result.deadlocked:
        return float("inf")
    return result.tet if len(problem.apps) > 1 else result.fet


def simulate(
    problem: Problem,
    mapping: Mapping,
    cfg: SimConfig = SimConfig(),
    trace: Optional[TraceFn] = None,
) -> EvalResult:
    cfg.validate()
    validate_mapping(problem, mapping)

    n = problem.n_tasks
    nproc = len(problem.proc_ids)
    loc = problem.locations(mapping)
    firings = problem.firings
    total_target = [cfg.frames * f for f in firings]
    warm_target = [cfg.warmup_frames * f for f in firings]

    chs = problem.channels
    nch = len(chs)
    tpf = [c.tokens_per_firing for c in chs]
    cap = [c.capacity for c in chs]
    occ = [c.initial_tokens for c in chs]
    res = [0] * nch
    src = problem.ch_src
    dst = problem.ch_dst
    local = [loc[src[c]] == loc[dst[c]] for c in range(nch)]
    bus_cycles = [
        tpf[c] * chs[c].token_size * problem.platform.bus_word_cycles
        for c in range(nch)
    ]
    ins = problem.in_channels
    outs = problem.out_channels

    def endpoint_cost(c: int) -> int:
        return tpf[c] * (chs[c].cost_local if local[c] else chs[c].cost_shared)

    # burst durations per task: (read, compute, write)
    burst = [
        (
            sum(endpoint_cost(c) for c in ins[i]),
            problem.compute[i][loc[i]],
            sum(endpoint_cost(c) for c in outs[i]),
        )
        for i in range(n)
    ]

    state = [_WAIT_TOKENS] * n
    pending = [_READ] * n
    fired = [0] * n
    warm_time = [0] * n
    done_time = [0] * n
    done_count = 0

    ready: list[list[int]] = [[] for _ in range(nproc)]
    head = [0] * nproc  # popleft position; avoids deque churn
    running: list[Optional[int]] = [None] * nproc

    heap: list[tuple] = []
    serial = 0
    bus_busy = False
    bus_pending: list[tuple] = []
    bus_serial = 0

    def push(time: int, kind: int, k1: int, k2: int, arg: int):
        nonlocal serial
        serial += 1
        heapq.heappush(heap, (time, kind, k1, k2, serial, arg))

    def tokens_ok(i: int) -> bool:
        return all(occ[c] >= tpf[c] for c in ins[i])

    def space_ok(i: int) -> bool:
        return all(occ[c] + res[c] + tpf[c] <= cap[c] for c in outs[i])

    def try_start(p: int, t: int):
        if running[p] is not None:
            return
        q = ready[p]
        h = head[p]
        if h >= len(q):
            return
        i = q[h]
        head[p] = h + 1
        if head[p] > 64:
            del q[: head[p]]
            head[p] = 0
        running[p] = i
        state[i] = _RUNNING
        ph = pending[i]
        if ph == _WRITE:
            for c in outs[i]:
                res[c] += tpf[c]
                assert occ[c] + res[c] <= cap[c], "FIFO overcommitted"
        if trace is not None:
            trace(t, problem.proc_ids[p], problem.task_ids[i],
                  _PHASE_NAME[ph] + "_start", "")
        push(t + burst[i][ph], _EV_PHASE, p, i, ph)

    def enqueue(i: int, phase: int, t: int):
        pending[i] = phase
        state[i] = _READY
        p = loc[i]
        ready[p].append(i)
        try_start(p, t)

    def wake_reader(c: int, t: int):
        i = dst[c]
        if state[i] == _WAIT_TOKENS and tokens_ok(i):
            enqueue(i, _READ, t)

    def wake_writer(c: int, t: int):
        i = src[c]
        if state[i] == _WAIT_SPACE and space_ok(i):
            enqueue(i, _WRITE, t)

    def kick_bus(t: int):
        nonlocal bus_busy
        if bus_busy or not bus_pending:
            return
        c = heapq.heappop(bus_pending)[-1]
        bus_busy = True
        if trace is not None:
            trace(t, "bus", problem.task_ids[src[c]], "bus_start",
                  problem.channel_ids[c])
        push(t + bus_cycles[c], _EV_BUS, loc[dst[c]], dst[c], c)

    def begin_firing(i: int, t: int):
        if ins[i]:
            if tokens_ok(i):
                enqueue(i, _READ, t)
            else:
                state[i] = _WAIT_TOKENS
        else:
            enqueue(i, _COMPUTE, t)

    def finish_firing(i: int, t: int):
        nonlocal done_count
        fired[i] += 1
        if fired[i] == warm_target[i]:
            warm_time[i] = t
        if fired[i] == total_target[i]:
            done_time[i] = t
            state[i] = _DONE
            done_count += 1
        else:
            begin_firing(i, t)

    for i in range(n):
        begin_firing(i, 0)

    events = 0
    deadlocked = False
    while done_count < n:
        if not heap or events >= cfg.deadlock_horizon:
            deadlocked = True
            break
        t, kind, k1, k2, _, arg = heapq.heappop(heap)
        events += 1
        if kind == _EV_BUS:
            c = arg
            res[c] -= tpf[c]
            occ[c] += tpf[c]
            assert 0 <= occ[c] and occ[c] + res[c] <= cap[c], "FIFO out of bounds"
            if trace is not None:
                trace(t, "bus", problem.task_ids[dst[c]], "bus_end",
                      problem.channel_ids[c])
            bus_busy = False
            wake_reader(c, t)
            kick_bus(t)
            continue
        # burst completion on processor k1 by task k2
        p, i, ph = k1, k2, arg
        running[p] = None
        if trace is not None:
            trace(t, problem.proc_ids[p], problem.task_ids[i],
                  _PHASE_NAME[ph] + "_end", "")
        if ph == _READ:
            for c in ins[i]:
                occ[c] -= tpf[c]
                assert occ[c] >= 0, "FIFO underflow"
            for c in ins[i]:
                wake_writer(c, t)
            enqueue(i, _COMPUTE, t)
        elif ph == _COMPUTE:
            if outs[i]:
                if space_ok(i):
                    enqueue(i, _WRITE, t)
                else:
                    state[i] = _WAIT_SPACE
            else:
                finish_firing(i, t)
        else:  # _WRITE
            for c in outs[i]:
                if local[c]:
                    res[c] -= tpf[c]
                    occ[c] += tpf[c]
                    wake_reader(c, t)
                else:
                    # tokens stay reserved until the bus delivers them
                    bus_serial += 1
                    heapq.heappush(bus_pending, (t, p, i, bus_serial, c))
            kick_bus(t)
            finish_firing(i, t)
        try_start(p, t)

    tet = max(done_time, default=0)
    if deadlocked:
        return EvalResult(
            fet=Fraction(0),
            tet=tet,
            usage=pusage(problem, mapping),
            events=events,
            deadlocked=True,
        )

    t_warm = max(warm_time) if cfg.warmup_frames > 0 else 0
    fet = Fraction(tet - t_warm, cfg.frames - cfg.warmup_frames)

    # a processor cannot be busy longer than the elapsed time, so the
    # full run can never beat the busiest processor's total burst time
    per_proc = [0] * nproc
    for i in range(n):
        k = loc[i]
        busy = problem.compute[i][k]
        for c, peer, _vol in problem.incident[i]:
            ch = chs[c]
            cost = ch.cost_local if loc[peer] == k else ch.cost_shared
            busy += ch.tokens_per_firing * cost
        per_proc[k] += busy * firings[i]
    assert tet >= max(per_proc, default=0) * cfg.frames, (
        "elapsed time undercuts the busiest processor's burst time"
    )

    return EvalResult(
        fet=fet,
        tet=tet,
        usage=pusage(problem, mapping),
        events=events,
        deadlocked=False,
    )
