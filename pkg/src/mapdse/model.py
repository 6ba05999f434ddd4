"""Application, platform, and mapping models.

An application is a process network: tasks connected by point-to-point
FIFO channels. Several applications can be merged onto one shared-memory
platform; the merged :class:`Problem` carries a single chromosome layout
(``gene_order``) in which every task occupies one gene whose value is a
processor index.

Conventions used throughout the package:

- Tasks are addressed by qualified id ``"<app>.<task>"`` after merging,
  or by their declaration index (apps concatenated in declaration order).
- Processors are addressed by id or by index into
  ``platform.processors``.
- ``gene_order`` lists task declaration indices in a deterministic
  topological order per app: strongly connected components are condensed,
  the condensation is topologically sorted (ties by smallest member
  index), and tasks inside a component keep declaration order.
- Processors flagged ``pinned_only`` (e.g. dedicated I/O processors)
  never receive free tasks; they are excluded from the assignment pool
  and from the mapping space size.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import networkx as nx

from .errors import DseError

FORMAT_VERSION = 1


@dataclass(frozen=True)
class Task:
    """One process of an application.

    compute_cost maps processor *type* to cycles per firing and must
    cover every type present in the platform. firings_per_frame is the
    number of firings that make up one frame of work.
    """

    id: str
    compute_cost: dict[str, int]
    firings_per_frame: int = 1
    pinned_to: Optional[str] = None


@dataclass(frozen=True)
class Channel:
    """Directed point-to-point FIFO between two tasks of one app.

    cost_local / cost_shared are per-token endpoint costs (cycles spent
    by the task touching the token) depending on whether both endpoints
    are mapped to the same processor. token_size is in abstract words
    and only matters for bus occupancy.
    """

    id: str
    src: str
    dst: str
    tokens_per_firing: int = 1
    token_size: int = 1
    capacity: int = 16
    cost_local: int = 1
    cost_shared: int = 1
    initial_tokens: int = 0


@dataclass(frozen=True)
class AppGraph:
    name: str
    tasks: tuple[Task, ...]
    channels: tuple[Channel, ...]


@dataclass(frozen=True)
class Processor:
    id: str
    type: str
    pinned_only: bool = False


@dataclass(frozen=True)
class Platform:
    """Shared-memory multiprocessor with a single FCFS bus."""

    processors: tuple[Processor, ...]
    bus_word_cycles: int = 1
    arbitration: str = "fcfs"


@dataclass(frozen=True)
class Mapping:
    """Chromosome: processor index per gene, genes in ``gene_order``."""

    genes: tuple[int, ...]


@dataclass(frozen=True)
class Diagnostic:
    code: str
    severity: str  # "error" | "warning"
    where: str
    message: str

    def is_error(self) -> bool:
        return self.severity == "error"


def _topo_gene_order(app: AppGraph) -> list[int]:
    # Condense cycles, then topologically sort the condensation with a
    # deterministic tie-break; inside a component keep declaration order.
    index = {t.id: i for i, t in enumerate(app.tasks)}
    g = nx.DiGraph()
    g.add_nodes_from(range(len(app.tasks)))
    for ch in app.channels:
        s, d = index.get(ch.src), index.get(ch.dst)
        if s is None or d is None or s == d:
            continue  # reported by validate_problem; keep the order total
        g.add_edge(s, d)
    cond = nx.condensation(g)
    comps = nx.lexicographical_topological_sort(
        cond, key=lambda n: min(cond.nodes[n]["members"])
    )
    return [i for c in comps for i in sorted(cond.nodes[c]["members"])]


@dataclass
class Problem:
    """One or more apps merged onto a platform, plus derived indexes.

    Instances are immutable by convention once constructed; all derived
    fields are computed in ``__post_init__`` and never mutated afterwards.
    """

    apps: tuple[AppGraph, ...]
    platform: Platform

    def __post_init__(self):
        procs = self.platform.processors
        self.proc_ids: list[str] = [p.id for p in procs]
        self.proc_index: dict[str, int] = {p.id: k for k, p in enumerate(procs)}
        self.free_procs: list[int] = [
            k for k, p in enumerate(procs) if not p.pinned_only
        ]

        # Flattened task view, apps concatenated in declaration order.
        self.task_ids: list[str] = []
        self.task_objs: list[Task] = []
        self.task_app: list[int] = []
        for ai, app in enumerate(self.apps):
            for t in app.tasks:
                self.task_ids.append(f"{app.name}.{t.id}")
                self.task_objs.append(t)
                self.task_app.append(ai)
        self.task_index: dict[str, int] = {}
        for i, tid in enumerate(self.task_ids):
            self.task_index.setdefault(tid, i)
        self.n_tasks = len(self.task_ids)

        self.firings: list[int] = [t.firings_per_frame for t in self.task_objs]
        self.pinned_proc: list[Optional[int]] = [
            self.proc_index.get(t.pinned_to) if t.pinned_to is not None else None
            for t in self.task_objs
        ]
        # cycles per firing per processor; None where the type is missing
        # (validate_problem reports it, every other operation assumes valid)
        self.compute: list[list[Optional[int]]] = [
            [t.compute_cost.get(p.type) for p in procs] for t in self.task_objs
        ]

        # Flattened channels with endpoint declaration indices.
        self.channels: list[Channel] = []
        self.channel_ids: list[str] = []
        self.ch_src: list[int] = []
        self.ch_dst: list[int] = []
        base = 0
        for app in self.apps:
            local = {t.id: base + j for j, t in enumerate(app.tasks)}
            for ch in app.channels:
                if ch.src not in local or ch.dst not in local:
                    continue  # dangling; reported by validate_problem
                self.channels.append(ch)
                self.channel_ids.append(f"{app.name}.{ch.id}")
                self.ch_src.append(local[ch.src])
                self.ch_dst.append(local[ch.dst])
            base += len(app.tasks)

        # incident[i] = (channel index, peer index, tokens i moves per frame)
        self.incident: list[list[tuple[int, int, int]]] = [
            [] for _ in range(self.n_tasks)
        ]
        self.in_channels: list[list[int]] = [[] for _ in range(self.n_tasks)]
        self.out_channels: list[list[int]] = [[] for _ in range(self.n_tasks)]
        for c, ch in enumerate(self.channels):
            s, d = self.ch_src[c], self.ch_dst[c]
            self.incident[s].append((c, d, ch.tokens_per_firing * self.firings[s]))
            self.incident[d].append((c, s, ch.tokens_per_firing * self.firings[d]))
            self.out_channels[s].append(c)
            self.in_channels[d].append(c)

        # Chromosome layout: per-app topological order, apps concatenated.
        self.gene_order: list[int] = []
        base = 0
        for app in self.apps:
            self.gene_order.extend(base + i for i in _topo_gene_order(app))
            base += len(app.tasks)
        self.gene_of_task: list[int] = [0] * self.n_tasks
        for g, i in enumerate(self.gene_order):
            self.gene_of_task[i] = g
        self.free_genes: list[int] = [
            g for g, i in enumerate(self.gene_order) if self.pinned_proc[i] is None
        ]

    # -- mapping helpers ------------------------------------------------

    def locations(self, mapping: Mapping) -> list[int]:
        """Processor index per task declaration index."""
        genes = mapping.genes
        return [genes[g] for g in self.gene_of_task]

    def mapping_from_locations(self, loc: Sequence[int]) -> Mapping:
        return Mapping(tuple(loc[i] for i in self.gene_order))

    def mapping_from_ids(self, ids: Sequence[str]) -> Mapping:
        if len(ids) != len(self.gene_order):
            raise DseError(
                "E_BAD_MAPPING_LENGTH",
                f"expected {len(self.gene_order)} genes, got {len(ids)}",
            )
        genes = []
        for s in ids:
            k = self.proc_index.get(s)
            if k is None:
                raise DseError("E_UNKNOWN_PROCESSOR", f"no processor {s!r}")
            genes.append(k)
        return Mapping(tuple(genes))

    def mapping_to_ids(self, mapping: Mapping) -> list[str]:
        return [self.proc_ids[k] for k in mapping.genes]

    def resolve_task(self, task: Union[int, str]) -> int:
        if isinstance(task, int):
            if not 0 <= task < self.n_tasks:
                raise DseError("E_UNKNOWN_TASK", f"task index {task} out of range")
            return task
        i = self.task_index.get(task)
        if i is None:
            raise DseError("E_UNKNOWN_TASK", f"no task {task!r}")
        return i

    def resolve_proc(self, proc: Union[int, str]) -> int:
        if isinstance(proc, int):
            if not 0 <= proc < len(self.proc_ids):
                raise DseError(
                    "E_UNKNOWN_PROCESSOR", f"processor index {proc} out of range"
                )
            return proc
        k = self.proc_index.get(proc)
        if k is None:
            raise DseError("E_UNKNOWN_PROCESSOR", f"no processor {proc!r}")
        return k


def merge_apps(apps: Sequence[AppGraph], platform: Platform) -> Problem:
    """Merge apps onto one platform; task ids become ``app.task``."""
    if not apps:
        raise DseError("E_EMPTY_APPS", "need at least one application")
    names = [a.name for a in apps]
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})
        raise DseError("E_DUPLICATE_APP_NAME", f"duplicate app name(s): {dup}")
    return Problem(apps=tuple(apps), platform=platform)


def validate_mapping(problem: Problem, mapping: Mapping) -> None:
    """Raise unless ``mapping`` is well-formed for ``problem``."""
    n = len(problem.gene_order)
    if len(mapping.genes) != n:
        raise DseError(
            "E_BAD_MAPPING_LENGTH",
            f"expected {n} genes, got {len(mapping.genes)}",
        )
    nproc = len(problem.proc_ids)
    for g, k in enumerate(mapping.genes):
        i = problem.gene_order[g]
        if not 0 <= k < nproc:
            raise DseError(
                "E_UNKNOWN_PROCESSOR",
                f"gene {g} ({problem.task_ids[i]}) has processor index {k}",
            )
        pin = problem.pinned_proc[i]
        if pin is not None and k != pin:
            raise DseError(
                "E_PIN_VIOLATION",
                f"{problem.task_ids[i]} is pinned to "
                f"{problem.proc_ids[pin]} but mapped to {problem.proc_ids[k]}",
            )
        if pin is None and problem.platform.processors[k].pinned_only:
            raise DseError(
                "E_RESERVED_PROCESSOR",
                f"free task {problem.task_ids[i]} mapped to reserved "
                f"processor {problem.proc_ids[k]}",
            )


def mapping_space_size(problem: Problem) -> int:
    """|free processors| ** |free tasks| (pinned tasks contribute 1)."""
    n_free = len(problem.free_genes)
    if n_free == 0:
        return 1
    return len(problem.free_procs) ** n_free


def random_mapping(problem: Problem, rng: random.Random) -> Mapping:
    """Uniform over the mapping space; pinned genes are forced."""
    free = problem.free_procs
    if not free and problem.free_genes:
        raise DseError("E_NO_FREE_PROCESSORS", "free tasks but no free processors")
    genes = []
    for i in problem.gene_order:
        pin = problem.pinned_proc[i]
        genes.append(pin if pin is not None else free[rng.randrange(len(free))])
    return Mapping(tuple(genes))


def validate_problem(
    problem: Problem, allow_self_loops: bool = False
) -> list[Diagnostic]:
    """Structural diagnostics; empty iff the problem is well-formed."""
    out: list[Diagnostic] = []

    def err(code, where, msg):
        out.append(Diagnostic(code, "error", where, msg))

    def warn(code, where, msg):
        out.append(Diagnostic(code, "warning", where, msg))

    plat = problem.platform
    if not plat.processors:
        err("E_NO_PROCESSORS", "platform", "platform has no processors")
    seen = set()
    for p in plat.processors:
        if p.id in seen:
            err("E_DUP_PROCESSOR", p.id, f"duplicate processor id {p.id!r}")
        seen.add(p.id)
    if plat.bus_word_cycles < 0:
        err("E_NEGATIVE_BUS", "platform", "bus_word_cycles must be >= 0")
    if plat.arbitration != "fcfs":
        err("E_BAD_ARBITRATION", "platform", f"unsupported {plat.arbitration!r}")

    types = {p.type for p in plat.processors}
    for app in problem.apps:
        where = app.name
        if not app.tasks:
            err("E_NO_TASKS", where, "app has no tasks")
        ids = set()
        for t in app.tasks:
            tw = f"{where}.{t.id}"
            if t.id in ids:
                err("E_DUP_TASK", tw, f"duplicate task id {t.id!r}")
            ids.add(t.id)
            missing = sorted(ty for ty in types if ty not in t.compute_cost)
            if missing:
                err("E_COST_INCOMPLETE", tw, f"no compute cost for type(s) {missing}")
            for ty, c in t.compute_cost.items():
                if c < 0:
                    err("E_COST_NEGATIVE", tw, f"compute cost for {ty!r} is negative")
            if t.firings_per_frame < 1:
                err("E_BAD_FIRINGS", tw, "firings_per_frame must be >= 1")
            if t.pinned_to is not None and t.pinned_to not in problem.proc_index:
                err("E_BAD_PIN", tw, f"pinned to unknown processor {t.pinned_to!r}")
        cids = set()
        firings = {t.id: t.firings_per_frame for t in app.tasks}
        for ch in app.channels:
            cw = f"{where}.{ch.id}"
            if ch.id in cids:
                err("E_DUP_CHANNEL", cw, f"duplicate channel id {ch.id!r}")
            cids.add(ch.id)
            for end in (ch.src, ch.dst):
                if end not in ids:
                    err("E_CHANNEL_DANGLING", cw, f"endpoint {end!r} is not a task")
            if ch.src == ch.dst and not allow_self_loops:
                err("E_SELF_LOOP", cw, "self loops are rejected by default")
            if ch.tokens_per_firing < 1:
                err("E_BAD_CHANNEL_PARAM", cw, "tokens_per_firing must be >= 1")
            if ch.capacity < 1:
                err("E_BAD_CHANNEL_PARAM", cw, "capacity must be >= 1")
            if ch.token_size < 0 or ch.cost_local < 0 or ch.cost_shared < 0:
                err("E_BAD_CHANNEL_PARAM", cw, "costs and sizes must be >= 0")
            if ch.initial_tokens < 0:
                err("E_BAD_CHANNEL_PARAM", cw, "initial_tokens must be >= 0")
            elif ch.initial_tokens > ch.capacity:
                err("E_INITIAL_OVERFLOW", cw, "initial_tokens exceed capacity")
            if ch.cost_local > ch.cost_shared:
                warn("W_COST_INVERTED", cw, "cost_local exceeds cost_shared")
            if ch.capacity < ch.tokens_per_firing:
                warn("W_CAPACITY_LT_FIRING", cw, "one firing can never be written")
            fs, fd = firings.get(ch.src), firings.get(ch.dst)
            if fs is not None and fd is not None and fs != fd:
                warn("W_RATE_MISMATCH", cw, f"src fires {fs}/frame, dst {fd}/frame")

    if problem.free_genes and not problem.free_procs:
        err("E_NO_FREE_PROCESSORS", "platform", "free tasks but every processor is pinned_only")
    out.extend(check_deadlock_free(problem))
    return out


def check_deadlock_free(problem: Problem) -> list[Diagnostic]:
    """Static sufficient check for channel-cycle deadlocks.

    Warns when a directed channel cycle cannot ever fire: no channel on
    the cycle holds enough initial tokens for one firing of its reader.
    Absence of warnings is not a liveness proof.
    """
    out: list[Diagnostic] = []
    g = nx.DiGraph()
    g.add_nodes_from(range(problem.n_tasks))
    for c in range(len(problem.channels)):
        g.add_edge(problem.ch_src[c], problem.ch_dst[c], idx=c)
    for cycle in nx.simple_cycles(g):
        chans = []
        ok = False
        for a, b in zip(cycle, cycle[1:] + cycle[:1]):
            c = g.edges[a, b]["idx"]
            chans.append(c)
            if problem.channels[c].initial_tokens >= problem.channels[c].tokens_per_firing:
                ok = True
        if not ok:
            names = ", ".join(problem.channel_ids[c] for c in chans)
            out.append(
                Diagnostic(
                    "W_POSSIBLE_DEADLOCK",
                    "warning",
                    problem.task_ids[cycle[0]],
                    f"channel cycle [{names}] has no initial tokens to start",
                )
            )
    out.sort(key=lambda d: (d.where, d.message))
    return out


# -- JSON serialization -------------------------------------------------


def problem_to_dict(problem: Problem) -> dict:
    def task_d(t: Task) -> dict:
        d = {
            "id": t.id,
            "compute_cost": dict(sorted(t.compute_cost.items())),
            "firings_per_frame": t.firings_per_frame,
        }
        if t.pinned_to is not None:
            d["pinned_to"] = t.pinned_to
        return d

    return {
        "format": FORMAT_VERSION,
        "platform": {
            "processors": [
                {"id": p.id, "type": p.type, **({"pinned_only": True} if p.pinned_only else {})}
                for p in problem.platform.processors
            ],
            "bus_word_cycles": problem.platform.bus_word_cycles,
            "arbitration": problem.platform.arbitration,
        },
        "apps": [
            {
                "name": a.name,
                "tasks": [task_d(t) for t in a.tasks],
                "channels": [asdict(c) for c in a.channels],
            }
            for a in problem.apps
        ],
    }


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise DseError("E_BAD_FORMAT", f"{where}: missing {key!r}")
    return d[key]


def problem_from_dict(data: dict) -> Problem:
    if not isinstance(data, dict):
        raise DseError("E_BAD_FORMAT", "problem document must be an object")
    if data.get("format") != FORMAT_VERSION:
        raise DseError(
            "E_BAD_FORMAT",
            f"unsupported format {data.get('format')!r}, expected {FORMAT_VERSION}",
        )
    pd = _require(data, "platform", "problem")
    procs = tuple(
        Processor(
            id=_require(p, "id", "processor"),
            type=_require(p, "type", "processor"),
            pinned_only=bool(p.get("pinned_only", False)),
        )
        for p in _require(pd, "processors", "platform")
    )
    platform = Platform(
        processors=procs,
        bus_word_cycles=int(pd.get("bus_word_cycles", 1)),
        arbitration=pd.get("arbitration", "fcfs"),
    )
    apps = []
    for ad in _require(data, "apps", "problem"):
        name = _require(ad, "name", "app")
        tasks = tuple(
            Task(
                id=_require(t, "id", f"{name} task"),
                compute_cost={k: int(v) for k, v in _require(t, "compute_cost", f"{name} task").items()},
                firings_per_frame=int(t.get("firings_per_frame", 1)),
                pinned_to=t.get("pinned_to"),
            )
            for t in ad.get("tasks", [])
        )
        channels = tuple(
            Channel(
                id=_require(c, "id", f"{name} channel"),
                src=_require(c, "src", f"{name} channel"),
                dst=_require(c, "dst", f"{name} channel"),
                tokens_per_firing=int(c.get("tokens_per_firing", 1)),
                token_size=int(c.get("token_size", 1)),
                capacity=int(c.get("capacity", 16)),
                cost_local=int(c.get("cost_local", 1)),
                cost_shared=int(c.get("cost_shared", 1)),
                initial_tokens=int(c.get("initial_tokens", 0)),
            )
            for c in ad.get("channels", [])
        )
        apps.append(AppGraph(name=name, tasks=tasks, channels=channels))
    return merge_apps(apps, platform)


def load_problem(path: Union[str, Path]) -> Problem:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as e:
        raise DseError("E_IO", f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise DseError("E_BAD_FORMAT", f"{path} is not valid JSON: {e}") from e
    return problem_from_dict(data)


def save_problem(problem: Problem, path: Union[str, Path]) -> None:
    text = json.dumps(problem_to_dict(problem), indent=2, sort_keys=True) + "\n"
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as e:
        raise DseError("E_IO", f"cannot write {path}: {e}") from e
