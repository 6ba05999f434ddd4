"""Elitist genetic algorithm over mapping chromosomes.

The chromosome is the gene vector of a :class:`~mapdse.model.Mapping`
(processor index per task, genes in topological order). Fitness is the
inverse of the simulated objective time, so deadlocked mappings get
fitness 0 and are never selected.

Three mutation operators are provided:

- ``gene_random``: every free gene redrawn independently with a small
  per-gene probability (the classic bit-flip analogue).
- ``three_step``: one of three local edits picked uniformly - redraw one
  gene, swap the processors of two genes, or push one task from the
  most-loaded to the least-loaded processor.
- ``beg``: a guided repair that greedily migrates tasks away from the
  most-loaded processor while the analytic peak usage does not grow,
  falls back to wholesale exchange of two processors' task sets, and as
  a last resort regenerates the chromosome with a randomized greedy
  (mct over a shuffled task order). This biases offspring toward
  balanced, communication-aware mappings without consulting the
  simulator.

Survivor policy is strictly elitist: the best individual of the current
population survives unchanged, the other n-1 slots are filled with new
offspring. Evaluations are cached by chromosome, so the evaluator runs
at most once per distinct mapping per run.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

from .errors import DseError
from .heuristics import mct, min_min
from .metrics import task_cost_on, usage_after_move, usage_list
from .model import Mapping, Problem, random_mapping
from .simulator import EvalResult, objective_time

Objective = Union[int, Fraction, float]
Evaluator = Callable[[Mapping], EvalResult]

SELECTIONS = ("roulette", "random", "tournament")
CROSSOVERS = ("one_point", "two_point", "uniform")
MUTATIONS = ("beg", "gene_random", "three_step")
INITS = ("random", "seeded_minmin")
FITNESS_TRANSFORMS = ("inverse",)


@dataclass(frozen=True)
class GaConfig:
    pop_size: int = 8
    max_generations: int = 128
    stall_generations: int = 32
    selection: str = "roulette"
    tournament_size: int = 2
    crossover: str = "one_point"
    crossover_prob: float = 0.7
    mutation: str = "beg"
    mutation_prob_chromosome: float = 0.8
    mutation_prob_gene: float = 0.05
    init: str = "random"
    fitness_transform: str = "inverse"
    seed: int = 0

    def validate(self) -> None:
        if self.pop_size < 2:
            raise DseError("E_BAD_GA_CONFIG", "pop_size must be >= 2")
        if self.max_generations < 0:
            raise DseError("E_BAD_GA_CONFIG", "max_generations must be >= 0")
        if self.stall_generations < 1:
            raise DseError("E_BAD_GA_CONFIG", "stall_generations must be >= 1")
        for name in ("crossover_prob", "mutation_prob_chromosome", "mutation_prob_gene"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DseError("E_BAD_GA_CONFIG", f"{name} must be in [0, 1]")
        if self.selection not in SELECTIONS:
            raise DseError("E_BAD_GA_CONFIG", f"unknown selection {self.selection!r}")
        if self.crossover not in CROSSOVERS:
            raise DseError("E_BAD_GA_CONFIG", f"unknown crossover {self.crossover!r}")
        if self.mutation not in MUTATIONS:
            raise DseError("E_BAD_GA_CONFIG", f"unknown mutation {self.mutation!r}")
        if self.init not in INITS:
            raise DseError("E_BAD_GA_CONFIG", f"unknown init {self.init!r}")
        if self.fitness_transform not in FITNESS_TRANSFORMS:
            raise DseError(
                "E_BAD_GA_CONFIG",
                f"unknown fitness_transform {self.fitness_transform!r}",
            )
        if self.tournament_size < 2:
            raise DseError("E_BAD_TOURNAMENT_SIZE", "tournament_size must be >= 2")


def preset_config(name: str, **overrides) -> GaConfig:
    """Named operator bundles; overrides are applied on top."""
    presets = {
        "beg": GaConfig(mutation="beg", init="random"),
        "eg": GaConfig(mutation="gene_random", init="random"),
        "ga3sm": GaConfig(mutation="three_step", init="seeded_minmin"),
    }
    if name not in presets:
        raise DseError("E_BAD_GA_CONFIG", f"unknown preset {name!r}")
    cfg = replace(presets[name], **overrides)
    if cfg.stall_generations > max(cfg.max_generations, 1):
        cfg = replace(cfg, stall_generations=max(cfg.max_generations, 1))
    return cfg


# -- selection ------------------------------------------------------------


def select_roulette(fitnesses: Sequence[float], rng: random.Random, count: int) -> list[int]:
    """Fitness-proportional sampling with replacement."""
    total = 0.0
    cum = []
    for f in fitnesses:
        if f < 0:
            raise DseError("E_NONPOSITIVE_FITNESS", "negative fitness in roulette")
        total += f
        cum.append(total)
    if total <= 0.0:
        raise DseError("E_NONPOSITIVE_FITNESS", "total fitness is not positive")
    out = []
    for _ in range(count):
        r = rng.random() * total
        lo, hi = 0, len(cum) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if cum[mid] > r:
                hi = mid
            else:
                lo = mid + 1
        out.append(lo)
    return out


def select_random(n: int, rng: random.Random, count: int) -> list[int]:
    """Uniform sampling with replacement, ignoring fitness."""
    return [rng.randrange(n) for _ in range(count)]


def select_tournament(
    fitnesses: Sequence[float], rng: random.Random, count: int, k: int
) -> list[int]:
    """Best of k contenders drawn uniformly with replacement."""
    n = len(fitnesses)
    if not 2 <= k <= n:
        raise DseError("E_BAD_TOURNAMENT_SIZE", f"need 2 <= k <= {n}, got {k}")
    out = []
    for _ in range(count):
        best = rng.randrange(n)
        for _ in range(k - 1):
            c = rng.randrange(n)
            if fitnesses[c] > fitnesses[best]:
                best = c
        out.append(best)
    return out


# -- crossover ------------------------------------------------------------


def _repair_pins(problem: Problem, genes: list[int]) -> tuple[int, ...]:
    for g in range(len(genes)):
        pin = problem.pinned_proc[problem.gene_order[g]]
        if pin is not None:
            genes[g] = pin
    return tuple(genes)


def crossover_one_point(
    problem: Problem, a: Mapping, b: Mapping, rng: random.Random
) -> tuple[Mapping, Mapping]:
    length = len(a.genes)
    if length < 2:
        return a, b
    cut = rng.randrange(1, length)
    c1 = list(a.genes[:cut]) + list(b.genes[cut:])
    c2 = list(b.genes[:cut]) + list(a.genes[cut:])
    return (
        Mapping(_repair_pins(problem, c1)),
        Mapping(_repair_pins(problem, c2)),
    )


def crossover_two_point(
    problem: Problem, a: Mapping, b: Mapping, rng: random.Random
) -> tuple[Mapping, Mapping]:
    length = len(a.genes)
    if length < 3:
        return crossover_one_point(problem, a, b, rng)
    i, j = sorted(rng.sample(range(1, length), 2))
    c1 = list(a.genes[:i]) + list(b.genes[i:j]) + list(a.genes[j:])
    c2 = list(b.genes[:i]) + list(a.genes[i:j]) + list(b.genes[j:])
    return (
        Mapping(_repair_pins(problem, c1)),
        Mapping(_repair_pins(problem, c2)),
    )


def crossover_uniform(
    problem: Problem, a: Mapping, b: Mapping, rng: random.Random
) -> tuple[Mapping, Mapping]:
    c1, c2 = list(a.genes), list(b.genes)
    for g in range(len(c1)):
        if rng.random() < 0.5:
            c1[g], c2[g] = c2[g], c1[g]
    return (
        Mapping(_repair_pins(problem, c1)),
        Mapping(_repair_pins(problem, c2)),
    )


CROSSOVER_FNS = {
    "one_point": crossover_one_point,
    "two_point": crossover_two_point,
    "uniform": crossover_uniform,
}


# -- mutation -------------------------------------------------------------


def mutate_gene_random(
    problem: Problem, m: Mapping, p_gene: float, rng: random.Random
) -> Mapping:
    """Redraw each free gene with probability ``p_gene`` (may redraw the
    same processor; pinned genes are never touched)."""
    free = problem.free_procs
    genes = list(m.genes)
    for g in problem.free_genes:
        if rng.random() < p_gene:
            genes[g] = free[rng.randrange(len(free))]
    return Mapping(tuple(genes))


def mutate_three_step(problem: Problem, m: Mapping, rng: random.Random) -> Mapping:
    """One uniformly chosen local edit: gene redraw, gene swap, or moving
    a task from the most-loaded to the least-loaded processor."""
    free = problem.free_procs
    free_genes = problem.free_genes
    genes = list(m.genes)
    op = rng.randrange(3)
    if op == 0:
        if not free_genes:
            return m
        g = free_genes[rng.randrange(len(free_genes))]
        genes[g] = free[rng.randrange(len(free))]
    elif op == 1:
        if len(free_genes) < 2:
            return m
        g1, g2 = rng.sample(free_genes, 2)
        genes[g1], genes[g2] = genes[g2], genes[g1]
    else:
        loc = problem.locations(m)
        usage = usage_list(problem, loc)
        x = usage.index(max(usage))
        movable = [
            i for i in range(problem.n_tasks)
            if loc[i] == x and problem.pinned_proc[i] is None
        ]
        if not movable:
            return m
        i = movable[rng.randrange(len(movable))]
        target = min(free, key=lambda k: (usage[k], k))
        if target == x:
            return m
        genes[problem.gene_of_task[i]] = target
    return Mapping(tuple(genes))


def mutate_beg(problem: Problem, m: Mapping, rng: random.Random) -> Mapping:
    """Guided mutation: migrate, switch, or regenerate.

    1. Repeatedly move one free task off the most-loaded processor,
       picking the candidate with the largest migration benefit among
       those that do not raise the peak usage. Revisiting an earlier
       placement is forbidden and total moves are capped, so the loop
       terminates; the analytic peak never increases.
    2. If no migration applied, try exchanging the free task sets of the
       most-loaded processor and some other processor, keeping the
       exchange that minimizes the peak (and does not raise it).
    3. If neither applied, rebuild the chromosome greedily over a
       uniformly shuffled task order.
    """
    nproc = len(problem.proc_ids)
    free_set = set(problem.free_procs)
    loc = problem.locations(m)
    visited = {tuple(loc)}
    cap = problem.n_tasks * nproc
    moves = 0
    migrated = False
    peak0 = None  # peak usage of the input mapping

    while moves < cap:
        usage = usage_list(problem, loc)
        peak = max(usage)
        if peak0 is None:
            peak0 = peak
        x = usage.index(peak)
        best = None  # (benefit, task, target, new usage)
        for i in range(problem.n_tasks):
            if loc[i] != x or problem.pinned_proc[i] is not None:
                continue
            cost_here = task_cost_on(problem, loc, i, x)
            for y in problem.free_procs:
                if y == x:
                    continue
                after = usage_after_move(problem, loc, usage, i, y)
                if max(after) > peak:
                    continue
                state = list(loc)
                state[i] = y
                if tuple(state) in visited:
                    continue
                benefit = cost_here - task_cost_on(problem, loc, i, y)
                if best is None or benefit > best[0]:
                    best = (benefit, i, y)
        if best is None:
            break
        _, i, y = best
        loc[i] = y
        visited.add(tuple(loc))
        moves += 1
        migrated = True

    if migrated:
        assert max(usage_list(problem, loc)) <= peak0, "migration raised the peak"
        return problem.mapping_from_locations(loc)

    usage = usage_list(problem, loc)
    peak = max(usage)
    x = usage.index(peak)
    free_x = [i for i in range(problem.n_tasks)
              if loc[i] == x and problem.pinned_proc[i] is None]
    best_switch = None  # (new peak, target proc, locations)
    if x in free_set:
        for y in problem.free_procs:
            if y == x:
                continue
            free_y = [i for i in range(problem.n_tasks)
                      if loc[i] == y and problem.pinned_proc[i] is None]
            if not free_x and not free_y:
                continue
            swapped = list(loc)
            for i in free_x:
                swapped[i] = y
            for i in free_y:
                swapped[i] = x
            new_peak = max(usage_list(problem, swapped))
            if new_peak > peak:
                continue
            if best_switch is None or new_peak < best_switch[0]:
                best_switch = (new_peak, y, swapped)
    if best_switch is not None:
        assert best_switch[0] <= peak, "switch raised the peak"
        return problem.mapping_from_locations(best_switch[2])

    order = list(range(problem.n_tasks))
    rng.shuffle(order)
    return mct(problem, order)


def make_mutation(cfg: GaConfig) -> Callable[[Problem, Mapping, random.Random], Mapping]:
    if cfg.mutation == "beg":
        return mutate_beg
    if cfg.mutation == "three_step":
        return mutate_three_step
    p = cfg.mutation_prob_gene
    return lambda problem, m, rng: mutate_gene_random(problem, m, p, rng)


# -- evolution ------------------------------------------------------------


@dataclass
class Individual:
    mapping: Mapping
    result: Optional[EvalResult] = None
    objective: Objective = 0


@dataclass(frozen=True)
class GenRecord:
    generation: int
    best_so_far: Objective
    evaluations: int
    wall_time: float
    carried: int  # individuals kept from the previous population
    offspring: int


@dataclass
class RunLog:
    algorithm: str
    seed: int
    records: list[GenRecord] = field(default_factory=list)
    best_mapping: Optional[Mapping] = None
    best_objective: Objective = 0
    termination: str = ""
    evaluations: int = 0
    wall_seconds: float = 0.0


def fitness_of(objective: Objective) -> float:
    o = float(objective)
    if o <= 0 or o == float("inf"):
        return 0.0
    return 1.0 / o


def initial_population(problem: Problem, pop_size: int, rng: random.Random) -> list[Mapping]:
    """Depends only on (problem, pop_size, seed position of rng), so two
    configurations sharing a seed start from identical populations."""
    return [random_mapping(problem, rng) for _ in range(pop_size)]


def evolve(
    problem: Problem, cfg: GaConfig, evaluator: Evaluator
) -> tuple[Mapping, RunLog]:
    cfg.validate()
    rng = random.Random(cfg.seed)
    t0 = time.perf_counter()

    cache: dict[tuple[int, ...], tuple[EvalResult, Objective]] = {}
    evaluations = 0

    def evaluate(ind: Individual) -> None:
        nonlocal evaluations
        key = ind.mapping.genes
        hit = cache.get(key)
        if hit is None:
            try:
                result = evaluator(ind.mapping)
            except DseError:
                raise
            except Exception as e:  # pragma: no cover - defensive
                raise DseError("E_EVALUATOR_FAILURE", f"{type(e).__name__}: {e}") from e
            hit = (result, objective_time(problem, result))
            cache[key] = hit
            evaluations += 1
        ind.result, ind.objective = hit

    pop = [Individual(m) for m in initial_population(problem, cfg.pop_size, rng)]
    for ind in pop:
        evaluate(ind)
    if cfg.init == "seeded_minmin":
        worst = max(range(len(pop)), key=lambda j: (float(pop[j].objective), j))
        pop[worst] = Individual(min_min(problem))
        evaluate(pop[worst])

    def best_index() -> int:
        bi = 0
        for j in range(1, len(pop)):
            if pop[j].objective < pop[bi].objective:
                bi = j
        return bi

    log = RunLog(algorithm=cfg.mutation, seed=cfg.seed)
    bi = best_index()
    best = pop[bi]
    log.records.append(
        GenRecord(0, best.objective, evaluations, time.perf_counter() - t0,
                  carried=0, offspring=len(pop))
    )

    cross = CROSSOVER_FNS[cfg.crossover]
    mutate = make_mutation(cfg)
    stall = 0
    generation = 0
    termination = "max_generations"

    while generation < cfg.max_generations:
        generation += 1
        fitnesses = [fitness_of(ind.objective) for ind in pop]

        def pick(k: int) -> list[int]:
            if cfg.selection == "roulette":
                return select_roulette(fitnesses, rng, k)
            if cfg.selection == "random":
                return select_random(len(pop), rng, k)
            return select_tournament(fitnesses, rng, k, cfg.tournament_size)

        elite = pop[best_index()]
        nxt = [elite]
        while len(nxt) < cfg.pop_size:
            i1, i2 = pick(2)
            c1, c2 = pop[i1].mapping, pop[i2].mapping
            if rng.random() < cfg.crossover_prob:
                c1, c2 = cross(problem, c1, c2, rng)
            for child in (c1, c2):
                if len(nxt) >= cfg.pop_size:
                    break
                if rng.random() < cfg.mutation_prob_chromosome:
                    child = mutate(problem, child, rng)
                nxt.append(Individual(child))
        pop = nxt
        for ind in pop:
            if ind.result is None:
                evaluate(ind)

        gen_best = pop[best_index()]
        if gen_best.objective < best.objective:
            best = gen_best
            stall = 0
        else:
            stall += 1
        log.records.append(
            GenRecord(generation, best.objective, evaluations,
                      time.perf_counter() - t0,
                      carried=1, offspring=cfg.pop_size - 1)
        )
        if stall >= cfg.stall_generations:
            termination = "stall"
            break

    log.best_mapping = best.mapping
    log.best_objective = best.objective
    log.termination = termination
    log.evaluations = evaluations
    log.wall_seconds = time.perf_counter() - t0
    return best.mapping, log
