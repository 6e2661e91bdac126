"""Genetic search over codes and interaction structure.

Three regimes share one engine: free co-evolution of every code plus the
graph ("baseline"), a parasite picking its code and attachments against a
frozen population ("attack", minimizing), and a population rewriting its own
codes around a frozen parasite ("response"). Fitness is always the exact
population mutual understanding, never a sampled estimate.

Randomness is drawn from counter-based streams keyed by (seed, generation,
slot), and fitness evaluation is pure, so a run is bit-identical for a given
seed no matter how many workers evaluate fitness.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import UsageError
from .metrics import blend_kl, env_info, missing_info, symbol_usage
from .popmodel import Code, InteractionGraph, Population, require_valid

GOALS = ("baseline", "attack", "response")

_MASK64 = (1 << 64) - 1
_STALL_TOL = 1e-9


def _stream(seed: int, generation: int, slot: int) -> np.random.Generator:
    """Independent stream per (seed, generation, slot); cheap to construct."""
    key = np.array(
        [seed & _MASK64, ((generation << 32) + slot) & _MASK64], dtype=np.uint64
    )
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 200
    max_generations: int = 500
    mutation_rate: float | None = None  # None picks 1/genome_length at run time
    crossover_rate: float = 0.9
    tournament_size: int = 3
    elitism_count: int = 2
    stall_generations: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise UsageError(f"population_size must be >= 2, got {self.population_size}")
        if self.max_generations < 1:
            raise UsageError(f"max_generations must be >= 1, got {self.max_generations}")
        if self.mutation_rate is not None and not 0.0 <= self.mutation_rate <= 1.0:
            raise UsageError(f"mutation_rate must lie in [0, 1], got {self.mutation_rate}")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise UsageError(f"crossover_rate must lie in [0, 1], got {self.crossover_rate}")
        if self.tournament_size < 1:
            raise UsageError(f"tournament_size must be >= 1, got {self.tournament_size}")
        if not 0 <= self.elitism_count < self.population_size:
            raise UsageError(
                f"elitism_count must lie in [0, population_size), got {self.elitism_count}"
            )
        if self.stall_generations < 1:
            raise UsageError(f"stall_generations must be >= 1, got {self.stall_generations}")


@dataclass(frozen=True, eq=False)
class Genome:
    """Flat search-space point: symbol rows for the coded agents + edge bits."""

    kind: str
    codes: np.ndarray      # (len(problem.coded_agents), num_states) ints
    adjacency: np.ndarray  # one bit per problem edge slot
    problem: "Problem"

    @property
    def length(self) -> int:
        return self.codes.size + self.adjacency.size


def _active_slots(g: Genome) -> np.ndarray:
    """Indices of set adjacency bits, scanned once per genome then cached."""
    cached = getattr(g, "_active", None)
    if cached is None:
        cached = np.flatnonzero(g.adjacency)
        object.__setattr__(g, "_active", cached)
    return cached


@dataclass(frozen=True)
class GenRecord:
    generation: int
    best_fitness: float
    mean_fitness: float
    measures: dict = field(default_factory=dict)


@dataclass
class RunHistory:
    goal: str
    records: list = field(default_factory=list)

    def best_series(self) -> list:
        return [r.best_fitness for r in self.records]

    def measure_keys(self) -> list:
        return sorted(self.records[0].measures) if self.records else []

    def columns(self) -> list:
        return ["generation", "best_fitness", "mean_fitness"] + self.measure_keys()

    def rows(self):
        keys = self.measure_keys()
        for r in self.records:
            yield [r.generation, r.best_fitness, r.mean_fitness] + [
                r.measures[k] for k in keys
            ]


def _entropy_of(counts: np.ndarray) -> float:
    pos = counts[counts > 0.0]
    return float(-(pos * np.log2(pos)).sum())


class Problem:
    """Genome layout, decoding and exact fitness for one optimization regime.

    The base population supplies everything the genome does not encode:
    environment, alphabet bound, frozen codes and frozen edges. All base
    codes must be deterministic; the search space is symbol tables.
    """

    def __init__(
        self,
        base: Population,
        goal: str,
        *,
        allow_parasite_links: bool = True,
        free_structure: bool = False,
        init_edge_prob: float | None = None,
    ):
        if goal not in GOALS:
            raise UsageError(f"unknown goal {goal!r}; expected one of {GOALS}")
        require_valid(base)
        for idx, code in enumerate(base.codes):
            if not code.is_deterministic():
                raise UsageError(f"agent {idx} has a stochastic code; search needs symbol tables")
        self.base = base
        self.goal = goal
        self.maximize = goal != "attack"
        n = base.num_agents
        parasites = sorted(base.parasites)
        hosts = [i for i in range(n) if i not in base.parasites]

        if goal == "baseline":
            self.coded_agents = tuple(range(n))
            slots = [(i, j) for i in range(n) for j in range(i + 1, n)]
            fixed = []
        elif goal == "attack":
            if not parasites:
                raise UsageError("attack requires at least one parasite in the population")
            self.coded_agents = tuple(parasites)
            fixed = [(i, j) for i, j, _ in base.graph.edge_list()
                     if i not in base.parasites and j not in base.parasites]
            slots = [tuple(sorted((h, p))) for p in parasites for h in hosts]
            if allow_parasite_links:
                slots += [(parasites[i], parasites[j])
                          for i in range(len(parasites))
                          for j in range(i + 1, len(parasites))]
        else:
            if not parasites:
                raise UsageError("response requires at least one parasite in the population")
            self.coded_agents = tuple(hosts)
            if free_structure:
                slots = [(i, j) for i in range(n) for j in range(i + 1, n)]
                fixed = []
            else:
                slots = []
                fixed = [(i, j) for i, j, _ in base.graph.edge_list()]

        self._slots = np.array(slots, dtype=int).reshape(-1, 2)
        self._fixed = np.array(fixed, dtype=int).reshape(-1, 2)
        self._frozen_graph = goal == "response" and not free_structure
        if self._frozen_graph:
            # keep the base weighting exactly instead of re-uniforming it
            self._fixed_weights = np.array(
                [w for _, _, w in base.graph.edge_list()], dtype=float
            )
        elif goal == "attack":
            host_w = [w for i, j, w in base.graph.edge_list()
                      if i not in base.parasites and j not in base.parasites]
            if host_w and np.ptp(host_w) > 1e-12:
                raise UsageError("attack assumes edge-uniform host interactions")

        if init_edge_prob is None:
            init_edge_prob = 0.5 if goal == "attack" else min(1.0, 2.0 / max(n - 1, 1))
        if not 0.0 <= init_edge_prob <= 1.0:
            raise UsageError(f"init_edge_prob must lie in [0, 1], got {init_edge_prob}")
        self.init_edge_prob = init_edge_prob

        self.code_bound = base.alphabet_size
        self.num_states = base.num_states
        self._prior = np.asarray(base.environment.prior, dtype=float)
        self._coded_idx = np.array(self.coded_agents, dtype=int)
        self._base_symbols = np.stack([c.symbols() for c in base.codes])
        self._fixed_degrees = np.zeros(n, dtype=int)
        for i, j in fixed:
            self._fixed_degrees[i] += 1
            self._fixed_degrees[j] += 1
        self._slots_touching = [
            np.flatnonzero((self._slots == agent).any(axis=1)) for agent in range(n)
        ]
        if goal == "response":
            used = sorted(set().union(
                *(set(base.codes[p].used_symbols().tolist()) for p in parasites)))
            self.parasite_symbols = np.array(used, dtype=int)

    @property
    def num_slots(self) -> int:
        return len(self._slots)

    @property
    def genome_length(self) -> int:
        return len(self.coded_agents) * self.num_states + self.num_slots

    def encode(self, pop: Population) -> Genome:
        """Genome whose decode reproduces `pop` (codes of coded agents + edge bits)."""
        require_valid(pop)
        codes = np.stack([pop.codes[a].symbols() for a in self.coded_agents])
        bits = np.zeros(self.num_slots, dtype=np.uint8)
        for t, (i, j) in enumerate(self._slots):
            if pop.graph.weights[i, j] > 0.0:
                bits[t] = 1
        return Genome(self.goal, codes, bits, self)

    def random_genome(self, rng: np.random.Generator) -> Genome:
        codes = rng.integers(0, self.code_bound,
                             size=(len(self.coded_agents), self.num_states))
        bits = (rng.random(self.num_slots) < self.init_edge_prob).astype(np.uint8)
        return repair(Genome(self.goal, codes, bits, self), rng)

    def _edges(self, genome: Genome) -> np.ndarray:
        if not self.num_slots:
            return self._fixed
        active = self._slots[_active_slots(genome)]
        if len(self._fixed):
            return np.concatenate([self._fixed, active])
        return active

    def decode(self, genome: Genome) -> Population:
        codes = list(self.base.codes)
        for row, agent in zip(genome.codes, self.coded_agents):
            codes[agent] = Code.deterministic(row, self.code_bound)
        if self._frozen_graph:
            graph = self.base.graph
        else:
            graph = InteractionGraph.from_edges(self._edges(genome), self.base.num_agents)
        return Population(self.base.environment, codes, self.base.parasites, graph)

    def fitness(self, genome: Genome) -> float:
        """Exact mutual understanding of the decoded population."""
        sym = self._base_symbols.copy()
        sym[self._coded_idx] = genome.codes
        edges = self._edges(genome)
        a, b = edges[:, 0], edges[:, 1]
        if self._frozen_graph:
            edge_w = self._fixed_weights
        else:
            edge_w = np.full(len(edges), 1.0 / (2 * len(edges)))
        w = (edge_w[:, None] * self._prior[None, :]).ravel()
        s = self.code_bound
        fwd = (sym[a] * s + sym[b]).ravel()
        half = np.bincount(fwd, weights=w, minlength=s * s).reshape(s, s)
        # the reverse orientation is exactly the transpose, so the joint is
        # symmetric and both marginals coincide
        joint = half + half.T
        return 2.0 * _entropy_of(joint.sum(axis=1)) - _entropy_of(joint)

    def diagnostics(self, genome: Genome, fitness: float) -> dict:
        """Per-generation measures of the best individual."""
        out = {"mutual_understanding": fitness}
        if self.goal == "baseline":
            return out
        pop = self.decode(genome)
        parasites = sorted(pop.parasites)
        out["blend_kl"] = float(np.mean([blend_kl(pop, p) for p in parasites]))
        out["missing_info"] = float(np.mean([missing_info(pop, p) for p in parasites]))
        out["parasite_env_info"] = float(np.mean([env_info(pop, p) for p in parasites]))
        if self.goal == "response":
            usage = symbol_usage(pop, exclude=pop.parasites).p
            out["parasite_symbol_mass"] = float(usage[self.parasite_symbols].sum())
        return out

    def evaluate(self, genomes, jobs: int = 1) -> np.ndarray:
        if jobs <= 1:
            return np.array([self.fitness(g) for g in genomes])
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return np.array(list(pool.map(self.fitness, genomes)))


def _hit_positions(rng: np.random.Generator, n: int, rate: float) -> np.ndarray:
    """Sorted positions of per-gene Bernoulli(rate) hits over `n` genes.

    Drawn as count ~ Binomial(n, rate) then a uniform subset (Floyd), which
    has the same law as the naive length-n mask but costs O(count).
    """
    if n == 0 or rate <= 0.0:
        return np.empty(0, dtype=np.intp)
    k = int(rng.binomial(n, rate))
    if k == 0:
        return np.empty(0, dtype=np.intp)
    if 3 * k >= n:
        return np.sort(rng.permutation(n)[:k])
    chosen = set()
    for j in range(n - k, n):
        t = int(rng.integers(0, j + 1))
        chosen.add(j if t in chosen else t)
    return np.sort(np.fromiter(chosen, dtype=np.intp, count=k))


def _coin_mask(rng: np.random.Generator, n: int) -> np.ndarray:
    """Fair per-gene coin as a 0/1 uint8 array; one byte of entropy per 8 genes."""
    raw = rng.integers(0, 256, size=(n + 7) // 8, dtype=np.uint8)
    return np.unpackbits(raw)[:n]


def mutate(g: Genome, rate: float, rng: np.random.Generator) -> Genome:
    """Resample each gene uniformly within its bound with probability `rate`.

    The adjacency is repaired afterward, so the result always decodes to a
    graph without isolated agents.
    """
    codes = g.codes
    pos = _hit_positions(rng, codes.size, rate)
    if pos.size:
        codes = codes.copy()
        codes.ravel()[pos] = rng.integers(0, g.problem.code_bound, size=pos.size)
    bits = g.adjacency
    pos = _hit_positions(rng, bits.size, rate)
    if pos.size:
        bits = bits.copy()
        bits[pos] = rng.integers(0, 2, size=pos.size, dtype=bits.dtype)
    return repair(replace(g, codes=codes, adjacency=bits), rng)


def crossover(a: Genome, b: Genome, rng: np.random.Generator):
    """Uniform crossover; returns two children."""
    if a.kind != b.kind or a.codes.shape != b.codes.shape or a.adjacency.shape != b.adjacency.shape:
        raise UsageError("crossover requires genomes of the same variant and shape")
    take = _coin_mask(rng, a.codes.size).astype(a.codes.dtype).reshape(a.codes.shape)
    btake = _coin_mask(rng, a.adjacency.size)
    # branch-free swap: genes where the coin is 1 trade places between children
    dc = (a.codes ^ b.codes) * take
    da = (a.adjacency ^ b.adjacency) * btake
    c1 = replace(a, codes=a.codes ^ dc, adjacency=a.adjacency ^ da)
    c2 = replace(a, codes=b.codes ^ dc, adjacency=b.adjacency ^ da)
    return c1, c2


def repair(g: Genome, rng: np.random.Generator) -> Genome:
    """Give every isolated agent one uniformly chosen edge from its slots."""
    problem = g.problem
    if not problem.num_slots:
        return g
    active = _active_slots(g)
    degrees = problem._fixed_degrees + np.bincount(
        problem._slots[active].ravel(), minlength=len(problem._fixed_degrees)
    )
    if degrees.min() > 0:
        return g
    bits = g.adjacency.copy()
    for agent in np.flatnonzero(degrees == 0):
        if degrees[agent] > 0:  # an earlier repair edge may have covered it
            continue
        candidates = problem._slots_touching[agent]
        if not candidates.size:
            continue  # structure cannot reach this agent; validation will complain
        pick = int(candidates[rng.integers(len(candidates))])
        bits[pick] = 1
        i, j = problem._slots[pick]
        degrees[i] += 1
        degrees[j] += 1
    return replace(g, adjacency=bits)


def converged(history: RunHistory, cfg: GAConfig) -> bool:
    """Flat best fitness over the last `stall_generations` records, or cap hit."""
    records = history.records
    if not records:
        return False
    if records[-1].generation >= cfg.max_generations:
        return True
    if len(records) >= cfg.stall_generations:
        tail = [r.best_fitness for r in records[-cfg.stall_generations:]]
        return max(tail) - min(tail) < _STALL_TOL
    return False


def _pick(rng: np.random.Generator, scores: np.ndarray, size: int) -> int:
    contenders = rng.integers(0, len(scores), size=size)
    return int(contenders[np.argmax(scores[contenders])])


def evolve(
    base: Population,
    goal: str,
    cfg: GAConfig,
    *,
    jobs: int = 1,
    progress=None,
    allow_parasite_links: bool = True,
    free_structure: bool = False,
    init_edge_prob: float | None = None,
):
    """Run the GA; returns (best population found, per-generation history).

    Baseline and response maximize mutual understanding, attack minimizes it.
    With elitism the per-generation best series is monotone. `jobs` only
    parallelizes fitness evaluation and never changes the result.
    """
    problem = Problem(
        base,
        goal,
        allow_parasite_links=allow_parasite_links,
        free_structure=free_structure,
        init_edge_prob=init_edge_prob,
    )
    rate = cfg.mutation_rate if cfg.mutation_rate is not None else 1.0 / problem.genome_length
    sign = 1.0 if problem.maximize else -1.0
    seed = cfg.seed

    genomes = []
    for i in range(cfg.population_size):
        rng = _stream(seed, 0, i)
        if goal == "response":
            g = problem.encode(base)
            if i > 0:
                g = mutate(g, rate, rng)
        else:
            g = problem.random_genome(rng)
        genomes.append(g)
    fits = problem.evaluate(genomes, jobs)

    history = RunHistory(goal=goal)
    memo = {"genome": None, "measures": None}

    def record(generation: int) -> int:
        best = int(np.argmax(sign * fits))
        if genomes[best] is not memo["genome"]:
            memo["genome"] = genomes[best]
            memo["measures"] = problem.diagnostics(genomes[best], float(fits[best]))
        history.records.append(
            GenRecord(generation, float(fits[best]), float(fits.mean()), memo["measures"])
        )
        if progress is not None:
            progress(history.records[-1])
        return best

    best_idx = record(0)
    generation = 0
    while not converged(history, cfg):
        generation += 1
        order = np.argsort(-sign * fits, kind="stable")
        next_genomes = [genomes[i] for i in order[: cfg.elitism_count]]
        scores = sign * fits
        while len(next_genomes) < cfg.population_size:
            # one stream per produced individual; the even stream also drives
            # parent selection and recombination for its pair
            idx = len(next_genomes)
            rng = _stream(seed, generation, idx)
            pa = genomes[_pick(rng, scores, cfg.tournament_size)]
            pb = genomes[_pick(rng, scores, cfg.tournament_size)]
            if rng.random() < cfg.crossover_rate:
                c1, c2 = crossover(pa, pb, rng)
            else:
                c1, c2 = pa, pb
            next_genomes.append(mutate(c1, rate, rng))
            if len(next_genomes) < cfg.population_size:
                next_genomes.append(mutate(c2, rate, _stream(seed, generation, idx + 1)))
        genomes = next_genomes
        fits = problem.evaluate(genomes, jobs)
        best_idx = record(generation)

    best_pop = problem.decode(genomes[best_idx])
    return require_valid(best_pop), history
