"""Reproducible experiment pipelines.

Each scenario builds or loads a population, runs the appropriate
optimization stage, and writes a fixed set of artifacts into its output
directory: a manifest echoing the configuration, a population snapshot,
a measurement report, the per-generation history, and stage-specific
tables. Every run is deterministic given (config, seed); parallel fitness
evaluation never changes any emitted byte.

Scenario kinds
    baseline        evolve codes and structure from scratch
    attack          add parasites to a host snapshot and evolve them
    respond         re-evolve host codes against a parasitized snapshot
    multi_parasite  attack with several parasites (same path as attack)
    synonym_series  attack populations with 1, 2, 4, ... synonym types
    toy             scripted four-state pair pipeline, end to end

Configuration files are INI-style with a [scenario] section and an
optional [ga] section; see `parse_scenario_config` for the schema.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import UsageError
from .metrics import (
    analyze_structure,
    code_distance_matrix,
    distance_matrix,
    measure_report,
    mutual_understanding,
    population_env_info,
    symbol_usage,
)
from .optimizer import GAConfig, evolve
from .popmodel import (
    Code,
    Environment,
    InteractionGraph,
    Population,
    joint_messages,
    load_snapshot,
    require_valid,
    save_snapshot,
    synonym_shift,
)
from .reportkit import emit, mds_embed, write_csv, write_json

KINDS = ("baseline", "attack", "respond", "multi_parasite", "synonym_series", "toy")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a scenario needs besides the input files themselves.

    `seed` is the master seed: it drives the initial population draw and
    is copied into the GA (synonym variants offset it by their index, so
    the series is reproducible as a whole). Paths are plain strings so a
    config is trivially serializable; they are resolved lazily.
    """

    kind: str
    output_dir: str
    num_agents: int = 256
    num_states: int = 16
    host_symbols: int = 16
    parasite_symbols: int = 32
    parasite_count: int = 1
    ga: GAConfig = field(default_factory=GAConfig)
    input_snapshot: str | None = None
    seed: int = 0
    type_counts: tuple = (1, 2, 4)
    parasite_links: bool = True
    free_structure: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UsageError(f"unknown scenario kind {self.kind!r}; expected one of {KINDS}")
        if not self.output_dir:
            raise UsageError("output_dir must be a non-empty path")
        for name in ("num_agents", "num_states", "host_symbols", "parasite_count"):
            if int(getattr(self, name)) < 1:
                raise UsageError(f"{name} must be positive, got {getattr(self, name)}")
        if self.num_agents < 2:
            raise UsageError("need at least two agents to interact")
        if self.parasite_symbols < self.host_symbols:
            raise UsageError(
                f"parasite alphabet ({self.parasite_symbols}) cannot be smaller "
                f"than the host alphabet ({self.host_symbols})"
            )
        if self.seed < 0:
            raise UsageError(f"seed must be non-negative, got {self.seed}")
        counts = tuple(int(k) for k in self.type_counts)
        if not counts or any(k < 1 for k in counts):
            raise UsageError(f"type_counts must be positive integers, got {self.type_counts}")
        object.__setattr__(self, "type_counts", counts)
        if not isinstance(self.ga, GAConfig):
            raise UsageError("ga must be a GAConfig")


@dataclass
class ScenarioResult:
    """What a scenario hands back to callers (files carry the same data)."""

    kind: str
    population: Population
    report: object
    history: object
    output_dir: Path
    details: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# configuration files

_SCENARIO_KEYS = {
    "kind": "str",
    "output_dir": "str",
    "agents": "int",
    "states": "int",
    "host_symbols": "int",
    "parasite_symbols": "int",
    "parasites": "int",
    "seed": "int",
    "input_snapshot": "str",
    "type_counts": "ints",
    "parasite_links": "bool",
    "free_structure": "bool",
}

_GA_KEYS = {
    "population_size": "int",
    "max_generations": "int",
    "mutation_rate": "float",
    "crossover_rate": "float",
    "tournament_size": "int",
    "elitism_count": "int",
    "stall_generations": "int",
}

_BOOL_WORDS = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _convert(section: str, key: str, text: str, typ: str):
    text = text.strip()
    try:
        if typ == "int":
            return int(text)
        if typ == "float":
            return float(text)
        if typ == "bool":
            return _BOOL_WORDS[text.lower()]
        if typ == "ints":
            return tuple(int(part) for part in text.split(",") if part.strip())
    except (ValueError, KeyError):
        raise UsageError(f"[{section}] {key} = {text!r} is not a valid {typ}") from None
    return text


def parse_scenario_config(path) -> ScenarioConfig:
    """Read an INI config file.

    [scenario] keys: kind (required), output_dir, agents, states,
    host_symbols, parasite_symbols, parasites, seed, input_snapshot,
    type_counts (comma-separated), parasite_links, free_structure.
    [ga] keys mirror GAConfig except seed, which always comes from the
    scenario. Unknown sections or keys are errors, not warnings.
    """
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise UsageError(f"malformed config {path}: {exc}") from exc

    if parser.defaults():
        raise UsageError("config must not use a [DEFAULT] section")
    unknown = set(parser.sections()) - {"scenario", "ga"}
    if unknown:
        raise UsageError(f"unknown config sections {sorted(unknown)}; expected [scenario] and [ga]")
    if "scenario" not in parser:
        raise UsageError("config needs a [scenario] section")

    values = {}
    for key, raw in parser["scenario"].items():
        if key not in _SCENARIO_KEYS:
            raise UsageError(
                f"unknown [scenario] key {key!r}; allowed: {sorted(_SCENARIO_KEYS)}"
            )
        values[key] = _convert("scenario", key, raw, _SCENARIO_KEYS[key])
    if "kind" not in values:
        raise UsageError("config needs kind under [scenario]")

    ga_values = {}
    if "ga" in parser:
        for key, raw in parser["ga"].items():
            if key not in _GA_KEYS:
                raise UsageError(f"unknown [ga] key {key!r}; allowed: {sorted(_GA_KEYS)}")
            ga_values[key] = _convert("ga", key, raw, _GA_KEYS[key])

    rename = {"agents": "num_agents", "states": "num_states", "parasites": "parasite_count"}
    kwargs = {rename.get(k, k): v for k, v in values.items()}
    kwargs.setdefault("output_dir", str(Path("runs") / kwargs["kind"]))
    kwargs["ga"] = GAConfig(**ga_values)
    return ScenarioConfig(**kwargs)


# ---------------------------------------------------------------------------
# shared emission helpers

def _prepare_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _write_manifest(cfg: ScenarioConfig, out: Path) -> None:
    # paths are where a run lives, not what it computes; leaving them out
    # keeps identical experiments byte-identical wherever they are written
    echo = {
        "kind": cfg.kind,
        "agents": cfg.num_agents,
        "states": cfg.num_states,
        "host_symbols": cfg.host_symbols,
        "parasite_symbols": cfg.parasite_symbols,
        "parasites": cfg.parasite_count,
        "type_counts": list(cfg.type_counts),
        "parasite_links": cfg.parasite_links,
        "free_structure": cfg.free_structure,
        "ga": {
            "population_size": cfg.ga.population_size,
            "max_generations": cfg.ga.max_generations,
            "mutation_rate": cfg.ga.mutation_rate,
            "crossover_rate": cfg.ga.crossover_rate,
            "tournament_size": cfg.ga.tournament_size,
            "elitism_count": cfg.ga.elitism_count,
            "stall_generations": cfg.ga.stall_generations,
        },
    }
    write_json(out / "manifest.json", {
        "package": "codepop",
        "version": __version__,
        "seed": cfg.seed,
        "config": echo,
    })


def _emit_usage(pop: Population, path, exclude=()) -> None:
    usage = symbol_usage(pop, exclude=exclude)
    write_csv(path, ["symbol", "probability"],
              ([i, float(p)] for i, p in enumerate(usage.p)))


def _embedding_payload(pop: Population) -> dict:
    """2D layout of the distinct codes; point size carries type multiplicity."""
    struct = analyze_structure(pop)
    type_of = np.asarray(struct.type_of)
    reps = [int(np.flatnonzero(type_of == t)[0]) for t in range(struct.num_types)]
    labels = tuple(f"type{t}" for t in range(struct.num_types))
    emb = mds_embed(code_distance_matrix([pop.codes[a] for a in reps], labels))
    comp_of = {}
    for ci, comp in enumerate(struct.components):
        for t in comp.type_ids:
            comp_of[int(t)] = ci
    payload = emb.to_dict()
    payload["sizes"] = [int(struct.type_sizes[t]) for t in range(struct.num_types)]
    payload["components"] = [comp_of.get(t, -1) for t in range(struct.num_types)]
    return payload


def _emit_parasite_distances(pop: Population, out: Path) -> None:
    full = distance_matrix(pop)
    parasites = sorted(pop.parasites)
    labels = list(full.labels)
    write_csv(out / "parasite_code_distances.csv",
              ["id"] + labels,
              ([labels[p]] + [float(v) for v in full.d[p]] for p in parasites))
    write_csv(out / "parasite_pair_distances.csv",
              ["id"] + [labels[p] for p in parasites],
              ([labels[p]] + [float(full.d[p, q]) for q in parasites] for p in parasites))


def _emit_run(out: Path, pop: Population, history) -> object:
    save_snapshot(pop, out / "snapshot.json")
    report = measure_report(pop)
    emit(report, "json", out / "report.json")
    emit(history, "csv", out / "history.csv")
    _emit_usage(pop, out / "symbol_usage.csv")
    return report


def _resolve_input(cfg: ScenarioConfig, pop: Population | None) -> Population:
    if pop is None:
        if cfg.input_snapshot is None:
            raise UsageError(f"{cfg.kind} needs an input snapshot (input_snapshot is unset)")
        pop = load_snapshot(cfg.input_snapshot)
    return require_valid(pop)


def _ring_edges(n: int) -> list:
    if n == 2:
        return [(0, 1)]
    return [(i, (i + 1) % n) for i in range(n)]


def _random_hosts(cfg: ScenarioConfig) -> Population:
    """Seed population for baseline runs; the GA replaces all of it anyway."""
    rng = np.random.default_rng(cfg.seed)
    env = Environment.uniform(cfg.num_states)
    codes = [
        Code.deterministic(rng.integers(0, cfg.host_symbols, size=cfg.num_states),
                           cfg.host_symbols)
        for _ in range(cfg.num_agents)
    ]
    graph = InteractionGraph.from_edges(_ring_edges(cfg.num_agents), cfg.num_agents)
    return Population(env, codes, parasites=(), graph=graph)


# ---------------------------------------------------------------------------
# stages

def run_baseline(cfg: ScenarioConfig, *, jobs: int = 1, progress=None) -> ScenarioResult:
    """Evolve codes and interaction structure from a random start.

    Emits, besides the common artifacts: structure.json (types, components,
    bipartite flags), distance_matrix.csv over all agents, embedding.json
    (one point per code type, sized by type count), joint_messages.csv.
    """
    base = _random_hosts(cfg)
    pop, history = evolve(base, "baseline", replace(cfg.ga, seed=cfg.seed),
                          jobs=jobs, progress=progress)
    out = _prepare_dir(cfg.output_dir)
    _write_manifest(cfg, out)
    report = _emit_run(out, pop, history)
    struct = analyze_structure(pop)
    emit(struct, "json", out / "structure.json")
    emit(distance_matrix(pop), "csv", out / "distance_matrix.csv")
    write_json(out / "embedding.json", _embedding_payload(pop))
    emit(joint_messages(pop), "csv", out / "joint_messages.csv")
    return ScenarioResult("baseline", pop, report, history, out,
                          details={"structure": struct})


def _attack_impl(cfg: ScenarioConfig, pop: Population | None, kind: str,
                 *, jobs: int, progress) -> ScenarioResult:
    base = _resolve_input(cfg, pop)
    if base.parasites:
        raise UsageError("attack input must be a parasite-free host population")
    if cfg.parasite_symbols < base.alphabet_size:
        raise UsageError(
            f"parasite alphabet ({cfg.parasite_symbols}) cannot be smaller than "
            f"the snapshot's alphabet ({base.alphabet_size})"
        )

    report_before = measure_report(base)
    n, k = base.num_agents, cfg.parasite_count
    codes = [c.widened(cfg.parasite_symbols) for c in base.codes]
    codes += [Code.deterministic(np.zeros(base.num_states, dtype=int),
                                 cfg.parasite_symbols)] * k
    # placeholder edges keep the staged population valid; the genome owns
    # every parasite link from generation zero on
    edges = [(i, j) for i, j, _ in base.graph.edge_list()] + [(0, n + p) for p in range(k)]
    staged = Population(base.environment, codes,
                        parasites=tuple(range(n, n + k)),
                        graph=InteractionGraph.from_edges(edges, n + k))

    pop_out, history = evolve(staged, "attack", replace(cfg.ga, seed=cfg.seed),
                              jobs=jobs, progress=progress,
                              allow_parasite_links=cfg.parasite_links)
    out = _prepare_dir(cfg.output_dir)
    _write_manifest(cfg, out)
    emit(report_before, "json", out / "report_before.json")
    _emit_usage(base, out / "symbol_usage_before.csv")
    report = _emit_run(out, pop_out, history)
    _emit_parasite_distances(pop_out, out)
    return ScenarioResult(kind, pop_out, report, history, out, details={
        "report_before": report_before,
        "mu_before": report_before.mutual_understanding,
        "mu_after": report.mutual_understanding,
        "usage_before": symbol_usage(base),
    })


def run_attack(cfg: ScenarioConfig, pop: Population | None = None,
               *, jobs: int = 1, progress=None) -> ScenarioResult:
    """Append parasites to a host snapshot and evolve their codes and links.

    Host codes are widened to the parasite alphabet but never altered; host
    interactions stay fixed. Also emits report_before.json and
    symbol_usage_before.csv (the pre-attack state) and the final parasite
    code distance to every agent.
    """
    return _attack_impl(cfg, pop, "attack", jobs=jobs, progress=progress)


def run_multi_parasite(cfg: ScenarioConfig, pop: Population | None = None,
                       *, jobs: int = 1, progress=None) -> ScenarioResult:
    """Attack with `parasite_count` parasites evolved jointly.

    With a single parasite this is exactly `run_attack`; the separate entry
    point exists so configs can say what they mean. Pairwise parasite code
    distances land in parasite_pair_distances.csv.
    """
    return _attack_impl(cfg, pop, "multi_parasite", jobs=jobs, progress=progress)


def run_response(cfg: ScenarioConfig, pop: Population | None = None,
                 *, jobs: int = 1, progress=None) -> ScenarioResult:
    """Re-evolve host codes against a parasitized snapshot.

    Parasite codes and, unless free_structure is set, the whole interaction
    graph stay frozen. The history gains a parasite_symbol_mass column: the
    share of host symbol usage that still falls on symbols the parasites
    emit. The report carries final identifiability and per-parasite
    blend-in divergence.
    """
    base = _resolve_input(cfg, pop)
    if not base.parasites:
        raise UsageError("response needs a snapshot that contains parasites")
    report_before = measure_report(base)
    parasite_syms = sorted(set().union(
        *(set(base.codes[p].used_symbols().tolist()) for p in base.parasites)))

    pop_out, history = evolve(base, "response", replace(cfg.ga, seed=cfg.seed),
                              jobs=jobs, progress=progress,
                              free_structure=cfg.free_structure)
    out = _prepare_dir(cfg.output_dir)
    _write_manifest(cfg, out)
    emit(report_before, "json", out / "report_before.json")
    report = _emit_run(out, pop_out, history)

    def mass(p: Population) -> float:
        return float(symbol_usage(p, exclude=p.parasites).p[parasite_syms].sum())

    return ScenarioResult("respond", pop_out, report, history, out, details={
        "report_before": report_before,
        "mu_before": report_before.mutual_understanding,
        "mu_after": report.mutual_understanding,
        "parasite_symbol_mass_before": mass(base),
        "parasite_symbol_mass_after": mass(pop_out),
    })


def run_synonym_series(cfg: ScenarioConfig, *, jobs: int = 1, progress=None) -> ScenarioResult:
    """Attack well-mixed populations that differ only in synonym-type count.

    One random base code is drawn once. The variant with k types splits the
    agents into k equal blocks and gives block b the base code relabeled
    upward by b * host_symbols, over an alphabet of k * host_symbols; every
    such variant has the same mutual understanding up to the finite-size
    self-exclusion effect. Each variant is attacked in its own types_<k>/
    subdirectory (GA seed offset by the variant index) and series.csv
    collects pre-attack and converged mutual understanding per variant.
    """
    n = cfg.num_agents
    for k in cfg.type_counts:
        if n % k:
            raise UsageError(f"{k} synonym types cannot split {n} agents evenly")
    rng = np.random.default_rng(cfg.seed)
    base_syms = rng.integers(0, cfg.host_symbols, size=cfg.num_states)
    env = Environment.uniform(cfg.num_states)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    graph = InteractionGraph.from_edges(edges, n)

    out = _prepare_dir(cfg.output_dir)
    _write_manifest(cfg, out)
    rows = []
    variants = []
    for idx, k in enumerate(cfg.type_counts):
        alphabet = k * cfg.host_symbols
        block = n // k
        wide = Code.deterministic(base_syms, cfg.host_symbols).widened(alphabet)
        codes = [synonym_shift(wide, (a // block) * cfg.host_symbols) for a in range(n)]
        vpop = Population(env, codes, parasites=(), graph=graph)
        mu_pre = mutual_understanding(vpop)

        sub_cfg = replace(cfg, kind="attack", seed=cfg.seed + idx,
                          host_symbols=alphabet, parasite_symbols=alphabet,
                          output_dir=str(out / f"types_{k}"))
        res = _attack_impl(sub_cfg, vpop, "attack", jobs=jobs, progress=progress)
        rows.append([k, mu_pre, res.report.mutual_understanding])
        variants.append(res)

    write_csv(out / "series.csv", ["types", "pre_attack_mu", "converged_mu"], rows)
    last = variants[-1]
    return ScenarioResult("synonym_series", last.population, last.report,
                          last.history, out,
                          details={"rows": rows, "variants": variants})


def apply_shift_probe(pop, shift: int | None = None) -> tuple:
    """Relabel every host code upward by `shift` and compare env-information.

    Returns (before, after): the population environmental information
    I(env; X, X') with the codes as given and with every non-parasite code
    shifted. The input population is never modified. With no parasites the
    shift is a bijective relabeling of all senders, so both values match.
    Default shift is half the alphabet; a shift that would push any used
    host symbol out of the alphabet is an error.
    """
    if isinstance(pop, (str, Path)):
        pop = load_snapshot(pop)
    require_valid(pop)
    if shift is None:
        shift = pop.alphabet_size // 2
    before = population_env_info(pop)
    codes = [c if i in pop.parasites else synonym_shift(c, shift)
             for i, c in enumerate(pop.codes)]
    shifted = Population(pop.environment, codes, parasites=pop.parasites, graph=pop.graph)
    return before, population_env_info(shifted)


def run_toy(cfg: ScenarioConfig, *, jobs: int = 1, progress=None) -> ScenarioResult:
    """Four-state pair pipeline: attack, response, shift probe, one command.

    Two hosts share the swapped one-bit code and understand each other
    perfectly (1 bit). A parasite evolved over the doubled alphabet drives
    mutual understanding to zero; re-evolving the host codes recovers it.
    The probe shifts the post-attack host codes into the upper alphabet
    half and reports the environmental information gain. Population sizes
    come from the construction, so the agent/state/symbol fields of the
    config are ignored.
    """
    env = Environment.uniform(4)
    host = Code.deterministic((1, 1, 0, 0), alphabet_size=2)
    pre = Population(env, [host, host], parasites=(),
                     graph=InteractionGraph.from_edges([(0, 1)], 2))

    out = _prepare_dir(cfg.output_dir)
    _write_manifest(cfg, out)
    save_snapshot(pre, out / "snapshot.json")
    emit(measure_report(pre), "json", out / "report.json")

    attack_cfg = replace(cfg, kind="attack", num_agents=2, num_states=4,
                         host_symbols=2, parasite_symbols=4, parasite_count=1,
                         output_dir=str(out / "attack"))
    attacked = _attack_impl(attack_cfg, pre, "attack", jobs=jobs, progress=progress)

    respond_cfg = replace(attack_cfg, kind="respond", output_dir=str(out / "response"))
    responded = run_response(respond_cfg, attacked.population, jobs=jobs, progress=progress)

    before, after = apply_shift_probe(attacked.population, shift=2)
    write_json(out / "probe.json", {
        "shift": 2,
        "env_info_before": before,
        "env_info_after": after,
        "gain": after - before,
    })

    return ScenarioResult("toy", responded.population, responded.report,
                          responded.history, out, details={
                              "mu_pre": mutual_understanding(pre),
                              "mu_attacked": attacked.report.mutual_understanding,
                              "mu_recovered": responded.report.mutual_understanding,
                              "probe_before": before,
                              "probe_after": after,
                              "attack": attacked,
                              "response": responded,
                          })


_RUNNERS = {
    "baseline": run_baseline,
    "attack": run_attack,
    "respond": run_response,
    "multi_parasite": run_multi_parasite,
    "synonym_series": run_synonym_series,
    "toy": run_toy,
}


def run_scenario(cfg: ScenarioConfig, *, jobs: int = 1, progress=None) -> ScenarioResult:
    """Dispatch on cfg.kind; snapshot-consuming kinds load cfg.input_snapshot."""
    return _RUNNERS[cfg.kind](cfg, jobs=jobs, progress=progress)
