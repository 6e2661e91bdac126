"""Named information measures over populations.

Mutual understanding, per-agent environmental information, agent
identifiability, the parasite blend-in divergence, receiver-side missing
information, code distances, symbol usage and interaction-structure analysis.
All values are exact and in bits.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import popmodel, probkit
from .errors import DegenerateConditioningError, UsageError
from .popmodel import Code, Population, require_valid
from .probkit import Dist1, Dist2, _entropy_bits


def _info_vs_rest(tensor: np.ndarray) -> float:
    """I(axis 0; axes 1..) for a joint probability tensor."""
    first = tensor.reshape(tensor.shape[0], -1)
    value = (
        _entropy_bits(first.sum(axis=1))
        + _entropy_bits(first.sum(axis=0))
        - _entropy_bits(first)
    )
    return max(value, 0.0)


def mutual_understanding(pop: Population) -> float:
    """I(X; X') between the messages of an interacting pair, in bits."""
    return probkit.mutual_information(popmodel.joint_messages(pop))


def env_info(pop: Population, agent: int) -> float:
    """I(state; X, X') given that `agent` is the sender of X."""
    tensor = popmodel.joint_messages_env(pop, sender=agent)
    return _info_vs_rest(tensor.p)


def env_info_receiver(pop: Population, agent: int) -> float:
    """Same as env_info but conditioning on the receiver role; equal by symmetry."""
    tensor = popmodel.joint_messages_env(pop, receiver=agent)
    swapped = np.swapaxes(tensor.p, 1, 2)
    return _info_vs_rest(swapped)


def population_env_info(pop: Population) -> float:
    """I(state; X, X') of the unconditioned interaction mixture."""
    return _info_vs_rest(popmodel.joint_messages_env(pop).p)


def sensor_info(pop: Population, agent: int) -> float:
    """I(state; X) carried by the agent's own messages alone."""
    require_valid(pop)
    if not 0 <= agent < pop.num_agents:
        raise UsageError(f"agent {agent} out of range")
    joint = pop.environment.prior[:, None] * pop.codes[agent].table
    return _info_vs_rest(joint)


def identifiability(pop: Population) -> float:
    """I(sender agent; X, X'): how much messages reveal who is talking."""
    return _info_vs_rest(popmodel.joint_agent_messages(pop).p)


def blend_kl(pop: Population, parasite: int) -> float:
    """KL divergence of the parasite's pair distribution from the population's."""
    cond = popmodel.joint_messages_env(pop, sender=parasite).p.sum(axis=0)
    full = popmodel.joint_messages(pop)
    return probkit.kl_divergence(Dist2(cond), full)


def missing_info(pop: Population, parasite: int) -> float:
    """I(state; X' | X) with the parasite in the receiver role sending X'."""
    tensor = popmodel.joint_messages_env(pop, receiver=parasite)
    return probkit.conditional_mutual_information(tensor, target=0, given=1)


def symbol_usage(pop: Population, exclude=()) -> Dist1:
    """Sender-side symbol marginal, optionally excluding some agents as senders."""
    require_valid(pop)
    excluded = set(int(i) for i in exclude)
    keep = [i for i in range(pop.num_agents) if i not in excluded]
    if not keep:
        raise UsageError("every agent was excluded")
    codes = pop.code_stack()
    prior = pop.environment.prior
    sender_mass = pop.graph.weights.sum(axis=1)
    mass = float(sender_mass[keep].sum())
    if mass <= 0.0:
        raise DegenerateConditioningError("remaining agents never send")
    usage = np.einsum("i,ims,m->s", sender_mass[keep], codes[keep], prior)
    return Dist1(usage / mass)


def code_distance(a: Code, b: Code) -> float:
    """sqrt of the summed per-state Jensen-Shannon divergences between two codes."""
    if a.table.shape != b.table.shape:
        raise UsageError(f"code shapes differ: {a.table.shape} vs {b.table.shape}")
    total = 0.0
    for row_a, row_b in zip(a.table, b.table):
        mix = 0.5 * (row_a + row_b)
        total += _entropy_bits(mix) - 0.5 * (_entropy_bits(row_a) + _entropy_bits(row_b))
    return float(np.sqrt(max(total, 0.0)))


@dataclass(frozen=True)
class DistanceMatrix:
    d: np.ndarray
    labels: tuple = ()


def distance_matrix(pop: Population) -> DistanceMatrix:
    """Pairwise code distances between all agents."""
    require_valid(pop)
    return code_distance_matrix(pop.codes, labels=tuple(str(i) for i in range(pop.num_agents)))


def code_distance_matrix(codes, labels=()) -> DistanceMatrix:
    codes = list(codes)
    n = len(codes)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = code_distance(codes[i], codes[j])
    return DistanceMatrix(d, tuple(labels))


def _group_codes(codes) -> list:
    """Group code indices by equality (exact for 0/1 tables, sup-norm 1e-9 otherwise)."""
    groups = []
    reps = []
    for idx, code in enumerate(codes):
        placed = False
        for g, rep in enumerate(reps):
            if rep.table.shape == code.table.shape and np.abs(rep.table - code.table).max() < 1e-9:
                groups[g].append(idx)
                placed = True
                break
        if not placed:
            reps.append(code)
            groups.append([idx])
    return groups


@dataclass(frozen=True)
class ComponentReport:
    agents: tuple
    type_ids: tuple
    type_sizes: tuple
    bipartite: bool


@dataclass(frozen=True)
class StructureReport:
    type_of: tuple
    type_sizes: tuple
    components: tuple

    @property
    def num_types(self) -> int:
        return len(self.type_sizes)

    def to_dict(self) -> dict:
        return {
            "type_of": list(self.type_of),
            "type_sizes": list(self.type_sizes),
            "components": [
                {
                    "agents": list(c.agents),
                    "type_ids": list(c.type_ids),
                    "type_sizes": list(c.type_sizes),
                    "bipartite": c.bipartite,
                }
                for c in self.components
            ],
        }


def analyze_structure(pop: Population, agents=None) -> StructureReport:
    """Connected components, code-type grouping and per-component bipartiteness.

    Bipartiteness is judged on the type-quotient graph of each component:
    an edge between agents of the same type, or an odd cycle of types,
    makes the component non-bipartite.
    """
    require_valid(pop)
    if agents is None:
        agents = range(pop.num_agents)
    agents = sorted(int(a) for a in agents)
    groups = _group_codes([pop.codes[a] for a in agents])
    type_of = {}
    for type_id, members in enumerate(groups):
        for local in members:
            type_of[agents[local]] = type_id
    adj = {a: [] for a in agents}
    keep = set(agents)
    w = pop.graph.weights
    for a in agents:
        for b in np.flatnonzero(w[a] > 0.0):
            if int(b) in keep:
                adj[a].append(int(b))

    seen = set()
    components = []
    for start in agents:
        if start in seen:
            continue
        queue = [start]
        seen.add(start)
        members = []
        while queue:
            cur = queue.pop()
            members.append(cur)
            for nxt in adj[cur]:
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        members.sort()
        local_types = sorted(set(type_of[a] for a in members))
        # 2-color the quotient graph over types; same-type edges are self-loops.
        quotient = {t: set() for t in local_types}
        bipartite = True
        for a in members:
            for b in adj[a]:
                ta, tb = type_of[a], type_of[b]
                if ta == tb:
                    bipartite = False
                quotient[ta].add(tb)
        if bipartite:
            color = {}
            for seed_t in local_types:
                if seed_t in color:
                    continue
                color[seed_t] = 0
                stack = [seed_t]
                while stack and bipartite:
                    t = stack.pop()
                    for u in quotient[t]:
                        if u not in color:
                            color[u] = 1 - color[t]
                            stack.append(u)
                        elif color[u] == color[t]:
                            bipartite = False
                            break
        sizes = tuple(sum(1 for a in members if type_of[a] == t) for t in local_types)
        components.append(
            ComponentReport(tuple(members), tuple(local_types), sizes, bipartite)
        )
    global_sizes = tuple(len(g) for g in groups)
    return StructureReport(
        tuple(type_of[a] for a in agents), global_sizes, tuple(components)
    )


def restricted_mutual_understanding(pop: Population, agents) -> float:
    """Mutual understanding over interactions whose endpoints both lie in `agents`."""
    require_valid(pop)
    keep = sorted(set(int(a) for a in agents))
    w = np.zeros_like(pop.graph.weights)
    idx = np.ix_(keep, keep)
    w[idx] = pop.graph.weights[idx]
    total = float(w.sum())
    if total <= 0.0:
        raise DegenerateConditioningError("no interactions inside the given agent set")
    codes = pop.code_stack()
    prior = pop.environment.prior
    a, b = np.nonzero(w)
    joint = np.einsum("e,ems,emt,m->st", w[a, b] / total, codes[a], codes[b], prior, optimize=True)
    return probkit.mutual_information(Dist2(joint))


@dataclass(frozen=True)
class ParasiteMeasures:
    blend_kl: float
    missing_info: float
    env_info: float
    sensor_info: float

    def to_dict(self) -> dict:
        return {
            "blend_kl": self.blend_kl,
            "missing_info": self.missing_info,
            "env_info": self.env_info,
            "sensor_info": self.sensor_info,
        }


@dataclass(frozen=True)
class MeasureReport:
    mutual_understanding: float
    per_agent_env_info: tuple
    avg_env_info: float
    identifiability: float
    population_env_info: float
    parasite_measures: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mutual_understanding": self.mutual_understanding,
            "per_agent_env_info": list(self.per_agent_env_info),
            "avg_env_info": self.avg_env_info,
            "identifiability": self.identifiability,
            "population_env_info": self.population_env_info,
            "parasite_measures": {
                str(k): v.to_dict() for k, v in sorted(self.parasite_measures.items())
            },
        }


def measure_report(pop: Population) -> MeasureReport:
    """All population-level measures plus per-parasite measures when present."""
    require_valid(pop)
    per_agent = tuple(env_info(pop, a) for a in range(pop.num_agents))
    parasite_measures = {
        p: ParasiteMeasures(
            blend_kl=blend_kl(pop, p),
            missing_info=missing_info(pop, p),
            env_info=per_agent[p],
            sensor_info=sensor_info(pop, p),
        )
        for p in sorted(pop.parasites)
    }
    return MeasureReport(
        mutual_understanding=mutual_understanding(pop),
        per_agent_env_info=per_agent,
        avg_env_info=float(np.mean(per_agent)),
        identifiability=identifiability(pop),
        population_env_info=population_env_info(pop),
        parasite_measures=parasite_measures,
    )
