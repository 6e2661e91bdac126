"""Populations of communicating agents and their exact joint distributions.

An agent is a code: a row-stochastic table mapping environment states to
message symbols. A population couples codes with a symmetric interaction
structure p(sender, receiver). All joint distributions over (state, message,
message) tuples are built by exact summation, never by sampling.

Containers accept raw arrays and do only shape checking at construction;
`validate` reports every invariant violation, and every operation that needs
a well-formed population calls `require_valid` first.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateConditioningError, UsageError, ValidationError
from .probkit import NORM_TOL, Dist1, Dist2, Dist3

SNAPSHOT_FORMAT = "codepop-population"
SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class Environment:
    """A finite set of world states with a prior over them."""

    num_states: int
    prior: np.ndarray

    @classmethod
    def uniform(cls, num_states: int) -> "Environment":
        if num_states < 1:
            raise UsageError(f"need at least one state, got {num_states}")
        return cls(num_states, np.full(num_states, 1.0 / num_states))

    @classmethod
    def with_prior(cls, prior) -> "Environment":
        arr = np.asarray(prior, dtype=float)
        if arr.ndim != 1:
            raise UsageError(f"prior must be one-dimensional, got shape {arr.shape}")
        return cls(arr.shape[0], arr)


class Code:
    """Row-stochastic map from environment states to message symbols."""

    __slots__ = ("table",)

    def __init__(self, table):
        arr = np.asarray(table, dtype=float)
        if arr.ndim != 2:
            raise UsageError(f"code table must be two-dimensional, got shape {arr.shape}")
        self.table = arr

    @classmethod
    def deterministic(cls, symbols, alphabet_size: int) -> "Code":
        """Code that maps state i to symbols[i] with probability one."""
        syms = np.asarray(symbols, dtype=int)
        if syms.ndim != 1:
            raise UsageError("symbol list must be one-dimensional")
        if syms.size and (syms.min() < 0 or syms.max() >= alphabet_size):
            raise UsageError(
                f"symbols must lie in [0, {alphabet_size}), got range "
                f"[{syms.min()}, {syms.max()}]"
            )
        table = np.zeros((syms.size, alphabet_size))
        table[np.arange(syms.size), syms] = 1.0
        return cls(table)

    @property
    def num_states(self) -> int:
        return self.table.shape[0]

    @property
    def alphabet_size(self) -> int:
        return self.table.shape[1]

    def is_deterministic(self) -> bool:
        return bool(np.all(np.isin(self.table, (0.0, 1.0))) and np.all(self.table.sum(axis=1) == 1.0))

    def symbols(self) -> np.ndarray:
        """Per-state symbol indices; only defined for deterministic codes."""
        if not self.is_deterministic():
            raise UsageError("symbols() requires a deterministic code")
        return self.table.argmax(axis=1)

    def used_symbols(self) -> np.ndarray:
        """Indices of symbols that carry mass in at least one row."""
        return np.flatnonzero(self.table.sum(axis=0) > 0.0)

    def widened(self, alphabet_size: int) -> "Code":
        """Same code over a larger alphabet; new symbols carry zero mass."""
        if alphabet_size < self.alphabet_size:
            raise UsageError(
                f"cannot narrow alphabet from {self.alphabet_size} to {alphabet_size}"
            )
        if alphabet_size == self.alphabet_size:
            return self
        table = np.zeros((self.num_states, alphabet_size))
        table[:, : self.alphabet_size] = self.table
        return Code(table)

    def __repr__(self) -> str:
        return f"Code(states={self.num_states}, alphabet={self.alphabet_size})"


def bit_code(bit: int, invert: bool = False) -> Code:
    """Two-symbol code over four states that transmits one bit of the state index.

    bit=1 splits states {0,1} from {2,3}; bit=0 splits {0,2} from {1,3}.
    `invert` swaps which symbol stands for which half.
    """
    if bit not in (0, 1):
        raise UsageError(f"bit must be 0 or 1, got {bit}")
    syms = [((s >> bit) & 1) ^ int(invert) for s in range(4)]
    return Code.deterministic(syms, 2)


TOY_CODE_KINDS = ("high-bit", "high-bit-swapped", "low-bit", "low-bit-swapped")


def toy_code(kind: str) -> Code:
    """One of the four canonical 4-state, 2-symbol codes used by the analytic scenarios."""
    table = {
        "high-bit": (1, False),
        "high-bit-swapped": (1, True),
        "low-bit": (0, False),
        "low-bit-swapped": (0, True),
    }
    if kind not in table:
        raise UsageError(f"unknown toy code {kind!r}; expected one of {TOY_CODE_KINDS}")
    return bit_code(*table[kind])


def synonym_shift(code: Code, offset: int) -> Code:
    """Relabel every used symbol x as x + offset within the same alphabet."""
    used = code.used_symbols()
    if used.size:
        lo = int(used.min()) + offset
        hi = int(used.max()) + offset
        if lo < 0 or hi >= code.alphabet_size:
            raise UsageError(
                f"shift by {offset} moves symbols to [{lo}, {hi}], outside "
                f"[0, {code.alphabet_size})"
            )
    table = np.zeros_like(code.table)
    if offset >= 0:
        table[:, offset:] = code.table[:, : code.alphabet_size - offset]
    else:
        table[:, :offset] = code.table[:, -offset:]
    return Code(table)


class InteractionGraph:
    """Symmetric distribution p(sender, receiver) over ordered agent pairs."""

    __slots__ = ("weights",)

    def __init__(self, weights):
        arr = np.asarray(weights, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise UsageError(f"weights must be square, got shape {arr.shape}")
        self.weights = arr

    @classmethod
    def from_edges(cls, edges, num_agents: int) -> "InteractionGraph":
        """Edge-uniform structure: every ordered pair on an edge has weight 1/(2|E|)."""
        edges = [(int(i), int(j)) for i, j in edges]
        if not edges:
            raise UsageError("need at least one edge")
        w = np.zeros((num_agents, num_agents))
        share = 1.0 / (2 * len(edges))
        for i, j in edges:
            if i == j:
                raise UsageError(f"self-edge on agent {i}")
            if not (0 <= i < num_agents and 0 <= j < num_agents):
                raise UsageError(f"edge ({i}, {j}) out of range for {num_agents} agents")
            if w[i, j] != 0.0:
                raise UsageError(f"duplicate edge ({i}, {j})")
            w[i, j] = share
            w[j, i] = share
        return cls(w)

    @classmethod
    def from_weighted_edges(cls, edges, num_agents: int) -> "InteractionGraph":
        """Structure from undirected (i, j, weight) triples; weight is per ordered pair."""
        w = np.zeros((num_agents, num_agents))
        for i, j, weight in edges:
            i, j = int(i), int(j)
            w[i, j] = float(weight)
            w[j, i] = float(weight)
        return cls(w)

    @property
    def num_agents(self) -> int:
        return self.weights.shape[0]

    def edge_list(self):
        """Undirected positive-weight edges as (i, j, weight) with i < j."""
        out = []
        n = self.num_agents
        for i in range(n):
            for j in range(i + 1, n):
                if self.weights[i, j] > 0.0:
                    out.append((i, j, float(self.weights[i, j])))
        return out

    def agent_marginal(self) -> np.ndarray:
        """p(sender = i) for each agent i."""
        return self.weights.sum(axis=1)

    def degrees(self) -> np.ndarray:
        return (self.weights > 0.0).sum(axis=1)

    def __repr__(self) -> str:
        return f"InteractionGraph(agents={self.num_agents})"


@dataclass(frozen=True)
class Population:
    """Environment, one code per agent, parasite flags and interaction structure.

    Treat instances as immutable values; derived populations are new objects.
    """

    environment: Environment
    codes: tuple
    parasites: frozenset
    graph: InteractionGraph

    def __init__(self, environment, codes, parasites, graph):
        object.__setattr__(self, "environment", environment)
        object.__setattr__(self, "codes", tuple(codes))
        object.__setattr__(self, "parasites", frozenset(int(p) for p in parasites))
        object.__setattr__(self, "graph", graph)
        object.__setattr__(self, "_checked", False)

    @property
    def num_agents(self) -> int:
        return len(self.codes)

    @property
    def num_states(self) -> int:
        return self.environment.num_states

    @property
    def alphabet_size(self) -> int:
        return self.codes[0].alphabet_size if self.codes else 0

    @property
    def hosts(self) -> tuple:
        return tuple(i for i in range(self.num_agents) if i not in self.parasites)

    def code_stack(self) -> np.ndarray:
        """All code tables as one (agents, states, alphabet) array."""
        return np.stack([c.table for c in self.codes])

    def with_codes(self, codes) -> "Population":
        return Population(self.environment, codes, self.parasites, self.graph)

    def with_graph(self, graph: InteractionGraph) -> "Population":
        return Population(self.environment, self.codes, self.parasites, graph)


@dataclass(frozen=True)
class Violation:
    where: str
    message: str

    def __str__(self) -> str:
        return f"{self.where}: {self.message}"


def validate(pop: Population) -> list:
    """Check every population invariant and report all violations found."""
    out = []
    env = pop.environment
    m = env.num_states
    if m < 2:
        out.append(Violation("environment", f"need at least 2 states, got {m}"))
    prior = np.asarray(env.prior, dtype=float)
    if prior.ndim != 1 or prior.shape[0] != m:
        out.append(Violation("environment", f"prior shape {prior.shape} does not match {m} states"))
    else:
        if np.any(prior < 0.0):
            out.append(Violation("environment", "negative prior entry"))
        total = float(prior.sum())
        if abs(total - 1.0) > NORM_TOL:
            out.append(Violation("environment", f"prior sums to {total!r}, not 1"))

    n = pop.num_agents
    if n < 2:
        out.append(Violation("population", f"need at least 2 agents, got {n}"))
    alphabet = pop.alphabet_size
    if alphabet < 2 and n:
        out.append(Violation("population", f"need at least 2 symbols, got {alphabet}"))
    for idx, code in enumerate(pop.codes):
        if code.num_states != m:
            out.append(Violation(f"agent {idx}", f"code has {code.num_states} rows, expected {m}"))
            continue
        if code.alphabet_size != alphabet:
            out.append(
                Violation(f"agent {idx}", f"alphabet {code.alphabet_size} differs from {alphabet}")
            )
            continue
        if np.any(code.table < 0.0):
            rows = np.flatnonzero((code.table < 0.0).any(axis=1))
            out.append(Violation(f"agent {idx}", f"negative entries in rows {rows.tolist()}"))
        sums = code.table.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > NORM_TOL)
        if bad.size:
            out.append(
                Violation(
                    f"agent {idx}",
                    f"rows {bad.tolist()} sum to {sums[bad].tolist()}, not 1",
                )
            )

    w = pop.graph.weights
    if w.shape != (n, n):
        out.append(Violation("graph", f"weight shape {w.shape} does not match {n} agents"))
        return out
    if np.any(w < 0.0):
        out.append(Violation("graph", "negative interaction weight"))
    asym = float(np.abs(w - w.T).max()) if n else 0.0
    if asym > 1e-12:
        out.append(Violation("graph", f"weights asymmetric by {asym!r}"))
    diag = np.flatnonzero(np.diagonal(w) != 0.0)
    if diag.size:
        out.append(Violation("graph", f"nonzero self-interaction for agents {diag.tolist()}"))
    total = float(w.sum())
    if abs(total - 1.0) > NORM_TOL:
        out.append(Violation("graph", f"weights sum to {total!r}, not 1"))
    isolated = np.flatnonzero(w.sum(axis=1) <= 0.0)
    if isolated.size:
        out.append(Violation("graph", f"agents {isolated.tolist()} never interact"))

    bad_parasites = sorted(p for p in pop.parasites if not 0 <= p < n)
    if bad_parasites:
        out.append(Violation("parasites", f"ids {bad_parasites} out of range"))
    return out


def require_valid(pop: Population) -> Population:
    """Raise ValidationError listing every violation; no-op when already checked."""
    if getattr(pop, "_checked", False):
        return pop
    problems = validate(pop)
    if problems:
        raise ValidationError("; ".join(str(v) for v in problems))
    object.__setattr__(pop, "_checked", True)
    return pop


def _ordered_pairs(graph: InteractionGraph):
    senders, receivers = np.nonzero(graph.weights)
    return senders, receivers, graph.weights[senders, receivers]


def joint_messages(pop: Population) -> Dist2:
    """p(X, X') over the messages of an interacting sender/receiver pair."""
    require_valid(pop)
    codes = pop.code_stack()
    prior = pop.environment.prior
    a, b, w = _ordered_pairs(pop.graph)
    joint = np.einsum("e,ems,emt,m->st", w, codes[a], codes[b], prior, optimize=True)
    return Dist2(joint)


def joint_messages_env(
    pop: Population, sender: int | None = None, receiver: int | None = None
) -> Dist3:
    """p(state, X, X'), optionally conditioned on the sender or receiver agent."""
    require_valid(pop)
    if sender is not None and receiver is not None:
        raise UsageError("condition on a sender or a receiver, not both")
    codes = pop.code_stack()
    prior = pop.environment.prior
    if sender is None and receiver is None:
        a, b, w = _ordered_pairs(pop.graph)
        tensor = np.einsum("e,ems,emt->mst", w, codes[a], codes[b], optimize=True)
        tensor *= prior[:, None, None]
        return Dist3(tensor)
    agent = sender if sender is not None else receiver
    if not 0 <= agent < pop.num_agents:
        raise UsageError(f"agent {agent} out of range")
    row = pop.graph.weights[agent]
    mass = float(row.sum())
    if mass <= 0.0:
        raise DegenerateConditioningError(f"agent {agent} never interacts")
    partner_mix = np.einsum("j,jmt->mt", row / mass, codes)
    own = codes[agent]
    if sender is not None:
        tensor = prior[:, None, None] * own[:, :, None] * partner_mix[:, None, :]
    else:
        tensor = prior[:, None, None] * partner_mix[:, :, None] * own[:, None, :]
    return Dist3(tensor)


def joint_agent_messages(pop: Population) -> Dist3:
    """p(sender agent, X, X') over all interacting pairs."""
    require_valid(pop)
    codes = pop.code_stack()
    prior = pop.environment.prior
    n = pop.num_agents
    s = pop.alphabet_size
    tensor = np.zeros((n, s, s))
    for i in range(n):
        row = pop.graph.weights[i]
        if not row.any():
            continue
        partner_mix = np.einsum("j,jmt->mt", row, codes)
        tensor[i] = np.einsum("m,ms,mt->st", prior, codes[i], partner_mix)
    return Dist3(tensor)


def _encode_code(code: Code):
    if code.is_deterministic():
        return [int(s) for s in code.symbols()]
    return [[float(v) for v in row] for row in code.table]


def _decode_code(entry, num_states: int, alphabet_size: int) -> Code:
    arr = np.asarray(entry, dtype=float)
    if arr.ndim == 1:
        return Code.deterministic(arr.astype(int), alphabet_size)
    return Code(arr)


def to_snapshot_dict(pop: Population) -> dict:
    """JSON-ready dict; deterministic codes are stored as per-state symbol lists."""
    return {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "num_states": pop.num_states,
        "state_prior": [float(v) for v in pop.environment.prior],
        "alphabet_size": pop.alphabet_size,
        "codes": [_encode_code(c) for c in pop.codes],
        "parasites": sorted(pop.parasites),
        "edges": [[i, j, w] for i, j, w in pop.graph.edge_list()],
    }


def from_snapshot_dict(data: dict) -> Population:
    if data.get("format") != SNAPSHOT_FORMAT:
        raise ValidationError(f"not a population snapshot: format={data.get('format')!r}")
    if data.get("version") != SNAPSHOT_VERSION:
        raise ValidationError(f"unsupported snapshot version {data.get('version')!r}")
    m = int(data["num_states"])
    s = int(data["alphabet_size"])
    env = Environment.with_prior(data["state_prior"])
    codes = [_decode_code(entry, m, s) for entry in data["codes"]]
    graph = InteractionGraph.from_weighted_edges(data["edges"], len(codes))
    return Population(env, codes, data.get("parasites", ()), graph)


def save_snapshot(pop: Population, path) -> Path:
    """Write a lossless JSON snapshot (full float precision, stable key order)."""
    path = Path(path)
    text = json.dumps(to_snapshot_dict(pop), sort_keys=True, indent=1)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def load_snapshot(path) -> Population:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return from_snapshot_dict(data)
