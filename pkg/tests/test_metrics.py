"""Tests for the information measures over populations."""
import json
import math

import numpy as np
import pytest

from codepop.errors import DegenerateConditioningError, UsageError
from codepop.metrics import (
    analyze_structure,
    blend_kl,
    code_distance,
    code_distance_matrix,
    distance_matrix,
    env_info,
    env_info_receiver,
    identifiability,
    measure_report,
    missing_info,
    mutual_understanding,
    population_env_info,
    restricted_mutual_understanding,
    sensor_info,
    symbol_usage,
)
from codepop.popmodel import Code, Environment, InteractionGraph, Population, toy_code

from oracles import (
    oracle_blend_kl,
    oracle_env_info,
    oracle_identifiability,
    oracle_missing_info,
    oracle_mutual_understanding,
    oracle_population_env_info,
    oracle_symbol_usage,
    random_population,
)

# Frozen values for the paired-hosts-plus-parasite scenario, verified against
# the brute-force oracle to full precision.
ENV_INFO_LOW_HOST = 1.311278124459133
MISSING_INFO_PARASITE = 0.8112781244591325
BLEND_KL_PARASITE = 0.18872187554086714
IDENTIFIABILITY_FULL = 0.12581458369391108
POPULATION_ENV_INFO_FULL = 0.31127812445913294
MU_SINGLE_ATTACH = 0.08170416594551044


def paired_hosts(parasite_code=None, attach=()):
    """Hosts 0,1 share the high-bit-swapped code; hosts 2,3 share the low-bit code."""
    env = Environment.uniform(4)
    codes = [toy_code("high-bit-swapped"), toy_code("high-bit-swapped"),
             toy_code("low-bit"), toy_code("low-bit")]
    edges = [(0, 1), (2, 3)]
    parasites = []
    if parasite_code is not None:
        codes.append(parasite_code)
        edges += [(4, h) for h in attach]
        parasites = [4]
    return Population(env, codes, parasites, InteractionGraph.from_edges(edges, len(codes)))


def test_mutual_understanding_pairs():
    assert mutual_understanding(paired_hosts()) == pytest.approx(1.0, abs=1e-12)


def test_parasite_cancels_mutual_understanding():
    # the high-bit code is the exact anti-code of both hosts in the first pair:
    # attached to both of them it cancels the population correlation entirely
    full = paired_hosts(toy_code("high-bit"), attach=(0, 1, 2, 3))
    assert mutual_understanding(full) == pytest.approx(0.0, abs=1e-12)
    both = paired_hosts(toy_code("high-bit"), attach=(0, 1))
    assert mutual_understanding(both) == pytest.approx(0.0, abs=1e-12)
    one = paired_hosts(toy_code("high-bit"), attach=(0,))
    assert mutual_understanding(one) == pytest.approx(MU_SINGLE_ATTACH, abs=1e-12)


def test_env_info_frozen_values():
    full = paired_hosts(toy_code("high-bit"), attach=(0, 1, 2, 3))
    # a first-pair host sees its twin or the anti-code: either way one bit
    assert env_info(full, 0) == pytest.approx(1.0, abs=1e-12)
    # a second-pair host mixes its twin (low bit) with the parasite (high bit)
    assert env_info(full, 2) == pytest.approx(ENV_INFO_LOW_HOST, abs=1e-12)
    assert env_info(full, 4) == pytest.approx(ENV_INFO_LOW_HOST, abs=1e-12)
    # symmetric interaction weights make both roles equivalent
    assert env_info_receiver(full, 2) == pytest.approx(env_info(full, 2), abs=1e-12)


def test_parasite_measures_frozen_values():
    full = paired_hosts(toy_code("high-bit"), attach=(0, 1, 2, 3))
    assert missing_info(full, 4) == pytest.approx(MISSING_INFO_PARASITE, abs=1e-12)
    assert blend_kl(full, 4) == pytest.approx(BLEND_KL_PARASITE, abs=1e-12)
    assert sensor_info(full, 4) == pytest.approx(1.0, abs=1e-12)
    assert identifiability(full) == pytest.approx(IDENTIFIABILITY_FULL, abs=1e-12)
    assert population_env_info(full) == pytest.approx(POPULATION_ENV_INFO_FULL, abs=1e-12)


def test_missing_info_vanishes_when_parasite_tracks_its_host():
    env = Environment.uniform(4)
    phi1 = toy_code("high-bit-swapped")
    pop = Population(env, [phi1, phi1, toy_code("high-bit")], [2],
                     InteractionGraph.from_edges([(0, 1), (0, 2)], 3))
    # the parasite's message is a function of its only partner's message
    assert missing_info(pop, 2) == pytest.approx(0.0, abs=1e-12)
    assert mutual_understanding(pop) == pytest.approx(0.0, abs=1e-12)
    assert [env_info(pop, a) for a in range(3)] == pytest.approx([1.0, 1.0, 1.0], abs=1e-12)


def test_metrics_match_oracle_on_random_populations():
    rng = np.random.default_rng(41)
    seen_parasites = 0
    for _ in range(120):
        pop = random_population(rng)
        assert mutual_understanding(pop) == pytest.approx(
            oracle_mutual_understanding(pop), abs=1e-12)
        assert identifiability(pop) == pytest.approx(oracle_identifiability(pop), abs=1e-12)
        assert population_env_info(pop) == pytest.approx(
            oracle_population_env_info(pop), abs=1e-12)
        agent = int(rng.integers(pop.num_agents))
        assert env_info(pop, agent) == pytest.approx(
            oracle_env_info(pop, agent), abs=1e-12)
        assert env_info_receiver(pop, agent) == pytest.approx(
            oracle_env_info(pop, agent, role="receiver"), abs=1e-12)
        np.testing.assert_allclose(
            symbol_usage(pop).p, oracle_symbol_usage(pop), atol=1e-12)
        for p in pop.parasites:
            seen_parasites += 1
            assert blend_kl(pop, p) == pytest.approx(oracle_blend_kl(pop, p), abs=1e-11)
            assert missing_info(pop, p) == pytest.approx(
                oracle_missing_info(pop, p), abs=1e-11)
    assert seen_parasites > 20


def test_metric_bounds_on_random_populations():
    rng = np.random.default_rng(43)
    for _ in range(80):
        pop = random_population(rng)
        s = pop.alphabet_size
        m = pop.num_states
        mu = mutual_understanding(pop)
        assert 0.0 <= mu <= math.log2(s) + 1e-12
        assert 0.0 <= identifiability(pop) <= math.log2(pop.num_agents) + 1e-12
        for a in range(pop.num_agents):
            ei = env_info(pop, a)
            assert 0.0 <= ei <= math.log2(m) + 1e-12
            si = sensor_info(pop, a)
            assert 0.0 <= si <= ei + 1e-9  # the pair can only add to what X carries
        assert 0.0 <= population_env_info(pop) <= math.log2(m) + 1e-12


def test_mixture_can_outrun_env_info():
    # two pairs of constant codes: no agent carries any state information,
    # yet which pair is talking is visible in the messages themselves
    env = Environment.uniform(4)
    quiet = Code.deterministic([0] * 4, 2)
    loud = Code.deterministic([1] * 4, 2)
    pop = Population(env, [quiet, quiet, loud, loud], [],
                     InteractionGraph.from_edges([(0, 1), (2, 3)], 4))
    assert mutual_understanding(pop) == pytest.approx(1.0, abs=1e-12)
    assert all(env_info(pop, a) == pytest.approx(0.0, abs=1e-12) for a in range(4))


def test_symbol_usage():
    full = paired_hosts(toy_code("high-bit"), attach=(0, 1, 2, 3))
    np.testing.assert_allclose(symbol_usage(full).p, [0.5, 0.5], atol=1e-12)
    np.testing.assert_allclose(symbol_usage(full, exclude=full.parasites).p,
                               [0.5, 0.5], atol=1e-12)
    with pytest.raises(UsageError):
        symbol_usage(full, exclude=range(5))

    env = Environment.uniform(4)
    skew = Code.deterministic([0, 0, 0, 1], 2)
    pop = Population(env, [skew, skew], [], InteractionGraph.from_edges([(0, 1)], 2))
    np.testing.assert_allclose(symbol_usage(pop).p, [0.75, 0.25], atol=1e-12)


def test_code_distance_frozen_values():
    phi1 = toy_code("high-bit-swapped")
    phi2 = toy_code("high-bit")
    phi3 = toy_code("low-bit")
    # full disagreement on every state: 4 rows x JSD 1 -> sqrt(4)
    assert code_distance(phi1, phi2) == pytest.approx(2.0, abs=1e-12)
    # disagreement on exactly half the states
    assert code_distance(phi1, phi3) == pytest.approx(math.sqrt(2.0), abs=1e-12)
    assert code_distance(phi2, phi3) == pytest.approx(math.sqrt(2.0), abs=1e-12)
    assert code_distance(phi1, phi1) == 0.0
    with pytest.raises(UsageError):
        code_distance(phi1, Code.deterministic([0, 1], 2))


def test_code_distance_is_a_metric():
    rng = np.random.default_rng(47)
    for _ in range(120):
        m = int(rng.integers(2, 5))
        s = int(rng.integers(2, 5))
        codes = [Code(rng.dirichlet(np.ones(s), size=m)) for _ in range(3)]
        a, b, c = codes
        dab = code_distance(a, b)
        assert dab == pytest.approx(code_distance(b, a), abs=1e-12)
        assert dab >= 0.0
        assert code_distance(a, a) == 0.0
        assert dab <= code_distance(a, c) + code_distance(c, b) + 1e-9


def test_distance_matrix():
    pop = paired_hosts()
    dm = distance_matrix(pop)
    assert dm.d.shape == (4, 4)
    assert dm.labels == ("0", "1", "2", "3")
    np.testing.assert_allclose(dm.d, dm.d.T, atol=0)
    assert np.all(np.diagonal(dm.d) == 0.0)
    assert dm.d[0, 1] == 0.0  # identical codes
    assert dm.d[0, 2] == pytest.approx(math.sqrt(2.0), abs=1e-12)

    toys = [toy_code(k) for k in
            ("high-bit", "high-bit-swapped", "low-bit", "low-bit-swapped")]
    dm2 = code_distance_matrix(toys, labels="ABCD")
    assert dm2.labels == ("A", "B", "C", "D")
    assert dm2.d[0, 1] == pytest.approx(2.0, abs=1e-12)
    assert dm2.d[2, 3] == pytest.approx(2.0, abs=1e-12)
    assert dm2.d[0, 2] == pytest.approx(math.sqrt(2.0), abs=1e-12)


def test_identifiability_extremes():
    env = Environment.uniform(2)
    # two pairs speaking through disjoint symbol ranges: the pair is identifiable
    a = Code.deterministic([0, 0], 4)
    b = Code.deterministic([2, 2], 4)
    four = Population(env, [a, a, b, b], [], InteractionGraph.from_edges([(0, 1), (2, 3)], 4))
    assert identifiability(four) == pytest.approx(1.0, abs=1e-12)
    # a single pair: nothing to tell apart beyond the shared marginal
    two = Population(env, [a, a], [], InteractionGraph.from_edges([(0, 1)], 2))
    assert identifiability(two) == pytest.approx(0.0, abs=1e-12)


def test_restricted_mutual_understanding():
    full = paired_hosts(toy_code("high-bit"), attach=(0, 1, 2, 3))
    assert restricted_mutual_understanding(full, [0, 1, 2, 3]) == pytest.approx(1.0, abs=1e-12)
    assert restricted_mutual_understanding(full, range(5)) == pytest.approx(
        mutual_understanding(full), abs=1e-12)
    with pytest.raises(DegenerateConditioningError):
        restricted_mutual_understanding(full, [0, 2])


def test_analyze_structure_pairs():
    pop = paired_hosts()
    rep = analyze_structure(pop)
    assert rep.num_types == 2
    assert rep.type_of == (0, 0, 1, 1)
    assert rep.type_sizes == (2, 2)
    assert len(rep.components) == 2
    for comp in rep.components:
        assert comp.type_sizes == (2,)
        assert not comp.bipartite  # twins talk to each other directly


def test_analyze_structure_bipartite():
    env = Environment.uniform(4)
    codes = [toy_code("high-bit"), toy_code("high-bit-swapped"),
             toy_code("low-bit"), toy_code("low-bit-swapped")]
    pop = Population(env, codes, [], InteractionGraph.from_edges([(0, 1), (2, 3)], 4))
    rep = analyze_structure(pop)
    assert rep.num_types == 4
    assert len(rep.components) == 2
    assert all(comp.bipartite for comp in rep.components)
    assert all(comp.type_sizes == (1, 1) for comp in rep.components)

    # a star: one hub code, three identical leaf codes
    star = Population(env, [toy_code("high-bit")] + [toy_code("high-bit-swapped")] * 3,
                      [], InteractionGraph.from_edges([(0, 1), (0, 2), (0, 3)], 4))
    srep = analyze_structure(star)
    assert srep.num_types == 2
    assert len(srep.components) == 1
    assert srep.components[0].bipartite
    assert srep.components[0].type_sizes == (1, 3)


def test_analyze_structure_odd_cycle():
    env = Environment.uniform(4)
    codes = [toy_code("high-bit"), toy_code("high-bit-swapped"), toy_code("low-bit")]
    tri = Population(env, codes, [],
                     InteractionGraph.from_edges([(0, 1), (1, 2), (0, 2)], 3))
    rep = analyze_structure(tri)
    assert len(rep.components) == 1
    assert not rep.components[0].bipartite


def test_analyze_structure_subset():
    full = paired_hosts(toy_code("high-bit"), attach=(0, 1, 2, 3))
    rep = analyze_structure(full, agents=full.hosts)
    assert len(rep.components) == 2
    assert rep.num_types == 2


def test_measure_report():
    full = paired_hosts(toy_code("high-bit"), attach=(0, 1, 2, 3))
    rep = measure_report(full)
    assert rep.mutual_understanding == pytest.approx(0.0, abs=1e-12)
    assert rep.per_agent_env_info[0] == pytest.approx(1.0, abs=1e-12)
    assert rep.per_agent_env_info[2] == pytest.approx(ENV_INFO_LOW_HOST, abs=1e-12)
    assert rep.avg_env_info == pytest.approx(np.mean(rep.per_agent_env_info), abs=1e-15)
    assert rep.identifiability == pytest.approx(IDENTIFIABILITY_FULL, abs=1e-12)
    assert set(rep.parasite_measures) == {4}
    pm = rep.parasite_measures[4]
    assert pm.blend_kl == pytest.approx(BLEND_KL_PARASITE, abs=1e-12)
    assert pm.missing_info == pytest.approx(MISSING_INFO_PARASITE, abs=1e-12)
    assert pm.sensor_info == pytest.approx(1.0, abs=1e-12)
    # report serializes cleanly
    blob = json.dumps(rep.to_dict(), sort_keys=True)
    assert "mutual_understanding" in blob

    plain = measure_report(paired_hosts())
    assert plain.parasite_measures == {}
    assert plain.mutual_understanding == pytest.approx(1.0, abs=1e-12)
