import pytest

from codepop.popmodel import Code, Environment, InteractionGraph, Population


@pytest.fixture
def paired_population():
    """Two host pairs, each sharing a bit code, no parasites."""
    env = Environment.uniform(4)
    codes = [
        Code.deterministic([1, 1, 0, 0], 2),
        Code.deterministic([1, 1, 0, 0], 2),
        Code.deterministic([0, 1, 0, 1], 2),
        Code.deterministic([0, 1, 0, 1], 2),
    ]
    graph = InteractionGraph.from_edges([(0, 1), (2, 3)], 4)
    return Population(env, codes, frozenset(), graph)
