import numpy as np
import pytest
from hypothesis import settings, strategies as st

from dpmcmc.data import ancestral_sample, random_network
from dpmcmc.graph import Dag

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

# Filled by tests/test_acceptance.py, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@st.composite
def dags(draw, min_d=1, max_d=6):
    """Random DAG: a random node order plus any subset of forward edges."""
    d = draw(st.integers(min_d, max_d))
    perm = draw(st.permutations(range(d)))
    parents = [0] * d
    for a in range(d):
        for b in range(a + 1, d):
            if draw(st.booleans()):
                parents[perm[b]] |= 1 << perm[a]
    return Dag(d, parents)


def digraph_edges(d, draw):
    return [(u, v) for u in range(d) for v in range(d) if u != v and draw(st.booleans())]


def dfs_acyclic(d, edges):
    """Three-colour DFS; independent of the bitmask code under test."""
    adj = {u: [] for u in range(d)}
    for u, v in edges:
        adj[u].append(v)
    colour = [0] * d

    def visit(u):
        colour[u] = 1
        for w in adj[u]:
            if colour[w] == 1 or (colour[w] == 0 and not visit(w)):
                return False
        colour[u] = 2
        return True

    return all(colour[u] or visit(u) for u in range(d))


def dfs_reach(d, edges):
    adj = {u: [] for u in range(d)}
    for u, v in edges:
        adj[u].append(v)
    out = np.zeros((d, d), dtype=bool)
    for s in range(d):
        stack = list(adj[s])
        while stack:
            w = stack.pop()
            if not out[s, w]:
                out[s, w] = True
                stack.extend(adj[w])
    return out


@pytest.fixture(scope="session")
def small_data():
    net = random_network(4, seed=11)
    return net, ancestral_sample(net, 120, seed=12)
