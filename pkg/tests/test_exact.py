import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dpmcmc.data import Dataset, ancestral_sample, random_network
from dpmcmc.errors import InputError, ResourceError
from dpmcmc.exact import (brute_force_posterior, chow_liu, dp_build, dp_edge_marginals, dp_log_evidence,
                          dp_predictive_logprob, dp_predictive_logprobs, map_dag, ml_log_likelihood,
                          mutual_information, prior_log_mass, zeta_log)
from dpmcmc.graph import Dag, dag_array
from dpmcmc.priors import GlobalPrior, ModularPrior
from dpmcmc.scoring import FamilyScoreTable, build_score_table


def random_table(d, seed, max_indegree=None):
    rng = np.random.default_rng(seed)
    k = d - 1 if max_indegree is None else max_indegree
    scores = np.full((d, 1 << d), -np.inf)
    for i in range(d):
        for m in range(1 << d):
            if not m >> i & 1 and m.bit_count() <= k:
                scores[i, m] = rng.normal(0, 3)
    return FamilyScoreTable(d, k, scores)


def prufer_trees(d):
    """Every labelled spanning tree on d nodes, via Prufer sequences."""
    if d == 1:
        yield []
        return
    if d == 2:
        yield [(0, 1)]
        return
    for seq in itertools.product(range(d), repeat=d - 2):
        degree = [1] * d
        for x in seq:
            degree[x] += 1
        edges = []
        for x in seq:
            leaf = min(i for i in range(d) if degree[i] == 1)
            edges.append((min(leaf, x), max(leaf, x)))
            degree[leaf] -= 1
            degree[x] -= 1
        u, v = [i for i in range(d) if degree[i] == 1]
        edges.append((u, v))
        yield edges


@pytest.mark.property
@given(st.integers(1, 6), st.integers(0, 2**31))
def test_zeta_matches_subset_sums(d, seed):
    x = np.random.default_rng(seed).normal(size=1 << d)
    out = zeta_log(x.copy())
    for s in range(1 << d):
        subs = [t for t in range(1 << d) if t & s == t]
        assert out[s] == pytest.approx(np.logaddexp.reduce(x[subs]), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("kind", ["flat", "koivisto"])
@pytest.mark.parametrize("d", [3, 4])
def test_dp_matches_brute_force(kind, d):
    ds = ancestral_sample(random_network(d, seed=d), 80, seed=1)
    t = build_score_table(ds)
    prior = ModularPrior(kind)
    tables = dp_build(t, prior)
    bp = brute_force_posterior(t, prior)
    assert np.abs(dp_edge_marginals(tables) - bp.edge_marginals()).max() <= 1e-9
    assert tables.log_evidence == pytest.approx(bp.log_evidence, abs=1e-9)


def test_dp_with_indegree_cap():
    ds = ancestral_sample(random_network(5, seed=2), 100, seed=3)
    t = build_score_table(ds, max_indegree=1)
    prior = ModularPrior("flat")
    bp = brute_force_posterior(t, prior)
    assert np.abs(dp_edge_marginals(dp_build(t, prior)) - bp.edge_marginals()).max() <= 1e-9


def test_prior_mass_counts_order_graph_pairs():
    # flat rho and no data: Z = sum over DAGs of linear extensions = sum over orders of 2^(d(d-1)/2)
    t = build_score_table(Dataset(np.zeros((0, 4), int), (2,) * 4))
    assert math.exp(prior_log_mass(t, ModularPrior("flat"))) == pytest.approx(24 * 2**6)


def test_no_data_marginals_equal_prior_marginals():
    t = build_score_table(Dataset(np.zeros((0, 3), int), (2,) * 3))
    p = dp_edge_marginals(dp_build(t, ModularPrior("flat")))
    # u precedes v in half the orders, and then the edge is present half the time
    assert np.allclose(p[~np.eye(3, dtype=bool)], 0.25)


def test_brute_force_uniform_prior_and_cap():
    ds = ancestral_sample(random_network(3, seed=5), 50, seed=6)
    t = build_score_table(ds)
    bp = brute_force_posterior(t, GlobalPrior())
    assert bp.probs.sum() == pytest.approx(1.0)
    w = np.exp(bp.log_joint - bp.log_joint.max())
    assert np.allclose(bp.probs, w / w.sum())
    path = bp.path_marginals()
    assert (path >= bp.edge_marginals() - 1e-15).all()
    with pytest.raises(ResourceError):
        brute_force_posterior(random_table(6, 0), GlobalPrior())


def _brute_map(t, prior):
    rho = prior.log_rho_array(t.d)
    dags = dag_array(t.d)
    idx = np.arange(t.d)[None, :]
    vals = (rho[idx, dags] + t.scores[idx, dags]).sum(axis=1)
    best = vals.max()
    cand = [k for k in range(len(dags)) if vals[k] >= best - 1e-9]
    edges = [sum(int(m).bit_count() for m in dags[k]) for k in cand]
    k = cand[int(np.argmin(edges))]
    return Dag(t.d, [int(x) for x in dags[k]]), best


@pytest.mark.parametrize("seed", range(6))
def test_map_matches_brute_force(seed):
    for kind in ("flat", "koivisto"):
        t = random_table(4 + seed % 2, seed)
        g, s = map_dag(t, ModularPrior(kind))
        bg, bs = _brute_map(t, ModularPrior(kind))
        assert g == bg
        assert s == pytest.approx(bs, abs=1e-9)


def test_map_tie_prefers_fewer_edges():
    t = FamilyScoreTable(3, 2, np.where(ModularPrior("flat").log_rho_array(3) == 0, 0.0, -np.inf))
    g, s = map_dag(t, ModularPrior("flat"))
    assert g == Dag.empty(3) and s == 0.0


def test_chow_liu_matches_prufer_enumeration():
    for seed in range(5):
        ds = ancestral_sample(random_network(5, seed=seed), 200, seed=seed + 1)
        mi = mutual_information(ds)
        best = max(prufer_trees(5), key=lambda es: sum(mi[u, v] for u, v in es))
        got = chow_liu(ds)
        assert sorted(tuple(sorted(e)) for e in got.edges()) == sorted(best)
        assert got.n_edges == 4


def test_chow_liu_is_best_directed_tree():
    """ML log-likelihood of the Chow-Liu tree equals the best over all DAGs with in-degree <= 1."""
    ds = ancestral_sample(random_network(4, seed=7), 150, seed=8)
    best = -np.inf
    for row in dag_array(4):
        if all(int(m).bit_count() <= 1 for m in row):
            best = max(best, ml_log_likelihood(ds, Dag(4, [int(x) for x in row])))
    assert ml_log_likelihood(ds, chow_liu(ds)) == pytest.approx(best, abs=1e-9)


def test_chow_liu_orientation_and_forest():
    ds = Dataset(np.array([[0, 0, 1], [1, 1, 0], [0, 0, 1], [1, 1, 1]]), (2, 2, 2))
    g = chow_liu(ds)
    assert g.has_edge(0, 1)  # rooted at the lowest index
    independent = Dataset(np.array([[0, 0], [0, 1], [1, 0], [1, 1]]), (2, 2))
    assert chow_liu(independent).n_edges == 0


def test_predictive_is_evidence_ratio():
    ds = ancestral_sample(random_network(3, seed=1), 40, seed=2)
    prior = ModularPrior("flat")
    x = ds.records[0]
    lp = dp_predictive_logprob(ds, x, prior)
    assert lp == pytest.approx(dp_log_evidence(ds.with_record(x), prior) - dp_log_evidence(ds, prior))
    # probabilities over the whole state space sum to one
    states = np.array(list(itertools.product(*[range(a) for a in ds.arities])))
    assert np.exp(dp_predictive_logprobs(ds, states, prior)).sum() == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(InputError):
        dp_predictive_logprob(ds, [0, 0], prior)


def test_resource_cap():
    with pytest.raises(ResourceError):
        dp_build(random_table(3, 0), ModularPrior("flat"), cap=2)
