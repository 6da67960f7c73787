import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import dags
from dpmcmc.data import CptSet, Dataset, ancestral_sample, config_index, random_network
from dpmcmc.errors import InputError, UndefinedEstimateError
from dpmcmc.exact import brute_force_posterior, chow_liu, dp_predictive_logprobs, map_dag
from dpmcmc.graph import Dag, closure_from_parents
from dpmcmc.inference import (FeatureKind, auc, feature_matrix, feature_posterior, graph_log_predictive,
                              posterior_mean_cpt,
                              predictive_loglik_plugin, predictive_loglik_samples, roc_curve, sad, sad_trace)
from dpmcmc.priors import GlobalPrior, ModularPrior
from dpmcmc.samplers import GlobalProposal, SampleSet, SamplerConfig, run_chain
from dpmcmc.scoring import build_score_table, family_log_marglik


def enumeration_samples(bp):
    ss = SampleSet(bp.d, "enum")
    for row, p in zip(bp.dags, bp.probs):
        ss.append(0, Dag(bp.d, [int(x) for x in row], check=False), float(p), 0.0, 0.0)
    return ss


def trapezoid_auc(scores, truth, kind):
    fpr, tpr = roc_curve(scores, truth, kind)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2))


def test_feature_kind_parsing():
    assert FeatureKind.parse("undirected") is FeatureKind.UNDIRECTED
    assert FeatureKind.parse("directed-path") is FeatureKind.PATH
    with pytest.raises(InputError):
        FeatureKind.parse("via-k")


def test_paths_equal_edges_at_d2():
    ss = SampleSet(2, "x")
    for parents, w in (((0, 1), 2.0), ((2, 0), 1.0), ((0, 0), 1.0)):
        ss.append(0, Dag(2, parents), w, 0.0, 0.0)
    e = feature_posterior(ss, "directed-edge")
    assert np.allclose(e, feature_posterior(ss, "directed-path"))
    assert e[0, 1] == pytest.approx(0.5) and e[1, 0] == pytest.approx(0.25)


def test_enumeration_weights_reproduce_brute_force_features():
    ds = ancestral_sample(random_network(4, seed=3), 60, seed=4)
    bp = brute_force_posterior(build_score_table(ds), GlobalPrior())
    ss = enumeration_samples(bp)
    assert np.allclose(feature_posterior(ss, "directed-edge"), bp.edge_marginals(), atol=1e-12)
    assert np.allclose(feature_posterior(ss, "undirected-edge"), bp.undirected_marginals(), atol=1e-12)
    assert np.allclose(feature_posterior(ss, "directed-path"), bp.path_marginals(), atol=1e-12)


def test_hybrid_path_features_near_exact_d5():
    ds = ancestral_sample(random_network(5, seed=8), 200, seed=9)
    t = build_score_table(ds)
    bp = brute_force_posterior(t, GlobalPrior())
    gp = GlobalProposal.from_table(t, ModularPrior("flat"))
    ch = run_chain(SamplerConfig(steps=100_000, seed=2), "hybrid", t, gp)
    assert np.abs(feature_posterior(ch, "directed-path") - bp.path_marginals()).max() <= 0.03


def test_feature_posterior_errors():
    with pytest.raises(InputError):
        feature_posterior(SampleSet(2, "x"), "directed-edge")
    ss = SampleSet(2, "x")
    ss.append(0, Dag.empty(2), 0.0, 0.0, 0.0)
    with pytest.raises(UndefinedEstimateError):
        feature_posterior(ss, "directed-edge")


@pytest.mark.property
@given(st.lists(dags(min_d=4, max_d=4), min_size=1, max_size=10))
def test_feature_matrix_properties(gs):
    ss = SampleSet(4, "x")
    for g in gs:
        ss.append(0, g, 1.0, 0.0, 0.0)
        path = feature_matrix(g, "directed-path").astype(bool)
        # closure is transitive in every individual sample
        assert ((path.astype(int) @ path.astype(int) > 0) <= path).all()
        assert not path.diagonal().any()
    for kind in FeatureKind:
        m = feature_posterior(ss, kind)
        assert ((m >= 0) & (m <= 1)).all()
    und = feature_posterior(ss, "undirected-edge")
    assert np.allclose(und, und.T)


def test_posterior_mean_cpt_examples():
    empty = Dataset(np.zeros((0, 2), int), (2, 3))
    cpt = posterior_mean_cpt(empty, Dag.from_edges(2, [(0, 1)]))
    assert np.allclose(cpt.tables[1], 1 / 3)
    ds = Dataset(np.array([[0], [1]]), (2,))
    assert np.allclose(posterior_mean_cpt(ds, Dag.empty(1)).tables[0], [0.5, 0.5])


@pytest.mark.property
@given(st.integers(0, 5000))
def test_posterior_mean_is_marginal_likelihood_ratio(seed):
    ds = ancestral_sample(random_network(3, seed=seed), 30, interventions=[(0, 1, (0, 5))], seed=seed)
    rng = np.random.default_rng(seed)
    i = int(rng.integers(3))
    parents = int(rng.integers(8)) & ~(1 << i)
    g = Dag(3, [parents if k == i else 0 for k in range(3)])
    cpt = posterior_mean_cpt(ds, g)
    assert np.abs(cpt.tables[i].sum(axis=1) - 1).max() <= 1e-12
    x = ds.records[rng.integers(ds.n)].copy()
    x[i] = rng.integers(ds.arities[i])
    base = family_log_marglik(ds, i, parents)
    ratio = family_log_marglik(ds.with_record(x), i, parents) - base
    j = config_index(x[None, :], [b for b in range(3) if parents >> b & 1], ds.arities)[0]
    assert math.log(cpt.tables[i][j, x[i]]) == pytest.approx(ratio, abs=1e-10)


def test_single_sample_predictive():
    ds = Dataset(np.array([[0], [1]]), (2,))
    ss = SampleSet(1, "x")
    ss.append(0, Dag.empty(1), 1.0, 0.0, 0.0)
    r = predictive_loglik_samples(ss, ds, np.array([[0]]))
    assert r.per_record[0] == pytest.approx(math.log(0.5))
    with pytest.raises(InputError):
        predictive_loglik_samples(ss, ds, np.zeros((0, 1), int))


@pytest.mark.parametrize("kind", ["flat", "koivisto"])
def test_enumeration_predictive_matches_dp(kind):
    net = random_network(4, seed=5)
    ds = ancestral_sample(net, 70, seed=6)
    train, test = ds.subset(range(55)), ds.subset(range(55, 70))
    prior = ModularPrior(kind)
    bp = brute_force_posterior(build_score_table(train), GlobalPrior("modular", prior))
    r = predictive_loglik_samples(enumeration_samples(bp), train, test)
    assert np.abs(r.per_record - dp_predictive_logprobs(train, test.records, prior)).max() <= 1e-9


def test_predictive_per_record_is_a_probability():
    ds = ancestral_sample(random_network(4, seed=5), 90, seed=6)
    g = Dag.from_edges(4, [(0, 1), (2, 3)])
    lp = graph_log_predictive(g, ds.subset(range(60)), ds.subset(range(60, 90)))
    assert (lp <= 0).all() and np.isfinite(lp).all()


def test_plugin_examples():
    g = Dag.from_edges(2, [(0, 1)])
    net = CptSet(g, (2, 2), (np.array([[0.5, 0.5]]), np.array([[0.95, 0.05], [0.05, 0.95]])))
    ds = ancestral_sample(net, 400, seed=0)
    train, test = ds.subset(range(300)), ds.subset(range(300, 400))
    assert predictive_loglik_plugin(Dag.empty(2), train, test) < predictive_loglik_plugin(g, train, test)
    assert predictive_loglik_plugin(chow_liu(train), train, test) == pytest.approx(
        predictive_loglik_plugin(g, train, test), abs=0.01)
    t = build_score_table(train)
    assert map_dag(t, ModularPrior("flat"))[0].n_edges == 1
    empty = Dataset(np.zeros((0, 3), int), (2, 3, 4))
    x = np.array([[0, 1, 2]])
    assert predictive_loglik_plugin(Dag.empty(3), empty, x) == pytest.approx(-math.log(24))


def test_plugin_approaches_negative_entropy():
    net = random_network(4, seed=13)
    train = ancestral_sample(net, 50_000, seed=1)
    test = ancestral_sample(net, 50_000, seed=2)
    assert predictive_loglik_plugin(net.dag, train, test) == pytest.approx(-net.entropy(), abs=0.03)


def test_sad_examples():
    a = np.random.default_rng(0).random((3, 3))
    assert sad(a, a) == 0
    exact = np.ones((3, 3)) - np.eye(3)
    assert sad(np.zeros((3, 3)), exact) == 6
    assert sad(np.eye(3), np.zeros((3, 3))) == 0  # diagonal ignored
    with pytest.raises(InputError):
        sad(np.zeros((3, 3)), np.zeros((2, 2)))


@pytest.mark.property
@given(st.lists(st.floats(0, 1), min_size=16, max_size=16), st.lists(st.floats(0, 1), min_size=16, max_size=16))
def test_sad_symmetric_nonnegative(xs, ys):
    a, b = np.array(xs).reshape(4, 4), np.array(ys).reshape(4, 4)
    np.fill_diagonal(a, 0)
    np.fill_diagonal(b, 0)
    assert sad(a, b) == sad(b, a) >= 0
    assert (sad(a, b) == 0) == np.array_equal(a, b)


def test_sad_trace_converges():
    ds = ancestral_sample(random_network(4, seed=1), 100, seed=1)
    t = build_score_table(ds)
    bp = brute_force_posterior(t, GlobalPrior())
    gp = GlobalProposal.from_table(t, ModularPrior("flat"))
    ch = run_chain(SamplerConfig(steps=40_000, seed=3), "hybrid", t, gp)
    tr = sad_trace(ch, bp.edge_marginals(), [10, 100, 1000, 40_001])
    assert [r[0] for r in tr] == [10, 100, 1000, 40_001]
    assert tr[-1][3] < 0.1
    assert tr[-1][3] == pytest.approx(sad(feature_posterior(ch, "directed-edge"), bp.edge_marginals()))


def test_auc_examples():
    truth = Dag.from_edges(4, [(0, 1), (1, 2)])
    for kind in FeatureKind:
        ind = feature_matrix(truth, kind)
        assert auc(ind, truth, kind) == 1.0
        assert auc(np.full((4, 4), 0.3), truth, kind) == 0.5
        assert auc(1 - ind, truth, kind) == 0.0
    with pytest.raises(UndefinedEstimateError):
        auc(np.zeros((3, 3)), Dag.empty(3), "undirected-edge")
    with pytest.raises(InputError):
        auc(np.zeros((2, 2)), truth, "directed-edge")


@pytest.mark.property
@given(st.lists(st.integers(0, 5), min_size=25, max_size=25), dags(min_d=5, max_d=5))
def test_auc_rank_formula_matches_trapezoid_and_monotone_invariance(vals, truth):
    scores = np.array(vals, dtype=float).reshape(5, 5)
    for kind in FeatureKind:
        labels = feature_matrix(truth, kind)
        iu = np.triu_indices(5, 1) if kind is FeatureKind.UNDIRECTED else np.nonzero(~np.eye(5, dtype=bool))
        y = labels[iu].astype(bool)
        if y.all() or not y.any():
            continue
        a = auc(scores, truth, kind)
        assert a == pytest.approx(trapezoid_auc(scores, truth, kind))
        assert auc(np.exp(3 * scores) - 7, truth, kind) == pytest.approx(a)
        assert 0 <= a <= 1


def test_path_truth_is_transitive_closure():
    truth = Dag.from_edges(3, [(0, 1), (1, 2)])
    m = feature_matrix(truth, "directed-path")
    assert m[0, 2] == 1
    reach = closure_from_parents(truth.parents)
    assert all(bool(m[i, j]) == bool(reach[i] >> j & 1) for i in range(3) for j in range(3))
