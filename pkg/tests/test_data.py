import numpy as np
import pytest

from dpmcmc.data import (CptSet, Dataset, ancestral_sample, config_index, load_csv, network_from_json,
                         network_to_json, random_network, split_folds, write_csv)
from dpmcmc.errors import InputError, ParseError
from dpmcmc.graph import Dag


def test_config_index_mixed_radix():
    rec = np.array([[1, 2, 0], [0, 1, 1]])
    # lowest-numbered parent is the least significant digit
    assert config_index(rec, [0, 1], (2, 3, 2)).tolist() == [1 + 2 * 2, 0 + 1 * 2]
    assert config_index(rec, [], (2, 3, 2)).tolist() == [0, 0]


def test_dataset_validation():
    with pytest.raises(InputError, match="record 1, column 0"):
        Dataset(np.array([[0, 1], [2, 0]]), (2, 2))
    with pytest.raises(InputError):
        Dataset(np.zeros((2, 2), int), (2, 1))
    with pytest.raises(InputError):
        Dataset(np.zeros((2, 2), int), (2, 2), interventions=np.zeros((3, 2), bool))
    ds = Dataset(np.zeros((0, 3), int), (2, 2, 2))
    assert ds.n == 0 and ds.d == 3


def test_csv_round_trip(tmp_path):
    net = random_network(4, seed=0)
    ds = ancestral_sample(net, 50, interventions=[(1, 0, (0, 10))], seed=1)
    write_csv(ds, tmp_path / "d.csv", tmp_path / "i.csv")
    back = load_csv(tmp_path / "d.csv", interventions_path=tmp_path / "i.csv", arities=ds.arities)
    assert (back.records == ds.records).all()
    assert (back.interventions == ds.interventions).all()
    assert back.names == ("X0", "X1", "X2", "X3")


def test_csv_header_sniffing_and_arity(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("0,1\n0,0\n")
    ds = load_csv(p)
    assert ds.n == 2 and ds.names is None
    assert ds.arities == (2, 2)  # never below two


def test_csv_errors_name_row_and_column(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n0,1\n1,x\n")
    with pytest.raises(ParseError, match="line 3, column 1"):
        load_csv(p)
    p.write_text("a,b\n0,1\n1\n")
    with pytest.raises(ParseError):
        load_csv(p)
    p.write_text("a,b\n0,1\n1,3\n")
    with pytest.raises(ParseError, match="line 3, column 1"):
        load_csv(p, arities=(2, 2))


def test_random_network_rows_sum_to_one():
    net = random_network(6, arity_range=(2, 4), seed=3)
    for t in net.tables:
        assert np.abs(t.sum(axis=1) - 1).max() <= 1e-12
    assert all(2 <= a <= 4 for a in net.arities)


def test_random_network_max_indegree():
    net = random_network(8, seed=5, density=4, max_indegree=2)
    assert max(p.bit_count() for p in net.dag.parents) <= 2


def test_cpt_validation():
    g = Dag.empty(1)
    with pytest.raises(InputError):
        CptSet(g, (2,), (np.array([[0.3, 0.3]]),))


def test_entropy_with_zero_probabilities():
    g = Dag.from_edges(2, [(0, 1)])
    net = CptSet(g, (2, 2), (np.array([[0.5, 0.5]]), np.array([[1.0, 0.0], [0.0, 1.0]])))
    assert net.entropy() == pytest.approx(np.log(2))


def test_ancestral_sampling_follows_cpts():
    g = Dag.from_edges(2, [(0, 1)])
    net = CptSet(g, (2, 2), (np.array([[0.3, 0.7]]), np.array([[0.9, 0.1], [0.2, 0.8]])))
    ds = ancestral_sample(net, 20000, seed=0)
    assert ds.records[:, 0].mean() == pytest.approx(0.7, abs=0.02)
    x1 = ds.records[ds.records[:, 0] == 1, 1]
    assert x1.mean() == pytest.approx(0.8, abs=0.02)


def test_interventions_clamp_and_flag():
    net = random_network(3, seed=2)
    ds = ancestral_sample(net, 30, interventions=[(2, 1, (5, 15))], seed=4)
    assert (ds.records[5:15, 2] == 1).all()
    assert ds.interventions[5:15, 2].all()
    assert ds.interventions.sum() == 10
    with pytest.raises(InputError):
        ancestral_sample(net, 5, interventions=[(7, 0, (0, 1))])


def test_sampling_is_deterministic():
    net = random_network(4, seed=9)
    a = ancestral_sample(net, 40, seed=1)
    b = ancestral_sample(net, 40, seed=1)
    assert (a.records == b.records).all()


def test_split_folds_partition():
    ds = ancestral_sample(random_network(3, seed=0), 23, seed=0)
    folds = split_folds(ds, 5, seed=1)
    assert sum(te.n for _, te in folds) == 23
    for tr, te in folds:
        assert tr.n + te.n == 23
    with pytest.raises(InputError):
        split_folds(ds, 1)


def test_network_json_round_trip():
    net = random_network(5, seed=8)
    back = network_from_json(network_to_json(net, 8))
    assert back.dag == net.dag
    for a, b in zip(back.tables, net.tables):
        assert (a == b).all()


def test_with_record():
    ds = Dataset(np.zeros((2, 2), int), (2, 3))
    ds2 = ds.with_record([1, 2])
    assert ds2.n == 3 and ds2.records[-1].tolist() == [1, 2]
    with pytest.raises(InputError):
        ds.with_record([0, 3])
