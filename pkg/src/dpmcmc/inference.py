"""Posterior features, predictive densities and evaluation metrics."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp
from scipy.stats import rankdata

from .data import Dataset, config_index
from .errors import InputError, ResourceError, UndefinedEstimateError
from .graph import Dag, bits, closure_from_parents
from .samplers import SampleSet


class FeatureKind(str, enum.Enum):
    EDGE = "directed-edge"
    UNDIRECTED = "undirected-edge"
    PATH = "directed-path"

    @classmethod
    def parse(cls, value) -> "FeatureKind":
        if isinstance(value, cls):
            return value
        aliases = {"edge": cls.EDGE, "directed": cls.EDGE, "undirected": cls.UNDIRECTED,
                   "skeleton": cls.UNDIRECTED, "path": cls.PATH}
        try:
            return aliases.get(value) or cls(value)
        except ValueError:
            raise InputError(f"unknown feature kind {value!r}") from None


def feature_matrix(g: Dag, kind: FeatureKind | str) -> np.ndarray:
    """0/1 matrix of the feature on a single graph."""
    kind = FeatureKind.parse(kind)
    if kind is FeatureKind.PATH:
        m = np.zeros((g.d, g.d))
        for i, r in enumerate(closure_from_parents(g.parents)):
            for j in bits(r):
                m[i, j] = 1.0
        return m
    a = g.adjacency().astype(float)
    if kind is FeatureKind.UNDIRECTED:
        a = np.maximum(a, a.T)
    return a


def _unique_graphs(samples: SampleSet) -> tuple[list[Dag], np.ndarray, np.ndarray]:
    index: dict = {}
    graphs = []
    inverse = np.empty(len(samples), dtype=np.int64)
    for k, g in enumerate(samples.graphs):
        u = index.get(g.parents)
        if u is None:
            u = index[g.parents] = len(graphs)
            graphs.append(g)
        inverse[k] = u
    w = np.asarray(samples.weights, dtype=float)
    return graphs, inverse, np.bincount(inverse, weights=w, minlength=len(graphs))


def feature_posterior(samples: SampleSet, kind: FeatureKind | str) -> np.ndarray:
    """Weighted fraction of samples in which each pairwise feature holds."""
    if len(samples) == 0:
        raise InputError("empty sample set")
    graphs, _, w = _unique_graphs(samples)
    total = w.sum()
    if total <= 0:
        raise UndefinedEstimateError("sample weights sum to zero")
    out = np.zeros((samples.d, samples.d))
    for g, wg in zip(graphs, w):
        if wg:
            out += wg * feature_matrix(g, kind)
    out /= total
    np.fill_diagonal(out, 0.0)
    return out


def _alpha(arities, i: int, parents: int) -> tuple[float, int]:
    r = 1
    for p in bits(parents):
        r *= arities[p]
    q = arities[i]
    return 1.0 / (q * r), r


@dataclass(frozen=True)
class PosteriorMeanCpt:
    dag: Dag
    tables: tuple[np.ndarray, ...]


def posterior_mean_cpt(train: Dataset, g: Dag) -> PosteriorMeanCpt:
    """theta_ijk = (N_ijk + alpha_i) / (N_ij + q_i alpha_i), same alpha and
    intervention exclusion as the score."""
    from .scoring import family_counts
    tables = []
    for i, p in enumerate(g.parents):
        alpha, _ = _alpha(train.arities, i, p)
        n = family_counts(train, i, p).astype(float)
        q = train.arities[i]
        tables.append((n + alpha) / (n.sum(axis=1, keepdims=True) + q * alpha))
    return PosteriorMeanCpt(g, tuple(tables))


def _joint_ids(a: np.ndarray, b: np.ndarray, parents: list[int], arities) -> tuple[np.ndarray, np.ndarray]:
    """Shared compact configuration ids for two record blocks."""
    both = np.vstack([a, b])
    ids = np.zeros(len(both), dtype=np.int64)
    k = 1
    for p in parents:
        ids = ids + both[:, p] * k
        k *= arities[p]
        if k > 1 << 40:
            uniq, ids = np.unique(ids, return_inverse=True)
            ids = ids.reshape(-1)
            k = len(uniq)
    return ids[: len(a)], ids[len(a):]


def family_log_predictive(train: Dataset, i: int, parents: int, test: np.ndarray) -> np.ndarray:
    """log theta-bar of each test record's (config, state) cell for one family."""
    test = np.asarray(test, dtype=np.int64)
    alpha, _ = _alpha(train.arities, i, parents)
    q = train.arities[i]
    rec = train.records
    iv = train.intervened(i)
    if iv is not None:
        rec = rec[~iv]
    ps = list(bits(parents))
    jt, js = _joint_ids(rec, test, ps, train.arities)
    key_train = jt * q + rec[:, i]
    key_test = js * q + test[:, i]
    keys, counts = np.unique(key_train, return_counts=True)
    cfgs, cfg_counts = np.unique(jt, return_counts=True)

    def lookup(table_keys, table_counts, query):
        if len(table_keys) == 0:
            return np.zeros(len(query))
        pos = np.clip(np.searchsorted(table_keys, query), 0, len(table_keys) - 1)
        return np.where(table_keys[pos] == query, table_counts[pos], 0).astype(float)

    njk = lookup(keys, counts, key_test)
    nj = lookup(cfgs, cfg_counts, js)
    return np.log(njk + alpha) - np.log(nj + q * alpha)


def _check_test(train: Dataset, test) -> np.ndarray:
    x = test.records if isinstance(test, Dataset) else np.asarray(test, dtype=np.int64)
    if isinstance(test, Dataset) and tuple(test.arities) != tuple(train.arities):
        raise InputError("test arities differ from training arities")
    if x.ndim != 2 or x.shape[1] != train.d:
        raise InputError("test records must have the training data's width")
    if len(x) == 0:
        raise InputError("empty test set")
    if ((x < 0) | (x >= np.array(train.arities))).any():
        raise InputError("test value outside the training arities")
    return x


def graph_log_predictive(g: Dag, train: Dataset, test, cache: dict | None = None) -> np.ndarray:
    """Per-record log p(x | G, D) with posterior-mean parameters."""
    x = _check_test(train, test)
    cache = {} if cache is None else cache
    out = np.zeros(len(x))
    for i, p in enumerate(g.parents):
        v = cache.get((i, p))
        if v is None:
            v = cache[(i, p)] = family_log_predictive(train, i, p, x)
        out += v
    return out


def predictive_loglik_plugin(g: Dag, train: Dataset, test) -> float:
    """Mean test log-likelihood under a single graph."""
    return float(graph_log_predictive(g, train, test).mean())


@dataclass
class PredictiveResult:
    per_record: np.ndarray
    mean: float
    series: list[tuple[float, float]]


def predictive_loglik_samples(samples: SampleSet, train: Dataset, test, checkpoints: Sequence[float] | None = None,
                              by: str = "time") -> PredictiveResult:
    """Model-averaged predictive: log of the weighted mean of p(x | G^s).

    ``checkpoints`` (seconds if ``by='time'``, sample counts if
    ``by='count'``) give the l(t) series using only samples available by then.
    """
    x = _check_test(train, test)
    if len(samples) == 0:
        raise InputError("empty sample set")
    graphs, inverse, _ = _unique_graphs(samples)
    cache: dict = {}
    logp = np.stack([graph_log_predictive(g, train, x, cache) for g in graphs])
    w = np.asarray(samples.weights, dtype=float)

    def mix(n_keep: int) -> np.ndarray:
        wu = np.bincount(inverse[:n_keep], weights=w[:n_keep], minlength=len(graphs))
        if wu.sum() <= 0:
            raise UndefinedEstimateError("sample weights sum to zero")
        with np.errstate(divide="ignore"):
            lw = np.log(wu)
        return logsumexp(lw[:, None] + logp, axis=0) - np.log(wu.sum())

    per = mix(len(samples))
    series = []
    if checkpoints is not None:
        marks = np.asarray(samples.times if by == "time" else np.arange(1, len(samples) + 1), dtype=float)
        for c in checkpoints:
            n_keep = int(np.searchsorted(marks, c, side="right"))
            if n_keep > 0:
                series.append((float(c), float(mix(n_keep).mean())))
    return PredictiveResult(per, float(per.mean()), series)


def sad(est, exact) -> float:
    """Sum of absolute differences over off-diagonal entries."""
    est = np.asarray(est, dtype=float)
    exact = np.asarray(exact, dtype=float)
    if est.shape != exact.shape or est.ndim != 2 or est.shape[0] != est.shape[1]:
        raise InputError(f"shape mismatch: {est.shape} vs {exact.shape}")
    diff = np.abs(est - exact)
    np.fill_diagonal(diff, 0.0)
    return float(diff.sum())


def sad_trace(samples: SampleSet, exact, checkpoints: Sequence[int] | None = None,
              kind: FeatureKind | str = FeatureKind.EDGE) -> list[tuple[int, int, float, float]]:
    """SAD of the running feature estimate after each checkpoint sample count.

    Returns ``(n_samples, step, seconds, sad)`` rows; the default
    checkpoints are every kept sample.
    """
    exact = np.asarray(exact, dtype=float)
    n = len(samples)
    if n == 0:
        raise InputError("empty sample set")
    if exact.shape != (samples.d, samples.d):
        raise InputError(f"shape mismatch: {exact.shape} vs d={samples.d}")
    graphs, inverse, _ = _unique_graphs(samples)
    feats = np.stack([feature_matrix(g, kind) for g in graphs])
    w = np.asarray(samples.weights, dtype=float)
    counts = sorted({int(c) for c in (range(1, n + 1) if checkpoints is None else checkpoints) if 1 <= c <= n})
    out = []
    acc = np.zeros((samples.d, samples.d))
    wsum = 0.0
    done = 0
    for c in counts:
        seg = slice(done, c)
        wu = np.bincount(inverse[seg], weights=w[seg], minlength=len(graphs))
        acc += np.tensordot(wu, feats, axes=1)
        wsum += wu.sum()
        done = c
        if wsum > 0:
            out.append((c, samples.steps[c - 1], samples.times[c - 1], sad(acc / wsum, exact)))
    return out


def truth_labels(truth: Dag, kind: FeatureKind | str) -> np.ndarray:
    return feature_matrix(truth, kind).astype(bool)


def _pairs(d: int, kind: FeatureKind) -> tuple[np.ndarray, np.ndarray]:
    if kind is FeatureKind.UNDIRECTED:
        return np.triu_indices(d, 1)
    r, c = np.nonzero(~np.eye(d, dtype=bool))
    return r, c


def auc(scores, truth: Dag, kind: FeatureKind | str) -> float:
    """Area under the ROC curve of ``scores`` against the truth's features.

    For the undirected kind the upper triangle of ``scores`` is used, so pass
    an undirected posterior (e.g. ``p + p.T``).  Tied scores count one half.
    """
    kind = FeatureKind.parse(kind)
    scores = np.asarray(scores, dtype=float)
    if scores.shape != (truth.d, truth.d):
        raise InputError(f"score matrix shape {scores.shape} does not match d={truth.d}")
    r, c = _pairs(truth.d, kind)
    y = truth_labels(truth, kind)[r, c]
    s = scores[r, c]
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedEstimateError("AUC undefined: all labels are identical")
    ranks = rankdata(s)
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def roc_curve(scores, truth: Dag, kind: FeatureKind | str) -> tuple[np.ndarray, np.ndarray]:
    """(false-positive rate, true-positive rate) over every distinct threshold."""
    kind = FeatureKind.parse(kind)
    scores = np.asarray(scores, dtype=float)
    r, c = _pairs(truth.d, kind)
    y = truth_labels(truth, kind)[r, c]
    s = scores[r, c]
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedEstimateError("ROC undefined: all labels are identical")
    fpr, tpr = [0.0], [0.0]
    for th in np.unique(s)[::-1]:
        pred = s >= th
        tpr.append((pred & y).sum() / n_pos)
        fpr.append((pred & ~y).sum() / n_neg)
    return np.array(fpr), np.array(tpr)


def factored_graph(d: int) -> Dag:
    return Dag.empty(d)


def dense_table_guard(r: int, q: int) -> None:
    if r * q > 1 << 26:
        raise ResourceError("posterior-mean table too large to materialise")
