"""Exact computations: the subset DP over node orders, brute-force posteriors,
the MAP network, and the Chow-Liu tree.

All DP quantities live in log space and are indexed by node-subset bitmasks.
For a family weight ``B_i(G) = rho_i(G) * p(X_i | X_G)``:

* ``A_i(S)``  sum of ``B_i`` over parent sets inside ``S`` (zeta transform);
* ``g(S)``    total weight of all orderings of ``S`` placed first;
* ``h(S)``    total weight of all orderings of ``V \\ S`` placed after ``S``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import Dataset
from .errors import InputError, ResourceError
from .graph import Dag, bits, dag_array
from .priors import GlobalPrior, ModularPrior
from .scoring import FamilyScoreTable, build_score_table

MAX_DP_NODES = 22


def _check_dp_size(d: int, cap: int) -> None:
    if d > cap:
        raise ResourceError(f"dynamic programming over subsets is capped at d={cap}, got d={d}")


def zeta_log(arr: np.ndarray) -> np.ndarray:
    """In-place subset-sum transform in log space along the last axis."""
    n = arr.shape[-1].bit_length() - 1
    lead = arr.shape[:-1]
    for b in range(n):
        view = arr.reshape(lead + (-1, 2, 1 << b))
        np.logaddexp(view[..., 1, :], view[..., 0, :], out=view[..., 1, :])
    return arr


def _family_weights(t: FamilyScoreTable, prior: ModularPrior, unit_scores: bool = False) -> np.ndarray:
    rho = prior.log_rho_array(t.d)
    if unit_scores:
        return np.where(np.isfinite(t.scores), rho, -np.inf)
    with np.errstate(invalid="ignore"):
        return rho + t.scores


def _levels(d: int):
    from .graph import _levels as lv
    return lv(d)


def _forward(log_a: np.ndarray) -> np.ndarray:
    d = log_a.shape[0]
    g = np.full(1 << d, -np.inf)
    g[0] = 0.0
    for level in _levels(d)[1:]:
        acc = np.full(len(level), -np.inf)
        for i in range(d):
            bit = 1 << i
            cols = (level & bit) != 0
            prev = level[cols] ^ bit
            acc[cols] = np.logaddexp(acc[cols], g[prev] + log_a[i, prev])
        g[level] = acc
    return g


def _backward(log_a: np.ndarray) -> np.ndarray:
    d = log_a.shape[0]
    h = np.full(1 << d, -np.inf)
    h[-1] = 0.0
    for level in reversed(_levels(d)[:-1]):
        acc = np.full(len(level), -np.inf)
        for i in range(d):
            bit = 1 << i
            cols = (level & bit) == 0
            s = level[cols]
            acc[cols] = np.logaddexp(acc[cols], log_a[i, s] + h[s | bit])
        h[level] = acc
    return h


_Z_CACHE: dict = {}


def prior_log_mass(t: FamilyScoreTable, prior: ModularPrior) -> float:
    """log Z: total induced prior mass (forward pass with all scores equal to 1)."""
    key = (t.d, t.max_indegree, prior.cache_key())
    if key not in _Z_CACHE:
        log_a = zeta_log(_family_weights(t, prior, unit_scores=True))
        _Z_CACHE[key] = float(_forward(log_a)[-1])
    return _Z_CACHE[key]


@dataclass(frozen=True)
class DpTables:
    d: int
    log_b: np.ndarray
    log_a: np.ndarray
    log_g: np.ndarray
    log_h: np.ndarray
    log_z: float

    @property
    def log_total(self) -> float:
        """log of the order-summed joint mass, g(V)."""
        return float(self.log_g[-1])

    @property
    def log_evidence(self) -> float:
        """log p(D) under the order-marginalised modular prior."""
        return self.log_total - self.log_z


def dp_build(t: FamilyScoreTable, prior: ModularPrior, cap: int = MAX_DP_NODES) -> DpTables:
    """Run the zeta transforms and the forward/backward passes."""
    _check_dp_size(t.d, cap)
    log_b = _family_weights(t, prior)
    log_a = zeta_log(log_b.copy())
    g = _forward(log_a)
    h = _backward(log_a)
    return DpTables(t.d, log_b, log_a, g, h, prior_log_mass(t, prior))


def _log_diff(big: np.ndarray, small: np.ndarray) -> np.ndarray:
    """log(exp(big) - exp(small)) for big >= small, clamped at -inf."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = big + np.log1p(-np.exp(np.minimum(small - big, 0.0)))
    return np.where(np.isfinite(big), out, -np.inf)


def dp_edge_marginals(tables: DpTables) -> np.ndarray:
    """Posterior probability of every directed edge u -> v.

    Sums, over predecessor sets ``S`` of ``v`` that contain ``u``,
    ``g(S) * [A_v(S) - A_v(S - u)] * h(S + v) / g(V)``.
    """
    d = tables.d
    g, h, a = tables.log_g, tables.log_h, tables.log_a
    total = g[-1]
    masks = np.arange(1 << d, dtype=np.int64)
    p = np.zeros((d, d))
    for v in range(d):
        vbit = 1 << v
        without_v = masks[(masks & vbit) == 0]
        base = g[without_v] + h[without_v | vbit]
        for u in range(d):
            if u == v:
                continue
            ubit = 1 << u
            sel = (without_v & ubit) != 0
            s = without_v[sel]
            terms = base[sel] + _log_diff(a[v, s], a[v, s ^ ubit])
            m = terms.max()
            if m == -np.inf:
                continue
            p[u, v] = math.exp(m - total) * float(np.exp(terms - m).sum())
    return np.clip(p, 0.0, 1.0)


@dataclass
class BrutePosterior:
    """Exact posterior over every DAG on a handful of nodes."""

    dags: np.ndarray
    log_joint: np.ndarray
    probs: np.ndarray
    log_evidence: float

    @property
    def d(self) -> int:
        return self.dags.shape[1]

    def edge_marginals(self) -> np.ndarray:
        d = self.d
        p = np.zeros((d, d))
        for u in range(d):
            for v in range(d):
                if u != v:
                    p[u, v] = self.probs[(self.dags[:, v] >> u) & 1 == 1].sum()
        return p

    def undirected_marginals(self) -> np.ndarray:
        p = self.edge_marginals()
        return p + p.T

    def reach(self) -> np.ndarray:
        """(n_dags, d, d) boolean transitive closures."""
        d = self.d
        adj = np.zeros((len(self.dags), d, d), dtype=bool)
        for v in range(d):
            for u in range(d):
                adj[:, u, v] = (self.dags[:, v] >> u) & 1 == 1
        reach = adj.copy()
        for _ in range(d):
            step = np.einsum("nij,njk->nik", reach.astype(np.int64), adj.astype(np.int64)) > 0
            new = reach | step
            if np.array_equal(new, reach):
                break
            reach = new
        return reach

    def path_marginals(self) -> np.ndarray:
        return np.einsum("n,nij->ij", self.probs, self.reach().astype(float))

    def expectation(self, feature: Callable[[Dag], float]) -> float:
        d = self.d
        return float(sum(p * feature(Dag(d, row, check=False))
                         for p, row in zip(self.probs, self.dags.tolist()) if p > 0))

    def dag_probability(self, g: Dag) -> float:
        hit = np.all(self.dags == np.array(g.parents), axis=1)
        return float(self.probs[hit].sum())


def brute_force_posterior(t: FamilyScoreTable, prior: GlobalPrior | ModularPrior, cap: int = 5) -> BrutePosterior:
    """Normalised p(G | D) for every DAG, by enumeration.

    A :class:`ModularPrior` is turned into its induced graph prior.
    Families absent from the table (over the in-degree cap) get zero mass.
    """
    if t.d > cap:
        raise ResourceError(f"brute-force posterior is capped at d={cap}")
    if isinstance(prior, ModularPrior):
        prior = GlobalPrior("modular", modular=prior)
    dags = dag_array(t.d)
    loglik = t.scores[np.arange(t.d)[None, :], dags].sum(axis=1)
    logprior = prior.log_prior_batch(dags)
    with np.errstate(invalid="ignore"):
        log_joint = np.where(np.isfinite(loglik) & np.isfinite(logprior), loglik + logprior, -np.inf)
    m = log_joint.max()
    w = np.exp(log_joint - m)
    z_joint = m + math.log(w.sum())
    pm = logprior[np.isfinite(loglik)].max()
    z_prior = pm + math.log(np.exp(logprior[np.isfinite(loglik)] - pm).sum())
    return BrutePosterior(dags, log_joint, w / w.sum(), z_joint - z_prior)


def map_dag(t: FamilyScoreTable, prior: ModularPrior, cap: int = MAX_DP_NODES) -> tuple[Dag, float]:
    """Highest-scoring DAG under ``sum_i log rho_i + score_i``.

    Ties go to fewer edges, then (per node) to the smaller parent mask and
    the lower-numbered sink.
    """
    _check_dp_size(t.d, cap)
    d = t.d
    n = 1 << d
    val = _family_weights(t, prior)
    arg = np.broadcast_to(np.arange(n, dtype=np.int64), (d, n)).copy()
    size = np.zeros(n, dtype=np.int64)
    for b in range(d):
        size += (np.arange(n) >> b) & 1
    size = np.broadcast_to(size, (d, n)).copy()
    for b in range(d):
        vv = val.reshape(d, -1, 2, 1 << b)
        aa = arg.reshape(d, -1, 2, 1 << b)
        ss = size.reshape(d, -1, 2, 1 << b)
        cv, ca, cs = vv[:, :, 0, :], aa[:, :, 0, :], ss[:, :, 0, :]
        hv, ha, hs = vv[:, :, 1, :], aa[:, :, 1, :], ss[:, :, 1, :]
        better = (cv > hv) | ((cv == hv) & ((cs < hs) | ((cs == hs) & (ca < ha))))
        hv[better] = cv[better]
        ha[better] = ca[better]
        hs[better] = cs[better]
    net_val = np.full(n, -np.inf)
    net_edges = np.zeros(n, dtype=np.int64)
    sink = np.full(n, -1, dtype=np.int64)
    net_val[0] = 0.0
    for level in _levels(d)[1:]:
        best_v = np.full(len(level), -np.inf)
        best_e = np.full(len(level), np.iinfo(np.int64).max)
        best_i = np.full(len(level), -1, dtype=np.int64)
        for i in range(d):
            bit = 1 << i
            cols = (level & bit) != 0
            prev = level[cols] ^ bit
            cv = net_val[prev] + val[i, prev]
            ce = net_edges[prev] + size[i, prev]
            bv, be = best_v[cols], best_e[cols]
            better = (cv > bv) | ((cv == bv) & (ce < be))
            idx = np.flatnonzero(cols)[better]
            best_v[idx] = cv[better]
            best_e[idx] = ce[better]
            best_i[idx] = i
        net_val[level] = best_v
        net_edges[level] = best_e
        sink[level] = best_i
    if not np.isfinite(net_val[-1]):
        raise InputError("no DAG has finite score under this prior and table")
    parents = [0] * d
    s = n - 1
    while s:
        i = int(sink[s])
        rest = s ^ (1 << i)
        parents[i] = int(arg[i, rest])
        s = rest
    g = Dag(d, parents)
    rho = prior.log_rho_array(d)
    score = sum(float(rho[i, m]) + float(t.scores[i, m]) for i, m in enumerate(parents))
    return g, score


def mutual_information(ds: Dataset) -> np.ndarray:
    """Plug-in (maximum-likelihood) pairwise mutual information, in nats."""
    d, n = ds.d, ds.n
    mi = np.zeros((d, d))
    if n == 0:
        return mi
    rec = ds.records
    for i in range(d):
        for j in range(i + 1, d):
            qi, qj = ds.arities[i], ds.arities[j]
            joint = np.bincount(rec[:, i] * qj + rec[:, j], minlength=qi * qj).reshape(qi, qj) / n
            pi = joint.sum(axis=1, keepdims=True)
            pj = joint.sum(axis=0, keepdims=True)
            nz = joint > 0
            v = float(np.sum(joint[nz] * np.log(joint[nz] / (pi @ pj)[nz])))
            mi[i, j] = mi[j, i] = max(v, 0.0)
    return mi


def chow_liu(ds: Dataset, tol: float = 1e-12) -> Dag:
    """Maximum mutual-information spanning forest, directed away from the
    lowest-numbered node of each component.

    Pairs whose mutual information is below ``tol`` are never joined.
    """
    d = ds.d
    mi = mutual_information(ds)
    pairs = sorted(((i, j) for i in range(d) for j in range(i + 1, d)), key=lambda e: (-mi[e], e))
    root = list(range(d))

    def find(x):
        while root[x] != x:
            root[x] = root[root[x]]
            x = root[x]
        return x

    nbrs = [set() for _ in range(d)]
    for i, j in pairs:
        if mi[i, j] <= tol:
            break
        ri, rj = find(i), find(j)
        if ri != rj:
            root[max(ri, rj)] = min(ri, rj)
            nbrs[i].add(j)
            nbrs[j].add(i)
    parents = [0] * d
    seen = [False] * d
    for start in range(d):
        if seen[start]:
            continue
        seen[start] = True
        stack = [start]
        while stack:
            u = stack.pop()
            for w in sorted(nbrs[u]):
                if not seen[w]:
                    seen[w] = True
                    parents[w] |= 1 << u
                    stack.append(w)
    return Dag(d, parents)


def ml_log_likelihood(ds: Dataset, g: Dag) -> float:
    """Log-likelihood of the data under ``g`` with maximum-likelihood CPTs."""
    from .scoring import family_counts
    total = 0.0
    for i, p in enumerate(g.parents):
        c = family_counts(ds, i, p).astype(float)
        nj = c.sum(axis=1, keepdims=True)
        nz = c > 0
        total += float(np.sum(c[nz] * np.log((c / np.where(nj > 0, nj, 1))[nz])))
    return total


def dp_log_evidence(ds: Dataset, prior: ModularPrior, max_indegree: int | None = None) -> float:
    return dp_build(build_score_table(ds, max_indegree), prior).log_evidence


def dp_predictive_logprob(train: Dataset, x, prior: ModularPrior, max_indegree: int | None = None) -> float:
    """log p(x | D) = log p(D + x) - log p(D), two full DP runs."""
    x = np.asarray(x, dtype=np.int64).reshape(-1)
    if x.shape[0] != train.d:
        raise InputError(f"record has {x.shape[0]} values, training data has {train.d} variables")
    if ((x < 0) | (x >= np.array(train.arities))).any():
        raise InputError("record value outside the training arities")
    base = dp_log_evidence(train, prior, max_indegree)
    return dp_log_evidence(train.with_record(x), prior, max_indegree) - base


def dp_predictive_logprobs(train: Dataset, test: np.ndarray, prior: ModularPrior,
                           max_indegree: int | None = None) -> np.ndarray:
    """Per-record ``log p(x | D)`` for a batch: one DP for D plus one per record."""
    test = np.asarray(test, dtype=np.int64)
    if test.ndim != 2 or test.shape[1] != train.d:
        raise InputError("test records must have the training data's width")
    base = dp_log_evidence(train, prior, max_indegree)
    out = np.empty(len(test))
    for r, x in enumerate(test):
        out[r] = dp_log_evidence(train.with_record(x), prior, max_indegree) - base
    return out
