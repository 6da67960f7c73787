"""BDeu family scores with cached sufficient statistics.

Naming follows the model: for node ``i`` with ``q`` states and ``r``
parent configurations the Dirichlet hyper-parameter is ``alpha = 1/(q*r)``.
Records whose cell for node ``i`` was set by intervention are left out of
node ``i``'s counts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.special import gammaln

from .data import Dataset, config_index
from .errors import ContractError, InputError, ResourceError
from .graph import Dag, bits

DEFAULT_MEMORY_BUDGET = 2 << 30


def default_max_indegree(d: int) -> int:
    return d - 1 if d <= 14 else 5


def n_parent_configs(ds: Dataset, parents: int) -> int:
    r = 1
    for p in bits(parents):
        r *= ds.arities[p]
    return r


class CountCache:
    """Parent-configuration indices shared across child nodes.

    ``configs(mask)`` maps each record to a compact configuration id for the
    parent set ``mask``.  Ids are built by extending the cached prefix
    (``mask`` without its highest node); when the mixed-radix range gets
    larger than the data it is compressed to the observed configurations.
    """

    def __init__(self, ds: Dataset, max_entries: int = 4096):
        self.ds = ds
        self.max_entries = max_entries
        self._configs: dict[int, tuple[np.ndarray, int]] = {}
        self._limit = max(4 * ds.n, 64)
        self._keep = []
        for i in range(ds.d):
            iv = ds.intervened(i)
            self._keep.append(None if iv is None or not iv.any() else ~iv)

    def extend(self, prefix: tuple[np.ndarray, int], p: int) -> tuple[np.ndarray, int]:
        idx, k = prefix
        a = self.ds.arities[p]
        idx = idx + self.ds.records[:, p] * k
        k *= a
        if k > self._limit:
            uniq, idx = np.unique(idx, return_inverse=True)
            idx = idx.reshape(-1)
            k = len(uniq)
        return idx, k

    def root(self) -> tuple[np.ndarray, int]:
        return np.zeros(self.ds.n, dtype=np.int64), 1

    def configs(self, mask: int) -> tuple[np.ndarray, int]:
        hit = self._configs.get(mask)
        if hit is not None:
            return hit
        if mask == 0:
            out = self.root()
        else:
            top = mask.bit_length() - 1
            out = self.extend(self.configs(mask & ~(1 << top)), top)
        if len(self._configs) >= self.max_entries:
            self._configs.clear()
        self._configs[mask] = out
        return out

    def walk(self, max_size: int) -> Iterator[tuple[int, tuple[np.ndarray, int]]]:
        """Depth-first over parent sets of size <= max_size; memory O(max_size * n)."""
        d = self.ds.d
        stack = [(0, self.root())]
        while stack:
            mask, cfg = stack.pop()
            yield mask, cfg
            if mask.bit_count() >= max_size:
                continue
            start = mask.bit_length()
            for p in range(d - 1, start - 1, -1):
                stack.append((mask | 1 << p, self.extend(cfg, p)))

    def compact_counts(self, i: int, cfg: tuple[np.ndarray, int]) -> np.ndarray:
        """(n_ids, q_i) counts over compact configuration ids."""
        idx, k = cfg
        q = self.ds.arities[i]
        x = self.ds.records[:, i]
        keep = self._keep[i]
        if keep is not None:
            idx = idx[keep]
            x = x[keep]
        return np.bincount(idx * q + x, minlength=k * q).reshape(k, q)


def _bdeu_from_counts(counts: np.ndarray, q: int, r: int) -> float:
    alpha = 1.0 / (q * r)
    nj = counts.sum(axis=1)
    nj = nj[nj > 0]
    if nj.size == 0:
        return 0.0
    nz = counts[counts > 0]
    qa = q * alpha
    s = nj.size * gammaln(qa) - gammaln(qa + nj).sum()
    s += gammaln(alpha + nz).sum() - nz.size * gammaln(alpha)
    return float(s)


def family_counts(ds: Dataset, i: int, parents: int) -> np.ndarray:
    """Contingency counts N[j, k] over all parent configurations j and states k."""
    if parents >> i & 1:
        raise InputError(f"node {i} cannot be its own parent")
    ps = list(bits(parents))
    r = n_parent_configs(ds, parents)
    q = ds.arities[i]
    if r * q > 1 << 26:
        raise ResourceError(f"dense contingency table of {r * q} cells is too large")
    j = config_index(ds.records, ps, ds.arities)
    x = ds.records[:, i]
    iv = ds.intervened(i)
    if iv is not None:
        j, x = j[~iv], x[~iv]
    return np.bincount(j * q + x, minlength=r * q).reshape(r, q)


def family_log_marglik(ds: Dataset, i: int, parents: int, cache: CountCache | None = None) -> float:
    """BDeu log marginal likelihood of node ``i``'s column given ``parents``."""
    if parents >> i & 1:
        raise InputError(f"node {i} cannot be its own parent")
    if ds.n == 0:
        return 0.0
    cache = cache or CountCache(ds)
    counts = cache.compact_counts(i, cache.configs(parents))
    return _bdeu_from_counts(counts, ds.arities[i], n_parent_configs(ds, parents))


@dataclass(frozen=True)
class FamilyScoreTable:
    """Log marginal likelihood of every admissible family.

    ``scores[i, mask]`` holds the score of node ``i`` with parent set
    ``mask``; inadmissible entries (``i`` in ``mask`` or too many parents)
    are ``-inf``.
    """

    d: int
    max_indegree: int
    scores: np.ndarray

    def admissible(self, i: int, mask: int) -> bool:
        return not (mask >> i & 1) and mask.bit_count() <= self.max_indegree and 0 <= mask < (1 << self.d)

    def score(self, i: int, mask: int) -> float:
        if not self.admissible(i, mask):
            raise ContractError(f"family ({i}, {mask}) not in table (max in-degree {self.max_indegree})")
        return float(self.scores[i, mask])

    def entries(self, i: int) -> Iterator[tuple[int, float]]:
        for mask in range(1 << self.d):
            if self.admissible(i, mask):
                yield mask, float(self.scores[i, mask])

    @property
    def n_entries(self) -> int:
        return self.d * sum(math.comb(self.d - 1, k) for k in range(self.max_indegree + 1))

    def to_json(self) -> str:
        # 17 significant digits round-trip doubles exactly
        parts = []
        for i in range(self.d):
            row = ",".join(f"[{m},{s:.17g}]" for m, s in self.entries(i))
            parts.append(f"[{row}]")
        return (f'{{"d": {self.d}, "max_indegree": {self.max_indegree}, '
                f'"scores": [{",".join(parts)}]}}')

    @classmethod
    def from_json(cls, text: str) -> "FamilyScoreTable":
        obj = json.loads(text)
        d, k = int(obj["d"]), int(obj["max_indegree"])
        scores = np.full((d, 1 << d), -np.inf)
        for i, row in enumerate(obj["scores"]):
            for mask, s in row:
                scores[i, int(mask)] = float(s)
        t = cls(d, k, scores)
        missing = [(i, m) for i in range(d) for m in range(1 << d)
                   if t.admissible(i, m) and not np.isfinite(scores[i, m])]
        if missing:
            raise InputError(f"score table incomplete: {len(missing)} families missing, e.g. {missing[0]}")
        return t

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "FamilyScoreTable":
        with open(path) as fh:
            return cls.from_json(fh.read())


def build_score_table(ds: Dataset, max_indegree: int | None = None,
                      memory_budget: int = DEFAULT_MEMORY_BUDGET) -> FamilyScoreTable:
    """Score every family with at most ``max_indegree`` parents."""
    d = ds.d
    if max_indegree is None:
        max_indegree = default_max_indegree(d)
    if not 0 <= max_indegree <= max(d - 1, 0):
        raise InputError(f"max_indegree must be in 0..{d - 1}, got {max_indegree}")
    need = d * (1 << d) * 8
    if need > memory_budget:
        raise ResourceError(f"score table needs {need} bytes, budget is {memory_budget}")
    scores = np.full((d, 1 << d), -np.inf)
    if ds.n == 0:
        for i in range(d):
            for mask in range(1 << d):
                if not mask >> i & 1 and mask.bit_count() <= max_indegree:
                    scores[i, mask] = 0.0
        return FamilyScoreTable(d, max_indegree, scores)
    cache = CountCache(ds)
    # A parent set of size max_indegree is needed only as a family of a node
    # outside it, so walking sets up to that size covers every family.
    for mask, cfg in cache.walk(max_indegree):
        r = n_parent_configs(ds, mask)
        for i in range(d):
            if mask >> i & 1:
                continue
            scores[i, mask] = _bdeu_from_counts(cache.compact_counts(i, cfg), ds.arities[i], r)
    return FamilyScoreTable(d, max_indegree, scores)


def graph_log_marglik(t: FamilyScoreTable, g: Dag) -> float:
    """log p(D | G): sum of the family scores of ``g``."""
    if g.d != t.d:
        raise ContractError(f"graph has {g.d} nodes, table has {t.d}")
    return sum(t.score(i, p) for i, p in enumerate(g.parents))
