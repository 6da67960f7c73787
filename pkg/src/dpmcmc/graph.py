"""DAG representation and the combinatorics built on it.

Node sets are plain Python ints used as bitmasks (bit ``j`` set means node
``j`` is a member).  A :class:`Dag` stores one parent mask per node.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import CycleError, InputError, ResourceError

MAX_NODES = 32
ENUMERATION_CAP = 6
LINEXT_CAP = 24


def bits(mask: int) -> Iterator[int]:
    """Yield the indices of the set bits of ``mask`` in increasing order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def mask_of(nodes: Iterable[int]) -> int:
    m = 0
    for v in nodes:
        m |= 1 << v
    return m


def submasks(mask: int) -> Iterator[int]:
    """All subsets of ``mask``, the empty set included (descending order)."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def _check_d(d: int) -> None:
    if not 1 <= d <= MAX_NODES:
        raise InputError(f"node count must be in 1..{MAX_NODES}, got {d}")


def _acyclic_parents(parents: Sequence[int]) -> bool:
    # Repeatedly strip nodes whose parents are all already stripped.
    d = len(parents)
    remaining = (1 << d) - 1
    placed = 0
    progress = True
    while remaining and progress:
        progress = False
        for v in bits(remaining):
            if parents[v] & ~placed == 0:
                placed |= 1 << v
                remaining &= ~(1 << v)
                progress = True
    return remaining == 0


class Dag:
    """Immutable DAG on ``d`` nodes stored as a tuple of parent bitmasks."""

    __slots__ = ("d", "parents", "_hash")

    def __init__(self, d: int, parents: Sequence[int], check: bool = True):
        self.d = d
        self.parents = tuple(parents)
        self._hash = None
        if check:
            _check_d(d)
            if len(self.parents) != d:
                raise InputError(f"expected {d} parent sets, got {len(self.parents)}")
            full = (1 << d) - 1
            for i, p in enumerate(self.parents):
                if p < 0 or p & ~full:
                    raise InputError(f"parent set of node {i} references a node >= {d}")
                if p >> i & 1:
                    raise InputError(f"self-loop on node {i}")
            if not _acyclic_parents(self.parents):
                raise CycleError("parent sets contain a directed cycle")

    @classmethod
    def empty(cls, d: int) -> "Dag":
        _check_d(d)
        return cls(d, (0,) * d, check=False)

    @classmethod
    def from_edges(cls, d: int, edges: Iterable[tuple[int, int]]) -> "Dag":
        parents = [0] * d
        for u, v in edges:
            if not (0 <= u < d and 0 <= v < d):
                raise InputError(f"edge {u}->{v} out of range for d={d}")
            parents[v] |= 1 << u
        return cls(d, parents)

    @classmethod
    def from_matrix(cls, adj) -> "Dag":
        """Build from a boolean adjacency matrix, ``adj[u][v]`` meaning u -> v."""
        adj = np.asarray(adj, dtype=bool)
        d = adj.shape[0]
        return cls.from_edges(d, zip(*np.nonzero(adj)))

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for v in range(self.d) for u in bits(self.parents[v])]

    @property
    def n_edges(self) -> int:
        return sum(p.bit_count() for p in self.parents)

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.parents[v] >> u & 1)

    def children(self) -> list[int]:
        ch = [0] * self.d
        for v, p in enumerate(self.parents):
            for u in bits(p):
                ch[u] |= 1 << v
        return ch

    def with_parents(self, v: int, mask: int, check: bool = True) -> "Dag":
        parents = list(self.parents)
        parents[v] = mask
        return Dag(self.d, parents, check=check)

    def add_edge(self, u: int, v: int) -> "Dag":
        return self.with_parents(v, self.parents[v] | 1 << u)

    def remove_edge(self, u: int, v: int) -> "Dag":
        return self.with_parents(v, self.parents[v] & ~(1 << u), check=False)

    def reverse_edge(self, u: int, v: int) -> "Dag":
        parents = list(self.parents)
        parents[v] &= ~(1 << u)
        parents[u] |= 1 << v
        return Dag(self.d, parents)

    def adjacency(self) -> np.ndarray:
        """Boolean matrix with ``a[u, v]`` true iff u -> v."""
        a = np.zeros((self.d, self.d), dtype=bool)
        for u, v in self.edges():
            a[u, v] = True
        return a

    def skeleton(self) -> np.ndarray:
        a = self.adjacency()
        return a | a.T

    def topological_order(self) -> list[int]:
        order = []
        placed = 0
        remaining = (1 << self.d) - 1
        while remaining:
            for v in bits(remaining):
                if self.parents[v] & ~placed == 0:
                    order.append(v)
                    placed |= 1 << v
                    remaining &= ~(1 << v)
        return order

    def encode(self) -> str:
        return f"{self.d};" + ",".join(str(p) for p in self.parents)

    @classmethod
    def decode(cls, text: str) -> "Dag":
        try:
            head, body = text.strip().split(";")
            d = int(head)
            parents = [int(x) for x in body.split(",")] if body else []
        except ValueError as exc:
            raise InputError(f"malformed graph encoding {text!r}") from exc
        return cls(d, parents)

    def __eq__(self, other) -> bool:
        return isinstance(other, Dag) and self.parents == other.parents and self.d == other.d

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.d, self.parents))
        return self._hash

    def __repr__(self) -> str:
        return f"Dag({self.encode()})"


class Order:
    """A total order of the nodes; ``perm[k]`` is the k-th node."""

    __slots__ = ("perm", "pos")

    def __init__(self, perm: Sequence[int]):
        perm = tuple(int(x) for x in perm)
        if sorted(perm) != list(range(len(perm))):
            raise InputError(f"{perm} is not a permutation")
        self.perm = perm
        pos = [0] * len(perm)
        for k, v in enumerate(perm):
            pos[v] = k
        self.pos = tuple(pos)

    def predecessors(self, v: int) -> int:
        return mask_of(self.perm[: self.pos[v]])

    def consistent(self, g: Dag) -> bool:
        return all(self.pos[u] < self.pos[v] for u, v in g.edges())

    def __repr__(self) -> str:
        return f"Order({self.perm})"


def is_acyclic(edges: Iterable[tuple[int, int]], d: int) -> bool:
    """True iff the directed graph on ``d`` nodes with ``edges`` has no cycle."""
    _check_d(d)
    parents = [0] * d
    for u, v in edges:
        if not (0 <= u < d and 0 <= v < d):
            raise InputError(f"edge {u}->{v} out of range for d={d}")
        parents[v] |= 1 << u
    return _acyclic_parents(parents)


def closure_from_parents(parents: Sequence[int]) -> list[int]:
    """Descendant masks: bit ``j`` of ``reach[i]`` set iff a path i ~> j exists.

    Assumes the graph is acyclic.
    """
    d = len(parents)
    children = [0] * d
    for v, p in enumerate(parents):
        for u in bits(p):
            children[u] |= 1 << v
    reach = [0] * d
    order = Dag(d, parents, check=False).topological_order()
    for u in reversed(order):
        r = children[u]
        for c in bits(children[u]):
            r |= reach[c]
        reach[u] = r
    return reach


class AncestorMatrix:
    """Maintained transitive closure of a DAG under single-edge edits.

    Additions are propagated incrementally; deletions and reversals
    recompute the closure from scratch.  Single writer.
    """

    __slots__ = ("d", "parents", "reach")

    def __init__(self, d: int, parents: Sequence[int], reach: Sequence[int]):
        self.d = d
        self.parents = list(parents)
        self.reach = list(reach)

    @classmethod
    def from_dag(cls, g: Dag) -> "AncestorMatrix":
        return cls(g.d, g.parents, closure_from_parents(g.parents))

    def copy(self) -> "AncestorMatrix":
        return AncestorMatrix(self.d, self.parents, self.reach)

    def dag(self) -> Dag:
        return Dag(self.d, self.parents, check=False)

    def has_path(self, u: int, v: int) -> bool:
        return bool(self.reach[u] >> v & 1)

    def would_create_cycle(self, u: int, v: int) -> bool:
        """Whether adding u -> v closes a cycle."""
        return u == v or bool(self.reach[v] >> u & 1)

    def can_reverse(self, u: int, v: int) -> bool:
        """Whether the existing edge u -> v can be flipped without a cycle."""
        # A cycle appears iff u reaches v through some other child.
        others = 0
        for c in range(self.d):
            if c != v and self.parents[c] >> u & 1:
                others |= (1 << c) | self.reach[c]
        return not others >> v & 1

    def add_edge(self, u: int, v: int) -> None:
        if self.parents[v] >> u & 1:
            raise InputError(f"edge {u}->{v} already present")
        if self.would_create_cycle(u, v):
            raise CycleError(f"adding {u}->{v} creates a cycle")
        self.parents[v] |= 1 << u
        gained = (1 << v) | self.reach[v]
        reach = self.reach
        for a in range(self.d):
            if a == u or reach[a] >> u & 1:
                reach[a] |= gained

    def remove_edge(self, u: int, v: int) -> None:
        if not self.parents[v] >> u & 1:
            raise InputError(f"edge {u}->{v} not present")
        self.parents[v] &= ~(1 << u)
        self.reach = closure_from_parents(self.parents)

    def reverse_edge(self, u: int, v: int) -> None:
        if not self.parents[v] >> u & 1:
            raise InputError(f"edge {u}->{v} not present")
        if not self.can_reverse(u, v):
            raise CycleError(f"reversing {u}->{v} creates a cycle")
        self.parents[v] &= ~(1 << u)
        self.parents[u] |= 1 << v
        self.reach = closure_from_parents(self.parents)

    def apply(self, edit: tuple[str, int, int]) -> None:
        kind, u, v = edit
        if kind == "add":
            self.add_edge(u, v)
        elif kind == "delete":
            self.remove_edge(u, v)
        elif kind == "reverse":
            self.reverse_edge(u, v)
        else:
            raise InputError(f"unknown edit kind {kind!r}")

    def to_array(self) -> np.ndarray:
        m = np.zeros((self.d, self.d), dtype=bool)
        for i, r in enumerate(self.reach):
            for j in bits(r):
                m[i, j] = True
        return m


def ancestor_update(m: AncestorMatrix, edit: tuple[str, int, int]) -> AncestorMatrix:
    """Return a new matrix with ``edit`` applied; ``m`` itself is left untouched."""
    out = m.copy()
    out.apply(edit)
    return out


def legal_moves(am: AncestorMatrix) -> list[tuple[str, int, int]]:
    """Every single-edge addition, deletion and reversal that keeps the graph acyclic."""
    d = am.d
    parents = am.parents
    reach = am.reach
    moves = []
    for v in range(d):
        pv = parents[v]
        for u in range(d):
            if u == v:
                continue
            if pv >> u & 1:
                moves.append(("delete", u, v))
                if am.can_reverse(u, v):
                    moves.append(("reverse", u, v))
            elif not (parents[u] >> v & 1) and not (reach[v] >> u & 1):
                moves.append(("add", u, v))
    return moves


def count_legal_moves(am: AncestorMatrix) -> int:
    d = am.d
    parents = am.parents
    reach = am.reach
    n = 0
    for u in range(d):
        ch = 0
        for c in range(d):
            if parents[c] >> u & 1:
                ch |= 1 << c
        for v in range(d):
            if u == v:
                continue
            if ch >> v & 1:
                n += 1
                others = 0
                for c in bits(ch & ~(1 << v)):
                    others |= (1 << c) | reach[c]
                if not others >> v & 1:
                    n += 1
            elif not (parents[u] >> v & 1) and not (reach[v] >> u & 1):
                n += 1
    return n


def neighborhood(g: Dag) -> list[Dag]:
    """All acyclic graphs one addition, deletion or reversal away from ``g``."""
    am = AncestorMatrix.from_dag(g)
    out = []
    for kind, u, v in legal_moves(am):
        parents = list(g.parents)
        if kind == "add":
            parents[v] |= 1 << u
        elif kind == "delete":
            parents[v] &= ~(1 << u)
        else:
            parents[v] &= ~(1 << u)
            parents[u] |= 1 << v
        out.append(Dag(g.d, parents, check=False))
    return out


def has_path(g: Dag, i: int, j: int) -> bool:
    """True iff a directed path i ~> j exists in ``g``."""
    if i == j:
        raise InputError("has_path needs two distinct nodes")
    if not (0 <= i < g.d and 0 <= j < g.d):
        raise InputError(f"node out of range for d={g.d}")
    children = g.children()
    seen = 1 << i
    queue = deque([i])
    while queue:
        u = queue.popleft()
        nxt = children[u] & ~seen
        if nxt >> j & 1:
            return True
        seen |= nxt
        queue.extend(bits(nxt))
    return False


@lru_cache(maxsize=32)
def _levels(n: int) -> list[np.ndarray]:
    masks = np.arange(1 << n, dtype=np.int64)
    pc = np.zeros(1 << n, dtype=np.int64)
    for b in range(n):
        pc += (masks >> b) & 1
    order = np.argsort(pc, kind="stable")
    counts = np.bincount(pc, minlength=n + 1)
    return np.split(order, np.cumsum(counts)[:-1])


def _linext_connected(parents: Sequence[int]) -> int:
    n = len(parents)
    dtype = np.int64 if n <= 20 else object
    f = np.zeros(1 << n, dtype=dtype)
    f[0] = 1
    par = np.array(parents, dtype=np.int64)
    for level in _levels(n)[1:]:
        acc = np.zeros(len(level), dtype=dtype)
        for v in range(n):
            bit = 1 << v
            ok = ((level & bit) != 0) & ((level & par[v]) == par[v])
            if ok.any():
                acc[ok] += f[level[ok] ^ bit]
        f[level] = acc
    return int(f[-1])


def count_linear_extensions(g: Dag, cap: int = LINEXT_CAP) -> int:
    """Number of node orders consistent with ``g`` (exact integer).

    Connected components are counted separately and merged with a
    multinomial coefficient.
    """
    if g.d > cap:
        raise ResourceError(f"linear-extension count capped at d={cap}, got d={g.d}")
    # undirected components
    adj = [0] * g.d
    for u, v in g.edges():
        adj[u] |= 1 << v
        adj[v] |= 1 << u
    seen = 0
    total = 1
    placed = 0
    for start in range(g.d):
        if seen >> start & 1:
            continue
        comp = 1 << start
        frontier = comp
        while frontier:
            nxt = 0
            for u in bits(frontier):
                nxt |= adj[u]
            frontier = nxt & ~comp
            comp |= nxt
        seen |= comp
        nodes = list(bits(comp))
        index = {v: k for k, v in enumerate(nodes)}
        local = [mask_of(index[u] for u in bits(g.parents[v])) for v in nodes]
        k = len(nodes)
        total *= math.comb(placed + k, k) * (math.factorial(k) if k <= 1 else _linext_connected(local))
        placed += k
    return total


def count_linear_extensions_batch(parent_array: np.ndarray) -> np.ndarray:
    """Linear-extension counts for many small DAGs at once.

    ``parent_array`` has shape (n_graphs, d) of parent masks; d <= 20.
    """
    parent_array = np.asarray(parent_array, dtype=np.int64)
    n_graphs, d = parent_array.shape
    if d > 20:
        raise ResourceError("batched linear-extension counting supports d <= 20")
    f = np.zeros((n_graphs, 1 << d), dtype=np.int64)
    f[:, 0] = 1
    for level in _levels(d)[1:]:
        acc = np.zeros((n_graphs, len(level)), dtype=np.int64)
        for v in range(d):
            bit = 1 << v
            cols = (level & bit) != 0
            sub = level[cols]
            ok = (sub[None, :] & parent_array[:, v : v + 1]) == parent_array[:, v : v + 1]
            acc[:, cols] += np.where(ok, f[:, sub ^ bit], 0)
        f[:, level] = acc
    return f[:, -1]


def _enumerate_by_filter(d: int) -> Iterator[tuple[int, ...]]:
    choices = []
    for i in range(d):
        others = ((1 << d) - 1) & ~(1 << i)
        choices.append(sorted(submasks(others)))
    for parents in itertools.product(*choices):
        if _acyclic_parents(parents):
            yield parents


def _enumerate_by_extension(d: int) -> Iterator[tuple[int, ...]]:
    # Every DAG on d nodes is uniquely a DAG on nodes 0..d-2 plus node d-1
    # with a parent set P and child set C such that no child reaches a parent.
    if d <= 4:
        yield from _enumerate_by_filter(d)
        return
    new = d - 1
    newbit = 1 << new
    full = newbit - 1
    for base in _enumerate_by_extension(d - 1):
        reach = closure_from_parents(base)
        incl = [reach[v] | (1 << v) for v in range(new)]
        for cmask in range(newbit):
            below = 0
            for c in bits(cmask):
                below |= incl[c]
            free = full & ~below
            if cmask:
                extended = tuple(p | newbit if cmask >> v & 1 else p for v, p in enumerate(base))
            else:
                extended = base
            sub = free
            while True:
                yield extended + (sub,)
                if sub == 0:
                    break
                sub = (sub - 1) & free


def enumerate_parent_tuples(d: int) -> Iterator[tuple[int, ...]]:
    """Parent-mask tuples of every labeled DAG on ``d`` nodes, each once."""
    if d < 1:
        raise InputError("d must be positive")
    if d > ENUMERATION_CAP:
        raise ResourceError(f"DAG enumeration capped at d={ENUMERATION_CAP}")
    if d <= 4:
        return _enumerate_by_filter(d)
    return _enumerate_by_extension(d)


def enumerate_dags(d: int) -> Iterator[Dag]:
    """Stream every labeled DAG on ``d`` nodes exactly once."""
    for parents in enumerate_parent_tuples(d):
        yield Dag(d, parents, check=False)


@lru_cache(maxsize=8)
def dag_array(d: int) -> np.ndarray:
    """All DAGs on ``d`` nodes as an (n_dags, d) array of parent masks."""
    arr = np.array(list(enumerate_parent_tuples(d)), dtype=np.int64).reshape(-1, d)
    arr.setflags(write=False)
    return arr
