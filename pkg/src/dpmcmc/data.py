"""Discrete datasets: CSV ingestion, synthetic networks, forward sampling, folds."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InputError, ParseError
from .graph import Dag, bits


def config_index(records: np.ndarray, parents: Sequence[int], arities: Sequence[int]) -> np.ndarray:
    """Mixed-radix parent-configuration index per record.

    Parents are taken in ascending node order; the lowest-numbered parent is
    the least significant digit.
    """
    idx = np.zeros(len(records), dtype=np.int64)
    stride = 1
    for p in sorted(parents):
        idx += records[:, p].astype(np.int64) * stride
        stride *= int(arities[p])
    return idx


@dataclass(frozen=True)
class Dataset:
    records: np.ndarray
    arities: tuple[int, ...]
    interventions: np.ndarray | None = None
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        rec = np.asarray(self.records, dtype=np.int64)
        if rec.ndim == 1 and rec.size == 0:
            rec = rec.reshape(0, len(self.arities))
        if rec.ndim != 2:
            raise InputError("records must be a 2-D array")
        ar = tuple(int(a) for a in self.arities)
        if rec.shape[1] != len(ar):
            raise InputError(f"records have {rec.shape[1]} columns but {len(ar)} arities were given")
        if any(a < 2 for a in ar):
            raise InputError("every arity must be at least 2")
        if rec.size:
            bad = (rec < 0) | (rec >= np.array(ar))
            if bad.any():
                r, c = map(int, np.argwhere(bad)[0])
                raise InputError(f"record {r}, column {c}: value {rec[r, c]} outside 0..{ar[c] - 1}")
        object.__setattr__(self, "records", rec)
        object.__setattr__(self, "arities", ar)
        if self.interventions is not None:
            iv = np.asarray(self.interventions, dtype=bool).reshape(rec.shape[0], -1) if rec.shape[0] == 0 \
                else np.asarray(self.interventions, dtype=bool)
            if iv.shape != rec.shape:
                raise InputError(f"intervention mask shape {iv.shape} != records shape {rec.shape}")
            object.__setattr__(self, "interventions", iv)

    @property
    def n(self) -> int:
        return self.records.shape[0]

    @property
    def d(self) -> int:
        return len(self.arities)

    def intervened(self, i: int) -> np.ndarray | None:
        if self.interventions is None:
            return None
        return self.interventions[:, i]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        iv = None if self.interventions is None else self.interventions[rows]
        return Dataset(self.records[rows], self.arities, iv, self.names)

    def with_record(self, x, intervened=None) -> "Dataset":
        """A copy with one more (observational unless flagged) record appended."""
        x = np.asarray(x, dtype=np.int64).reshape(1, -1)
        if x.shape[1] != self.d:
            raise InputError(f"record has {x.shape[1]} values, dataset has {self.d} variables")
        if ((x < 0) | (x >= np.array(self.arities))).any():
            raise InputError("record value outside the dataset arities")
        iv = None
        if self.interventions is not None or intervened is not None:
            old = self.interventions if self.interventions is not None else np.zeros(self.records.shape, bool)
            new = np.zeros((1, self.d), bool) if intervened is None else np.asarray(intervened, bool).reshape(1, -1)
            iv = np.vstack([old, new])
        return Dataset(np.vstack([self.records, x]), self.arities, iv, self.names)


@dataclass(frozen=True)
class CptSet:
    """A DAG with one conditional probability table per node.

    ``tables[i]`` has shape (n_parent_configs, arity_i); rows index parent
    configurations via :func:`config_index`.
    """

    dag: Dag
    arities: tuple[int, ...]
    tables: tuple[np.ndarray, ...] = field(repr=False)

    def __post_init__(self):
        for i, t in enumerate(self.tables):
            r = 1
            for p in bits(self.dag.parents[i]):
                r *= self.arities[p]
            if t.shape != (r, self.arities[i]):
                raise InputError(f"table {i} has shape {t.shape}, expected {(r, self.arities[i])}")
            if not np.allclose(t.sum(axis=1), 1.0, atol=1e-12, rtol=0):
                raise InputError(f"table {i} rows do not sum to 1")

    def log_prob(self, records: np.ndarray) -> np.ndarray:
        records = np.asarray(records, dtype=np.int64)
        out = np.zeros(len(records))
        for i, t in enumerate(self.tables):
            j = config_index(records, list(bits(self.dag.parents[i])), self.arities)
            with np.errstate(divide="ignore"):
                out += np.log(t[j, records[:, i]])
        return out

    def entropy(self) -> float:
        """Joint entropy in nats, by exhaustive enumeration of the state space."""
        grids = np.meshgrid(*[np.arange(a) for a in self.arities], indexing="ij")
        states = np.stack([g.ravel() for g in grids], axis=1)
        lp = self.log_prob(states)
        p = np.exp(lp)
        nz = p > 0
        return float(-(p[nz] * lp[nz]).sum())


def _parse_int(cell: str, row: int, col: int, source: str) -> int:
    try:
        v = int(cell.strip())
    except ValueError:
        raise ParseError(f"{source}: line {row}, column {col}: {cell!r} is not an integer") from None
    if v < 0:
        raise ParseError(f"{source}: line {row}, column {col}: negative value {v}")
    return v


def _read_int_rows(path, header: bool | None):
    path = Path(path)
    if not path.exists():
        raise ParseError(f"{path}: no such file")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    names = None
    if rows:
        first = rows[0]
        is_header = header
        if is_header is None:
            is_header = not all(c.strip().lstrip("-").isdigit() for c in first)
        if is_header:
            names = tuple(c.strip() for c in first)
            rows = rows[1:]
    width = len(names) if names is not None else (len(rows[0]) if rows else 0)
    data = []
    offset = 2 if names is not None else 1
    for r, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"{path}: line {r + offset}: expected {width} cells, found {len(row)}")
        data.append([_parse_int(c, r + offset, k, str(path)) for k, c in enumerate(row)])
    arr = np.array(data, dtype=np.int64).reshape(len(data), width)
    return arr, names


def load_csv(path, header: bool | None = None, interventions_path=None,
             arities: Sequence[int] | None = None) -> Dataset:
    """Read a comma-separated integer table.

    ``header=None`` sniffs the first row.  Arities default to (max code)+1,
    and never below 2.  An intervention file, if given, must be a 0/1 table
    of the same shape (its own header row is optional).
    """
    records, names = _read_int_rows(path, header)
    d = records.shape[1]
    if arities is None:
        arities = [max(2, int(records[:, i].max()) + 1) if len(records) else 2 for i in range(d)]
    else:
        arities = [int(a) for a in arities]
        if len(arities) != d:
            raise ParseError(f"{path}: {len(arities)} arities declared for {d} columns")
        for i, a in enumerate(arities):
            if len(records) and records[:, i].max() >= a:
                r = int(np.argmax(records[:, i] >= a))
                line = r + (2 if names is not None else 1)
                raise ParseError(f"{path}: line {line}, column {i}: value {records[r, i]} exceeds declared arity {a}")
    iv = None
    if interventions_path is not None:
        iv, _ = _read_int_rows(interventions_path, None)
        if iv.shape != records.shape:
            raise ParseError(f"{interventions_path}: shape {iv.shape} does not match data shape {records.shape}")
        if ((iv != 0) & (iv != 1)).any():
            r, c = map(int, np.argwhere((iv != 0) & (iv != 1))[0])
            raise ParseError(f"{interventions_path}: record {r}, column {c}: intervention cells must be 0 or 1")
        iv = iv.astype(bool)
    return Dataset(records, tuple(arities), iv, names)


def write_csv(ds: Dataset, path, interventions_path=None) -> None:
    names = ds.names or tuple(f"X{i}" for i in range(ds.d))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        w.writerows(ds.records.tolist())
    if interventions_path is not None:
        iv = ds.interventions if ds.interventions is not None else np.zeros(ds.records.shape, bool)
        with open(interventions_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            w.writerows(iv.astype(int).tolist())


def random_network(d: int, arity_range: tuple[int, int] = (2, 4), strength: float = 0.5,
                   seed=None, density: float = 1.5, max_indegree: int | None = None) -> CptSet:
    """Random DAG with Dirichlet-drawn CPTs.

    Each pair i<j of a random node order gets an edge with probability
    chosen so the expected in-degree is ``density``; nodes over
    ``max_indegree`` lose randomly chosen parents.
    """
    lo, hi = arity_range
    if lo < 2 or hi < lo:
        raise InputError(f"arity range must satisfy 2 <= lo <= hi, got {arity_range}")
    if strength <= 0:
        raise InputError("Dirichlet strength must be positive")
    rng = np.random.default_rng(seed)
    p_edge = min(1.0, 2.0 * density / (d - 1)) if d > 1 else 0.0
    perm = rng.permutation(d)
    parents = [0] * d
    for a in range(d):
        for b in range(a + 1, d):
            if rng.random() < p_edge:
                parents[perm[b]] |= 1 << int(perm[a])
    if max_indegree is not None:
        for v in range(d):
            ps = list(bits(parents[v]))
            if len(ps) > max_indegree:
                keep = rng.choice(ps, size=max_indegree, replace=False)
                parents[v] = sum(1 << int(p) for p in keep)
    arities = tuple(int(a) for a in rng.integers(lo, hi + 1, size=d))
    dag = Dag(d, parents)
    tables = []
    for v in range(d):
        r = 1
        for p in bits(parents[v]):
            r *= arities[p]
        t = rng.dirichlet(np.full(arities[v], strength), size=r)
        # renormalise in float to pin row sums to 1 within rounding
        t = t / t.sum(axis=1, keepdims=True)
        tables.append(t)
    return CptSet(dag, arities, tuple(tables))


def ancestral_sample(net: CptSet, n: int, interventions=None, seed=None) -> Dataset:
    """Forward-sample ``n`` records.

    ``interventions`` is a list of ``(node, forced_state, (start, stop))``;
    records in ``range(start, stop)`` get ``node`` clamped and flagged.
    """
    if n < 0:
        raise InputError("n must be non-negative")
    rng = np.random.default_rng(seed)
    d = net.dag.d
    records = np.zeros((n, d), dtype=np.int64)
    mask = np.zeros((n, d), dtype=bool)
    for node, state, (start, stop) in interventions or ():
        if not 0 <= node < d:
            raise InputError(f"intervention on unknown node {node}")
        if not 0 <= state < net.arities[node]:
            raise InputError(f"forced state {state} outside 0..{net.arities[node] - 1} for node {node}")
        mask[max(start, 0):min(stop, n), node] = True
    forced = np.zeros((n, d), dtype=np.int64)
    for node, state, (start, stop) in interventions or ():
        forced[max(start, 0):min(stop, n), node] = state
    for v in net.dag.topological_order():
        ps = list(bits(net.dag.parents[v]))
        j = config_index(records, ps, net.arities)
        cdf = np.cumsum(net.tables[v][j], axis=1)
        u = rng.random(n)
        draw = (u[:, None] >= cdf[:, :-1]).sum(axis=1) if n else np.zeros(0, dtype=np.int64)
        records[:, v] = np.where(mask[:, v], forced[:, v], draw)
    return Dataset(records, net.arities, mask if interventions else None)


def split_folds(ds: Dataset, k: int, seed=None) -> list[tuple[Dataset, Dataset]]:
    """Shuffle and cut into ``k`` near-equal test folds; train is the complement."""
    if k < 2:
        raise InputError("need at least 2 folds")
    if ds.n < k:
        raise InputError(f"cannot cut {ds.n} records into {k} folds")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(ds.n)
    out = []
    for test_rows in np.array_split(perm, k):
        train_rows = np.setdiff1d(perm, test_rows, assume_unique=True)
        out.append((ds.subset(np.sort(train_rows)), ds.subset(np.sort(test_rows))))
    return out


def network_to_json(net: CptSet, seed=None) -> dict:
    return {
        "dag": net.dag.encode(),
        "arities": list(net.arities),
        "seed": seed,
        "tables": [t.tolist() for t in net.tables],
    }


def network_from_json(obj: dict) -> CptSet:
    dag = Dag.decode(obj["dag"])
    tables = tuple(np.asarray(t, dtype=float) for t in obj["tables"])
    return CptSet(dag, tuple(obj["arities"]), tables)


def load_truth(path) -> Dag:
    with open(path) as fh:
        return Dag.decode(json.load(fh)["dag"])
