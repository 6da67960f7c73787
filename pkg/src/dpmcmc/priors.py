"""Modular and global structure priors, and order-counting corrections."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import InputError, UndefinedEstimateError
from .graph import Dag, Order, count_linear_extensions, count_linear_extensions_batch, dag_array

MODULAR_KINDS = ("flat", "koivisto", "custom")


@dataclass(frozen=True)
class ModularPrior:
    """Per-family weights rho_i(G_i); order weights are fixed to 1.

    ``max_indegree`` (if set) forbids larger parent sets.  For ``custom``,
    ``custom_log_rho`` maps ``(node, parent_mask)`` to a log weight and
    missing families get ``-inf``.
    """

    kind: str = "flat"
    custom_log_rho: Mapping[tuple[int, int], float] | None = field(default=None, compare=False, hash=False)
    max_indegree: int | None = None

    def __post_init__(self):
        if self.kind not in MODULAR_KINDS:
            raise InputError(f"unknown modular prior {self.kind!r}; expected one of {MODULAR_KINDS}")
        if self.kind == "custom" and self.custom_log_rho is None:
            raise InputError("custom prior needs a log-rho table")

    def with_cap(self, max_indegree: int | None) -> "ModularPrior":
        return ModularPrior(self.kind, self.custom_log_rho, max_indegree)

    def log_rho(self, i: int, parents: int, d: int) -> float:
        return log_rho(self, i, parents, d)

    def log_rho_array(self, d: int) -> np.ndarray:
        """(d, 2**d) array of log weights, ``-inf`` where forbidden."""
        masks = np.arange(1 << d, dtype=np.int64)
        pc = np.zeros(1 << d, dtype=np.int64)
        for b in range(d):
            pc += (masks >> b) & 1
        out = np.empty((d, 1 << d))
        if self.kind == "flat":
            out[:] = 0.0
        elif self.kind == "koivisto":
            table = np.array([-math.log(math.comb(d - 1, k)) if k <= d - 1 else -np.inf for k in range(d + 1)])
            out[:] = table[pc]
        else:
            out[:] = -np.inf
            for (i, m), w in self.custom_log_rho.items():
                if 0 <= i < d and 0 <= m < (1 << d):
                    out[i, m] = w
        for i in range(d):
            out[i, (masks >> i) & 1 == 1] = -np.inf
        if self.max_indegree is not None:
            out[:, pc > self.max_indegree] = -np.inf
        return out

    def cache_key(self):
        custom = None
        if self.custom_log_rho is not None:
            custom = tuple(sorted(self.custom_log_rho.items()))
        return self.kind, custom, self.max_indegree


def log_rho(p: ModularPrior, i: int, parents: int, d: int) -> float:
    if parents >> i & 1:
        raise InputError(f"node {i} cannot be its own parent")
    k = parents.bit_count()
    if p.max_indegree is not None and k > p.max_indegree:
        return -math.inf
    if p.kind == "flat":
        return 0.0
    if p.kind == "koivisto":
        return -math.log(math.comb(d - 1, k))
    return float(p.custom_log_rho.get((i, parents), -math.inf))


def load_custom_rho(path) -> dict[tuple[int, int], float]:
    """Read ``[per node: [[parent_mask, log_weight], ...]]``."""
    with open(path) as fh:
        obj = json.load(fh)
    out = {}
    try:
        for i, row in enumerate(obj):
            for mask, w in row:
                out[(i, int(mask))] = float(w)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: malformed custom rho table") from exc
    return out


def induced_graph_log_prior(p: ModularPrior, g: Dag) -> float:
    """Unnormalised log p(G) after summing the joint (order, graph) prior over orders."""
    s = sum(log_rho(p, i, m, g.d) for i, m in enumerate(g.parents))
    if s == -math.inf:
        return s
    return s + math.log(count_linear_extensions(g))


def induced_log_prior_batch(p: ModularPrior, parent_array: np.ndarray) -> np.ndarray:
    parent_array = np.asarray(parent_array, dtype=np.int64)
    d = parent_array.shape[1]
    rho = p.log_rho_array(d)
    s = rho[np.arange(d)[None, :], parent_array].sum(axis=1)
    return s + np.log(count_linear_extensions_batch(parent_array).astype(float))


@dataclass(frozen=True)
class GlobalPrior:
    """Prior over whole DAGs used as the MCMC target.

    kind ``uniform``: p(G) constant.  kind ``modular``: the induced prior of
    ``modular``.  kind ``custom``: ``log_mass(g)`` supplied by the caller.
    ``max_indegree`` truncates every kind.
    """

    kind: str = "uniform"
    modular: ModularPrior | None = None
    log_mass: Callable[[Dag], float] | None = field(default=None, compare=False, hash=False)
    max_indegree: int | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "modular", "custom"):
            raise InputError(f"unknown global prior {self.kind!r}")
        if self.kind == "modular" and self.modular is None:
            raise InputError("modular-induced global prior needs a ModularPrior")
        if self.kind == "custom" and self.log_mass is None:
            raise InputError("custom global prior needs a log-mass function")

    @property
    def is_uniform(self) -> bool:
        return self.kind == "uniform"

    def log_prior(self, g: Dag) -> float:
        if self.max_indegree is not None and any(p.bit_count() > self.max_indegree for p in g.parents):
            return -math.inf
        if self.kind == "uniform":
            return 0.0
        if self.kind == "modular":
            return induced_graph_log_prior(self.modular, g)
        return float(self.log_mass(g))

    def log_prior_batch(self, parent_array: np.ndarray) -> np.ndarray:
        parent_array = np.asarray(parent_array, dtype=np.int64)
        if self.kind == "uniform":
            out = np.zeros(len(parent_array))
        elif self.kind == "modular":
            out = induced_log_prior_batch(self.modular, parent_array)
        else:
            d = parent_array.shape[1]
            out = np.array([float(self.log_mass(Dag(d, row, check=False))) for row in parent_array.tolist()])
        if self.max_indegree is not None:
            over = np.zeros(len(parent_array), dtype=bool)
            for i in range(parent_array.shape[1]):
                pc = np.zeros(len(parent_array), dtype=np.int64)
                for b in range(parent_array.shape[1]):
                    pc += (parent_array[:, i] >> b) & 1
                over |= pc > self.max_indegree
            out = np.where(over, -np.inf, out)
        return out


def ellis_weight_exact(g: Dag) -> Fraction:
    """1 / (number of orders consistent with ``g``)."""
    return Fraction(1, count_linear_extensions(g))


def ellis_weight_sampled(g: Dag, sampled_orders: Sequence[Order]) -> float:
    """1 / (number of the given orders that are consistent with ``g``)."""
    hits = sum(1 for o in sampled_orders if o.consistent(g))
    if hits == 0:
        raise UndefinedEstimateError("no sampled order is consistent with the graph")
    return 1.0 / hits


def _normalise(logw: np.ndarray) -> np.ndarray:
    m = np.max(logw)
    w = np.exp(logw - m)
    return w / w.sum()


def kl_to_uniform(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=float)
    nz = p > 0
    return float(np.sum(p[nz] * np.log(p[nz] * len(p))))


def prior_report(d: int) -> tuple[np.ndarray, dict[str, np.ndarray], dict[str, float]]:
    """Normalised priors over every DAG on ``d <= 5`` nodes and their KL to uniform.

    Returns the (n_dags, d) parent array, ``{name: masses}`` and ``{name: KL}``.
    """
    if not 1 <= d <= 5:
        raise InputError("prior report supports 1 <= d <= 5")
    dags = dag_array(d)
    linext = np.log(count_linear_extensions_batch(dags).astype(float))
    flat = induced_log_prior_batch(ModularPrior("flat"), dags)
    koiv = induced_log_prior_batch(ModularPrior("koivisto"), dags)
    priors = {
        "modular_flat": _normalise(flat),
        "koivisto": _normalise(koiv),
        "koivisto_ellis": _normalise(koiv - linext),
        "flat_ellis": _normalise(flat - linext),
        "uniform": np.full(len(dags), 1.0 / len(dags)),
    }
    kl = {name: kl_to_uniform(p) for name, p in priors.items()}
    return dags, priors, kl
