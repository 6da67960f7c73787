"""MCMC over DAGs and over node orders.

Kernels
-------
local   add / delete / reverse one edge (MC^3), Hastings-corrected by the
        neighbourhood sizes.
global  independence sampler whose proposal draws each node pair from the
        (truncated) exact edge marginals, redrawing cyclic proposals.
hybrid  with probability ``beta`` a local step, otherwise a global step;
        each is its own reversible MH kernel.
gibbs   sweep over node pairs resampling {none, i->j, j->i}.
order   MH over node orders with random transpositions, one DAG drawn per
        kept order, reweighted by the sampled order-counting correction.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InputError, UndefinedEstimateError
from .exact import _family_weights, dp_build, dp_edge_marginals, zeta_log
from .graph import AncestorMatrix, Dag, _acyclic_parents, bits, closure_from_parents, count_legal_moves, \
    count_linear_extensions, legal_moves
from .priors import GlobalPrior, ModularPrior
from .scoring import FamilyScoreTable

KERNELS = ("local", "global", "hybrid", "gibbs", "order")


def kernel_label(kernel: str, beta: float | None = None) -> str:
    """Display name; a mixture with beta 1 or 0 is plain local or global."""
    if kernel == "hybrid" and beta is not None:
        if beta == 1.0:
            return "local"
        if beta == 0.0:
            return "global"
    return kernel


class UniformStream:
    """Buffered U(0,1) draws from a PCG64 stream; reproducible given the seed."""

    def __init__(self, seed=None, block: int = 8192):
        if isinstance(seed, np.random.SeedSequence):
            ss = seed
        else:
            ss = np.random.SeedSequence(seed)
        self.generator = np.random.Generator(np.random.PCG64(ss))
        self._block = block
        self._buf: list[float] = []
        self._pos = 0

    def random(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self.generator.random(self._block).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u

    def below(self, n: int) -> int:
        """Uniform integer in range(n)."""
        return min(int(self.random() * n), n - 1)


def spawn_seeds(seed, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n)


@dataclass
class SamplerConfig:
    beta: float = 0.1
    trunc_c: float = 1e-4
    steps: int = 10_000
    burn_in: int = 0
    thin: int = 1
    seed: int | None = 0
    target_prior: GlobalPrior = field(default_factory=GlobalPrior)
    proposal_prior: ModularPrior = field(default_factory=ModularPrior)
    max_global_retries: int = 1000
    dags_per_order: int = 1
    ellis: str = "sampled"

    def validate(self) -> None:
        if not 0.0 <= self.beta <= 1.0:
            raise InputError(f"beta must lie in [0, 1], got {self.beta}")
        if not 0.0 < self.trunc_c < 0.5:
            raise InputError(f"truncation constant must lie in (0, 0.5), got {self.trunc_c}")
        if self.steps < 0 or self.burn_in < 0:
            raise InputError("steps and burn_in must be non-negative")
        if self.thin < 1:
            raise InputError("thin must be at least 1")
        if self.max_global_retries < 1:
            raise InputError("max_global_retries must be at least 1")
        if self.dags_per_order < 1:
            raise InputError("dags_per_order must be at least 1")
        if self.ellis not in ("sampled", "exact", "none"):
            raise InputError(f"unknown Ellis weighting {self.ellis!r}")


class Target:
    """Unnormalised log posterior log p(D|G) + log p(G) over parent tuples."""

    def __init__(self, t: FamilyScoreTable, prior: GlobalPrior | None = None):
        self.table = t
        self.d = t.d
        self.prior = prior or GlobalPrior()
        # python lists index faster than numpy scalars in the inner loops
        self.rows = [t.scores[i].tolist() for i in range(t.d)] if t.d <= 18 else t.scores

    def family(self, i: int, mask: int) -> float:
        return self.rows[i][mask]

    def log_lik(self, parents: Sequence[int]) -> float:
        rows = self.rows
        return sum(rows[i][p] for i, p in enumerate(parents))

    def log_prior(self, parents: Sequence[int]) -> float:
        if self.prior.kind == "uniform" and self.prior.max_indegree is None:
            return 0.0
        return self.prior.log_prior(Dag(self.d, parents, check=False))

    def log_target(self, parents: Sequence[int]) -> float:
        ll = self.log_lik(parents)
        if ll == -math.inf:
            return ll
        return ll + self.log_prior(parents)


class ChainState:
    """Current graph of one chain plus cached quantities."""

    def __init__(self, target: Target, g: Dag, rng: UniformStream):
        self.target = target
        self.current = g
        self.ancestors = AncestorMatrix.from_dag(g)
        self.log_lik = target.log_lik(g.parents)
        self.log_prior = target.log_prior(g.parents)
        self.rng = rng
        self.step = 0
        self._moves: list | None = None
        self._nbd_cache: dict[tuple[int, ...], int] = {}
        self._log_q_global: float | None = None
        self.accepts = {"local": 0, "global": 0, "gibbs": 0}
        self.proposals = {"local": 0, "global": 0, "gibbs": 0}
        self.retry_failures = 0

    @property
    def log_target(self) -> float:
        return self.log_lik + self.log_prior

    def moves(self) -> list:
        if self._moves is None:
            self._moves = legal_moves(self.ancestors)
        return self._moves

    def nbd_size(self, parents: tuple[int, ...], am: AncestorMatrix | None = None) -> int:
        n = self._nbd_cache.get(parents)
        if n is None:
            if am is None:
                am = AncestorMatrix(self.target.d, parents, closure_from_parents(parents))
            n = count_legal_moves(am)
            if len(self._nbd_cache) > 200_000:
                self._nbd_cache.clear()
            self._nbd_cache[parents] = n
        return n

    def set_graph(self, parents, log_lik: float, log_prior: float, am: AncestorMatrix | None = None) -> None:
        parents = tuple(parents)
        self.current = Dag(self.target.d, parents, check=False)
        self.ancestors = am if am is not None else AncestorMatrix(self.target.d, parents, closure_from_parents(parents))
        self.log_lik = log_lik
        self.log_prior = log_prior
        self._moves = None
        self._log_q_global = None

    def recompute_log_target(self) -> float:
        return self.target.log_target(self.current.parents)


def apply_move(parents: Sequence[int], move: tuple[str, int, int]) -> list[int]:
    kind, u, v = move
    out = list(parents)
    if kind == "add":
        out[v] |= 1 << u
    elif kind == "delete":
        out[v] &= ~(1 << u)
    else:
        out[v] &= ~(1 << u)
        out[u] |= 1 << v
    return out


def local_log_ratio(target: Target, old: Sequence[int], new: Sequence[int], nbd_old: int, nbd_new: int,
                    changed: Sequence[int] | None = None, lp_old: float | None = None) -> tuple[float, float, float]:
    """log Hastings ratio of a local move plus the new log-lik and log-prior.

    ``changed`` lists the nodes whose parent sets differ; only those
    families are rescored.
    """
    if changed is None:
        changed = [i for i in range(len(old)) if old[i] != new[i]]
    delta = 0.0
    for i in changed:
        delta += target.family(i, new[i]) - target.family(i, old[i])
    if delta == -math.inf or math.isnan(delta):
        return -math.inf, -math.inf, -math.inf
    lp_new = target.log_prior(new)
    if lp_old is None:
        lp_old = target.log_prior(old)
    ratio = delta + lp_new - lp_old + math.log(nbd_old) - math.log(nbd_new)
    return ratio, delta, lp_new


def local_step(s: ChainState) -> bool:
    """One add/delete/reverse MH step; returns whether the move was accepted."""
    moves = s.moves()
    s.proposals["local"] += 1
    s.step += 1
    if not moves:
        return False
    move = moves[s.rng.below(len(moves))]
    old = s.current.parents
    new = tuple(apply_move(old, move))
    am_new = None
    if new not in s._nbd_cache:
        am_new = s.ancestors.copy()
        am_new.apply(move)
    nbd_new = s.nbd_size(new, am_new)
    nbd_old = len(moves)
    kind, u, v = move
    changed = (v,) if kind != "reverse" else (u, v)
    ratio, delta, lp_new = local_log_ratio(s.target, old, new, nbd_old, nbd_new, changed, s.log_prior)
    if ratio >= 0 or s.rng.random() < math.exp(ratio):
        if am_new is None:
            am_new = s.ancestors.copy()
            am_new.apply(move)
        s.set_graph(new, s.log_lik + delta, lp_new, am_new)
        s.accepts["local"] += 1
        return True
    return False


def truncate_marginals(p: np.ndarray, c: float) -> np.ndarray:
    """Clip edge marginals into [c, 1-c] and keep every pair a valid 3-way split.

    A pair whose clipped sum exceeds ``1 - eps`` (``eps = min(c, 1 - 2c)``)
    is rescaled to that sum, preserving its orientation ratio; if that pushes
    the smaller entry under ``c`` it is set to ``c``.
    """
    p = np.array(p, dtype=float)
    d = p.shape[0]
    eps = min(c, 1.0 - 2.0 * c)
    cap = 1.0 - eps
    out = np.zeros_like(p)
    for i in range(d):
        for j in range(i + 1, d):
            a = min(max(p[i, j], c), 1.0 - c)
            b = min(max(p[j, i], c), 1.0 - c)
            if a + b > cap:
                scale = cap / (a + b)
                a, b = a * scale, b * scale
                if a < c:
                    a, b = c, cap - c
                elif b < c:
                    a, b = cap - c, c
            out[i, j], out[j, i] = a, b
    return out


class GlobalProposal:
    """Independent per-pair proposal built from edge marginals.

    Pair (i, j), i < j, becomes i->j w.p. p[i,j], j->i w.p. p[j,i] and stays
    empty otherwise; cyclic draws are redrawn.  ``log_q`` is the unnormalised
    density of the untruncated-by-acyclicity product.
    """

    def __init__(self, marginals: np.ndarray, trunc_c: float = 1e-4):
        self.d = marginals.shape[0]
        self.trunc_c = trunc_c
        self.p = truncate_marginals(marginals, trunc_c)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = self.p + self.p.T
            self.q = np.where(s > 0, self.p / np.where(s > 0, s, 1), 0.5)
        np.fill_diagonal(self.q, 0.0)
        self._pairs = []
        for i in range(self.d):
            for j in range(i + 1, self.d):
                a, b = float(self.p[i, j]), float(self.p[j, i])
                self._pairs.append((i, j, a, a + b, math.log(a), math.log(b), math.log(max(1.0 - a - b, 1e-300))))

    @classmethod
    def from_table(cls, t: FamilyScoreTable, prior: ModularPrior, trunc_c: float = 1e-4) -> "GlobalProposal":
        return cls(dp_edge_marginals(dp_build(t, prior)), trunc_c)

    def draw(self, rng: UniformStream) -> tuple[list[int], float]:
        """One draw from the product distribution (may be cyclic) and its log-density."""
        parents = [0] * self.d
        lq = 0.0
        for i, j, a, ab, la, lb, ln in self._pairs:
            u = rng.random()
            if u < a:
                parents[j] |= 1 << i
                lq += la
            elif u < ab:
                parents[i] |= 1 << j
                lq += lb
            else:
                lq += ln
        return parents, lq

    def sample(self, rng: UniformStream, max_tries: int) -> tuple[list[int], float] | None:
        for _ in range(max_tries):
            parents, lq = self.draw(rng)
            if _acyclic_parents(parents):
                return parents, lq
        return None

    def log_q(self, parents: Sequence[int]) -> float:
        lq = 0.0
        for i, j, _, _, la, lb, ln in self._pairs:
            if parents[j] >> i & 1:
                lq += la
            elif parents[i] >> j & 1:
                lq += lb
            else:
                lq += ln
        return lq

    def prob(self, parents: Sequence[int]) -> float:
        return math.exp(self.log_q(parents))


def global_log_ratio(target: Target, gp: GlobalProposal, old: Sequence[int], new: Sequence[int],
                     lq_old: float | None = None, lq_new: float | None = None) -> float:
    """log of pi(G') q(G) / (pi(G) q(G')) for the independence sampler."""
    lq_old = gp.log_q(old) if lq_old is None else lq_old
    lq_new = gp.log_q(new) if lq_new is None else lq_new
    t_new = target.log_target(new)
    if t_new == -math.inf:
        return -math.inf
    return t_new - target.log_target(old) + lq_old - lq_new


def global_step(s: ChainState, gp: GlobalProposal, max_retries: int = 1000) -> bool:
    s.proposals["global"] += 1
    s.step += 1
    drawn = gp.sample(s.rng, max_retries)
    if drawn is None:
        s.retry_failures += 1
        return False
    new, lq_new = drawn
    if s._log_q_global is None:
        s._log_q_global = gp.log_q(s.current.parents)
    ll_new = s.target.log_lik(new)
    if ll_new == -math.inf:
        return False
    lp_new = s.target.log_prior(new)
    ratio = ll_new + lp_new - s.log_target + s._log_q_global - lq_new
    if ratio >= 0 or s.rng.random() < math.exp(ratio):
        s.set_graph(new, ll_new, lp_new)
        s._log_q_global = lq_new
        s.accepts["global"] += 1
        return True
    return False


def hybrid_step(s: ChainState, beta: float, gp: GlobalProposal | None, max_retries: int = 1000) -> bool:
    """Local kernel with probability ``beta``, else global.

    With beta exactly 0 or 1 no random number is spent on the choice, so the
    chain coincides draw-for-draw with the pure kernel.
    """
    if beta >= 1.0:
        return local_step(s)
    if beta <= 0.0:
        return global_step(s, gp, max_retries)
    if s.rng.random() < beta:
        return local_step(s)
    return global_step(s, gp, max_retries)


def _reaches(parents: Sequence[int], src: int, dst: int) -> bool:
    d = len(parents)
    children = [0] * d
    for v, p in enumerate(parents):
        for u in bits(p):
            children[u] |= 1 << v
    seen = 1 << src
    frontier = 1 << src
    while frontier:
        nxt = 0
        for u in bits(frontier):
            nxt |= children[u]
        if nxt >> dst & 1:
            return True
        frontier = nxt & ~seen
        seen |= nxt
    return False


def gibbs_options(target: Target, parents: Sequence[int], i: int, j: int) -> list[tuple[list[int], float, float]]:
    """Acyclic states of pair (i, j) with everything else fixed: (parents, log-lik, log-prior)."""
    base = list(parents)
    base[j] &= ~(1 << i)
    base[i] &= ~(1 << j)
    opts = [base]
    if not _reaches(base, j, i):
        a = list(base)
        a[j] |= 1 << i
        opts.append(a)
    if not _reaches(base, i, j):
        b = list(base)
        b[i] |= 1 << j
        opts.append(b)
    return [(o, target.log_lik(o), target.log_prior(o)) for o in opts]


def gibbs_step(s: ChainState) -> bool:
    """One systematic sweep over all unordered pairs; True if the graph changed."""
    d = s.target.d
    changed = False
    s.step += 1
    for i in range(d):
        for j in range(i + 1, d):
            s.proposals["gibbs"] += 1
            cur = s.current.parents
            opts = gibbs_options(s.target, cur, i, j)
            logw = [ll + lp for _, ll, lp in opts]
            m = max(logw)
            w = [math.exp(x - m) if x != -math.inf else 0.0 for x in logw]
            u = s.rng.random() * sum(w)
            k = 0
            acc = w[0]
            while u >= acc and k < len(w) - 1:
                k += 1
                acc += w[k]
            new, ll, lp = opts[k]
            if tuple(new) != cur:
                s.set_graph(new, ll, lp)
                s.accepts["gibbs"] += 1
                changed = True
    return changed


@dataclass
class SampleSet:
    """Kept samples of one chain with diagnostics.

    ``times`` holds elapsed seconds at each kept sample; it is the only
    field that varies between reruns with the same seed.
    """

    d: int
    label: str
    steps: list[int] = field(default_factory=list)
    graphs: list[Dag] = field(default_factory=list)
    weights: list[float] = field(default_factory=list)
    log_target: list[float] = field(default_factory=list)
    times: list[float] = field(default_factory=list)
    orders: list[tuple[int, ...]] | None = None
    accepts: dict = field(default_factory=dict)
    proposals: dict = field(default_factory=dict)
    retry_failures: int = 0
    seed: object = None

    def __len__(self) -> int:
        return len(self.graphs)

    def append(self, step: int, g: Dag, weight: float, log_target: float, elapsed: float) -> None:
        self.steps.append(step)
        self.graphs.append(g)
        self.weights.append(weight)
        self.log_target.append(log_target)
        self.times.append(elapsed)

    def acceptance_rates(self) -> dict[str, float]:
        return {k: self.accepts.get(k, 0) / n for k, n in self.proposals.items() if n}

    def prefix(self, n: int) -> "SampleSet":
        out = SampleSet(self.d, self.label, self.steps[:n], self.graphs[:n], self.weights[:n],
                        self.log_target[:n], self.times[:n],
                        None if self.orders is None else self.orders[:n],
                        dict(self.accepts), dict(self.proposals), self.retry_failures, self.seed)
        return out

    def to_lines(self) -> list[str]:
        return [f"{st},{w:.17g},{lt:.17g},{g.encode()}"
                for st, g, w, lt in zip(self.steps, self.graphs, self.weights, self.log_target)]

    def write(self, path) -> None:
        with open(path, "w") as fh:
            for line in self.to_lines():
                fh.write(line + "\n")

    @classmethod
    def read(cls, path, label: str = "file") -> "SampleSet":
        out = None
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    step, w, lt, enc = line.split(",", 3)
                    g = Dag.decode(enc)
                    step, w, lt = int(step), float(w), float(lt)
                except ValueError as exc:
                    raise InputError(f"{path}: line {lineno}: malformed sample record") from exc
                if out is None:
                    out = cls(g.d, label)
                out.append(step, g, w, lt, 0.0)
        if out is None:
            raise InputError(f"{path}: no samples")
        return out

    def diagnostics(self) -> dict:
        return {
            "label": self.label,
            "n_samples": len(self),
            "acceptance": self.acceptance_rates(),
            "accepts": dict(self.accepts),
            "proposals": dict(self.proposals),
            "retry_failures": self.retry_failures,
        }


def _keep(step: int, cfg: SamplerConfig) -> bool:
    return step >= cfg.burn_in and (step - cfg.burn_in) % cfg.thin == 0


def run_chain(cfg: SamplerConfig, kernel: str, t: FamilyScoreTable, gp: GlobalProposal | None = None,
              init: Dag | None = None, seed=None) -> SampleSet:
    """Run one chain and return its kept samples.

    ``kernel`` is one of local, global, hybrid (uses ``cfg.beta``), gibbs
    or order.  The chain starts from ``init`` (default: empty graph).
    ``seed`` overrides ``cfg.seed`` and may be a SeedSequence.
    """
    cfg.validate()
    if kernel not in KERNELS:
        raise InputError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")
    if kernel == "order":
        return order_chain(cfg, t, cfg.proposal_prior, seed=seed)
    if kernel in ("global", "hybrid") and gp is None:
        raise InputError(f"kernel {kernel!r} needs a global proposal")
    if init is not None and init.d != t.d:
        raise InputError("initial graph size does not match the score table")
    seed = cfg.seed if seed is None else seed
    rng = UniformStream(seed)
    target = Target(t, cfg.target_prior)
    g0 = init if init is not None else Dag.empty(t.d)
    s = ChainState(target, g0, rng)
    if s.log_target == -math.inf:
        raise InputError("initial graph has zero target probability")
    beta = cfg.beta if kernel == "hybrid" else (1.0 if kernel == "local" else 0.0)
    label = kernel_label("hybrid", beta) if kernel in ("local", "global", "hybrid") else kernel
    out = SampleSet(t.d, label, seed=None if isinstance(seed, np.random.SeedSequence) else seed)
    t0 = time.perf_counter()
    if _keep(0, cfg):
        out.append(0, s.current, 1.0, s.log_target, 0.0)
    retries = cfg.max_global_retries
    for step in range(1, cfg.steps + 1):
        if kernel == "gibbs":
            gibbs_step(s)
        else:
            hybrid_step(s, beta, gp, retries)
        if _keep(step, cfg):
            out.append(step, s.current, 1.0, s.log_target, time.perf_counter() - t0)
    out.accepts = {k: v for k, v in s.accepts.items() if s.proposals[k]}
    out.proposals = {k: v for k, v in s.proposals.items() if v}
    out.retry_failures = s.retry_failures
    return out


def random_initial_dag(d: int, rng: np.random.Generator, max_indegree: int | None = None,
                       density: float = 0.5) -> Dag:
    """Random DAG for dispersed chain starts: random order, each forward pair w.p. ``density``."""
    perm = rng.permutation(d)
    parents = [0] * d
    for a in range(d):
        for b in range(a + 1, d):
            if rng.random() < density:
                v = int(perm[b])
                if max_indegree is None or parents[v].bit_count() < max_indegree:
                    parents[v] |= 1 << int(perm[a])
    return Dag(d, parents)


class _OrderScorer:
    def __init__(self, t: FamilyScoreTable, prior: ModularPrior):
        self.d = t.d
        self.log_b = _family_weights(t, prior)
        self.log_a = zeta_log(self.log_b.copy())
        self.a_rows = [self.log_a[i].tolist() for i in range(t.d)] if t.d <= 18 else self.log_a
        self._subsets: dict[int, np.ndarray] = {}

    def sample_family(self, i: int, pred: int, rng: UniformStream) -> int:
        subs = self._subsets.get(pred)
        if subs is None:
            ps = list(bits(pred))
            subs = np.zeros(1, dtype=np.int64)
            for p in ps:
                subs = np.concatenate([subs, subs | (1 << p)])
            if len(self._subsets) > 4096:
                self._subsets.clear()
            self._subsets[pred] = subs
        lw = self.log_b[i, subs]
        w = np.exp(lw - lw.max())
        c = np.cumsum(w)
        k = int(np.searchsorted(c, rng.random() * c[-1], side="right"))
        return int(subs[min(k, len(subs) - 1)])


def sampled_ellis_weights(graphs: Sequence[Dag], orders: Sequence[tuple[int, ...]]) -> list[float]:
    """For each graph, 1 / (number of the given orders consistent with it)."""
    if not orders:
        return []
    uniq, counts = np.unique(np.array(orders, dtype=np.int64), axis=0, return_counts=True)
    d = uniq.shape[1]
    pos = np.empty_like(uniq)
    rows = np.arange(len(uniq))[:, None]
    pos[rows, uniq] = np.arange(d)[None, :]
    cache: dict = {}
    out = []
    for g in graphs:
        w = cache.get(g.parents)
        if w is None:
            ok = np.ones(len(uniq), dtype=bool)
            for u, v in g.edges():
                ok &= pos[:, u] < pos[:, v]
            hits = int(counts[ok].sum())
            if hits == 0:
                raise UndefinedEstimateError("graph inconsistent with every sampled order")
            w = 1.0 / hits
            cache[g.parents] = w
        out.append(w)
    return out


def order_chain(cfg: SamplerConfig, t: FamilyScoreTable, prior: ModularPrior, seed=None,
                init: Sequence[int] | None = None) -> SampleSet:
    """MH over orders with random transpositions; DAGs drawn given each kept order.

    Order score: product over nodes of A_i(predecessors of i).  Weights
    follow ``cfg.ellis``: ``sampled`` (1 / consistent kept orders),
    ``exact`` (1 / number of linear extensions) or ``none``.
    """
    cfg.validate()
    seed = cfg.seed if seed is None else seed
    rng = UniformStream(seed)
    scorer = _OrderScorer(t, prior)
    d = t.d
    perm = list(init) if init is not None else list(range(d))
    a_rows = scorer.a_rows
    pred = [0] * d
    acc_mask = 0
    for v in perm:
        pred[v] = acc_mask
        acc_mask |= 1 << v
    node_score = [a_rows[v][pred[v]] for v in range(d)]
    total = sum(node_score)
    target = Target(t, cfg.target_prior)
    out = SampleSet(d, "order", orders=[], seed=None if isinstance(seed, np.random.SeedSequence) else seed)
    accepts = 0
    t0 = time.perf_counter()

    def keep(step):
        for _ in range(cfg.dags_per_order):
            parents = [scorer.sample_family(v, pred[v], rng) for v in range(d)]
            g = Dag(d, parents, check=False)
            out.append(step, g, 1.0, target.log_target(parents), time.perf_counter() - t0)
            out.orders.append(tuple(perm))

    if _keep(0, cfg):
        keep(0)
    for step in range(1, cfg.steps + 1):
        if d >= 2:
            a = rng.below(d)
            b = rng.below(d - 1)
            if b >= a:
                b += 1
            if a > b:
                a, b = b, a
            new_perm = perm[:]
            new_perm[a], new_perm[b] = new_perm[b], new_perm[a]
            # only positions a..b see their predecessor sets change
            m = 0
            for k in range(a):
                m |= 1 << new_perm[k]
            changes = []
            delta = 0.0
            for k in range(a, b + 1):
                v = new_perm[k]
                sc = a_rows[v][m]
                changes.append((v, m, sc))
                delta += sc - node_score[v]
                m |= 1 << v
            if delta >= 0 or rng.random() < math.exp(delta):
                perm = new_perm
                for v, pm, sc in changes:
                    pred[v] = pm
                    node_score[v] = sc
                total += delta
                accepts += 1
        if _keep(step, cfg):
            keep(step)
    out.accepts = {"order": accepts}
    out.proposals = {"order": cfg.steps}
    if cfg.ellis == "sampled":
        out.weights = sampled_ellis_weights(out.graphs, out.orders)
    elif cfg.ellis == "exact":
        out.weights = [1.0 / count_linear_extensions(g) for g in out.graphs]
    return out
