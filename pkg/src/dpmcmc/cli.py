"""Command-line front end.

Every run writes its outputs into ``--out`` together with ``manifest.json``
(resolved configuration, seed, input digests and package version).  Files
are staged in a temporary directory and moved into place only when the
command succeeds.  Wall-clock data goes under ``timing/`` and is the only
output allowed to differ between reruns of the same manifest.

Exit codes: 0 success, 1 usage error, 2 input/data error, 3 resource cap.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import shutil
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .data import ancestral_sample, load_csv, load_truth, network_to_json, random_network, split_folds, write_csv
from .errors import DpmcmcError, InputError, ResourceError
from .exact import brute_force_posterior, chow_liu, dp_build, dp_edge_marginals, dp_predictive_logprobs, map_dag
from .graph import Dag
from .inference import (FeatureKind, auc, feature_posterior, graph_log_predictive, predictive_loglik_samples,
                        roc_curve, sad_trace)
from .priors import GlobalPrior, ModularPrior, prior_report
from .samplers import GlobalProposal, SampleSet, SamplerConfig, kernel_label, random_initial_dag, run_chain
from .scoring import FamilyScoreTable, build_score_table

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_RESOURCE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


class Outputs:
    """Staging area for one run's files."""

    def __init__(self, out_dir: str):
        self.final = Path(out_dir)
        self.final.parent.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=".dpmcmc-", dir=self.final.parent))
        self.names: list[str] = []

    def path(self, name: str) -> Path:
        p = self.tmp / name
        p.parent.mkdir(parents=True, exist_ok=True)
        if name not in self.names:
            self.names.append(name)
        return p

    def text(self, name: str, content: str) -> None:
        self.path(name).write_text(content)

    def json(self, name: str, obj) -> None:
        self.text(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def commit(self) -> None:
        self.final.mkdir(parents=True, exist_ok=True)
        for name in self.names:
            dst = self.final / name
            dst.parent.mkdir(parents=True, exist_ok=True)
            os.replace(self.tmp / name, dst)
        shutil.rmtree(self.tmp, ignore_errors=True)

    def discard(self) -> None:
        shutil.rmtree(self.tmp, ignore_errors=True)


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def matrix_text(m: np.ndarray, fmt: str) -> str:
    m = np.asarray(m, dtype=float)
    if fmt == "json":
        return json.dumps([[float(v) for v in row] for row in m]) + "\n"
    return "".join(",".join(_fmt(v) for v in row) + "\n" for row in m)


def read_matrix(path) -> np.ndarray:
    text = Path(path).read_text().strip()
    try:
        if text.startswith("["):
            return np.array(json.loads(text), dtype=float)
        return np.array([[float(c) for c in line.split(",")] for line in text.splitlines() if line.strip()])
    except ValueError as exc:
        raise InputError(f"{path}: malformed matrix") from exc


def series_text(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def _load_data(args):
    return load_csv(args.data, interventions_path=getattr(args, "interventions", None))


def _table(args, ds=None) -> FamilyScoreTable:
    if getattr(args, "scores", None):
        return FamilyScoreTable.load(args.scores)
    ds = ds if ds is not None else _load_data(args)
    return build_score_table(ds, args.max_indegree)


def _modular(name: str, max_indegree=None) -> ModularPrior:
    return ModularPrior(name, max_indegree=max_indegree)


def _target(name: str) -> GlobalPrior:
    return GlobalPrior() if name == "uniform" else GlobalPrior("modular", modular=ModularPrior(name))


def _chain_seeds(seed: int, n: int) -> list[tuple[np.random.SeedSequence, np.random.SeedSequence]]:
    return [tuple(s.spawn(2)) for s in np.random.SeedSequence(seed).spawn(n)]


def _sampler_config(args, steps=None) -> SamplerConfig:
    cfg = SamplerConfig(beta=args.beta, trunc_c=args.trunc_c, steps=args.steps if steps is None else steps,
                        burn_in=args.burn_in, thin=args.thin, seed=args.seed,
                        target_prior=_target(args.target_prior), proposal_prior=_modular(args.proposal_prior),
                        max_global_retries=args.max_global_retries, dags_per_order=args.dags_per_order,
                        ellis=args.ellis)
    cfg.validate()
    return cfg


def _run_one(job):
    cfg, kernel, t, gp, init_parents, seed = job
    init = Dag(t.d, init_parents) if init_parents is not None else None
    return run_chain(cfg, kernel, t, gp, init=init, seed=seed)


def run_chains(cfg: SamplerConfig, kernel: str, t: FamilyScoreTable, n_chains: int, seed: int,
               random_init: bool = False, jobs: int = 1) -> list[SampleSet]:
    """Independent chains with per-chain streams spawned from ``seed``."""
    gp = None
    if kernel in ("global", "hybrid"):
        gp = GlobalProposal.from_table(t, cfg.proposal_prior, cfg.trunc_c)
    work = []
    for init_seed, chain_seed in _chain_seeds(seed, n_chains):
        init = None
        if random_init and kernel != "order":
            init = random_initial_dag(t.d, np.random.default_rng(init_seed), t.max_indegree).parents
        work.append((cfg, kernel, t, gp, init, chain_seed))
    if jobs > 1 and n_chains > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_one, work))
    return [_run_one(w) for w in work]


def _write_chains(out: Outputs, chains: list[SampleSet], prefix: str) -> list[dict]:
    diags = []
    for k, ch in enumerate(chains):
        out.text(f"{prefix}_chain{k}.samples", "\n".join(ch.to_lines()) + "\n")
        out.text(f"timing/{prefix}_chain{k}_times.csv",
                 series_text(["step", "seconds"], zip(ch.steps, [float(x) for x in ch.times])))
        diags.append(ch.diagnostics())
    return diags


# -- subcommands ----------------------------------------------------------

def cmd_gen(args, out: Outputs) -> dict:
    ivs = []
    for spec in args.intervene or ():
        try:
            node, state, start, stop = (int(x) for x in spec.split(":"))
        except ValueError:
            raise UsageError(f"--intervene expects node:state:start:stop, got {spec!r}") from None
        ivs.append((node, state, (start, stop)))
    ss = np.random.SeedSequence(args.seed).spawn(2)
    net = random_network(args.d, (args.arity_min, args.arity_max), args.strength,
                         seed=ss[0], density=args.density, max_indegree=args.max_indegree)
    ds = ancestral_sample(net, args.n, ivs or None, seed=ss[1])
    write_csv(ds, out.path("data.csv"), out.path("interventions.csv") if ivs else None)
    out.json("network.json", network_to_json(net, args.seed))
    return {"d": args.d, "n": args.n, "dag": net.dag.encode(), "entropy": net.entropy() if args.d <= 12 else None}


def cmd_score(args, out: Outputs) -> dict:
    ds = _load_data(args)
    t = build_score_table(ds, args.max_indegree)
    out.text("scores.json", t.to_json() + "\n")
    return {"d": t.d, "max_indegree": t.max_indegree, "n_entries": t.n_entries}


def cmd_exact(args, out: Outputs) -> dict:
    ds = _load_data(args) if args.data else None
    t = _table(args, ds)
    prior = _modular(args.prior)
    summary: dict = {"d": t.d, "prior": args.prior}
    if args.brute_force:
        if t.d > 5:
            raise UsageError(f"--brute-force supports d <= 5, data has d={t.d}")
        target = GlobalPrior() if args.uniform_target else GlobalPrior("modular", modular=prior)
        bp = brute_force_posterior(t, target)
        p = bp.edge_marginals()
        summary["method"] = "brute-force"
        summary["log_evidence"] = bp.log_evidence
        out.text(f"path_marginals.{args.format}", matrix_text(bp.path_marginals(), args.format))
    else:
        if args.uniform_target:
            raise UsageError("--uniform-target needs --brute-force")
        tables = dp_build(t, prior)
        p = dp_edge_marginals(tables)
        summary["method"] = "dp"
        summary["log_evidence"] = tables.log_evidence
    out.text(f"edge_marginals.{args.format}", matrix_text(p, args.format))
    g, score = map_dag(t, prior)
    summary["map"] = {"dag": g.encode(), "log_score": score}
    if ds is not None:
        summary["chow_liu"] = chow_liu(ds).encode()
    out.json("summary.json", summary)
    return summary


def cmd_sample(args, out: Outputs) -> dict:
    t = _table(args)
    kernel = args.kernel or "hybrid"
    cfg = _sampler_config(args)
    label = kernel_label(kernel, cfg.beta)
    chains = run_chains(cfg, kernel, t, args.chains, args.seed, args.random_init, args.jobs)
    diags = _write_chains(out, chains, label)
    summary = {"label": label, "kernel": kernel, "chains": diags}
    out.json("diagnostics.json", summary)
    return summary


def cmd_features(args, out: Outputs) -> dict:
    kind = FeatureKind.parse(args.kind)
    chains = [SampleSet.read(p) for p in args.samples]
    if len({c.d for c in chains}) != 1:
        raise InputError("sample files disagree on the number of nodes")
    merged = SampleSet(chains[0].d, "merged")
    for c in chains:
        skip = int(len(c) * args.discard)
        for k in range(skip, len(c)):
            merged.append(c.steps[k], c.graphs[k], c.weights[k], c.log_target[k], 0.0)
    m = feature_posterior(merged, kind)
    out.text(f"features.{args.format}", matrix_text(m, args.format))
    return {"kind": kind.value, "n_samples": len(merged), "files": len(chains)}


def _checkpoints(n: int, k: int) -> list[int]:
    return sorted({int(x) for x in np.unique(np.geomspace(1, n, num=min(k, n)).round())})


def cmd_convergence(args, out: Outputs) -> dict:
    ds = _load_data(args)
    t = build_score_table(ds, args.max_indegree)
    if args.target_prior == "uniform":
        if t.d > 5:
            raise UsageError("a uniform target needs the brute-force oracle, d <= 5")
        exact = brute_force_posterior(t, GlobalPrior()).edge_marginals()
    else:
        exact = dp_edge_marginals(dp_build(t, _modular(args.target_prior)))
    out.text(f"exact_edge_marginals.{args.format}", matrix_text(exact, args.format))
    summary = {"target_prior": args.target_prior, "kernels": {}}
    seeds = np.random.SeedSequence(args.seed).spawn(len(args.kernels))
    for kernel_spec, ss in zip(args.kernels, seeds):
        kernel, beta = kernel_spec, args.beta
        if ":" in kernel_spec:
            kernel, b = kernel_spec.split(":", 1)
            beta = float(b)
        a = argparse.Namespace(**{**vars(args), "beta": beta})
        cfg = _sampler_config(a)
        label = kernel_label(kernel, beta)
        if label == "hybrid" and ":" in kernel_spec:
            label = f"hybrid{beta:g}"
        chain_seed = int(ss.generate_state(1)[0])
        chains = run_chains(cfg, kernel, t, args.chains, chain_seed, args.random_init, args.jobs)
        finals = []
        for k, ch in enumerate(chains):
            tr = sad_trace(ch, exact, _checkpoints(len(ch), args.points))
            out.text(f"{label}_chain{k}_sad.csv", series_text(["n_samples", "step", "sad"],
                                                           [(a_, b_, float(d_)) for a_, b_, _, d_ in tr]))
            out.text(f"timing/{label}_chain{k}_sad.csv",
                     series_text(["seconds", "sad"], [(float(c_), float(d_)) for _, _, c_, d_ in tr]))
            finals.append(tr[-1][3])
        summary["kernels"][label] = {"final_sad": finals, "median_final_sad": float(np.median(finals))}
    out.json("summary.json", summary)
    return summary


def cmd_structure_eval(args, out: Outputs) -> dict:
    truth = load_truth(args.truth)
    kinds = [FeatureKind.parse(k) for k in args.kinds]
    result: dict = {}
    curves = []
    if args.dp:
        t = _table(args)
        if t.d != truth.d:
            raise InputError("truth and data disagree on the number of nodes")
        p = dp_edge_marginals(dp_build(t, _modular(args.prior)))
        result["dp"] = {}
        for kind in kinds:
            if kind is FeatureKind.PATH:
                continue
            s = p + p.T if kind is FeatureKind.UNDIRECTED else p
            result["dp"][kind.value] = auc(s, truth, kind)
            curves.append(("dp", 0, kind, s))
    if args.samples:
        per_kind: dict = {k.value: [] for k in kinds}
        for c, path in enumerate(args.samples):
            ss = SampleSet.read(path)
            if ss.d != truth.d:
                raise InputError(f"{path}: sample graphs and truth disagree on the number of nodes")
            for kind in kinds:
                s = feature_posterior(ss, kind)
                per_kind[kind.value].append(auc(s, truth, kind))
                curves.append(("samples", c, kind, s))
        result["samples"] = {k: {"auc": v, "mean": float(np.mean(v)), "std": float(np.std(v))}
                             for k, v in per_kind.items()}
    if not result:
        raise UsageError("structure-eval needs --dp and/or --samples")
    for source, c, kind, s in curves:
        fpr, tpr = roc_curve(s, truth, kind)
        out.text(f"roc_{source}{c}_{kind.value}.csv",
                 series_text(["fpr", "tpr"], [(float(a), float(b)) for a, b in zip(fpr, tpr)]))
    out.json("auc.json", result)
    return result


def cmd_predict(args, out: Outputs) -> dict:
    ds = _load_data(args)
    methods = args.methods
    prior = _modular(args.prior)
    fold_seed, chain_seed = np.random.SeedSequence(args.seed).spawn(2)
    if args.test:
        test = load_csv(args.test, arities=ds.arities)
        folds = [(ds, test)]
    else:
        folds = split_folds(ds, args.folds, seed=fold_seed)
    chain_seeds = chain_seed.spawn(len(folds))
    rows = []
    per_method: dict = {m: [] for m in methods}
    for f, ((train, test), cs) in enumerate(zip(folds, chain_seeds)):
        t = build_score_table(train, args.max_indegree)
        for m in methods:
            if m == "factored":
                ell = float(graph_log_predictive(Dag.empty(train.d), train, test).mean())
            elif m == "chow-liu":
                ell = float(graph_log_predictive(chow_liu(train), train, test).mean())
            elif m == "map":
                ell = float(graph_log_predictive(map_dag(t, prior)[0], train, test).mean())
            elif m == "dp":
                ell = float(dp_predictive_logprobs(train, test.records, prior, args.max_indegree).mean())
            else:
                kernel = "hybrid" if m == "bma" else m
                cfg = _sampler_config(args)
                chains = run_chains(cfg, kernel, t, 1, int(cs.generate_state(1)[0]), args.random_init)
                res = predictive_loglik_samples(chains[0], train, test,
                                                checkpoints=_checkpoints(len(chains[0]), args.points), by="count")
                ell = res.mean
                out.text(f"{m}_fold{f}_series.csv",
                         series_text(["n_samples", "ell"], [(int(c), float(v)) for c, v in res.series]))
                tres = predictive_loglik_samples(chains[0], train, test,
                                                 checkpoints=sorted(set(chains[0].times)), by="time")
                out.text(f"timing/{m}_fold{f}_series.csv",
                         series_text(["seconds", "ell"], [(float(c), float(v)) for c, v in tres.series]))
            per_method[m].append(ell)
            rows.append((f, m, ell))
    out.text("predictive.csv", series_text(["fold", "method", "ell"], rows))
    summary = {m: {"mean": float(np.mean(v)), "std": float(np.std(v)), "per_fold": v} for m, v in per_method.items()}
    out.json("summary.json", summary)
    return summary


def cmd_priors(args, out: Outputs) -> dict:
    dags, priors, kl = prior_report(args.d)
    names = list(priors)
    rows = [[Dag(args.d, [int(x) for x in r], check=False).encode()] + [float(priors[n][k]) for n in names]
            for k, r in enumerate(dags)]
    out.text("prior_masses.csv", series_text(["dag"] + names, rows))
    out.json("kl_to_uniform.json", kl)
    return {"d": args.d, "n_dags": len(dags), "kl_to_uniform": kl}


# -- argument parsing -----------------------------------------------------

def _add_common(p):
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="matrix output format")


def _add_data(p, required=True):
    p.add_argument("--data", required=required, help="CSV of integer-coded records")
    p.add_argument("--interventions", help="0/1 CSV flagging intervened cells")
    p.add_argument("--max-indegree", type=int, default=None)


def _add_sampler(p):
    p.add_argument("--kernel", choices=("local", "global", "hybrid", "gibbs", "order"), default=None)
    p.add_argument("--beta", type=float, default=0.1, help="local-move probability of the hybrid kernel")
    p.add_argument("--trunc-c", type=float, default=1e-4)
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--target-prior", choices=("uniform", "flat", "koivisto"), default="uniform")
    p.add_argument("--proposal-prior", choices=("flat", "koivisto"), default="flat")
    p.add_argument("--max-global-retries", type=int, default=1000)
    p.add_argument("--dags-per-order", type=int, default=1)
    p.add_argument("--ellis", choices=("sampled", "exact", "none"), default="sampled")
    p.add_argument("--random-init", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="dpmcmc", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"dpmcmc {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="synthetic network and data")
    _add_common(p)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--arity-min", type=int, default=2)
    p.add_argument("--arity-max", type=int, default=4)
    p.add_argument("--strength", type=float, default=0.5, help="Dirichlet concentration of the CPT rows")
    p.add_argument("--density", type=float, default=1.5, help="expected in-degree")
    p.add_argument("--max-indegree", type=int, default=None)
    p.add_argument("--intervene", action="append", metavar="NODE:STATE:START:STOP")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("score", help="build the family score table")
    _add_common(p)
    _add_data(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("exact", help="exact marginals, evidence, MAP DAG and Chow-Liu tree")
    _add_common(p)
    _add_data(p, required=False)
    p.add_argument("--scores", help="precomputed score table (instead of --data)")
    p.add_argument("--prior", choices=("flat", "koivisto"), default="flat")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--dp", action="store_true", help="subset dynamic programming (default)")
    g.add_argument("--brute-force", action="store_true", help="enumerate every DAG (d <= 5)")
    p.add_argument("--uniform-target", action="store_true", help="brute force under a uniform graph prior")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("sample", help="run MCMC chains")
    _add_common(p)
    _add_data(p, required=False)
    p.add_argument("--scores")
    _add_sampler(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("features", help="posterior feature matrix from sample files")
    _add_common(p)
    p.add_argument("--samples", nargs="+", required=True)
    p.add_argument("--kind", default="directed-edge", choices=[k.value for k in FeatureKind])
    p.add_argument("--discard", type=float, default=0.0, help="fraction of each chain to drop as burn-in")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("convergence", help="SAD against the exact edge marginals")
    _add_common(p)
    _add_data(p)
    _add_sampler(p)
    p.add_argument("--kernels", nargs="+", default=["local", "global", "hybrid"],
                   help="kernel names; hybrid:BETA sets a specific mixture")
    p.add_argument("--points", type=int, default=50, help="checkpoints per chain")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("structure-eval", help="ROC/AUC against a generating network")
    _add_common(p)
    _add_data(p, required=False)
    p.add_argument("--scores")
    p.add_argument("--truth", required=True, help="network.json written by gen")
    p.add_argument("--samples", nargs="*", default=[])
    p.add_argument("--dp", action="store_true")
    p.add_argument("--prior", choices=("flat", "koivisto"), default="flat")
    p.add_argument("--kinds", nargs="+", default=["undirected-edge", "directed-edge", "directed-path"],
                   choices=[k.value for k in FeatureKind])
    p.set_defaults(func=cmd_structure_eval)

    p = sub.add_parser("predict", help="test-set log-likelihood of BMA and plug-in models")
    _add_common(p)
    _add_data(p)
    _add_sampler(p)
    p.add_argument("--test", help="held-out CSV (otherwise cross-validate)")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--prior", choices=("flat", "koivisto"), default="flat")
    p.add_argument("--methods", nargs="+", default=["bma", "map", "chow-liu", "factored"],
                   choices=["bma", "local", "global", "gibbs", "order", "dp", "map", "chow-liu", "factored"])
    p.add_argument("--points", type=int, default=50)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("priors", help="induced structure priors over all DAGs and their KL to uniform")
    _add_common(p)
    p.add_argument("--d", type=int, default=3)
    p.set_defaults(func=cmd_priors)
    return ap


def _validate(args) -> None:
    for name in ("chains", "jobs", "points", "steps", "thin"):
        v = getattr(args, name, None)
        if v is not None and v < (0 if name == "steps" else 1):
            raise UsageError(f"--{name.replace('_', '-')} must be positive")
    if args.command == "gen" and (args.d < 1 or args.n < 0):
        raise UsageError("--d must be >= 1 and --n >= 0")
    if args.command in ("exact", "sample", "structure-eval") and getattr(args, "data", None) is None \
            and getattr(args, "scores", None) is None and not (args.command == "structure-eval" and not args.dp):
        raise UsageError(f"{args.command} needs --data or --scores")
    for name in ("data", "interventions", "scores", "truth", "test"):
        v = getattr(args, name, None)
        if v and not os.path.isfile(v):
            raise InputError(f"no such file: {v}")
    for v in getattr(args, "samples", None) or ():
        if not os.path.isfile(v):
            raise InputError(f"no such file: {v}")


def _manifest(args) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "jobs")}
    inputs = {}
    for name in ("data", "interventions", "scores", "truth", "test"):
        v = getattr(args, name, None)
        if v:
            inputs[name] = {"path": str(v), "sha256": _digest(v)}
    for k, v in enumerate(getattr(args, "samples", None) or ()):
        inputs[f"samples[{k}]"] = {"path": str(v), "sha256": _digest(v)}
    return {"tool": "dpmcmc", "version": __version__, "command": args.command, "seed": args.seed,
            "config": cfg, "inputs": inputs}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _validate(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out = None
    try:
        out = Outputs(args.out)
        args.func(args, out)
        out.json("manifest.json", _manifest(args))
        out.commit()
        return EXIT_OK
    except UsageError as exc:
        code, msg = EXIT_USAGE, str(exc)
    except ResourceError as exc:
        code, msg = EXIT_RESOURCE, str(exc)
    except (DpmcmcError, OSError, ValueError, KeyError) as exc:
        code, msg = EXIT_INPUT, str(exc) or type(exc).__name__
    if out is not None:
        out.discard()
    print("error: " + msg.replace("\n", " "), file=sys.stderr)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
