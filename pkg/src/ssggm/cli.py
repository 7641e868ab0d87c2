"""Command-line interface: ``ssggm {generate,fit,summarize,oracle,bench,backend-bench}``.

Exit status is 0 on success, 1 on a domain error (bad configuration, data,
numerical failure or IO) and 2 on a usage error. Every subcommand accepts
``--config FILE``, a JSON object whose keys are the subcommand's option
names (dashes or underscores); explicit flags override it.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, _backend
from ._io import jsonable, write_csv_atomic, write_json_atomic, write_text_atomic
from .core import (
    ConfigError,
    Dataset,
    Hyperparams,
    SsggmError,
    load_csv,
    spawn_rngs,
    validate_hyperparams,
)

# keys never echoed: they locate outputs and do not affect them
_NOT_ECHOED = ("config", "out_dir", "func", "command")


@dataclass
class RunManifest:
    """Provenance of one command run.

    ``id`` hashes everything except ``timings``, so equal ids mean equal
    inputs and therefore bit-identical outputs.
    """

    command: str
    config: dict
    seed: Optional[int]
    dataset_hash: Optional[str] = None
    hyper: Optional[dict] = None
    version: str = __version__
    timings: dict = field(default_factory=dict)

    @property
    def id(self) -> str:
        body = {k: v for k, v in dataclasses.asdict(self).items() if k != "timings"}
        text = json.dumps(jsonable(body), sort_keys=True, allow_nan=False)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        return {"id": self.id, **dataclasses.asdict(self)}


def _echo(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED}


def _read_data(path, standardize: str) -> Dataset:
    path = Path(path)
    if standardize == "auto":
        # generated data ships with its truth and stays on the scale of omega0
        standardize = "off" if (path.parent / "truth.json").exists() else "on"
    return load_csv(path, standardize_data=standardize == "on")


def _read_matrix(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2, comments="#")


def _hyper_from_args(args, p: int, rng) -> tuple[Hyperparams, dict]:
    """Explicit prior values, elicited fill-ins for the rest; returns ``(hyper, elicited)``."""
    from .priors import ElicitationConfig, elicit_g1, elicit_lambda, elicit_theta

    explicit = {k: getattr(args, k) for k in ("theta", "g1", "lam")}
    missing = [k for k, v in explicit.items() if v is None]
    if missing and not args.elicit:
        raise ConfigError(missing[0], "not given; pass it explicitly or use --elicit")
    cfg = ElicitationConfig(K=args.elicit_K, mc_samples=args.elicit_mc)
    elicited = {}
    lam = explicit["lam"]
    if lam is None:
        lam = elicited["lam"] = elicit_lambda(cfg.diag_quantile)
    theta = explicit["theta"]
    if theta is None:
        theta = elicited["theta"] = elicit_theta(cfg.K, p)
    g1 = explicit["g1"]
    if g1 is None:
        g1 = elicited["g1"] = elicit_g1(lam, theta, p, cfg, rng)
    M = getattr(args, "M", "auto")
    hyper = Hyperparams(theta=theta, g1=g1, lam=lam, dbar=args.dbar, p_birth=args.p_birth,
                        p_death=args.p_death, upsilon=args.upsilon, tau=args.tau,
                        M=None if M in (None, "auto") else int(M))
    return validate_hyperparams(hyper, p), elicited


def _m_value(text: str):
    if text == "auto":
        return text
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'auto', got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [x for x in text.split(",") if x]


def _add_prior_flags(sp):
    g = sp.add_argument_group("prior")
    g.add_argument("--theta", type=float, help="prior edge probability")
    g.add_argument("--g1", type=float, help="slab standard deviation")
    g.add_argument("--lam", type=float, help="rate of the diagonal prior")
    g.add_argument("--dbar", type=int, help="maximum node degree (default p-1)")
    g.add_argument("--p-birth", type=float, default=0.75)
    g.add_argument("--p-death", type=float, default=0.125)
    g.add_argument("--upsilon", type=float, help="proposal tempering for gimh (default 0.75)")
    g.add_argument("--tau", type=float, help="ridge of the regression proposal (default g1^-2)")
    g.add_argument("--elicit", action=argparse.BooleanOptionalAction, default=True,
                   help="elicit theta, g1 and lam when not given")
    g.add_argument("--elicit-K", type=float, default=2.0, help="prior expected degree for theta")
    g.add_argument("--elicit-mc", type=int, default=2000, help="Monte Carlo draws for g1")


def cmd_generate(args) -> int:
    from .synth import Scenario, gen_data, gen_truth

    t0 = time.perf_counter()
    sc = Scenario(args.scenario, args.p, args.q, args.block)
    if args.n < 1:
        raise ConfigError("n", f"must be >= 1, got {args.n}")
    r_truth, r_data = spawn_rngs(args.seed, 2)
    truth = gen_truth(sc, r_truth)
    data = gen_data(truth.Omega0, args.n, r_data)
    man = RunManifest("generate", _echo(args), args.seed, data.digest())
    out = Path(args.out_dir)
    write_csv_atomic(out / "Y.csv", data.Y, manifest=man.id)
    truth.save(out, man.to_dict())
    cond = truth.eig_max / truth.eig_min
    print(f"p={truth.p} n={data.n} edges={len(truth.edges())} max_degree={truth.max_degree} "
          f"eig_min={truth.eig_min:.4g} eig_max={truth.eig_max:.4g} condition={cond:.4g} "
          f"attempts={truth.attempts} ({time.perf_counter() - t0:.2f}s)")
    return 0


def cmd_fit(args) -> int:
    from .inference import summarize
    from .samplers import SamplerConfig, run_chain

    t0 = time.perf_counter()
    data = _read_data(args.data, args.standardize)
    r_prior = spawn_rngs(np.random.SeedSequence(args.seed, spawn_key=(0xE1C,)), 1)[0]
    hyper, elicited = _hyper_from_args(args, data.p, r_prior)
    t_elicit = time.perf_counter() - t0
    init = "identity"
    if args.init != "identity":
        init = _read_matrix(args.init)
        if init.shape != (data.p, data.p):
            raise ConfigError("init", f"expected a {data.p}x{data.p} matrix, got {init.shape}")
    cfg = SamplerConfig(algorithm=args.algorithm, iterations=args.iters, warmup=args.warmup,
                        M=None if args.M == "auto" else args.M, thin=args.thin, refresh_every=args.refresh_every,
                        seed=args.seed, record_z=args.record_z, backend=args.backend, table_T=args.table_T,
                        table_warmup=args.table_warmup, table_sampler=args.table_sampler,
                        lit_swap_cap=args.lit_swap_cap)
    out = run_chain(data, hyper, cfg, init)
    summ = summarize(out, args.ci_level)
    man = RunManifest("fit", _echo(args), args.seed, data.digest(), jsonable(hyper.to_dict()),
                      timings={"elicitation": t_elicit, "sampling": out.time_total,
                               "sampling_post_warmup": out.time_post_warmup,
                               "per_sweep": out.time_total / max(1, len(out.sweep_times))})
    mid = man.id
    d = Path(args.out_dir)
    write_csv_atomic(d / "incl_prob.csv", summ.incl_prob, manifest=mid)
    write_csv_atomic(d / "mean_omega.csv", summ.mean_omega, manifest=mid)
    if summ.ci_lower is not None:
        write_csv_atomic(d / "ci_lower.csv", summ.ci_lower, manifest=mid)
        write_csv_atomic(d / "ci_upper.csv", summ.ci_upper, manifest=mid)
    if out.samples.shape[0]:
        write_csv_atomic(d / "samples.csv", out.samples, manifest=mid,
                         header=f"upper-triangle draws, row-major, thin={out.sample_thin}")
    if out.z_trace is not None:
        write_csv_atomic(d / "z_trace.csv", out.z_trace, fmt="%d", manifest=mid)
    if out.rb_trace is not None:
        write_csv_atomic(d / "rb_trace.csv", out.rb_trace, manifest=mid)
    info = out.to_json_dict()
    info.update({"manifest": man.to_dict(), "elicited": elicited, "ci_level": args.ci_level,
                 "has_intervals": summ.ci_lower is not None, "final_omega": out.final_omega})
    write_json_atomic(d / "summary.json", info)
    acc = "" if math.isnan(out.accept_rate) else f" accept={out.accept_rate:.3f}"
    print(f"{args.algorithm}[{out.backend}] p={data.p} n={data.n} retained={out.n_retained}{acc} "
          f"ejd={out.ejd:.4g} {1000 * info['time_per_sweep']:.3f} ms/sweep manifest={mid}")
    return 0


@dataclass
class _Loaded:
    path: Path
    info: dict
    incl_prob: np.ndarray
    mean_omega: np.ndarray
    ci_lower: Optional[np.ndarray]
    ci_upper: Optional[np.ndarray]
    samples: Optional[np.ndarray]


def _load_summary(path) -> _Loaded:
    path = Path(path)
    d = path if path.is_dir() else path.parent
    info = json.loads((d / "summary.json").read_text())
    opt = {name: _read_matrix(d / f"{name}.csv") if (d / f"{name}.csv").exists() else None
           for name in ("ci_lower", "ci_upper", "samples")}
    return _Loaded(d, info, _read_matrix(d / "incl_prob.csv"), _read_matrix(d / "mean_omega.csv"), **opt)


def _to_summary(ld: _Loaded, level: float):
    from .inference import MIN_CI_SAMPLES, PosteriorSummary, upper_to_full, credible_intervals

    lo, hi = ld.ci_lower, ld.ci_upper
    fitted = ld.info.get("ci_level")
    if fitted is None or abs(fitted - level) > 1e-12:
        lo = hi = None
        if ld.samples is not None and ld.samples.shape[0] >= MIN_CI_SAMPLES:
            l, h = credible_intervals(ld.samples, level)
            p = ld.incl_prob.shape[0]
            lo, hi = upper_to_full(l, p), upper_to_full(h, p)
    return PosteriorSummary(ld.mean_omega, ld.incl_prob, lo, hi, level, int(ld.info.get("n_retained", 0)),
                            ld.info.get("estimator", ""))


def cmd_summarize(args) -> int:
    from .inference import bfdr_select, chain_diff, evaluate
    from .synth import GroundTruth

    if not 1 <= len(args.summaries) <= 2:
        raise ConfigError("summaries", "give one summary, or two to compare chains")
    loaded = [_load_summary(s) for s in args.summaries]
    summaries = [_to_summary(ld, args.ci_level) for ld in loaded]
    first = summaries[0]
    sel = bfdr_select(first.incl_prob, args.alpha)
    report = {"alpha": args.alpha, "ci_level": args.ci_level, "n_selected": len(sel),
              "sources": [ld.info.get("manifest", {}).get("id") for ld in loaded]}
    if len(summaries) == 2:
        d_omega, d_incl = chain_diff(summaries[0], summaries[1])
        report["chain_diff"] = {"mean_omega": d_omega, "incl_prob": d_incl}
    if args.truth:
        truth = GroundTruth.load(Path(args.truth) if Path(args.truth).is_dir() else Path(args.truth).parent)
        report["eval"] = evaluate(first, truth, args.alpha).to_dict()
    man = RunManifest("summarize", _echo(args), None, None)
    report["manifest"] = man.to_dict()
    d = Path(args.out_dir)
    rows = np.array([(i, j, first.incl_prob[i, j]) for i, j in sel], dtype=float).reshape(-1, 3)
    lines = [f"# manifest={man.id}", "i,j,incl_prob"] + [f"{int(i)},{int(j)},{v:.17g}" for i, j, v in rows]
    write_text_atomic(d / "selection.csv", "\n".join(lines) + "\n")
    write_json_atomic(d / "report.json", report)
    msg = f"selected {len(sel)} edges at alpha={args.alpha}"
    if "eval" in report:
        e = report["eval"]
        msg += f"; fdr={e['fdr']:.3f} power={e['power']:.3f} coverage={e['coverage_nonzeros']:.3f}"
    if "chain_diff" in report:
        c = report["chain_diff"]
        msg += f"; diff omega={c['mean_omega']:.4g} incl={c['incl_prob']:.4g}"
    print(msg)
    return 0


def cmd_oracle(args) -> int:
    from .conditional import ColumnContext, enumerate_posterior
    from .core import ColumnModel, PrecisionState
    from .lr_proposal import LrColumnContext, ProposalTable
    from .samplers import fixed_context_counts

    data = _read_data(args.data, args.standardize)
    p = data.p
    if p > args.max_p:
        raise ConfigError("p", f"enumeration is limited to p <= {args.max_p}, got p={p}")
    if not 0 <= args.j < p:
        raise ConfigError("j", f"must lie in [0, {p - 1}], got {args.j}")
    r_prior, _ = spawn_rngs(args.seed, 2)
    hyper, elicited = _hyper_from_args(args, p, r_prior)
    omega = np.eye(p) if args.omega is None else _read_matrix(args.omega)
    if omega.shape != (p, p):
        raise ConfigError("omega", f"expected a {p}x{p} matrix, got {omega.shape}")
    state = PrecisionState.from_omega(omega, hyper.dbar)
    ctx = ColumnContext.from_state(state, data.S, data.n, hyper, args.j)
    probs = enumerate_posterior(ctx)
    dim = p - 1
    result = {"p": p, "j": args.j, "n_models": int(probs.size), "sum": float(probs.sum()), "elicited": elicited}
    emp = None
    if args.kernel:
        tables = None
        if args.kernel == "gimh":
            tables = [None] * p
            tables[args.j] = ProposalTable.full(LrColumnContext.from_data(data, hyper, args.j), hyper.upsilon)
        counts = fixed_context_counts(data, hyper, omega, args.j, args.kernel, args.updates, args.warmup,
                                      args.M, args.seed, tables, args.backend)
        emp = counts / counts.sum()
        result.update({"kernel": args.kernel, "updates": args.updates, "tv": 0.5 * float(np.abs(emp - probs).sum())})
    man = RunManifest("oracle", _echo(args), args.seed, data.digest(), jsonable(hyper.to_dict()))
    result["manifest"] = man.to_dict()
    lines = [f"# manifest={man.id}", "key,model,prob" + (",empirical" if emp is not None else "")]
    for key in range(probs.size):
        z = ColumnModel.from_key(key, dim)
        row = f"{key},{''.join('1' if b else '0' for b in z.bits)},{probs[key]:.17g}"
        if emp is not None:
            row += f",{emp[key]:.17g}"
        lines.append(row)
    d = Path(args.out_dir)
    write_text_atomic(d / "oracle.csv", "\n".join(lines) + "\n")
    write_json_atomic(d / "oracle.json", result)
    top = int(np.argmax(probs))
    msg = f"column {args.j}: {probs.size} models, mode key {top} with probability {probs[top]:.4g}"
    if emp is not None:
        msg += f"; {args.kernel} TV={result['tv']:.4g}"
    print(msg)
    return 0


def cmd_bench(args) -> int:
    from .bench import BENCH_COLUMNS, BenchCell, run_cell, run_pool
    if args.replicates < 1 or args.grid_points < 1:
        raise ConfigError("replicates", "replicates and grid points must be >= 1")
    hyper = None
    if all(getattr(args, k) is not None for k in ("theta", "g1", "lam")):
        hyper = {"theta": args.theta, "g1": args.g1, "lam": args.lam}
    cells = [BenchCell(args.scenario, p, max(2, int(round(args.n_factor * p))), alg, r, args.iters, args.warmup,
                       args.seed, args.grid_points, args.time_budget, args.backend, hyper)
             for p in args.p for alg in args.algorithms for r in range(args.replicates)]
    t0 = time.perf_counter()
    results = run_pool(run_cell, cells)
    rows = [row for rs in results for row in rs]
    man = RunManifest("bench", _echo(args), args.seed, None, timings={"wall": time.perf_counter() - t0})
    lines = [f"# manifest={man.id}", ",".join(BENCH_COLUMNS)]
    for r in rows:
        lines.append(",".join(f"{r[c]:.17g}" if isinstance(r[c], float) else str(r[c]) for c in BENCH_COLUMNS))
    d = Path(args.out_dir)
    write_text_atomic(d / "bench.csv", "\n".join(lines) + "\n")
    write_json_atomic(d / "bench_manifest.json", man.to_dict())
    partial = sum(r["partial"] for r in rows)
    print(f"{len(cells)} cells, {len(rows)} rows" + (f", {partial} partial (time budget hit)" if partial else ""))
    return 0


def cmd_backend_bench(args) -> int:
    from .bench import backend_bench
    rows = backend_bench(args.p, args.n_factor, args.algorithms, args.sweeps, args.seed, args.backends)
    man = RunManifest("backend-bench", _echo(args), args.seed)
    cols = ("p", "n", "algorithm", "backend", "sec_per_sweep", "speedup_vs_python")
    lines = [f"# manifest={man.id}", ",".join(cols)]
    for r in rows:
        lines.append(",".join(f"{r[c]:.6g}" if isinstance(r[c], float) else str(r[c]) for c in cols))
        print(f"p={r['p']:<5} {r['algorithm']:<6} {r['backend']:<9} {1000 * r['sec_per_sweep']:10.3f} ms/sweep "
              f"x{r['speedup_vs_python']:.1f}")
    write_text_atomic(Path(args.out_dir) / "backend_bench.csv", "\n".join(lines) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    from .samplers import ALGORITHMS
    from .synth import KINDS

    parser = argparse.ArgumentParser(prog="ssggm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, out_default="."):
        sp.add_argument("--config", help="JSON file of option defaults")
        sp.add_argument("--out-dir", default=out_default)
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("generate", help="simulate a ground truth and Gaussian data")
    common(sp)
    sp.add_argument("--scenario", choices=KINDS, default="random")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--q", type=float, help="edge probability of the random scenario (default 1/p)")
    sp.add_argument("--block", type=int, default=4, help="clique size of the block scenario")
    sp.set_defaults(func=cmd_generate)

    backends = ["auto", "compiled", "python"]
    sp = sub.add_parser("fit", help="run a sampler on a data file")
    common(sp)
    sp.add_argument("--data", required=True, help="headerless CSV, rows are observations")
    sp.add_argument("--standardize", choices=("auto", "on", "off"), default="auto",
                    help="auto: off when a truth.json sits next to the data")
    sp.add_argument("--algorithm", choices=ALGORITHMS, default="gibbs")
    sp.add_argument("--iters", type=int, default=15000)
    sp.add_argument("--warmup", type=int, default=5000)
    sp.add_argument("--M", type=_m_value, default="auto", help="inner moves per column visit, or 'auto'")
    sp.add_argument("--thin", type=int, default=1)
    sp.add_argument("--refresh-every", type=int, default=100)
    sp.add_argument("--init", default="identity", help="'identity' or a CSV file holding the starting Omega")
    sp.add_argument("--backend", choices=backends, default="auto")
    sp.add_argument("--table-T", type=int, default=5000)
    sp.add_argument("--table-warmup", type=int, default=1000)
    sp.add_argument("--table-sampler", choices=("gibbs", "bdmh"), default="gibbs")
    sp.add_argument("--lit-swap-cap", type=int)
    sp.add_argument("--record-z", action="store_true")
    sp.add_argument("--ci-level", type=float, default=0.95)
    _add_prior_flags(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("summarize", help="BFDR selection, evaluation and chain comparison")
    common(sp)
    sp.add_argument("summaries", nargs="+", help="fit output directories or their summary.json")
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--ci-level", type=float, default=0.95)
    sp.add_argument("--truth", help="directory (or file inside it) holding omega0.csv")
    sp.set_defaults(func=cmd_summarize)

    sp = sub.add_parser("oracle", help="enumerate the conditional model law of one column")
    common(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--standardize", choices=("auto", "on", "off"), default="auto")
    sp.add_argument("--j", type=int, required=True)
    sp.add_argument("--omega", help="CSV file with the rest of Omega (default identity)")
    sp.add_argument("--max-p", type=int, default=12)
    sp.add_argument("--kernel", choices=("gibbs", "bdmh", "lit", "gimh"))
    sp.add_argument("--updates", type=int, default=100_000)
    sp.add_argument("--warmup", type=int, default=1000)
    sp.add_argument("--M", type=int)
    sp.add_argument("--backend", choices=backends, default="auto")
    _add_prior_flags(sp)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("bench", help="timing and two-chain agreement over p")
    common(sp)
    sp.add_argument("--scenario", choices=KINDS, default="tridiagonal")
    sp.add_argument("--p", type=_int_list, default=[50, 100, 200], help="comma-separated dimensions")
    sp.add_argument("--n-factor", type=float, default=2.0, help="n = n_factor * p")
    sp.add_argument("--algorithms", type=_str_list, default=["gibbs"])
    sp.add_argument("--replicates", type=int, default=1)
    sp.add_argument("--iters", type=int, default=15000)
    sp.add_argument("--warmup", type=int, default=5000)
    sp.add_argument("--grid-points", type=int, default=10)
    sp.add_argument("--time-budget", type=float, help="seconds per cell before results are flagged partial")
    sp.add_argument("--backend", choices=backends, default="auto")
    sp.add_argument("--theta", type=float)
    sp.add_argument("--g1", type=float)
    sp.add_argument("--lam", type=float)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("backend-bench", help="per-sweep time of the compiled core against the fallback")
    common(sp)
    sp.add_argument("--p", type=_int_list, default=[10, 25, 50])
    sp.add_argument("--n-factor", type=float, default=2.0)
    sp.add_argument("--algorithms", type=_str_list, default=["gibbs", "bdmh", "lit", "gimh"])
    sp.add_argument("--sweeps", type=int, default=5)
    sp.add_argument("--backends", type=_str_list, default=None)
    sp.set_defaults(func=cmd_backend_bench)
    return parser


def _config_path(argv: list) -> Optional[str]:
    for k, tok in enumerate(argv):
        if tok == "--config" and k + 1 < len(argv):
            return argv[k + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _apply_config(parser: argparse.ArgumentParser, argv: list) -> argparse.Namespace:
    """Parse ``argv`` with defaults taken from the ``--config`` file when one is named."""
    path = _config_path(argv)
    command = next((tok for tok in argv if not tok.startswith("-")), None)
    subs = parser._subparsers._group_actions[0].choices
    if path is None or command not in subs:
        return parser.parse_args(argv)
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config {path}: {exc}")
    if not isinstance(cfg, dict):
        parser.error("the config file must hold a JSON object")
    sub = subs[command]
    known = {a.dest for a in sub._actions}
    defaults = {}
    for k, v in cfg.items():
        dest = k.replace("-", "_")
        if dest not in known or dest in ("config", "help"):
            parser.error(f"unknown config key {k!r} for {command}")
        defaults[dest] = v
    sub.set_defaults(**defaults)
    for action in sub._actions:
        if action.dest in defaults:
            # supplied by the file, so no longer demanded on the command line
            action.required = False
            if action.nargs == "+":
                action.nargs = "*"
    args = parser.parse_args(argv)
    for action in sub._actions:
        if action.nargs == "*" and action.dest in defaults and not getattr(args, action.dest):
            setattr(args, action.dest, defaults[action.dest])
    return args


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = _apply_config(parser, argv)
    try:
        _backend.resolve(getattr(args, "backend", None) if getattr(args, "backend", None) != "auto" else None)
        return args.func(args)
    except (SsggmError, ValueError, OSError, ImportError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
