"""Timing and two-chain agreement harness used by ``ssggm bench`` and ``ssggm backend-bench``."""
from __future__ import annotations

import dataclasses
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _backend
from .core import ConfigError, Dataset, Hyperparams, make_rng
from .samplers import Chain, SamplerConfig
from .synth import Scenario, gen_data, gen_truth

BENCH_COLUMNS = ("p", "n", "algorithm", "replicate", "grid_point", "iteration", "elapsed", "diff_omega",
                 "diff_incl", "ejd", "sec_per_1000", "sec_per_1000_post_warmup", "partial")


def random_dd_pd(p: int, rng, spread: float = 1.0) -> np.ndarray:
    """Dense symmetric matrix with strictly dominant positive diagonal."""
    rng = make_rng(rng)
    A = rng.uniform(-spread, spread, size=(p, p))
    A = np.triu(A, 1)
    A = A + A.T
    np.fill_diagonal(A, np.abs(A).sum(axis=1) + rng.uniform(0.5, 1.5, size=p))
    return A


def thread_count() -> int:
    """Worker count from ``SSGGM_THREADS`` (default 1)."""
    raw = os.environ.get("SSGGM_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError("SSGGM_THREADS", f"expected an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("SSGGM_THREADS", f"must be >= 1, got {n}")
    return n


def run_pool(fn, jobs: list, workers: Optional[int] = None) -> list:
    """Map ``fn`` over ``jobs`` in order; runs inline for a single worker."""
    workers = thread_count() if workers is None else workers
    if workers == 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def _diff(a: tuple, b: tuple) -> tuple[float, float]:
    p = a[0].shape[0]
    iu = np.triu_indices(p, 1)
    return (float(np.abs(a[0][iu] - b[0][iu]).mean()), float(np.abs(a[1][iu] - b[1][iu]).mean()))


def two_chain_trajectory(data: Dataset, hyper: Hyperparams, cfg: SamplerConfig, grid_points: int = 10,
                         budget: Optional[float] = None, second_init=None) -> list[dict]:
    """Run an identity-start and a dispersed-start chain in lockstep.

    The post-warmup span is cut into ``grid_points`` equal iteration blocks;
    after each block one record holds the two-chain differences of the
    running estimates. When ``budget`` seconds elapse the run stops and
    the last record is flagged partial.
    """
    if cfg.iterations <= cfg.warmup:
        raise ConfigError("iterations", "the diff trajectory needs post-warmup iterations")
    if second_init is None:
        second_init = random_dd_pd(data.p, np.random.SeedSequence(cfg.seed, spawn_key=(0x1417,)))
    c1 = Chain(data, hyper, cfg, init="identity")
    c2 = Chain(data, hyper, dataclasses.replace(cfg, seed=cfg.seed + 1), init=second_init)
    post = cfg.iterations - cfg.warmup
    marks = [cfg.warmup + round(post * (g + 1) / grid_points) for g in range(grid_points)]
    rows = []
    start = time.perf_counter()
    partial = False
    for g, mark in enumerate(dict.fromkeys(marks)):
        while c1.t < mark:
            step = min(mark - c1.t, 50)
            c1.advance(step)
            c2.advance(step)
            if budget is not None and time.perf_counter() - start > budget:
                partial = True
                break
        if c1.t <= cfg.warmup:
            break
        d_omega, d_incl = _diff(c1.estimates(), c2.estimates())
        t_all = c1.sweep_times[: c1.t]
        t_post = t_all[cfg.warmup:]
        rows.append({
            "grid_point": g,
            "iteration": c1.t,
            "elapsed": time.perf_counter() - start,
            "diff_omega": d_omega,
            "diff_incl": d_incl,
            "ejd": c1.ejd,
            "sec_per_1000": 1000.0 * float(t_all.mean()),
            "sec_per_1000_post_warmup": 1000.0 * float(t_post.mean()) if t_post.size else float("nan"),
            "partial": int(partial),
        })
        if partial:
            break
    return rows


@dataclass(frozen=True)
class BenchCell:
    scenario: str
    p: int
    n: int
    algorithm: str
    replicate: int
    iterations: int
    warmup: int
    seed: int
    grid_points: int
    budget: Optional[float]
    backend: Optional[str]
    hyper: Optional[dict] = None


def run_cell(cell: BenchCell) -> list[dict]:
    from .priors import elicit_hyperparams

    ss = np.random.SeedSequence(cell.seed, spawn_key=(cell.p, cell.replicate))
    r_truth, r_data, r_prior = (make_rng(s) for s in ss.spawn(3))
    truth = gen_truth(Scenario(cell.scenario, cell.p), r_truth)
    data = gen_data(truth.Omega0, cell.n, r_data)
    hyper = Hyperparams(**cell.hyper) if cell.hyper else elicit_hyperparams(cell.p, rng=r_prior)
    cfg = SamplerConfig(algorithm=cell.algorithm, iterations=cell.iterations, warmup=cell.warmup,
                        seed=int(ss.generate_state(1)[0]), backend=cell.backend)
    rows = two_chain_trajectory(data, hyper, cfg, cell.grid_points, cell.budget)
    head = {"p": cell.p, "n": cell.n, "algorithm": cell.algorithm, "replicate": cell.replicate}
    return [{**head, **r} for r in rows]


def sweep_time(data: Dataset, hyper: Hyperparams, algorithm: str, backend: str, sweeps: int, seed: int = 0,
               warm: int = 2) -> float:
    """Median wall time of one sweep after ``warm`` untimed sweeps."""
    cfg = SamplerConfig(algorithm=algorithm, iterations=warm + sweeps, warmup=warm + sweeps, seed=seed,
                        backend=backend, table_T=400, table_warmup=100)
    chain = Chain(data, hyper, cfg)
    chain.advance()
    return float(np.median(chain.sweep_times[warm:]))


def backend_bench(p_list, n_factor: float = 2.0, algorithms=("gibbs",), sweeps: int = 5, seed: int = 0,
                  backends=None) -> list[dict]:
    """Per-sweep time of every available backend on tri-diagonal data with ``n = n_factor * p``."""
    from .priors import elicit_hyperparams

    backends = backends or _backend.available()
    rows = []
    for p in p_list:
        rng = make_rng(np.random.SeedSequence(seed, spawn_key=(p,)))
        truth = gen_truth(Scenario("tridiagonal", p), rng)
        data = gen_data(truth.Omega0, max(2, int(round(n_factor * p))), rng)
        hyper = elicit_hyperparams(p, rng=rng)
        for alg in algorithms:
            times = {b: sweep_time(data, hyper, alg, b, sweeps, seed) for b in backends}
            for b, t in times.items():
                rows.append({"p": p, "n": data.n, "algorithm": alg, "backend": b, "sec_per_sweep": t,
                             "speedup_vs_python": times.get("python", float("nan")) / t})
    return rows
