"""Random-scan column sweeps over Omega and the chain driver.

Each sweep visits every column once in a fresh random order. A visit updates
the column's edge pattern with an inner kernel (``gibbs``, ``bdmh``, ``lit``,
``gimh`` or the enumerating ``exact``), draws the new column of Omega and
updates ``Sigma`` by the block-inverse identities. ``Sigma`` is recomputed
from scratch every ``refresh_every`` sweeps.
"""
from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _backend, kernels, linalg
from .conditional import ColumnContext, ConditionalTarget, sample_column
from .core import (
    ColumnModel,
    ConfigError,
    Dataset,
    Hyperparams,
    NumericalError,
    PrecisionState,
    SsggmError,
    make_rng,
    others,
    validate_hyperparams,
)
from .lr_proposal import LrColumnContext, LrTarget, build_all_tables

ALGORITHMS = ("gibbs", "bdmh", "lit", "gimh", "exact")


@dataclass(frozen=True)
class SamplerConfig:
    algorithm: str = "gibbs"
    iterations: int = 15000
    warmup: int = 5000
    M: Optional[int] = None
    thin: int = 1
    refresh_every: int = 100
    seed: int = 0
    record_z: bool = False
    record_omega_edges: Optional[tuple] = None
    backend: Optional[str] = None
    table_T: int = 5000
    table_warmup: int = 1000
    table_sampler: str = "gibbs"
    lit_swap_cap: Optional[int] = None
    max_sample_values: int = 10_000_000

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError("algorithm", f"must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.iterations < 0 or not 0 <= self.warmup <= self.iterations:
            raise ConfigError("warmup", f"need 0 <= warmup <= iterations, got {self.warmup} and {self.iterations}")
        if self.M is not None and self.M < 1:
            raise ConfigError("M", f"must be >= 1, got {self.M}")
        if self.thin < 1:
            raise ConfigError("thin", f"must be >= 1, got {self.thin}")
        if self.refresh_every < 1:
            raise ConfigError("refresh_every", f"must be >= 1, got {self.refresh_every}")
        if self.lit_swap_cap is not None and self.lit_swap_cap < 1:
            raise ConfigError("lit_swap_cap", f"must be >= 1, got {self.lit_swap_cap}")
        if self.table_sampler not in ("gibbs", "bdmh"):
            raise ConfigError("table_sampler", f"must be gibbs or bdmh, got {self.table_sampler!r}")
        if not self.table_T > self.table_warmup >= 0:
            raise ConfigError("table_T", "need table_T > table_warmup >= 0")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def resolve_M(cfg: SamplerConfig, hyper: Hyperparams) -> int:
    """Inner moves per column visit: explicit value, else 1 for LIT and ``hyper.M`` otherwise."""
    if cfg.M is not None:
        return cfg.M
    if cfg.algorithm == "lit":
        return 1
    return hyper.M


def draw_u2(ctx: ColumnContext, rng) -> float:
    return rng.standard_gamma(ctx.n / 2.0 + 1.0) / ((ctx.s_jj + ctx.hyper.lam) / 2.0)


class PyEngine:
    """Reference implementation of one sweep with the same interface as the compiled engine."""

    def __init__(self, data: Dataset, hyper: Hyperparams, algorithm: str, M: int, state: PrecisionState, rng,
                 tables=None, swap_cap: Optional[int] = None):
        p = data.p
        self.data, self.hyper, self.alg, self.M = data, hyper, algorithm, M
        self.state, self.rng, self.tables, self.swap_cap = state, rng, tables, swap_cap
        self.R_last = np.zeros((p, p))
        self.omega_sum_arr = np.zeros((p, p))
        self.rb_sum_arr = np.zeros((p, p))
        self.z_sum_arr = np.zeros((p, p))
        self.stats = kernels.MoveStats()
        self.lr_targets = [None] * p

    @property
    def proposed(self):
        return self.stats.proposed

    @property
    def accepted(self):
        return self.stats.accepted

    def lr_target(self, j):
        if self.lr_targets[j] is None:
            self.lr_targets[j] = LrTarget(LrColumnContext.from_data(self.data, self.hyper, j))
        return self.lr_targets[j]

    def context(self, j) -> ColumnContext:
        return ColumnContext.from_state(self.state, self.data.S, self.data.n, self.hyper, j)

    def kernel(self, target, z, j, rb=None):
        a, h, rng = self.alg, self.hyper, self.rng
        if a == "gibbs":
            return kernels.inner_gibbs(target, z, rng, rb)
        if a == "bdmh":
            return kernels.inner_bdmh(target, z, self.M, h, rng, self.stats)
        if a == "lit":
            return kernels.inner_lit(target, z, self.M, h, rng, self.stats, self.swap_cap)
        if a == "gimh":
            return kernels.inner_gimh(target, self.lr_target(j), self.tables[j], z, self.M, h.upsilon, rng, self.stats)
        return kernels.inner_exact(target, z, rng)

    def visit(self, j, record):
        st = self.state
        rest = others(st.p, j)
        ctx = self.context(j)
        target = ConditionalTarget(ctx)
        z = ColumnModel.from_bits(st.Z[rest, j])
        u2 = draw_u2(ctx, self.rng) if self.alg == "gimh" else None
        rb = np.zeros(ctx.dim) if record else None
        z = self.kernel(target, z, j, rb)
        _, _, col, diag = sample_column(ctx, z, self.rng, u2)
        st.sigma[...] = linalg.inverse_after_column_replace(ctx.ainv, col, diag, j)
        st.omega[rest, j] = col
        st.omega[j, rest] = col
        st.omega[j, j] = diag
        bits = z.bits.astype(np.uint8)
        st.Z[rest, j] = bits
        st.Z[j, rest] = bits
        if record:
            self.R_last[rest, j] = rb

    def sweep(self, accumulate: bool):
        record = self.alg == "gibbs"
        for j in kernels.shuffled(self.state.p, self.rng):
            try:
                self.visit(int(j), record)
            except Exception as exc:
                exc.column = int(j)
                raise
        if accumulate:
            self.omega_sum_arr += self.state.omega
            self.z_sum_arr += self.state.Z
            if record:
                self.rb_sum_arr += self.R_last

    def symmetrize(self):
        pass

    def fixed_counts(self, j, updates, warmup):
        ctx = self.context(j)
        target = ConditionalTarget(ctx)
        z = ColumnModel.from_bits(self.state.Z[others(self.state.p, j), j])
        counts = np.zeros(1 << ctx.dim, dtype=np.int64)
        for t in range(warmup + updates):
            z = self.kernel(target, z, j)
            if t >= warmup:
                counts[z.key] += 1
        return counts


def make_engine(backend: str, data, hyper, algorithm, M, state, rng, tables=None, swap_cap=None):
    if backend == "compiled":
        return _backend.compiled.Engine(data.S, data.n, hyper, algorithm, M, state.omega, state.sigma, state.Z,
                                        rng, tables)
    return PyEngine(data, hyper, algorithm, M, state, rng, tables, swap_cap)


@dataclass
class ChainOutput:
    """Post-warmup summaries of one chain.

    ``incl_prob`` is the Rao-Blackwellised estimate for Gibbs chains and the
    indicator average otherwise. ``samples`` holds thinned upper-triangle
    draws of Omega (diagonal included) in :func:`numpy.triu_indices` order.
    """

    p: int
    algorithm: str
    n_retained: int
    mean_omega: Optional[np.ndarray]
    incl_prob: Optional[np.ndarray]
    incl_indicator: Optional[np.ndarray]
    incl_rb: Optional[np.ndarray]
    samples: np.ndarray
    sample_thin: int
    ejd: float
    accept_rate: float
    proposed: int
    accepted: int
    sweep_times: np.ndarray
    max_drift: float
    final_omega: np.ndarray
    final_Z: np.ndarray
    z_trace: Optional[np.ndarray] = None
    rb_trace: Optional[np.ndarray] = None
    edge_trace: Optional[np.ndarray] = None
    edges: Optional[tuple] = None
    config: dict = field(default_factory=dict)
    hyper: dict = field(default_factory=dict)
    backend: str = ""

    @property
    def estimator(self) -> str:
        return "RB" if self.incl_rb is not None else "indicator"

    @property
    def time_total(self) -> float:
        return float(self.sweep_times.sum())

    @property
    def time_post_warmup(self) -> float:
        return float(self.sweep_times[len(self.sweep_times) - self.n_retained:].sum())

    def summary(self, level: float = 0.95):
        from .inference import summarize

        return summarize(self, level)

    def to_json_dict(self) -> dict:
        n_sw = len(self.sweep_times)
        return {
            "p": self.p,
            "algorithm": self.algorithm,
            "backend": self.backend,
            "n_retained": self.n_retained,
            "estimator": self.estimator,
            "ejd": self.ejd,
            "accept_rate": self.accept_rate,
            "proposed": self.proposed,
            "accepted": self.accepted,
            "time_total": self.time_total,
            "time_post_warmup": self.time_post_warmup,
            "time_per_sweep": self.time_total / n_sw if n_sw else None,
            "max_drift": self.max_drift,
            "sample_thin": self.sample_thin,
            "config": self.config,
            "hyper": self.hyper,
        }


class Chain:
    """A resumable chain: ``advance(n)`` runs ``n`` more sweeps, ``output()`` summarises."""

    def __init__(self, data: Dataset, hyper: Hyperparams, cfg: SamplerConfig, init=None, tables=None):
        p = data.p
        self.data, self.cfg = data, cfg
        self.hyper = hyper = validate_hyperparams(hyper, p)
        if cfg.algorithm == "exact" and p > 20:
            raise ConfigError("algorithm", "the exact kernel enumerates 2^(p-1) models and needs p <= 20")
        self.backend = "python" if cfg.lit_swap_cap is not None else _backend.resolve(cfg.backend)
        if init is None or (isinstance(init, str) and init == "identity"):
            init = np.eye(p)
        self.state = PrecisionState.from_omega(init, hyper.dbar)
        self.M = resolve_M(cfg, hyper)
        if cfg.algorithm == "gimh" and tables is None:
            seq = np.random.SeedSequence(cfg.seed, spawn_key=(0x7AB1E,))
            tables = build_all_tables(data, hyper, seq, cfg.table_T, cfg.table_warmup, cfg.table_sampler,
                                      self.backend)
        self.tables = tables
        self.rng = make_rng(cfg.seed)
        self.engine = make_engine(self.backend, data, hyper, cfg.algorithm, self.M, self.state, self.rng, tables,
                                  cfg.lit_swap_cap)
        self.t = 0
        n_keep = cfg.iterations - cfg.warmup
        self.iu = np.triu_indices(p)
        self.iu_off = np.triu_indices(p, 1)
        per = self.iu[0].size
        self.thin = max(cfg.thin, math.ceil(n_keep * per / cfg.max_sample_values)) if n_keep else cfg.thin
        self._samples = np.empty((-(-n_keep // self.thin), per))
        self._n_samples = 0
        self.sweep_times = np.zeros(cfg.iterations)
        self.max_drift = 0.0
        self._jumps = 0.0
        self._n_jumps = 0
        self._prev_z = self.state.Z[self.iu_off].copy()
        record = cfg.record_z
        self._z_trace = np.zeros((n_keep, self.iu_off[0].size), dtype=np.uint8) if record else None
        self._rb_trace = np.zeros((n_keep, self.iu_off[0].size)) if record and cfg.algorithm == "gibbs" else None
        self.edges = tuple(tuple(e) for e in cfg.record_omega_edges) if cfg.record_omega_edges else None
        self._edge_trace = np.zeros((n_keep, len(self.edges))) if self.edges else None

    @property
    def done(self) -> bool:
        return self.t >= self.cfg.iterations

    def advance(self, n_sweeps: Optional[int] = None) -> int:
        """Run up to ``n_sweeps`` sweeps (all remaining by default); returns how many ran."""
        cfg = self.cfg
        todo = cfg.iterations - self.t if n_sweeps is None else min(n_sweeps, cfg.iterations - self.t)
        Z = self.state.Z
        for _ in range(todo):
            t = self.t
            post = t >= cfg.warmup
            start = time.perf_counter()
            try:
                self.engine.sweep(post)
            except (SsggmError, np.linalg.LinAlgError, ArithmeticError) as exc:
                col = getattr(exc, "column", "?")
                raise NumericalError(f"sampler failed at iteration {t}, column {col}: {exc}") from exc
            self.sweep_times[t] = time.perf_counter() - start
            self.t += 1
            if post:
                i = t - cfg.warmup
                zu = Z[self.iu_off]
                self._jumps += np.count_nonzero(zu != self._prev_z)
                self._n_jumps += 1
                self._prev_z = zu
                if i % self.thin == 0:
                    self._samples[self._n_samples] = self.state.omega[self.iu]
                    self._n_samples += 1
                if self._z_trace is not None:
                    self._z_trace[i] = zu
                if self._rb_trace is not None:
                    R = self.engine.R_last
                    self._rb_trace[i] = 0.5 * (R + R.T)[self.iu_off]
                if self._edge_trace is not None:
                    self._edge_trace[i] = [self.state.omega[a, b] for a, b in self.edges]
            elif t + 1 == cfg.warmup:
                self._prev_z = Z[self.iu_off].copy()
            if self.t % cfg.refresh_every == 0:
                self.engine.symmetrize()
                self.max_drift = max(self.max_drift, self.state.refresh())
        self.engine.symmetrize()
        return todo

    @property
    def ejd(self) -> float:
        slots = self.data.p * (self.data.p - 1) / 2
        return self._jumps / (self._n_jumps * slots) if self._n_jumps else float("nan")

    def estimates(self) -> tuple[np.ndarray, np.ndarray]:
        """Running posterior mean of Omega and inclusion probabilities (no sample copies)."""
        n = self.t - self.cfg.warmup
        if n <= 0:
            raise ConfigError("iterations", "no post-warmup sweeps have run yet")
        eng = self.engine
        if self.cfg.algorithm == "gibbs":
            r = eng.rb_sum_arr / n
            incl = 0.5 * (r + r.T)
        else:
            incl = eng.z_sum_arr / n
        np.fill_diagonal(incl, 1.0)
        return eng.omega_sum_arr / n, incl

    def output(self) -> ChainOutput:
        cfg, p = self.cfg, self.data.p
        n = max(0, self.t - cfg.warmup)
        eng = self.engine
        mean = ind = rb = None
        if n:
            mean = eng.omega_sum_arr / n
            ind = eng.z_sum_arr / n
            np.fill_diagonal(ind, 1.0)
            if cfg.algorithm == "gibbs":
                r = eng.rb_sum_arr / n
                rb = 0.5 * (r + r.T)
                np.fill_diagonal(rb, 1.0)
        return ChainOutput(
            p=p,
            algorithm=cfg.algorithm,
            n_retained=n,
            mean_omega=mean,
            incl_prob=rb if rb is not None else ind,
            incl_indicator=ind,
            incl_rb=rb,
            samples=self._samples[: self._n_samples].copy(),
            sample_thin=self.thin,
            ejd=self.ejd,
            accept_rate=eng.accepted / eng.proposed if eng.proposed else float("nan"),
            proposed=int(eng.proposed),
            accepted=int(eng.accepted),
            sweep_times=self.sweep_times[: self.t].copy(),
            max_drift=self.max_drift,
            final_omega=self.state.omega.copy(),
            final_Z=self.state.Z.copy(),
            z_trace=None if self._z_trace is None else self._z_trace[:n].copy(),
            rb_trace=None if self._rb_trace is None else self._rb_trace[:n].copy(),
            edge_trace=None if self._edge_trace is None else self._edge_trace[:n].copy(),
            edges=self.edges,
            config=cfg.to_dict(),
            hyper=self.hyper.to_dict(),
            backend=self.backend,
        )


def run_chain(data: Dataset, hyper: Hyperparams, cfg: SamplerConfig, init=None, tables=None) -> ChainOutput:
    """Run ``cfg.iterations`` sweeps (the first ``cfg.warmup`` discarded) and summarise."""
    chain = Chain(data, hyper, cfg, init, tables)
    chain.advance()
    return chain.output()


def fixed_context_counts(data: Dataset, hyper: Hyperparams, omega: np.ndarray, j: int, algorithm: str,
                         updates: int, warmup: int = 0, M: Optional[int] = None, seed=0, tables=None,
                         backend: Optional[str] = None) -> np.ndarray:
    """Visit counts (indexed by model key) of an inner kernel iterated at a fixed column context.

    ``omega`` supplies the rest of the precision matrix; its column ``j``
    supplies the starting model. One update is one kernel application
    (a full scan for Gibbs, ``M`` moves otherwise).
    """
    hyper = validate_hyperparams(hyper, data.p)
    if data.p > 21:
        raise ConfigError("p", "fixed-context counts enumerate models and need p <= 21")
    cfg = SamplerConfig(algorithm=algorithm, iterations=0, warmup=0, M=M, backend=backend)
    state = PrecisionState.from_omega(omega, hyper.dbar)
    eng = make_engine(_backend.resolve(backend), data, hyper, algorithm, resolve_M(cfg, hyper), state,
                      make_rng(seed), tables)
    return eng.fixed_counts(j, updates, warmup)
