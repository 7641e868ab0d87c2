"""Conjugate linear-regression model posterior used as a per-column proposal.

The regression of variable ``j`` on the others has log model weight::

    |z| log theta + (p - 1 - |z|) log(1 - theta) + 0.5 |z| log tau
        - 0.5 log|W_z| - (n/2 + 1) log(lam + S_jj - s_z' W_z^{-1} s_z)

with ``W_z = S[z, z] + tau I`` and ``tau = g1^{-2}`` by default. It depends on
the data only, so each column's table of candidate models is built once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .conditional import (
    ColumnContext,
    ConditionalTarget,
    GramTarget,
    ModelCache,
    all_models,
    log_prior_size,
    normalise_log,
)
from .core import CapabilityError, ColumnModel, ConfigError, Dataset, Hyperparams, NumericalError, others, spawn_rngs
from . import kernels


@dataclass
class LrColumnContext:
    j: int
    S: np.ndarray
    s_col: np.ndarray
    s_jj: float
    hyper: Hyperparams
    n: int

    @property
    def dim(self) -> int:
        return self.s_col.size

    @classmethod
    def from_data(cls, data: Dataset, hyper: Hyperparams, j: int) -> "LrColumnContext":
        rest = others(data.p, j)
        return cls(j, np.ascontiguousarray(data.S[np.ix_(rest, rest)]), np.array(data.S[rest, j]),
                   float(data.S[j, j]), hyper, data.n)


class LrTarget(GramTarget):
    def __init__(self, ctx: LrColumnContext, cache: Optional[ModelCache] = None):
        h = ctx.hyper
        self.ctx = ctx
        self.B = ctx.S
        self.s = ctx.s_col
        self.scale = 1.0
        self.tau = h.tau if h.tau is not None else h.g1 ** -2
        self.ridge = self.tau
        self.dim = ctx.dim
        self.p = self.dim + 1
        super().__init__(cache)
        self.dbar = h.dbar if h.dbar is not None else self.dim

    def weight(self, size, quad, logdet):
        ctx = self.ctx
        resid = ctx.hyper.lam + ctx.s_jj - quad
        if not resid > 0:
            raise NumericalError(f"regression residual {resid} is not positive")
        return (log_prior_size(size, self.dim, ctx.hyper.theta) + 0.5 * size * math.log(self.tau)
                - 0.5 * logdet - (ctx.n / 2.0 + 1.0) * math.log(resid))


def lr_log_weight(ctx: LrColumnContext, z: ColumnModel, cache: Optional[ModelCache] = None, hint=None) -> float:
    """Unnormalised log regression model weight; ``-inf`` above the degree cap."""
    return LrTarget(ctx, cache).logw(z, hint)


@dataclass
class ProposalTable:
    """Distinct candidate models for one column with exact regression weights.

    Sampling probabilities are proportional to ``exp(upsilon * exact_logw)``.
    """

    j: int
    dim: int
    upsilon: float
    models: list = field(default_factory=list)
    exact_logw: np.ndarray = field(default_factory=lambda: np.zeros(0))
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.exact_logw = np.asarray(self.exact_logw, dtype=float)
        self.index = {m.key: i for i, m in enumerate(self.models)}
        if len(self.index) != len(self.models):
            raise ValueError("proposal table models must be distinct")
        self._refresh()

    def packed(self):
        """``(offsets, flat positions, exact_logw, cumulative tempered weights)``."""
        if self._packed is None:
            sizes = np.array([m.size for m in self.models], dtype=np.intc)
            offs = np.zeros(len(self.models) + 1, dtype=np.intc)
            np.cumsum(sizes, out=offs[1:])
            flat = np.array([k for m in self.models for k in m.idx], dtype=np.intc)
            self._packed = (offs, flat, np.ascontiguousarray(self.exact_logw), np.ascontiguousarray(self.cum))
        return self._packed

    def _refresh(self):
        self._packed = None
        if len(self.models):
            w = np.exp(self.upsilon * (self.exact_logw - self.exact_logw.max()))
            self.tempered_prob = w / w.sum()
            self.cum = np.cumsum(self.tempered_prob)
        else:
            self.tempered_prob = self.cum = np.zeros(0)

    def __len__(self):
        return len(self.models)

    def append(self, z: ColumnModel, logw: float) -> int:
        self.index[z.key] = len(self.models)
        self.models.append(z)
        self.exact_logw = np.append(self.exact_logw, logw)
        self._refresh()
        return len(self.models) - 1

    def ensure(self, z: ColumnModel, lr_target: GramTarget) -> int:
        """Index of ``z``, appending it with its exact weight when absent."""
        i = self.index.get(z.key)
        if i is None:
            i = self.append(z, lr_target.fresh(z).log_weight)
        return i

    def sample_index(self, rng) -> int:
        u = rng.random()
        return min(int(np.searchsorted(self.cum, u * self.cum[-1], side="right")), len(self.models) - 1)

    @classmethod
    def full(cls, ctx: LrColumnContext, upsilon: float) -> "ProposalTable":
        """Every model within the degree cap (enumeration, ``p <= 20``)."""
        if ctx.dim + 1 > 20:
            raise CapabilityError("full proposal tables need p <= 20")
        target = LrTarget(ctx)
        models, lw = [], []
        for z in all_models(ctx.dim):
            e = target.fresh(z)
            if e.log_weight > -math.inf:
                models.append(z)
                lw.append(e.log_weight)
        return cls(ctx.j, ctx.dim, upsilon, models, np.array(lw), {"kind": "full"})


def sample_proposal(table: ProposalTable, rng) -> ColumnModel:
    """Categorical draw from the tempered table."""
    return table.models[table.sample_index(rng)]


def lr_chain_visits(ctx: LrColumnContext, T: int, warmup: int, inner_sampler: str, rng,
                    M: Optional[int] = None) -> list:
    """Distinct models visited after ``warmup`` by a chain targeting the regression posterior."""
    target = LrTarget(ctx)
    h = ctx.hyper
    z = ColumnModel.empty(ctx.dim)
    seen = {}
    for t in range(T):
        target.cache.clear()
        if inner_sampler == "gibbs":
            z = kernels.inner_gibbs(target, z, rng)
        else:
            z = kernels.inner_bdmh(target, z, M or h.M, h, rng)
        if t >= warmup:
            seen.setdefault(z.key, z)
    return sorted(seen.values(), key=lambda m: m.key)


def build_proposal_table(ctx: LrColumnContext, T: int = 5000, warmup: int = 1000, inner_sampler: str = "gibbs",
                         hyper: Optional[Hyperparams] = None, rng=None, visits=None) -> ProposalTable:
    """Run a chain on the regression posterior and tabulate the distinct visited models.

    ``visits`` may replace :func:`lr_chain_visits` with an equivalent (compiled) routine.
    """
    if not T > warmup >= 0:
        raise ConfigError("T", f"need T > warmup >= 0, got T={T}, warmup={warmup}")
    if inner_sampler not in ("gibbs", "bdmh"):
        raise ConfigError("inner_sampler", f"unknown sampler {inner_sampler!r}")
    hyper = hyper or ctx.hyper
    if hyper is not ctx.hyper:
        ctx = LrColumnContext(ctx.j, ctx.S, ctx.s_col, ctx.s_jj, hyper, ctx.n)
    models = (visits or lr_chain_visits)(ctx, T, warmup, inner_sampler, rng)
    target = LrTarget(ctx)
    lw = np.array([target.fresh(z).log_weight for z in models])
    meta = {"T": T, "warmup": warmup, "inner_sampler": inner_sampler}
    return ProposalTable(ctx.j, ctx.dim, hyper.upsilon, models, lw, meta)


def build_all_tables(data: Dataset, hyper: Hyperparams, seed, T: int = 5000, warmup: int = 1000,
                     inner_sampler: str = "gibbs", backend: Optional[str] = None) -> list:
    """One table per column from independent child streams of ``seed``."""
    from . import _backend
    from .core import validate_hyperparams

    hyper = validate_hyperparams(hyper, data.p)
    rngs = spawn_rngs(seed, data.p)
    visits = None
    if _backend.resolve(backend) == "compiled":
        p = data.p
        engine = _backend.compiled.Engine(data.S, data.n, hyper, "gibbs", hyper.M, np.eye(p), np.eye(p),
                                          np.zeros((p, p), dtype=np.uint8), rngs[0])

        def visits(ctx, T, warmup, sampler, rng):
            return engine.lr_visits(ctx.j, T, warmup, sampler, hyper.M, rng)

    return [build_proposal_table(LrColumnContext.from_data(data, hyper, j), T, warmup, inner_sampler, hyper,
                                 rngs[j], visits) for j in range(data.p)]


def gimh_log_accept(ctx_cond: ColumnContext, ctx_lr: LrColumnContext, z_cur: ColumnModel, z_prop: ColumnModel,
                    upsilon: float, caches=None) -> float:
    """``min(0, delta)`` with ``delta`` the conditional log-ratio minus ``upsilon`` times the regression log-ratio."""
    c_cond, c_lr = caches if caches is not None else (None, None)
    cond = ConditionalTarget(ctx_cond, c_cond)
    lr = LrTarget(ctx_lr, c_lr)
    delta = (cond.logw(z_prop) - cond.logw(z_cur)) - upsilon * (lr.logw(z_prop) - lr.logw(z_cur))
    return min(0.0, delta)


def gimh_log_accept_termwise(ctx_cond: ColumnContext, ctx_lr: LrColumnContext, z_cur: ColumnModel,
                             z_prop: ColumnModel, upsilon: float) -> float:
    """The same acceptance assembled factor by factor with dense solves (``tau = g1^{-2}``)."""
    h = ctx_cond.hyper
    c = ctx_cond.s_jj + h.lam
    ridge = h.g1 ** -2

    def u_terms(z):
        idx = list(z.idx)
        U = c * ctx_cond.ainv[np.ix_(idx, idx)] + ridge * np.eye(len(idx))
        s = ctx_cond.s_col[idx]
        return np.linalg.slogdet(U)[1] if idx else 0.0, float(s @ np.linalg.solve(U, s)) if idx else 0.0

    def w_terms(z):
        idx = list(z.idx)
        W = ctx_lr.S[np.ix_(idx, idx)] + ridge * np.eye(len(idx))
        s = ctx_lr.s_col[idx]
        fit = float(s @ np.linalg.solve(W, s)) if idx else 0.0
        return np.linalg.slogdet(W)[1] if idx else 0.0, h.lam + ctx_lr.s_jj - fit

    ldu, qu = u_terms(z_cur)
    ldu_s, qu_s = u_terms(z_prop)
    ldw, rw = w_terms(z_cur)
    ldw_s, rw_s = w_terms(z_prop)
    log_b = 0.5 * (upsilon * ldw_s + ldu - upsilon * ldw - ldu_s + qu_s - qu)
    log_b += (1 - upsilon) * (z_cur.size - z_prop.size) * math.log(h.g1 * (1 - h.theta) / h.theta)
    log_b += (ctx_lr.n / 2 + 1) * upsilon * (math.log(rw_s) - math.log(rw))
    return min(0.0, log_b)


def table_cache_key(data: Dataset, hyper: Hyperparams, T: int, warmup: int, inner_sampler: str, seed) -> str:
    import hashlib
    import json

    blob = json.dumps([data.digest(), hyper.to_dict(), T, warmup, inner_sampler, str(seed)], sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def save_tables(path, tables: list, key: str) -> None:
    """Write tables to an ``.npz`` sidecar tagged with ``key``."""
    arrays = {"key": np.array(key), "p": np.array(len(tables))}
    for t in tables:
        sizes = np.array([m.size for m in t.models], dtype=np.int64)
        flat = np.array([k for m in t.models for k in m.idx], dtype=np.int64)
        arrays[f"t{t.j}_sizes"] = sizes
        arrays[f"t{t.j}_flat"] = flat
        arrays[f"t{t.j}_logw"] = t.exact_logw
        arrays[f"t{t.j}_meta"] = np.array([t.dim, t.upsilon])
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp.npz")
    np.savez(tmp, **arrays)
    tmp.replace(path)


def load_tables(path, key: Optional[str] = None) -> Optional[list]:
    """Read a sidecar; returns ``None`` when missing or tagged with another key."""
    path = Path(path)
    if not path.exists():
        return None
    with np.load(path) as f:
        if key is not None and str(f["key"]) != key:
            return None
        out = []
        for j in range(int(f["p"])):
            dim, ups = f[f"t{j}_meta"]
            sizes, flat = f[f"t{j}_sizes"], f[f"t{j}_flat"]
            offs = np.concatenate([[0], np.cumsum(sizes)])
            models = [ColumnModel(tuple(int(k) for k in flat[offs[i]:offs[i + 1]]), int(dim)) for i in range(sizes.size)]
            out.append(ProposalTable(j, int(dim), float(ups), models, f[f"t{j}_logw"], {"loaded": str(path)}))
    return out


def enumerate_lr_posterior(ctx: LrColumnContext) -> np.ndarray:
    """Exact regression model probabilities indexed by model key (small ``p``)."""
    target = LrTarget(ctx)
    return normalise_log(np.array([target.fresh(z).log_weight for z in all_models(ctx.dim)]))
