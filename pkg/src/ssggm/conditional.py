"""Conditional posterior over one column's edge pattern given the rest of Omega.

For column ``j`` with ``ainv = (Omega_{-j,-j})^{-1}``, ``s = S_{-j,j}`` and
``c = S_jj + lam`` the unnormalised log weight of a model ``z`` is::

    0.5 * s_z' U_z^{-1} s_z - 0.5 * log|U_z| - |z| log g1
        + |z| log theta + (p - 1 - |z|) log(1 - theta)

with ``U_z = c * ainv[z, z] + g1^{-2} I``. Factors of ``U_z`` are cached per
column visit and grown or shrunk by one row from a neighbouring model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg
from .core import CapabilityError, ColumnModel, Hyperparams, PrecisionState, NumericalError, others
from .linalg import CholFactor

LOG_CLAMP = 700.0
MAX_ENUM_P = 20


def clamped_exp(x: float) -> float:
    return math.exp(min(max(x, -LOG_CLAMP), LOG_CLAMP))


def log_prior_size(size: int, dim: int, theta: float) -> float:
    """``size log(theta) + (dim - size) log(1 - theta)`` with ``0 * log 0 = 0``."""
    out = size * math.log(theta) if size else 0.0
    if dim - size:
        out += (dim - size) * (math.log1p(-theta) if theta < 1.0 else -math.inf)
    return out


def inclusion_probability(lw_minus: float, lw_plus: float) -> float:
    """``1 / (1 + r)`` with ``r = exp(lw_minus - lw_plus)``."""
    if lw_plus == -math.inf:
        return 0.0
    if lw_minus == -math.inf:
        return 1.0
    return 1.0 / (1.0 + clamped_exp(lw_minus - lw_plus))


@dataclass
class ModelCacheEntry:
    z: ColumnModel
    log_weight: float
    order: tuple = ()
    cholU: Optional[CholFactor] = None
    v: Optional[np.ndarray] = None  # cholU^{-1} s[order]
    quad: float = 0.0
    logdet: float = 0.0

    @property
    def m(self) -> np.ndarray:
        """``U_z^{-1} s_z`` in ascending position order."""
        if not self.order:
            return np.zeros(0)
        m_ord = linalg.backward(self.cholU, self.v)
        out = np.empty(len(self.order))
        out[np.argsort(self.order)] = m_ord
        return out


@dataclass
class ModelCache:
    """Per-column-visit map from model key to cached entry."""

    scope: tuple = ()
    entries: dict = field(default_factory=dict)
    hits: int = 0
    misses: int = 0

    def get(self, key):
        e = self.entries.get(key)
        if e is None:
            self.misses += 1
        else:
            self.hits += 1
        return e

    def put(self, entry: ModelCacheEntry):
        self.entries[entry.z.key] = entry

    def clear(self, scope: tuple = ()):
        self.entries.clear()
        self.scope = scope

    def __len__(self):
        return len(self.entries)


class GramTarget:
    """Model weights built from factors of ``scale * B[z, z] + ridge * I``.

    Subclasses supply ``B``, ``s`` and ``weight(size, quad, logdet)``.
    """

    B: np.ndarray
    s: np.ndarray
    scale: float
    ridge: float
    dim: int
    p: int

    def __init__(self, cache: Optional[ModelCache] = None):
        self.cache = ModelCache() if cache is None else cache
        self.allowed: Optional[np.ndarray] = None
        self.dbar = self.dim

    def weight(self, size: int, quad: float, logdet: float) -> float:
        raise NotImplementedError

    def excluded(self, z: ColumnModel) -> bool:
        if z.size > self.dbar:
            return True
        if self.allowed is not None and z.size and not self.allowed[list(z.idx)].all():
            return True
        return False

    def gram(self, order) -> np.ndarray:
        idx = np.asarray(order, dtype=int)
        A = self.scale * self.B[np.ix_(idx, idx)]
        A[np.diag_indices_from(A)] += self.ridge
        return A

    def fresh(self, z: ColumnModel) -> ModelCacheEntry:
        order = z.idx
        if self.excluded(z):
            return ModelCacheEntry(z, -math.inf, order)
        F = linalg.chol_factor(self.gram(order))
        v = linalg.forward(F, self.s[list(order)])
        return self._finish(z, order, F, v)

    def _finish(self, z, order, F, v) -> ModelCacheEntry:
        quad = float(v @ v)
        ld = linalg.logdet(F)
        return ModelCacheEntry(z, self.weight(z.size, quad, ld), tuple(order), F, v, quad, ld)

    def from_neighbour(self, z: ColumnModel, hint: ModelCacheEntry) -> Optional[ModelCacheEntry]:
        if hint.cholU is None or self.excluded(z):
            return None
        if z.size == hint.z.size + 1:
            (k,) = set(z.idx) - set(hint.z.idx)
            idx = np.asarray(hint.order, dtype=int)
            col = self.scale * self.B[idx, k]
            diag = self.scale * self.B[k, k] + self.ridge
            F = linalg.chol_append(hint.cholU, col, diag)
            l = F.L[-1, :-1]
            v = np.append(hint.v, (self.s[k] - l @ hint.v) / F.L[-1, -1])
            return self._finish(z, hint.order + (k,), F, v)
        if z.size == hint.z.size - 1:
            (k,) = set(hint.z.idx) - set(z.idx)
            pos = hint.order.index(k)
            F = linalg.chol_remove(hint.cholU, pos)
            order = hint.order[:pos] + hint.order[pos + 1:]
            v = linalg.forward(F, self.s[list(order)])
            return self._finish(z, order, F, v)
        return None

    def entry(self, z: ColumnModel, hint: Optional[ModelCacheEntry] = None) -> ModelCacheEntry:
        e = self.cache.get(z.key)
        if e is not None:
            return e
        e = None
        if hint is not None and len(set(z.idx) ^ set(hint.z.idx)) == 1:
            e = self.from_neighbour(z, hint)
        if e is None:
            e = self.fresh(z)
        self.cache.put(e)
        return e

    def logw(self, z: ColumnModel, hint: Optional[ModelCacheEntry] = None) -> float:
        return self.entry(z, hint).log_weight


@dataclass
class ColumnContext:
    """Everything the conditional of column ``j`` depends on."""

    j: int
    ainv: np.ndarray
    s_col: np.ndarray
    s_jj: float
    hyper: Hyperparams
    n: int
    allowed: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return self.s_col.size

    @classmethod
    def from_state(cls, state: PrecisionState, S: np.ndarray, n: int, hyper: Hyperparams, j: int) -> "ColumnContext":
        p = state.p
        rest = others(p, j)
        ainv = linalg.inverse_drop_rowcol(state.sigma, j)
        allowed = None
        if hyper.dbar < p - 1:
            # a new edge (k, j) must keep node k within the degree cap
            deg_excl = state.Z[rest].sum(axis=1) - state.Z[rest, j]
            allowed = deg_excl < hyper.dbar
        return cls(j, ainv, np.array(S[rest, j]), float(S[j, j]), hyper, n, allowed)


class ConditionalTarget(GramTarget):
    def __init__(self, ctx: ColumnContext, cache: Optional[ModelCache] = None):
        h = ctx.hyper
        self.ctx = ctx
        self.B = ctx.ainv
        self.s = ctx.s_col
        self.scale = ctx.s_jj + h.lam
        self.ridge = h.g1 ** -2
        self.dim = ctx.dim
        self.p = self.dim + 1
        self._log_g1 = math.log(h.g1)
        super().__init__(cache)
        self.allowed = ctx.allowed
        self.dbar = h.dbar if h.dbar is not None else self.dim

    def weight(self, size, quad, logdet):
        return 0.5 * quad - 0.5 * logdet - size * self._log_g1 + log_prior_size(size, self.dim, self.ctx.hyper.theta)


def log_model_weight(ctx: ColumnContext, z: ColumnModel, cache: Optional[ModelCache] = None,
                     hint: Optional[ModelCacheEntry] = None) -> float:
    """Unnormalised log conditional posterior of ``z``; ``-inf`` above the degree cap."""
    target = ConditionalTarget(ctx, cache)
    return target.logw(z, hint)


def all_models(dim: int):
    for key in range(1 << dim):
        yield ColumnModel.from_key(key, dim)


def enumerate_log_weights(target: GramTarget) -> np.ndarray:
    """Log weights of every model, indexed by model key."""
    if target.dim + 1 > MAX_ENUM_P:
        raise CapabilityError(f"enumeration needs p <= {MAX_ENUM_P}; use an MCMC kernel instead")
    return np.array([target.fresh(z).log_weight for z in all_models(target.dim)])


def normalise_log(lw: np.ndarray) -> np.ndarray:
    w = np.exp(lw - np.max(lw))
    return w / w.sum()


def enumerate_posterior(ctx: ColumnContext) -> np.ndarray:
    """Exact conditional model probabilities indexed by model key."""
    return normalise_log(enumerate_log_weights(ConditionalTarget(ctx)))


def sample_model_exact(ctx: ColumnContext, cache: Optional[ModelCache], rng) -> ColumnModel:
    """Draw ``z`` from the enumerated conditional (p <= 20 only)."""
    if ctx.dim + 1 > MAX_ENUM_P:
        raise CapabilityError(f"exact sampling needs p <= {MAX_ENUM_P}; use an MCMC kernel instead")
    target = ConditionalTarget(ctx, cache)
    lw = np.array([target.entry(z).log_weight for z in all_models(ctx.dim)])
    return ColumnModel.from_key(categorical(np.exp(lw - lw.max()), rng), ctx.dim)


def categorical(weights: np.ndarray, rng) -> int:
    cum = np.cumsum(weights)
    u = rng.random()
    return min(int(np.searchsorted(cum, u * cum[-1], side="right")), len(cum) - 1)


def sample_column(ctx: ColumnContext, z: ColumnModel, rng, u2: Optional[float] = None):
    """Draw the new column of Omega given the edge pattern ``z``.

    Returns ``(u1, u2, omega_col, omega_diag)`` where ``omega_col`` has support
    ``z`` with values ``-u1`` and ``omega_diag = u2 + u1' ainv[z, z] u1``.
    When ``u2`` is supplied it is used instead of a fresh Gamma draw.
    """
    h = ctx.hyper
    idx = list(z.idx)
    k = len(idx)
    if k:
        target = ConditionalTarget(ctx)
        F = linalg.chol_factor(target.gram(idx))
        v = linalg.forward(F, ctx.s_col[idx])
        eps = rng.standard_normal(k)
        u1 = linalg.backward(F, v + eps)
    else:
        u1 = np.zeros(0)
    if u2 is None:
        u2 = rng.standard_gamma(ctx.n / 2.0 + 1.0) / ((ctx.s_jj + h.lam) / 2.0)
    if not u2 > 0:
        raise NumericalError(f"non-positive Gamma draw {u2}")
    omega_col = np.zeros(ctx.dim)
    omega_col[idx] = -u1
    omega_diag = float(u2 + (u1 @ ctx.ainv[np.ix_(idx, idx)] @ u1 if k else 0.0))
    return u1, float(u2), omega_col, omega_diag


def gibbs_flip_ratio(ctx: ColumnContext, z: ColumnModel, k: int, cache: Optional[ModelCache] = None) -> float:
    """``pi(z with z_k = 0) / pi(z with z_k = 1)``; ``inf`` when inclusion is excluded."""
    if not 0 <= k < ctx.dim:
        raise IndexError(f"coordinate {k} out of range")
    target = ConditionalTarget(ctx, cache)
    lw_minus = target.logw(z.remove(k))
    lw_plus = target.logw(z.add(k))
    if lw_plus == -math.inf:
        return math.inf
    return math.exp(lw_minus - lw_plus) if lw_minus > -math.inf else 0.0
