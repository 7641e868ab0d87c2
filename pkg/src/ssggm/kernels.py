"""Pure-Python inner model-space kernels for one column visit.

Every kernel takes a target exposing ``entry(z, hint)`` / ``logw(z, hint)``
(see :class:`ssggm.conditional.GramTarget`) and consumes random numbers in the
same order as the compiled core, so both backends follow the same path for a
given seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conditional import GramTarget, all_models, categorical, clamped_exp, inclusion_probability
from .core import ColumnModel, Hyperparams


@dataclass
class MoveStats:
    proposed: int = 0
    accepted: int = 0

    @property
    def rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else float("nan")


def shuffled(n: int, rng) -> np.ndarray:
    """Fisher-Yates permutation of ``0..n-1`` driven by ``rng.random()``."""
    out = np.arange(n)
    for i in range(n - 1, 0, -1):
        r = int(rng.random() * (i + 1))
        out[i], out[r] = out[r], out[i]
    return out


def move_class_probs(size: int, dim: int, p_birth: float, p_death: float) -> tuple[float, float, float]:
    """Birth/death/swap probabilities with unavailable classes renormalised away."""
    pb = p_birth if size < dim else 0.0
    pd = p_death if size > 0 else 0.0
    ps = 1.0 - p_birth - p_death if 0 < size < dim else 0.0
    tot = pb + pd + ps
    return pb / tot, pd / tot, ps / tot


def q_bd(z: ColumnModel, z_new: ColumnModel, p_birth: float, p_death: float) -> float:
    """Birth-death-swap proposal probability of moving from ``z`` to ``z_new``."""
    k, dim = z.size, z.dim
    pb, pd, ps = move_class_probs(k, dim, p_birth, p_death)
    diff = set(z.idx) ^ set(z_new.idx)
    if z_new.size == k + 1 and len(diff) == 1:
        return pb / (dim - k)
    if z_new.size == k - 1 and len(diff) == 1:
        return pd / k
    if z_new.size == k and len(diff) == 2:
        return ps / (k * (dim - k))
    return 0.0


def _choose_class(size, dim, hyper, rng) -> int:
    pb, pd, _ = move_class_probs(size, dim, hyper.p_birth, hyper.p_death)
    u = rng.random()
    if u < pb:
        return 0
    if u < pb + pd:
        return 1
    return 2


def _accept(log_ratio: float, rng) -> bool:
    u = rng.random()
    return log_ratio > -math.inf and u < math.exp(min(0.0, log_ratio))


def inner_exact(target: GramTarget, z: ColumnModel, rng) -> ColumnModel:
    """Independent draw from the enumerated target (small ``dim`` only)."""
    lw = np.array([target.entry(m).log_weight for m in all_models(target.dim)])
    return ColumnModel.from_key(categorical(np.exp(lw - lw.max()), rng), target.dim)


def inner_gibbs(target: GramTarget, z: ColumnModel, rng, rb: np.ndarray | None = None) -> ColumnModel:
    """One scan over all coordinates in random order.

    ``rb[k]`` receives the inclusion probability used when coordinate ``k`` was updated.
    """
    cur = target.entry(z)
    for k in shuffled(target.dim, rng):
        k = int(k)
        if k in z:
            lw_plus = cur.log_weight
            other = target.entry(z.remove(k), hint=cur)
            lw_minus = other.log_weight
        else:
            lw_minus = cur.log_weight
            other = target.entry(z.add(k), hint=cur)
            lw_plus = other.log_weight
        prob = inclusion_probability(lw_minus, lw_plus)
        if rb is not None:
            rb[k] = prob
        include = rng.random() < prob
        if include != (k in z):
            z, cur = other.z, other
    return z


def inner_bdmh(target: GramTarget, z: ColumnModel, M: int, hyper: Hyperparams, rng,
               stats: MoveStats | None = None) -> ColumnModel:
    """``M`` birth/death/swap Metropolis-Hastings steps."""
    dim = target.dim
    cur = target.entry(z)
    for _ in range(M):
        k = z.size
        cls = _choose_class(k, dim, hyper, rng)
        out = [i for i in range(dim) if i not in z]
        if cls == 0:
            b = out[int(rng.random() * (dim - k))]
            new = target.entry(z.add(b), hint=cur)
        elif cls == 1:
            a = z.idx[int(rng.random() * k)]
            new = target.entry(z.remove(a), hint=cur)
        else:
            a = z.idx[int(rng.random() * k)]
            b = out[int(rng.random() * (dim - k))]
            mid = target.entry(z.remove(a), hint=cur)
            new = target.entry(mid.z.add(b), hint=mid)
        log_q = math.log(q_bd(new.z, z, hyper.p_birth, hyper.p_death)) - math.log(q_bd(z, new.z, hyper.p_birth, hyper.p_death))
        ratio = new.log_weight - cur.log_weight + log_q if new.log_weight > -math.inf else -math.inf
        if stats is not None:
            stats.proposed += 1
        if _accept(ratio, rng):
            z, cur = new.z, new
            if stats is not None:
                stats.accepted += 1
    return z


def _lit_neighbours(target: GramTarget, z: ColumnModel, cur, cls: int, swap_idx=None):
    """Neighbour entries of ``z`` in move class ``cls`` in canonical order."""
    dim = target.dim
    out = [i for i in range(dim) if i not in z]
    if cls == 0:
        return [target.entry(z.add(b), hint=cur) for b in out]
    if cls == 1:
        return [target.entry(z.remove(a), hint=cur) for a in z.idx]
    pairs = [(a, b) for a in z.idx for b in out]
    if swap_idx is not None:
        pairs = [pairs[i] for i in swap_idx]
    res = []
    for a, b in pairs:
        mid = target.entry(z.remove(a), hint=cur)
        res.append(target.entry(mid.z.add(b), hint=mid))
    return res


def lit_weight(lw_new: float, lw_cur: float, p: int) -> float:
    """Clamped ratio ``pi(z') / pi(z)`` restricted to ``[1/p, p]``."""
    if lw_new == -math.inf:
        return 1.0 / p
    d = lw_new - lw_cur
    lo = -math.log(p)
    return math.exp(min(max(d, lo), -lo))


def inner_lit(target: GramTarget, z: ColumnModel, M: int, hyper: Hyperparams, rng,
              stats: MoveStats | None = None, swap_cap: int | None = None) -> ColumnModel:
    """``M`` locally-informed thresholded steps.

    With ``swap_cap`` set, at most that many swap neighbours are evaluated and
    the swap normaliser is scaled by the subsampling fraction (approximate).
    """
    dim, p = target.dim, target.p
    cur = target.entry(z)
    reverse = (1, 0, 2)
    for _ in range(M):
        k = z.size
        cls = _choose_class(k, dim, hyper, rng)
        swap_idx, frac = _swap_subsample(k, dim, swap_cap, rng) if cls == 2 else (None, 1.0)
        nbrs = _lit_neighbours(target, z, cur, cls, swap_idx)
        w = np.array([lit_weight(e.log_weight, cur.log_weight, p) for e in nbrs])
        i = categorical(w, rng)
        new = nbrs[i]
        z_fwd = w.sum() / frac
        if new.log_weight > -math.inf:
            k_new = new.z.size
            rcls = reverse[cls]
            rswap, rfrac = _swap_subsample(k_new, dim, swap_cap, rng) if rcls == 2 else (None, 1.0)
            back = _lit_neighbours(target, new.z, new, rcls, rswap)
            z_rev = sum(lit_weight(e.log_weight, new.log_weight, p) for e in back) / rfrac
            p_fwd = move_class_probs(k, dim, hyper.p_birth, hyper.p_death)[cls]
            p_rev = move_class_probs(k_new, dim, hyper.p_birth, hyper.p_death)[rcls]
            w_rev = lit_weight(cur.log_weight, new.log_weight, p)
            ratio = (new.log_weight - cur.log_weight + math.log(p_rev) + math.log(w_rev) - math.log(z_rev)
                     - math.log(p_fwd) - math.log(w[i]) + math.log(z_fwd))
        else:
            ratio = -math.inf
        if stats is not None:
            stats.proposed += 1
        if _accept(ratio, rng):
            z, cur = new.z, new
            if stats is not None:
                stats.accepted += 1
    return z


def _swap_subsample(k, dim, cap, rng):
    n = k * (dim - k)
    if cap is None or n <= cap:
        return None, 1.0
    idx = np.sort(rng.choice(n, size=cap, replace=False))
    return idx, cap / n


def inner_gimh(target: GramTarget, lr_target: GramTarget, table, z: ColumnModel, M: int,
               upsilon: float, rng, stats: MoveStats | None = None) -> ColumnModel:
    """``M`` independence Metropolis-Hastings steps with a tempered regression proposal."""
    cur = target.entry(z)
    i_cur = table.ensure(z, lr_target)
    for _ in range(M):
        i = table.sample_index(rng)
        new = target.entry(table.models[i])
        delta = (new.log_weight - cur.log_weight) - upsilon * (table.exact_logw[i] - table.exact_logw[i_cur])
        if stats is not None:
            stats.proposed += 1
        if _accept(delta, rng):
            z, cur, i_cur = new.z, new, i
            if stats is not None:
                stats.accepted += 1
    return z
