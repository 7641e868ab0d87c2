"""Default hyperparameters and draws from the prior without the PD constraint."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor

from .core import ConfigError, ElicitationError, Hyperparams, make_rng
from .linalg import PIVOT_RTOL


@dataclass(frozen=True)
class ElicitationConfig:
    diag_quantile: float = 0.99
    pd_target: float = 0.95
    K: float = 2.0
    mc_samples: int = 2000
    g1_bracket: tuple = (1e-2, 1e3)
    rel_tol: float = 1e-2

    def __post_init__(self):
        for name in ("diag_quantile", "pd_target"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigError(name, f"must lie in (0, 1), got {v}")
        if not self.K > 0:
            raise ConfigError("K", f"must be positive, got {self.K}")
        if self.mc_samples < 1:
            raise ConfigError("mc_samples", f"must be >= 1, got {self.mc_samples}")
        lo, hi = self.g1_bracket
        if not 0 < lo < hi:
            raise ConfigError("g1_bracket", f"need 0 < lo < hi, got {self.g1_bracket}")
        if not 0 < self.rel_tol < 1:
            raise ConfigError("rel_tol", f"must lie in (0, 1), got {self.rel_tol}")


def elicit_lambda(q: float) -> float:
    """Rate parameter giving ``P(Omega_jj > 1) = q`` under ``Exp(lam / 2)``."""
    if not 0.0 < q < 1.0:
        raise ConfigError("diag_quantile", f"must lie in (0, 1), got {q}")
    return -2.0 * math.log(q)


def elicit_theta(K: float, p: int) -> float:
    """Slab probability giving an expected degree of ``K``."""
    if not K > 0:
        raise ConfigError("K", f"must be positive, got {K}")
    if K > p - 1:
        raise ConfigError("K", f"expected degree {K} exceeds p - 1 = {p - 1}")
    return K / (p - 1)


def _prior_units(theta: float, lam: float, p: int, rng):
    """Diagonal draws and the unit-scale symmetric off-diagonal matrix."""
    diag = rng.exponential(2.0 / lam, size=p)
    iu = np.triu_indices(p, 1)
    mask = rng.random(iu[0].size) < theta
    vals = rng.standard_normal(iu[0].size) * mask
    off = np.zeros((p, p))
    off[iu] = vals
    off += off.T
    return diag, off


def sample_prior_unconstrained(theta: float, g1: float, lam: float, p: int, rng) -> np.ndarray:
    """Diagonal ``Exp(lam/2)``, off-diagonals ``0`` w.p. ``1 - theta`` else ``N(0, g1^2)``."""
    if not 0.0 <= theta <= 1.0:
        raise ConfigError("theta", f"must lie in [0, 1], got {theta}")
    diag, off = _prior_units(theta, lam, p, make_rng(rng))
    out = g1 * off
    out[np.diag_indices(p)] = diag
    return out


def is_pd(A: np.ndarray) -> bool:
    """Cholesky test with the same relative pivot tolerance as :mod:`ssggm.linalg`."""
    try:
        c, _ = cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        return False
    piv = np.diag(c) ** 2
    return bool(np.all(piv > PIVOT_RTOL * max(float(np.max(np.diag(A))), 0.0)))


class PdRate:
    """Monte-Carlo PD frequency of the unconstrained prior as a function of ``g1``.

    The same draws are reused for every ``g1``, which makes the estimate
    monotone in ``g1``.
    """

    def __init__(self, lam: float, theta: float, p: int, mc_samples: int, rng):
        rng = make_rng(rng)
        self.draws = [_prior_units(theta, lam, p, rng) for _ in range(mc_samples)]

    def __call__(self, g1: float) -> float:
        hits = 0
        for diag, off in self.draws:
            A = g1 * off
            A[np.diag_indices_from(A)] = diag
            hits += is_pd(A)
        return hits / len(self.draws)


def elicit_g1(lam: float, theta: float, p: int, cfg: ElicitationConfig | None = None, rng=None) -> float:
    """Largest slab scale whose unconstrained prior is PD with probability ``>= pd_target``.

    Bisection in ``log g1`` until the bracket's relative width is below
    ``cfg.rel_tol``; the returned value is the bracket end meeting the target.
    """
    cfg = cfg or ElicitationConfig()
    rate = PdRate(lam, theta, p, cfg.mc_samples, make_rng(0 if rng is None else rng))
    lo, hi = cfg.g1_bracket
    if rate(hi) >= cfg.pd_target:
        return float(hi)
    for _ in range(20):
        if rate(lo) >= cfg.pd_target:
            break
        lo /= 2.0
    else:
        raise ElicitationError(f"PD rate stays below {cfg.pd_target} for g1 down to {lo}")
    while hi / lo > 1.0 + cfg.rel_tol:
        mid = math.sqrt(lo * hi)
        if rate(mid) >= cfg.pd_target:
            lo = mid
        else:
            hi = mid
    return float(lo)


def elicit_hyperparams(p: int, cfg: ElicitationConfig | None = None, rng=None, **overrides) -> Hyperparams:
    """Default ``(theta, g1, lam)``; explicit keyword overrides skip the matching step."""
    cfg = cfg or ElicitationConfig()
    lam = overrides.pop("lam", None) or elicit_lambda(cfg.diag_quantile)
    theta = overrides.pop("theta", None) or elicit_theta(cfg.K, p)
    g1 = overrides.pop("g1", None) or elicit_g1(lam, theta, p, cfg, rng)
    return Hyperparams(theta=theta, g1=g1, lam=lam, **{k: v for k, v in overrides.items() if v is not None})
