"""Posterior summaries, Bayesian-FDR edge selection, evaluation against a known truth
and mixing diagnostics."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from .core import ConfigError

MIN_CI_SAMPLES = 20


@dataclass
class PosteriorSummary:
    """Point estimates, inclusion probabilities and equal-tailed intervals (``p x p``)."""

    mean_omega: np.ndarray
    incl_prob: np.ndarray
    ci_lower: Optional[np.ndarray]
    ci_upper: Optional[np.ndarray]
    level: float
    n_retained: int
    estimator: str

    @property
    def p(self) -> int:
        return self.mean_omega.shape[0]


@dataclass
class EvalReport:
    fdr: float
    power: float
    coverage_nonzeros: float
    mae_omega: float
    auc: float
    n_selected: int

    def to_dict(self) -> dict:
        return asdict(self)


def credible_intervals(samples, level: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
    """Equal-tailed empirical intervals per column of ``samples`` (draws x parameters).

    Quantiles invert the empirical CDF and average at its flat steps.
    """
    if not 0.0 < level < 1.0:
        raise ConfigError("ci_level", f"must lie in (0, 1), got {level}")
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.shape[0] < MIN_CI_SAMPLES:
        raise ConfigError("samples", f"at least {MIN_CI_SAMPLES} retained samples required, got {samples.shape[0]}")
    # snap so that levels such as 0.9 hit the empirical CDF steps exactly
    a = round((1.0 - level) / 2.0, 12)
    lo, hi = np.quantile(samples, [a, 1.0 - a], axis=0, method="averaged_inverted_cdf")
    return lo, hi


def upper_to_full(vals: np.ndarray, p: int) -> np.ndarray:
    out = np.zeros((p, p))
    iu = np.triu_indices(p)
    out[iu] = vals
    out.T[iu] = vals
    return out


def summarize(output, level: float = 0.95) -> PosteriorSummary:
    """Summary of a :class:`~ssggm.samplers.ChainOutput`; intervals need >= 20 stored draws."""
    if output.n_retained == 0:
        raise ConfigError("iterations", "the chain retained no samples (iterations == warmup)")
    p = output.p
    lo = hi = None
    if output.samples.shape[0] >= MIN_CI_SAMPLES:
        l, h = credible_intervals(output.samples, level)
        lo, hi = upper_to_full(l, p), upper_to_full(h, p)
    return PosteriorSummary(output.mean_omega, output.incl_prob, lo, hi, level, output.n_retained, output.estimator)


def bfdr_prefix(probs, alpha: float) -> np.ndarray:
    """Indices of the longest prefix (by decreasing probability) with mean ``>= 1 - alpha``.

    Ties are ordered by index.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError("alpha", f"must lie in (0, 1), got {alpha}")
    probs = np.asarray(probs, dtype=float)
    order = np.lexsort((np.arange(probs.size), -probs))
    means = np.cumsum(probs[order]) / np.arange(1, probs.size + 1)
    ok = np.flatnonzero(means >= 1.0 - alpha)
    m = ok[-1] + 1 if ok.size else 0
    return order[:m]


def bfdr_select(incl_prob: np.ndarray, alpha: float = 0.05) -> list:
    """Edges ``(i, j)``, ``i < j``, declared by Bayesian FDR control at ``alpha``."""
    p = incl_prob.shape[0]
    iu = np.triu_indices(p, 1)
    sel = bfdr_prefix(incl_prob[iu], alpha)
    return [(int(iu[0][k]), int(iu[1][k])) for k in sel]


def auc_score(scores, labels) -> float:
    """ROC-AUC by the rank statistic; ties count one half."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    n_pos, n_neg = int(labels.sum()), int((~labels).sum())
    if not n_pos or not n_neg:
        return float("nan")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def evaluate(summary: PosteriorSummary, truth, alpha: float = 0.05) -> EvalReport:
    """Frequentist quality of a summary against ``truth`` (anything with ``Z0`` and ``Omega0``).

    FDR uses ``max(1, selections)`` in the denominator; power is 1 when the
    truth has no edges; coverage runs over nonzero entries of ``Omega0``
    including the diagonal.
    """
    Z0, O0 = np.asarray(truth.Z0), np.asarray(truth.Omega0)
    p = summary.p
    if Z0.shape != (p, p) or O0.shape != (p, p):
        raise ConfigError("truth", f"dimension mismatch: summary has p={p}, truth has shape {Z0.shape}")
    sel = bfdr_select(summary.incl_prob, alpha)
    true_sel = sum(int(Z0[i, j] != 0) for i, j in sel)
    n_true = int(np.triu(Z0 != 0, 1).sum())
    fdr = (len(sel) - true_sel) / max(1, len(sel))
    power = true_sel / n_true if n_true else 1.0
    coverage = float("nan")
    if summary.ci_lower is not None:
        iu = np.triu_indices(p)
        nz = O0[iu] != 0
        inside = (summary.ci_lower[iu] <= O0[iu]) & (O0[iu] <= summary.ci_upper[iu])
        coverage = float(inside[nz].mean())
    mae = float(np.abs(summary.mean_omega - O0).mean())
    iu1 = np.triu_indices(p, 1)
    auc = auc_score(summary.incl_prob[iu1], Z0[iu1] != 0)
    return EvalReport(fdr, power, coverage, mae, auc, len(sel))


def ejd(z_trace) -> float:
    """Mean Hamming distance between consecutive graphs per edge slot.

    ``z_trace`` is a sequence of ``p x p`` edge matrices or a 2-d array of
    upper-triangle edge vectors.
    """
    Z = np.asarray(z_trace)
    if Z.shape[0] < 2:
        raise ConfigError("z_trace", "at least two trace points are required")
    if Z.ndim == 3:
        iu = np.triu_indices(Z.shape[1], 1)
        Z = Z[:, iu[0], iu[1]]
    Z = Z != 0
    return float(np.mean(Z[1:] != Z[:-1]))


def chain_diff(a: PosteriorSummary, b: PosteriorSummary) -> tuple[float, float]:
    """Mean absolute off-diagonal differences ``(|dE(Omega)|, |d incl_prob|)``."""
    if a.p != b.p:
        raise ConfigError("summary", f"dimension mismatch: {a.p} vs {b.p}")
    iu = np.triu_indices(a.p, 1)
    return (float(np.abs(a.mean_omega[iu] - b.mean_omega[iu]).mean()),
            float(np.abs(a.incl_prob[iu] - b.incl_prob[iu]).mean()))


def batch_means_se(x: np.ndarray, n_batches: int = 50) -> np.ndarray:
    """Monte-Carlo standard error of column means of a trace by non-overlapping batch means."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0] // n_batches * n_batches
    if n < n_batches:
        raise ConfigError("trace", f"need at least {n_batches} draws for batch means")
    b = x[:n].reshape(n_batches, -1, x.shape[1]).mean(axis=1)
    return b.std(axis=0, ddof=1) / np.sqrt(n_batches)
