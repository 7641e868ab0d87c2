from __future__ import annotations

import math

import numpy as np
import pytest
from conftest import random_pd

from ssggm.conditional import ColumnContext, ModelCache, all_models, log_model_weight
from ssggm.core import ColumnModel, Dataset, Hyperparams, PrecisionState, validate_hyperparams
from ssggm.lr_proposal import (
    LrColumnContext,
    LrTarget,
    ProposalTable,
    build_all_tables,
    build_proposal_table,
    enumerate_lr_posterior,
    gimh_log_accept,
    gimh_log_accept_termwise,
    load_tables,
    lr_log_weight,
    sample_proposal,
    save_tables,
    table_cache_key,
)


def make(p, rng, n=25, theta=0.3, g1=1.2, lam=0.7):
    data = Dataset.from_array(rng.standard_normal((n, p)) @ random_pd(p, rng) / p)
    hyper = validate_hyperparams(Hyperparams(theta=theta, g1=g1, lam=lam), p)
    return data, hyper


def marginal_log_likelihood(data, hyper, j, z):
    """log p(y | X_z) integrating beta and the noise precision, in the n-dimensional form."""
    y = data.Y[:, j]
    X = np.delete(data.Y, j, axis=1)[:, list(z.idx)]
    n = data.n
    tau, lam = hyper.tau, hyper.lam
    C = np.eye(n) + X @ X.T / tau
    quad = y @ np.linalg.solve(C, y)
    return (-0.5 * np.linalg.slogdet(C)[1] + math.log(lam / 2) + math.lgamma(n / 2 + 1)
            - (n / 2 + 1) * math.log((lam + quad) / 2) - n / 2 * math.log(2 * math.pi))


def test_empty_model_weight(rng):
    data, hyper = make(5, rng)
    ctx = LrColumnContext.from_data(data, hyper, 2)
    want = 4 * math.log(1 - hyper.theta) - (data.n / 2 + 1) * math.log(hyper.lam + data.S[2, 2])
    assert lr_log_weight(ctx, ColumnModel.empty(4)) == pytest.approx(want, abs=1e-12)


def test_weights_match_integrated_likelihood(rng):
    for p in (4, 5):
        data, hyper = make(p, rng)
        for j in range(p):
            ctx = LrColumnContext.from_data(data, hyper, j)
            lw = np.array([lr_log_weight(ctx, z) for z in all_models(p - 1)])
            oracle = np.array([marginal_log_likelihood(data, hyper, j, z) + z.size * math.log(hyper.theta)
                               + (p - 1 - z.size) * math.log1p(-hyper.theta) for z in all_models(p - 1)])
            assert np.allclose(lw - lw[0], oracle - oracle[0], atol=1e-10, rtol=0)
            probs = enumerate_lr_posterior(ctx)
            assert abs(probs.sum() - 1) <= 1e-12


def test_incremental_matches_fresh(rng):
    data, hyper = make(9, rng)
    target = LrTarget(LrColumnContext.from_data(data, hyper, 0), ModelCache())
    z = ColumnModel.empty(8)
    e = target.entry(z)
    for _ in range(100):
        z2 = z.flip(int(rng.integers(8)))
        e = target.entry(z2, hint=e)
        assert e.log_weight == pytest.approx(LrTarget(target.ctx).fresh(z2).log_weight, abs=1e-9)
        z = z2


def test_independent_of_omega(rng):
    data, hyper = make(5, rng)
    z = ColumnModel.from_indices([1, 3], 4)
    a = lr_log_weight(LrColumnContext.from_data(data, hyper, 0), z)
    PrecisionState.from_omega(random_pd(5, rng))
    assert lr_log_weight(LrColumnContext.from_data(data, hyper, 0), z) == a


def test_table_from_single_post_warmup_step(rng):
    data, hyper = make(5, rng)
    t = build_proposal_table(LrColumnContext.from_data(data, hyper, 1), T=3, warmup=2, rng=rng)
    assert len(t) == 1 and t.tempered_prob[0] == 1.0
    assert sample_proposal(t, rng) == t.models[0]


def test_table_covers_posterior_mass(rng):
    data, hyper = make(5, rng)
    ctx = LrColumnContext.from_data(data, hyper, 3)
    t = build_proposal_table(ctx, T=10000, warmup=1000, rng=rng)
    probs = enumerate_lr_posterior(ctx)
    assert sum(probs[m.key] for m in t.models) >= 0.99
    assert len({m.key for m in t.models}) == len(t)
    assert abs(t.tempered_prob.sum() - 1) <= 1e-12


def test_untempered_table_is_proportional(rng):
    data, hyper = make(5, rng)
    ctx = LrColumnContext.from_data(data, hyper, 0)
    t = ProposalTable.full(ctx, 1.0)
    assert np.allclose(t.tempered_prob, enumerate_lr_posterior(ctx), atol=1e-12, rtol=0)


def test_sampling_symmetry_and_law(rng):
    t = ProposalTable(0, 3, 0.75, [ColumnModel.empty(3), ColumnModel.from_indices([1], 3)], np.array([-2.0, -2.0]))
    draws = np.array([t.sample_index(rng) for _ in range(10000)])
    assert abs(draws.mean() - 0.5) <= 3 * math.sqrt(0.25 / 10000)
    data, hyper = make(5, rng)
    t = ProposalTable.full(LrColumnContext.from_data(data, hyper, 2), 0.75)
    counts = np.bincount([t.sample_index(rng) for _ in range(100000)], minlength=len(t))
    assert 0.5 * np.abs(counts / counts.sum() - t.tempered_prob).sum() < 0.01


def test_ensure_appends_missing_model(rng):
    data, hyper = make(5, rng)
    ctx = LrColumnContext.from_data(data, hyper, 0)
    t = ProposalTable(0, 4, 0.75, [ColumnModel.empty(4)], np.array([lr_log_weight(ctx, ColumnModel.empty(4))]))
    z = ColumnModel.from_indices([0, 2], 4)
    i = t.ensure(z, LrTarget(ctx))
    assert t.models[i] == z and len(t) == 2
    assert t.exact_logw[i] == pytest.approx(lr_log_weight(ctx, z))
    assert abs(t.tempered_prob.sum() - 1) <= 1e-12
    assert t.ensure(z, LrTarget(ctx)) == i


def cond_context(data, hyper, rng, j):
    state = PrecisionState.from_omega(random_pd(data.p, rng) / data.p)
    return ColumnContext.from_state(state, data.S, data.n, hyper, j)


def test_gimh_accept_examples(rng):
    data, hyper = make(4, rng)
    cc = cond_context(data, hyper, rng, 1)
    lc = LrColumnContext.from_data(data, hyper, 1)
    z = ColumnModel.from_indices([0], 3)
    assert gimh_log_accept(cc, lc, z, z, 0.75) == 0.0
    z2 = ColumnModel.from_indices([1, 2], 3)
    want = min(0.0, log_model_weight(cc, z2) - log_model_weight(cc, z))
    assert gimh_log_accept(cc, lc, z, z2, 0.0) == pytest.approx(want, abs=1e-12)
    for a in all_models(3):
        for b in all_models(3):
            assert gimh_log_accept(cc, lc, a, b, 0.6) == pytest.approx(
                gimh_log_accept_termwise(cc, lc, a, b, 0.6), abs=1e-8)


def test_tables_independent_of_build_order_and_round_trip(tmp_path, rng):
    data, hyper = make(5, rng)
    a = build_all_tables(data, hyper, 11, T=300, warmup=50, backend="python")
    b = build_all_tables(data, hyper, 11, T=300, warmup=50, backend="python")
    for ta, tb in zip(a, b):
        assert [m.key for m in ta.models] == [m.key for m in tb.models]
        assert np.array_equal(ta.exact_logw, tb.exact_logw)
    key = table_cache_key(data, hyper, 300, 50, "gibbs", 11)
    path = tmp_path / "tables.npz"
    save_tables(path, a, key)
    back = load_tables(path, key)
    assert load_tables(path, "other") is None
    assert load_tables(tmp_path / "missing.npz") is None
    for ta, tb in zip(a, back):
        assert ta.models == tb.models
        assert np.array_equal(ta.exact_logw, tb.exact_logw)
        assert np.allclose(ta.tempered_prob, tb.tempered_prob)


def test_compiled_table_visits_match_python(rng):
    from ssggm import _backend

    if "compiled" not in _backend.available():
        pytest.skip("compiled core not built")
    data, hyper = make(6, rng)
    a = build_all_tables(data, hyper, 5, T=400, warmup=100, backend="python")
    b = build_all_tables(data, hyper, 5, T=400, warmup=100, backend="compiled")
    for ta, tb in zip(a, b):
        assert [m.key for m in ta.models] == [m.key for m in tb.models]
        assert np.allclose(ta.exact_logw, tb.exact_logw, rtol=0, atol=1e-9)
