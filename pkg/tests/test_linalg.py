from __future__ import annotations

import numpy as np
import pytest
from conftest import random_pd
from hypothesis import given, settings
from hypothesis import strategies as st

from ssggm.core import NotPositiveDefiniteError, NumericalError
from ssggm.linalg import (
    CholFactor,
    chol_append,
    chol_factor,
    chol_remove,
    chol_solve,
    inverse_after_column_replace,
    inverse_drop_rowcol,
    logdet,
)


def test_factor_identity():
    assert np.array_equal(chol_factor(np.eye(3)).L, np.eye(3))


def test_factor_two_by_two():
    F = chol_factor([[4.0, 2.0], [2.0, 5.0]])
    assert np.allclose(F.L, [[2.0, 0.0], [1.0, 2.0]], atol=1e-15)
    assert np.allclose(F.matrix(), [[4.0, 2.0], [2.0, 5.0]])


def test_factor_indefinite_reports_pivot():
    with pytest.raises(NotPositiveDefiniteError) as ei:
        chol_factor([[1.0, 2.0], [2.0, 1.0]])
    assert ei.value.index == 1


def test_factor_matches_numpy(rng):
    A = random_pd(9, rng)
    assert np.allclose(chol_factor(A).L, np.linalg.cholesky(A), atol=1e-12)


def test_append_identity_border():
    assert np.array_equal(chol_append(chol_factor(np.eye(2)), [0.0, 0.0], 1.0).L, np.eye(3))


def test_append_matches_refactorization(rng):
    A = random_pd(5, rng)
    F = chol_append(chol_factor(A[:4, :4]), A[:4, 4], A[4, 4])
    assert np.abs(F.L - np.linalg.cholesky(A)).max() <= 1e-10


def test_append_schur_guard():
    with pytest.raises(NotPositiveDefiniteError):
        chol_append(chol_factor(np.eye(2)), [1.0, 0.0], 1.0)


def test_append_logdet_equals_log_schur(rng):
    for k in range(1, 9):
        A = random_pd(k + 1, rng)
        F = chol_factor(A[:k, :k])
        G = chol_append(F, A[:k, k], A[k, k])
        schur = A[k, k] - A[:k, k] @ np.linalg.solve(A[:k, :k], A[:k, k])
        assert logdet(G) - logdet(F) == pytest.approx(np.log(schur), abs=1e-10)
        assert logdet(G) == pytest.approx(np.linalg.slogdet(A)[1], abs=1e-10)


def test_remove_from_identity():
    assert np.array_equal(chol_remove(chol_factor(np.eye(3)), 1).L, np.eye(2))


def test_remove_interior_matches_refactorization(rng):
    A = random_pd(6, rng)
    F = chol_remove(chol_factor(A), 2)
    B = np.delete(np.delete(A, 2, 0), 2, 1)
    assert np.abs(F.L - np.linalg.cholesky(B)).max() <= 1e-10


def test_remove_boundaries():
    assert chol_remove(chol_factor([[3.0]]), 0).k == 0
    with pytest.raises(IndexError):
        chol_remove(chol_factor(np.eye(2)), 2)


def test_solve_examples():
    b = np.array([1.5, -2.0, 0.25])
    assert np.allclose(chol_solve(chol_factor(np.eye(3)), b), b)
    # inverse of [[4,2],[2,5]] is [[5,-2],[-2,4]] / 16
    x = chol_solve(chol_factor([[4.0, 2.0], [2.0, 5.0]]), [2.0, 3.0])
    assert np.allclose(x, [0.25, 0.5], atol=1e-14)
    with pytest.raises(ValueError):
        chol_solve(chol_factor(np.eye(3)), [1.0, 2.0])


def test_logdet_examples(rng):
    assert logdet(chol_factor(np.eye(4))) == 0.0
    assert logdet(chol_factor(np.diag([2.0, 3.0]))) == pytest.approx(np.log(6.0), abs=1e-15)
    A = random_pd(4, rng)
    assert logdet(chol_factor(A)) == pytest.approx(np.log(np.linalg.eigvalsh(A)).sum(), abs=1e-9)
    assert logdet(CholFactor.empty()) == 0.0


def tridiag(p, d, e):
    return d * np.eye(p) + e * (np.eye(p, k=1) + np.eye(p, k=-1))


def test_drop_rowcol_examples():
    assert np.allclose(inverse_drop_rowcol(np.eye(3), 1), np.eye(2))
    omega = tridiag(4, 2.0, 0.9)
    got = inverse_drop_rowcol(np.linalg.inv(omega), 3)
    assert np.allclose(got, np.linalg.inv(omega[:3, :3]), rtol=1e-6, atol=1e-12)
    a, b, c = 2.0, 3.0, 5.0
    got = inverse_drop_rowcol(np.diag([1 / a, 1 / b, 1 / c]), 1)
    assert np.allclose(got, np.diag([1 / a, 1 / c]))


def test_drop_rowcol_requires_positive_diagonal():
    with pytest.raises(NumericalError):
        inverse_drop_rowcol(np.diag([1.0, 0.0, 1.0]), 1)


def test_column_replace_examples(rng):
    assert np.allclose(inverse_after_column_replace(np.eye(2), np.zeros(2), 1.0, 0), np.eye(3))
    omega = random_pd(5, rng)
    j = 2
    keep = [0, 1, 3, 4]
    ainv = np.linalg.inv(omega[np.ix_(keep, keep)])
    col = 0.3 * rng.standard_normal(4)
    diag = 10.0
    new = omega.copy()
    new[keep, j] = new[j, keep] = col
    new[j, j] = diag
    got = inverse_after_column_replace(ainv, col, diag, j)
    assert np.abs(got - np.linalg.inv(new)).max() <= 1e-8 * np.abs(got).max()
    v = ainv @ col
    gamma = diag - v @ col
    assert np.allclose(got[keep, j], -v / gamma)
    assert got[j, j] == pytest.approx(1 / gamma)


def test_column_replace_gamma_guard():
    with pytest.raises(NotPositiveDefiniteError):
        inverse_after_column_replace(np.eye(2), np.array([1.0, 0.0]), 1.0, 0)


def test_drop_then_replace_same_column_is_identity(rng):
    for _ in range(20):
        p = int(rng.integers(2, 9))
        omega = random_pd(p, rng)
        sigma = np.linalg.inv(omega)
        j = int(rng.integers(p))
        keep = np.delete(np.arange(p), j)
        back = inverse_after_column_replace(inverse_drop_rowcol(sigma, j), omega[keep, j], omega[j, j], j)
        assert np.abs(back - sigma).max() <= 1e-6 * max(1.0, np.abs(sigma).max())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.lists(st.booleans(), min_size=1, max_size=200))
def test_incremental_sequence_tracks_fresh_factor(seed, moves):
    rng = np.random.default_rng(seed)
    kmax = 30
    big = random_pd(kmax, rng)
    active = list(rng.choice(kmax, size=5, replace=False))
    F = chol_factor(big[np.ix_(active, active)])
    for grow in moves:
        spare = [i for i in range(kmax) if i not in active]
        if (grow and spare) or len(active) <= 1:
            new = int(rng.choice(spare))
            F = chol_append(F, big[active, new], big[new, new])
            active.append(new)
        else:
            pos = int(rng.integers(len(active)))
            F = chol_remove(F, pos)
            active.pop(pos)
        fresh = np.linalg.cholesky(big[np.ix_(active, active)])
        assert np.abs(F.L - fresh).max() <= 1e-7
