"""Shared domain types: datasets, hyperparameters, chain state and column models."""
from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np


class SsggmError(Exception):
    """Base class for domain errors (CLI exit status 1)."""


class ConfigError(SsggmError, ValueError):
    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


class DegenerateDataError(SsggmError, ValueError):
    pass


class NotPositiveDefiniteError(SsggmError, np.linalg.LinAlgError):
    def __init__(self, message: str, index: Optional[int] = None):
        self.index = index
        super().__init__(message if index is None else f"{message} (pivot {index})")


class NumericalError(SsggmError, ArithmeticError):
    pass


class CapabilityError(SsggmError):
    pass


class ElicitationError(SsggmError):
    pass


class GenerationError(SsggmError):
    pass


class InitializationError(SsggmError):
    pass


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator used for every stochastic operation."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def spawn_rngs(seed, count: int) -> list[np.random.Generator]:
    """Independent generator streams derived from one seed."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.Philox(child)) for child in ss.spawn(count)]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observations ``Y`` (n x p) together with the Gram matrix ``S = Y'Y``."""

    Y: np.ndarray
    S: np.ndarray = field(repr=False)
    n: int
    p: int

    @classmethod
    def from_array(cls, Y) -> "Dataset":
        Y = np.ascontiguousarray(np.asarray(Y, dtype=float))
        if Y.ndim != 2:
            raise ConfigError("Y", "expected a 2-d array of observations")
        n, p = Y.shape
        if n < 1:
            raise ConfigError("Y", "at least one observation is required")
        if p < 2:
            raise ConfigError("Y", f"p >= 2 required, got p={p}")
        if not np.all(np.isfinite(Y)):
            raise DegenerateDataError("Y contains non-finite values")
        Y.setflags(write=False)
        S = Y.T @ Y
        S = 0.5 * (S + S.T)
        S.setflags(write=False)
        return cls(Y=Y, S=S, n=n, p=p)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.asarray(self.Y.shape, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.Y, dtype="<f8").tobytes())
        return h.hexdigest()


def standardize(Y) -> Dataset:
    """Centre every column and scale it to unit sample variance."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise ConfigError("Y", "expected a 2-d array of observations")
    n, p = Y.shape
    if p < 2:
        raise ConfigError("Y", f"p >= 2 required, got p={p}")
    if n < 2:
        raise ConfigError("Y", f"n >= 2 required for standardization, got n={n}")
    centred = Y - Y.mean(axis=0)
    sd = centred.std(axis=0, ddof=1)
    scale = np.abs(Y).max(axis=0)
    for col in range(p):
        if not sd[col] > 1e-12 * max(scale[col], 1.0):
            raise DegenerateDataError(f"column {col} has zero sample variance")
    Z = centred / sd
    # second pass removes the residual rounding in the mean
    Z -= Z.mean(axis=0)
    return Dataset.from_array(Z)


def load_csv(path, standardize_data: bool = True) -> Dataset:
    """Read a headerless CSV (rows = observations, columns = variables)."""
    Y = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    return standardize(Y) if standardize_data else Dataset.from_array(Y)


@dataclass(frozen=True)
class Hyperparams:
    """Prior and sampler tuning parameters.

    ``dbar``, ``M``, ``upsilon`` and ``tau`` may be left as ``None`` and are
    filled by :func:`validate_hyperparams` (``p - 1``, ``ceil(sqrt(p))``,
    ``0.75`` and ``g1**-2`` respectively).
    """

    theta: float
    g1: float
    lam: float
    dbar: Optional[int] = None
    p_birth: float = 0.75
    p_death: float = 0.125
    upsilon: Optional[float] = None
    M: Optional[int] = None
    tau: Optional[float] = None

    @property
    def p_swap(self) -> float:
        return 1.0 - self.p_birth - self.p_death

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def validate_hyperparams(h: Hyperparams, p: int) -> Hyperparams:
    """Check every range constraint and fill the defaults that depend on ``p``."""
    if p < 2:
        raise ConfigError("p", f"p >= 2 required, got {p}")
    if not 0.0 < h.theta <= 1.0 or not math.isfinite(h.theta):
        raise ConfigError("theta", f"must lie in (0, 1], got {h.theta}")
    if not h.g1 > 0 or not math.isfinite(h.g1):
        raise ConfigError("g1", f"must be positive, got {h.g1}")
    if not h.lam > 0 or not math.isfinite(h.lam):
        raise ConfigError("lam", f"must be positive, got {h.lam}")
    if not 0.0 < h.p_birth < 1.0:
        raise ConfigError("p_birth", f"must lie in (0, 1), got {h.p_birth}")
    if not 0.0 < h.p_death < 1.0:
        raise ConfigError("p_death", f"must lie in (0, 1), got {h.p_death}")
    if h.p_birth + h.p_death > 1.0 + 1e-12:
        raise ConfigError("p_death", f"p_birth + p_death must not exceed 1, got {h.p_birth + h.p_death}")
    dbar = p - 1 if h.dbar is None else int(h.dbar)
    if not 1 <= dbar <= p - 1:
        raise ConfigError("dbar", f"must lie in [1, {p - 1}], got {h.dbar}")
    upsilon = 0.75 if h.upsilon is None else float(h.upsilon)
    if not 0.0 < upsilon <= 1.0:
        raise ConfigError("upsilon", f"must lie in (0, 1], got {h.upsilon}")
    M = math.ceil(math.sqrt(p)) if h.M is None else int(h.M)
    if M < 1:
        raise ConfigError("M", f"must be >= 1, got {h.M}")
    tau = h.g1 ** -2 if h.tau is None else float(h.tau)
    if not tau > 0:
        raise ConfigError("tau", f"must be positive, got {h.tau}")
    filled = dataclasses.replace(h, dbar=dbar, upsilon=upsilon, M=M, tau=tau)
    return h if filled == h else filled


@dataclass(frozen=True)
class ColumnModel:
    """Edge pattern of one column: sorted positions among the other ``dim`` variables."""

    idx: tuple
    dim: int

    def __post_init__(self):
        if any(not 0 <= k < self.dim for k in self.idx):
            raise IndexError(f"model position out of range for dim={self.dim}: {self.idx}")

    @classmethod
    def empty(cls, dim: int) -> "ColumnModel":
        return cls((), dim)

    @classmethod
    def from_indices(cls, idx: Iterable[int], dim: int) -> "ColumnModel":
        return cls(tuple(sorted(int(k) for k in set(idx))), dim)

    @classmethod
    def from_bits(cls, bits) -> "ColumnModel":
        bits = np.asarray(bits, dtype=bool)
        return cls(tuple(int(k) for k in np.flatnonzero(bits)), bits.size)

    @classmethod
    def from_key(cls, key: int, dim: int) -> "ColumnModel":
        return cls(tuple(k for k in range(dim) if key >> k & 1), dim)

    @property
    def size(self) -> int:
        return len(self.idx)

    @property
    def key(self) -> int:
        out = 0
        for k in self.idx:
            out |= 1 << k
        return out

    @property
    def bits(self) -> np.ndarray:
        b = np.zeros(self.dim, dtype=bool)
        b[list(self.idx)] = True
        return b

    def __contains__(self, k) -> bool:
        return k in self.idx

    def add(self, k: int) -> "ColumnModel":
        return ColumnModel.from_indices(self.idx + (k,), self.dim)

    def remove(self, k: int) -> "ColumnModel":
        return ColumnModel(tuple(i for i in self.idx if i != k), self.dim)

    def flip(self, k: int) -> "ColumnModel":
        return self.remove(k) if k in self.idx else self.add(k)


def others(p: int, j: int) -> np.ndarray:
    """Variable indices of the column positions ``0..p-2`` for column ``j``."""
    return np.delete(np.arange(p), j)


def pattern(omega: np.ndarray) -> np.ndarray:
    """Off-diagonal support of a precision matrix as a 0/1 matrix."""
    Z = (omega != 0).astype(np.uint8)
    np.fill_diagonal(Z, 0)
    return Z


@dataclass
class PrecisionState:
    """Current precision matrix, its dense inverse and the edge indicators."""

    omega: np.ndarray
    sigma: np.ndarray
    Z: np.ndarray

    @classmethod
    def from_omega(cls, omega, dbar: Optional[int] = None) -> "PrecisionState":
        omega = np.array(omega, dtype=float, order="C")
        p = omega.shape[0]
        if omega.shape != (p, p) or not np.allclose(omega, omega.T, rtol=0, atol=1e-12 * max(1.0, np.abs(omega).max())):
            raise InitializationError("initial precision matrix must be square and symmetric")
        omega = 0.5 * (omega + omega.T)
        Z = pattern(omega)
        if dbar is not None and Z.sum(axis=0).max(initial=0) > dbar:
            raise InitializationError(f"initial graph has a node degree above dbar={dbar}")
        try:
            sigma = _inverse_pd(omega)
        except np.linalg.LinAlgError as exc:
            raise InitializationError(f"initial precision matrix is not positive definite: {exc}") from exc
        return cls(omega=omega, sigma=sigma, Z=Z)

    @property
    def p(self) -> int:
        return self.omega.shape[0]

    def refresh(self) -> float:
        """Recompute ``sigma`` from ``omega``; returns the drift it removed."""
        fresh = _inverse_pd(self.omega)
        drift = float(np.abs(self.sigma - fresh).max())
        self.sigma[...] = fresh
        return drift

    def residual(self) -> float:
        return float(np.abs(self.omega @ self.sigma - np.eye(self.p)).max())

    def copy(self) -> "PrecisionState":
        return PrecisionState(self.omega.copy(), self.sigma.copy(), self.Z.copy())


def _inverse_pd(A: np.ndarray) -> np.ndarray:
    from scipy.linalg import cho_factor, cho_solve

    try:
        c = cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc
    if not np.all(np.diag(c[0]) > 0):
        raise NotPositiveDefiniteError("matrix is not positive definite")
    inv = cho_solve(c, np.eye(A.shape[0]), check_finite=False)
    return np.ascontiguousarray(0.5 * (inv + inv.T))
