"""Ground-truth graphs, precision matrices and Gaussian data for simulation studies."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from ._io import write_csv_atomic, write_json_atomic
from .core import ConfigError, Dataset, GenerationError, make_rng, pattern
from .priors import is_pd

RHO_GRID = np.array([-0.5, -0.4, -0.3, -0.2, -0.1, 0.1, 0.2, 0.3, 0.4, 0.5])
BANDS = (1.5, 0.9, 0.5, 0.35)
MAX_ATTEMPTS = 10_000
KINDS = ("random", "tridiagonal", "block", "ill_conditioned_banded")


@dataclass(frozen=True)
class Scenario:
    """``kind`` is one of ``random`` (edge probability ``q``), ``tridiagonal``,
    ``block`` (clique size ``b``) or ``ill_conditioned_banded``."""

    kind: str
    p: int
    q: Optional[float] = None
    b: int = 4

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError("scenario", f"must be one of {KINDS}, got {self.kind!r}")
        if self.p < 2:
            raise ConfigError("p", f"p >= 2 required, got {self.p}")
        if self.kind == "random":
            q = 1.0 / self.p if self.q is None else self.q
            if not 0.0 < q < 1.0:
                raise ConfigError("q", f"must lie in (0, 1), got {q}")
            object.__setattr__(self, "q", q)
        if self.kind == "block" and (self.b < 2 or self.p % self.b):
            raise ConfigError("block", f"block size {self.b} must be >= 2 and divide p={self.p}")
        if self.kind == "ill_conditioned_banded" and self.p < 4:
            raise ConfigError("p", "the banded scenario needs p >= 4")


@dataclass
class GroundTruth:
    Z0: np.ndarray
    Omega0: np.ndarray
    eig_min: float
    eig_max: float
    max_degree: int
    attempts: int = 1

    @classmethod
    def from_omega(cls, omega: np.ndarray, attempts: int = 1) -> "GroundTruth":
        ev = np.linalg.eigvalsh(omega)
        Z = pattern(omega)
        return cls(Z, omega, float(ev[0]), float(ev[-1]), int(Z.sum(axis=0).max()), attempts)

    @property
    def p(self) -> int:
        return self.Z0.shape[0]

    def edges(self) -> list:
        i, j = np.nonzero(np.triu(self.Z0, 1))
        return list(zip(i.tolist(), j.tolist()))

    def to_json_dict(self) -> dict:
        return {"p": self.p, "eig_min": self.eig_min, "eig_max": self.eig_max,
                "condition": self.eig_max / self.eig_min, "max_degree": self.max_degree,
                "n_edges": len(self.edges()), "attempts": self.attempts}

    def save(self, out_dir, manifest: Optional[dict] = None) -> None:
        """Write ``omega0.csv``, ``z0.csv`` (one edge ``i,j`` per row) and ``truth.json``."""
        out = Path(out_dir)
        mid = manifest["id"] if manifest else None
        write_csv_atomic(out / "omega0.csv", self.Omega0, manifest=mid)
        write_csv_atomic(out / "z0.csv", np.array(self.edges(), dtype=int).reshape(-1, 2), fmt="%d", manifest=mid)
        info = self.to_json_dict()
        if manifest:
            info["manifest"] = manifest
        write_json_atomic(out / "truth.json", info)

    @classmethod
    def load(cls, out_dir) -> "GroundTruth":
        omega = np.loadtxt(Path(out_dir) / "omega0.csv", delimiter=",", ndmin=2, comments="#")
        return cls.from_omega(omega)


def gen_graph(sc: Scenario, rng) -> np.ndarray:
    """Symmetric 0/1 edge matrix with zero diagonal."""
    p = sc.p
    Z = np.zeros((p, p), dtype=np.uint8)
    if sc.kind == "random":
        iu = np.triu_indices(p, 1)
        Z[iu] = make_rng(rng).random(iu[0].size) < sc.q
    elif sc.kind == "tridiagonal":
        idx = np.arange(p - 1)
        Z[idx, idx + 1] = 1
    elif sc.kind == "block":
        for start in range(0, p, sc.b):
            Z[start:start + sc.b, start:start + sc.b] = 1
    else:
        for d in range(1, len(BANDS)):
            idx = np.arange(p - d)
            Z[idx, idx + d] = 1
    Z = np.triu(Z, 1)
    return Z + Z.T


def gen_precision(Z0: np.ndarray, rng) -> tuple[np.ndarray, int]:
    """Gamma diagonals and grid correlations on the support of ``Z0``, redrawn jointly until PD.

    Returns ``(Omega0, attempts)``.
    """
    rng = make_rng(rng)
    p = Z0.shape[0]
    iu = np.nonzero(np.triu(Z0, 1))
    for attempt in range(1, MAX_ATTEMPTS + 1):
        d = rng.gamma(3.0, 1.0, size=p)
        rho = RHO_GRID[rng.integers(0, RHO_GRID.size, size=iu[0].size)]
        omega = np.diag(d)
        omega[iu] = rho * np.sqrt(d[iu[0]] * d[iu[1]])
        omega[iu[1], iu[0]] = omega[iu]
        if is_pd(omega):
            return omega, attempt
    raise GenerationError(f"no positive-definite draw in {MAX_ATTEMPTS} attempts; try a sparser scenario")


def gen_ill_conditioned(p: int) -> np.ndarray:
    """Banded Toeplitz precision matrix with bands ``1.5, 0.9, 0.5, 0.35``."""
    if p < 4:
        raise ConfigError("p", "the banded scenario needs p >= 4")
    omega = np.zeros((p, p))
    for d, val in enumerate(BANDS):
        idx = np.arange(p - d)
        omega[idx, idx + d] = val
        omega[idx + d, idx] = val
    if not is_pd(omega):
        raise GenerationError(f"the banded matrix is not positive definite at p={p}")
    return omega


def gen_truth(sc: Scenario, rng) -> GroundTruth:
    rng = make_rng(rng)
    if sc.kind == "ill_conditioned_banded":
        return GroundTruth.from_omega(gen_ill_conditioned(sc.p))
    omega, attempts = gen_precision(gen_graph(sc, rng), rng)
    return GroundTruth.from_omega(omega, attempts)


def gen_data(Omega0: np.ndarray, n: int, rng) -> Dataset:
    """``n`` draws from ``N(0, Omega0^{-1})`` via the Cholesky factor of ``Omega0``."""
    if n < 1:
        raise ConfigError("n", f"must be >= 1, got {n}")
    L = np.linalg.cholesky(Omega0)
    eps = make_rng(rng).standard_normal((n, Omega0.shape[0]))
    # Omega0 = L L' so x = L'^{-1} eps has covariance Omega0^{-1}
    Y = solve_triangular(L, eps.T, lower=True, trans="T").T
    return Dataset.from_array(Y)
