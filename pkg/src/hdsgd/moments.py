"""Gaussian expectation engines over N(0, B).

Two routes are provided on purpose: a deterministic tensorized Gauss-Hermite
rule (`gauss_expect`) and a seeded plain Monte Carlo estimator (`mc_expect`).
The second is the independent oracle for the first and for every closed form
in the model zoo, so they must never share a code path beyond `psd_factor`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import FactorizationError
from .overlap import OverlapMatrix

JITTER_REL = 1e-12  # default Cholesky jitter per unit norm

# quadrature nodes are cached per count; hermgauss is deterministic
_HERMGAUSS_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}
_GRID_CACHE: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}

MAX_QUAD_DIM = 4


@dataclass(frozen=True)
class QuadratureScheme:
    """Tensorized Gauss-Hermite rule with `nodes_per_axis` points per axis."""

    nodes_per_axis: int = 64
    kind: str = "gauss_hermite_tensor"

    def __post_init__(self):
        if not 8 <= self.nodes_per_axis <= 256:
            raise ValueError("nodes_per_axis must lie in [8, 256]")
        if self.kind != "gauss_hermite_tensor":
            raise ValueError(f"unknown quadrature kind: {self.kind}")


def default_jitter(b: np.ndarray) -> float:
    return JITTER_REL * (1.0 + float(np.linalg.norm(b)))


def psd_factor(b: np.ndarray, jitter: float = 0.0) -> np.ndarray:
    """Lower-triangular L with L L^T = B + jitter*I.

    B must be symmetric with minimum eigenvalue >= -jitter; anything
    indefinite beyond the jitter raises FactorizationError.
    """
    b = np.asarray(b, dtype=float)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValueError(f"psd_factor needs a square matrix, got {b.shape}")
    if not np.allclose(b, b.T, atol=1e-10 * (1.0 + np.abs(b).max())):
        raise ValueError("psd_factor needs a symmetric matrix")
    shifted = b + jitter * np.eye(b.shape[0])
    try:
        return np.linalg.cholesky(shifted)
    except np.linalg.LinAlgError:
        min_eig = float(np.linalg.eigvalsh(b)[0])
        if min_eig >= -jitter:
            # exactly singular after the shift; a hair more jitter fixes it
            bump = max(jitter, default_jitter(b))
            try:
                return np.linalg.cholesky(b + bump * np.eye(b.shape[0]))
            except np.linalg.LinAlgError:
                pass
        raise FactorizationError(
            f"matrix indefinite beyond jitter={jitter:g} (min eigenvalue {min_eig:g})"
        )


def _hermgauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _HERMGAUSS_CACHE:
        _HERMGAUSS_CACHE[n] = np.polynomial.hermite.hermgauss(n)
    return _HERMGAUSS_CACHE[n]


def _tensor_grid(n: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    key = (n, dim)
    if key not in _GRID_CACHE:
        x, w = _hermgauss(n)
        grids = np.meshgrid(*([x] * dim), indexing="ij")
        nodes = np.stack([g.ravel() for g in grids], axis=-1)
        weights = np.ones(nodes.shape[0])
        for g in np.meshgrid(*([w] * dim), indexing="ij"):
            weights = weights * g.ravel()
        _GRID_CACHE[key] = (nodes, weights / np.pi ** (dim / 2.0))
    return _GRID_CACHE[key]


def _as_cov(b) -> np.ndarray:
    if isinstance(b, OverlapMatrix):
        return b.mat
    return np.asarray(b, dtype=float)


def gauss_expect(
    integrand: Callable[[np.ndarray], np.ndarray],
    b,
    scheme: QuadratureScheme | None = None,
    jitter: float | None = None,
) -> np.ndarray | float:
    """E_{z ~ N(0,B)} integrand(z) by a tensorized Gauss-Hermite rule.

    `integrand` takes a batch of points with shape (n, dim) and returns shape
    (n,) or (n, ...); the expectation is taken entrywise.  Deterministic for a
    fixed scheme.  Dimensions above 4 are refused because the tensor grid
    blows up; use `mc_expect` there.
    """
    cov = _as_cov(b)
    dim = cov.shape[0]
    if dim > MAX_QUAD_DIM:
        raise ValueError(
            f"gauss_expect refuses dimension {dim} > {MAX_QUAD_DIM}; use mc_expect"
        )
    if scheme is None:
        scheme = QuadratureScheme()
    if jitter is None:
        jitter = default_jitter(cov)
    lower = psd_factor(cov, jitter)
    nodes, weights = _tensor_grid(scheme.nodes_per_axis, dim)
    z = np.sqrt(2.0) * nodes @ lower.T
    vals = np.asarray(integrand(z), dtype=float)
    if vals.shape[0] != nodes.shape[0]:
        raise ValueError("integrand must return one value per input row")
    out = np.tensordot(weights, vals, axes=(0, 0))
    return float(out) if np.ndim(out) == 0 else out


def mc_expect(
    integrand: Callable[[np.ndarray], np.ndarray],
    b,
    n: int = 10**6,
    seed: int | np.random.Generator = 0,
    jitter: float | None = None,
) -> tuple[np.ndarray | float, np.ndarray | float]:
    """Plain Monte Carlo estimate of E_{z ~ N(0,B)} integrand(z).

    Returns (estimate, stderr) where stderr is the sample standard deviation
    over sqrt(n), entrywise for array-valued integrands.  The sampler is a
    counter-based Philox generator keyed by `seed`, so results are
    reproducible across platforms.
    """
    if n < 10**3:
        raise ValueError("mc_expect needs n >= 1000")
    cov = _as_cov(b)
    if jitter is None:
        jitter = default_jitter(cov)
    lower = psd_factor(cov, jitter)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.Generator(
        np.random.Philox(seed)
    )
    g = rng.standard_normal((n, cov.shape[0]))
    vals = np.asarray(integrand(g @ lower.T), dtype=float)
    est = vals.mean(axis=0)
    err = vals.std(axis=0, ddof=1) / np.sqrt(n)
    if np.ndim(est) == 0:
        return float(est), float(err)
    return est, err
