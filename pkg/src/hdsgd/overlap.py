"""Overlap matrices: the sufficient statistic of the dynamics.

An overlap matrix collects the K-weighted inner products between the learner
block X (dimension ell) and the target block X* (dimension ell_star).  It is
stored as one symmetric (ell+ell_star) x (ell+ell_star) array with block
views, so linear algebra on the full matrix stays cheap and obvious.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TOL_PSD_REL = 1e-10  # slack per unit norm for "positive semidefinite"


def tol_psd(mat: np.ndarray) -> float:
    """PSD slack used throughout: 1e-10 * (1 + ||B||_F)."""
    return TOL_PSD_REL * (1.0 + float(np.linalg.norm(mat)))


@dataclass(frozen=True)
class OverlapMatrix:
    """Symmetric block matrix [[B11, B12], [B12^T, B22]].

    B11 is ell x ell, B12 is ell x ell_star, B22 is ell_star x ell_star.
    """

    mat: np.ndarray
    ell: int

    def __post_init__(self):
        m = np.asarray(self.mat, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"overlap matrix must be square, got {m.shape}")
        if not (0 < self.ell < m.shape[0]):
            raise ValueError(f"ell={self.ell} out of range for shape {m.shape}")
        object.__setattr__(self, "mat", 0.5 * (m + m.T))

    @classmethod
    def from_blocks(cls, b11, b12, b22) -> "OverlapMatrix":
        b11 = np.atleast_2d(np.asarray(b11, dtype=float))
        b12 = np.atleast_2d(np.asarray(b12, dtype=float))
        b22 = np.atleast_2d(np.asarray(b22, dtype=float))
        top = np.hstack([b11, b12])
        bot = np.hstack([b12.T, b22])
        return cls(np.vstack([top, bot]), ell=b11.shape[0])

    @property
    def ell_star(self) -> int:
        return self.mat.shape[0] - self.ell

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def b11(self) -> np.ndarray:
        return self.mat[: self.ell, : self.ell]

    @property
    def b12(self) -> np.ndarray:
        return self.mat[: self.ell, self.ell :]

    @property
    def b22(self) -> np.ndarray:
        return self.mat[self.ell :, self.ell :]

    def min_eig(self) -> float:
        return float(np.linalg.eigvalsh(self.mat)[0])

    def is_psd(self, slack: float | None = None) -> bool:
        if slack is None:
            slack = tol_psd(self.mat)
        return self.min_eig() >= -slack

    def norm(self) -> float:
        return float(np.linalg.norm(self.mat))

    def scalar_blocks(self) -> tuple[float, float, float]:
        """(b11, b12, b22) as floats; only valid when ell = ell_star = 1."""
        if self.dim != 2:
            raise ValueError("scalar_blocks requires a 2x2 overlap matrix")
        return float(self.mat[0, 0]), float(self.mat[0, 1]), float(self.mat[1, 1])


@dataclass(frozen=True)
class GradH:
    """Blocks of the symmetric-convention gradient of h at an overlap matrix.

    h1 is ell x ell (symmetric), h2 is ell x ell_star, h3 is ell_star x ell_star.
    h2 stores the halved value: writing h symmetrically in B12 and B21 and
    differentiating with respect to B12 alone would give 2*h2.
    """

    h1: np.ndarray
    h2: np.ndarray
    h3: np.ndarray

    def full(self) -> np.ndarray:
        """Assemble the full symmetric gradient [[h1, h2], [h2^T, h3]]."""
        top = np.hstack([self.h1, self.h2])
        bot = np.hstack([self.h2.T, self.h3])
        return np.vstack([top, bot])

    def drift_matrix(self) -> np.ndarray:
        """The first-block-column matrix [[h1, 0], [h2^T, 0]] driving the ODEs."""
        full = self.full()
        ell = self.h1.shape[0]
        out = np.zeros_like(full)
        out[:, :ell] = full[:, :ell]
        return out
