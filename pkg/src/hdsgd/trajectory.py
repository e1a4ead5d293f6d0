"""Time-indexed statistics records and their CSV contract.

Every solver and simulator in the package emits the same row layout so
trajectories can be compared directly:

    t,risk,D2,N,tr_B11,tr_B12,tr_B22,gamma,in_domain

D2 is NaN for models with ell != ell_star; in_domain is 1 until the dynamics
leave the admissible set, after which the final row carries 0.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field

import numpy as np

CSV_HEADER = "t,risk,D2,N,tr_B11,tr_B12,tr_B22,gamma,in_domain"
STAT_COLUMNS = ("risk", "D2", "N", "tr_B11", "tr_B12", "tr_B22")


@dataclass
class Trajectory:
    t: np.ndarray
    risk: np.ndarray
    D2: np.ndarray
    N: np.ndarray
    tr_B11: np.ndarray
    tr_B12: np.ndarray
    tr_B22: np.ndarray
    gamma: np.ndarray
    in_domain: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.t)
        for name in ("risk", "D2", "N", "tr_B11", "tr_B12", "tr_B22", "gamma",
                     "in_domain"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} length mismatch")
        if n > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("t must be strictly increasing")

    def __len__(self) -> int:
        return len(self.t)

    def column(self, name: str) -> np.ndarray:
        return getattr(self, name)

    @property
    def exited_domain(self) -> bool:
        return bool(len(self) and self.in_domain[-1] == 0)

    def stat_at(self, name: str, tq: np.ndarray) -> np.ndarray:
        """Linear interpolation of a statistic onto query times."""
        return np.interp(tq, self.t, self.column(name))

    def to_csv(self, path_or_buf) -> None:
        rows = np.column_stack([
            self.t, self.risk, self.D2, self.N,
            self.tr_B11, self.tr_B12, self.tr_B22, self.gamma,
            self.in_domain.astype(float),
        ])
        own = isinstance(path_or_buf, (str, bytes, os.PathLike))
        fh = open(path_or_buf, "w") if own else path_or_buf
        try:
            fh.write(CSV_HEADER + "\n")
            for row in rows:
                fields = [repr(float(v)) for v in row[:-1]]
                fields.append(str(int(row[-1])))
                fh.write(",".join(fields) + "\n")
        finally:
            if own:
                fh.close()

    @classmethod
    def from_csv(cls, path_or_buf) -> "Trajectory":
        own = isinstance(path_or_buf, (str, bytes, os.PathLike))
        fh = open(path_or_buf) if own else path_or_buf
        try:
            header = fh.readline().strip()
            if header != CSV_HEADER:
                raise ValueError(
                    f"unexpected trajectory header {header!r}; wanted {CSV_HEADER!r}"
                )
            body = fh.read()
        finally:
            if own:
                fh.close()
        if not body.strip():
            raise ValueError("trajectory CSV has no rows")
        data = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2)
        return cls(
            t=data[:, 0], risk=data[:, 1], D2=data[:, 2], N=data[:, 3],
            tr_B11=data[:, 4], tr_B12=data[:, 5], tr_B22=data[:, 6],
            gamma=data[:, 7], in_domain=data[:, 8].astype(int),
        )


class TrajectoryBuilder:
    """Accumulates rows and finalizes into a Trajectory."""

    def __init__(self, meta: dict | None = None):
        self._rows: list[tuple] = []
        self.meta = dict(meta or {})

    def add(self, t, risk, D2, N, tr_B11, tr_B12, tr_B22, gamma, in_domain=True):
        self._rows.append((t, risk, D2, N, tr_B11, tr_B12, tr_B22, gamma,
                           1 if in_domain else 0))

    def build(self) -> Trajectory:
        if not self._rows:
            raise ValueError("no rows recorded")
        arr = np.array(self._rows, dtype=float)
        return Trajectory(
            t=arr[:, 0], risk=arr[:, 1], D2=arr[:, 2], N=arr[:, 3],
            tr_B11=arr[:, 4], tr_B12=arr[:, 5], tr_B22=arr[:, 6],
            gamma=arr[:, 7], in_domain=arr[:, 8].astype(int), meta=self.meta,
        )


def common_grid(trajs: list[Trajectory], n: int = 0) -> np.ndarray:
    """Shared time grid over the intersection of the trajectories' spans."""
    t0 = max(tr.t[0] for tr in trajs)
    t1 = min(tr.t[-1] for tr in trajs)
    if t1 <= t0:
        raise ValueError("trajectories do not overlap in time")
    if n <= 0:
        n = max(len(tr.t) for tr in trajs)
    return np.linspace(t0, t1, n)


def sup_deviation(a: Trajectory, b: Trajectory, stat: str,
                  grid: np.ndarray | None = None) -> tuple[float, float]:
    """(sup, mean) absolute deviation of one statistic on a common grid.

    Statistics that are NaN in either trajectory (e.g. D2 when ell differs
    from ell_star) yield (nan, nan).
    """
    if grid is None:
        grid = common_grid([a, b])
    va = a.stat_at(stat, grid)
    vb = b.stat_at(stat, grid)
    if np.any(np.isnan(va)) or np.any(np.isnan(vb)):
        return float("nan"), float("nan")
    diff = np.abs(va - vb)
    return float(diff.max()), float(diff.mean())
