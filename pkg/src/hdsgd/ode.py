"""Coupled per-eigenvalue ODE engine.

The state is one small PSD block per distinct eigenvalue group of K.  With
H the first-block-column matrix built from grad h at the spectrum-averaged
overlap matrix, D the projector onto the learner block, and J the Fisher
matrix padded to the full block, each group evolves as

    dB_g/dt = -gamma(t) [ B_g (2 lam_g H + delta D) + (2 lam_g H + delta D)^T B_g ]
              + gamma(t)^2 lam_g J.

This matrix form keeps every block update symmetric by construction; written
out it gives the usual equations, with the learner-target cross block paired
with its transpose and the regularizer entering the cross block once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainExitError, NumericError
from .models import ModelSpec
from .overlap import OverlapMatrix, tol_psd
from .spectrum import SpectrumK
from .trajectory import Trajectory, TrajectoryBuilder

N_MAX_DEFAULT = 1e6


def as_gamma_fn(gamma) -> Callable[[float], float]:
    """Accept a constant or a callable learning-rate schedule."""
    if callable(gamma):
        return gamma
    g = float(gamma)
    return lambda t: g


def init_overlaps(w0_rows: np.ndarray, d: int,
                  mults: np.ndarray | None = None) -> np.ndarray:
    """Initial per-group blocks d * w_i w_i^T from eigenbasis rows of (X0, X*).

    `w0_rows` has one row per eigendirection (shape (d, p)) or one
    representative row per eigenvalue group (shape (G, p) with `mults`
    summing to d; rows within a group must then coincide).
    """
    rows = np.asarray(w0_rows, dtype=float)
    if rows.ndim != 2:
        raise ValueError("w0_rows must be 2-D")
    if mults is None:
        if rows.shape[0] != d:
            raise ValueError(f"expected {d} rows, got {rows.shape[0]}")
    elif rows.shape[0] != len(mults) or int(np.sum(mults)) != d:
        raise ValueError("group rows inconsistent with multiplicities")
    return d * np.einsum("gi,gj->gij", rows, rows)


@dataclass
class OdeState:
    """Per-group overlap blocks at one time point."""

    t: float
    blocks: np.ndarray  # (G, p, p)
    ell: int

    def group(self, g: int) -> OverlapMatrix:
        return OverlapMatrix(self.blocks[g], self.ell)


@dataclass
class ReducedStats:
    B: OverlapMatrix
    N: float
    D2: float
    risk: float
    tr_b11: float
    tr_b12: float
    tr_b22: float


class OdeSystem:
    """Bundles model, spectrum, and schedule; exposes rhs/step/reduce."""

    def __init__(self, model: ModelSpec, spectrum: SpectrumK, gamma,
                 delta: float = 0.0, noise: bool = True):
        self.model = model
        self.spectrum = spectrum
        self.gamma_fn = as_gamma_fn(gamma)
        self.delta = float(delta)
        self.noise = noise
        p = model.ell + model.ell_star
        self.p = p
        self._proj = np.zeros((p, p))
        self._proj[: model.ell, : model.ell] = np.eye(model.ell)

    def averaged(self, blocks: np.ndarray) -> OverlapMatrix:
        w = self.spectrum.values * self.spectrum.mults / self.spectrum.d
        return OverlapMatrix(np.einsum("g,gij->ij", w, blocks), self.model.ell)

    def rhs(self, blocks: np.ndarray, t: float) -> np.ndarray:
        """Derivative of every group block; raises DomainExitError on U exit."""
        bavg = self.averaged(blocks)
        self.model.check_domain(bavg, t=t)
        gamma = self.gamma_fn(t)
        if gamma == 0.0 and self.delta == 0.0:
            return np.zeros_like(blocks)
        ell = self.model.ell
        hhat = self.model.grad_h(bavg).drift_matrix()
        lam = self.spectrum.values[:, None, None]
        m = 2.0 * lam * hhat[None, :, :] + self.delta * self._proj[None, :, :]
        out = -gamma * (blocks @ m + np.swapaxes(m, 1, 2) @ blocks)
        if self.noise and gamma != 0.0:
            j = np.zeros((self.p, self.p))
            j[:ell, :ell] = self.model.fisher(bavg)
            out += (gamma * gamma) * lam * j[None, :, :]
        return out

    def step_rk4(self, blocks: np.ndarray, t: float, dt: float) -> np.ndarray:
        k1 = self.rhs(blocks, t)
        k2 = self.rhs(blocks + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = self.rhs(blocks + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = self.rhs(blocks + dt * k3, t + dt)
        nxt = blocks + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return 0.5 * (nxt + np.swapaxes(nxt, 1, 2))

    def min_group_eig(self, blocks: np.ndarray) -> float:
        if self.p == 2:
            tr = blocks[:, 0, 0] + blocks[:, 1, 1]
            det = blocks[:, 0, 0] * blocks[:, 1, 1] - blocks[:, 0, 1] ** 2
            disc = np.sqrt(np.maximum(tr * tr - 4.0 * det, 0.0))
            return float(np.min(0.5 * (tr - disc)))
        return float(np.min(np.linalg.eigvalsh(blocks)))

    def project_psd(self, blocks: np.ndarray) -> np.ndarray:
        """Clip group eigenvalues below -tol_psd to zero (discretization drift)."""
        slack = tol_psd(blocks)
        if self.min_group_eig(blocks) >= -slack:
            return blocks
        w, v = np.linalg.eigh(blocks)
        w = np.where(w < -slack, 0.0, w)
        return np.einsum("gik,gk,gjk->gij", v, w, v)

    def reduce(self, blocks: np.ndarray) -> ReducedStats:
        spec = self.spectrum
        model = self.model
        ell = model.ell
        wplain = spec.mults / spec.d
        tr_groups = np.trace(blocks, axis1=1, axis2=2)
        tr_b11_g = np.trace(blocks[:, :ell, :ell], axis1=1, axis2=2)
        n_stat = float(np.dot(wplain, tr_groups))
        tr_b11_plain = float(np.dot(wplain, tr_b11_g))
        bavg = self.averaged(blocks)
        if model.ell == model.ell_star:
            d2_g = tr_b11_g \
                - 2.0 * np.trace(blocks[:, :ell, ell:], axis1=1, axis2=2) \
                + np.trace(blocks[:, ell:, ell:], axis1=1, axis2=2)
            d2 = float(np.dot(wplain, d2_g))
        else:
            d2 = float("nan")
        risk = model.h(bavg) + 0.5 * self.delta * tr_b11_plain
        return ReducedStats(
            B=bavg, N=n_stat, D2=d2, risk=risk,
            tr_b11=float(np.trace(bavg.b11)),
            tr_b12=float(np.trace(bavg.b12)) if model.ell == model.ell_star
            else float("nan"),
            tr_b22=float(np.trace(bavg.b22)),
        )


def rhs_coupled(model: ModelSpec, state: OdeState, spectrum: SpectrumK,
                gamma: float, delta: float = 0.0, noise: bool = True) -> np.ndarray:
    """One-off evaluation of the coupled derivative at a state."""
    system = OdeSystem(model, spectrum, gamma, delta, noise)
    return system.rhs(state.blocks, state.t)


def default_dt(model: ModelSpec, system: OdeSystem, blocks: np.ndarray,
               T: float) -> float:
    """min(1e-3, 0.05 / (gamma_max * lam_max * (1 + |grad h| at start)))."""
    ts = np.linspace(0.0, T, 33)
    gbar = max(abs(system.gamma_fn(float(t))) for t in ts)
    if gbar == 0.0:
        return 1e-3
    bavg = system.averaged(blocks)
    hnorm = float(np.linalg.norm(model.grad_h(bavg).full()))
    return min(1e-3, 0.05 / (gbar * system.spectrum.lam_max * (1.0 + hnorm)))


def integrate_ode(model: ModelSpec, spectrum: SpectrumK, init: np.ndarray,
                  gamma, T: float, dt: float | None = None, *,
                  delta: float = 0.0, record_stride: int | None = None,
                  n_max: float = N_MAX_DEFAULT, noise: bool = True,
                  project_every: int = 25,
                  return_state: bool = False):
    """Fixed-step RK4 on the grouped system, recording a Trajectory.

    `init` is the (G, p, p) array of initial blocks (see `init_overlaps`).
    Stops early, flagging the last row, when the averaged overlap leaves U or
    the norm statistic exceeds `n_max`; raises NumericError on non-finite
    state.  Bit-reproducible for fixed inputs.
    """
    if T <= 0 or (dt is not None and dt <= 0):
        raise ValueError("T and dt must be positive")
    system = OdeSystem(model, spectrum, gamma, delta, noise)
    blocks = np.array(init, dtype=float)
    if blocks.ndim != 3 or blocks.shape[0] != spectrum.n_groups \
            or blocks.shape[1] != system.p:
        raise ValueError(
            f"init must have shape ({spectrum.n_groups}, {system.p}, {system.p})"
        )
    if dt is None:
        dt = default_dt(model, system, blocks, T)
    n_steps = max(1, int(round(T / dt)))
    if record_stride is None:
        record_stride = max(1, n_steps // 400)

    builder = TrajectoryBuilder(meta={"solver": "ode", "model": model.name})
    stats = system.reduce(blocks)
    builder.add(0.0, stats.risk, stats.D2, stats.N, stats.tr_b11, stats.tr_b12,
                stats.tr_b22, system.gamma_fn(0.0), True)

    t = 0.0
    exited = False
    for k in range(n_steps):
        try:
            nxt = system.step_rk4(blocks, t, dt)
        except DomainExitError:
            exited = True
            break
        if not np.all(np.isfinite(nxt)):
            raise NumericError(f"non-finite ODE state after t={t:.6g}", t=t)
        blocks = nxt
        if (k + 1) % project_every == 0:
            blocks = system.project_psd(blocks)
        t = (k + 1) * dt
        if (k + 1) % record_stride == 0 or k + 1 == n_steps:
            try:
                stats = system.reduce(blocks)
                system.model.check_domain(stats.B, t=t)
            except DomainExitError:
                exited = True
                break
            builder.add(t, stats.risk, stats.D2, stats.N, stats.tr_b11,
                        stats.tr_b12, stats.tr_b22, system.gamma_fn(t), True)
            if stats.N > n_max:
                exited = True
                break

    if exited:
        # flag the stop: either a final row at the exit time or the last row
        last = builder._rows[-1]
        if t > last[0]:
            builder._rows.append((t, *last[1:8], 0))
        else:
            builder._rows[-1] = (*last[:8], 0)
    traj = builder.build()
    if return_state:
        return traj, OdeState(t=t, blocks=blocks, ell=model.ell)
    return traj


def reduce_stats(model: ModelSpec, state: OdeState,
                 spectrum: SpectrumK, delta: float = 0.0) -> ReducedStats:
    system = OdeSystem(model, spectrum, 0.0, delta)
    return system.reduce(state.blocks)


def statistic_phi(state: OdeState, spectrum: SpectrumK,
                  g: Callable[[np.ndarray], float],
                  q_coeffs=(0.0, 1.0)) -> float:
    """Spectral statistic g((1/d) sum_i q(lam_i) B_i(t)).

    `q_coeffs` are polynomial coefficients in increasing degree order; the
    default q(lam) = lam reproduces the K-weighted average driving the risk.
    """
    qvals = np.polynomial.polynomial.polyval(spectrum.values, np.asarray(q_coeffs))
    w = qvals * spectrum.mults / spectrum.d
    return float(g(np.einsum("g,gij->ij", w, state.blocks)))


def d2_derivative_check(model: ModelSpec, state: OdeState, spectrum: SpectrumK,
                        gamma: float, delta: float = 0.0,
                        h_fd: float = 1e-5) -> tuple[float, float]:
    """(lhs, rhs) for the distance-to-optimum derivative identity.

    lhs is the numerical time derivative of D^2 along the flow (central RK4
    difference); rhs is the alignment/Fisher expression

        rhs = -2 gamma A(B(t)) + (gamma^2 / d) tr(K) tr I(B(t)).

    The coefficients are twice the ones printed in the source analysis of
    this identity; the doubled form is the one the coupled system actually
    satisfies (checked against closed-form least squares and simulation),
    and it has the same descent threshold.
    """
    if delta != 0.0:
        raise ValueError("the identity is stated for delta = 0")
    if model.ell != model.ell_star:
        raise ValueError("D^2 needs ell == ell_star")
    system = OdeSystem(model, spectrum, gamma, 0.0)
    fwd = system.reduce(system.step_rk4(state.blocks, state.t, h_fd)).D2
    bwd = system.reduce(system.step_rk4(state.blocks, state.t, -h_fd)).D2
    lhs = (fwd - bwd) / (2.0 * h_fd)
    bavg = system.averaged(state.blocks)
    a_val = model.alignment(bavg)
    i_tr = float(np.trace(model.fisher(bavg)))
    rhs = -2.0 * gamma * a_val + (gamma * gamma / spectrum.d) \
        * spectrum.trace * i_tr
    return lhs, rhs
