"""Seeded Monte Carlo simulators: streaming SGD and its diffusion surrogate.

Both work in the eigenbasis of K, where the data covariance is diagonal and
one Gaussian draw per step suffices regardless of the covariance; the state
is the d x ell learner block and the constant d x ell_star target block.
Samplers are counter-based (Philox) so a (seed, stream) pair reproduces the
same path on any platform.
"""

from __future__ import annotations

import warnings

import numpy as np

from .errors import DomainExitError, NumericError
from .models import ModelSpec
from .overlap import OverlapMatrix
from .spectrum import SpectrumK
from .trajectory import Trajectory, TrajectoryBuilder
from .ode import as_gamma_fn


def make_sampler(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator; distinct streams never share draws."""
    return np.random.Generator(np.random.Philox(key=(int(seed) << 16) + int(stream)))


def overlap_of(state_x: np.ndarray, state_xs: np.ndarray,
               lam: np.ndarray, ell: int) -> OverlapMatrix:
    """B(W) = W^T diag(lam) W in eigenbasis coordinates."""
    w = np.hstack([state_x, state_xs])
    return OverlapMatrix(w.T @ (lam[:, None] * w), ell)


def grad_risk(model: ModelSpec, spectrum: SpectrumK, state_x: np.ndarray,
              state_xs: np.ndarray) -> np.ndarray:
    """Population risk gradient, one row per eigendirection.

    Row i equals lam_i [ (h1 + h1^T) x_i + 2 h2 x*_i ] with the gradient
    blocks evaluated at B(W).
    """
    lam = spectrum.expand()
    b = overlap_of(state_x, state_xs, lam, model.ell)
    model.check_domain(b)
    g = model.grad_h(b)
    return lam[:, None] * (state_x @ (g.h1 + g.h1.T) + 2.0 * state_xs @ g.h2.T)


def _record(builder: TrajectoryBuilder, model: ModelSpec, lam, t, x, xs,
            gamma_t, delta) -> OverlapMatrix:
    b = overlap_of(x, xs, lam, model.ell)
    norm_x = float(np.sum(x * x))
    norm_w = norm_x + float(np.sum(xs * xs))
    risk = model.risk_closure(b) + 0.5 * delta * norm_x
    if model.ell == model.ell_star:
        d2 = float(np.sum((x - xs) ** 2))
        tr_b12 = float(np.trace(b.b12))
    else:
        d2, tr_b12 = float("nan"), float("nan")
    builder.add(t, risk, d2, norm_w, float(np.trace(b.b11)), tr_b12,
                float(np.trace(b.b22)), gamma_t, True)
    return b


def run_sgd(model: ModelSpec, spectrum: SpectrumK, x0: np.ndarray,
            xstar: np.ndarray, gamma, d: int, T: float, seed: int = 0, *,
            delta: float = 0.0, record_stride: int | None = None,
            stream: int = 0) -> Trajectory:
    """Streaming SGD for k = 0 .. floor(T d) - 1 with step gamma(k/d)/d.

    `x0` and `xstar` are eigenbasis coordinate arrays of shapes (d, ell) and
    (d, ell_star).  Statistics are recorded every `record_stride` iterations
    (default d // 100: one hundred frames per unit time) by recomputing the
    overlap matrix from scratch.
    """
    if d != spectrum.d:
        raise ValueError(f"d={d} does not match spectrum d={spectrum.d}")
    gamma_fn = as_gamma_fn(gamma)
    x = np.array(x0, dtype=float).reshape(d, model.ell)
    xs = np.array(xstar, dtype=float).reshape(d, model.ell_star)
    lam = spectrum.expand()
    sqrt_lam = np.sqrt(lam)
    rng = make_sampler(seed, stream)
    n_steps = int(np.floor(T * d))
    if record_stride is None:
        record_stride = max(1, d // 100)

    builder = TrajectoryBuilder(meta={"solver": "sgd", "model": model.name,
                                      "seed": seed, "d": d})
    _record(builder, model, lam, 0.0, x, xs, gamma_fn(0.0), delta)
    exited = False
    t = 0.0
    for k in range(n_steps):
        v = rng.standard_normal(d)
        eps = rng.standard_normal(model.ell_star)
        a = sqrt_lam * v
        r = np.concatenate([x.T @ a, xs.T @ a])
        g = model.grad_f(r, eps)
        gam = gamma_fn(k / d)
        x -= (gam / d) * (np.outer(a, g) + delta * x)
        t = (k + 1) / d
        if (k + 1) % record_stride == 0 or k + 1 == n_steps:
            if not np.all(np.isfinite(x)):
                raise NumericError(
                    f"non-finite SGD iterate at step {k + 1}", t=t)
            try:
                _record(builder, model, lam, t, x, xs, gamma_fn(t), delta)
            except DomainExitError:
                exited = True
                break
    if exited:
        last = builder._rows[-1]
        builder._rows.append((t, *last[1:8], 0))
    return builder.build()


def run_hsgd(model: ModelSpec, spectrum: SpectrumK, x0: np.ndarray,
             xstar: np.ndarray, gamma, d: int, T: float,
             dt: float | None = None, seed: int = 0, *, delta: float = 0.0,
             record_stride: int | None = None, stream: int = 0) -> Trajectory:
    """Euler-Maruyama for the diffusion surrogate of SGD.

    Drift is the population risk gradient; the noise on row i is
    gamma sqrt(lam_i dt / d) S xi with S the symmetric square root of the
    Fisher matrix (negative eigenvalues clamped to zero) and xi a fresh
    standard normal per row per step.
    """
    if d != spectrum.d:
        raise ValueError(f"d={d} does not match spectrum d={spectrum.d}")
    if dt is None:
        dt = 1.0 / d
    elif dt > 1.0 / d:
        warnings.warn(f"hsgd dt={dt:g} is coarser than 1/d={1.0/d:g}; the "
                      "diffusion matches SGD's time granularity at dt <= 1/d",
                      stacklevel=2)
    gamma_fn = as_gamma_fn(gamma)
    x = np.array(x0, dtype=float).reshape(d, model.ell)
    xs = np.array(xstar, dtype=float).reshape(d, model.ell_star)
    lam = spectrum.expand()
    sqrt_lam = np.sqrt(lam)
    rng = make_sampler(seed, stream)
    n_steps = max(1, int(round(T / dt)))
    if record_stride is None:
        record_stride = max(1, int(round((1.0 / dt) / 100.0)))

    builder = TrajectoryBuilder(meta={"solver": "hsgd", "model": model.name,
                                      "seed": seed, "d": d})
    _record(builder, model, lam, 0.0, x, xs, gamma_fn(0.0), delta)
    exited = False
    t = 0.0
    for k in range(n_steps):
        b = overlap_of(x, xs, lam, model.ell)
        try:
            model.check_domain(b, t=t)
            g = model.grad_h(b)
            fish = model.fisher(b)
        except DomainExitError:
            exited = True
            break
        evals, evecs = np.linalg.eigh(0.5 * (fish + fish.T))
        root = evecs @ np.diag(np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T
        gam = gamma_fn(t)
        drift = lam[:, None] * (x @ (g.h1 + g.h1.T) + 2.0 * xs @ g.h2.T) \
            + delta * x
        xi = rng.standard_normal((d, model.ell))
        x = x - dt * gam * drift \
            + gam * np.sqrt(dt / d) * (sqrt_lam[:, None] * (xi @ root))
        t = (k + 1) * dt
        if not np.all(np.isfinite(x)):
            raise NumericError(f"non-finite diffusion state at t={t:.6g}", t=t)
        if (k + 1) % record_stride == 0 or k + 1 == n_steps:
            try:
                _record(builder, model, lam, t, x, xs, gamma_fn(t), delta)
            except DomainExitError:
                exited = True
                break
    if exited:
        last = builder._rows[-1]
        if t > last[0]:
            builder._rows.append((t, *last[1:8], 0))
        else:
            builder._rows[-1] = (*last[:8], 0)
    return builder.build()
