"""Scalar resolvent / Volterra solvers, the cross-check oracle for the ODEs.

For scalar models (ell = ell_star = 1) the fundamental matrix of the flow
decouples into two first-order equations, giving closed expressions for the
overlap blocks in terms of

    Phi11(t, lam) = exp( int_0^t gamma_s (2 lam h11(B(s)) + delta) ds ),
    Phi21(t, lam) = int_0^t 2 gamma_s lam h21(B(s)) Phi11(s, lam) ds,

plus one memory integral carrying the gradient-noise forcing.  Phi11 is kept
in the log domain because only ratios Phi11(s)/Phi11(t) ever enter; the
memory integral and Phi21 are maintained incrementally in a rescaled form
that is algebraically identical to the trapezoid rule on the full history.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainExitError, InfeasibleError, NumericError
from .models import ModelSpec
from .overlap import OverlapMatrix
from .spectrum import SpectrumK
from .trajectory import Trajectory, TrajectoryBuilder
from .ode import as_gamma_fn


def _group_coords(x, spectrum: SpectrumK, name: str) -> np.ndarray:
    """Accept per-coordinate (d,) or per-group (G,) eigenbasis coordinates."""
    x = np.asarray(x, dtype=float)
    if x.shape == (spectrum.n_groups,):
        return x
    if x.shape == (spectrum.d,):
        if spectrum.n_groups == spectrum.d:
            return x
        # collapse to groups, requiring identical coordinates within a group
        out = np.empty(spectrum.n_groups)
        pos = 0
        for g, m in enumerate(spectrum.mults):
            seg = x[pos: pos + m]
            if not np.allclose(seg, seg[0], rtol=0, atol=1e-12):
                raise ValueError(
                    f"{name}: coordinates differ within eigenvalue group {g}; "
                    "grouped storage needs identical rows per group"
                )
            out[g] = seg[0]
            pos += m
        return out
    raise ValueError(f"{name} must have shape ({spectrum.d},) or "
                     f"({spectrum.n_groups},)")


class _ScalarResolventState:
    """Log-domain Phi tables and the rescaled memory integral."""

    def __init__(self, spectrum: SpectrumK, x0: np.ndarray, xs: np.ndarray):
        self.spec = spectrum
        self.x0 = x0
        self.xs = xs
        g = spectrum.n_groups
        self.log_phi11 = np.zeros(g)
        self.psi = np.zeros(g)      # Phi21 / Phi11
        self.mem = np.zeros(g)      # int gamma^2 I(s) Phi11(s)^2 ds / Phi11(t)^2

    def blocks(self) -> tuple[float, float, float, float, float]:
        """(b11, b12, b22, n11, n12): K-weighted and plain overlap entries."""
        spec = self.spec
        m, lam = spec.mults, spec.values
        decay = np.exp(-self.log_phi11)
        a = self.x0 * decay - self.xs * self.psi
        b11 = float(np.dot(m * lam, a * a)) \
            + float(np.dot(m * lam ** 2, self.mem)) / spec.d
        b12 = float(np.dot(m * lam, self.x0 * self.xs * decay
                           - self.xs ** 2 * self.psi))
        b22 = float(np.dot(m * lam, self.xs ** 2))
        n11 = float(np.dot(m, a * a)) + float(np.dot(m * lam, self.mem)) / spec.d
        n12 = float(np.dot(m, self.x0 * self.xs * decay - self.xs ** 2 * self.psi))
        return b11, b12, b22, n11, n12


def solve_scalar_resolvent(model: ModelSpec, spectrum: SpectrumK, x0, xstar,
                           gamma, T: float, dt: float = 1e-3, *,
                           delta: float = 0.0, record_stride: int | None = None,
                           corrector_iters: int = 1) -> Trajectory:
    """Forward time-stepping of the scalar-setting resolvent formulas.

    `x0` and `xstar` are eigenbasis coordinate vectors of the initial learner
    and the target (per coordinate or per eigenvalue group).  Entirely
    independent of the RK4 ODE engine: the only shared ingredients are the
    model's moment functions.
    """
    if model.ell != 1 or model.ell_star != 1:
        raise ValueError("solve_scalar_resolvent needs a scalar model")
    gamma_fn = as_gamma_fn(gamma)
    x0 = _group_coords(x0, spectrum, "x0")
    xs = _group_coords(xstar, spectrum, "xstar")
    state = _ScalarResolventState(spectrum, x0, xs)
    lam = spectrum.values
    n_steps = max(1, int(round(T / dt)))
    if record_stride is None:
        record_stride = max(1, n_steps // 400)

    def moment_rates(t: float, blocks):
        b11, b12, b22, _, _ = blocks
        bmat = OverlapMatrix.from_blocks([[b11]], [[b12]], [[b22]])
        model.check_domain(bmat, t=t)
        g = model.grad_h(bmat)
        gam = gamma_fn(t)
        r = gam * (2.0 * lam * float(g.h1[0, 0]) + delta)
        q = 2.0 * gam * lam * float(g.h2[0, 0])
        i_val = float(model.fisher(bmat)[0, 0])
        return r, q, gam * gam * i_val

    builder = TrajectoryBuilder(meta={"solver": "volterra", "model": model.name})

    def record(t: float, blocks) -> None:
        b11, b12, b22, n11, n12 = blocks
        bmat = OverlapMatrix.from_blocks([[b11]], [[b12]], [[b22]])
        risk = model.h(bmat) + 0.5 * delta * n11
        d2 = n11 - 2.0 * n12 + float(np.dot(spectrum.mults, xs * xs))
        builder.add(t, risk, d2, n11 + float(np.dot(spectrum.mults, xs * xs)),
                    b11, b12, b22, gamma_fn(t), True)

    blocks = state.blocks()
    record(0.0, blocks)
    try:
        r_cur, q_cur, gi_cur = moment_rates(0.0, blocks)
    except DomainExitError:
        raise
    t = 0.0
    exited = False
    for k in range(n_steps):
        t_next = (k + 1) * dt
        # predictor: freeze rates at the left endpoint, then correct
        r_nxt, q_nxt, gi_nxt = r_cur, q_cur, gi_cur
        try:
            for _ in range(corrector_iters + 1):
                dlog = 0.5 * dt * (r_cur + r_nxt)
                e = np.exp(-dlog)
                log_phi11 = state.log_phi11 + dlog
                psi = state.psi * e + 0.5 * dt * (q_cur * e + q_nxt)
                mem = state.mem * e * e + 0.5 * dt * (gi_cur * e * e + gi_nxt)
                trial = _ScalarResolventState(spectrum, x0, xs)
                trial.log_phi11, trial.psi, trial.mem = log_phi11, psi, mem
                blocks_next = trial.blocks()
                r_nxt, q_nxt, gi_nxt = moment_rates(t_next, blocks_next)
        except DomainExitError:
            exited = True
            break
        if not np.all(np.isfinite(log_phi11)) or not np.isfinite(blocks_next[0]):
            raise NumericError(f"non-finite resolvent state after t={t:.6g}", t=t)
        state.log_phi11, state.psi, state.mem = log_phi11, psi, mem
        r_cur, q_cur, gi_cur = r_nxt, q_nxt, gi_nxt
        blocks = blocks_next
        t = t_next
        if (k + 1) % record_stride == 0 or k + 1 == n_steps:
            record(t, blocks)
    if exited:
        last = builder._rows[-1]
        if t > last[0]:
            builder._rows.append((t, *last[1:8], 0))
        else:
            builder._rows[-1] = (*last[:8], 0)
    return builder.build()


def solve_lsq_volterra(spectrum: SpectrumK, x0, xstar, gamma: float,
                       eta: float = 0.0, T: float = 10.0, dt: float = 1e-3,
                       record_stride: int | None = None) -> Trajectory:
    """Least-squares risk via the convolution Volterra equation.

    risk(t) = (1/2) sum_i lam_i u_i^2 e^{-2 gamma lam_i t} + eta^2/2
              + (gamma^2/d) int_0^t [sum_i lam_i^2 e^{-2 gamma lam_i (t-s)}]
                risk(s) ds,

    with u the eigenbasis coordinates of X0 - X*.  The exponential kernel
    makes the trapezoid rule incremental, and the implicit endpoint value is
    solved exactly (the equation is linear in risk(t)).  Constant learning
    rate, no regularizer.
    """
    gamma = float(gamma)
    x0 = _group_coords(x0, spectrum, "x0")
    xs = _group_coords(xstar, spectrum, "xstar")
    u2 = (x0 - xs) ** 2
    m, lam = spectrum.mults, spectrum.values
    d = spectrum.d
    n_steps = max(1, int(round(T / dt)))
    if record_stride is None:
        record_stride = max(1, n_steps // 1000)

    decay = np.exp(-2.0 * gamma * lam * dt)
    kernel_w = m * lam ** 2 / d            # per-group kernel weight
    self_w = gamma ** 2 * 0.5 * dt * float(np.sum(kernel_w))
    if self_w >= 1.0:
        raise NumericError("dt too large for the implicit Volterra step")

    def forcing(t: float) -> float:
        return 0.5 * float(np.dot(m * lam, u2 * np.exp(-2.0 * gamma * lam * t))) \
            + 0.5 * eta * eta

    h = forcing(0.0)
    mem = np.zeros_like(lam)              # int e^{-2 gamma lam (t-s)} h(s) ds
    builder = TrajectoryBuilder(meta={"solver": "lsq_volterra"})
    nan = float("nan")
    builder.add(0.0, h, nan, nan, nan, nan, nan, gamma, True)
    for k in range(n_steps):
        t_next = (k + 1) * dt
        mem_half = decay * (mem + 0.5 * dt * h)
        h_next = (forcing(t_next)
                  + gamma ** 2 * float(np.dot(kernel_w, mem_half))) / (1.0 - self_w)
        mem = mem_half + 0.5 * dt * h_next
        h = h_next
        if (k + 1) % record_stride == 0 or k + 1 == n_steps:
            builder.add(t_next, h, nan, nan, nan, nan, nan, gamma, True)
    return builder.build()


def lsq_malthus_rate(spectrum: SpectrumK, gamma: float, tol: float = 1e-10) -> float:
    """Decay exponent of the least-squares Volterra solution.

    Solves the kernel balance (gamma^2/d) sum_i lam_i^2 / (2 gamma lam_i - r) = 1
    for r < 2 gamma lam_min by bisection; returns the pure-forcing rate
    2 gamma lam_min when no balancing root exists below it.
    """
    gamma = float(gamma)
    threshold = 2.0 * spectrum.d / spectrum.trace
    if gamma >= threshold:
        raise InfeasibleError(
            f"gamma={gamma:g} at or above the divergence threshold {threshold:g}"
        )
    if gamma <= 0:
        raise InfeasibleError("gamma must be positive")
    m, lam = spectrum.mults, spectrum.values
    d = spectrum.d

    def kernel_mass(r: float) -> float:
        return gamma ** 2 / d * float(np.sum(m * lam ** 2 / (2.0 * gamma * lam - r)))

    hi = 2.0 * gamma * spectrum.lam_min
    lo = 0.0
    if kernel_mass(lo) >= 1.0:  # defensive; excluded by the threshold check
        return hi
    upper = hi * (1.0 - 1e-15)
    if kernel_mass(upper) < 1.0:
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if kernel_mass(min(mid, upper)) < 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
