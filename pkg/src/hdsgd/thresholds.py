"""Learning-rate thresholds, convergence certificates, and fixed-point relations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InfeasibleError, UnsupportedModelError
from .models import ModelSpec
from .overlap import OverlapMatrix


class StableRate(NamedTuple):
    gamma: float
    degenerate: bool  # no descent direction (alignment <= 0)


@dataclass(frozen=True)
class RateCertificate:
    """A certified constant learning rate and exponential decay exponent."""

    gamma: float
    rate_a: float
    regime: str  # descent_only | global_rsi | local_rsi
    inputs: dict

    def envelope(self, d2_0: float, t: np.ndarray, prefactor: float = 1.0):
        return prefactor * d2_0 * np.exp(-self.rate_a * np.asarray(t))


def gamma_stable(model: ModelSpec, B: OverlapMatrix, avg_eig: float) -> StableRate:
    """Exact local descent threshold A(B) / ((avg_eig / 2) tr I(B)).

    Returns gamma = 0 with the degenerate flag set when there is no descent
    direction (A <= 0) or the Fisher trace vanishes (already at an optimum).
    """
    if model.ell != model.ell_star:
        raise UnsupportedModelError("gamma_stable needs ell == ell_star")
    a_val = model.alignment(B)
    i_tr = float(np.trace(model.fisher(B)))
    if a_val <= 0.0 or i_tr <= 0.0:
        return StableRate(0.0, True)
    return StableRate(a_val / (0.5 * avg_eig * i_tr), False)


def descent_threshold_q(q: float, avg_eig: float) -> float:
    """Guaranteed-descent threshold 2q / avg_eig for models with q I <= A."""
    if q <= 0:
        raise ValueError("q must be positive")
    if avg_eig <= 0:
        raise ValueError("avg_eig must be positive")
    return 2.0 * q / avg_eig


def rate_rsi_global(mu_hat: float, L_hat: float, avg_eig: float,
                    lam_min: float, zeta: float) -> RateCertificate:
    """Global linear-rate certificate for mu-RSI, L-smooth outer functions.

    gamma = 2 mu zeta / (L^2 avg_eig) and a = gamma (1 - zeta) mu lam_min;
    the distance to optimum then satisfies D^2(t) <= e^{-a t} D^2(0).
    """
    if not 0.0 < zeta < 1.0:
        raise ValueError("zeta must lie in (0, 1)")
    if mu_hat > L_hat:
        raise ValueError("mu_hat cannot exceed L_hat")
    if lam_min <= 0 or avg_eig <= 0:
        raise ValueError("spectrum constants must be positive")
    gamma = 2.0 * mu_hat * zeta / (L_hat ** 2 * avg_eig)
    a = gamma * (1.0 - zeta) * mu_hat * lam_min
    return RateCertificate(gamma, a, "global_rsi", {
        "mu_hat": mu_hat, "L_hat": L_hat, "avg_eig": avg_eig,
        "lam_min": lam_min, "zeta": zeta,
    })


def rate_rsi_local(mu_hat: float, theta_hat: float, L_hat: float,
                   avg_eig: float, lam_min: float, opnorm_K: float,
                   norm_x0_minus_star: float, norm_star: float,
                   zeta: float) -> RateCertificate | None:
    """Local certificate for (mu, theta)-RSI outer functions, or None.

    The smallest admissible zeta_0 is the initialization tail mass

        zeta_0 = 10 exp( -theta / (8 |K|^2 max{|X0 - X*|^2, |X*|^2}) );

    feasibility needs zeta_0 < 1 and zeta < 1 - zeta_0, and then
    gamma = 2 mu zeta / (L^2 avg_eig), a = gamma (1 - zeta_0 - zeta) mu lam_min,
    certifying D^2(t) <= 2 e^{-a t} |X0 - X*|^2.
    """
    if not 0.0 < zeta < 1.0:
        raise ValueError("zeta must lie in (0, 1)")
    scale = 8.0 * opnorm_K ** 2 * max(norm_x0_minus_star ** 2, norm_star ** 2)
    zeta0 = 10.0 * float(np.exp(-theta_hat / scale)) if scale > 0 else 0.0
    if zeta0 >= 1.0 or zeta >= 1.0 - zeta0:
        return None
    gamma = 2.0 * mu_hat * zeta / (L_hat ** 2 * avg_eig)
    a = gamma * (1.0 - zeta0 - zeta) * mu_hat * lam_min
    return RateCertificate(gamma, a, "local_rsi", {
        "mu_hat": mu_hat, "theta_hat": theta_hat, "L_hat": L_hat,
        "avg_eig": avg_eig, "lam_min": lam_min, "zeta": zeta, "zeta0": zeta0,
    })


def logistic_local_rate(opnorm_K: float, avg_eig: float, lam_min: float,
                        norm_xhat: float, norm_x0: float,
                        classes: int = 2) -> RateCertificate:
    """Local logistic-regression rate with theta = 64 |K|^2 max{|Xhat|^2, |X0|^2}.

    gamma = e^{-sqrt(4 theta)} / (ell avg_eig) and the decay shape
    a = e^{-4 sqrt(theta)} lam_min / (ell^2 avg_eig); the absolute constant in
    front of a is not pinned down by the theory, so the certificate reports
    the shape with constant one and is marked non-certified via its regime.
    """
    ell = classes
    theta = 64.0 * opnorm_K ** 2 * max(norm_xhat ** 2, norm_x0 ** 2)
    gamma = float(np.exp(-np.sqrt(4.0 * theta))) / (ell * avg_eig)
    a = float(np.exp(-4.0 * np.sqrt(theta))) * lam_min / (ell ** 2 * avg_eig)
    return RateCertificate(gamma, a, "local_rsi", {
        "theta_hat": theta, "avg_eig": avg_eig, "lam_min": lam_min,
        "classes": classes, "certified": False,
    })


def nonexplosion_envelope(c: float, n0: float, t) -> np.ndarray | float:
    """(1 + N(0)) e^{c t}: the norm statistic never crosses this curve."""
    return (1.0 + n0) * np.exp(c * np.asarray(t, dtype=float))


def fit_envelope_c(traj_t: np.ndarray, traj_n: np.ndarray) -> float:
    """Max slope of log(1 + N) over a recorded run, for the envelope above."""
    logs = np.log1p(np.asarray(traj_n, dtype=float))
    t = np.asarray(traj_t, dtype=float)
    slopes = np.diff(logs) / np.diff(t)
    return float(np.max(slopes)) if len(slopes) else 0.0


def pr_saddle_ratio(beta: float) -> tuple[float, float] | None:
    """Both roots of pi sqrt(B22/B11) = 2 - beta +- sqrt(beta^2 - (pi^2-4)(1-beta)).

    None when the discriminant is negative (no real saddle).  The phase
    retrieval manifold fixed point of the flow at constant learning rate
    gamma satisfies this relation with beta = pr_saddle_beta(gamma).
    """
    disc = beta * beta - (np.pi ** 2 - 4.0) * (1.0 - beta)
    if disc < 0.0:
        return None
    s = float(np.sqrt(disc))
    return (2.0 - beta + s, 2.0 - beta - s)


def pr_saddle_beta(gamma: float) -> float:
    """Effective beta of the manifold fixed point at constant gamma.

    The stationarity condition of the norm block reads
    2 B11 H1 = gamma h, i.e. beta B11 H1 = h with beta = 2/gamma; solving it
    with the arcsin closed forms gives the quadratic behind pr_saddle_ratio.
    """
    return 2.0 / gamma


def pr_escape_ok(B: OverlapMatrix) -> bool:
    """Escape criterion sqrt(B22/B11) > pi/4 for the cross-overlap to grow."""
    b11, _, b22 = B.scalar_blocks()
    return bool(np.sqrt(b22 / b11) > np.pi / 4.0)
