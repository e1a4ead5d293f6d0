"""Model zoo: outer functions and their Gaussian moment functions.

Each model knows five things about itself, all as functions of the overlap
matrix B of (x, x*) ~ N(0, B):

  * risk h(B) = E f(x + x*),
  * the symmetric-convention gradient of h (see `GradH`),
  * the Fisher matrix I(B) = E[grad_x f tensor grad_x f],
  * the per-sample gradient grad_x f(r; eps) used by the SGD simulator,
  * membership in the admissible open set U.

Alignment functionals come for free from the gradient of h:

  A(B)  = E<x - x*, grad_x f> = 2 tr(B11 h1) + 2 tr(B12 h2^T)
          - 2 tr(B12^T h1) - 2 tr(B22 h2^T),
  A0(B) = E<x, grad_x f>      = 2 tr(B11 h1) + 2 tr(B12 h2^T),

which is the chain rule for the risk written in overlap coordinates.  Models
whose outer function is not differentiable enough for that identity (the sign
activation) override the alignment methods.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf, logsumexp

from .errors import ConfigurationError, DomainExitError, UnsupportedModelError
from .moments import QuadratureScheme, gauss_expect
from .overlap import GradH, OverlapMatrix, tol_psd

TOL_DOMAIN = 1e-8  # relative clamp keeping arcsin arguments off the boundary


def _logistic(y):
    out = np.empty_like(y, dtype=float)
    pos = y >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-y[pos]))
    ey = np.exp(y[~pos])
    out[~pos] = ey / (1.0 + ey)
    return out


def _log1pexp(y):
    return np.logaddexp(0.0, y)


def _softmax(y, axis=-1):
    shifted = y - y.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


class ModelSpec:
    """A model family member: dimensions, noise level, moment functions.

    Instances are immutable after construction and safe to share across
    threads; every method is a pure function of its arguments.
    """

    #: metadata for the threshold calculators, where the constants are known
    mu_hat: float | None = None
    L_hat: float | None = None

    def __init__(self, name: str, ell: int, ell_star: int, noise_level: float = 0.0,
                 parameters: dict | None = None):
        if ell < 1 or ell_star < 1:
            raise ConfigurationError("ell and ell_star must be >= 1")
        if noise_level < 0:
            raise ConfigurationError("noise level must be >= 0")
        self.name = name
        self.ell = ell
        self.ell_star = ell_star
        self.noise_level = noise_level
        self.parameters = dict(parameters or {})

    # -- interface ---------------------------------------------------------

    def h(self, B: OverlapMatrix) -> float:
        raise NotImplementedError

    def grad_h(self, B: OverlapMatrix) -> GradH:
        raise NotImplementedError

    def fisher(self, B: OverlapMatrix) -> np.ndarray:
        raise NotImplementedError

    def grad_f(self, r: np.ndarray, eps: np.ndarray) -> np.ndarray:
        """Per-sample loss gradient at r = (x, x*) with noise eps."""
        raise NotImplementedError

    def in_domain(self, B: OverlapMatrix) -> bool:
        return True

    def check_domain(self, B: OverlapMatrix, t: float | None = None) -> None:
        if not self.in_domain(B):
            raise DomainExitError(
                f"{self.name}: overlap matrix left the admissible set U",
                blocks=B.mat.copy(), t=t,
            )

    # -- derived quantities ------------------------------------------------

    def alignment(self, B: OverlapMatrix) -> float:
        """A(B) = E<x - x*, grad_x f>; requires ell = ell_star."""
        if self.ell != self.ell_star:
            raise UnsupportedModelError(
                f"{self.name}: alignment A needs ell == ell_star"
            )
        g = self.grad_h(B)
        return 2.0 * float(
            np.trace(B.b11 @ g.h1) + np.trace(B.b12 @ g.h2.T)
            - np.trace(B.b12.T @ g.h1) - np.trace(B.b22 @ g.h2.T)
        )

    def alignment0(self, B: OverlapMatrix) -> float:
        """A0(B) = E<x, grad_x f>."""
        g = self.grad_h(B)
        return 2.0 * float(np.trace(B.b11 @ g.h1) + np.trace(B.b12 @ g.h2.T))

    def sample_value(self, r: np.ndarray, eps: np.ndarray) -> np.ndarray:
        """Per-sample loss f(r; eps), used by Monte Carlo oracles in tests."""
        raise NotImplementedError

    def risk_closure(self, B: OverlapMatrix) -> float:
        """Risk extended continuously to the closure of U.

        Simulators record overlap matrices that can sit exactly on the
        boundary (e.g. iterates at the global minimizer); models whose h is
        continuous there override this with a clamped evaluation.
        """
        return self.h(B)

    def _check_psd(self, B: OverlapMatrix) -> None:
        if not B.is_psd(tol_psd(B.mat)):
            raise DomainExitError(
                f"{self.name}: overlap matrix not PSD within tolerance",
                blocks=B.mat.copy(),
            )


class LeastSquares(ModelSpec):
    """Multivariate linear regression with squared loss and additive noise."""

    mu_hat = 1.0
    L_hat = 1.0

    def __init__(self, ell: int = 1, noise_level: float = 0.0):
        super().__init__("least_squares", ell, ell, noise_level,
                         {"ell": ell, "noise": noise_level})

    def _delta_block(self, B: OverlapMatrix) -> np.ndarray:
        return B.b11 - B.b12 - B.b12.T + B.b22

    def h(self, B: OverlapMatrix) -> float:
        return 0.5 * float(np.trace(self._delta_block(B))) \
            + 0.5 * self.noise_level ** 2 * self.ell

    def grad_h(self, B: OverlapMatrix) -> GradH:
        eye = np.eye(self.ell)
        return GradH(0.5 * eye, -0.5 * eye, 0.5 * eye)

    def fisher(self, B: OverlapMatrix) -> np.ndarray:
        return self._delta_block(B) + self.noise_level ** 2 * np.eye(self.ell)

    def grad_f(self, r: np.ndarray, eps: np.ndarray) -> np.ndarray:
        x, xs = r[..., : self.ell], r[..., self.ell :]
        return x - xs - self.noise_level * eps

    def sample_value(self, r: np.ndarray, eps: np.ndarray) -> np.ndarray:
        g = self.grad_f(r, eps)
        return 0.5 * np.sum(g * g, axis=-1)


class BinaryLogistic(ModelSpec):
    """Two-class logistic regression in the pinned scalar parameterization.

    All moment functions reduce by Stein's lemma to one-dimensional integrals
    except the Fisher matrix and the per-sample alignment checks, which stay
    two-dimensional.
    """

    L_hat = 0.25

    def __init__(self, scheme: QuadratureScheme | None = None):
        super().__init__("binary_logistic", 1, 1, 0.0, {})
        self.scheme = scheme or QuadratureScheme(64)

    @staticmethod
    def _sigma_p(y):
        s = _logistic(y)
        return s * (1.0 - s)

    @staticmethod
    def _sigma_ppp(y):
        s = _logistic(y)
        return s * (1.0 - s) * (1.0 - 6.0 * s + 6.0 * s * s)

    def _e1(self, func, var: float) -> float:
        """E func(sqrt(var) w) for standard normal w, via 1-D quadrature."""
        s = np.sqrt(max(var, 0.0))
        cov = np.array([[1.0]])
        return float(gauss_expect(lambda z: func(s * z[:, 0]), cov, self.scheme))

    def h(self, B: OverlapMatrix) -> float:
        b11, b12, b22 = B.scalar_blocks()
        return self._e1(_log1pexp, b11) - b12 * self._e1(self._sigma_p, b22)

    def grad_h(self, B: OverlapMatrix) -> GradH:
        b11, b12, b22 = B.scalar_blocks()
        h1 = 0.5 * self._e1(self._sigma_p, b11)
        h2 = -0.5 * self._e1(self._sigma_p, b22)
        h3 = -0.5 * b12 * self._e1(self._sigma_ppp, b22)
        return GradH(np.array([[h1]]), np.array([[h2]]), np.array([[h3]]))

    def fisher(self, B: OverlapMatrix) -> np.ndarray:
        self._check_psd(B)
        val = gauss_expect(
            lambda z: (_logistic(z[:, 0]) - _logistic(z[:, 1])) ** 2,
            B, self.scheme,
        )
        return np.array([[val]])

    def grad_f(self, r: np.ndarray, eps: np.ndarray) -> np.ndarray:
        x, xs = r[..., :1], r[..., 1:]
        return _logistic(x) - _logistic(xs)

    def sample_value(self, r: np.ndarray, eps: np.ndarray) -> np.ndarray:
        x, xs = r[..., 0], r[..., 1]
        return -_logistic(xs) * x + _log1pexp(x)

    def kl(self, B: OverlapMatrix) -> float:
        """KL divergence of the fitted class probabilities from the truth.

        Equals the cross entropy h(B) minus the teacher's own entropy, which
        is h evaluated with x collapsed onto x*.
        """
        b22 = float(B.b22[0, 0])
        collapsed = OverlapMatrix.from_blocks([[b22]], [[b22]], [[b22]])
        return self.h(B) - self.h(collapsed)


class MulticlassLogistic(ModelSpec):
    """Softmax regression with `classes` classes, pinned to classes-1 dims.

    The last logit is pinned to zero to remove the all-ones degeneracy, so
    ell = ell_star = classes - 1.  Moment functions have no closed form; they
    are Gauss-Hermite quadratures, with the gradient of h computed as half
    the expected Hessian of the outer function (Price's theorem), which keeps
    it independent of finite differences of h.
    """

    L_hat = 1.0

    def __init__(self, classes: int = 3, scheme: QuadratureScheme | None = None):
        if classes < 2:
            raise ConfigurationError("multiclass logistic needs >= 2 classes")
        ell = classes - 1
        if 2 * ell > 4:
            raise ConfigurationError(
                "more than 3 classes would need >4-dimensional deterministic "
                "quadrature; not supported"
            )
        super().__init__("multiclass_logistic", ell, ell, 0.0, {"classes": classes})
        self.classes = classes
        # the integrands are entire with Gaussian decay, so even the 4-D
        # tensor rule converges long before the axis count matters
        nodes = 64 if ell == 1 else 16
        self.scheme = scheme or QuadratureScheme(nodes)

    def _embed(self, y: np.ndarray) -> np.ndarray:
        pad = np.zeros(y.shape[:-1] + (1,))
        return np.concatenate([y, pad], axis=-1)

    def _f_batch(self, z: np.ndarray) -> np.ndarray:
        x = self._embed(z[:, : self.ell])
        xs = self._embed(z[:, self.ell :])
        ps = _softmax(xs)
        return -np.sum(ps * x, axis=-1) + logsumexp(x, axis=-1)

    def h(self, B: OverlapMatrix) -> float:
        self._check_psd(B)
        return float(gauss_expect(self._f_batch, B, self.scheme))

    def _softmax_jacobian(self, p: np.ndarray) -> np.ndarray:
        # J_kj = p_k (delta_kj - p_j), batched
        eye = np.eye(p.shape[-1])
        return p[..., :, None] * (eye - p[..., None, :])

    def _softmax_hessian_contract(self, p: np.ndarray, v: np.ndarray) -> np.ndarray:
        # sum_k v_k * d2 p_k / dy_i dy_j, batched over leading axis
        # d2 p_k / dy_i dy_j = p_k [d_ki d_kj - d_ki p_j - d_kj p_i
        #                            - p_i d_ij + 2 p_i p_j]
        n, m = p.shape
        eye = np.eye(m)
        pv = p * v                                            # (n, m)
        t1 = pv[:, :, None] * eye[None, :, :]                 # d_ki d_kj term
        t2 = -pv[:, :, None] * p[:, None, :]                  # -d_ki p_j
        t3 = -pv[:, None, :] * p[:, :, None]                  # -d_kj p_i
        s = pv.sum(axis=1)[:, None, None]
        t4 = -s * (p[:, :, None] * eye[None, :, :])           # -p_i d_ij sum_k
        t5 = 2.0 * s * (p[:, :, None] * p[:, None, :])        # 2 p_i p_j sum_k
        return t1 + t2 + t3 + t4 + t5

    def _hess_f_batch(self, z: np.ndarray) -> np.ndarray:
        ell = self.ell
        x = self._embed(z[:, :ell])
        xs = self._embed(z[:, ell:])
        p = _softmax(x)
        ps = _softmax(xs)
        hxx = self._softmax_jacobian(p)[:, :ell, :ell]
        hxxs = -self._softmax_jacobian(ps)[:, :ell, :ell]
        hxsxs = -self._softmax_hessian_contract(ps, x)[:, :ell, :ell]
        n = z.shape[0]
        out = np.zeros((n, 2 * ell, 2 * ell))
        out[:, :ell, :ell] = hxx
        out[:, :ell, ell:] = hxxs
        out[:, ell:, :ell] = np.swapaxes(hxxs, 1, 2)
        out[:, ell:, ell:] = hxsxs
        return out

    def grad_h(self, B: OverlapMatrix) -> GradH:
        self._check_psd(B)
        hess = gauss_expect(self._hess_f_batch, B, self.scheme)
        half = 0.5 * np.asarray(hess)
        half = 0.5 * (half + half.T)
        ell = self.ell
        return GradH(half[:ell, :ell], half[:ell, ell:], half[ell:, ell:])

    def fisher(self, B: OverlapMatrix) -> np.ndarray:
        self._check_psd(B)

        def integrand(z):
            g = self.grad_f(z, None)
            return g[:, :, None] * g[:, None, :]

        return np.asarray(gauss_expect(integrand, B, self.scheme))

    def grad_f(self, r: np.ndarray, eps: np.ndarray) -> np.ndarray:
        x = self._embed(r[..., : self.ell])
        xs = self._embed(r[..., self.ell :])
        return (_softmax(x) - _softmax(xs))[..., : self.ell]

    def sample_value(self, r: np.ndarray, eps: np.ndarray) -> np.ndarray:
        return self._f_batch(np.atleast_2d(r))

    def kl(self, B: OverlapMatrix) -> float:
        ell = self.ell
        b22 = B.b22
        collapsed = OverlapMatrix.from_blocks(b22, b22, b22)
        return self.h(B) - self.h(collapsed)


class PhaseRetrieval(ModelSpec):
    """Lipschitz phase retrieval: f = (|x| - |x*|)^2 / 2, scalar setting.

    Differentiability is lost at B12^2 = B11 B22 and at B11 = 0, so the
    admissible set U keeps a relative margin `TOL_DOMAIN` from both.
    """

    def __init__(self):
        super().__init__("phase_retrieval", 1, 1, 0.0, {})

    def in_domain(self, B: OverlapMatrix) -> bool:
        b11, b12, b22 = B.scalar_blocks()
        return b11 > TOL_DOMAIN and b12 * b12 < (1.0 - TOL_DOMAIN) * b11 * b22

    def h(self, B: OverlapMatrix) -> float:
        self.check_domain(B)
        b11, b12, b22 = B.scalar_blocks()
        rho = b12 / np.sqrt(b11 * b22)
        q = b11 * b22 - b12 * b12
        return 0.5 * b11 + 0.5 * b22 - (2.0 / np.pi) * (
            b12 * np.arcsin(rho) + np.sqrt(q)
        )

    def grad_h(self, B: OverlapMatrix) -> GradH:
        self.check_domain(B)
        b11, b12, b22 = B.scalar_blocks()
        q = b11 * b22 - b12 * b12
        rho = b12 / np.sqrt(b11 * b22)
        h1 = 0.5 - np.sqrt(q) / (np.pi * b11)
        h2 = -np.arcsin(rho) / np.pi
        h3 = 0.5 - np.sqrt(q) / (np.pi * b22)
        return GradH(np.array([[h1]]), np.array([[h2]]), np.array([[h3]]))

    def fisher(self, B: OverlapMatrix) -> np.ndarray:
        # exactly 2 h, same code path as the risk
        return np.array([[2.0 * self.h(B)]])

    def risk_closure(self, B: OverlapMatrix) -> float:
        b11, b12, b22 = B.scalar_blocks()
        denom = np.sqrt(max(b11 * b22, 0.0))
        rho = np.clip(b12 / denom, -1.0, 1.0) if denom > 0 else 0.0
        q = max(b11 * b22 - b12 * b12, 0.0)
        return 0.5 * b11 + 0.5 * b22 - (2.0 / np.pi) * (
            b12 * np.arcsin(rho) + np.sqrt(q))

    def grad_f(self, r: np.ndarray, eps: np.ndarray) -> np.ndarray:
        x, xs = r[..., :1], r[..., 1:]
        return x - np.sign(x) * np.abs(xs)

    def sample_value(self, r: np.ndarray, eps: np.ndarray) -> np.ndarray:
        x, xs = r[..., 0], r[..., 1]
        return 0.5 * (np.abs(x) - np.abs(xs)) ** 2


class PhaseChase(ModelSpec):
    """Two learners chasing each other: f = (r1^2 - r2^2)^2 with no target.

    ell = 2 and the latent block is a zero target, so B12 and B22 vanish
    identically along the dynamics; h and the Fisher matrix depend on the
    learner block Q = B11 alone.
    """

    def __init__(self):
        super().__init__("phase_chase", 2, 1, 0.0, {})

    def h(self, B: OverlapMatrix) -> float:
        q = B.b11
        q11, q12, q22 = q[0, 0], q[0, 1], q[1, 1]
        return 3.0 * (q11 ** 2 + q22 ** 2) - 2.0 * q11 * q22 - 4.0 * q12 ** 2

    def grad_h(self, B: OverlapMatrix) -> GradH:
        q = B.b11
        q11, q12, q22 = q[0, 0], q[0, 1], q[1, 1]
        h1 = np.array([
            [6.0 * q11 - 2.0 * q22, -4.0 * q12],
            [-4.0 * q12, 6.0 * q22 - 2.0 * q11],
        ])
        return GradH(h1, np.zeros((2, 1)), np.zeros((1, 1)))

    def fisher(self, B: OverlapMatrix) -> np.ndarray:
        q = B.b11
        q11, q12, q22 = q[0, 0], q[0, 1], q[1, 1]
        g11 = 15 * q11 ** 3 - 6 * q11 ** 2 * q22 - 24 * q11 * q12 ** 2 \
            + 3 * q11 * q22 ** 2 + 12 * q12 ** 2 * q22
        g12 = -(15 * q12 * q22 ** 2 + 15 * q12 * q11 ** 2
                - 18 * q11 * q12 * q22 - 12 * q12 ** 3)
        g22 = 15 * q22 ** 3 - 6 * q22 ** 2 * q11 - 24 * q22 * q12 ** 2 \
            + 3 * q22 * q11 ** 2 + 12 * q12 ** 2 * q11
        return 16.0 * np.array([[g11, g12], [g12, g22]])

    def grad_f(self, r: np.ndarray, eps: np.ndarray) -> np.ndarray:
        r1, r2 = r[..., 0], r[..., 1]
        common = 4.0 * (r1 ** 2 - r2 ** 2)
        return np.stack([common * r1, -common * r2], axis=-1)

    def sample_value(self, r: np.ndarray, eps: np.ndarray) -> np.ndarray:
        r1, r2 = r[..., 0], r[..., 1]
        return (r1 ** 2 - r2 ** 2) ** 2


class SingleIndexActivation(ModelSpec):
    """Squared loss on a single-index teacher through an activation function.

    h comes from the classical Gaussian kernel table for the supported
    activations; the Fisher matrix and per-sample gradients follow from
    grad_x f = sigma'(x) (sigma(x) - sigma(x*)).
    """

    ACTIVATIONS = ("relu", "erf", "sign", "cos", "sin", "linear")

    def __init__(self, activation: str, scheme: QuadratureScheme | None = None):
        if activation not in self.ACTIVATIONS:
            raise ConfigurationError(
                f"unsupported activation {activation!r}; "
                f"choose one of {', '.join(self.ACTIVATIONS)}"
            )
        super().__init__(f"single_index_{activation}", 1, 1, 0.0,
                         {"activation": activation})
        self.activation = activation
        self.scheme = scheme or QuadratureScheme(96)

    def in_domain(self, B: OverlapMatrix) -> bool:
        if self.activation in ("relu", "sign"):
            b11, b12, b22 = B.scalar_blocks()
            return b11 > TOL_DOMAIN and b22 > TOL_DOMAIN \
                and b12 * b12 < (1.0 - TOL_DOMAIN) * b11 * b22
        return True

    def _sigma(self, y):
        a = self.activation
        if a == "relu":
            return np.maximum(y, 0.0)
        if a == "erf":
            return erf(y)
        if a == "sign":
            return np.sign(y)
        if a == "cos":
            return np.cos(y)
        if a == "sin":
            return np.sin(y)
        return y

    def _sigma_prime(self, y):
        a = self.activation
        if a == "relu":
            return (y > 0).astype(float)
        if a == "erf":
            return 2.0 / np.sqrt(np.pi) * np.exp(-y * y)
        if a == "sign":
            return np.zeros_like(y)
        if a == "cos":
            return -np.sin(y)
        if a == "sin":
            return np.cos(y)
        return np.ones_like(y)

    def h(self, B: OverlapMatrix) -> float:
        self.check_domain(B)
        b11, b12, b22 = B.scalar_blocks()
        a = self.activation
        if a == "linear":
            return 0.5 * (b11 + b22) - b12
        if a == "relu":
            rho = b12 / np.sqrt(b11 * b22)
            return 0.25 * (b11 + b22) - np.sqrt(b11 * b22) / (2.0 * np.pi) * (
                rho * np.arccos(-rho) + np.sqrt(1.0 - rho * rho)
            )
        if a == "erf":
            u, v = 1.0 + 2.0 * b11, 1.0 + 2.0 * b22
            return (np.arcsin(2.0 * b11 / u) + np.arcsin(2.0 * b22 / v)
                    - 2.0 * np.arcsin(2.0 * b12 / np.sqrt(u * v))) / np.pi
        if a == "sign":
            rho = b12 / np.sqrt(b11 * b22)
            return 1.0 - 2.0 * np.arcsin(rho) / np.pi
        s = 0.5 * (b11 + b22)
        if a == "cos":
            return 0.5 * (np.exp(-b11) * np.cosh(b11) + np.exp(-b22) * np.cosh(b22)
                          - 2.0 * np.exp(-s) * np.cosh(b12))
        return 0.5 * (np.exp(-b11) * np.sinh(b11) + np.exp(-b22) * np.sinh(b22)
                      - 2.0 * np.exp(-s) * np.sinh(b12))

    def grad_h(self, B: OverlapMatrix) -> GradH:
        self.check_domain(B)
        b11, b12, b22 = B.scalar_blocks()
        a = self.activation
        if a == "linear":
            h1, h2, h3 = 0.5, -0.5, 0.5
        elif a == "relu":
            q = b11 * b22 - b12 * b12
            rho = b12 / np.sqrt(b11 * b22)
            h1 = 0.25 - np.sqrt(q) / (4.0 * np.pi * b11)
            h2 = -np.arccos(-rho) / (4.0 * np.pi)
            h3 = 0.25 - np.sqrt(q) / (4.0 * np.pi * b22)
        elif a == "erf":
            u, v = 1.0 + 2.0 * b11, 1.0 + 2.0 * b22
            w = u * v - 4.0 * b12 * b12
            h1 = 2.0 / (np.pi * u * np.sqrt(1.0 + 4.0 * b11)) \
                + 4.0 * b12 / (np.pi * u * np.sqrt(w))
            h2 = -2.0 / (np.pi * np.sqrt(w))
            h3 = 2.0 / (np.pi * v * np.sqrt(1.0 + 4.0 * b22)) \
                + 4.0 * b12 / (np.pi * v * np.sqrt(w))
        elif a == "sign":
            q = b11 * b22 - b12 * b12
            h1 = b12 / (np.pi * b11 * np.sqrt(q))
            h2 = -1.0 / (np.pi * np.sqrt(q))
            h3 = b12 / (np.pi * b22 * np.sqrt(q))
        else:
            s = 0.5 * (b11 + b22)
            if a == "cos":
                h1 = -0.5 * np.exp(-2.0 * b11) + 0.5 * np.exp(-s) * np.cosh(b12)
                h2 = -0.5 * np.exp(-s) * np.sinh(b12)
                h3 = -0.5 * np.exp(-2.0 * b22) + 0.5 * np.exp(-s) * np.cosh(b12)
            else:
                h1 = 0.5 * np.exp(-2.0 * b11) + 0.5 * np.exp(-s) * np.sinh(b12)
                h2 = -0.5 * np.exp(-s) * np.cosh(b12)
                h3 = 0.5 * np.exp(-2.0 * b22) + 0.5 * np.exp(-s) * np.sinh(b12)
        return GradH(np.array([[float(h1)]]), np.array([[float(h2)]]),
                     np.array([[float(h3)]]))

    def fisher(self, B: OverlapMatrix) -> np.ndarray:
        if self.activation == "sign":
            return np.zeros((1, 1))
        if self.activation == "linear":
            b11, b12, b22 = B.scalar_blocks()
            return np.array([[b11 - 2.0 * b12 + b22]])
        if self.activation == "relu":
            # the kink makes quadrature slow; orthant moments are closed form
            self.check_domain(B)
            b11, b12, b22 = B.scalar_blocks()
            rho = b12 / np.sqrt(b11 * b22)
            cross = np.sqrt(b11 * b22) / (2.0 * np.pi) * (
                np.sqrt(1.0 - rho * rho) + rho * np.arccos(-rho))
            orthant = b22 * (0.25 + (np.arcsin(rho)
                                     + rho * np.sqrt(1.0 - rho * rho))
                             / (2.0 * np.pi))
            return np.array([[0.5 * b11 - 2.0 * cross + orthant]])
        self._check_psd(B)
        val = gauss_expect(
            lambda z: self.grad_f(z, None)[:, 0] ** 2, B, self.scheme
        )
        return np.array([[val]])

    def alignment(self, B: OverlapMatrix) -> float:
        if self.activation == "sign":
            return 0.0  # grad_x f vanishes almost everywhere
        return super().alignment(B)

    def alignment0(self, B: OverlapMatrix) -> float:
        if self.activation == "sign":
            return 0.0
        return super().alignment0(B)

    def grad_f(self, r: np.ndarray, eps: np.ndarray) -> np.ndarray:
        x, xs = r[..., :1], r[..., 1:]
        return self._sigma_prime(x) * (self._sigma(x) - self._sigma(xs))

    def sample_value(self, r: np.ndarray, eps: np.ndarray) -> np.ndarray:
        x, xs = r[..., 0], r[..., 1]
        return 0.5 * (self._sigma(x) - self._sigma(xs)) ** 2


MODEL_KINDS = (
    "least_squares",
    "binary_logistic",
    "multiclass_logistic",
    "phase_retrieval",
    "phase_chase",
    "single_index_activation",
)


def make_model(kind: str, params: dict | None = None) -> ModelSpec:
    """Build a zoo model from its kind and a parameter map."""
    params = dict(params or {})
    if kind == "least_squares":
        return LeastSquares(ell=int(params.pop("ell", 1)),
                            noise_level=float(params.pop("noise", params.pop("eta", 0.0))))
    if kind == "binary_logistic":
        params.pop("classes", None)
        return BinaryLogistic()
    if kind == "multiclass_logistic":
        return MulticlassLogistic(classes=int(params.pop("classes", 3)))
    if kind == "phase_retrieval":
        return PhaseRetrieval()
    if kind == "phase_chase":
        return PhaseChase()
    if kind == "single_index_activation":
        return SingleIndexActivation(str(params.pop("activation", "")))
    raise ConfigurationError(f"unknown model kind {kind!r}")


# operation-style wrappers matching the public module surface

def risk_h(model: ModelSpec, B: OverlapMatrix) -> float:
    return model.h(B)


def grad_h(model: ModelSpec, B: OverlapMatrix) -> GradH:
    return model.grad_h(B)


def fisher_I(model: ModelSpec, B: OverlapMatrix) -> np.ndarray:
    return model.fisher(B)


def alignment_A(model: ModelSpec, B: OverlapMatrix) -> float:
    return model.alignment(B)


def alignment_A0(model: ModelSpec, B: OverlapMatrix) -> float:
    return model.alignment0(B)


def grad_f_sample(model: ModelSpec, r: np.ndarray, eps: np.ndarray) -> np.ndarray:
    return model.grad_f(np.asarray(r, dtype=float), np.asarray(eps, dtype=float))


def in_domain_U(model: ModelSpec, B: OverlapMatrix) -> bool:
    return model.in_domain(B)
