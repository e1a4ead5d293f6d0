"""High-dimensional streaming SGD dynamics: deterministic equivalents,
Volterra/resolvent solvers, seeded simulators, and rate calculators."""

from .errors import (ConfigurationError, DomainExitError, FactorizationError,
                     HdsgdError, InfeasibleError, NumericError,
                     UnsupportedModelError)
from .models import (ModelSpec, alignment_A, alignment_A0, fisher_I,
                     grad_f_sample, grad_h, in_domain_U, make_model, risk_h)
from .moments import QuadratureScheme, gauss_expect, mc_expect, psd_factor
from .ode import (OdeState, OdeSystem, d2_derivative_check, init_overlaps,
                  integrate_ode, reduce_stats, rhs_coupled, statistic_phi)
from .overlap import GradH, OverlapMatrix
from .simulate import grad_risk, make_sampler, run_hsgd, run_sgd
from .spectrum import (SpectrumK, align_groups, atoms_spectrum, identity_spectrum,
                       mp_spectrum, parse_spectrum, powered_uniform_spectrum)
from .thresholds import (RateCertificate, descent_threshold_q, fit_envelope_c,
                         gamma_stable, logistic_local_rate,
                         nonexplosion_envelope, pr_escape_ok, pr_saddle_beta,
                         pr_saddle_ratio, rate_rsi_global, rate_rsi_local)
from .trajectory import Trajectory, sup_deviation
from .volterra import lsq_malthus_rate, solve_lsq_volterra, solve_scalar_resolvent

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
