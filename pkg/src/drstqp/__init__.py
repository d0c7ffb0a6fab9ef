"""Distributionally robust standard quadratic optimization under Wasserstein ambiguity."""

from .d3ro import Const, GammaOverQ, InvNormSq, InvQuad, solve_d3, spectral_regime
from .dro import DroModel, reformulate_frobenius, reformulate_maxnorm, solve_dro, unify_radius
from .errors import DomainError, DrstqpError
from .randmat import EmpiricalEnsemble, RngSpec, goe_model, sample_ensemble, wishart_model
from .stqp import StqpSolution, solve_replicator_multistart, solve_stqp, solve_support_enum
from .transport import EUCLID, LINF, AmbiguitySpec

__version__ = "0.1.0"

__all__ = [
    "AmbiguitySpec",
    "Const",
    "DomainError",
    "DroModel",
    "DrstqpError",
    "EUCLID",
    "EmpiricalEnsemble",
    "GammaOverQ",
    "InvNormSq",
    "InvQuad",
    "LINF",
    "RngSpec",
    "StqpSolution",
    "goe_model",
    "reformulate_frobenius",
    "reformulate_maxnorm",
    "sample_ensemble",
    "solve_d3",
    "solve_dro",
    "solve_replicator_multistart",
    "solve_stqp",
    "solve_support_enum",
    "spectral_regime",
    "unify_radius",
    "wishart_model",
]
