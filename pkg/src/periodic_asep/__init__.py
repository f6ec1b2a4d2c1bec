"""Distribution of the l-th particle in ASEP with periodic step Bernoulli initial data.

Exact transfer-matrix formula (:mod:`.kernel`, :mod:`.quadrature`), exact
brute-force cross-checks (:mod:`.oracle`) and Monte Carlo (:mod:`.simulator`).
"""
from .errors import (ASEPError, ConfigError, DomainError, ParameterError, PoleError,
                     ResourceError)
from .kernel import GeneralRhoProfile, RhoProfile, XiVector
from .quadrature import CdfResult, ContourSpec, EvalRequest, evaluate_cdf, evaluate_cdf_window
from .scalars import EXACT, FLOATING, ModelParams, ScalarField, SiteSet
from .simulator import EmpiricalCdf, SimConfig, estimate_cdf

__version__ = "0.1.0"
