"""Free-boundary simulation of Wolbachia spread in a competing host population.

Modules: ``model`` (parameters, birth-rate fields, closed forms), ``pde``
(front-fixing solver and spreading/vanishing classifier), ``eigen``
(principal eigenvalue and thresholds), ``semiwave`` (asymptotic front
speed), ``ode`` (well-mixed compartment models) and ``cli``.
"""

__version__ = "0.1.0"

from .errors import (BracketError, ConvergenceError, DomainError, HorizonError,  # noqa: E402
                     NumericalFailure, ResolutionError, TruncationError, ValidationError,
                     WolbachiaError)
from .model import (BirthRateField, DerivedBounds, InitialData, InitialProfile,  # noqa: E402
                    ModelParams, critical_d1_star, critical_h0_star, critical_length_Lstar,
                    derive_bounds)
from .pde import Grid, Outcome, RunResult, classify, measure_speed, run  # noqa: E402
from .eigen import (EigenProblem, EigenResult, ThresholdResult, find_d1_star,  # noqa: E402
                    find_h_star, find_mu_threshold, principal_eigen)
from .semiwave import SemiWaveProblem, SpeedResult, beta0, solve_beta0, speed_bracket  # noqa: E402
from .ode import CompartmentState, OdeParams, integrate_compartments, integrate_uv  # noqa: E402
