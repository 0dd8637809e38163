"""Strongly damped semilinear wave equation: spectral solver, lifespan
estimation and numerical checks of the energy-inequality lifespan bound."""

from .functionals import FunctionalSample, Trajectory, sample, z0_prediction, z_of_y
from .integrator import (
    BLOWUP,
    STALLED,
    SURVIVED,
    LifespanEstimate,
    StepControl,
    Thresholds,
    estimate_lifespan,
    integrate,
    step,
)
from .model import (
    Coefficients,
    ProfilePair,
    State,
    make_profile,
    scale_initial_state,
    validate_coefficients,
)
from .spectral import DomainSpec, SpectralBasis, build_basis

__version__ = "0.1.0"
