"""Age-structured multi-target-cell virus dynamics with antibody response."""

from agevir.errors import (AgevirError, DomainError, IntegrationError, SolverError,
                           ValidationError)
from agevir.scenario import Scenario, load_scenario

__version__ = "0.1.0"

__all__ = ["AgevirError", "DomainError", "IntegrationError", "SolverError",
           "ValidationError", "Scenario", "load_scenario", "__version__"]
