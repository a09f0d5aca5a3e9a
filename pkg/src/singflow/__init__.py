"""Numerical laboratory for singular-hyperbolic example flows and their physical measures."""
from __future__ import annotations

from .census import MeasureCensus, birkhoff, census, check_bound, lyapunov_top, sectional_expansion_estimate
from .equilibria import EquilibriumReport, classify, find_equilibria
from .errors import (CensusUnreliableError, CompositionError, ConfigError, DomainError, ExpansionError,
                     NumericError, ParameterError, SingflowError, StiffnessError)
from .fields import Field3, LorenzParams, lorenz_classic
from .integrate import integrate, integrate_to_section, integrate_with_tangent
from .maps1d import PiecewiseMap1D, quotient_lorenz_map, winding_map
from .section_graph import SectionGraphModel, build_return_map, linear_passage
from .ulam import density_mean, invariant_densities, ulam_build
from .zoo import ZooEntry, build_entry, connectedness_check, trapping_check

__version__ = "0.1.0"
