"""Exact metastability and mixing-time analysis of the mean-field Potts model.

Library layers:

- `model`: Hamiltonian, Gibbs weights, free energy and its derivatives,
  single-site jump rates.
- `landscape`: critical points, critical temperatures, saddle heights,
  well depths, harmonic prefactors.
- `limit_chain`: the reduced Markov chain on well indices, its total
  variation curves and mixing time.
- `exact_chain`: the proportions chain on the discrete simplex as an
  explicit reversible generator, with exact transient laws, mixing times,
  metastable sets, paths and the cyclic decomposition.
- `potential`: equilibrium potentials, capacities, variational bounds,
  hitting-time formulas for reversible finite chains.
- `simulate`: seeded event-driven Monte Carlo for the configuration and
  proportions dynamics.
- `cli`: command-line frontend with reproducible run manifests.
"""

from .errors import (BoundaryPoint, CapacityError, CwpottsError,
                     DefinitenessError, DegenerateTemperature, DomainError,
                     EigenStructureError, EmptyValley, InvalidTestFunction,
                     NotAPath, PathStuck, SolveFailure, SpectrumUnavailable,
                     UnsupportedRegime)
from .model import ModelParams, RateKind

__version__ = "0.1.0"
