"""
mapflux: Monte Carlo toolkit for circle-modulated additive processes and
their self-similar plane-valued counterparts.

Subpackage map:
  core         containers, seeding, CSV formats
  models       SDE coefficients, simulators, generator checks
  lamperti     time-change transform, both directions
  fluctuation  extrema, excursions, ladder samples, Laplace estimators
  classify     long-horizon trichotomy verdict
  duality      time reversal and stationary-start checks
  oracle       exact enumeration of a discrete modulated walk
  stats        ECDF, KS, CIs, total variation
  cli          command-line front end with reproducible manifests
"""

__version__ = "0.1.0"

from .core import (MapPath, ScalarPath, SimulationConfig, SsmpPath, TimeGrid,
                   UnitVector, make_time_grid, seed_stream, validate_map_path)
from .models import FreeBessel2D, ModelSpec, RadialDunkl, RootSystem
from .oracle import OracleSpec

__all__ = [
    "__version__",
    "MapPath", "ScalarPath", "SimulationConfig", "SsmpPath", "TimeGrid",
    "UnitVector", "make_time_grid", "seed_stream", "validate_map_path",
    "FreeBessel2D", "ModelSpec", "RadialDunkl", "RootSystem", "OracleSpec",
]
