"""2D plane-strain micropolar bond-lattice dynamics.

Meshfree explicit solver for shear banding and dynamic crack branching in
dry porous media: stabilized correspondence kinematics with micro-rotation,
Drucker-Prager/Perzyna visco-plasticity, Maxwell visco-elasticity (tensor
and bond channels), bond damage, and a small CLI around four shipped
example scenarios.
"""

from .config import apply_overrides, build_model, load_config, validate_config
from .constitutive import (BondConstants, ElasticModuli, ViscoplasticParams,
                           ViscoplasticState)
from .damage import DamageParams, DamageState
from .dynamics import (KinematicBC, KinematicLaw, Measure, Model, Simulation,
                       TractionBC)
from .errors import (ConfigError, DegenerateNeighborhoodError,
                     NumericalBreakdownError)
from .grid import NeighborTable, PointField, build_grid, find_neighbors
from .metrics import measure_band_angle, measure_branch_timing
from .scenarios import preset_config, preset_names

__version__ = "0.1.0"

__all__ = [
    "apply_overrides", "build_model", "load_config", "validate_config",
    "BondConstants", "ElasticModuli", "ViscoplasticParams", "ViscoplasticState",
    "DamageParams", "DamageState",
    "KinematicBC", "KinematicLaw", "Measure", "Model", "Simulation", "TractionBC",
    "ConfigError", "DegenerateNeighborhoodError", "NumericalBreakdownError",
    "NeighborTable", "PointField", "build_grid", "find_neighbors",
    "measure_band_angle", "measure_branch_timing",
    "preset_config", "preset_names",
    "__version__",
]
