"""Wave-packet laboratory: split-step dynamics, multipole moments, EMWF classification,
effective trajectories, and Wigner / pilot-wave cross-checks."""
from .grid import (
    FourierMultiplier,
    Grid,
    Units,
    WaveFunction,
    apply_fourier_multiplier,
    inner_product,
    make_grid,
    normalize,
    spectral_derivative,
    spectral_gradient,
)

__version__ = "0.1.0"

from .dynamics import TrajectoryRecord, evolve, relativistic_evolve, split_step  # noqa: E402
from .moments import MultipoleSet, multipoles  # noqa: E402
from .classifier import ClassificationReport, emwf_check, ndwf_check  # noqa: E402
from .scenario import Scenario, parse_scenario  # noqa: E402
from .runner import run_scenario  # noqa: E402

__all__ = [
    "ClassificationReport",
    "FourierMultiplier",
    "Grid",
    "MultipoleSet",
    "Scenario",
    "TrajectoryRecord",
    "Units",
    "WaveFunction",
    "apply_fourier_multiplier",
    "emwf_check",
    "evolve",
    "inner_product",
    "make_grid",
    "multipoles",
    "ndwf_check",
    "normalize",
    "parse_scenario",
    "relativistic_evolve",
    "run_scenario",
    "spectral_derivative",
    "spectral_gradient",
    "split_step",
    "__version__",
]
