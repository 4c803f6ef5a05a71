"""Exception and warning types raised across the package."""


class EmwfError(Exception):
    """Base class for all package errors."""


class GridError(EmwfError, ValueError):
    """Invalid grid specification or mismatched grids."""


class DegenerateStateError(EmwfError, ValueError):
    """Zero-norm or otherwise unusable wave function."""


class NotNormalizedError(EmwfError, ValueError):
    """Operation requires a normalized state."""


class MultiplierError(EmwfError, ValueError):
    """Fourier symbol is not finite on the momentum lattice."""


class IntegrationError(EmwfError, RuntimeError):
    """Time stepping produced non-finite values."""

    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time


class BoundaryLeakError(EmwfError, RuntimeError):
    """Density at the periodic boundary is too large for moments to mean anything."""


class BoundaryLeakWarning(UserWarning):
    """Density at the periodic boundary exceeds the monitoring threshold."""


class QuadratureError(EmwfError, RuntimeError):
    """A quantity that must be nonnegative came out negative beyond tolerance."""


class MissingDerivativeError(EmwfError, ValueError):
    """Potential cannot supply a derivative of the requested order."""


class DipoleError(EmwfError, ValueError):
    """A dipole that must vanish does not."""


class NodeError(EmwfError, ValueError):
    """Evaluation point lies on a node of the wave function."""


class ScenarioError(EmwfError, ValueError):
    """Scenario file failed validation; carries every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
