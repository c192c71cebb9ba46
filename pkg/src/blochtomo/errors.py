"""Exception hierarchy shared by every module.

Each error carries a short machine-readable ``code`` so the command line
front end can emit a JSON error record without string matching.
"""


class BlochTomoError(Exception):
    code = "error"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class EPSingular(BlochTomoError):
    """The (E, n) chart is undefined: the step operator is a Jordan block."""

    code = "ep_singular"


class ScalarOperator(BlochTomoError):
    """Step operator proportional to the identity; n is undefined."""

    code = "scalar_operator"


class DegenerateOperator(BlochTomoError):
    code = "degenerate_operator"


class ZeroVector(BlochTomoError):
    code = "zero_vector"


class ZeroOperator(BlochTomoError):
    code = "zero_operator"


class ZeroMatrix(BlochTomoError):
    code = "zero_matrix"


class DarkInput(BlochTomoError):
    """A projection pair received no light, so its ratio is undefined."""

    code = "dark_input"


class GeometryError(BlochTomoError):
    code = "geometry_error"


class GridError(BlochTomoError):
    code = "grid_error"


class NotConverged(BlochTomoError):
    """Raised by the pixel solver; ``best`` holds the best result found."""

    code = "not_converged"

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NoConvergence(BlochTomoError):
    code = "no_convergence"


class NotAnEP(BlochTomoError):
    code = "not_an_ep"


class InvalidReading(BlochTomoError):
    code = "invalid_reading"


class OutOfDomain(BlochTomoError):
    code = "out_of_domain"


class ConfigError(BlochTomoError):
    code = "config_error"


class SublatticeViolation(UserWarning):
    """Rotated Hamiltonian has diagonal entries beyond tolerance."""
