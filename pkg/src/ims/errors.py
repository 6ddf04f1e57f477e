"""Exception hierarchy shared by the library and the ``ims`` command line tool."""


class ImsError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for this failure."""

    exit_code = 1


class InputError(ImsError):
    """Malformed file, wrong sizes, or invalid arguments."""

    exit_code = 2


class StructureError(InputError):
    """Mesh connectivity is not a consistently oriented 2-manifold."""


class TopologyError(ImsError):
    """Mesh is not (or cannot be made) a closed genus-zero surface."""

    exit_code = 3

    def __init__(self, message, euler_characteristic=None):
        super().__init__(message)
        self.euler_characteristic = euler_characteristic


class NumericalError(ImsError):
    exit_code = 4


class PreconditionError(NumericalError, ValueError):
    """Numerical inputs violate an operation's precondition."""


class ExtractionError(ImsError):
    """Zero extraction failed on a slice."""

    exit_code = 5
