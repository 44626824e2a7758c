"""Exception hierarchy shared by all modules.

Each top-level family maps onto one CLI exit code.
"""


class MdflowError(Exception):
    exit_code = 1


class ConfigError(MdflowError):
    exit_code = 2


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    pass


class MeshError(MdflowError):
    exit_code = 3


class FormatError(MeshError):
    pass


class NonConformingMesh(MeshError):
    pass


class GeometryError(MeshError):
    pass


class OverlappingFractures(GeometryError):
    pass


class NonAxisAligned(GeometryError):
    pass


class TIntersection(GeometryError):
    pass


class NonConformingFracture(GeometryError):
    pass


class DegenerateCell(GeometryError):
    pass


class NonConsecutiveDims(MdflowError, ValueError):
    pass


class DiscretizationError(MdflowError):
    exit_code = 4


class MissingKappa(DiscretizationError):
    pass


class MissingFlux(DiscretizationError):
    pass


class NonPositiveInput(DiscretizationError, ValueError):
    pass


class SolverError(MdflowError):
    exit_code = 4


class SingularSystem(SolverError):
    pass


class IndexOutOfRange(SolverError, IndexError):
    pass


class UnknownBlock(SolverError, KeyError):
    pass


class NonPositiveTransmissibility(UserWarning):
    """Issued when a TPFA half-transmissibility is not positive."""
