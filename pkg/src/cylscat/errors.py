"""Exception types.  Each carries the CLI exit code it maps to."""


class CylscatError(Exception):
    exit_code = 1


class ConfigError(CylscatError):
    exit_code = 2


class ParameterError(ConfigError):
    """Invalid model parameters or operation arguments."""


class MeshError(CylscatError):
    exit_code = 3


class MeshParseError(MeshError):
    pass


class GenerationError(MeshError):
    pass


class StructureError(MeshError):
    """Complex lacks required structure (collar, closedness, orientation)."""


class DegreeError(CylscatError):
    exit_code = 2


class SolverError(CylscatError):
    exit_code = 4


class AssemblyError(SolverError):
    pass


class RankError(SolverError):
    """Numerical kernel dimension disagrees with integer homology."""


class SpectralGapError(SolverError):
    pass


class BranchError(SolverError):
    pass


class AuditError(CylscatError):
    exit_code = 5


class FitError(AuditError):
    pass


class StarDiscretizationError(AuditError):
    pass


class BoundViolation(AuditError):
    pass
