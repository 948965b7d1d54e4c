class SinhGordonError(Exception):
    """Base class; `exit_code` is used by the command line front end."""

    exit_code = 1


class MalformedInputError(SinhGordonError, ValueError):
    exit_code = 2


class PreconditionError(SinhGordonError, ValueError):
    exit_code = 2


class DivergenceError(SinhGordonError):
    pass


class IterationFailure(SinhGordonError):
    pass


class IntegrationFailure(SinhGordonError):
    pass


class RealityLossError(SinhGordonError):
    pass


class CurveRecoveryError(SinhGordonError):
    pass


class PathError(SinhGordonError):
    pass


class StructureError(SinhGordonError):
    pass


class DegeneratePairError(SinhGordonError):
    pass


class BoundaryError(SinhGordonError):
    """Root collision: the flow reached the boundary of the smooth moduli space."""

    def __init__(self, msg, trajectory=None):
        super().__init__(msg)
        self.trajectory = trajectory
