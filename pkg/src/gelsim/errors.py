"""Exception types shared across the library."""


class GelsimError(Exception):
    """Base class for all library errors."""


class DegenerateMesh(GelsimError):
    """Mesh has no usable faces after cleanup."""


class NonWatertightMesh(GelsimError):
    """Signed distance is undefined for open meshes."""


class InvalidQuery(GelsimError):
    """SDF query result used outside its valid region."""


class NonPositiveInertia(GelsimError):
    """Effective inertia at a contact must be strictly positive."""


class SolverDiverged(GelsimError):
    """Non-finite state detected during constraint solving."""

    def __init__(self, message, constraint_index=None, env_index=None):
        super().__init__(message)
        self.constraint_index = constraint_index
        self.env_index = env_index


class ResolutionTooFine(GelsimError):
    """Requested tactile grid is finer than the surface mesh resolves."""


class DimensionMismatch(GelsimError):
    """Array shapes of paired inputs disagree."""


class LutResolutionMismatch(GelsimError):
    """Look-up table was calibrated for a different image size."""


class RankDeficient(GelsimError):
    """Calibration samples do not excite enough gradient directions."""


class InvalidRange(GelsimError):
    """Randomization range is empty or excludes its nominal value."""


class EmptyDataset(GelsimError):
    """Training requested on a dataset with no records."""


class NonFiniteLoss(GelsimError):
    """Loss became NaN/Inf during optimization."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class CriticTaskMismatch(GelsimError):
    """Pretrained critic fingerprint does not match the target task."""


class UnstableStack(GelsimError):
    """Calibration weight stack diverged during settling."""
