"""Exception types shared across the toolkit."""


class CadmatchError(Exception):
    """Base class for all cadmatch errors."""


class MeshParseError(CadmatchError):
    """Raised for malformed OBJ input; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyMeshError(CadmatchError):
    """Mesh has no faces."""


class DegenerateGeometryError(CadmatchError):
    """Geometry has no usable surface (e.g. zero total area)."""


class InvalidFractionError(CadmatchError):
    """Occlusion fraction outside [0, 1)."""


class UnsupportedClassError(CadmatchError):
    """Requested procedural class has no generator."""


class ShapeError(CadmatchError):
    """Array shape or feature width does not match the expected contract."""


class ValidationError(CadmatchError):
    """Input values violate an operation's preconditions."""


class ConflictError(CadmatchError):
    """Duplicate identifier where uniqueness is required."""


class ManifestError(CadmatchError):
    """Manifest file is missing, malformed, or references missing data."""


class DegenerateDatasetError(CadmatchError):
    """Dataset cannot support the requested operation (e.g. single class)."""


class DivergenceError(CadmatchError):
    """Training produced a non-finite loss; carries the epoch."""

    def __init__(self, message, epoch=None):
        if epoch is not None:
            message = f"epoch {epoch}: {message}"
        super().__init__(message)
        self.epoch = epoch


class DependencyError(CadmatchError):
    """A pipeline stage was run before its prerequisites."""


class StalenessError(CadmatchError):
    """Stage inputs changed since the recorded run (strict mode)."""


class ContaminationError(CadmatchError):
    """Source and target corpora overlap where disjointness is required."""


class RankError(CadmatchError):
    """Not enough samples for the requested projection dimensionality."""


class DatasetWarning(UserWarning):
    """Non-fatal dataset irregularity (count drift, unpaired object)."""
