"""Exception hierarchy shared across the package."""


class MetakeyError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(MetakeyError):
    """Invalid or inconsistent configuration."""


class ManifestError(MetakeyError):
    """Malformed dataset manifest or missing referenced files."""


class SplitError(MetakeyError):
    """Split construction failed (unknown days, composition mismatch)."""


class SamplingError(MetakeyError):
    """Episode or task sampling could not satisfy its requirements."""


class GeometryError(MetakeyError):
    """Degenerate row geometry (parallel or coincident lines)."""


class CheckpointError(MetakeyError):
    """Checkpoint container is corrupt, incompatible, or mismatched."""


class NonFiniteLossError(MetakeyError):
    """A training loss became NaN or infinite.

    Carries enough context to locate the failing episode/step instead of
    silently skipping it.
    """

    def __init__(self, message: str, *, episode: int | None = None, step: int | None = None):
        if episode is not None:
            message += f" (episode {episode}"
            message += f", inner step {step})" if step is not None else ")"
        elif step is not None:
            message += f" (inner step {step})"
        super().__init__(message)
        self.episode = episode
        self.step = step
