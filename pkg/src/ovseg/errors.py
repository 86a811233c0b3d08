"""Exception types shared across the package."""


class OvsegError(Exception):
    """Base class for package-specific failures."""


class ConfigError(OvsegError, ValueError):
    """Malformed or inconsistent run configuration."""


class DegeneratePromptError(OvsegError, ValueError):
    """Prompt template embeddings averaged out to a (near-)zero vector."""


class DetectionError(OvsegError, RuntimeError):
    """A saliency detector failed to produce a mask."""


class CheckpointFormatError(OvsegError, RuntimeError):
    """Checkpoint file is missing, has a wrong version, or mismatched dims."""


class TrainingDiverged(OvsegError, RuntimeError):
    """Training hit a non-finite loss; the offending batch was dumped."""


class EvaluationError(OvsegError, ValueError):
    """Evaluation input is unusable (e.g. no ground-truth instances at all)."""
