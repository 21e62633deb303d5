"""Errors raised while orchestrating a run."""


class ConfigError(ValueError):
    """The run configuration is invalid or inconsistent."""


class MissingArtifactError(FileNotFoundError):
    """A phase needs output that an earlier phase has not produced."""

    def __init__(self, phase, path):
        self.phase = phase
        self.path = path
        super().__init__(f"missing {phase} artifact {path}; run the {phase} phase first")
