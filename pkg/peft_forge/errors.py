"""Exception hierarchy shared by every peft_forge module."""


class PeftForgeError(Exception):
    """Base class for all errors raised by peft_forge."""


class DimensionError(PeftForgeError, ValueError):
    """Operand shapes do not agree."""

    def __init__(self, op, *shapes):
        self.op = op
        self.shapes = tuple(tuple(s) for s in shapes)
        rendered = " vs ".join(str(list(s)) for s in self.shapes)
        super().__init__(f"{op}: incompatible shapes {rendered}")


class ContractError(PeftForgeError):
    """A documented precondition was violated by the caller."""


class ConfigurationError(PeftForgeError, ValueError):
    """Unknown or inconsistent model / adapter configuration."""


class ConfigParseError(PeftForgeError):
    """Strict experiment-config parsing failed at a given key path."""

    def __init__(self, key_path, message, line_no=None):
        self.key_path = key_path
        self.line_no = line_no
        where = f" (line {line_no})" if line_no is not None else ""
        super().__init__(f"{key_path}{where}: {message}")


class LabelIndexError(PeftForgeError, IndexError):
    """A class label lies outside [0, c)."""


class CheckpointError(PeftForgeError):
    """Checkpoint file is truncated, malformed or of another format version."""


class IngestionError(PeftForgeError):
    """One or more image files could not be decoded."""

    def __init__(self, failures):
        self.failures = list(failures)
        lines = "\n".join(f"  - {path}: {reason}" for path, reason in self.failures)
        super().__init__(f"{len(self.failures)} file(s) could not be read:\n{lines}")
