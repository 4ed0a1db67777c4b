"""
Exception hierarchy shared by the nodal laboratory modules.
Library code raises these; the batch driver in cli.py records them.
"""

from typing import Optional


class LabError(Exception):
    """Base class for every error raised by the laboratory"""


class InvalidInputError(LabError, ValueError):
    """A precondition of an operation is not met"""


class DegenerateFieldError(LabError):
    """The field is effectively zero where a positive quantity is required"""


class UnsupportedDimensionError(LabError):
    """The requested method does not exist in this dimension"""


class ConfigError(LabError):
    """Invalid experiment configuration, located by field and line when known"""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.line = line
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field:
            prefix += f"{field}: "
        super().__init__(prefix + message)
