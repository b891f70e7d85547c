"""Exceptions raised by hlab"""

from typing import Optional


class HlabError(Exception):
    """Base class for every error raised by the lab"""


class SpaceError(HlabError):
    """Invalid point, malformed geometry or a builder input that cannot be realized"""


class WeightError(HlabError):
    """Non-positive weight values or an exponent outside the class range"""


class OperatorError(HlabError):
    """Symmetry/positivity violations and functional calculus misuse"""


class NormError(HlabError):
    """Grid functions that do not fit their window or grids that are too coarse"""


class VerificationError(HlabError):
    """Parameter orderings or grids a check cannot run with"""


class ConfigError(HlabError):
    """Invalid settings or scenario configuration"""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class ReportError(HlabError):
    """Unreadable report files or schema mismatches"""
