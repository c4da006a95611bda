"""
Exception hierarchy for ufrkit.
"""
from typing import Optional


class UfrKitError(Exception):
    """Base class for every error raised by ufrkit."""


class DomainError(UfrKitError, ValueError):
    """Numeric input outside the domain of an operation."""


class CurveFitError(UfrKitError):
    """Smith-Wilson system could not be solved reliably."""

    def __init__(self, message: str, condition_number: float, threshold: float):
        super().__init__(f"{message} (condition number {condition_number:.3e} exceeds {threshold:.1e})")
        self.condition_number = condition_number
        self.threshold = threshold


class ExtractionError(UfrKitError):
    """UFR extraction failed (no FOC root, singular weight matrix)."""


class CalibrationError(UfrKitError):
    """Lambda calibration failed on a given date."""

    def __init__(self, message: str, date: Optional[str] = None):
        super().__init__(f"{message} [date={date}]" if date is not None else message)
        self.date = date


class ConvergenceError(UfrKitError):
    """Iterative solver hit its iteration cap."""

    def __init__(self, message: str, iterations: int):
        super().__init__(f"{message} after {iterations} iterations")
        self.iterations = iterations


class TrainingError(UfrKitError):
    """Neural network training diverged."""


class ForecastError(UfrKitError):
    """A rolling window failed to fit or predict."""

    def __init__(self, message: str, window_index: int):
        super().__init__(f"window {window_index}: {message}")
        self.window_index = window_index


class ProjectionError(UfrKitError):
    """UFR-based curve projection produced an invalid price."""

    def __init__(self, message: str, maturity: float):
        super().__init__(f"{message} at maturity {maturity:g}")
        self.maturity = maturity


class MetricError(UfrKitError):
    """Evaluation statistic is undefined for the given inputs."""


class ConfigError(UfrKitError):
    """Invalid configuration value or file."""


class UsageError(UfrKitError):
    """Invalid command-line usage."""


class DataFormatError(UfrKitError):
    """Input file does not follow the expected layout."""


class HeaderError(DataFormatError):
    """Missing or malformed header row."""


class CellParseError(DataFormatError):
    """A cell could not be parsed as a number or date."""


class DuplicateDateError(DataFormatError):
    """The same date occurs twice in one file."""


class GroupMappingError(DataFormatError):
    """A variable has no group, or a group name is unknown."""
