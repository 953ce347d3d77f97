"""
Standardized error handling for the logit-correction toolkit.
Provides one exception hierarchy and a stable mapping onto process exit codes.
"""

import logging
from typing import Dict, Any, Optional

# Setup logging
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


class LCError(Exception):
    """
    Base toolkit exception with a standardized error format.

    Attributes:
        error_code: Machine-readable error code
        message: Human-readable error message
        exit_code: Process exit code used by the command line
        details: Optional additional error details
    """

    def __init__(self, error_code: str, message: str, exit_code: int = EXIT_USAGE,
                 details: Optional[Dict[str, Any]] = None):
        self.error_code = error_code
        self.message = message
        self.exit_code = exit_code
        self.details = details or {}
        super().__init__(self.message)

    def to_dict(self) -> Dict[str, Any]:
        """Convert exception to a dictionary for structured logs and manifests."""
        error_dict = {
            'error': self.error_code,
            'message': self.message
        }

        if self.details:
            error_dict['details'] = self.details

        return error_dict


class ValidationError(LCError):
    """Invalid argument or input value (exit 2)"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None,
                 error_code: str = 'validation_error'):
        super().__init__(error_code, message, EXIT_USAGE, details)


class ConfigurationError(ValidationError):
    """Inconsistent configuration, e.g. dataset/topology mismatch"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details, 'configuration_error')


class ContractError(ValidationError):
    """Precondition of an operation violated by the caller"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details, 'contract_violation')


class ShapeError(ValidationError):
    """Tensor dimensions do not agree"""
    def __init__(self, message: str, expected: Any = None, actual: Any = None):
        details = {'expected': expected, 'actual': actual} if expected is not None else None
        super().__init__(message, details, 'shape_mismatch')


class TopologyError(ValidationError):
    """Invalid correlation topology or a topology that does not fit the data"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details, 'topology_error')


class EnumerationError(ValidationError):
    """Brute-force enumeration bound exceeded"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details, 'enumeration_bound')


class NumericError(LCError):
    """Non-finite value encountered (exit 3)"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None,
                 error_code: str = 'numeric_failure'):
        super().__init__(error_code, message, EXIT_NUMERIC, details)


class ConvergenceError(NumericError):
    """Iterative solver did not reach its tolerance"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details, 'not_converged')


class StorageError(LCError):
    """File could not be read or written (exit 4)"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None,
                 error_code: str = 'storage_error'):
        super().__init__(error_code, message, EXIT_IO, details)


class DataFormatError(StorageError):
    """File exists but its contents do not follow the expected layout"""
    def __init__(self, message: str, offset: Optional[int] = None,
                 error_code: str = 'data_format_error'):
        self.offset = offset
        details = {'offset': offset} if offset is not None else None
        super().__init__(message, details, error_code)


class IdxFormatError(DataFormatError):
    """Malformed IDX image or label file"""
    def __init__(self, message: str, offset: Optional[int] = None):
        super().__init__(message, offset, 'idx_format_error')


class DatasetFormatError(DataFormatError):
    """Malformed or unsupported dataset container"""
    def __init__(self, message: str, offset: Optional[int] = None):
        super().__init__(message, offset, 'dataset_format_error')


class CheckpointFormatError(DataFormatError):
    """Malformed model checkpoint"""
    def __init__(self, message: str, offset: Optional[int] = None):
        super().__init__(message, offset, 'checkpoint_format_error')


def handle_cli_error(error: LCError) -> int:
    """
    Log a toolkit error and return its exit code.

    Args:
        error: LCError instance

    Returns:
        Process exit code
    """
    if error.exit_code == EXIT_USAGE:
        logger.warning(f"Error {error.exit_code}: {error.error_code} - {error.message}")
    else:
        logger.error(f"Error {error.exit_code}: {error.error_code} - {error.message}")

    try:
        from config.monitoring import monitoring
        monitoring.capture_exception(error)
    except ImportError:
        pass

    return error.exit_code


def convert_exception(error: BaseException) -> Optional[LCError]:
    """
    Convert library and OS exceptions to LCError instances.

    Args:
        error: Exception raised below the toolkit

    Returns:
        LCError instance, or None if the exception has no toolkit meaning
    """
    if isinstance(error, LCError):
        return error
    if isinstance(error, FloatingPointError):
        return NumericError(f"Floating point failure: {error}")
    if isinstance(error, (FileNotFoundError, IsADirectoryError, PermissionError)):
        return StorageError(f"{error.strerror}: {error.filename}",
                            details={'path': str(error.filename)})
    if isinstance(error, OSError):
        return StorageError(f"I/O failure: {error}")
    return None


class error_handler:
    """
    Context manager converting OS and floating point failures to LCError.

    Usage:
        with error_handler():
            dataset = load_dataset(path)
    """

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if exc_type is None:
            return True

        if isinstance(exc_val, LCError):
            # Already in toolkit form
            return False

        converted = convert_exception(exc_val)
        if converted is not None:
            raise converted from exc_val

        return False
