"""
Custom Exceptions

Defines context-carrying exceptions for the affect estimation toolkit.
"""

from typing import Any, Dict, Iterable, Optional, Sequence


class AffectError(Exception):
    """Base exception for toolkit errors."""

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.context = context or {}

    def __str__(self):
        if self.context:
            context_str = ", ".join(f"{k}={v}" for k, v in self.context.items())
            return f"{self.message} (Context: {context_str})"
        return self.message


class ShapeError(AffectError):
    """Exception raised when tensor extents are incompatible."""

    def __init__(self, message: str, shapes: Optional[Sequence[tuple]] = None, **kwargs):
        context = kwargs.copy()
        if shapes:
            context['shapes'] = " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(message, context)


class ContractError(AffectError):
    """Exception raised when a precondition of an operation is violated."""


class EmptySequenceError(ContractError):
    """Exception raised when a recurrent layer receives zero time steps."""


class NonFiniteError(AffectError):
    """Exception raised when NaN or Inf shows up in a forward op or a gradient."""

    def __init__(self, message: str, op: Optional[str] = None,
                 op_index: Optional[int] = None, parameter: Optional[str] = None,
                 **kwargs):
        context = kwargs.copy()
        if op:
            context['op'] = op
        if op_index is not None:
            context['op_index'] = op_index
        if parameter:
            context['parameter'] = parameter
        self.op = op
        self.op_index = op_index
        self.parameter = parameter
        super().__init__(message, context)


class ConfigurationError(AffectError):
    """Exception raised when configuration is invalid."""

    def __init__(self, message: str, key: Optional[str] = None,
                 expected: Optional[str] = None, config_file: Optional[str] = None,
                 **kwargs):
        context = kwargs.copy()
        if key:
            context['key'] = key
        if expected:
            context['expected'] = expected
        if config_file:
            context['config_file'] = config_file
        self.key = key
        super().__init__(message, context)


class DataFormatError(AffectError):
    """Exception raised when a feature or score file cannot be parsed."""

    def __init__(self, message: str, path: Optional[str] = None,
                 offset: Optional[int] = None, **kwargs):
        context = kwargs.copy()
        if path:
            context['path'] = path
        if offset is not None:
            context['offset'] = offset
        self.offset = offset
        super().__init__(message, context)


class BadMagicError(DataFormatError):
    """Header magic, version or label kind is not recognised."""


class TruncatedPayloadError(DataFormatError):
    """File ends before the sections announced by its header."""


class FrameCountMismatchError(DataFormatError):
    """Payload is self-consistent but describes a different frame count than the header."""

    def __init__(self, message: str, header_frames: Optional[int] = None,
                 payload_frames: Optional[int] = None, **kwargs):
        if header_frames is not None:
            kwargs['header_frames'] = header_frames
        if payload_frames is not None:
            kwargs['payload_frames'] = payload_frames
        self.header_frames = header_frames
        self.payload_frames = payload_frames
        super().__init__(message, **kwargs)


class LabelRangeError(DataFormatError):
    """Labels fall outside their documented codomain."""


class AlignmentError(AffectError):
    """Exception raised when per-fold prediction streams disagree on frame count."""

    def __init__(self, message: str, video_id: Optional[str] = None,
                 fold: Optional[int] = None, **kwargs):
        context = kwargs.copy()
        if video_id:
            context['video_id'] = video_id
        if fold is not None:
            context['fold'] = fold
        super().__init__(message, context)


class MissingFoldError(AffectError):
    """Exception raised when stage-1 fold artifacts are absent."""

    def __init__(self, message: str, folds: Iterable[int] = (), **kwargs):
        self.folds = sorted(folds)
        context = kwargs.copy()
        context['missing_folds'] = ", ".join(str(k) for k in self.folds)
        super().__init__(message, context)


class CheckpointError(AffectError):
    """Exception raised when a checkpoint is malformed or incompatible."""

    def __init__(self, message: str, path: Optional[str] = None, **kwargs):
        context = kwargs.copy()
        if path:
            context['path'] = path
        super().__init__(message, context)


def format_error_context(error: Exception) -> Dict[str, Any]:
    """
    Format error context for logging or reporting.

    Args:
        error: Exception instance

    Returns:
        Dictionary with error context information
    """
    if isinstance(error, AffectError):
        return {
            'error_type': error.__class__.__name__,
            'message': error.message,
            'context': error.context
        }
    return {
        'error_type': error.__class__.__name__,
        'message': str(error),
        'context': {}
    }


def exit_code_for(error: Exception) -> int:
    """
    Map an exception to the CLI exit code.

    Returns 2 for I/O and file-format failures, 1 for everything else.
    """
    io_errors = (
        OSError,
        DataFormatError,
        CheckpointError,
        MissingFoldError,
    )
    return 2 if isinstance(error, io_errors) else 1
