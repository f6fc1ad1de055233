"""
Error Types
Distinct exception classes for every failure the toolkit can report
"""

from typing import Sequence


class LpcAugmentError(Exception):
    """Base class for all toolkit errors"""


# Audio I/O

class AudioError(LpcAugmentError):
    """Problems reading or writing audio files"""


class AudioFileMissingError(AudioError, FileNotFoundError):
    pass


class UnsupportedEncodingError(AudioError):
    pass


class EmptyAudioError(AudioError):
    pass


class AudioWriteError(AudioError):
    pass


# Framing

class SignalTooShortError(LpcAugmentError):
    """Buffer shorter than one analysis window"""


class FrameGridMismatchError(LpcAugmentError, ValueError):
    pass


# Per-frame degeneracies. augment_frame turns any of these into a passthrough.

class FrameDegeneracyError(LpcAugmentError):
    """A frame the LPC machinery cannot process"""


class DegenerateFrameError(FrameDegeneracyError):
    """Zero-energy frame (r[0] <= 0)"""


class NumericalDegeneracyError(FrameDegeneracyError):
    """Reflection coefficient reached the unit circle"""


class RootFindingError(FrameDegeneracyError):
    pass


class ConjugacyError(FrameDegeneracyError):
    """Complex root left without a conjugate partner"""


# Configuration

class InvalidConfigError(LpcAugmentError, ValueError):
    pass


class InvalidWarpRangeError(InvalidConfigError):
    pass


# Corpus tooling

class ManifestError(LpcAugmentError):
    """
    Malformed manifest content
    line_numbers points at the offending line(s), 1-based
    """

    def __init__(self, message: str, line_numbers: Sequence[int] = ()):
        super().__init__(message)
        self.line_numbers = tuple(line_numbers)


class DuplicateEntryError(ManifestError):
    pass


class OutputDirectoryError(LpcAugmentError):
    pass


class NoVoicedFrameError(LpcAugmentError):
    """Every frame of a file is below the silence threshold"""
