"""
Signal Core Module
Audio I/O, short-time framing and overlap-add reconstruction
"""

import logging
import math
import os
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import soundfile as sf
from scipy.signal import get_window

from errors import (
    AudioFileMissingError,
    AudioWriteError,
    EmptyAudioError,
    FrameGridMismatchError,
    InvalidConfigError,
    SignalTooShortError,
    UnsupportedEncodingError,
)

logger = logging.getLogger(__name__)

# Input subtypes we accept; everything else is rejected up front
SUPPORTED_SUBTYPES = {'PCM_16', 'PCM_24', 'PCM_32', 'FLOAT'}
SUPPORTED_FORMATS = {'WAV', 'WAVEX'}

# Window-sum floor below which overlap-add emits silence
WINDOW_SUM_FLOOR = 1e-6


@dataclass(frozen=True)
class AudioBuffer:
    """Mono float64 samples in [-1, 1] plus their sample rate"""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples contain NaN or Inf")
        object.__setattr__(self, 'samples', samples)
        object.__setattr__(self, 'sample_rate', int(self.sample_rate))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.samples))) if len(self.samples) else 0.0

    def with_samples(self, samples: np.ndarray) -> 'AudioBuffer':
        return AudioBuffer(samples, self.sample_rate)


@dataclass(frozen=True)
class FramingConfig:
    """Short-time analysis layout, in milliseconds"""

    window_ms: float = 20.0
    hop_ms: float = 10.0
    window_kind: str = 'hamming'

    def validate(self):
        if not (0 < self.hop_ms <= self.window_ms):
            raise InvalidConfigError(
                f"need 0 < hop_ms <= window_ms, got hop_ms={self.hop_ms}, window_ms={self.window_ms}"
            )
        return self

    def window_length(self, sample_rate: int) -> int:
        return int(round(self.window_ms * sample_rate / 1000.0))

    def hop_length(self, sample_rate: int) -> int:
        return max(1, int(round(self.hop_ms * sample_rate / 1000.0)))

    def window(self, sample_rate: int) -> np.ndarray:
        """Symmetric analysis window (Hamming endpoints are exactly 0.08)"""
        return analysis_window(self.window_length(sample_rate), self.window_kind)


@dataclass(frozen=True)
class FrameGrid:
    """Where each frame starts, plus the lengths needed to put it back"""

    starts: np.ndarray
    frame_length: int
    hop_length: int
    signal_length: int

    def __len__(self) -> int:
        return len(self.starts)

    @property
    def padded_length(self) -> int:
        if len(self.starts) == 0:
            return 0
        return int(self.starts[-1]) + self.frame_length


def analysis_window(length: int, kind: str = 'hamming') -> np.ndarray:
    return get_window(kind, length, fftbins=False).astype(np.float64)


def frame_count(signal_length: int, frame_length: int, hop_length: int) -> int:
    """ceil((len - L) / H) + 1 for len >= L"""
    return int(math.ceil((signal_length - frame_length) / hop_length)) + 1


# ----------------------------------------------------------------------------
# WAV I/O
# ----------------------------------------------------------------------------

def load_wav(path) -> AudioBuffer:
    """
    Read a PCM/float WAV file as a mono buffer in [-1, 1]
    Multichannel input is averaged to mono.
    """
    path = os.fspath(path)
    if not os.path.exists(path):
        raise AudioFileMissingError(f"Audio file not found: {path}")

    if os.path.getsize(path) == 0:
        raise EmptyAudioError(f"Audio file is empty: {path}")

    try:
        info = sf.info(path)
    except Exception as e:
        raise UnsupportedEncodingError(f"Not a readable audio file: {path} ({e})") from e

    if info.format not in SUPPORTED_FORMATS or info.subtype not in SUPPORTED_SUBTYPES:
        raise UnsupportedEncodingError(
            f"Unsupported encoding {info.format}/{info.subtype} in {path}; "
            f"expected WAV with one of {sorted(SUPPORTED_SUBTYPES)}"
        )

    if info.frames == 0:
        raise EmptyAudioError(f"Audio file has zero samples: {path}")

    try:
        data, sample_rate = sf.read(path, dtype='float64', always_2d=True)
    except Exception as e:
        raise UnsupportedEncodingError(f"Could not decode {path}: {e}") from e

    if data.shape[0] == 0:
        raise EmptyAudioError(f"Audio file has zero samples: {path}")

    # Average channels to mono
    mono = data.mean(axis=1) if data.shape[1] > 1 else data[:, 0]
    return AudioBuffer(mono, sample_rate)


def quantize_pcm16(samples: np.ndarray) -> np.ndarray:
    """Scale by 2^15 and saturate; full-scale +1.0 lands on 32767, never wraps"""
    scaled = np.round(np.asarray(samples, dtype=np.float64) * 32768.0)
    return np.clip(scaled, -32768, 32767).astype(np.int16)


def save_wav(buffer: AudioBuffer, path):
    """Write a 16-bit PCM mono WAV"""
    path = os.fspath(path)
    try:
        sf.write(path, quantize_pcm16(buffer.samples), buffer.sample_rate,
                 format='WAV', subtype='PCM_16')
    except Exception as e:
        raise AudioWriteError(f"Could not write {path}: {e}") from e


# ----------------------------------------------------------------------------
# Framing and reconstruction
# ----------------------------------------------------------------------------

def frame_signal(buffer: AudioBuffer, cfg: FramingConfig) -> Tuple[np.ndarray, FrameGrid]:
    """
    Cut the buffer into windowed frames
    Returns a (n_frames, L) array and the grid needed by overlap_add.
    The final partial frame is zero-padded so nothing is dropped.
    """
    cfg.validate()
    frame_length = cfg.window_length(buffer.sample_rate)
    hop_length = cfg.hop_length(buffer.sample_rate)
    n = len(buffer.samples)

    if n < frame_length:
        raise SignalTooShortError(
            f"{n} samples is shorter than one {frame_length}-sample window"
        )

    n_frames = frame_count(n, frame_length, hop_length)
    starts = np.arange(n_frames, dtype=np.int64) * hop_length
    padded = np.zeros(int(starts[-1]) + frame_length)
    padded[:n] = buffer.samples

    index = starts[:, None] + np.arange(frame_length)[None, :]
    frames = padded[index] * cfg.window(buffer.sample_rate)[None, :]

    grid = FrameGrid(starts=starts, frame_length=frame_length,
                     hop_length=hop_length, signal_length=n)
    return frames, grid


def overlap_add(frames: np.ndarray, grid: FrameGrid, cfg: FramingConfig, out_len: int) -> np.ndarray:
    """
    Sum frames at their grid positions and divide by the summed windows
    Windowing happens once at analysis, so the plain window sum (not squared)
    undoes it exactly. Positions with window sum below 1e-6 come out as 0.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape != (len(grid.starts), grid.frame_length):
        raise FrameGridMismatchError(
            f"frames shape {frames.shape} does not match grid "
            f"({len(grid.starts)}, {grid.frame_length})"
        )

    window = analysis_window(grid.frame_length, cfg.window_kind)
    total = max(grid.padded_length, out_len)
    acc = np.zeros(total)
    window_sum = np.zeros(total)

    for start, frame in zip(grid.starts, frames):
        acc[start:start + grid.frame_length] += frame
        window_sum[start:start + grid.frame_length] += window

    out = np.zeros(total)
    covered = window_sum >= WINDOW_SUM_FLOOR
    out[covered] = acc[covered] / window_sum[covered]
    return out[:out_len]


def limit_peak(samples: np.ndarray, peak_limit: float = 0.999) -> Tuple[np.ndarray, bool]:
    """Rescale the whole signal to peak_limit if it exceeds it"""
    peak = float(np.max(np.abs(samples))) if len(samples) else 0.0
    if peak > peak_limit:
        # clip guards the last ulp of the rescale
        scaled = np.clip(samples * (peak_limit / peak), -peak_limit, peak_limit)
        return scaled, True
    return samples, False


def frame_rms(frames: np.ndarray) -> np.ndarray:
    return np.sqrt(np.mean(np.square(frames), axis=-1))
