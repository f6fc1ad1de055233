"""
LPC Engine Module
Per-frame linear prediction: autocorrelation, Levinson-Durbin,
inverse/all-pole filtering and spectral envelopes

Sign convention throughout: A(z) = 1 - sum_k a_k z^-k
"""

import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional

import numpy as np
import pandas as pd
from scipy.signal import find_peaks, freqz, lfilter

from errors import DegenerateFrameError, NumericalDegeneracyError

logger = logging.getLogger(__name__)

# White-noise floor added to r[0]
AUTOCORR_REGULARIZATION = 1e-9
# |A| floor before taking the log (pole on the unit circle)
ENVELOPE_FLOOR = 1e-12
MIN_ENVELOPE_BINS = 16
PEAK_PROMINENCE_DB = 1.0
PEAK_MIN_SPACING_HZ = 100.0


@dataclass(frozen=True)
class LpcModel:
    """Prediction coefficients a_1..a_P for one frame"""

    order: int
    coeffs: np.ndarray
    residual_energy: float = 0.0
    reflection: Optional[np.ndarray] = None

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.float64).reshape(-1)
        if len(coeffs) != self.order:
            raise ValueError(f"expected {self.order} coefficients, got {len(coeffs)}")
        object.__setattr__(self, 'coeffs', coeffs)

    @property
    def polynomial(self) -> np.ndarray:
        """[1, -a_1, ..., -a_P]: A(z) in powers of z^-1 (also z^P A(z) in powers of z)"""
        return np.concatenate(([1.0], -self.coeffs))

    @classmethod
    def from_polynomial(cls, poly: np.ndarray, residual_energy: float = 0.0) -> 'LpcModel':
        poly = np.asarray(poly, dtype=np.float64)
        return cls(order=len(poly) - 1, coeffs=-poly[1:] / poly[0],
                   residual_energy=residual_energy)

    @classmethod
    def zeros(cls, order: int) -> 'LpcModel':
        return cls(order=order, coeffs=np.zeros(order))


@dataclass(frozen=True)
class SpectralEnvelope:
    """-20 log10 |A(e^jw)| sampled on [0, fs/2]"""

    freqs_hz: np.ndarray
    magnitude_db: np.ndarray

    @property
    def bin_width_hz(self) -> float:
        return float(self.freqs_hz[1] - self.freqs_hz[0])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'freq_hz': self.freqs_hz, 'magnitude_db': self.magnitude_db})

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False)


class FormantPeak(NamedTuple):
    freq_hz: float
    magnitude_db: float


def compute_lpc_order(sample_rate: int) -> int:
    """
    Prediction order P = 2 * F_max(kHz) + 2 with F_max = fs / 2
    Non-integer kHz rates round half up: 44100 -> 46.
    """
    if sample_rate <= 0:
        raise ValueError(f"sample_rate must be positive, got {sample_rate}")
    return int(math.floor(sample_rate / 1000.0 + 0.5)) + 2


def autocorrelate(frame: np.ndarray, order: int) -> np.ndarray:
    """Lags r[0..P] of a windowed frame, with r[0] lifted by (1 + 1e-9)"""
    frame = np.asarray(frame, dtype=np.float64)
    n = len(frame)
    if n == 0:
        raise ValueError("cannot autocorrelate an empty frame")
    if order >= n:
        raise ValueError(f"order {order} must be smaller than frame length {n}")

    full = np.correlate(frame, frame, mode='full')
    r = full[n - 1:n + order].copy()
    r[0] *= 1.0 + AUTOCORR_REGULARIZATION
    return r


def levinson_durbin(r: np.ndarray) -> LpcModel:
    """
    Solve the Toeplitz normal equations for a_1..a_P
    Order is len(r) - 1. Raises DegenerateFrameError on a zero-energy frame
    and NumericalDegeneracyError if a reflection coefficient reaches 1.
    """
    r = np.asarray(r, dtype=np.float64)
    order = len(r) - 1
    if order < 1:
        raise ValueError("need at least lags r[0] and r[1]")
    if not r[0] > 0:
        raise DegenerateFrameError(f"r[0] = {r[0]!r}: frame has no energy")

    a = np.zeros(order)
    reflection = np.zeros(order)
    error = r[0]

    for i in range(order):
        # r[i], r[i-1], ..., r[1] against a_1..a_i
        acc = r[i + 1] - np.dot(a[:i], r[i:0:-1])
        k = acc / error
        if not abs(k) < 1.0:
            raise NumericalDegeneracyError(
                f"reflection coefficient {k!r} at stage {i + 1} is outside the unit circle"
            )
        reflection[i] = k
        previous = a[:i].copy()
        a[:i] = previous - k * previous[::-1]
        a[i] = k
        error *= 1.0 - k * k
        if not error > 0:
            raise NumericalDegeneracyError(f"prediction error vanished at stage {i + 1}")

    return LpcModel(order=order, coeffs=a, residual_energy=float(error), reflection=reflection)


def inverse_filter(frame: np.ndarray, model: LpcModel) -> np.ndarray:
    """e[n] = s[n] - sum a_k s[n-k], zero initial conditions"""
    return lfilter(model.polynomial, [1.0], np.asarray(frame, dtype=np.float64))


def allpole_filter(residual: np.ndarray, model: LpcModel) -> np.ndarray:
    """s[n] = e[n] + sum a_k s[n-k], zero initial conditions"""
    return lfilter([1.0], model.polynomial, np.asarray(residual, dtype=np.float64))


def lpc_envelope(model: LpcModel, sample_rate: int, n_bins: int = 512) -> SpectralEnvelope:
    """
    Relative LPC envelope (no gain term) at n_bins points from 0 to Nyquist
    """
    if n_bins < MIN_ENVELOPE_BINS:
        raise ValueError(f"n_bins must be >= {MIN_ENVELOPE_BINS}, got {n_bins}")

    omega = np.pi * np.arange(n_bins) / (n_bins - 1)
    _, response = freqz(model.polynomial, [1.0], worN=omega)
    magnitude = np.maximum(np.abs(response), ENVELOPE_FLOOR)

    return SpectralEnvelope(
        freqs_hz=omega * sample_rate / (2.0 * np.pi),
        magnitude_db=-20.0 * np.log10(magnitude),
    )


def pick_formant_peaks(env: SpectralEnvelope, max_peaks: int = 5) -> List[FormantPeak]:
    """
    Local envelope maxima with >= 1 dB prominence, >= 100 Hz apart,
    lowest frequencies first
    """
    if max_peaks <= 0 or len(env.freqs_hz) < 3:
        return []

    spacing_bins = max(1, int(math.ceil(PEAK_MIN_SPACING_HZ / env.bin_width_hz)))
    peaks, _ = find_peaks(env.magnitude_db, prominence=PEAK_PROMINENCE_DB,
                          distance=spacing_bins)

    return [
        FormantPeak(float(env.freqs_hz[i]), float(env.magnitude_db[i]))
        for i in peaks[:max_peaks]
    ]


def analyze_frame(frame: np.ndarray, order: int) -> LpcModel:
    """autocorrelate + levinson_durbin in one call"""
    return levinson_durbin(autocorrelate(frame, order))
