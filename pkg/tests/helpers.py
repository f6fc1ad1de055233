"""
Shared fixtures for the test suite
"""

import os
from typing import List, Sequence

import numpy as np
from scipy.signal import lfilter

from formant_analysis import synthetic_vowel
from lpc_engine import LpcModel, autocorrelate, levinson_durbin, lpc_envelope, pick_formant_peaks
from pole_warp import PoleSet, poly_from_roots
from signal_core import AudioBuffer, analysis_window, save_wav


def random_pole_set(rng: np.random.Generator, order: int,
                    magnitude_range=(0.3, 0.9), phase_margin: float = 0.1) -> PoleSet:
    """order // 2 conjugate pairs plus one real root when order is odd"""
    n_pairs = order // 2
    magnitudes = rng.uniform(*magnitude_range, size=n_pairs)
    phases = rng.uniform(phase_margin, np.pi - phase_margin, size=n_pairs)
    reals = []
    if order % 2:
        reals = [rng.uniform(*magnitude_range) * rng.choice([-1.0, 1.0])]
    return PoleSet.from_pairs(list(zip(magnitudes, phases)), reals=reals)


def random_stable_model(rng: np.random.Generator, order: int, **kwargs) -> LpcModel:
    return poly_from_roots(random_pole_set(rng, order, **kwargs))


def ar_noise(rng: np.random.Generator, model: LpcModel, n: int, warmup: int = 500) -> np.ndarray:
    """White noise through 1/A(z), transient discarded"""
    noise = rng.standard_normal(n + warmup)
    return lfilter([1.0], model.polynomial, noise)[warmup:]


def measure_formants(samples: np.ndarray, sample_rate: int, n_peaks: int = 3,
                     order: int = 18, n_bins: int = 2048) -> List[float]:
    """
    Long-window LPC formant estimate over the middle half of a signal
    """
    n = len(samples)
    middle = np.asarray(samples[n // 4: 3 * n // 4], dtype=np.float64)
    frame = middle * analysis_window(len(middle))
    model = levinson_durbin(autocorrelate(frame, order))
    peaks = pick_formant_peaks(lpc_envelope(model, sample_rate, n_bins), max_peaks=n_peaks)
    return [p.freq_hz for p in peaks]


def envelope_peak_oracle(model: LpcModel, sample_rate: int, lo_hz: float, hi_hz: float,
                         n_points: int = 200001) -> float:
    """Frequency of max 1/|A| between lo_hz and hi_hz on a dense grid"""
    freqs = np.linspace(lo_hz, hi_hz, n_points)
    z = np.exp(-1j * 2 * np.pi * freqs / sample_rate)
    a = np.polyval(model.polynomial[::-1], z)
    return float(freqs[np.argmin(np.abs(a))])


def speech_like_utterance(sample_rate: int = 16000, seed: int = 0) -> AudioBuffer:
    """
    Two vowels with a syllabic amplitude contour separated by a silent gap
    """
    first = synthetic_vowel(sample_rate, 0.5, (700.0, 1200.0, 2600.0), seed=seed).samples
    second = synthetic_vowel(sample_rate, 0.5, (300.0, 2200.0, 3000.0), seed=seed + 1).samples
    gap = np.zeros(sample_rate // 5)

    def contour(n):
        return np.sin(np.linspace(0, np.pi, n)) ** 0.5

    samples = np.concatenate((first * contour(len(first)), gap, second * contour(len(second))))
    return AudioBuffer(samples, sample_rate)


def write_vowels(directory: str, count: int, sample_rate: int = 16000,
                 duration_s: float = 1.0) -> List[str]:
    """count distinct synthetic vowels as utt00.wav, utt01.wav, ..."""
    paths = []
    for i in range(count):
        path = os.path.join(directory, f"utt{i:02d}.wav")
        formants = (450.0 + 20 * i, 1400.0 + 40 * i, 2500.0)
        save_wav(synthetic_vowel(sample_rate, duration_s, formants, seed=i), path)
        paths.append(path)
    return paths


def write_jsonl(path: str, lines: Sequence[str]):
    with open(path, 'w', encoding='utf-8') as f:
        f.write('\n'.join(lines) + '\n')
