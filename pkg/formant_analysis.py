"""
Formant Analysis Module
Measures how far LPC Augment moves envelope peaks on a single frame
and draws the before/after envelope overlay
"""

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import plotly.graph_objects as go
from scipy.signal import lfilter

from augment_pipeline import AugmentConfig, FrameResult, LpcAugmenter, PoleTrace, UtteranceSeed
from errors import NoVoicedFrameError
from lpc_engine import FormantPeak, SpectralEnvelope, lpc_envelope, pick_formant_peaks
from pole_warp import PoleSet, WarpPlan, poly_from_roots
from signal_core import AudioBuffer, frame_rms, frame_signal

logger = logging.getLogger(__name__)

PEAK_TABLE_COLUMNS = ['peak_index', 'freq_before_hz', 'freq_after_hz', 'shift_hz']

# Resonances above the first three formants, and two real poles for spectral
# tilt. At 16 kHz this makes the synthetic vocal tract exactly order 18.
UPPER_RESONANCES_HZ = (3500.0, 4500.0, 5500.0, 6500.0, 7200.0)
UPPER_BANDWIDTH_HZ = 300.0
TILT_POLES = (0.6, -0.4)


def resonance_radius(bandwidth_hz: float, sample_rate: int) -> float:
    """Pole radius giving a -3 dB bandwidth of bandwidth_hz"""
    return float(np.exp(-np.pi * bandwidth_hz / sample_rate))


def vocal_tract_poles(sample_rate: int,
                      formants_hz: Sequence[float] = (500.0, 1500.0, 2500.0),
                      bandwidths_hz: Sequence[float] = (80.0, 100.0, 120.0)) -> PoleSet:
    """All-pole vocal tract: given formants, upper resonances, tilt poles"""
    pairs = []
    for freq, bw in zip(formants_hz, bandwidths_hz):
        pairs.append((resonance_radius(bw, sample_rate), 2 * np.pi * freq / sample_rate))
    for freq in UPPER_RESONANCES_HZ:
        if freq <= 0.45 * sample_rate:
            pairs.append((resonance_radius(UPPER_BANDWIDTH_HZ, sample_rate), 2 * np.pi * freq / sample_rate))
    return PoleSet.from_pairs(pairs, reals=TILT_POLES)


def synthetic_vowel(sample_rate: int = 16000, duration_s: float = 1.0,
                    formants_hz: Sequence[float] = (500.0, 1500.0, 2500.0),
                    bandwidths_hz: Sequence[float] = (80.0, 100.0, 120.0),
                    seed: int = 0, peak: float = 0.5) -> AudioBuffer:
    """
    Whispered vowel: seeded white noise through the vocal_tract_poles filter,
    scaled to the given peak
    """
    model = poly_from_roots(vocal_tract_poles(sample_rate, formants_hz, bandwidths_hz))
    n = int(round(duration_s * sample_rate))
    warmup = 4 * sample_rate // 10

    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(n + warmup)
    samples = lfilter([1.0], model.polynomial, noise)[warmup:]
    samples *= peak / np.max(np.abs(samples))
    return AudioBuffer(samples, sample_rate)


class FormantShiftAnalyzer:
    """
    Picks one frame of a buffer, warps it and compares envelope peaks
    """

    def __init__(self, buffer: AudioBuffer, cfg: AugmentConfig):
        self.buffer = buffer
        self.cfg = cfg.validate()
        self.augmenter = LpcAugmenter(cfg)
        self.order = cfg.order_for(buffer.sample_rate)
        self.frames, self.grid = frame_signal(buffer, cfg.framing)

    def select_frame(self, frame_index: Optional[int] = None) -> int:
        """Highest-RMS frame unless one is asked for"""
        rms = frame_rms(self.frames)
        if frame_index is not None:
            if not 0 <= frame_index < len(self.frames):
                raise IndexError(f"frame {frame_index} out of range 0..{len(self.frames) - 1}")
            if rms[frame_index] < self.cfg.silence_rms_threshold:
                raise NoVoicedFrameError(f"frame {frame_index} is below the silence threshold")
            return frame_index

        best = int(np.argmax(rms))
        if rms[best] < self.cfg.silence_rms_threshold:
            raise NoVoicedFrameError("every frame is below the silence threshold")
        logger.debug("Analysing frame %d (rms %.4g)", best, rms[best])
        return best

    def warp_frame(self, frame_index: int, plan: WarpPlan) -> FrameResult:
        result = self.augmenter.augment_frame(self.frames[frame_index], plan, self.order)
        if result.passthrough:
            raise NoVoicedFrameError(f"frame {frame_index} could not be analysed: {result.reason}")
        return result

    def envelopes(self, result: FrameResult, n_bins: int = 512) -> Dict[str, SpectralEnvelope]:
        return {
            'before': lpc_envelope(result.source_model, self.buffer.sample_rate, n_bins),
            'after': lpc_envelope(result.warped_model, self.buffer.sample_rate, n_bins),
        }

    def peak_table(self, before: List[FormantPeak], after: List[FormantPeak],
                   trace: PoleTrace) -> pd.DataFrame:
        """
        Each pre-warp peak is followed through its pole pair: nearest pair to
        the peak, then the post-warp peak nearest that pair's warped frequency.
        Warped pairs may cross, so rank order is not used.
        """
        if not before or not after or len(trace.phase_before) == 0:
            return pd.DataFrame([], columns=PEAK_TABLE_COLUMNS)

        hz = self.buffer.sample_rate / (2 * np.pi)
        pair_before = trace.phase_before * hz
        pair_after = trace.phase_after * hz
        after_freqs = np.array([p.freq_hz for p in after])

        rows = []
        for i, peak in enumerate(before):
            pair = int(np.argmin(np.abs(pair_before - peak.freq_hz)))
            match = after[int(np.argmin(np.abs(after_freqs - pair_after[pair])))]
            rows.append({
                'peak_index': i,
                'freq_before_hz': peak.freq_hz,
                'freq_after_hz': match.freq_hz,
                'shift_hz': match.freq_hz - peak.freq_hz,
            })
        return pd.DataFrame(rows, columns=PEAK_TABLE_COLUMNS)

    def create_envelope_chart(self, before: SpectralEnvelope, after: SpectralEnvelope,
                              peaks: pd.DataFrame, title: str = '') -> go.Figure:
        """
        Overlay of original and perturbed LPC envelopes with peak markers
        """
        fig = go.Figure()

        fig.add_trace(go.Scatter(
            x=before.freqs_hz,
            y=before.magnitude_db,
            name='Original',
            line=dict(color='#1f77b4', width=2),
            mode='lines'
        ))

        fig.add_trace(go.Scatter(
            x=after.freqs_hz,
            y=after.magnitude_db,
            name='LPC Augment',
            line=dict(color='#ff7f0e', width=2, dash='dash'),
            mode='lines'
        ))

        for _, row in peaks.iterrows():
            fig.add_vline(x=row['freq_before_hz'], line=dict(color='#1f77b4', width=1, dash='dot'))
            fig.add_vline(x=row['freq_after_hz'], line=dict(color='#ff7f0e', width=1, dash='dot'))

        fig.update_layout(
            title=title or 'LPC envelope before and after warping',
            xaxis_title='Frequency (Hz)',
            yaxis_title='Magnitude (dB, relative)',
            hovermode='x unified',
            height=450
        )

        return fig


def analyze_formant_shift(buffer: AudioBuffer, cfg: AugmentConfig,
                          plan: Optional[WarpPlan] = None,
                          seed: Optional[UtteranceSeed] = None,
                          frame_index: Optional[int] = None,
                          n_bins: int = 512, max_peaks: int = 5) -> Dict:
    """
    Main function for single-frame formant shift analysis
    """
    analyzer = FormantShiftAnalyzer(buffer, cfg)

    if plan is None:
        if seed is None:
            raise ValueError("analyze_formant_shift needs a seed or an explicit plan")
        plan = analyzer.augmenter.draw_plan(seed, analyzer.order)

    # Pick and warp the frame
    index = analyzer.select_frame(frame_index)
    result = analyzer.warp_frame(index, plan)

    # Envelopes and peaks
    envelopes = analyzer.envelopes(result, n_bins)
    peaks_before = pick_formant_peaks(envelopes['before'], max_peaks)
    peaks_after = pick_formant_peaks(envelopes['after'], max_peaks)
    peaks = analyzer.peak_table(peaks_before, peaks_after, result.trace)

    chart = analyzer.create_envelope_chart(
        envelopes['before'], envelopes['after'], peaks,
        title=f'Frame {index}: LPC envelope before and after warping'
    )

    trace = result.trace
    trace_table = pd.DataFrame({
        'pair_index': np.arange(len(trace.phase_before)),
        'magnitude': trace.magnitude_before,
        'freq_before_hz': trace.phase_before * buffer.sample_rate / (2 * np.pi),
        'freq_after_hz': trace.phase_after * buffer.sample_rate / (2 * np.pi),
        'factor': trace.factors,
    })

    return {
        'frame_index': index,
        'order': analyzer.order,
        'plan': plan,
        'before': envelopes['before'],
        'after': envelopes['after'],
        'peaks': peaks,
        'poles': trace_table,
        'chart': chart
    }
