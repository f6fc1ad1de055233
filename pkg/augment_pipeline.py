"""
Augment Pipeline Module
Runs the per-frame LPC analysis -> pole warp -> resynthesis chain over whole
utterances, with one warp plan held constant across every frame
"""

import dataclasses
import hashlib
import logging
from dataclasses import dataclass, field
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd

from errors import FrameDegeneracyError, InvalidConfigError, InvalidWarpRangeError, SignalTooShortError
from lpc_engine import (
    LpcModel,
    allpole_filter,
    autocorrelate,
    compute_lpc_order,
    inverse_filter,
    levinson_durbin,
)
from pole_warp import (
    PoleSet,
    WarpPlan,
    classify_and_sort,
    find_roots,
    poly_from_roots,
    rotate_phases,
    sample_warp_factors,
    warp_poles,
)
from signal_core import AudioBuffer, FramingConfig, frame_rms, frame_signal, limit_peak, overlap_add

logger = logging.getLogger(__name__)

# Warp ranges from the validation sweep; 'wide' generalised best across dialects
WARP_PRESETS: Dict[str, Tuple[float, float]] = {
    'lower': (0.8, 1.0),
    'upper': (1.0, 1.2),
    'wide': (0.8, 1.2),
    'narrow': (0.9, 1.1),
    'widest': (0.7, 1.3),
}
DEFAULT_PRESET = 'wide'

POLE_DUMP_COLUMNS = ['frame_index', 'pair_index', 'magnitude', 'phase_before',
                     'phase_after', 'magnitude_after', 'factor']


@dataclass(frozen=True)
class AugmentConfig:
    """Everything that shapes one augmentation run"""

    warp_lo: float = 0.8
    warp_hi: float = 1.2
    window_ms: float = 20.0
    hop_ms: float = 10.0
    silence_rms_threshold: float = 1e-5
    peak_limit: float = 0.999
    energy_match: bool = False
    lpc_order: Optional[int] = None

    def validate(self) -> 'AugmentConfig':
        if not (np.isfinite(self.warp_lo) and np.isfinite(self.warp_hi)) \
                or not (0 < self.warp_lo <= self.warp_hi):
            raise InvalidWarpRangeError(
                f"need 0 < warp_lo <= warp_hi, got [{self.warp_lo}, {self.warp_hi}]"
            )
        if not self.silence_rms_threshold > 0:
            raise InvalidConfigError(f"silence_rms_threshold must be positive, got {self.silence_rms_threshold}")
        if not (0 < self.peak_limit <= 1.0):
            raise InvalidConfigError(f"peak_limit must be in (0, 1], got {self.peak_limit}")
        if self.lpc_order is not None and self.lpc_order < 1:
            raise InvalidConfigError(f"lpc_order must be >= 1, got {self.lpc_order}")
        self.framing.validate()
        return self

    @property
    def framing(self) -> FramingConfig:
        return FramingConfig(window_ms=self.window_ms, hop_ms=self.hop_ms)

    def order_for(self, sample_rate: int) -> int:
        return self.lpc_order if self.lpc_order is not None else compute_lpc_order(sample_rate)

    def with_preset(self, name: str) -> 'AugmentConfig':
        if name not in WARP_PRESETS:
            raise InvalidConfigError(f"unknown warp preset {name!r}; choose from {sorted(WARP_PRESETS)}")
        lo, hi = WARP_PRESETS[name]
        return dataclasses.replace(self, warp_lo=lo, warp_hi=hi)

    def to_dict(self) -> Dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class UtteranceSeed:
    """
    Identity of one augmented copy
    seed_material = first 16 bytes (big-endian) of
    sha256(f"{global_seed}\\x1f{utterance_id}\\x1f{copy_index}")
    """

    global_seed: int
    utterance_id: str
    copy_index: int

    @property
    def seed_material(self) -> int:
        key = f"{int(self.global_seed)}\x1f{self.utterance_id}\x1f{int(self.copy_index)}"
        digest = hashlib.sha256(key.encode('utf-8')).digest()
        return int.from_bytes(digest[:16], 'big')


class PoleTrace(NamedTuple):
    """Pair magnitudes/phases before and after warping, in pre-warp phase order"""
    magnitude_before: np.ndarray
    magnitude_after: np.ndarray
    phase_before: np.ndarray
    phase_after: np.ndarray
    factors: np.ndarray


class FrameResult(NamedTuple):
    samples: np.ndarray
    passthrough: bool
    reason: Optional[str] = None
    source_model: Optional[LpcModel] = None
    warped_model: Optional[LpcModel] = None
    trace: Optional[PoleTrace] = None


@dataclass
class AugmentResult:
    """One augmented utterance plus what happened while making it"""

    buffer: AudioBuffer
    plan: WarpPlan
    total_frames: int = 0
    passthrough_frames: int = 0
    peak_limited: bool = False
    too_short: bool = False
    traces: Dict[int, PoleTrace] = field(default_factory=dict)

    def pole_dump(self) -> pd.DataFrame:
        """Per-frame, per-pair warp audit table"""
        rows = []
        for frame_index in sorted(self.traces):
            trace = self.traces[frame_index]
            for pair_index in range(len(trace.phase_before)):
                rows.append({
                    'frame_index': frame_index,
                    'pair_index': pair_index,
                    'magnitude': float(trace.magnitude_before[pair_index]),
                    'phase_before': float(trace.phase_before[pair_index]),
                    'phase_after': float(trace.phase_after[pair_index]),
                    'magnitude_after': float(trace.magnitude_after[pair_index]),
                    'factor': float(trace.factors[pair_index]),
                })
        return pd.DataFrame(rows, columns=POLE_DUMP_COLUMNS)


def _trace(poles: PoleSet, warped: PoleSet, plan: WarpPlan) -> PoleTrace:
    # Rows stay in pre-warp order: undo the re-sort warp_poles applied
    factors = plan.factors[:len(poles.pair_phases)]
    after = rotate_phases(poles.pair_phases, factors)
    resort = np.argsort(after, kind='stable')
    magnitude_after = np.empty_like(poles.pair_magnitudes)
    magnitude_after[resort] = warped.pair_magnitudes
    return PoleTrace(
        magnitude_before=poles.pair_magnitudes.copy(),
        magnitude_after=magnitude_after,
        phase_before=poles.pair_phases.copy(),
        phase_after=after,
        factors=factors.copy(),
    )


class LpcAugmenter:
    """
    Applies one warp plan to every frame of an utterance
    """

    def __init__(self, cfg: AugmentConfig):
        self.cfg = cfg.validate()

    def augment_frame(self, frame: np.ndarray, plan: WarpPlan, order: int) -> FrameResult:
        """
        autocorrelate -> levinson_durbin -> inverse_filter -> find_roots ->
        classify_and_sort -> warp_poles -> poly_from_roots -> allpole_filter
        Any frame degeneracy returns the input frame unchanged, flagged.
        """
        frame = np.asarray(frame, dtype=np.float64)
        try:
            # LPC coefficients and residual
            model = levinson_durbin(autocorrelate(frame, order))
            residual = inverse_filter(frame, model)

            # roots, warp, new polynomial
            poles = classify_and_sort(find_roots(model))
            warped_poles = warp_poles(poles, plan)
            warped_model = poly_from_roots(warped_poles, residual_energy=model.residual_energy)
        except FrameDegeneracyError as e:
            return FrameResult(frame, True, f"{type(e).__name__}: {e}")

        # resynthesis through 1/A_hat(z)
        output = allpole_filter(residual, warped_model)
        if not np.all(np.isfinite(output)):
            return FrameResult(frame, True, "non-finite synthesis output",
                               source_model=model, warped_model=warped_model)

        if self.cfg.energy_match:
            output = self._match_energy(frame, output)

        return FrameResult(output, False, None, model, warped_model, _trace(poles, warped_poles, plan))

    @staticmethod
    def _match_energy(source: np.ndarray, output: np.ndarray) -> np.ndarray:
        out_energy = float(np.dot(output, output))
        if out_energy <= 0:
            return output
        return output * np.sqrt(float(np.dot(source, source)) / out_energy)

    def draw_plan(self, seed: UtteranceSeed, order: int) -> WarpPlan:
        return sample_warp_factors(self.cfg.warp_lo, self.cfg.warp_hi, order // 2, seed.seed_material)

    def augment_utterance(self, buffer: AudioBuffer, seed: Optional[UtteranceSeed] = None,
                          plan: Optional[WarpPlan] = None, collect_traces: bool = False) -> AugmentResult:
        """
        Frame, perturb every non-silent frame with one plan, overlap-add,
        peak-limit. Output length always equals input length.
        """
        order = self.cfg.order_for(buffer.sample_rate)
        framing = self.cfg.framing

        if plan is None:
            if seed is None:
                raise ValueError("augment_utterance needs a seed or an explicit plan")
            plan = self.draw_plan(seed, order)

        if framing.window_length(buffer.sample_rate) < 2 * order:
            raise InvalidConfigError(
                f"{framing.window_length(buffer.sample_rate)}-sample window is too short "
                f"for order {order} at {buffer.sample_rate} Hz"
            )

        try:
            frames, grid = frame_signal(buffer, framing)
        except SignalTooShortError as e:
            logger.warning("Passing utterance through unmodified: %s", e)
            # the output range still holds; anything under the limit is returned bit-identical
            samples, limited = limit_peak(buffer.samples, self.cfg.peak_limit)
            if limited:
                logger.warning("Peak limited short utterance to %.3f", self.cfg.peak_limit)
                buffer = AudioBuffer(samples, buffer.sample_rate)
            return AugmentResult(buffer=buffer, plan=plan, too_short=True, peak_limited=limited)

        result = AugmentResult(buffer=buffer, plan=plan, total_frames=len(frames))
        rms = frame_rms(frames)
        output = np.empty_like(frames)

        for i, frame in enumerate(frames):
            if rms[i] < self.cfg.silence_rms_threshold:
                output[i] = frame
                result.passthrough_frames += 1
                continue

            frame_result = self.augment_frame(frame, plan, order)
            output[i] = frame_result.samples
            if frame_result.passthrough:
                result.passthrough_frames += 1
                logger.debug("Frame %d passed through: %s", i, frame_result.reason)
            elif collect_traces:
                result.traces[i] = frame_result.trace

        samples = overlap_add(output, grid, framing, len(buffer))
        samples, result.peak_limited = limit_peak(samples, self.cfg.peak_limit)
        if result.peak_limited:
            logger.warning("Peak limited utterance to %.3f", self.cfg.peak_limit)

        result.buffer = buffer.with_samples(samples)
        return result


def augment_frame(frame: np.ndarray, plan: WarpPlan, order: int,
                  cfg: Optional[AugmentConfig] = None) -> FrameResult:
    """Perturb one windowed frame"""
    return LpcAugmenter(cfg or AugmentConfig()).augment_frame(frame, plan, order)


def augment_utterance(buffer: AudioBuffer, cfg: AugmentConfig, seed: Optional[UtteranceSeed] = None,
                      plan: Optional[WarpPlan] = None, collect_traces: bool = False) -> AugmentResult:
    """
    Main function to augment one utterance
    """
    return LpcAugmenter(cfg).augment_utterance(buffer, seed=seed, plan=plan,
                                               collect_traces=collect_traces)
