"""
Pole Warp Module
Factor A(z) into roots, pair conjugates, rotate pair phases by per-utterance
warping factors and rebuild a stable real polynomial
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from errors import ConjugacyError, InvalidWarpRangeError, RootFindingError
from lpc_engine import LpcModel

logger = logging.getLogger(__name__)

REAL_ROOT_TOLERANCE = 1e-8
CONJUGATE_TOLERANCE = 1e-6
MAX_POLE_MAGNITUDE = 0.9999
PHASE_FLOOR = 1e-3
PHASE_CEIL = np.pi - 1e-3
ROOT_RESIDUAL_TOLERANCE = 1e-6


def _readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PoleSet:
    """
    Roots of A(z): one (magnitude, phase) per conjugate pair, phases ascending
    in (0, pi), plus the real roots as signed values
    """

    pair_magnitudes: np.ndarray
    pair_phases: np.ndarray
    reals: np.ndarray = field(default_factory=lambda: _readonly([]))

    def __post_init__(self):
        mags = _readonly(self.pair_magnitudes)
        phases = _readonly(self.pair_phases)
        if len(mags) != len(phases):
            raise ValueError("pair magnitudes and phases differ in length")
        object.__setattr__(self, 'pair_magnitudes', mags)
        object.__setattr__(self, 'pair_phases', phases)
        object.__setattr__(self, 'reals', _readonly(self.reals))

    @classmethod
    def from_pairs(cls, pairs: Sequence[Tuple[float, float]], reals: Sequence[float] = ()) -> 'PoleSet':
        pairs = sorted(pairs, key=lambda p: p[1])
        return cls(pair_magnitudes=[m for m, _ in pairs],
                   pair_phases=[t for _, t in pairs],
                   reals=list(reals))

    @property
    def pairs(self) -> List[Tuple[float, float]]:
        return list(zip(self.pair_magnitudes.tolist(), self.pair_phases.tolist()))

    @property
    def degree(self) -> int:
        return 2 * len(self.pair_phases) + len(self.reals)

    def complex_roots(self) -> np.ndarray:
        upper = self.pair_magnitudes * np.exp(1j * self.pair_phases)
        return np.concatenate((upper, np.conj(upper), self.reals.astype(np.complex128)))


@dataclass(frozen=True)
class WarpPlan:
    """
    Warping factors for one utterance, shared read-only by all its frames
    Factor i applies to the i-th lowest-phase pair of every frame.
    """

    factors: np.ndarray
    range_lo: float
    range_hi: float
    seed_material: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, 'factors', _readonly(self.factors))

    def __len__(self) -> int:
        return len(self.factors)

    @classmethod
    def identity(cls, count: int) -> 'WarpPlan':
        return cls(factors=np.ones(count), range_lo=1.0, range_hi=1.0)

    @classmethod
    def forced(cls, factors: Sequence[float], count: int) -> 'WarpPlan':
        """
        Explicit factor vector, cycled (or truncated) to count entries
        [0.9, 1.1] with count 5 -> [0.9, 1.1, 0.9, 1.1, 0.9]
        """
        factors = np.asarray(factors, dtype=np.float64).reshape(-1)
        if len(factors) == 0:
            raise InvalidWarpRangeError("forced factor vector is empty")
        if not np.all(np.isfinite(factors)) or np.any(factors <= 0):
            raise InvalidWarpRangeError(f"forced factors must be positive and finite, got {factors.tolist()}")
        cycled = np.resize(factors, count)
        return cls(factors=cycled, range_lo=float(factors.min()), range_hi=float(factors.max()))


def _validate_range(range_lo: float, range_hi: float):
    if not (np.isfinite(range_lo) and np.isfinite(range_hi)):
        raise InvalidWarpRangeError(f"warp range must be finite, got [{range_lo}, {range_hi}]")
    if not (0 < range_lo <= range_hi):
        raise InvalidWarpRangeError(f"need 0 < warp_lo <= warp_hi, got [{range_lo}, {range_hi}]")


def find_roots(model: LpcModel) -> np.ndarray:
    """
    The P roots of z^P - a_1 z^(P-1) - ... - a_P (companion-matrix eigenvalues)
    """
    if model.order < 1:
        raise ValueError("model order must be >= 1")

    poly = model.polynomial
    try:
        roots = np.roots(poly)
    except np.linalg.LinAlgError as e:
        raise RootFindingError(f"eigenvalue solver did not converge: {e}") from e

    if len(roots) != model.order or not np.all(np.isfinite(roots)):
        raise RootFindingError(f"root solver returned {len(roots)} roots for order {model.order}")

    # Backward-error check: |A(r)| relative to the size of its terms
    powers = np.arange(model.order, -1, -1)
    for root in roots:
        value = abs(np.polyval(poly, root))
        scale = np.sum(np.abs(poly) * np.abs(root) ** powers)
        if value > ROOT_RESIDUAL_TOLERANCE * max(scale, 1.0):
            raise RootFindingError(f"root {root!r} leaves residual {value:.3e}")

    return roots


def classify_and_sort(roots: np.ndarray) -> PoleSet:
    """
    Split roots into real roots and conjugate pairs
    Pairs are kept as their upper-half-plane member and sorted by phase;
    magnitudes are clamped to 0.9999.
    """
    roots = np.asarray(roots, dtype=np.complex128)
    is_real = np.abs(roots.imag) < REAL_ROOT_TOLERANCE
    reals = np.clip(roots[is_real].real, -MAX_POLE_MAGNITUDE, MAX_POLE_MAGNITUDE)

    upper = roots[~is_real & (roots.imag > 0)]
    lower = list(roots[~is_real & (roots.imag < 0)])
    if len(upper) != len(lower):
        raise ConjugacyError(f"{len(upper)} upper vs {len(lower)} lower complex roots")

    magnitudes = []
    phases = []
    for root in upper:
        # greedy: nearest remaining lower root to this root's conjugate
        distances = [abs(candidate - np.conj(root)) for candidate in lower]
        best = int(np.argmin(distances))
        if distances[best] > CONJUGATE_TOLERANCE:
            raise ConjugacyError(f"root {root!r} has no conjugate within {CONJUGATE_TOLERANCE}")
        lower.pop(best)
        magnitudes.append(min(abs(root), MAX_POLE_MAGNITUDE))
        phases.append(float(np.angle(root)))

    order = np.argsort(phases, kind='stable')
    return PoleSet(pair_magnitudes=np.asarray(magnitudes)[order],
                   pair_phases=np.asarray(phases)[order],
                   reals=reals)


def seed_generator(seed_material: int) -> np.random.Generator:
    """PCG64 stream seeded directly by the utterance's seed material"""
    return np.random.Generator(np.random.PCG64(seed_material))


def sample_warp_factors(range_lo: float, range_hi: float, count: int, seed_material: int) -> WarpPlan:
    """count independent U[range_lo, range_hi] draws; same seed, same factors"""
    _validate_range(range_lo, range_hi)
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")

    rng = seed_generator(seed_material)
    factors = rng.uniform(range_lo, range_hi, size=count)
    # uniform() can round onto range_hi; keep the closed interval explicit
    factors = np.clip(factors, range_lo, range_hi)
    return WarpPlan(factors=factors, range_lo=float(range_lo), range_hi=float(range_hi),
                    seed_material=seed_material)


def rotate_phases(phases: np.ndarray, factors: np.ndarray) -> np.ndarray:
    """w * theta clamped to [1e-3, pi - 1e-3], element by element"""
    warped = np.clip(factors * phases, PHASE_FLOOR, PHASE_CEIL)
    # unit factors leave the pair exactly where it was
    return np.where(factors == 1.0, phases, warped)


def warp_poles(poles: PoleSet, plan: WarpPlan) -> PoleSet:
    """
    Pair i gets phase w_i * theta_i, clamped to [1e-3, pi - 1e-3]
    Magnitudes and real roots are untouched; the result is re-sorted by phase.
    """
    n_pairs = len(poles.pair_phases)
    if len(plan.factors) < n_pairs:
        raise ValueError(f"plan has {len(plan.factors)} factors for {n_pairs} pole pairs")

    phases = rotate_phases(poles.pair_phases, plan.factors[:n_pairs])
    order = np.argsort(phases, kind='stable')
    return PoleSet(pair_magnitudes=poles.pair_magnitudes[order],
                   pair_phases=phases[order],
                   reals=poles.reals)


def poly_from_roots(poles: PoleSet, residual_energy: float = 0.0) -> LpcModel:
    """
    Expand the monic real polynomial with these roots
    Each pair contributes z^2 - 2m cos(theta) z + m^2, each real root z - r.
    """
    poly = np.array([1.0])
    for magnitude, phase in zip(poles.pair_magnitudes, poles.pair_phases):
        poly = np.convolve(poly, [1.0, -2.0 * magnitude * np.cos(phase), magnitude * magnitude])
    for root in poles.reals:
        poly = np.convolve(poly, [1.0, -root])

    return LpcModel.from_polynomial(poly, residual_energy=residual_energy)


def warp_model(model: LpcModel, plan: WarpPlan) -> Tuple[LpcModel, PoleSet, PoleSet]:
    """find_roots -> classify_and_sort -> warp_poles -> poly_from_roots"""
    poles = classify_and_sort(find_roots(model))
    warped = warp_poles(poles, plan)
    return poly_from_roots(warped, residual_energy=model.residual_energy), poles, warped
