"""polarization analyzers, threshold detectors and click statistics

detector layout: the trigger watches mode b; D2 watches the first analyzer
port of a and c, D3 the second port (a2, c2). a and c land on the same
detectors, which cannot tell them apart.

analyzer waveplates (each maps the basis reference polarization to v):

    basis   reference         plate
    vh      v                 half wave at 0
    45      (v + h)/sqrt2     half wave at 22.5 deg
    circ    (v + i h)/sqrt2   quarter wave at 45 deg
"""

import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Sequence, Tuple, Union

import numpy as np

from .config import NORM_TOLERANCE, TABLE_SUM_TOLERANCE
from .errors import ConfigurationError, UsageError
from .fock import FockState, Spatial
from .optics import (
    ModeTransform,
    apply_transform,
    beam_splitter,
    half_wave_plate,
    pbs,
    polarizer,
    quarter_wave_plate,
)


class Basis(enum.Enum):
    LINEAR_VH = "vh"
    LINEAR_45 = "45"
    CIRCULAR = "circ"


class Scheme(enum.Enum):
    PBS_COINCIDENCE = "n11"
    POLARIZER_PLUS_BS = "n20"


class Detector(enum.Enum):
    TRIGGER = "trigger"
    D2 = "d2"
    D3 = "d3"


class EventClass(enum.Enum):
    N20 = "N20"
    N11 = "N11"
    TRIGGER_ONLY = "trigger_only"
    OTHER = "other"


ClickPattern = FrozenSet[Detector]

_SQRT_HALF = math.sqrt(0.5)
BASIS_REFERENCE: Dict[Basis, Tuple[complex, complex]] = {
    Basis.LINEAR_VH: (1 + 0j, 0j),
    Basis.LINEAR_45: (_SQRT_HALF + 0j, _SQRT_HALF + 0j),
    Basis.CIRCULAR: (_SQRT_HALF + 0j, 1j * _SQRT_HALF),
}
WAVEPLATES: Dict[Basis, Tuple[str, float]] = {
    Basis.LINEAR_VH: ("half", 0.0),
    Basis.LINEAR_45: ("half", math.pi / 8),
    Basis.CIRCULAR: ("quarter", math.pi / 4),
}

# every subset of detectors, ordered by bitmask (trigger = bit 0)
ALL_PATTERNS: Tuple[ClickPattern, ...] = tuple(
    frozenset(d for bit, d in enumerate(Detector) if mask >> bit & 1)
    for mask in range(2 ** len(Detector))
)
TRIPLE = frozenset(Detector)

# (first port, second port, loss) of each detector-merged spatial mode
_ANALYZED_PATHS = (
    (Spatial.A, Spatial.A_PORT2, Spatial.LOSS1),
    (Spatial.INPUT_ORTHOGONAL, Spatial.C_PORT2, Spatial.LOSS2),
)


@dataclass(frozen=True)
class AnalyzerConfig:
    """measurement basis plus the mode-a scheme (pbs for N11, polarizer+bs for N20)"""

    basis: Basis = Basis.LINEAR_VH
    scheme: Scheme = Scheme.POLARIZER_PLUS_BS

    @property
    def waveplate(self) -> Tuple[str, float]:
        return WAVEPLATES[self.basis]

    @property
    def reference(self) -> Tuple[complex, complex]:
        return BASIS_REFERENCE[self.basis]

    def transforms(self) -> List[ModeTransform]:
        kind, angle = self.waveplate
        plate = half_wave_plate if kind == "half" else quarter_wave_plate
        spatials = tuple(path[0] for path in _ANALYZED_PATHS)
        elements = [plate(angle, spatials)]
        for spatial, port2, loss in _ANALYZED_PATHS:
            if self.scheme is Scheme.PBS_COINCIDENCE:
                elements.append(pbs(spatial, port2))
            else:
                elements.append(polarizer(0.0, spatial, loss))
                elements.append(beam_splitter(0.5, spatial, port2))
        return elements


@dataclass(frozen=True)
class DetectorModel:
    """threshold detector with per-photon efficiency and per-pulse dark counts"""

    efficiency: float = 0.1
    dark_count_prob: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ConfigurationError("detector.efficiency", "must be in [0, 1]")
        if not 0.0 <= self.dark_count_prob <= 1.0:
            raise ConfigurationError("detector.dark_count_prob", "must be in [0, 1]")

    def click_probability(self, photons: int) -> float:
        miss = (1.0 - self.dark_count_prob) * (1.0 - self.efficiency) ** photons
        return 1.0 - miss


@dataclass(frozen=True)
class OutcomeTable:
    """probability of every detector click pattern in one pulse"""

    probabilities: Mapping[ClickPattern, float]

    def __post_init__(self):
        probs = {p: 0.0 for p in ALL_PATTERNS}
        for pattern, value in self.probabilities.items():
            pattern = frozenset(pattern)
            if pattern not in probs:
                names = sorted(str(d) for d in pattern)
                raise UsageError(f"unknown click pattern {names}")
            if value < -TABLE_SUM_TOLERANCE:
                raise UsageError(f"negative probability {value} for pattern")
            probs[pattern] += max(0.0, float(value))
        total = math.fsum(probs.values())
        if abs(total - 1.0) > TABLE_SUM_TOLERANCE:
            raise UsageError(f"outcome probabilities sum to {total!r}, expected 1")
        object.__setattr__(self, "probabilities", probs)

    def probability(self, pattern: Iterable[Detector]) -> float:
        return self.probabilities[frozenset(pattern)]

    def marginal(self, detector: Detector) -> float:
        return math.fsum(p for pat, p in self.probabilities.items() if detector in pat)

    def as_vector(self) -> np.ndarray:
        return np.array([self.probabilities[p] for p in ALL_PATTERNS])

    @classmethod
    def mix(
        cls, tables: Sequence["OutcomeTable"], weights: Sequence[float]
    ) -> "OutcomeTable":
        """classical mixture; weights are normalized"""
        if not tables or len(tables) != len(weights):
            raise UsageError("need one weight per table")
        total = math.fsum(weights)
        if total <= 0:
            raise UsageError("mixture weights must sum to a positive value")
        return cls(
            {
                p: math.fsum(w * t.probabilities[p] for t, w in zip(tables, weights))
                / total
                for p in ALL_PATTERNS
            }
        )


@dataclass(frozen=True)
class SampledCounts:
    """multinomial click-pattern counts over a number of pulses"""

    pulses: int
    counts: Mapping[ClickPattern, int] = field(default_factory=dict)

    def count(self, pattern: Iterable[Detector]) -> int:
        return int(self.counts.get(frozenset(pattern), 0))

    def marginal(self, detector: Detector) -> int:
        return sum(int(n) for pat, n in self.counts.items() if detector in pat)

    def __add__(self, other: "SampledCounts") -> "SampledCounts":
        merged = {
            p: self.count(p) + other.count(p) for p in ALL_PATTERNS
        }
        return SampledCounts(self.pulses + other.pulses, merged)


def outcome_probabilities(
    state: FockState, cfg: AnalyzerConfig, det: DetectorModel
) -> OutcomeTable:
    """exact click-pattern probabilities of a normalized output state"""
    if abs(state.norm_sq() - 1.0) > NORM_TOLERANCE:
        raise UsageError("outcome probabilities need a normalized state")
    for element in cfg.transforms():
        state = apply_transform(state, element)

    registry = state.registry
    n_trigger = registry.counter([Spatial.B])
    n_d2 = registry.counter([p[0] for p in _ANALYZED_PATHS])
    n_d3 = registry.counter([p[1] for p in _ANALYZED_PATHS])

    # clicks depend only on the photon numbers reaching each detector
    by_counts: Dict[Tuple[int, int, int], float] = defaultdict(float)
    for occ, amp in state.terms.items():
        by_counts[(n_trigger(occ), n_d2(occ), n_d3(occ))] += abs(amp) ** 2

    probs: Dict[ClickPattern, float] = defaultdict(float)
    for photons, weight in by_counts.items():
        clicks = dict(zip(Detector, (det.click_probability(n) for n in photons)))
        for pattern in ALL_PATTERNS:
            p = weight
            for detector, click in clicks.items():
                p *= click if detector in pattern else 1.0 - click
            probs[pattern] += p
    return OutcomeTable(probs)


def classify(pattern: Iterable[Detector], scheme: Scheme) -> EventClass:
    """map a click pattern to the event class counted under the given scheme"""
    pattern = frozenset(pattern)
    if pattern == TRIPLE:
        return EventClass.N20 if scheme is Scheme.POLARIZER_PLUS_BS else EventClass.N11
    if pattern == frozenset({Detector.TRIGGER}):
        return EventClass.TRIGGER_ONLY
    return EventClass.OTHER


def sample_events(
    table: OutcomeTable,
    pulses: int,
    rng_seed: Union[int, Sequence[int], np.random.SeedSequence],
) -> SampledCounts:
    """multinomial draw of click patterns over independent pulses"""
    if pulses <= 0:
        raise UsageError("pulses must be positive")
    seq = (
        rng_seed
        if isinstance(rng_seed, np.random.SeedSequence)
        else np.random.SeedSequence(rng_seed)
    )
    rng = np.random.default_rng(seq)
    pvals = table.as_vector()
    pvals = pvals / pvals.sum()
    draws = rng.multinomial(int(pulses), pvals)
    return SampledCounts(int(pulses), dict(zip(ALL_PATTERNS, (int(n) for n in draws))))
