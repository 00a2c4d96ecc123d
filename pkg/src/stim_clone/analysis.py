"""clone fidelity from delay scans, exact fidelities and the universality check

the N20 peak-to-baseline ratio R gives the clone fidelity
F = (2R + 1) / (2R + 2); R = 2 (full overlap) is the optimal 5/6.
"""

import enum
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import curve_fit

from .config import FOCK_CUTOFF, NORM_TOLERANCE
from .core_logging import logger, metrics
from .detection import BASIS_REFERENCE, Basis, Scheme
from .errors import AnalysisError, UsageError
from .experiment import RunMode, ScanResult
from .fock import (
    B_H,
    FockState,
    ModeId,
    ModeRegistry,
    Occupation,
    Polarization,
    Spatial,
    expectation_number,
    project_pattern,
)
from .optics import apply_transform, basis_change_jones, jones_element
from .pdc import InputSpec, PdcConfig, evolve, inject_input, phase_grid, restore_norm

OPTIMAL_FIDELITY = 5.0 / 6.0
# delays farther than this many combined widths count as baseline
BASELINE_WIDTHS = 3.0
MIN_BASELINE_POINTS = 3
_FALLBACK_HELP = "gaussian fits replaced by the raw maximum"


class CountSource(enum.Enum):
    EXPECTED = "expected"
    SAMPLED = "sampled"


@dataclass(frozen=True)
class RatioEstimate:
    """peak-to-baseline ratio of one N20 series; rates in 1/s"""

    ratio: float
    sigma: float
    baseline: float
    peak: float
    source: CountSource
    baseline_points: int


@dataclass(frozen=True)
class ExactFidelity:
    clone: float
    anticlone: float
    herald_probability: float


@dataclass(frozen=True)
class BasisFidelity:
    basis: Basis
    fidelity: float
    sigma: float
    ratio: Optional[RatioEstimate] = None
    anticlone: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "basis": self.basis.value,
            "fidelity": self.fidelity,
            "sigma": self.sigma,
        }
        if self.ratio is not None:
            out.update(
                ratio=self.ratio.ratio,
                ratio_sigma=self.ratio.sigma,
                baseline_rate_hz=self.ratio.baseline,
                peak_rate_hz=self.ratio.peak,
                source=self.ratio.source.value,
            )
        if self.anticlone is not None:
            out["anticlone_fidelity"] = self.anticlone
        return out


@dataclass(frozen=True)
class FidelityReport:
    """per-basis fidelities and the spread between them"""

    per_basis: Tuple[BasisFidelity, ...]
    spread: float
    spread_sigma: float
    threshold: float
    universal: Optional[bool]
    optimal: float = OPTIMAL_FIDELITY

    def to_dict(self) -> Dict[str, Any]:
        return {
            "bases": [b.to_dict() for b in self.per_basis],
            "optimal_fidelity": self.optimal,
            "spread": self.spread,
            "spread_sigma": self.spread_sigma,
            "spread_threshold": self.threshold,
            "universal": self.universal,
        }


def fidelity_from_ratio(ratio: float) -> float:
    """F = (2R + 1) / (2R + 2)"""
    if math.isnan(ratio) or ratio < 0:
        raise AnalysisError(f"ratio must be >= 0, got {ratio}")
    if math.isinf(ratio):
        return 1.0
    return (2.0 * ratio + 1.0) / (2.0 * ratio + 2.0)


def ratio_from_fidelity(fidelity: float) -> float:
    """inverse of fidelity_from_ratio, R = (2F - 1) / (2 - 2F)"""
    if not 0.5 <= fidelity < 1.0:
        raise AnalysisError(f"fidelity must be in [0.5, 1), got {fidelity}")
    return (2.0 * fidelity - 1.0) / (2.0 - 2.0 * fidelity)


def fidelity_uncertainty(ratio: float, sigma_ratio: float) -> float:
    """first-order propagation, dF/dR = 1 / (2 (R + 1)^2)"""
    return sigma_ratio / (2.0 * (ratio + 1.0) ** 2)


def _gaussian(tau, offset, amplitude, centre, width):
    return offset + amplitude * np.exp(-((tau - centre) ** 2) / (2.0 * width**2))


def _fit_peak(
    delays: Sequence[float], counts: Sequence[float], baseline: float, width: float
) -> Tuple[float, float]:
    """fitted peak height (offset + amplitude) and its standard error"""
    x = np.asarray(delays, dtype=float)
    y = np.asarray(counts, dtype=float)
    i = int(np.argmax(y))
    raw = (float(y[i]), math.sqrt(max(float(y[i]), 1.0)))
    p0 = [baseline, max(float(y[i]) - baseline, 1.0), float(x[i]), width]
    try:
        popt, pcov = curve_fit(
            _gaussian,
            x,
            y,
            p0=p0,
            sigma=np.sqrt(np.maximum(y, 1.0)),
            absolute_sigma=True,
            maxfev=10000,
        )
    except (RuntimeError, ValueError) as exc:
        logger.warning(
            "peak fit failed, using raw maximum", extra={"props": {"error": str(exc)}}
        )
        metrics.inc("stimclone_fit_fallbacks_total", help_text=_FALLBACK_HELP)
        return raw

    peak = float(popt[0] + popt[1])
    var = float(pcov[0, 0] + pcov[1, 1] + 2.0 * pcov[0, 1])
    if not (math.isfinite(peak) and math.isfinite(var)) or var < 0 or peak <= 0:
        logger.warning(
            "peak fit degenerate, using raw maximum",
            extra={"props": {"peak": peak, "variance": var}},
        )
        metrics.inc("stimclone_fit_fallbacks_total", help_text=_FALLBACK_HELP)
        return raw
    return peak, math.sqrt(var)


def extract_ratio(
    scan: ScanResult,
    scheme: Scheme = Scheme.POLARIZER_PLUS_BS,
    basis: Optional[Basis] = None,
    source: Optional[CountSource] = None,
) -> RatioEstimate:
    """
    peak over baseline of one count series

    baseline is the mean over delays beyond BASELINE_WIDTHS combined widths.
    expected counts use the series maximum; sampled counts are fitted with a
    gaussian on a constant offset.
    """
    cfg = scan.config
    basis = basis or cfg.bases[0]
    if source is None:
        sampled = cfg.mode is RunMode.MONTE_CARLO
        source = CountSource.SAMPLED if sampled else CountSource.EXPECTED
    series = scan.series(basis, scheme)
    if not series:
        raise AnalysisError(f"no records for basis {basis.value} scheme {scheme.value}")
    if source is CountSource.SAMPLED and any(r.sampled_count is None for r in series):
        raise AnalysisError("scan has no sampled counts")

    window = BASELINE_WIDTHS * cfg.overlap.combined_width
    far = [r for r in series if abs(r.delay_fs) > window]
    if len(far) < MIN_BASELINE_POINTS:
        raise AnalysisError(
            f"only {len(far)} delays beyond {window:.0f} fs, "
            f"need {MIN_BASELINE_POINTS} for a baseline"
        )

    duration = cfg.duration_per_point_s
    base_counts = [
        float(r.expected_count if source is CountSource.EXPECTED else r.sampled_count)
        for r in far
    ]
    base_total = math.fsum(base_counts)
    if base_total <= 0:
        raise AnalysisError("baseline has no counts")

    if source is CountSource.EXPECTED:
        base_rate = math.fsum(r.expected_rate_hz for r in far) / len(far)
        peak_rate = max(r.expected_rate_hz for r in series)
        peak_count = peak_rate * duration
        sigma_peak = math.sqrt(peak_count)
    else:
        base_rate = base_total / len(far) / duration
        peak_count, sigma_peak = _fit_peak(
            [r.delay_fs for r in series],
            [float(r.sampled_count) for r in series],
            base_total / len(far),
            cfg.overlap.combined_width / math.sqrt(2.0),
        )
        peak_rate = peak_count / duration

    ratio = peak_rate / base_rate
    # sigma_R = R sqrt(1/N_peak + 1/sum N_base) for poisson counts
    if peak_count > 0:
        rel = (sigma_peak / peak_count) ** 2 + 1.0 / base_total
    else:
        rel = math.inf
    return RatioEstimate(
        ratio=ratio,
        sigma=ratio * math.sqrt(rel),
        baseline=base_rate,
        peak=peak_rate,
        source=source,
        baseline_points=len(far),
    )


_REGISTRY = ModeRegistry.standard()
# clones leave in a and, for a partially overlapping input, in c
_CLONE_SPATIALS = (Spatial.A, Spatial.INPUT_ORTHOGONAL)


def _has_pair(registry: ModeRegistry, spatial: Spatial) -> bool:
    return all(ModeId(spatial, p) in registry for p in Polarization)


def _clone_spatials(registry: ModeRegistry) -> Tuple[Spatial, ...]:
    spatials = tuple(s for s in _CLONE_SPATIALS if _has_pair(registry, s))
    if Spatial.A not in spatials:
        raise AnalysisError("state has no a mode to carry the clones")
    return spatials


def _heralded(state: FockState) -> Tuple[float, FockState]:
    registry = state.registry
    if not _has_pair(registry, Spatial.B):
        raise AnalysisError("state has no b mode to herald on")
    count_b = registry.counter([Spatial.B])
    count_clones = registry.counter(_clone_spatials(registry))

    def two_clones(occ: Occupation) -> bool:
        return count_b(occ) == 1 and count_clones(occ) == 2

    p, cond = project_pattern(state, two_clones)
    if cond is None:
        raise AnalysisError("state has no heralded two-clone component")
    return p, cond


def _unit_jones(polarization: Sequence[complex]) -> Tuple[complex, complex]:
    v, h = complex(polarization[0]), complex(polarization[1])
    norm = math.sqrt(abs(v) ** 2 + abs(h) ** 2)
    if abs(norm - 1.0) > NORM_TOLERANCE:
        raise UsageError("input polarization must be a unit jones vector")
    return v, h


def clone_fidelity_exact(state: FockState, input_jones: Sequence[complex]) -> float:
    """mean overlap of a clone with the input, given one photon in b and two in a, c"""
    _, cond = _heralded(state)
    spatials = _clone_spatials(state.registry)
    rotate = jones_element(basis_change_jones(_unit_jones(input_jones)), spatials)
    along_input = [ModeId(s, Polarization.V) for s in spatials]
    return expectation_number(apply_transform(cond, rotate), along_input) / 2.0


def anticlone_fidelity_exact(state: FockState, input_jones: Sequence[complex]) -> float:
    """overlap of the b photon with the state orthogonal to the input"""
    _, cond = _heralded(state)
    rotate = jones_element(basis_change_jones(_unit_jones(input_jones)), (Spatial.B,))
    return expectation_number(apply_transform(cond, rotate), [B_H])


def exact_fidelities(
    spec: InputSpec, pdc: PdcConfig, cutoff: int = FOCK_CUTOFF
) -> ExactFidelity:
    """single-photon fidelities averaged over the pair-phase grid"""
    injected = inject_input(spec, _REGISTRY, 1, cutoff)
    weights: List[float] = []
    clones: List[float] = []
    antis: List[float] = []
    for phase in phase_grid(pdc.dephasing):
        state = restore_norm(evolve(injected, pdc, phase))
        p, _ = _heralded(state)
        weights.append(p)
        clones.append(clone_fidelity_exact(state, spec.polarization))
        antis.append(anticlone_fidelity_exact(state, spec.polarization))
    total = math.fsum(weights)
    return ExactFidelity(
        clone=math.fsum(w * f for w, f in zip(weights, clones)) / total,
        anticlone=math.fsum(w * f for w, f in zip(weights, antis)) / total,
        herald_probability=total / len(weights),
    )


def _basis_fidelities(
    scan: ScanResult, source: Optional[CountSource]
) -> List[BasisFidelity]:
    cfg = scan.config
    out = []
    for basis in scan.bases:
        est = extract_ratio(scan, Scheme.POLARIZER_PLUS_BS, basis, source)
        spec = InputSpec(
            polarization=BASIS_REFERENCE[basis], gamma=cfg.overlap.peak_gamma
        )
        anti = exact_fidelities(spec, cfg.pdc, cfg.fock_cutoff).anticlone
        out.append(
            BasisFidelity(
                basis=basis,
                fidelity=fidelity_from_ratio(est.ratio),
                sigma=fidelity_uncertainty(est.ratio, est.sigma),
                ratio=est,
                anticlone=anti,
            )
        )
    return out


def _summarize(per_basis: Sequence[BasisFidelity], threshold: float) -> FidelityReport:
    if len(per_basis) < 2:
        return FidelityReport(tuple(per_basis), 0.0, 0.0, threshold, None)
    hi = max(per_basis, key=lambda b: b.fidelity)
    lo = min(per_basis, key=lambda b: b.fidelity)
    spread = hi.fidelity - lo.fidelity
    combined = math.hypot(hi.sigma, lo.sigma)
    if combined > 0:
        spread_sigma = spread / combined
    else:
        spread_sigma = 0.0 if spread == 0 else math.inf
    universal = spread <= threshold
    logger.info(
        "universality check",
        extra={
            "props": {
                "spread": spread,
                "spread_sigma": spread_sigma,
                "threshold": threshold,
                "universal": universal,
            }
        },
    )
    return FidelityReport(tuple(per_basis), spread, spread_sigma, threshold, universal)


def universality_report(
    source: Union[ScanResult, Sequence[BasisFidelity]],
    threshold: Optional[float] = None,
) -> FidelityReport:
    """max - min fidelity across bases, universal when within threshold"""
    if isinstance(source, ScanResult):
        per_basis = _basis_fidelities(source, None)
        threshold = source.config.spread_threshold if threshold is None else threshold
    else:
        per_basis = list(source)
        threshold = 0.015 if threshold is None else threshold
    if len(per_basis) < 2:
        raise AnalysisError("universality needs at least two bases")
    return _summarize(per_basis, threshold)


def build_report(
    scan: ScanResult, source: Optional[CountSource] = None
) -> FidelityReport:
    """per-basis fidelities of a scan; spread is only judged with two or more bases"""
    per_basis = _basis_fidelities(scan, source)
    return _summarize(per_basis, scan.config.spread_threshold)
