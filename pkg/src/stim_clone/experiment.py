"""delay-scan orchestration: per-point evaluation, photon-number mixing, sampling

one work unit is a (basis, delay point) pair; it evolves every input layer
once and feeds the result through both analyzer schemes. work units run on
a thread pool driven by asyncio, and every random stream is keyed by
(seed, point, basis, scheme, batch) so results never depend on scheduling.
"""

import asyncio
import enum
import functools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .config import FOCK_CUTOFF, LOG_SAMPLE_RATE, THREADS
from .core_logging import logger, metrics
from .detection import (
    BASIS_REFERENCE,
    TRIPLE,
    AnalyzerConfig,
    Basis,
    Detector,
    DetectorModel,
    EventClass,
    OutcomeTable,
    SampledCounts,
    Scheme,
    classify,
    outcome_probabilities,
    sample_events,
)
from .errors import ConfigurationError
from .fock import FockState, ModeRegistry
from .optics import OverlapModel, overlap_gamma
from .pdc import (
    InputSpec,
    PdcConfig,
    PhotonStatistics,
    evolve,
    inject_input,
    phase_grid,
    photon_number_weights,
    restore_norm,
)


class RunMode(enum.Enum):
    EXACT = "exact"
    MONTE_CARLO = "mc"
    BOTH = "both"


def default_delay_grid() -> Tuple[float, ...]:
    return tuple(float(x) for x in np.linspace(-1500.0, 1500.0, 21))


@dataclass(frozen=True)
class ExperimentConfig:  # pylint: disable=too-many-instance-attributes
    """everything needed to reproduce one delay-scan run"""

    pdc: PdcConfig = field(default_factory=PdcConfig)
    # gamma is derived per delay point; polarization is used by the fidelity command
    input: InputSpec = field(
        default_factory=lambda: InputSpec(statistics=PhotonStatistics.POISSON)
    )
    overlap: OverlapModel = field(default_factory=OverlapModel)
    bases: Tuple[Basis, ...] = tuple(Basis)
    detector: DetectorModel = field(default_factory=DetectorModel)
    delay_grid_fs: Tuple[float, ...] = field(default_factory=default_delay_grid)
    rep_rate_hz: float = 80e6
    duration_per_point_s: float = 600.0
    seed: int = 0
    mode: RunMode = RunMode.EXACT
    mc_batches: int = 8
    fock_cutoff: int = FOCK_CUTOFF
    spread_threshold: float = 0.015
    fixed_gamma: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "bases", tuple(self.bases))
        grid = tuple(float(t) for t in self.delay_grid_fs)
        object.__setattr__(self, "delay_grid_fs", grid)
        if not self.delay_grid_fs:
            raise ConfigurationError("delay_grid_fs", "must not be empty")
        if not all(math.isfinite(t) for t in self.delay_grid_fs):
            raise ConfigurationError("delay_grid_fs", "delays must be finite")
        if not self.bases:
            raise ConfigurationError("bases", "at least one basis is required")
        if len(set(self.bases)) != len(self.bases):
            raise ConfigurationError("bases", "duplicate basis")
        for name in ("rep_rate_hz", "duration_per_point_s"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigurationError(name, "must be finite and > 0")
        if self.mode is not RunMode.EXACT and self.pulses_per_point < 1:
            raise ConfigurationError(
                "duration_per_point_s",
                "rep_rate_hz * duration_per_point_s must give at least one pulse",
            )
        if self.seed < 0:
            raise ConfigurationError("seed", "must be >= 0")
        if self.mc_batches < 1:
            raise ConfigurationError("mc_batches", "must be >= 1")
        if not self.spread_threshold >= 0:
            raise ConfigurationError("analysis.spread_threshold", "must be >= 0")
        if self.fixed_gamma is not None and not 0.0 <= self.fixed_gamma <= 1.0:
            raise ConfigurationError("input.gamma", "must be in [0, 1]")
        if self.fock_cutoff < self.required_cutoff:
            raise ConfigurationError(
                "fock_cutoff", f"needs at least {self.required_cutoff} photons"
            )

    @property
    def required_cutoff(self) -> int:
        single = 1 + 2 * self.pdc.order
        if self.input.statistics is PhotonStatistics.POISSON:
            return max(single, 2 + 2 * min(self.pdc.order, 1))
        return single

    @property
    def pulses_per_point(self) -> int:
        return int(round(self.rep_rate_hz * self.duration_per_point_s))


@dataclass(frozen=True)
class PointEvaluation:
    """exact outcome table of one delay point under one analyzer"""

    delay_fs: float
    gamma: float
    basis: Basis
    scheme: Scheme
    table: OutcomeTable
    rep_rate_hz: float

    @property
    def rates(self) -> Dict[EventClass, float]:
        out = {cls: 0.0 for cls in EventClass}
        for pattern, p in self.table.probabilities.items():
            out[classify(pattern, self.scheme)] += p * self.rep_rate_hz
        return out

    @property
    def event_rate_hz(self) -> float:
        """rate of the scheme's triple coincidence (N20 or N11)"""
        return self.table.probability(TRIPLE) * self.rep_rate_hz

    @property
    def trigger_rate_hz(self) -> float:
        return self.table.marginal(Detector.TRIGGER) * self.rep_rate_hz


@dataclass(frozen=True)
class CountRecord:  # pylint: disable=too-many-instance-attributes
    """expected and sampled counts of one (delay, basis, scheme) cell"""

    delay_fs: float
    gamma: float
    basis: Basis
    scheme: Scheme
    expected_rate_hz: float
    expected_count: float
    trigger_rate_hz: float
    expected_trigger_count: float
    sampled_count: Optional[int] = None
    sampled_trigger_count: Optional[int] = None


@dataclass(frozen=True)
class ScanResult:
    """all records of a run plus the config that produced them"""

    config: ExperimentConfig
    records: Tuple[CountRecord, ...]

    def series(self, basis: Basis, scheme: Scheme) -> List[CountRecord]:
        rows = [r for r in self.records if r.basis is basis and r.scheme is scheme]
        return sorted(rows, key=lambda r: r.delay_fs)

    @property
    def bases(self) -> Tuple[Basis, ...]:
        seen = {r.basis for r in self.records}
        return tuple(b for b in self.config.bases if b in seen)


@functools.lru_cache(maxsize=None)
def _capped(pdc: PdcConfig, photons: int) -> PdcConfig:
    # two-photon input layers interact at first order only
    if photons < 2 or pdc.order <= 1:
        return pdc
    return replace(pdc, order=1)


def _layer_states(
    cfg: ExperimentConfig, gamma: float, basis: Basis
) -> List[Tuple[float, FockState]]:
    """(weight, normalized evolved state) for every photon-number layer and phase"""
    registry = ModeRegistry.standard()
    spec = replace(cfg.input, gamma=gamma, polarization=BASIS_REFERENCE[basis])
    phases = phase_grid(cfg.pdc.dephasing)
    layers = []
    for photons, weight in photon_number_weights(spec):
        pdc = _capped(cfg.pdc, photons)
        injected = inject_input(spec, registry, photons, cfg.fock_cutoff)
        for phase in phases:
            state = restore_norm(evolve(injected, pdc, phase))
            layers.append((weight / len(phases), state))
    return layers


def _tables(
    cfg: ExperimentConfig, gamma: float, basis: Basis, schemes: Sequence[Scheme]
) -> Tuple[Dict[Scheme, OutcomeTable], int]:
    layers = _layer_states(cfg, gamma, basis)
    weights = [w for w, _ in layers]
    tables = {}
    for scheme in schemes:
        analyzer = AnalyzerConfig(basis, scheme)
        per_layer = [
            outcome_probabilities(s, analyzer, cfg.detector) for _, s in layers
        ]
        tables[scheme] = OutcomeTable.mix(per_layer, weights)
    return tables, len(layers)


def run_point(
    cfg: ExperimentConfig,
    delay_fs: float,
    scheme: Scheme,
    basis: Optional[Basis] = None,
) -> PointEvaluation:
    """inject, evolve and analyze at one delay

    rates are per-pulse probability times the rep rate
    """
    basis = basis or cfg.bases[0]
    gamma = overlap_gamma(cfg.overlap, delay_fs)
    tables, _ = _tables(cfg, gamma, basis, (scheme,))
    return PointEvaluation(
        delay_fs, gamma, basis, scheme, tables[scheme], cfg.rep_rate_hz
    )


def evaluate_gamma(
    cfg: ExperimentConfig, gamma: float, scheme: Scheme, basis: Optional[Basis] = None
) -> PointEvaluation:
    """run_point with the overlap given directly instead of through a delay"""
    basis = basis or cfg.bases[0]
    tables, _ = _tables(cfg, gamma, basis, (scheme,))
    return PointEvaluation(
        math.nan, gamma, basis, scheme, tables[scheme], cfg.rep_rate_hz
    )


def _stream_key(cfg: ExperimentConfig, point_index: int, basis: Basis, scheme: Scheme):
    return [cfg.seed, point_index, list(Basis).index(basis), list(Scheme).index(scheme)]


def sample_point(
    cfg: ExperimentConfig,
    table: OutcomeTable,
    point_index: int,
    basis: Basis,
    scheme: Scheme,
) -> SampledCounts:
    """monte carlo counts of one cell, split into independently seeded batches"""
    pulses = cfg.pulses_per_point
    batches = min(cfg.mc_batches, pulses)
    size, extra = divmod(pulses, batches)
    key = _stream_key(cfg, point_index, basis, scheme)
    total = SampledCounts(0, {})
    for batch in range(batches):
        n = size + (1 if batch < extra else 0)
        seed = np.random.SeedSequence(key + [batch])
        total = total + sample_events(table, n, seed)
    return total


def _evaluate_unit(
    cfg: ExperimentConfig, basis: Basis, point_index: int
) -> Tuple[List[CountRecord], int]:
    delay = cfg.delay_grid_fs[point_index]
    gamma = overlap_gamma(cfg.overlap, delay)
    tables, n_states = _tables(cfg, gamma, basis, tuple(Scheme))
    duration = cfg.duration_per_point_s
    records = []
    for scheme in Scheme:
        point = PointEvaluation(
            delay, gamma, basis, scheme, tables[scheme], cfg.rep_rate_hz
        )
        sampled = sampled_trigger = None
        if cfg.mode is not RunMode.EXACT:
            counts = sample_point(cfg, point.table, point_index, basis, scheme)
            sampled = counts.count(TRIPLE)
            sampled_trigger = counts.marginal(Detector.TRIGGER)
        records.append(
            CountRecord(
                delay_fs=delay,
                gamma=gamma,
                basis=basis,
                scheme=scheme,
                expected_rate_hz=point.event_rate_hz,
                expected_count=point.event_rate_hz * duration,
                trigger_rate_hz=point.trigger_rate_hz,
                expected_trigger_count=point.trigger_rate_hz * duration,
                sampled_count=sampled,
                sampled_trigger_count=sampled_trigger,
            )
        )
    return records, n_states


def resolve_workers(requested: Optional[int] = None) -> int:
    """requested worker count, capped by STIMCLONE_THREADS"""
    wanted = requested if requested and requested > 0 else THREADS
    return max(1, min(wanted, THREADS))


async def run_scan_async(
    cfg: ExperimentConfig, workers: Optional[int] = None
) -> ScanResult:
    """evaluate every (basis, delay) unit on a thread pool and assemble the scan"""
    n_workers = resolve_workers(workers)
    units = [(b, i) for b in cfg.bases for i in range(len(cfg.delay_grid_fs))]
    metrics.set_gauge("stimclone_workers", n_workers, help_text="scan worker threads")
    logger.info(
        "scan started",
        extra={
            "props": {
                "units": len(units),
                "workers": n_workers,
                "mode": cfg.mode.value,
                "bases": [b.value for b in cfg.bases],
            }
        },
    )

    loop = asyncio.get_running_loop()
    done = 0

    with ThreadPoolExecutor(max_workers=n_workers) as pool:

        async def run_unit(basis: Basis, index: int):
            nonlocal done
            records, n_states = await loop.run_in_executor(
                pool, _evaluate_unit, cfg, basis, index
            )
            metrics.inc_by("stimclone_states_evolved_total", n_states)
            for rec in records:
                metrics.inc(
                    "stimclone_points_total",
                    {"basis": basis.value, "scheme": rec.scheme.value},
                    help_text="evaluated scan cells",
                )
                if rec.sampled_count is not None:
                    metrics.inc_by("stimclone_pulses_total", cfg.pulses_per_point)
            done += 1
            if done % LOG_SAMPLE_RATE == 0:
                logger.info(
                    "scan progress",
                    extra={
                        "props": {
                            "done": done,
                            "total": len(units),
                            "delay_fs": records[0].delay_fs,
                        }
                    },
                )
            return records

        results = await asyncio.gather(*(run_unit(b, i) for b, i in units))

    by_unit = dict(zip(units, results))
    ordered = []
    for basis in cfg.bases:
        for s_index, _scheme in enumerate(Scheme):
            for i in range(len(cfg.delay_grid_fs)):
                ordered.append(by_unit[(basis, i)][s_index])

    logger.info("scan finished", extra={"props": {"records": len(ordered)}})
    return ScanResult(cfg, tuple(ordered))


def run_scan(cfg: ExperimentConfig, workers: Optional[int] = None) -> ScanResult:
    return asyncio.run(run_scan_async(cfg, workers))


# ---------- json config documents ----------

_R = math.sqrt(0.5)
POLARIZATION_NAMES: Dict[str, Tuple[complex, complex]] = {
    "v": (1 + 0j, 0j),
    "h": (0j, 1 + 0j),
    "45": (_R + 0j, _R + 0j),
    "-45": (_R + 0j, -_R + 0j),
    "circ_l": (_R + 0j, 1j * _R),
    "circ_r": (_R + 0j, -1j * _R),
}

_TOP_KEYS = {
    "pdc",
    "input",
    "overlap",
    "detector",
    "analysis",
    "bases",
    "delay_grid_fs",
    "rep_rate_hz",
    "duration_per_point_s",
    "seed",
    "mode",
    "mc_batches",
    "fock_cutoff",
}
_SECTION_KEYS = {
    "pdc": {"kappa_t", "order", "dephasing"},
    "input": {"polarization", "statistics", "mean_photon_number", "gamma"},
    "overlap": {"sigma_input_fs", "sigma_dc_fs"},
    "detector": {"efficiency", "dark_count_prob"},
    "analysis": {"spread_threshold"},
}


def _check_keys(doc: Any, allowed: set, path: str) -> Mapping[str, Any]:
    if not isinstance(doc, Mapping):
        raise ConfigurationError(path or "config", "must be an object")
    for key in doc:
        if key not in allowed:
            dotted = f"{path}.{key}" if path else key
            raise ConfigurationError(dotted, "unknown key")
    return doc


def _as_float(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(path, "must be a number")
    return float(value)


def _as_int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(path, "must be an integer")
    return value


def _as_enum(enum_cls, value: Any, path: str):
    try:
        return enum_cls(value)
    except ValueError:
        choices = ", ".join(repr(m.value) for m in enum_cls)
        raise ConfigurationError(path, f"must be one of {choices}") from None


def _parse_polarization(value: Any, path: str) -> Tuple[complex, complex]:
    if isinstance(value, str):
        if value not in POLARIZATION_NAMES:
            raise ConfigurationError(path, f"unknown polarization {value!r}")
        return POLARIZATION_NAMES[value]
    if isinstance(value, Sequence) and len(value) == 2:
        comps = []
        for i, comp in enumerate(value):
            if isinstance(comp, Sequence) and len(comp) == 2:
                where = f"{path}[{i}]"
                re_part = _as_float(comp[0], where)
                comps.append(complex(re_part, _as_float(comp[1], where)))
            else:
                comps.append(complex(_as_float(comp, f"{path}[{i}]")))
        return comps[0], comps[1]
    raise ConfigurationError(path, "must be a name or two [re, im] components")


def _parse_grid(value: Any) -> Tuple[float, ...]:
    path = "delay_grid_fs"
    if isinstance(value, Mapping):
        spec = _check_keys(value, {"start", "stop", "points"}, path)
        missing = {"start", "stop", "points"} - set(spec)
        if missing:
            raise ConfigurationError(f"{path}.{sorted(missing)[0]}", "required")
        points = _as_int(spec["points"], f"{path}.points")
        if points < 1:
            raise ConfigurationError(f"{path}.points", "must be >= 1")
        start = _as_float(spec["start"], f"{path}.start")
        stop = _as_float(spec["stop"], f"{path}.stop")
        return tuple(float(x) for x in np.linspace(start, stop, points))
    if isinstance(value, Sequence) and not isinstance(value, str):
        return tuple(_as_float(t, f"{path}[{i}]") for i, t in enumerate(value))
    raise ConfigurationError(path, "must be a list or {start, stop, points}")


def _build(path: str, factory, **kwargs):
    try:
        return factory(**kwargs)
    except ConfigurationError as exc:
        # re-anchor the element's own field name under this section
        name = exc.field.split(".")[-1]
        reason = str(exc).split(": ", 1)[-1]
        raise ConfigurationError(f"{path}.{name}", reason) from None


def config_from_dict(doc: Any) -> ExperimentConfig:
    """validate a json document into an ExperimentConfig; unknown keys are rejected"""
    doc = _check_keys(doc, _TOP_KEYS, "")
    sections = {
        name: _check_keys(doc.get(name, {}), keys, name)
        for name, keys in _SECTION_KEYS.items()
    }
    kwargs: Dict[str, Any] = {}

    pdc = sections["pdc"]
    pdc_kwargs: Dict[str, Any] = {}
    if "kappa_t" in pdc:
        pdc_kwargs["kappa_t"] = _as_float(pdc["kappa_t"], "pdc.kappa_t")
    if "order" in pdc:
        pdc_kwargs["order"] = _as_int(pdc["order"], "pdc.order")
    if "dephasing" in pdc:
        pdc_kwargs["dephasing"] = _as_float(pdc["dephasing"], "pdc.dephasing")
    kwargs["pdc"] = _build("pdc", PdcConfig, **pdc_kwargs)

    inp = sections["input"]
    in_kwargs: Dict[str, Any] = {"statistics": PhotonStatistics.POISSON}
    if "polarization" in inp:
        in_kwargs["polarization"] = _parse_polarization(
            inp["polarization"], "input.polarization"
        )
    if "statistics" in inp:
        in_kwargs["statistics"] = _as_enum(
            PhotonStatistics, inp["statistics"], "input.statistics"
        )
    if "mean_photon_number" in inp:
        in_kwargs["mean_photon_number"] = _as_float(
            inp["mean_photon_number"], "input.mean_photon_number"
        )
    kwargs["input"] = _build("input", InputSpec, **in_kwargs)
    if "gamma" in inp:
        kwargs["fixed_gamma"] = _as_float(inp["gamma"], "input.gamma")

    ov = sections["overlap"]
    kwargs["overlap"] = _build(
        "overlap",
        OverlapModel,
        **{k: _as_float(v, f"overlap.{k}") for k, v in ov.items()},
    )
    det = sections["detector"]
    kwargs["detector"] = _build(
        "detector",
        DetectorModel,
        **{k: _as_float(v, f"detector.{k}") for k, v in det.items()},
    )
    if "spread_threshold" in sections["analysis"]:
        kwargs["spread_threshold"] = _as_float(
            sections["analysis"]["spread_threshold"], "analysis.spread_threshold"
        )

    if "bases" in doc:
        if not isinstance(doc["bases"], Sequence) or isinstance(doc["bases"], str):
            raise ConfigurationError("bases", "must be a list")
        kwargs["bases"] = tuple(
            _as_enum(Basis, b, f"bases[{i}]") for i, b in enumerate(doc["bases"])
        )
    if "delay_grid_fs" in doc:
        kwargs["delay_grid_fs"] = _parse_grid(doc["delay_grid_fs"])
    for key in ("rep_rate_hz", "duration_per_point_s"):
        if key in doc:
            kwargs[key] = _as_float(doc[key], key)
    for key in ("seed", "mc_batches", "fock_cutoff"):
        if key in doc:
            kwargs[key] = _as_int(doc[key], key)
    if "mode" in doc:
        kwargs["mode"] = _as_enum(RunMode, doc["mode"], "mode")

    return ExperimentConfig(**kwargs)


def config_to_dict(cfg: ExperimentConfig) -> Dict[str, Any]:
    """json-ready snapshot that config_from_dict reads back unchanged"""
    inp: Dict[str, Any] = {
        "polarization": [[c.real, c.imag] for c in cfg.input.polarization],
        "statistics": cfg.input.statistics.value,
        "mean_photon_number": cfg.input.mean_photon_number,
    }
    if cfg.fixed_gamma is not None:
        inp["gamma"] = cfg.fixed_gamma
    return {
        "pdc": {
            "kappa_t": cfg.pdc.kappa_t,
            "order": cfg.pdc.order,
            "dephasing": cfg.pdc.dephasing,
        },
        "input": inp,
        "overlap": {
            "sigma_input_fs": cfg.overlap.sigma_input_fs,
            "sigma_dc_fs": cfg.overlap.sigma_dc_fs,
        },
        "detector": {
            "efficiency": cfg.detector.efficiency,
            "dark_count_prob": cfg.detector.dark_count_prob,
        },
        "analysis": {"spread_threshold": cfg.spread_threshold},
        "bases": [b.value for b in cfg.bases],
        "delay_grid_fs": list(cfg.delay_grid_fs),
        "rep_rate_hz": cfg.rep_rate_hz,
        "duration_per_point_s": cfg.duration_per_point_s,
        "seed": cfg.seed,
        "mode": cfg.mode.value,
        "mc_batches": cfg.mc_batches,
        "fock_cutoff": cfg.fock_cutoff,
    }


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """read a config document, or the config snapshot inside a run manifest"""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(
            "config", f"cannot read {path}: {exc.strerror}"
        ) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            "config", f"invalid json at line {exc.lineno}: {exc.msg}"
        ) from None
    if isinstance(doc, Mapping) and "manifest_version" in doc:
        doc = doc.get("config")
    return config_from_dict(doc)
