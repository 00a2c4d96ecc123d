"""command-line interface: delay scans and exact single-point fidelities"""

import argparse
import asyncio
import csv
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np

from . import __version__
from .analysis import OPTIMAL_FIDELITY, build_report, exact_fidelities
from .config import CSV_SCHEMA, FLOAT_FORMAT, MANIFEST_VERSION
from .core_logging import logger, metrics
from .detection import Basis, Scheme
from .errors import ConfigurationError, StimCloneError
from .experiment import (
    ExperimentConfig,
    RunMode,
    ScanResult,
    config_to_dict,
    load_config,
    run_scan_async,
)
from .pdc import InputSpec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

CSV_COLUMNS = (
    "delay_fs",
    "gamma",
    "scheme",
    "basis",
    "expected_rate_hz",
    "expected_count",
    "sampled_count",
    "trigger_count",
)


@dataclass(frozen=True)
class RunManifest:
    """config snapshot plus content hashes of every output file"""

    config: Dict[str, Any]
    seed: int
    mode: str
    run_id: str
    outputs: Dict[str, str] = field(default_factory=dict)
    tool_version: str = __version__
    csv_schema: str = CSV_SCHEMA
    manifest_version: int = MANIFEST_VERSION

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _canonical(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def run_id_for(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(_canonical(config_to_dict(cfg)).encode()).hexdigest()[:16]


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else FLOAT_FORMAT.format(value)


def write_scan_csv(scan: ScanResult, basis: Basis, path: Path):
    """one row per (scheme, delay); trigger_count is sampled when available"""
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for scheme in Scheme:
            for rec in scan.series(basis, scheme):
                trigger = (
                    rec.sampled_trigger_count
                    if rec.sampled_trigger_count is not None
                    else rec.expected_trigger_count
                )
                writer.writerow(
                    [
                        _fmt(rec.delay_fs),
                        _fmt(rec.gamma),
                        scheme.value,
                        basis.value,
                        _fmt(rec.expected_rate_hz),
                        _fmt(rec.expected_count),
                        "" if rec.sampled_count is None else str(rec.sampled_count),
                        str(trigger) if isinstance(trigger, int) else _fmt(trigger),
                    ]
                )


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_outputs(scan: ScanResult, out_dir: Path) -> RunManifest:
    """csv per basis, fidelity.json, manifest.json and metrics.prom"""
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = scan.config
    run_id = run_id_for(cfg)
    hashes: Dict[str, str] = {}

    for basis in scan.bases:
        path = out_dir / f"scan_{basis.value}.csv"
        write_scan_csv(scan, basis, path)
        hashes[path.name] = _sha256(path)

    report = build_report(scan)
    fidelity_doc = dict(report.to_dict(), run_id=run_id, csv_schema=CSV_SCHEMA)
    fidelity_path = out_dir / "fidelity.json"
    fidelity_path.write_text(_canonical(fidelity_doc), encoding="utf-8")
    hashes[fidelity_path.name] = _sha256(fidelity_path)

    manifest = RunManifest(
        config=config_to_dict(cfg),
        seed=cfg.seed,
        mode=cfg.mode.value,
        run_id=run_id,
        outputs=hashes,
    )
    (out_dir / "manifest.json").write_text(
        _canonical(manifest.to_dict()), encoding="utf-8"
    )
    # metrics are informational and left out of the manifest hashes
    (out_dir / "metrics.prom").write_text(metrics.generate_output(), encoding="utf-8")

    for entry in report.per_basis:
        print(
            f"stim-clone | basis {entry.basis.value}: "
            f"F = {entry.fidelity:.4f} +/- {entry.sigma:.4f}"
        )
    if report.universal is not None:
        print(f"stim-clone | spread {report.spread:.4f}, universal: {report.universal}")
    return manifest


async def cmd_scan(
    config_path: str,
    out_dir: str = "results",
    mode: Optional[str] = None,
    seed: Optional[int] = None,
    basis: Optional[str] = None,
    workers: Optional[int] = None,
) -> RunManifest:
    cfg = load_config(config_path)
    overrides: Dict[str, Any] = {}
    if mode is not None:
        overrides["mode"] = RunMode(mode)
    if seed is not None:
        overrides["seed"] = seed
    if basis is not None and basis != "all":
        overrides["bases"] = (Basis(basis),)
    if overrides:
        cfg = replace(cfg, **overrides)
    if cfg.fixed_gamma is not None:
        raise ConfigurationError(
            "input.gamma", "read by the fidelity command only; scans use the delay grid"
        )

    metrics.reset()
    logger.info(
        "run started",
        extra={
            "props": {"run_id": run_id_for(cfg), "config": config_path, "out": out_dir}
        },
    )
    scan = await run_scan_async(cfg, workers)
    manifest = write_outputs(scan, Path(out_dir))
    logger.info("run finished", extra={"props": {"run_id": manifest.run_id}})
    return manifest


def cmd_fidelity(config_path: str) -> Dict[str, Any]:
    """exact clone and anti-clone fidelity at the configured (or zero-delay) overlap"""
    cfg = load_config(config_path)
    gamma = cfg.fixed_gamma if cfg.fixed_gamma is not None else cfg.overlap.peak_gamma
    spec = InputSpec(polarization=cfg.input.polarization, gamma=gamma)
    result = exact_fidelities(spec, cfg.pdc, cfg.fock_cutoff)
    doc = {
        "gamma": gamma,
        "ratio": 1.0 + gamma * gamma,
        "clone_fidelity": result.clone,
        "anticlone_fidelity": result.anticlone,
        "herald_probability": result.herald_probability,
        "optimal_fidelity": OPTIMAL_FIDELITY,
    }
    print(json.dumps(doc, sort_keys=True, indent=2))
    return doc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stim-clone",
        description="simulate quantum cloning by stimulated parametric down-conversion",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    scan = sub.add_parser(
        "scan", help="run a delay scan and write csv, fidelity and manifest"
    )
    scan.add_argument(
        "--config", required=True, help="json config or a previous manifest.json"
    )
    scan.add_argument("--mode", choices=[m.value for m in RunMode], default=None)
    scan.add_argument("--seed", type=int, default=None)
    scan.add_argument(
        "--basis", choices=[b.value for b in Basis] + ["all"], default=None
    )
    scan.add_argument("--out", default="results", help="output directory")
    scan.add_argument(
        "--workers",
        type=int,
        default=None,
        help="scan threads (capped by STIMCLONE_THREADS)",
    )

    fid = sub.add_parser("fidelity", help="print exact fidelities for one input")
    fid.add_argument("--config", required=True)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "scan":
            asyncio.run(
                cmd_scan(
                    args.config,
                    args.out,
                    args.mode,
                    args.seed,
                    args.basis,
                    args.workers,
                )
            )
        else:
            cmd_fidelity(args.config)
    except ConfigurationError as exc:
        logger.error(
            "invalid configuration",
            extra={"props": {"field": exc.field, "error": str(exc)}},
        )
        print(f"stim-clone: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StimCloneError, FloatingPointError, np.linalg.LinAlgError) as exc:
        logger.error("run failed", exc_info=True, extra={"props": {"error": str(exc)}})
        print(f"stim-clone: error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK
