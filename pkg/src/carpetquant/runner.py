"""End-to-end orchestration: validated runs producing reproducible CSV files.

A run loads one carpet config, then per exponent r solves the dimension
equation, certifies the antichain inequalities, estimates quantization
errors from a seeded sample pool, and fits the scaling slope.  Five CSV
files are written (dimension, antichain, certificates, quantize, summary);
whatever rows exist are flushed even when a stage fails, and the failing
stage is named on the raised error.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence, TypeVar

from .antichain import CertificateReport, certify
from .carpet import CarpetError, CarpetSpec, load_config, validate_spec
from .constants import SpectralConstants, constants
from .quantize import LloydResult, lloyd_best, sample

__all__ = [
    "ConfigError",
    "StageError",
    "RunConfig",
    "run",
    "fit_slope",
    "format_value",
    "write_csv",
]

_T = TypeVar("_T")

DIMENSION_COLUMNS = (
    "r", "s_r", "P_r", "Q_r", "eta_lo", "eta_hi",
    "H1", "xi", "M", "H2", "H3", "H4", "H5",
)
ANTICHAIN_COLUMNS = (
    "r", "j", "psi", "k1", "k2", "sumE", "H1_bound_ok",
    "lemma31_max_ratio", "lemma41_max_ratio", "phi", "s12_ok",
)
CERTIFICATE_COLUMNS = ("r", "j", "check", "value", "op", "bound", "passed", "witness")
QUANTIZE_COLUMNS = ("r", "k", "e_k_r", "iters", "restarts_used")
SUMMARY_COLUMNS = ("r", "s_r", "slope", "slope_err", "band_ratio", "all_certificates_pass")


class ConfigError(ValueError):
    """The run configuration is unusable (bad carpet, ranges, or paths)."""


class StageError(RuntimeError):
    """A pipeline stage failed; the original error rides along."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs; validated up front, before any computation."""

    carpet: str | Path
    output_dir: str | Path
    r_values: tuple[float, ...] = (2.0,)
    j_range: tuple[int, int] = (0, 5)
    k_grid: tuple[int, ...] = (1, 2, 4, 8, 16, 32, 64)
    samples: int = 200_000
    seed: int = 20240816
    cap: int = 500_000
    restarts: int = 5


def format_value(value: object) -> str:
    """Render one CSV cell: 17 significant digits, '.' decimal, true/false."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[object]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])


def fit_slope(ks: Sequence[int], errors: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of log(error) against log(k), with its stderr."""
    xs = [math.log(k) for k in ks]
    ys = [math.log(e) for e in errors]
    n = len(xs)
    if n < 2:
        return float("nan"), float("inf")
    xbar = math.fsum(xs) / n
    ybar = math.fsum(ys) / n
    sxx = math.fsum((x - xbar) ** 2 for x in xs)
    sxy = math.fsum((x - xbar) * (y - ybar) for x, y in zip(xs, ys))
    slope = sxy / sxx
    rss = math.fsum((y - ybar - slope * (x - xbar)) ** 2 for x, y in zip(xs, ys))
    err = math.sqrt(rss / (n - 2) / sxx) if n > 2 else float("inf")
    return slope, err


def validate_run_config(cfg: RunConfig) -> CarpetSpec:
    """Check every field and load the carpet; raise ConfigError otherwise."""
    try:
        spec = load_config(cfg.carpet)
        validate_spec(spec)
    except (CarpetError, OSError, ValueError) as exc:
        raise ConfigError(f"bad carpet config: {exc}") from exc
    if not cfg.r_values or any(r <= 0 for r in cfg.r_values):
        raise ConfigError(f"r values must be positive, got {cfg.r_values!r}")
    lo, hi = cfg.j_range
    if lo < 0 or hi < lo:
        raise ConfigError(f"scale range must satisfy 0 <= lo <= hi, got {cfg.j_range!r}")
    if not cfg.k_grid or any(k < 1 for k in cfg.k_grid):
        raise ConfigError(f"codebook sizes must be >= 1, got {cfg.k_grid!r}")
    if cfg.samples < max(cfg.k_grid):
        raise ConfigError(f"pool of {cfg.samples} cannot host {max(cfg.k_grid)} centers")
    if cfg.seed < 0:
        raise ConfigError(f"seed must be nonnegative, got {cfg.seed}")
    if cfg.cap < 1:
        raise ConfigError(f"cap must be >= 1, got {cfg.cap}")
    if cfg.restarts < 1:
        raise ConfigError(f"restarts must be >= 1, got {cfg.restarts}")
    return spec


def _stage(name: str, fn: Callable[..., _T], *args, **kwargs) -> _T:
    try:
        return fn(*args, **kwargs)
    except Exception as exc:
        raise StageError(name, exc) from exc


def _dimension_row(r: float, c: SpectralConstants) -> tuple:
    return (r, c.s_r, c.P, c.Q, c.eta_lo, c.eta_hi, c.H1, c.xi, c.M, c.H2, c.H3, c.H4, c.H5)


def _antichain_rows(r: float, report: CertificateReport) -> list[tuple]:
    rows = []
    for cert in report.certificates:
        s12_ok = cert.check("count-band-lower").passed and cert.check("count-band-upper").passed
        rows.append(
            (
                r,
                cert.j,
                cert.psi,
                cert.k1,
                cert.k2,
                cert.sum_energy,
                cert.check("energy-sum").passed,
                cert.s1_max_ratio,
                cert.s2_max_ratio,
                cert.phi,
                s12_ok,
            )
        )
    return rows


def _certificate_rows(r: float, report: CertificateReport) -> list[tuple]:
    rows = []
    for cert in report.certificates:
        for chk in cert.checks:
            rows.append((r, chk.j, chk.name, chk.value, chk.op, chk.bound, chk.passed, chk.witness))
    for chk in report.cross_checks:
        rows.append((r, chk.j, chk.name, chk.value, chk.op, chk.bound, chk.passed, chk.witness))
    return rows


def run(cfg: RunConfig) -> int:
    """Execute all stages; return the process exit code (0 ok, 1 cert fail)."""
    spec = validate_run_config(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    dimension_rows: list[tuple] = []
    antichain_rows: list[tuple] = []
    certificate_rows: list[tuple] = []
    quantize_rows: list[tuple] = []
    summary_rows: list[tuple] = []
    all_pass = True
    j_values = tuple(range(cfg.j_range[0], cfg.j_range[1] + 1))

    try:
        for r in cfg.r_values:
            consts = _stage("dimension", constants, spec, r)
            dimension_rows.append(_dimension_row(r, consts))

            report = _stage("certify", certify, spec, consts, j_values, cfg.cap)
            antichain_rows.extend(_antichain_rows(r, report))
            certificate_rows.extend(_certificate_rows(r, report))
            all_pass = all_pass and report.all_pass

            pool = _stage("sample", sample, spec, cfg.samples, cfg.seed)
            results: list[LloydResult] = []
            for k in cfg.k_grid:
                results.append(
                    _stage("quantize", lloyd_best, pool, k, r, cfg.seed, cfg.restarts)
                )
            errors = [res.distortion ** (1.0 / r) for res in results]
            for k, res, e in zip(cfg.k_grid, results, errors):
                quantize_rows.append((r, k, e, res.iters, res.restarts_used))

            slope, slope_err = fit_slope(cfg.k_grid, errors)
            scaled = [k ** (r / consts.s_r) * res.distortion for k, res in zip(cfg.k_grid, results)]
            band_ratio = max(scaled) / min(scaled)
            summary_rows.append((r, consts.s_r, slope, slope_err, band_ratio, report.all_pass))
    finally:
        write_csv(out / "dimension.csv", DIMENSION_COLUMNS, dimension_rows)
        write_csv(out / "antichain.csv", ANTICHAIN_COLUMNS, antichain_rows)
        write_csv(out / "certificates.csv", CERTIFICATE_COLUMNS, certificate_rows)
        write_csv(out / "quantize.csv", QUANTIZE_COLUMNS, quantize_rows)
        write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary_rows)

    return 0 if all_pass else 1
