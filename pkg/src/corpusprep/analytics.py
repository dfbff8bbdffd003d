"""Removal statistics, disparity indices, correlations and compute shares."""
from __future__ import annotations

import csv
import json
import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .docmodel import split_docid

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FILTER_STAGES = ("prefilter", "quality", "harmful")
DEDUP_STAGE = "dedup"
DI_MODES = ("formula", "ratio")


# --- removal statistics -----------------------------------------------------

@dataclass(frozen=True)
class LanguageRemoval:
    language: str
    docs_ingested: int
    docs_after_filtering: int
    docs_after_dedup: int

    def __post_init__(self):
        if not (0 <= self.docs_after_dedup <= self.docs_after_filtering <= self.docs_ingested):
            raise ValueError(f"{self.language}: counts must satisfy dedup <= filtering <= ingested")

    @property
    def r_filter(self) -> float:
        return 100.0 * (self.docs_ingested - self.docs_after_filtering) / self.docs_ingested

    @property
    def r_dedup(self) -> float:
        if self.docs_after_filtering == 0:
            return 0.0
        return 100.0 * (self.docs_after_filtering - self.docs_after_dedup) / self.docs_after_filtering


@dataclass(frozen=True)
class RemovalStats:
    languages: tuple[LanguageRemoval, ...]

    def __getitem__(self, lang: str) -> LanguageRemoval:
        for row in self.languages:
            if row.language == lang:
                return row
        raise KeyError(lang)

    def __iter__(self):
        return iter(self.languages)


def compute_removal_stats(drop_logs: Iterable[Mapping], ingest_counts: Mapping[str, int]) -> RemovalStats:
    """Per-language counts from drop-log entries; the language is read from each docid."""
    filtered: Counter = Counter()
    deduped: Counter = Counter()
    for entry in drop_logs:
        lang = split_docid(entry["docid"])[1]
        if entry["stage"] in FILTER_STAGES:
            filtered[lang] += 1
        elif entry["stage"] == DEDUP_STAGE:
            deduped[lang] += 1
        else:
            raise ValueError(f"unknown stage {entry['stage']!r}")
    rows = []
    for lang in sorted(set(ingest_counts) | set(filtered) | set(deduped)):
        n = ingest_counts.get(lang, 0)
        if n == 0:
            log.warning("no ingested documents for %s; omitted", lang)
            continue
        after_filter = n - filtered[lang]
        rows.append(LanguageRemoval(lang, n, after_filter, after_filter - deduped[lang]))
    return RemovalStats(tuple(rows))


# --- disparity index ----------------------------------------------------------

class DegenerateInput(ValueError):
    pass


@dataclass(frozen=True)
class DisparityReport:
    mode: str
    ratios: dict[str, float]
    scores: dict[str, float]
    mean: float
    std: float

    def ranked(self) -> list[tuple[str, float]]:
        return sorted(self.scores.items(), key=lambda kv: (-kv[1], kv[0]))


def disparity_index(values: Mapping[str, tuple[float, float]], mode: str = "formula") -> DisparityReport:
    """Z-scores of the per-language removed-to-data ratio.

    ``values`` maps language -> (percentage removed, document count). In
    ``formula`` mode the ratio is percentage / count; in ``ratio`` mode it is
    the removed fraction. The spread is the population standard deviation.
    """
    if mode not in DI_MODES:
        raise ValueError(f"mode must be one of {DI_MODES}")
    if len(values) < 2:
        raise DegenerateInput("need at least two languages")
    ratios = {}
    for lang, (pct, count) in sorted(values.items()):
        if mode == "formula":
            if count <= 0:
                raise DegenerateInput(f"{lang}: document count must be positive")
            ratios[lang] = pct / count
        else:
            ratios[lang] = pct / 100.0
    arr = np.array(list(ratios.values()), dtype=float)
    mu = float(arr.mean())
    sigma = float(np.sqrt(np.mean((arr - mu) ** 2)))
    if sigma == 0.0 or sigma <= 1e-12 * max(1.0, abs(mu)):
        raise DegenerateInput("all removed-to-data ratios are equal")
    scores = {lang: (r - mu) / sigma for lang, r in ratios.items()}
    return DisparityReport(mode, ratios, scores, mu, sigma)


def filtering_disparity(stats: RemovalStats, mode: str = "formula") -> DisparityReport:
    return disparity_index({r.language: (r.r_filter, r.docs_ingested) for r in stats}, mode)


def dedup_disparity(stats: RemovalStats, mode: str = "formula") -> DisparityReport:
    return disparity_index(
        {r.language: (r.r_dedup, r.docs_after_filtering) for r in stats if r.docs_after_filtering > 0},
        mode,
    )


# --- correlation ----------------------------------------------------------------

_CF_EPS = 1e-15
_CF_TINY = 1e-300
_CF_MAX_ITER = 500


def _beta_cf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _CF_TINY else _CF_TINY)
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _CF_TINY else _CF_TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _CF_TINY else _CF_TINY
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _CF_TINY else _CF_TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _CF_TINY else _CF_TINY
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must be in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def t_two_tailed_p(t: float, df: float) -> float:
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if math.isinf(t):
        return 0.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    n: int
    t: float
    p_two_tailed: float


def correlation_p_value(r: float, n: int) -> CorrelationResult:
    if n < 3:
        raise ValueError("need n >= 3")
    df = n - 2
    if abs(r) >= 1.0:
        return CorrelationResult(math.copysign(1.0, r), n, math.copysign(math.inf, r), 0.0)
    t = r * math.sqrt(df / (1.0 - r * r))
    return CorrelationResult(r, n, t, t_two_tailed_p(t, df))


def pearson(xs, ys) -> CorrelationResult:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be equal-length sequences")
    if len(x) < 3:
        raise ValueError("need at least three points")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("correlation undefined: zero variance")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    return correlation_p_value(r, len(x))


# --- regression -------------------------------------------------------------------

@dataclass(frozen=True)
class Regression:
    slope: float
    intercept: float
    residuals: np.ndarray
    slope_stderr: float


def linear_regression(xs, ys) -> Regression:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or len(x) < 2:
        raise ValueError("need at least two paired points")
    dx = x - x.mean()
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise ValueError("regression undefined: zero variance in x")
    slope = float(dx @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    n = len(x)
    stderr = math.sqrt(float(resid @ resid) / (n - 2) / sxx) if n > 2 else math.nan
    return Regression(slope, intercept, resid, stderr)


# --- compute shares -------------------------------------------------------------------

@dataclass(frozen=True)
class StageTiming:
    stage: str
    cpu_seconds: float

    def __post_init__(self):
        if not self.cpu_seconds >= 0:
            raise ValueError(f"{self.stage}: cpu_seconds must be non-negative")


def stage_share(timings: Iterable[StageTiming]) -> dict[str, float]:
    """Raw percentage of total CPU time per stage; round for display only."""
    timings = list(timings)
    names = [t.stage for t in timings]
    if len(set(names)) != len(names):
        raise ValueError("stage names must be unique")
    total = sum(t.cpu_seconds for t in timings)
    if total <= 0:
        raise ValueError("total CPU time must be positive")
    return {t.stage: 100.0 * t.cpu_seconds / total for t in timings}


def rounded_shares(shares: Mapping[str, float], digits: int = 1) -> dict[str, float]:
    return {k: round(v, digits) for k, v in shares.items()}


# --- reports ----------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _finite_or_none(d: dict) -> dict:
    return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in d.items()}


def _disparity_dict(rep: DisparityReport | None):
    if rep is None:
        return None
    return {
        "mode": rep.mode,
        "mean": rep.mean,
        "std": rep.std,
        "languages": [
            {"language": lang, "ratio": rep.ratios[lang], "di": score}
            for lang, score in rep.ranked()
        ],
    }


def emit_report(
    stats: RemovalStats,
    disparity: Mapping[str, DisparityReport | None],
    correlations: Mapping[str, CorrelationResult | None],
    timings: list[StageTiming] | None,
    out_dir,
) -> list[Path]:
    """Write report.json plus one CSV per table. Same inputs give the same bytes."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    report = {
        "schema_version": SCHEMA_VERSION,
        "removal": [
            {**asdict(row), "r_filter": row.r_filter, "r_dedup": row.r_dedup} for row in stats
        ],
        "disparity": {name: _disparity_dict(rep) for name, rep in disparity.items()},
        "correlations": {
            name: (_finite_or_none(asdict(c)) if c is not None else None)
            for name, c in correlations.items()
        },
    }
    if timings:
        shares = stage_share(timings)
        report["stage_share"] = {
            t.stage: {"cpu_seconds": t.cpu_seconds, "percent": shares[t.stage]} for t in timings
        }
    path = out / "report.json"
    path.write_text(json.dumps(report, indent=2, allow_nan=False) + "\n", encoding="utf-8")
    written.append(path)

    path = out / "removal_by_language.csv"
    _write_csv(path, ["language", "r_filter", "r_dedup"],
               [[r.language, _fmt(r.r_filter), _fmt(r.r_dedup)] for r in stats])
    written.append(path)

    path = out / "disparity.csv"
    rows = []
    for name, rep in disparity.items():
        if rep is not None:
            rows += [[name, lang, _fmt(rep.ratios[lang]), _fmt(score)] for lang, score in rep.ranked()]
    _write_csv(path, ["index", "language", "ratio", "di"], rows)
    written.append(path)

    if timings:
        written.append(write_stage_share_csv(timings, out))
    return written


def write_stage_share_csv(timings: list[StageTiming], out_dir) -> Path:
    path = Path(out_dir) / "stage_share.csv"
    shares = stage_share(timings)
    _write_csv(path, ["stage", "cpu_seconds", "percent"],
               [[t.stage, _fmt(t.cpu_seconds), f"{shares[t.stage]:.1f}"] for t in timings])
    return path
