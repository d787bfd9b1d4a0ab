"""Monte-Carlo robustness studies over disorder realizations.

The per-realization figure of merit is the single-particle leakage
``1 - |exp(-iK tau)[N+1, 0]|^2`` at the planned transfer time, which is cheap
for any chain length.  Realizations whose schedule is ill posed (degenerate
resonance, dark mode, colliding off-resonant level) are kept as flagged
records: they count toward ``failure_rate`` but are excluded from summaries.

Percentiles, including the median, use the nearest-rank rule: the p-th
percentile of n sorted values is the element of rank ``ceil(p/100 * n)``
(rank 1 for p = 0).
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .chain import ChainSpec, DisorderModel, build_coupling_matrix, sample_disorder
from .errors import InvalidArgument, NumericFailure
from .fermions import (
    analyze_modes,
    compensate_asymmetry,
    infidelity_bound,
    max_coupling,
    ph_spectrum_check,
    pick_resonant_mode,
    transfer_amplitude,
)

METRICS = ("zero_mode_gap", "participation_ratio_z", "end_amplitude_ratio", "tau", "leakage", "bound")
CSV_COLUMNS = ("realization", "status") + METRICS


@dataclass(frozen=True)
class EnsembleSpec:
    base: ChainSpec
    model: DisorderModel
    realizations: int
    epsilon0: float = 1e-3
    compensate: bool = False

    def __post_init__(self) -> None:
        if isinstance(self.realizations, bool) or int(self.realizations) != self.realizations or self.realizations < 1:
            raise InvalidArgument("realizations must be a positive integer")
        if not 0 < self.epsilon0 < 1:
            raise InvalidArgument("epsilon0 must lie in (0, 1)")


@dataclass(frozen=True)
class RealizationRecord:
    realization: int
    status: str
    zero_mode_gap: float = math.nan
    participation_ratio_z: float = math.nan
    end_amplitude_ratio: float = math.nan
    tau: float = math.nan
    leakage: float = math.nan
    bound: float = math.nan

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class Summary:
    mean: float
    median: float
    p05: float
    p95: float


@dataclass(frozen=True)
class EnsembleStats:
    records: tuple[RealizationRecord, ...]
    summary: dict[str, Summary]
    failure_rate: float
    participation: np.ndarray = field(repr=False)  # (realizations, N) chain-mode participation ratios

    def column(self, name: str, only_ok: bool = True) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records if r.ok or not only_ok])

    # -- export ----------------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.records:
            writer.writerow([r.realization, r.status] + [repr(float(getattr(r, m))) for m in METRICS])
        return buf.getvalue()

    def summary_dict(self) -> dict:
        return {
            "schema_version": 1,
            "realizations": len(self.records),
            "failure_rate": self.failure_rate,
            "percentile_method": "nearest-rank",
            "summary": {name: asdict(s) for name, s in self.summary.items()},
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary_dict(), indent=2, sort_keys=True)


def read_records_csv(text: str) -> tuple[RealizationRecord, ...]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise InvalidArgument(f"unexpected ensemble CSV header {rows[0] if rows else None}")
    return tuple(
        RealizationRecord(int(row[0]), row[1], *(float(v) for v in row[2:])) for row in rows[1:]
    )


def nearest_rank(values, p: float) -> float:
    """Nearest-rank percentile; NaN for an empty sample."""
    data = np.sort(np.asarray(values, dtype=float))
    if data.size == 0:
        return math.nan
    rank = max(1, math.ceil(p / 100.0 * data.size))
    return float(data[rank - 1])


def summarize(values) -> Summary:
    data = np.asarray(values, dtype=float)
    data = data[~np.isnan(data)]
    if data.size == 0:
        return Summary(math.nan, math.nan, math.nan, math.nan)
    return Summary(
        mean=float(np.sum(data) / data.size),
        median=nearest_rank(data, 50),
        p05=nearest_rank(data, 5),
        p95=nearest_rank(data, 95),
    )


def _realization(spec: EnsembleSpec, index: int) -> tuple[RealizationRecord, np.ndarray]:
    chain = sample_disorder(spec.base, spec.model, index)
    modes = analyze_modes(build_coupling_matrix(chain))
    gap = ph_spectrum_check(modes).zero_mode_gap
    try:
        z = pick_resonant_mode(modes, chain.delta).k
        phi = modes.vector(z)
        ratio = abs(phi[0]) / abs(phi[-1]) if phi[-1] != 0 else math.inf
        if spec.compensate:
            g_target = math.sqrt(chain.g_left * chain.g_right)
            chain = chain.with_couplings(*compensate_asymmetry(modes, z, g_target))
            modes = analyze_modes(build_coupling_matrix(chain))
        limit = max_coupling(modes, z, spec.epsilon0)
        final = chain.with_couplings(limit.g_left, limit.g_right)
        K = build_coupling_matrix(final)
        amp = transfer_amplitude(K, limit.tau_min)
        bound = infidelity_bound(analyze_modes(K), z)
    except NumericFailure as exc:
        status = {"DegenerateResonance": "degenerate-resonance", "DarkMode": "dark-mode",
                  "ResonanceCollision": "resonance-collision"}.get(type(exc).__name__, "numeric-failure")
        return RealizationRecord(index, status, zero_mode_gap=gap), np.array(modes.participation)
    record = RealizationRecord(
        realization=index,
        status="ok",
        zero_mode_gap=gap,
        participation_ratio_z=float(modes.participation[z - 1]),
        end_amplitude_ratio=float(ratio),
        tau=limit.tau_min,
        leakage=1.0 - abs(amp) ** 2,
        bound=bound,
    )
    return record, np.array(modes.participation)


def run_ensemble(spec: EnsembleSpec, threads: int = 1) -> EnsembleStats:
    """Sample, plan and score every realization; deterministic for a fixed seed.

    ``threads`` > 1 (or 0 for one worker per CPU) evaluates realizations in
    parallel; results are always reduced in realization order.
    """
    indices = range(spec.realizations)
    if threads == 1:
        results = [_realization(spec, i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=threads or None) as pool:
            results = list(pool.map(lambda i: _realization(spec, i), indices))
    records = tuple(r for r, _ in results)
    ok = [r for r in records if r.ok]
    summary = {}
    for name in METRICS:
        source = records if name == "zero_mode_gap" else ok
        summary[name] = summarize([getattr(r, name) for r in source])
    return EnsembleStats(
        records=records,
        summary=summary,
        failure_rate=(len(records) - len(ok)) / len(records),
        participation=np.array([p for _, p in results]),
    )


@dataclass(frozen=True)
class CompensationStudy:
    compensated: EnsembleStats
    uncompensated: EnsembleStats

    @property
    def improved_fraction(self) -> float:
        """Share of realizations (valid in both arms) where compensation does not increase leakage."""
        pairs = [
            (c.leakage, u.leakage)
            for c, u in zip(self.compensated.records, self.uncompensated.records)
            if c.ok and u.ok
        ]
        if not pairs:
            return math.nan
        return sum(c <= u for c, u in pairs) / len(pairs)


def compensation_study(spec: EnsembleSpec, threads: int = 1) -> CompensationStudy:
    """Same realizations with and without end-coupling compensation."""
    on = EnsembleSpec(spec.base, spec.model, spec.realizations, spec.epsilon0, compensate=True)
    off = EnsembleSpec(spec.base, spec.model, spec.realizations, spec.epsilon0, compensate=False)
    return CompensationStudy(compensated=run_ensemble(on, threads), uncompensated=run_ensemble(off, threads))


def localization_profile(spec: EnsembleSpec, threads: int = 1) -> list[tuple[int, float]]:
    """Median participation ratio of every mode label across realizations."""
    stats = run_ensemble(spec, threads)
    pr = stats.participation
    return [(k + 1, nearest_rank(pr[:, k], 50)) for k in range(pr.shape[1])]
