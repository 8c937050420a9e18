"""Operation-count model and wall-clock benchmark for the detectors.

Flop convention: a length-``N`` inner product between a data vector and a
precomputed reference vector costs ``2N`` flops (one multiply and one add per
element), and every scalar multiply, add or squared magnitude costs 1. Under
this convention ``|s^H x_m|^2`` is ``2N`` flops, so the grid search costs
``n_alpha * (M * (2N + 1) - 1)``. Reference vectors that do not depend on the
data (``s(omega0)``, ``D s(omega0)``, ``D^2 s(omega0)``, the search grid) are
precomputed and not counted.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .detectors import DetectorId, FrequencyBank, GridSpec, KappaPair, compute_statistic
from .signal_model import Scenario, generate_observations

__all__ = ["CostReport", "flop_estimate", "flop_breakdown", "runtime_sweep", "write_reports"]

CSV_HEADER = ["detector", "N", "M", "n_alpha", "flops", "wall_ns_median", "wall_ns_p90", "repetitions"]


def search_flops(M: int, N: int, n_alpha: int) -> int:
    return n_alpha * (M * (2 * N + 1) - 1)


def flop_breakdown(detector_id, scenario: Scenario, grid: GridSpec | None = None) -> dict[str, int]:
    """Flop counts split into ``search`` (grid evaluation) and ``direct`` parts."""
    det = DetectorId(detector_id)
    M, N = scenario.M, scenario.N
    search = 0
    if det in (DetectorId.GLRT, DetectorId.GLRT_KA):
        if grid is None:
            raise ValueError(f"{det.value} needs a GridSpec")
        search = search_flops(M, N, grid.n_alpha)
    if det is DetectorId.GLRT:
        # |x_m^H s(omega0)|^2 per sensor; the maximum is already known from the search.
        # Per sensor: 1 weight; then M-1 adds, 1 scale by 1/N, 1 subtraction.
        direct = 2 * M * N + M + (M - 1) + 2
    elif det is DetectorId.GLRT_KA:
        # x^H s(omega0+dhat) and x^H s(omega0) per sensor; Re{A u}: 2 mults + 1 add, twice;
        # 2 weights; two M-term sums and one subtraction.
        direct = 4 * M * N + 8 * M + 2 * (M - 1) + 1
    elif det is DetectorId.LRT:
        direct = 4 * M * N + 8 * M + 2 * (M - 1) + 1
    elif det in (DetectorId.GLMPU, DetectorId.LMPU):
        # GLMPU: s^H x, x^H D s, x^H D^2 s per sensor (LMPU skips s^H x, A is known).
        # Im{.} and Re{.} of a complex product: 3 each; 2 weights per sensor.
        # Two M-term sums, 2 constant scalings, 1 square, 1 add, kappa1 (1), kappa2 * score (2).
        products = 3 if det is DetectorId.GLMPU else 2
        direct = 2 * products * M * N + 8 * M + 2 * (M - 1) + 7
    else:  # GLMP1S
        direct = 4 * M * N + 4 * M + (M - 1) + 1
    return {"search": search, "direct": direct}


def flop_estimate(detector_id, scenario: Scenario, grid: GridSpec | None = None) -> int:
    """Total modelled flops for one evaluation of the detector statistic."""
    parts = flop_breakdown(detector_id, scenario, grid)
    return parts["search"] + parts["direct"]


@dataclass
class CostReport:
    detector_id: str
    N: int
    M: int
    n_alpha: int
    flops_model: int
    wall_ns_median: int
    wall_ns_p90: int
    repetitions: int
    batch: int = 1  # statistic evaluations per timed repetition

    def __post_init__(self):
        if self.repetitions < 5:
            raise ValueError("a cost report needs at least 5 repetitions")

    def row(self) -> list:
        return [
            self.detector_id, self.N, self.M, self.n_alpha, self.flops_model,
            self.wall_ns_median, self.wall_ns_p90, self.repetitions,
        ]


def _timed(fn, batch: int) -> int:
    t0 = time.perf_counter_ns()
    for _ in range(batch):
        fn()
    return (time.perf_counter_ns() - t0) // batch


def runtime_sweep(
    detector_ids: Sequence,
    N_values: Sequence[int],
    scenario_base: Scenario,
    grid: GridSpec,
    repetitions: int = 11,
    seed: int = 0,
    min_time_ns: int = 200_000,
) -> list[CostReport]:
    """Time one statistic evaluation per detector and sample count.

    For each ``N`` one dataset is generated and the search grid tables are
    built before timing. A warm-up call is discarded. Statistics faster than
    ``min_time_ns`` are looped ``batch`` times per repetition and divided.
    Runs single-threaded in the calling thread.
    """
    if repetitions < 5:
        raise ValueError("repetitions must be >= 5")
    reports = []
    for N in N_values:
        sc = scenario_base.replace(N=int(N))
        x = generate_observations(sc, "H1", seed).data
        for det_id in detector_ids:
            det = DetectorId(det_id)
            bank = None
            if det in (DetectorId.GLRT, DetectorId.GLRT_KA):
                bank = FrequencyBank(sc, grid, include_zero=det is DetectorId.GLRT)

            def fn(det=det, bank=bank):
                return compute_statistic(det, x, sc, bank, kappa=KappaPair())

            _timed(fn, 1)  # warm-up, discarded
            single = _timed(fn, 1)
            batch = max(1, math.ceil(min_time_ns / max(single, 1)))
            times = np.array([_timed(fn, batch) for _ in range(repetitions)])
            reports.append(
                CostReport(
                    detector_id=det.value,
                    N=sc.N,
                    M=sc.M,
                    n_alpha=grid.n_alpha,
                    flops_model=flop_estimate(det, sc, grid),
                    wall_ns_median=int(np.median(times)),
                    wall_ns_p90=int(np.percentile(times, 90)),
                    repetitions=repetitions,
                    batch=batch,
                )
            )
    return reports


def write_reports(reports: Sequence[CostReport], path: str | Path | None = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in reports:
        writer.writerow(r.row())
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
