"""Monte Carlo calibration and power estimation for the detectors.

Seeding
-------
Trials are simulated in fixed blocks of :data:`BLOCK_TRIALS`. Block ``b`` of a
run with seed ``s`` draws from ``SeedSequence(entropy=s, spawn_key=(b,))``,
so results depend only on ``(seed, trials)`` and never on how many worker
threads process the blocks. Curve helpers derive per-point seeds with
:func:`derive_seed`, which hashes ``(master, stream, index)`` through
``SeedSequence`` into a 64-bit integer. Calibration uses stream
``CALIBRATION_STREAM`` and power evaluation ``EVALUATION_STREAM`` so the two
never share noise.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .detectors import (
    DetectorId,
    FrequencyBank,
    GridSpec,
    KappaPair,
    compute_statistic,
    glmp_one_sided,
    score_first,
)
from .signal_model import Scenario, simulate_batch

__all__ = [
    "Axis",
    "CalibratedDetector",
    "DetectionCurve",
    "UnbiasednessReport",
    "InsufficientTrialsError",
    "derive_seed",
    "simulate_statistics",
    "threshold_from_samples",
    "calibrate_threshold",
    "estimate_pd",
    "detection_curve",
    "roc_curve",
    "verify_unbiasedness",
    "unbiasedness_grid",
    "search_kappa2",
]

BLOCK_TRIALS = 1024
CALIBRATION_STREAM = 0
EVALUATION_STREAM = 1


class Axis(str, Enum):
    DELTA = "DELTA"
    SNR_DB = "SNR_DB"
    THRESHOLD = "THRESHOLD"


class InsufficientTrialsError(ValueError):
    """Too few trials for the empirical quantile to resolve ``alpha``."""


def derive_seed(master: int, *path: int) -> int:
    """Mix ``master`` and an index path into an independent 64-bit seed."""
    state = np.random.SeedSequence([int(master), *map(int, path)]).generate_state(2, np.uint64)
    return int(state[0])


def _n_workers(threads: int) -> int:
    if threads == 0:
        return os.cpu_count() or 1
    return max(1, int(threads))


def _is_builtin(detector) -> bool:
    return isinstance(detector, (str, DetectorId))


def _is_lrt(detector) -> bool:
    return _is_builtin(detector) and DetectorId(detector) is DetectorId.LRT


def _detector_name(detector) -> str:
    if not _is_builtin(detector):
        return getattr(detector, "__name__", "custom")
    return DetectorId(detector).value


def _raw_statistic(
    detector,
    scenario: Scenario,
    grid: GridSpec | None,
    kappa2: float = 0.0,
    design_delta: float | None = None,
) -> Callable[[np.ndarray], np.ndarray]:
    """Statistic as a function of a data batch, with ``kappa1 = 0``."""
    if not _is_builtin(detector):
        return lambda x: np.asarray(detector(x, scenario), dtype=float)
    det = DetectorId(detector)
    bank = None
    if det in (DetectorId.GLRT, DetectorId.GLRT_KA):
        if grid is None:
            raise ValueError(f"{det.value} needs a GridSpec")
        bank = FrequencyBank(scenario, grid, include_zero=det is DetectorId.GLRT)
    kappa = KappaPair(0.0, kappa2)
    return lambda x: np.asarray(
        compute_statistic(det, x, scenario, bank, kappa=kappa, design_delta=design_delta),
        dtype=float,
    )


def simulate_statistics(
    stat: Callable[[np.ndarray], np.ndarray],
    scenario: Scenario,
    delta: float,
    trials: int,
    seed: int,
    threads: int = 1,
) -> np.ndarray:
    """Evaluate ``stat`` on ``trials`` simulated datasets at deviation ``delta``."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    sizes = [min(BLOCK_TRIALS, trials - b0) for b0 in range(0, trials, BLOCK_TRIALS)]

    def run(b: int) -> np.ndarray:
        ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(b,))
        x = simulate_batch(scenario, delta, sizes[b], np.random.Generator(np.random.PCG64(ss)))
        return np.asarray(stat(x), dtype=float).reshape(sizes[b])

    workers = _n_workers(threads)
    if workers == 1 or len(sizes) == 1:
        parts = [run(b) for b in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    return np.concatenate(parts)


def threshold_from_samples(samples: np.ndarray, alpha: float) -> float:
    """The ``ceil((1 - alpha) * T)``-th order statistic of ``T`` null samples.

    Rejecting on ``statistic > threshold`` then gives an empirical false
    alarm rate of at most ``alpha`` on the same samples.
    """
    samples = np.sort(np.asarray(samples, dtype=float).ravel())
    T = samples.size
    _check_alpha(alpha, T)
    k = math.ceil(round((1.0 - alpha) * T, 9))
    return float(samples[max(k, 1) - 1])


def _check_alpha(alpha: float, trials: int):
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if trials < 1 / alpha:
        raise InsufficientTrialsError(
            f"{trials} trials cannot resolve alpha={alpha}; need at least {math.ceil(1 / alpha)}"
        )
    if trials * alpha < 10:
        warnings.warn(
            f"only {trials * alpha:.1f} expected false alarms; threshold will be noisy",
            RuntimeWarning,
            stacklevel=3,
        )


@dataclass
class CalibratedDetector:
    """A detector with its threshold set for false-alarm level ``alpha``.

    H0 is rejected when the raw statistic (``kappa1 = 0``) exceeds
    ``threshold``. For LMPU/GLMPU ``kappa.kappa1 == threshold``, so this is
    the same as ``statistic(kappa) > 0``.
    """

    detector_id: DetectorId | Callable
    threshold: float
    kappa: KappaPair
    alpha: float
    calibration_trials: int
    seed: int
    scenario: Scenario = field(repr=False)
    grid: GridSpec | None = None
    design_delta: float | None = None
    empirical_pfa: float = float("nan")

    @property
    def name(self) -> str:
        return _detector_name(self.detector_id)

    def statistic_fn(self, scenario: Scenario | None = None):
        return _raw_statistic(
            self.detector_id,
            scenario or self.scenario,
            self.grid,
            self.kappa.kappa2,
            self.design_delta,
        )

    def decision_function(self, obs, scenario: Scenario | None = None):
        """Raw statistic minus threshold; positive means reject H0."""
        x = np.asarray(getattr(obs, "data", obs))
        single = x.ndim == 2
        x = x.reshape(-1, *x.shape[-2:])
        out = self.statistic_fn(scenario)(x) - self.threshold
        return float(out[0]) if single else out

    def predict(self, obs, scenario: Scenario | None = None):
        return np.asarray(self.decision_function(obs, scenario)) > 0

    def to_dict(self) -> dict:
        return {
            "detector_id": self.name,
            "threshold": self.threshold,
            "kappa": {"kappa1": self.kappa.kappa1, "kappa2": self.kappa.kappa2},
            "alpha": self.alpha,
            "calibration_trials": self.calibration_trials,
            "seed": self.seed,
            "scenario": self.scenario.to_dict(),
            "grid": None if self.grid is None else self.grid.to_dict(),
            "design_delta": self.design_delta,
            "empirical_pfa": self.empirical_pfa,
        }

    @classmethod
    def from_dict(cls, d: dict) -> CalibratedDetector:
        return cls(
            detector_id=DetectorId(d["detector_id"]),
            threshold=float(d["threshold"]),
            kappa=KappaPair(**d["kappa"]),
            alpha=float(d["alpha"]),
            calibration_trials=int(d["calibration_trials"]),
            seed=int(d["seed"]),
            scenario=Scenario.from_dict(d["scenario"]),
            grid=None if d.get("grid") is None else GridSpec.from_dict(d["grid"]),
            design_delta=d.get("design_delta"),
            empirical_pfa=float(d.get("empirical_pfa", float("nan"))),
        )


def calibrate_threshold(
    detector,
    scenario: Scenario,
    alpha: float,
    trials: int,
    seed: int,
    grid: GridSpec | None = None,
    *,
    kappa2: float = 0.0,
    design_delta: float | None = None,
    threads: int = 1,
) -> CalibratedDetector:
    """Set the threshold so the empirical false-alarm rate is at most ``alpha``.

    Data are always simulated under H0. ``scenario.delta`` (or
    ``design_delta``) only matters for the LRT, whose statistic is built
    around a known alternative.

    ``detector`` is a :class:`DetectorId` name or a callable
    ``f(x_batch, scenario) -> statistics``.
    """
    _check_alpha(alpha, trials)
    det = DetectorId(detector) if _is_builtin(detector) else detector
    if det is DetectorId.LRT:
        design_delta = scenario.delta if design_delta is None else float(design_delta)
    else:
        design_delta = None
    null = scenario.null()
    stat = _raw_statistic(det, null, grid, kappa2, design_delta)
    samples = simulate_statistics(stat, null, 0.0, trials, seed, threads)
    threshold = threshold_from_samples(samples, alpha)
    if det in (DetectorId.LMPU, DetectorId.GLMPU):
        kappa = KappaPair(threshold, kappa2)
    else:
        kappa = KappaPair(0.0, 0.0)
    return CalibratedDetector(
        detector_id=det,
        threshold=threshold,
        kappa=kappa,
        alpha=float(alpha),
        calibration_trials=int(trials),
        seed=int(seed),
        scenario=null,
        grid=grid,
        design_delta=design_delta,
        empirical_pfa=float(np.mean(samples > threshold)),
    )


def _check_compatible(cal: CalibratedDetector, scenario: Scenario):
    a, b = cal.scenario, scenario
    if (a.M, a.N, a.gamma, a.omega0) != (b.M, b.N, b.gamma, b.omega0) or not np.array_equal(
        a.variances, b.variances
    ):
        raise ValueError(
            "scenario differs from the calibration scenario in M, N, gamma, omega0 or variances"
        )


def estimate_pd(
    cal: CalibratedDetector,
    scenario: Scenario,
    trials: int,
    seed: int,
    grid: GridSpec | None = None,
    *,
    threads: int = 1,
) -> tuple[float, float]:
    """Fraction of trials at ``scenario.delta`` whose statistic exceeds the threshold.

    Returns ``(pd, stderr)`` with the binomial standard error.
    """
    _check_compatible(cal, scenario)
    if grid is not None and cal.grid is not None and grid != cal.grid:
        raise ValueError("grid differs from the one used for calibration")
    stat = cal.statistic_fn(scenario)
    samples = simulate_statistics(stat, scenario, scenario.delta, trials, seed, threads)
    pd = float(np.mean(samples > cal.threshold))
    return pd, math.sqrt(pd * (1 - pd) / trials)


@dataclass
class DetectionCurve:
    """Empirical detection probability along one axis.

    For ``Axis.THRESHOLD`` (ROC) the abscissa is the empirical false-alarm
    rate at each threshold and is nondecreasing; otherwise it is strictly
    increasing.
    """

    axis: Axis
    points: list[tuple[float, float, float]]
    alpha: float | None
    trials_per_point: int
    config: dict = field(default_factory=dict)

    @property
    def abscissa(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def pd(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    @property
    def stderr(self) -> np.ndarray:
        return np.array([p[2] for p in self.points])

    def to_csv(self) -> str:
        lines = ["abscissa,pd,stderr"]
        lines += [f"{a:.17g},{p:.17g},{s:.17g}" for a, p, s in self.points]
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> tuple[Path, Path]:
        """Write ``path`` (CSV) and a ``.json`` sidecar holding the config."""
        path = Path(path)
        path.write_text(self.to_csv())
        sidecar = path.with_suffix(".json")
        meta = {
            "axis": self.axis.value,
            "alpha": self.alpha,
            "trials_per_point": self.trials_per_point,
            **self.config,
        }
        sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return path, sidecar


def detection_curve(
    detector,
    scenario_base: Scenario,
    axis: Axis | str,
    values: Sequence[float],
    alpha: float,
    trials: int,
    seed: int,
    grid: GridSpec | None = None,
    *,
    calibration_trials: int | None = None,
    kappa2: float = 0.0,
    threads: int = 1,
) -> DetectionCurve:
    """Detection probability versus deviation (rad/s) or per-sensor SNR (dB).

    A ``DELTA`` sweep calibrates once on the base scenario (the LRT is
    recalibrated per point because its statistic depends on the
    alternative). An ``SNR_DB`` sweep recalibrates at every SNR, holding
    ``scenario_base.delta`` as the alternative. Per-point evaluation seeds
    are ``derive_seed(seed, EVALUATION_STREAM, i)``.
    """
    axis = Axis(axis)
    if axis is Axis.THRESHOLD:
        raise ValueError("use roc_curve for threshold sweeps")
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 1 or vals.size == 0 or np.any(np.diff(vals) <= 0):
        raise ValueError("sweep values must be a non-empty strictly increasing sequence")
    cal_trials = calibration_trials or trials
    is_lrt = _is_lrt(detector)

    def calibrate(sc: Scenario, i: int, design: float | None) -> CalibratedDetector:
        return calibrate_threshold(
            detector, sc, alpha, cal_trials, derive_seed(seed, CALIBRATION_STREAM, i), grid,
            kappa2=kappa2, design_delta=design, threads=threads,
        )

    shared = None
    if axis is Axis.DELTA and not is_lrt:
        shared = calibrate(scenario_base.null(), 0, None)
    points = []
    for i, v in enumerate(vals):
        if axis is Axis.DELTA:
            sc = scenario_base.replace(delta=float(v))
            cal = shared or calibrate(sc, i, float(v))
        else:
            sc = scenario_base.with_snr(float(v))
            cal = calibrate(sc, i, sc.delta if is_lrt else None)
        pd, se = estimate_pd(cal, sc, trials, derive_seed(seed, EVALUATION_STREAM, i), threads=threads)
        points.append((float(v), pd, se))
    config = {
        "detector": _detector_name(detector),
        "scenario": scenario_base.to_dict(),
        "grid": None if grid is None else grid.to_dict(),
        "seed": int(seed),
        "calibration_trials": cal_trials,
        "kappa2": kappa2,
    }
    return DetectionCurve(axis, points, float(alpha), int(trials), config)


def roc_curve(
    detector,
    scenario: Scenario,
    trials: int,
    seed: int,
    grid: GridSpec | None = None,
    *,
    max_points: int | None = None,
    threads: int = 1,
) -> DetectionCurve:
    """Empirical ROC: ``(Pfa, Pd)`` for every distinct null statistic as threshold.

    Null and alternative samples use seeds from the calibration and
    evaluation streams. Points are sorted by Pfa and bracketed by ``(0, 0)``
    and ``(1, 1)``; the abscissa is nondecreasing (an interior point may sit
    at Pfa 0 when the detector separates the samples perfectly).
    ``max_points`` thins the interior evenly.
    """
    if scenario.delta == 0:
        raise ValueError("roc_curve needs a nonzero deviation")
    design = scenario.delta if _is_lrt(detector) else None
    stat = _raw_statistic(detector, scenario, grid, 0.0, design)
    h0 = simulate_statistics(
        stat, scenario, 0.0, trials, derive_seed(seed, CALIBRATION_STREAM, 0), threads
    )
    h1 = simulate_statistics(
        stat, scenario, scenario.delta, trials, derive_seed(seed, EVALUATION_STREAM, 0), threads
    )
    h0s, h1s = np.sort(h0), np.sort(h1)
    thresholds = np.unique(h0s)
    pfa = (h0s.size - np.searchsorted(h0s, thresholds, side="right")) / h0s.size
    pd = (h1s.size - np.searchsorted(h1s, thresholds, side="right")) / h1s.size
    # one interior point per distinct Pfa, keeping the best Pd
    order = np.lexsort((-pd, pfa))
    pfa, pd = pfa[order], pd[order]
    keep = np.concatenate([[True], np.diff(pfa) > 0])
    pfa, pd = pfa[keep], pd[keep]
    if max_points is not None and len(pfa) > max(max_points - 2, 0):
        idx = np.unique(np.round(np.linspace(0, len(pfa) - 1, max(max_points - 2, 1))).astype(int))
        pfa, pd = pfa[idx], pd[idx]
    pfa = np.concatenate([[0.0], pfa, [1.0]])
    pd = np.concatenate([[0.0], pd, [1.0]])
    se = np.sqrt(pd * (1 - pd) / trials)
    points = [(float(a), float(p), float(s)) for a, p, s in zip(pfa, pd, se)]
    config = {
        "detector": _detector_name(detector),
        "scenario": scenario.to_dict(),
        "grid": None if grid is None else grid.to_dict(),
        "seed": int(seed),
    }
    return DetectionCurve(Axis.THRESHOLD, points, None, int(trials), config)


@dataclass
class UnbiasednessReport:
    delta_radius: float
    grid: list[float]
    pd_values: list[float]
    stderr: list[float]
    passed: bool
    tolerance: float
    alpha: float


def unbiasedness_grid(delta_radius: float, n_points: int) -> np.ndarray:
    """Symmetric deviations strictly inside ``(-radius, radius)``, zero excluded.

    ``n_points // 2`` magnitudes at the midpoints ``radius * (2i - 1) / n_points``.
    """
    if not delta_radius > 0:
        raise ValueError(f"delta_radius must be > 0, got {delta_radius}")
    if n_points < 2:
        raise ValueError(f"n_points must be >= 2, got {n_points}")
    h = n_points // 2
    mags = delta_radius * (2 * np.arange(1, h + 1) - 1) / (2 * h)
    return np.concatenate([-mags[::-1], mags])


def verify_unbiasedness(
    cal: CalibratedDetector,
    scenario_base: Scenario,
    delta_radius: float,
    n_points: int,
    trials: int,
    seed: int,
    tolerance: float | None = None,
    grid: GridSpec | None = None,
    *,
    threads: int = 1,
) -> UnbiasednessReport:
    """Check ``Pd >= alpha - tolerance`` on a symmetric deviation grid.

    The default tolerance is three standard errors of each point's estimate;
    the report records the largest tolerance applied.
    """
    deltas = unbiasedness_grid(delta_radius, n_points)
    pds, ses, tols = [], [], []
    for i, d in enumerate(deltas):
        sc = scenario_base.replace(delta=float(d))
        pd, se = estimate_pd(cal, sc, trials, derive_seed(seed, EVALUATION_STREAM, i), grid,
                             threads=threads)
        pds.append(pd)
        ses.append(se)
        tols.append(3 * se if tolerance is None else float(tolerance))
    passed = all(pd >= cal.alpha - tol for pd, tol in zip(pds, tols))
    return UnbiasednessReport(
        float(delta_radius), deltas.tolist(), pds, ses, passed, max(tols), cal.alpha
    )


def search_kappa2(
    detector,
    scenario_base: Scenario,
    alpha: float,
    delta_radius: float,
    trials: int,
    seed: int,
    grid: GridSpec | None = None,
    *,
    kappa2_values: Sequence[float] | None = None,
    n_points: int = 4,
    threads: int = 1,
) -> KappaPair:
    """Pick ``kappa2`` maximizing the worst-case Pd on the unbiasedness grid.

    Heuristic helper, not a canonical calibration procedure. Every candidate
    is recalibrated to size ``alpha`` and evaluated on the same simulated
    data. Without ``kappa2_values`` the scan is ``{0, 0.25, 0.5, 1, 2}``
    times the null standard deviation of the first-derivative score.
    """
    det = DetectorId(detector)
    if det not in (DetectorId.LMPU, DetectorId.GLMPU):
        raise ValueError("kappa2 only applies to LMPU and GLMPU")
    null = scenario_base.null()
    if kappa2_values is None:
        score = glmp_one_sided if det is DetectorId.GLMPU else score_first
        pilot = simulate_statistics(
            lambda x: score(x, null), null, 0.0, min(trials, 4096), derive_seed(seed, 2, 0)
        )
        sd = float(np.std(pilot))
        kappa2_values = [0.0, 0.25 * sd, 0.5 * sd, sd, 2 * sd]
    scan = sorted({float(k) for k in kappa2_values} | {0.0})
    if scan[0] < 0:
        raise ValueError("kappa2 candidates must be nonnegative")
    deltas = unbiasedness_grid(delta_radius, n_points)
    cal_seed = derive_seed(seed, CALIBRATION_STREAM, 0)
    best, best_score = None, -np.inf
    for k2 in scan:
        cal = calibrate_threshold(det, null, alpha, trials, cal_seed, grid, kappa2=k2,
                                  threads=threads)
        worst = min(
            estimate_pd(cal, scenario_base.replace(delta=float(d)), trials,
                        derive_seed(seed, EVALUATION_STREAM, i), threads=threads)[0]
            for i, d in enumerate(deltas)
        )
        if worst > best_score:
            best, best_score = cal.kappa, worst
    return best
