"""Test statistics and estimators for detecting a frequency deviation.

All statistics accept a single ``(M, N)`` observation (returning a float)
or a batch ``(trials, M, N)`` (returning an array of length ``trials``).

Score convention
----------------
``score_first`` and ``score_second`` are the exact first and second
derivatives in ``delta`` at ``delta = 0`` of :func:`glmpu.signal_model.loglik`,
i.e. of ``-sum_m ||x_m - A_m s(omega0 + delta)||^2 / sigma_m^2``. Each carries
a factor 2 from differentiating ``2 Re{A_m x_m^H s}``. The LMPU and GLMPU
statistics are built from these scores as

    T = score_second + score_first**2 - kappa1 - kappa2 * score_first

and H0 is rejected when ``T > 0`` (``kappa1`` plays the role of the threshold).
``-kappa2 * score_first`` equals ``+kappa2 * sum_m (...) Im{A_m x_m^H D s}``,
so a nonnegative ``kappa2`` weights the imaginary-part sum positively.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator

import numpy as np

from ._validation import as_observation_array, check_sensor_vector
from .signal_model import Scenario, ramp_diagonal, steering_vector

__all__ = [
    "DetectorId",
    "GridSpec",
    "KappaPair",
    "FrequencyBank",
    "lrt_statistic",
    "ml_frequency",
    "amplitude_ml_null",
    "amplitude_ml_alt",
    "glrt_statistic",
    "glrt_known_amplitudes",
    "score_first",
    "score_second",
    "lmpu_statistic",
    "glmpu_statistic",
    "glmp_one_sided",
    "compute_statistic",
]


class DetectorId(str, Enum):
    LRT = "LRT"
    GLRT = "GLRT"
    GLRT_KA = "GLRT_KA"  # GLRT frequency search with the true amplitudes
    LMPU = "LMPU"
    GLMPU = "GLMPU"
    GLMP1S = "GLMP1S"


@dataclass(frozen=True)
class GridSpec:
    """Uniform half-open search grid of ``n_alpha`` points on ``[lo, hi)``.

    ``lo``/``hi`` default to the scenario's unambiguous deviation range.
    Point ``k`` is ``lo + k * (hi - lo) / n_alpha``, evaluated as
    ``(lo * (n_alpha - k) + hi * k) / n_alpha`` so a symmetric interval with
    even ``n_alpha`` contains an exact zero.
    """

    n_alpha: int
    lo: float | None = None
    hi: float | None = None

    def __post_init__(self):
        if int(self.n_alpha) < 1:
            raise ValueError(f"n_alpha must be >= 1, got {self.n_alpha}")
        object.__setattr__(self, "n_alpha", int(self.n_alpha))
        if (self.lo is None) != (self.hi is None):
            raise ValueError("lo and hi must be given together")
        if self.lo is not None and not self.lo < self.hi:
            raise ValueError(f"grid needs lo < hi, got [{self.lo}, {self.hi})")

    def bounds(self, scenario: Scenario) -> tuple[float, float]:
        if self.lo is None:
            return scenario.delta_range
        return float(self.lo), float(self.hi)

    def points(self, scenario: Scenario) -> np.ndarray:
        lo, hi = self.bounds(scenario)
        n = self.n_alpha
        k = np.arange(n)
        return (lo * (n - k) + hi * k) / n

    def to_dict(self) -> dict:
        return {"n_alpha": self.n_alpha, "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_dict(cls, d: dict) -> GridSpec:
        return cls(int(d["n_alpha"]), d.get("lo"), d.get("hi"))


@dataclass(frozen=True)
class KappaPair:
    """Coefficients of the LMPU/GLMPU rule.

    ``kappa2`` must be nonnegative. ``kappa1`` is whatever the size
    constraint demands: nonnegative for the known-amplitude LMPU, but the
    plug-in GLMPU statistic has a negative null mean (its score fluctuates
    only with the centred time ramp) and usually needs ``kappa1 < 0``.
    """

    kappa1: float = 0.0
    kappa2: float = 0.0

    def __post_init__(self):
        k1, k2 = float(self.kappa1), float(self.kappa2)
        if not (np.isfinite(k1) and np.isfinite(k2)):
            raise ValueError("kappa coefficients must be finite")
        if k2 < 0:
            raise ValueError(f"kappa2 must be >= 0, got {k2}")
        object.__setattr__(self, "kappa1", k1)
        object.__setattr__(self, "kappa2", k2)


class FrequencyBank:
    """Steering vectors ``s(omega0 + alpha)`` for every point of a search grid.

    The grid is evaluated exhaustively. Rows are produced in blocks from two
    small exponential tables (``s`` at block starts and the within-block
    phase ramp), so each row costs one elementwise product instead of ``N``
    complex exponentials. Small banks are cached whole.

    Parameters
    ----------
    scenario : Scenario
    grid : GridSpec
    include_zero : bool
        Append ``alpha = 0`` when the uniform grid does not contain it.
    """

    block = 256
    cache_limit = 1 << 22  # entries; about 64 MB of complex128

    def __init__(self, scenario: Scenario, grid: GridSpec, include_zero: bool = False):
        self.scenario = scenario
        self.grid = grid
        uniform = grid.points(scenario)
        self.n_uniform = len(uniform)
        extra = []
        if include_zero and not np.any(uniform == 0.0):
            extra.append(0.0)
        self.alphas = np.concatenate([uniform, np.array(extra, dtype=float)])
        zero = np.flatnonzero(self.alphas == 0.0)
        self.zero_index = int(zero[0]) if zero.size else None
        # tie-break priority: smallest |alpha| first, then negative before positive
        order = np.lexsort((self.alphas, np.abs(self.alphas)))
        self.rank = np.empty(len(self.alphas), dtype=np.int64)
        self.rank[order] = np.arange(len(self.alphas))

        lo, hi = grid.bounds(scenario)
        g, w0, N = scenario.gamma, scenario.omega0, scenario.N
        n = ramp_diagonal(N)
        self._B = min(self.block, self.n_uniform)
        step = g * (hi - lo) / (self.n_uniform * w0)
        n_starts = -(-self.n_uniform // self._B)
        starts = g * (w0 + lo) / w0 + step * self._B * np.arange(n_starts)
        self._start_rows = np.exp(1j * np.outer(starts, n))
        self._ramp_rows = np.exp(1j * step * np.outer(np.arange(self._B), n))
        self._extra_rows = np.array([steering_vector(w0 + a, scenario) for a in extra]).reshape(
            len(extra), N
        )
        self._cache = None
        if len(self.alphas) * N <= self.cache_limit:
            self._cache = np.concatenate([b for _, b in self._generate()])

    def __len__(self) -> int:
        return len(self.alphas)

    def _generate(self) -> Iterator[tuple[int, np.ndarray]]:
        for i, row in enumerate(self._start_rows):
            start = i * self._B
            stop = min(start + self._B, self.n_uniform)
            yield start, row * self._ramp_rows[: stop - start]
        if len(self._extra_rows):
            yield self.n_uniform, self._extra_rows

    def blocks(self) -> Iterator[tuple[int, np.ndarray]]:
        """Yield ``(first_index, rows)`` covering the whole grid in order."""
        if self._cache is None:
            yield from self._generate()
            return
        for start in range(0, len(self.alphas), self._B):
            yield start, self._cache[start : start + self._B]

    def search(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
        """Maximize ``(1/N) sum_m |s^H(omega0+alpha) x_m|^2 / sigma_m^2`` over the grid.

        ``x`` has shape ``(T, M, N)``. Returns the winning grid index, the
        maximal objective, and the objective at ``alpha = 0`` (``None`` when
        zero is not a grid point), each of length ``T``.
        """
        sc = self.scenario
        T = x.shape[0]
        w = 1.0 / sc.variances
        xf = np.ascontiguousarray(x.reshape(T * sc.M, sc.N).T)
        best_val = np.full(T, -np.inf)
        best_idx = np.zeros(T, dtype=np.int64)
        zero_val = None
        sentinel = len(self.alphas)
        for start, rows in self.blocks():
            p = rows.conj() @ xf
            obj = ((p.real**2 + p.imag**2).reshape(len(rows), T, sc.M) @ w) / sc.N
            bmax = obj.max(axis=0)
            rank = self.rank[start : start + len(rows), None]
            local = np.where(obj == bmax, rank, sentinel).argmin(axis=0)
            idx = start + local
            better = (bmax > best_val) | (
                (bmax == best_val) & (self.rank[idx] < self.rank[best_idx])
            )
            best_val = np.where(better, bmax, best_val)
            best_idx = np.where(better, idx, best_idx)
            if self.zero_index is not None and start <= self.zero_index < start + len(rows):
                zero_val = obj[self.zero_index - start].copy()
        return best_idx, best_val, zero_val


def _bank(scenario: Scenario, grid, include_zero: bool) -> FrequencyBank:
    if isinstance(grid, FrequencyBank):
        if not _same_search_model(grid.scenario, scenario):
            raise ValueError("frequency bank was built for a different scenario")
        if include_zero and grid.zero_index is None:
            return FrequencyBank(scenario, grid.grid, include_zero=True)
        return grid
    if grid is None:
        raise ValueError("a GridSpec is required for the frequency search")
    return FrequencyBank(scenario, grid, include_zero=include_zero)


def _same_search_model(a: Scenario, b: Scenario) -> bool:
    return (a.M, a.N, a.gamma, a.omega0) == (b.M, b.N, b.gamma, b.omega0) and np.array_equal(
        a.variances, b.variances
    )


def _scalar(val):
    return float(val) if np.ndim(val) == 0 else val


def _amplitudes(amplitudes, scenario: Scenario) -> np.ndarray:
    if amplitudes is None:
        return scenario.amplitudes
    return check_sensor_vector(amplitudes, scenario.M, "amplitudes", dtype=np.complex128)


def _inner(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``x_m^H v`` for every sensor; ``v`` broadcasts over the sample axis."""
    return np.sum(x.conj() * v, axis=-1) if v.ndim > 1 else x.conj() @ v


def lrt_statistic(obs, scenario: Scenario, delta: float | None = None, amplitudes=None):
    """Clairvoyant likelihood ratio statistic using the true ``delta`` and amplitudes."""
    x = as_observation_array(obs, scenario)
    A = _amplitudes(amplitudes, scenario)
    delta = scenario.delta if delta is None else float(delta)
    w = 1.0 / scenario.variances
    alt = np.real(A * _inner(x, steering_vector(scenario.omega0 + delta, scenario))) @ w
    null = np.real(A * _inner(x, steering_vector(scenario.omega0, scenario))) @ w
    return _scalar(alt - null)


def ml_frequency(obs, scenario: Scenario, grid):
    """Grid-search ML estimate of the deviation.

    Every grid point is evaluated; ties go to the smallest ``|alpha|``,
    then to the negative one.
    """
    x = as_observation_array(obs, scenario)
    bank = _bank(scenario, grid, include_zero=False)
    idx, _, _ = bank.search(x.reshape(-1, scenario.M, scenario.N))
    return _scalar(bank.alphas[idx].reshape(x.shape[:-2]))


def amplitude_ml_null(obs, scenario: Scenario) -> np.ndarray:
    """ML amplitudes at ``delta = 0``: ``s^H(omega0) x_m / N``."""
    x = as_observation_array(obs, scenario)
    return x @ steering_vector(scenario.omega0, scenario).conj() / scenario.N


def amplitude_ml_alt(obs, scenario: Scenario, delta_hat) -> np.ndarray:
    """ML amplitudes at ``delta = delta_hat``; ``delta_hat`` may vary per trial."""
    x = as_observation_array(obs, scenario)
    d = np.asarray(delta_hat, dtype=float)
    n = ramp_diagonal(scenario.N)
    s = np.exp(1j * scenario.gamma * ((scenario.omega0 + d[..., None]) / scenario.omega0) * n)
    return np.sum(x * s[..., None, :].conj(), axis=-1) / scenario.N


def glrt_statistic(obs, scenario: Scenario, grid):
    """GLRT with unknown amplitudes and grid-searched deviation (always >= 0).

    ``alpha = 0`` is inserted into the grid when absent.
    """
    x = as_observation_array(obs, scenario)
    bank = _bank(scenario, grid, include_zero=True)
    _, best, zero = bank.search(x.reshape(-1, scenario.M, scenario.N))
    return _scalar((best - zero).reshape(x.shape[:-2]))


def glrt_known_amplitudes(obs, scenario: Scenario, grid, amplitudes=None):
    """Likelihood ratio with the searched deviation plugged in and amplitudes known."""
    x = as_observation_array(obs, scenario)
    A = _amplitudes(amplitudes, scenario)
    bank = _bank(scenario, grid, include_zero=False)
    flat = x.reshape(-1, scenario.M, scenario.N)
    idx, _, _ = bank.search(flat)
    d = bank.alphas[idx]
    n = ramp_diagonal(scenario.N)
    s_hat = np.exp(1j * scenario.gamma * ((scenario.omega0 + d[:, None]) / scenario.omega0) * n)
    w = 1.0 / scenario.variances
    alt = np.real(A * _inner(flat, s_hat[:, None, :])) @ w
    null = np.real(A * _inner(flat, steering_vector(scenario.omega0, scenario))) @ w
    return _scalar((alt - null).reshape(x.shape[:-2]))


def _ramped(scenario: Scenario, power: int) -> np.ndarray:
    return ramp_diagonal(scenario.N) ** power * steering_vector(scenario.omega0, scenario)


def score_first(obs, scenario: Scenario, amplitudes=None):
    """First derivative of the log-likelihood in ``delta`` at zero."""
    x = as_observation_array(obs, scenario)
    A = _amplitudes(amplitudes, scenario)
    c = 2 * scenario.gamma / scenario.omega0
    return _scalar(-c * (np.imag(A * _inner(x, _ramped(scenario, 1))) @ (1.0 / scenario.variances)))


def score_second(obs, scenario: Scenario, amplitudes=None):
    """Second derivative of the log-likelihood in ``delta`` at zero."""
    x = as_observation_array(obs, scenario)
    A = _amplitudes(amplitudes, scenario)
    c = 2 * (scenario.gamma / scenario.omega0) ** 2
    return _scalar(-c * (np.real(A * _inner(x, _ramped(scenario, 2))) @ (1.0 / scenario.variances)))


def lmpu_statistic(obs, scenario: Scenario, amplitudes=None, kappa: KappaPair = KappaPair()):
    """LMPU statistic with known amplitudes (a benchmark, not a practical detector)."""
    s1 = np.asarray(score_first(obs, scenario, amplitudes))
    s2 = np.asarray(score_second(obs, scenario, amplitudes))
    return _scalar(s2 + s1**2 - kappa.kappa1 - kappa.kappa2 * s1)


def _plugin_scores(x: np.ndarray, scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    # quadratic forms x^H D^k s s^H x, with s^H x = conj(x^H s)
    w = 1.0 / scenario.variances
    sx = np.conj(_inner(x, steering_vector(scenario.omega0, scenario)))
    q1 = _inner(x, _ramped(scenario, 1)) * sx
    q2 = _inner(x, _ramped(scenario, 2)) * sx
    g = scenario.gamma / scenario.omega0
    first = -(2 * g / scenario.N) * (np.imag(q1) @ w)
    second = -(2 * g**2 / scenario.N) * (np.real(q2) @ w)
    return first, second


def glmpu_statistic(obs, scenario: Scenario, kappa: KappaPair = KappaPair()):
    """GLMPU statistic: LMPU with amplitudes replaced by their ML values at ``delta = 0``.

    Evaluated directly as quadratic forms in the data; no frequency search.
    With ``N == 1`` the time ramp is zero and the statistic is ``-kappa1``.
    """
    x = as_observation_array(obs, scenario)
    first, second = _plugin_scores(x, scenario)
    return _scalar(second + first**2 - kappa.kappa1 - kappa.kappa2 * first)


def glmp_one_sided(obs, scenario: Scenario):
    """One-sided GLMP statistic: the plug-in score at ``delta = 0``."""
    x = as_observation_array(obs, scenario)
    first, _ = _plugin_scores(x, scenario)
    return _scalar(first)


def compute_statistic(
    detector_id,
    obs,
    scenario: Scenario,
    grid=None,
    *,
    kappa: KappaPair = KappaPair(),
    design_delta: float | None = None,
):
    """Dispatch on ``detector_id``.

    ``design_delta`` is the deviation assumed by the clairvoyant LRT
    (defaults to ``scenario.delta``). LRT, GLRT_KA and LMPU use the true
    amplitudes from ``scenario``.
    """
    det = DetectorId(detector_id)
    if det is DetectorId.LRT:
        return lrt_statistic(obs, scenario, delta=design_delta)
    if det is DetectorId.GLRT:
        return glrt_statistic(obs, scenario, grid)
    if det is DetectorId.GLRT_KA:
        return glrt_known_amplitudes(obs, scenario, grid)
    if det is DetectorId.LMPU:
        return lmpu_statistic(obs, scenario, kappa=kappa)
    if det is DetectorId.GLMPU:
        return glmpu_statistic(obs, scenario, kappa=kappa)
    return glmp_one_sided(obs, scenario)
