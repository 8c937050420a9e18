"""Multi-sensor complex sinusoid model with a small frequency deviation.

Each of ``M`` sensors observes ``N`` samples

    x_m[n] = A_m * exp(j * gamma * (omega0 + delta) / omega0 * n) + w_m[n]

with circularly symmetric complex Gaussian noise of known variance
``sigma_m^2``. ``delta == 0`` is the null hypothesis.

Noise synthesis uses numpy's ``PCG64`` bit generator (``default_rng``) and its
ziggurat ``standard_normal`` sampler. Draws are laid out as an array of shape
``(..., M, N, 2)`` (real part, imaginary part) so the value at a given
``(trial, m, n)`` position does not depend on how sensors are iterated.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np

from ._validation import as_observation_array, check_sensor_vector

__all__ = [
    "Hypothesis",
    "Scenario",
    "ObservationSet",
    "steering_vector",
    "ramp_diagonal",
    "generate_observations",
    "simulate_batch",
    "loglik",
    "snr_to_variance",
]

DEFAULT_AMPLITUDES = (
    1.0,
    np.exp(1j * np.pi / 3),
    np.sqrt(3) * np.exp(-1j * 5 * np.pi / 6),
    1.0,
    np.exp(1j * np.pi),
    1.0,
)


class Hypothesis(str, Enum):
    H0 = "H0"
    H1 = "H1"


def _complex_to_json(z: complex) -> dict[str, float]:
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def _complex_from_json(obj: Any) -> complex:
    if isinstance(obj, dict):
        return complex(float(obj["re"]), float(obj["im"]))
    return complex(obj)


@dataclass(frozen=True, eq=False)
class Scenario:
    """Full parameterization of the observation model.

    Parameters
    ----------
    M, N : int
        Number of sensors and samples per sensor.
    gamma : float
        Sampling angle in radians (``2*pi / samples_per_cycle``).
    omega0 : float
        Known nominal frequency in rad/s.
    amplitudes : array of complex, shape (M,)
        Complex amplitudes ``A_m`` (the nuisance parameters).
    variances : array of float, shape (M,)
        Known noise variances ``sigma_m^2``.
    delta : float
        Frequency deviation in rad/s; zero under the null hypothesis.
    """

    M: int
    N: int
    gamma: float
    omega0: float
    amplitudes: np.ndarray
    variances: np.ndarray
    delta: float = 0.0

    def __post_init__(self):
        M, N = int(self.M), int(self.N)
        if M < 1 or N < 1:
            raise ValueError(f"M and N must be >= 1, got M={M}, N={N}")
        if not self.omega0 > 0:
            raise ValueError(f"omega0 must be positive, got {self.omega0}")
        if self.gamma == 0 or not np.isfinite(self.gamma):
            raise ValueError(f"gamma must be finite and nonzero, got {self.gamma}")
        amps = check_sensor_vector(self.amplitudes, M, "amplitudes", dtype=np.complex128)
        var = check_sensor_vector(self.variances, M, "variances", dtype=np.float64)
        if np.any(var <= 0) or not np.all(np.isfinite(var)):
            raise ValueError("all noise variances must be finite and > 0")
        amps.setflags(write=False)
        var.setflags(write=False)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "omega0", float(self.omega0))
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "variances", var)
        object.__setattr__(self, "delta", float(self.delta))
        lo, hi = self.delta_range
        if not lo <= self.delta < hi:
            raise ValueError(f"delta={self.delta} outside the unambiguous range [{lo}, {hi})")

    @classmethod
    def default(cls, N: int = 48, snr_db: float = 0.0, delta: float = 0.0) -> Scenario:
        """Six-sensor PMU-like scenario at 60 Hz, 48 samples per cycle."""
        amps = np.array(DEFAULT_AMPLITUDES, dtype=np.complex128)
        var = np.array([snr_to_variance(a, snr_db) for a in amps])
        return cls(
            M=6, N=N, gamma=2 * np.pi / 48, omega0=2 * np.pi * 60,
            amplitudes=amps, variances=var, delta=delta,
        )

    @property
    def delta_range(self) -> tuple[float, float]:
        """Half-open interval ``[-omega0*pi/|gamma|, omega0*pi/|gamma|)``."""
        half = self.omega0 * np.pi / abs(self.gamma)
        return -half, half

    def replace(self, **changes) -> Scenario:
        return replace(self, **changes)

    def with_snr(self, snr_db: float) -> Scenario:
        """Same scenario with every sensor set to ``snr_db``."""
        var = np.array([snr_to_variance(a, snr_db) for a in self.amplitudes])
        return replace(self, variances=var)

    def null(self) -> Scenario:
        return replace(self, delta=0.0)

    def same_model(self, other: Scenario) -> bool:
        """True when ``other`` differs from ``self`` at most in ``delta``."""
        return (
            self.M == other.M
            and self.N == other.N
            and self.gamma == other.gamma
            and self.omega0 == other.omega0
            and np.array_equal(self.variances, other.variances)
            and np.array_equal(self.amplitudes, other.amplitudes)
        )

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return self.same_model(other) and self.delta == other.delta

    __hash__ = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "M": self.M,
            "N": self.N,
            "gamma": self.gamma,
            "omega0": self.omega0,
            "amplitudes": [_complex_to_json(a) for a in self.amplitudes],
            "variances": [float(v) for v in self.variances],
            "delta": self.delta,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Scenario:
        missing = {"M", "N", "gamma", "omega0", "amplitudes", "variances"} - set(d)
        if missing:
            raise ValueError(f"scenario is missing fields: {sorted(missing)}")
        return cls(
            M=int(d["M"]),
            N=int(d["N"]),
            gamma=float(d["gamma"]),
            omega0=float(d["omega0"]),
            amplitudes=np.array([_complex_from_json(a) for a in d["amplitudes"]]),
            variances=np.array([float(v) for v in d["variances"]]),
            delta=float(d.get("delta", 0.0)),
        )

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> Scenario:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """An ``(M, N)`` complex measurement matrix, sensor-major."""

    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.array(self.data, dtype=np.complex128)
        if data.ndim != 2:
            raise ValueError(f"observation data must be 2-D (M, N), got shape {data.shape}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def to_csv(self, path: str | Path | None = None) -> str:
        """Write ``sensor,n,re,im`` rows (17 significant digits)."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["sensor", "n", "re", "im"])
        M, N = self.data.shape
        for m in range(M):
            for n in range(N):
                z = self.data[m, n]
                writer.writerow([m, n, f"{z.real:.17g}", f"{z.imag:.17g}"])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source: str | Path) -> ObservationSet:
        """Read a ``sensor,n,re,im`` CSV file (or the text itself)."""
        text = source if isinstance(source, str) and "\n" in source else Path(source).read_text()
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ValueError("observation CSV has no rows")
        try:
            idx = [(int(r["sensor"]), int(r["n"])) for r in rows]
            vals = [complex(float(r["re"]), float(r["im"])) for r in rows]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed observation CSV: {exc}") from exc
        M = max(i for i, _ in idx) + 1
        N = max(j for _, j in idx) + 1
        if len(set(idx)) != M * N or len(idx) != M * N:
            raise ValueError(f"observation CSV does not fill a {M}x{N} grid")
        data = np.empty((M, N), dtype=np.complex128)
        for (m, n), v in zip(idx, vals):
            data[m, n] = v
        return cls(data)


def steering_vector(omega: float, scenario: Scenario) -> np.ndarray:
    """``s(omega)[n] = exp(j * gamma * omega / omega0 * n)`` for ``n = 0..N-1``."""
    n = np.arange(scenario.N)
    return np.exp(1j * scenario.gamma * (omega / scenario.omega0) * n)


def ramp_diagonal(N: int) -> np.ndarray:
    """Diagonal of the time-index matrix: ``[0, 1, ..., N-1]``."""
    return np.arange(N)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def simulate_batch(
    scenario: Scenario,
    delta: float,
    trials: int,
    seed,
    *,
    noiseless: bool = False,
) -> np.ndarray:
    """Draw ``trials`` independent observation matrices, shape ``(trials, M, N)``.

    ``seed`` is anything accepted by :func:`numpy.random.default_rng`
    (including a ``SeedSequence`` or an existing ``Generator``).
    """
    signal = scenario.amplitudes[:, None] * steering_vector(scenario.omega0 + delta, scenario)
    out = np.broadcast_to(signal, (trials, scenario.M, scenario.N)).copy()
    if noiseless:
        return out
    scale = np.sqrt(scenario.variances / 2.0)[:, None]
    w = _rng(seed).standard_normal((trials, scenario.M, scenario.N, 2))
    out += scale * (w[..., 0] + 1j * w[..., 1])
    return out


def generate_observations(
    scenario: Scenario,
    hypothesis: Hypothesis | str,
    seed=None,
    *,
    noiseless: bool = False,
) -> ObservationSet:
    """Generate one ``(M, N)`` observation under ``H0`` or ``H1``.

    Under ``H1`` the tone sits at ``omega0 + scenario.delta``. With the same
    seed, ``H0`` and an ``H1`` scenario with ``delta == 0`` give identical data.
    """
    hyp = Hypothesis(hypothesis)
    delta = scenario.delta if hyp is Hypothesis.H1 else 0.0
    return ObservationSet(simulate_batch(scenario, delta, 1, seed, noiseless=noiseless)[0])


def loglik(obs, delta: float, amplitudes, scenario: Scenario) -> np.ndarray | float:
    """Log-likelihood up to constants: ``-sum_m ||x_m - A_m s(omega0+delta)||^2 / sigma_m^2``.

    Accepts a single ``(M, N)`` observation or a batch ``(..., M, N)``.
    """
    x = as_observation_array(obs, scenario)
    amps = check_sensor_vector(amplitudes, scenario.M, "amplitudes", dtype=np.complex128)
    resid = x - amps[:, None] * steering_vector(scenario.omega0 + delta, scenario)
    energy = np.sum(resid.real**2 + resid.imag**2, axis=-1)
    val = -(energy @ (1.0 / scenario.variances))
    return float(val) if np.ndim(val) == 0 else val


def snr_to_variance(amplitude: complex, snr_db: float) -> float:
    """Noise variance giving ``|A|^2 / sigma^2 = 10**(snr_db/10)``."""
    power = abs(complex(amplitude)) ** 2
    if power == 0:
        raise ValueError("amplitude must be nonzero to define an SNR")
    return power / 10.0 ** (snr_db / 10.0)

