"""Input validation helpers shared by the model, detectors and estimators."""

from __future__ import annotations

import numpy as np


def check_sensor_vector(values, M: int, name: str, dtype=np.float64) -> np.ndarray:
    """Coerce ``values`` to a 1-D array of length ``M``."""
    arr = np.array(values, dtype=dtype).reshape(-1)
    if arr.shape != (M,):
        raise ValueError(f"{name} must have length M={M}, got {arr.shape[0]}")
    return arr


def as_observation_array(obs, scenario) -> np.ndarray:
    """Return ``obs`` as a complex array of shape ``(..., M, N)`` matching ``scenario``.

    ``obs`` may be an :class:`~glmpu.signal_model.ObservationSet`, a single
    ``(M, N)`` array or a batch ``(trials, M, N)``.
    """
    x = np.asarray(getattr(obs, "data", obs))
    if not np.issubdtype(x.dtype, np.number):
        raise TypeError(f"observations must be numeric, got dtype {x.dtype}")
    x = x.astype(np.complex128, copy=False)
    if x.ndim < 2 or x.shape[-2:] != (scenario.M, scenario.N):
        raise ValueError(
            f"observation shape {x.shape} does not match (M, N) = ({scenario.M}, {scenario.N})"
        )
    if not np.all(np.isfinite(x)):
        raise ValueError("observations contain NaN or infinite values")
    return x


def check_observation_batch(X, scenario) -> np.ndarray:
    """Coerce ``X`` to a ``(n_samples, M, N)`` complex array.

    Flattened rows of length ``M * N`` (sensor-major) are reshaped, which
    lets the estimators sit behind 2-D tooling.
    """
    x = np.asarray(getattr(X, "data", X))
    if x.ndim == 2 and x.shape[1] == scenario.M * scenario.N and x.shape != (scenario.M, scenario.N):
        x = x.reshape(-1, scenario.M, scenario.N)
    x = as_observation_array(x, scenario)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3:
        raise ValueError(f"expected a batch of shape (n_samples, M, N), got {x.shape}")
    if x.shape[0] == 0:
        raise ValueError("empty observation batch")
    return x
