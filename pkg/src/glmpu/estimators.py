"""scikit-learn compatible wrapper around the detector statistics.

``fit`` calibrates the decision threshold on observations drawn under the
null hypothesis, ``decision_function`` returns statistic minus threshold and
``predict`` returns 1 where H0 is rejected. The estimator therefore drops
into ``sklearn.metrics`` (ROC analysis) and ``Pipeline`` objects.

>>> from glmpu import Scenario, simulate_batch
>>> sc = Scenario.default()
>>> det = LocalFrequencyDetector(scenario=sc, detector="GLMPU", alpha=0.05)
>>> det.fit(simulate_batch(sc, 0.0, 2000, seed=0)).predict(simulate_batch(sc, 0.1 * sc.omega0, 5, seed=1)).shape
(5,)
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_observation_batch
from .detectors import DetectorId, FrequencyBank, GridSpec, KappaPair, compute_statistic
from .montecarlo import threshold_from_samples
from .signal_model import Scenario

__all__ = ["LocalFrequencyDetector"]


class LocalFrequencyDetector(TransformerMixin, ClassifierMixin, BaseEstimator):
    """Size-``alpha`` threshold test for a frequency deviation.

    Parameters
    ----------
    scenario : Scenario, optional
        Known model quantities (``M``, ``N``, ``gamma``, ``omega0``, noise
        variances; amplitudes for the known-amplitude detectors). Defaults to
        :meth:`Scenario.default`.
    detector : str
        One of ``LRT``, ``GLRT``, ``GLRT_KA``, ``LMPU``, ``GLMPU``, ``GLMP1S``.
    alpha : float
        Target false-alarm probability.
    grid : GridSpec, optional
        Search grid for the GLRT variants (default 2000 points).
    kappa2 : float
        Linear-score coefficient of the LMPU/GLMPU rule.
    design_delta : float, optional
        Alternative assumed by the LRT; defaults to ``scenario.delta``.
    """

    def __init__(
        self,
        scenario=None,
        detector="GLMPU",
        alpha=0.05,
        grid=None,
        kappa2=0.0,
        design_delta=None,
    ):
        self.scenario = scenario
        self.detector = detector
        self.alpha = alpha
        self.grid = grid
        self.kappa2 = kappa2
        self.design_delta = design_delta

    def _scenario(self) -> Scenario:
        return Scenario.default() if self.scenario is None else self.scenario

    def _statistic(self, X) -> np.ndarray:
        sc = self._scenario()
        x = check_observation_batch(X, sc)
        det = DetectorId(self.detector)
        bank = getattr(self, "_bank", None)
        if det in (DetectorId.GLRT, DetectorId.GLRT_KA) and bank is None:
            bank = FrequencyBank(sc, self.grid or GridSpec(2000), include_zero=det is DetectorId.GLRT)
            self._bank = bank
        return np.asarray(
            compute_statistic(
                det, x, sc, bank, kappa=KappaPair(0.0, self.kappa2), design_delta=self.design_delta
            ),
            dtype=float,
        ).reshape(x.shape[0])

    def fit(self, X, y=None):
        """Calibrate on null observations.

        With labels ``y``, only rows where ``y == 0`` are used.
        """
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        DetectorId(self.detector)
        self._bank = None
        if y is not None:
            y = np.asarray(y)
            X = check_observation_batch(X, self._scenario())[y == 0]
        stats = self._statistic(X)
        self.threshold_ = threshold_from_samples(stats, self.alpha)
        lmp = DetectorId(self.detector) in (DetectorId.LMPU, DetectorId.GLMPU)
        self.kappa_ = KappaPair(self.threshold_ if lmp else 0.0, self.kappa2 if lmp else 0.0)
        self.empirical_pfa_ = float(np.mean(stats > self.threshold_))
        self.n_null_samples_ = stats.size
        self.classes_ = np.array([0, 1])
        return self

    def transform(self, X) -> np.ndarray:
        """Raw statistic (``kappa1 = 0``) as a single feature column."""
        return self._statistic(X)[:, None]

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "threshold_")
        return self._statistic(X) - self.threshold_

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0).astype(int)
