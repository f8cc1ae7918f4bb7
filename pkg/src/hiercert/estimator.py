"""Scikit-learn style front end.

``HierarchicalCertifier`` holds the run parameters the way an estimator
holds hyperparameters, so it composes with ``sklearn.base.clone``,
``get_params``/``set_params`` and parameter-grid tooling; the threshold
grid search in the CLI drives it exactly that way.  There is nothing to
fit: certification consumes a sample source and returns the per-component
verdicts, so the estimator exposes ``certify`` as its predict-like method.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator

from .certify import CertificationConfig, CertifiedSegmentation, run_certification
from .hierarchy import HierarchyGraph
from .sampler import SampleSource


class HierarchicalCertifier(BaseEstimator):
    """Configured certification run.

    Parameters mirror :class:`~hiercert.certify.CertificationConfig`;
    see there for semantics and valid ranges.
    """

    def __init__(self, sigma: float = 0.25, tau: float = 0.75,
                 alpha: float = 0.001, n: int = 100, n0: int = 10,
                 thresholds: tuple = (), mode: str = "adaptive",
                 level: int = 0, level_rule: str = "finest",
                 topclass_source: str = "counts"):
        self.sigma = sigma
        self.tau = tau
        self.alpha = alpha
        self.n = n
        self.n0 = n0
        self.thresholds = thresholds
        self.mode = mode
        self.level = level
        self.level_rule = level_rule
        self.topclass_source = topclass_source

    def config(self) -> CertificationConfig:
        return CertificationConfig(
            sigma=self.sigma, tau=self.tau, alpha=self.alpha, n=self.n,
            n0=self.n0, thresholds=tuple(self.thresholds), mode=self.mode,
            level=self.level, level_rule=self.level_rule,
            topclass_source=self.topclass_source)

    def certify(self, source: SampleSource,
                hierarchy: HierarchyGraph) -> CertifiedSegmentation:
        """Run the configured pipeline on a sample source."""
        return run_certification(source, hierarchy, self.config())

    # predict-style alias so the class slots into generic tooling
    predict = certify
