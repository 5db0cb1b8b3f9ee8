"""Stochastic random search driven by the sign of paired value differences.

The update ``x <- x - eta * sign(M+ - M-) * s`` only needs the two trial
values to be ordered correctly, so a shared minibatch, a variance-reduced
estimate or an inexact helper function can stand in for exact values.
"""

from .directions import DirectionDistribution, DirectionKind, estimate_mu, fallback_mu
from .estimators import (EstimatePair, ExactEstimator, HelperEstimator, HelperSpec, MinibatchEstimator,
                         VrSymmetricEstimator, VrTwoSnapshotEstimator, make_estimator, translation_gap)
from .objectives import (LogisticObjective, QuadraticObjective, TheoryConstants, estimate_constants,
                         make_logistic, make_quadratic)
from .search import NumericalAbort, Plan, plan_parameters, run, sign, srs_step

__version__ = "0.1.0"
