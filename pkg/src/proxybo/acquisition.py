"""Expected Improvement under a Gaussian predictive distribution."""
from __future__ import annotations

import numpy as np
from scipy.special import erfcx, ndtr

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def incumbent(y) -> float:
    """Best (lowest) observed objective."""
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise ValueError("no observations")
    return float(np.min(y))


def expected_improvement(mean, variance, y_best):
    """Expected improvement below ``y_best`` for minimisation.

    With ``sigma = sqrt(variance)`` and ``z = (y_best - mean) / sigma``,
    ``EI = sigma * (z * Phi(z) + phi(z))``. Zero variance reduces to
    ``max(y_best - mean, 0)``. Accepts scalars or arrays; NaN input raises.
    """
    mean = np.asarray(mean, dtype=np.float64)
    variance = np.asarray(variance, dtype=np.float64)
    y_best = np.asarray(y_best, dtype=np.float64)
    if np.isnan(mean).any() or np.isnan(variance).any() or np.isnan(y_best).any():
        raise ValueError("expected_improvement got NaN input")
    if (variance < 0).any():
        raise ValueError("variance must be non-negative")
    sigma = np.sqrt(variance)
    gap = y_best - mean
    positive = sigma > 0
    safe_sigma = np.where(positive, sigma, 1.0)
    z = gap / safe_sigma
    ei = safe_sigma * _standard_ei(z)
    ei = np.where(positive, np.maximum(ei, 0.0), np.maximum(gap, 0.0))
    return float(ei) if ei.ndim == 0 else ei


def _standard_ei(z):
    """``z * Phi(z) + phi(z)``; the left tail uses erfcx to avoid cancellation."""
    z = np.asarray(z, dtype=np.float64)
    upper = z * ndtr(z) + _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    zn = np.minimum(z, 0.0)
    lower = np.exp(-0.5 * zn * zn) * (_INV_SQRT_2PI + 0.5 * zn * erfcx(-zn / np.sqrt(2.0)))
    return np.where(z < 0, lower, upper)
