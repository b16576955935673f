"""Response families: canonical-link mean and variance functions."""

from __future__ import annotations

import enum

import numpy as np
from scipy import special

from .errors import DomainError, NonFiniteInput

# Binary means are clamped away from {0, 1} before entering variance
# computations so extreme linear predictors cannot produce a singular
# variance matrix. Numerical guard only; the model is unchanged.
MEAN_CLAMP = 1e-12


class Family(enum.Enum):
    BINARY = "binary"
    POISSON = "poisson"

    @classmethod
    def from_name(cls, name: str) -> "Family":
        try:
            return cls(name.lower())
        except ValueError:
            raise DomainError(f"unknown family {name!r}; use 'binary' or 'poisson'") from None


def mean(family: Family, eta):
    """Inverse canonical link. Accepts scalars or arrays; overflow safe."""
    arr = np.asarray(eta, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput("linear predictor contains non-finite values")
    if family is Family.BINARY:
        out = np.clip(special.expit(arr), MEAN_CLAMP, 1.0 - MEAN_CLAMP)
    else:
        out = np.exp(arr)
    return float(out) if np.isscalar(eta) or arr.ndim == 0 else out


def variance_fn(family: Family, mu):
    """Variance function V(mu): mu(1-mu) for binary, mu for Poisson."""
    arr = np.asarray(mu, dtype=float)
    if family is Family.BINARY:
        if np.any(arr <= 0.0) or np.any(arr >= 1.0):
            raise DomainError("binary mean must lie strictly inside (0, 1)")
        out = arr * (1.0 - arr)
    else:
        if np.any(arr <= 0.0):
            raise DomainError("poisson mean must be positive")
        out = arr
    return float(out) if np.isscalar(mu) or arr.ndim == 0 else out


def mean_derivative(family: Family, eta):
    """d mean / d eta. Equals V(mean(eta)) for canonical links."""
    return variance_fn(family, mean(family, eta))
