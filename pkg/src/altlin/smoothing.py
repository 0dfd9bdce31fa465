"""Nesterov smoothing of the l1 norm, the masked l1 norm and the nuclear norm.

Each smoothed function replaces a norm ``max_{z in C} <x, z>`` by
``max_{z in C} <x, z> - (sigma/2)||z||^2``.  The maximizer is the gradient,
which is ``1/sigma``-Lipschitz, and the approximation error is bounded by
``sigma * D`` where ``D = max_{z in C} ||z||^2 / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from altlin.linalg import IndexMask, project_mask, svd

__all__ = [
    "DEFAULT_SIGMA",
    "SmoothedL1",
    "SmoothedMaskedL1",
    "SmoothedNuclear",
    "sigma_for_epsilon",
]

DEFAULT_SIGMA = 1e-6


def _check_positive(**params) -> None:
    for name, value in params.items():
        if not value > 0:
            raise ValueError(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class SmoothedL1:
    """Smoothed ``rho * ||x||_1`` (a Huber function per entry)."""

    rho: float
    sigma: float = DEFAULT_SIGMA

    def __post_init__(self):
        _check_positive(rho=self.rho, sigma=self.sigma)

    @property
    def lipschitz(self) -> float:
        return 1.0 / self.sigma

    def bound_constant(self, size: int) -> float:
        """``D_g = size * rho**2 / 2``; the sandwich gap is at most ``sigma * D_g``."""
        return 0.5 * size * self.rho**2

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return np.clip(x / self.sigma, -self.rho, self.rho)

    def value(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        z = self.grad(x)
        return float(np.vdot(x, z) - 0.5 * self.sigma * np.vdot(z, z))

    def prox(self, z, tau: float) -> np.ndarray:
        """Minimizer of ``tau * value(x) + ||x - z||^2 / 2``."""
        _check_positive(tau=tau)
        z = np.asarray(z, dtype=np.float64)
        return z - tau * np.clip(z / (tau + self.sigma), -self.rho, self.rho)


@dataclass(frozen=True)
class SmoothedMaskedL1:
    """Smoothed ``rho * ||P_mask(Y)||_1``; entries outside the mask are free."""

    rho: float
    sigma: float
    mask: IndexMask

    def __post_init__(self):
        _check_positive(rho=self.rho, sigma=self.sigma)

    @property
    def lipschitz(self) -> float:
        return 1.0 / self.sigma

    def bound_constant(self) -> float:
        return 0.5 * len(self.mask) * self.rho**2

    def grad(self, y) -> np.ndarray:
        py = project_mask(y, self.mask)
        return np.clip(py / self.sigma, -self.rho, self.rho)

    def value(self, y) -> float:
        py = project_mask(y, self.mask)
        z = np.clip(py / self.sigma, -self.rho, self.rho)
        return float(np.vdot(py, z) - 0.5 * self.sigma * np.vdot(z, z))

    def prox(self, b, tau: float) -> np.ndarray:
        """Smoothed shrinkage on the mask, identity elsewhere."""
        _check_positive(tau=tau)
        b = np.asarray(b, dtype=np.float64)
        shrink = tau * np.clip(b / (tau + self.sigma), -self.rho, self.rho)
        return b - np.where(self.mask.bool, shrink, 0.0)


@dataclass(frozen=True)
class SmoothedNuclear:
    """Smoothed nuclear norm: a Huber function of each singular value."""

    sigma: float = DEFAULT_SIGMA

    def __post_init__(self):
        _check_positive(sigma=self.sigma)

    @property
    def lipschitz(self) -> float:
        return 1.0 / self.sigma

    @staticmethod
    def bound_constant(shape: tuple[int, int]) -> float:
        return 0.5 * min(shape)

    def grad(self, x) -> np.ndarray:
        """``U diag(min(gamma, 1)) V^T`` where ``U diag(gamma) V^T = svd(X / sigma)``."""
        f = svd(np.asarray(x, dtype=np.float64) / self.sigma)
        return (f.u * np.minimum(f.s, 1.0)) @ f.v.T

    def value(self, x) -> float:
        gamma = np.linalg.svd(np.asarray(x, dtype=np.float64) / self.sigma, compute_uv=False)
        s = self.sigma
        return float(np.sum(np.where(gamma < 1.0, 0.5 * s * gamma**2, s * gamma - 0.5 * s)))

    def prox(self, z, tau: float) -> np.ndarray:
        """``U diag(gamma - tau*gamma / max(gamma, tau + sigma)) V^T`` for ``svd(z)``."""
        _check_positive(tau=tau)
        f = svd(z)
        gamma = f.s
        denom = np.maximum(gamma, tau + self.sigma)
        return (f.u * (gamma - tau * gamma / denom)) @ f.v.T


def sigma_for_epsilon(
    problem_kind: str,
    epsilon: float,
    rho: float,
    n: int,
    m: int | None = None,
) -> float:
    """Smoothing level at which an ``epsilon/2``-optimal smoothed solution is
    ``epsilon``-optimal for the original problem.

    ``"l1-deblur"``: ``epsilon / (n rho^2)`` for an ``n``-vector.
    ``"rpca"``: ``epsilon / (2 max(min(m, n), m n rho^2))`` for ``m x n`` matrices.
    """
    _check_positive(epsilon=epsilon, rho=rho, n=n)
    if problem_kind == "l1-deblur":
        return epsilon / (n * rho**2)
    if problem_kind == "rpca":
        if m is None:
            raise ValueError("rpca calibration needs both m and n")
        _check_positive(m=m)
        return epsilon / (2.0 * max(min(m, n), m * n * rho**2))
    raise ValueError(f"unknown problem kind {problem_kind!r}")
