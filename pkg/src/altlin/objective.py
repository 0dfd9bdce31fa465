"""Function handles, model functions and the augmented Lagrangian.

Points are numpy arrays of any fixed shape (vectors for lasso-type problems,
matrices for RPCA).  Inner products are taken over the flattened arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "FunctionHandle",
    "SplitObjective",
    "eval_F",
    "eval_Q",
    "eval_aug_lagrangian",
    "inner",
    "prox_step",
]

Point = np.ndarray


def inner(a: Point, b: Point) -> float:
    return float(np.vdot(a, b))


@dataclass(frozen=True)
class FunctionHandle:
    """A convex function with a cheap proximal map.

    ``grad`` is set exactly when the function is smooth.  Non-smooth
    functions may provide ``subgrad``, a fixed selection from the
    subdifferential, for the methods that need one.
    """

    value: Callable[[Point], float]
    prox: Callable[[Point, float], Point]
    grad: Optional[Callable[[Point], Point]] = None
    subgrad: Optional[Callable[[Point], Point]] = None
    lipschitz: Optional[float] = None
    name: str = ""

    @property
    def smooth(self) -> bool:
        return self.grad is not None

    def gamma(self, x: Point) -> Point:
        """Gradient if smooth, otherwise the designated subgradient."""
        if self.grad is not None:
            return self.grad(x)
        if self.subgrad is not None:
            return self.subgrad(x)
        raise ValueError(f"function {self.name or '<anonymous>'} has no gradient or subgradient")


@dataclass(frozen=True)
class SplitObjective:
    """``F = f + g`` over points of a common ``shape``.

    ``reference_norm`` scales the infeasibility ``||x - y||`` reported by the
    splitting solvers; ``None`` means absolute infeasibility.
    """

    f: FunctionHandle
    g: FunctionHandle
    shape: tuple[int, ...]
    reference_norm: Optional[float] = None

    def side(self, which: str) -> FunctionHandle:
        if which == "f":
            return self.f
        if which == "g":
            return self.g
        raise ValueError(f"side must be 'f' or 'g', got {which!r}")

    def zeros(self) -> Point:
        return np.zeros(self.shape)


def _other(which: str) -> str:
    return "g" if which == "f" else "f"


def eval_F(obj: SplitObjective, x: Point) -> float:
    value = obj.f.value(x) + obj.g.value(x)
    if not np.isfinite(value):
        raise ValueError("objective is not finite at x")
    return float(value)


def eval_Q(obj: SplitObjective, linearized: str, u: Point, v: Point, mu: float) -> float:
    """Model where ``linearized`` is replaced by its linearization at ``v``
    plus ``||u - v||^2 / (2 mu)`` and the other function is kept exact at ``u``.

    ``mu = inf`` drops the proximal term.
    """
    lin = obj.side(linearized)
    kept = obj.side(_other(linearized))
    d = u - v
    value = kept.value(u) + lin.value(v) + inner(lin.gamma(v), d)
    if np.isfinite(mu):
        value += inner(d, d) / (2.0 * mu)
    return float(value)


def eval_aug_lagrangian(
    obj: SplitObjective, x: Point, y: Point, lam: Point, mu: float
) -> float:
    """``f(x) + g(y) - <lam, x - y> + ||x - y||^2 / (2 mu)``."""
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    d = x - y
    return float(obj.f.value(x) + obj.g.value(y) - inner(lam, d) + inner(d, d) / (2.0 * mu))


def prox_step(
    obj: SplitObjective,
    keep: str,
    v: Point,
    mu: float,
    subgrad_override: Optional[Point] = None,
) -> Point:
    """Minimizer over ``u`` of the model that keeps ``keep`` and linearizes the other side.

    Equals ``prox_{mu*keep}(v - mu * gamma_other(v))``.
    """
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    kept = obj.side(keep)
    if subgrad_override is None:
        gamma = obj.side(_other(keep)).gamma(v)
    else:
        gamma = subgrad_override
    return kept.prox(v - mu * gamma, mu)
