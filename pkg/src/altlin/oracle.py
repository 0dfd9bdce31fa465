"""Independent reference computations for tests and bound checks.

Nothing here imports the solver loops, so results can be used to judge them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from altlin.objective import SplitObjective

__all__ = [
    "BoundReport",
    "OracleResult",
    "bound_rhs",
    "check_bound",
    "finite_diff_grad",
    "reference_optimum",
    "scalar_prox_bruteforce",
]

BOUND_SLACK = 1e-9
ALPHA = math.sqrt(2.0) - 1.0


@dataclass(frozen=True)
class OracleResult:
    f_star: float
    x_star: np.ndarray
    certificate: float
    iterations_used: int
    certified: bool


def reference_optimum(obj: SplitObjective, tol: float = 1e-12, max_iter: int = 10**6) -> OracleResult:
    """High-accuracy minimizer of ``f + g`` by FISTA with adaptive restart.

    Step ``1/L(f)``.  Momentum restarts whenever it opposes the latest
    prox-gradient step.  Stops once the fixed-point residual
    ``||x - prox_g(x - grad f(x) / L)||`` is at most ``tol``.  The returned
    iterate is the one with the smallest residual seen; when the cap is hit
    the result is flagged ``certified=False``.
    """
    f, g = obj.f, obj.g
    if not f.smooth:
        raise ValueError("reference_optimum needs a smooth f")
    if not f.lipschitz:
        raise ValueError("reference_optimum needs a Lipschitz constant for f")
    mu = 1.0 / f.lipschitz

    def F(p):
        return f.value(p) + g.value(p)

    x = obj.zeros()
    v = x.copy()
    t = 1.0
    best_x, best_res = x, math.inf
    it = 0
    for it in range(1, max_iter + 1):
        x_new = g.prox(v - mu * f.grad(v), mu)
        if np.vdot(v - x_new, x_new - x) > 0:
            # momentum points uphill: restart (gradient test, robust near the optimum)
            t = 1.0
        res = float(np.linalg.norm(x_new - g.prox(x_new - mu * f.grad(x_new), mu)))
        if res <= best_res:
            best_x, best_res = x_new, res
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        v = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, t = x_new, t_new
        if res <= tol:
            break
    best_f = F(best_x)
    cert = best_res
    return OracleResult(
        f_star=float(best_f),
        x_star=best_x,
        certificate=cert,
        iterations_used=it,
        certified=cert <= tol,
    )


def finite_diff_grad(fn: Callable[[np.ndarray], float], x, h: float = 1e-6) -> np.ndarray:
    """Central differences ``(fn(x + h e_i) - fn(x - h e_i)) / 2h`` per coordinate."""
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    x = np.array(x, dtype=np.float64)
    out = np.empty_like(x)
    flat_x = x.reshape(-1)
    flat_out = out.reshape(-1)
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + h
        up = fn(x)
        flat_x[i] = orig - h
        down = fn(x)
        flat_x[i] = orig
        flat_out[i] = (up - down) / (2.0 * h)
    return out


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def scalar_prox_bruteforce(
    phi: Callable[[float], float], z: float, tau: float, width: float = 1e-10
) -> float:
    """Golden-section minimization of ``tau*phi(x) + (x - z)**2 / 2``.

    The bracket around ``z`` doubles until both ends exceed the value at
    ``z``; ``ValueError`` if that never happens.  Points are compared through
    ``tau*(phi(c) - phi(d))`` plus the factored quadratic difference, so the
    result is as accurate as the differences of ``phi`` (exact for ``|x|``).
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")

    def h(x):
        return tau * phi(x) + 0.5 * (x - z) ** 2

    hz = h(z)
    w = 1.0 + abs(z) + tau
    for _ in range(80):
        if h(z - w) > hz and h(z + w) > hz:
            break
        w *= 2.0
    else:
        raise ValueError("could not bracket the minimizer")

    def c_below_d(c, pc, d, pd):
        # h(c) <= h(d), with the quadratic difference factored to avoid cancellation
        return tau * (pc - pd) + 0.5 * (c - d) * ((c - z) + (d - z)) <= 0.0

    a, b = z - w, z + w
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    pc, pd = phi(c), phi(d)
    while b - a > width:
        if c_below_d(c, pc, d, pd):
            b, d, pd = d, c, pc
            c = b - _INVPHI * (b - a)
            pc = phi(c)
        else:
            a, c, pc = c, d, pd
            d = a + _INVPHI * (b - a)
            pd = phi(d)
    return 0.5 * (a + b)


@dataclass(frozen=True)
class BoundReport:
    passed: bool
    checked: int
    first_violation: Optional[int] = None
    lhs: Optional[float] = None
    rhs: Optional[float] = None

    def __str__(self) -> str:
        if self.passed:
            return f"bound holds at all {self.checked} iterations"
        return f"violation at k={self.first_violation}: {self.lhs!r} > {self.rhs!r}"


def bound_rhs(kind: str, k: int, mu: float, dist0_sq: float, skipped_prefix=None) -> float:
    """Right-hand side of the iteration-complexity bound of ``kind`` at iteration ``k``.

    ``skipped_prefix`` holds the skip flags of iterations ``1..k`` and is
    needed for ``alm_s`` and ``falm_s``.
    """
    if kind == "alm":
        return dist0_sq / (4.0 * mu * k)
    if kind == "falm":
        return dist0_sq / (mu * (k + 1) ** 2)
    if kind == "ista":
        return dist0_sq / (2.0 * mu * k)
    if kind == "fista":
        return 2.0 * dist0_sq / (mu * (k + 1) ** 2)
    if kind in ("alm_s", "falm_s"):
        if skipped_prefix is None or len(skipped_prefix) < k:
            raise ValueError(f"bound {kind!r} needs the skip pattern of the first {k} iterations")
        regular = int(k - np.count_nonzero(skipped_prefix[:k]))
        if kind == "alm_s":
            return dist0_sq / (2.0 * mu * (k + regular))
        r_hat = regular + (0 if skipped_prefix[0] else 1)
        return 2.0 * dist0_sq / (mu * (k + 1 + ALPHA * r_hat) ** 2)
    raise ValueError(f"unknown bound kind {kind!r}")


def check_bound(
    trace,
    kind: str,
    mu: float,
    dist0_sq: float,
    f_star: float,
    slack: float = BOUND_SLACK,
) -> BoundReport:
    """Check ``F(y^k) - F* <= RHS(k) + slack`` along a trace."""
    records = trace.records
    if not records:
        raise ValueError("empty trace")
    skipped = np.array([r.skipped for r in records], dtype=bool)
    for r in records:
        if r.obj is None:
            raise ValueError(f"trace record {r.k} has no objective")
        lhs = r.obj - f_star
        rhs = bound_rhs(kind, r.k, mu, dist0_sq, skipped)
        if lhs > rhs + slack:
            return BoundReport(False, r.k, r.k, float(lhs), float(rhs))
    return BoundReport(True, len(records))
