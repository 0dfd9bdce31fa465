"""Splitting solvers for ``min f(x) + g(x)``.

All methods work on the split form ``min f(x) + g(y)  s.t.  x = y`` and only
touch the problem through :class:`~altlin.objective.FunctionHandle` values,
gradients and proximal maps.

==================  =====================================================
``adal``            alternating direction augmented Lagrangian
``sadal``           symmetric ADAL (multiplier updated after both steps)
``alm``             alternating linearization, both functions smooth
``alm-s``           ALM with skipping steps, only ``f`` smooth
``alm-s-equiv``     ALM-S that reuses the half-step multiplier
``falm``            accelerated ALM, both functions smooth
``falm-s``          accelerated ALM with skipping steps
``ista``/``fista``  proximal gradient baselines
==================  =====================================================

Every solver returns a :class:`RunTrace` with one :class:`IterateRecord` per
iteration ``k = 1, 2, ...``; ``obj`` is ``F(y^k)`` (``F(x^k)`` for
ISTA/FISTA, whose only iterate is reported as ``y``).
"""

from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from altlin.objective import SplitObjective, inner

__all__ = [
    "Continuation",
    "DivergenceError",
    "IterateRecord",
    "RunTrace",
    "SOLVERS",
    "SolverConfig",
    "SolverMisuse",
    "TkState",
    "continuation_next_mu",
    "corrected_tk",
    "run_adal",
    "run_alm",
    "run_alm_s",
    "run_alm_s_equiv",
    "run_falm",
    "run_falm_s",
    "run_fista",
    "run_ista",
    "run_sadal",
    "solve",
    "tk_schedule",
    "update_tk",
]

DIVERGENCE_LIMIT = 1e300
CSV_HEADER = "iter,obj,infeas,skipped,t_k,elapsed_ms"


class SolverMisuse(ValueError):
    """A solver was applied to a problem that violates its preconditions."""


class DivergenceError(RuntimeError):
    """The objective became non-finite or exceeded 1e300; ``trace`` holds the partial run."""

    def __init__(self, message: str, trace: "RunTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class Continuation:
    """Geometric decrease ``mu_{k+1} = max(mu_bar, eta * mu_k)`` starting from ``mu0``."""

    mu0: float
    mu_bar: float
    eta: float

    def __post_init__(self):
        if not (self.mu0 > 0 and self.mu_bar > 0):
            raise ValueError("continuation mu0 and mu_bar must be positive")
        if not 0 < self.eta < 1:
            raise ValueError(f"continuation eta must lie in (0, 1), got {self.eta}")
        if self.mu_bar > self.mu0:
            raise ValueError("continuation requires mu_bar <= mu0")


def continuation_next_mu(mu_k: float, cont: Continuation) -> float:
    return max(cont.mu_bar, cont.eta * mu_k)


@dataclass(frozen=True)
class SolverConfig:
    """Run parameters shared by all solvers.

    ``mu="auto"`` uses ``1 / max`` of the Lipschitz hints carried by the
    handles.  ``infeas_tol`` stops a splitting method once
    ``||x - y|| < infeas_tol * reference_norm``; ``obj_target`` stops once the
    reported objective is at or below the target.  ``force_skip`` makes the
    skipping methods discard every x-step.
    """

    mu: Union[float, str] = "auto"
    max_iter: int = 1000
    infeas_tol: float = 0.0
    obj_target: Optional[float] = None
    continuation: Optional[Continuation] = None
    store_iterates: bool = False
    force_skip: bool = False

    def __post_init__(self):
        if isinstance(self.mu, str):
            if self.mu != "auto":
                raise ValueError(f"mu must be a positive number or 'auto', got {self.mu!r}")
        elif not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter}")
        if self.infeas_tol < 0:
            raise ValueError(f"infeas_tol must be non-negative, got {self.infeas_tol}")

    def initial_mu(self, obj: SplitObjective) -> float:
        if self.continuation is not None:
            return self.continuation.mu0
        if self.mu != "auto":
            return float(self.mu)
        hints = [h.lipschitz for h in (obj.f, obj.g) if h.lipschitz]
        if not hints:
            raise SolverMisuse("mu='auto' needs a Lipschitz hint on f or g")
        return 1.0 / max(hints)


@dataclass
class IterateRecord:
    k: int
    obj: float
    obj_x: Optional[float]
    infeas: Optional[float]
    skipped: bool
    t_k: Optional[float]
    elapsed: float  # seconds since the start of the run


@dataclass
class RunTrace:
    solver_name: str
    records: list[IterateRecord] = field(default_factory=list)
    final_x: Optional[np.ndarray] = None
    final_y: Optional[np.ndarray] = None
    skip_count: int = 0
    grad_evals: int = 0
    status: str = "running"
    mu_final: float = float("nan")
    xs: list[np.ndarray] = field(default_factory=list)
    ys: list[np.ndarray] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def objs(self) -> np.ndarray:
        return np.array([r.obj for r in self.records])

    @property
    def objs_x(self) -> np.ndarray:
        return np.array([np.nan if r.obj_x is None else r.obj_x for r in self.records])

    @property
    def skipped(self) -> np.ndarray:
        return np.array([r.skipped for r in self.records], dtype=bool)

    def iterations_to(self, target: float) -> Optional[int]:
        """First ``k`` with ``obj <= target``, or ``None``."""
        for r in self.records:
            if r.obj <= target:
                return r.k
        return None

    def to_csv(self, include_elapsed: bool = True) -> str:
        buf = io.StringIO()
        header = CSV_HEADER if include_elapsed else CSV_HEADER.rsplit(",", 1)[0]
        buf.write(header + "\n")
        for r in self.records:
            cells = [
                str(r.k),
                "%.17g" % r.obj,
                "" if r.infeas is None else "%.17g" % r.infeas,
                "1" if r.skipped else "0",
                "" if r.t_k is None else "%.17g" % r.t_k,
            ]
            if include_elapsed:
                cells.append("%.3f" % (1000.0 * r.elapsed))
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()


class _Run:
    """Bookkeeping shared by the solver loops: mu schedule, records, stopping."""

    def __init__(self, name: str, obj: SplitObjective, config: SolverConfig):
        self.obj = obj
        self.config = config
        self.mu = config.initial_mu(obj)
        self.trace = RunTrace(solver_name=name)
        self.ref = obj.reference_norm or 1.0
        self._start = time.perf_counter()

    def value(self, p: np.ndarray) -> float:
        return float(self.obj.f.value(p) + self.obj.g.value(p))

    def record(
        self,
        k: int,
        x: Optional[np.ndarray],
        y: np.ndarray,
        skipped: bool = False,
        t: Optional[float] = None,
    ) -> bool:
        """Append iteration ``k``; return True when a stopping rule fires."""
        trace = self.trace
        obj_y = self.value(y)
        obj_x = None if x is None else self.value(x)
        infeas = None if x is None else float(np.linalg.norm(x - y)) / self.ref
        trace.records.append(
            IterateRecord(k, obj_y, obj_x, infeas, skipped, t, time.perf_counter() - self._start)
        )
        trace.skip_count += int(skipped)
        trace.final_x = y if x is None else x
        trace.final_y = y
        trace.mu_final = self.mu
        if self.config.store_iterates:
            trace.xs.append(trace.final_x.copy())
            trace.ys.append(y.copy())
        for v in (obj_y, obj_x):
            if v is not None and not (np.isfinite(v) and abs(v) <= DIVERGENCE_LIMIT):
                trace.status = "diverged"
                raise DivergenceError(
                    f"{trace.solver_name} diverged at iteration {k} (objective {v})", trace
                )
        if infeas is not None and self.config.infeas_tol > 0 and infeas < self.config.infeas_tol:
            trace.status = "infeasibility"
            return True
        if self.config.obj_target is not None and obj_y <= self.config.obj_target:
            trace.status = "target"
            return True
        return False

    def advance_mu(self) -> None:
        if self.config.continuation is not None:
            self.mu = continuation_next_mu(self.mu, self.config.continuation)

    def finish(self) -> RunTrace:
        if self.trace.status == "running":
            self.trace.status = "max_iter"
        return self.trace


def _start(obj: SplitObjective, x0) -> np.ndarray:
    if x0 is None:
        return obj.zeros()
    x0 = np.array(x0, dtype=np.float64)
    if x0.shape != tuple(obj.shape):
        raise ValueError(f"x0 has shape {x0.shape}, expected {tuple(obj.shape)}")
    return x0


def _require_smooth(obj: SplitObjective, sides: str, solver: str) -> None:
    for side in sides:
        if not obj.side(side).smooth:
            raise SolverMisuse(f"{solver} needs a smooth {side}; use a skipping variant or smoothing")


def _initial_multiplier(obj: SplitObjective, y0: np.ndarray, lambda0) -> np.ndarray:
    """``lambda0`` if given, else ``-gamma_g(y0)``, else zero."""
    if lambda0 is not None:
        lam = np.array(lambda0, dtype=np.float64)
        if lam.shape != y0.shape:
            raise ValueError(f"lambda0 has shape {lam.shape}, expected {y0.shape}")
        return lam
    if obj.g.smooth or obj.g.subgrad is not None:
        return -obj.g.gamma(y0)
    return np.zeros_like(y0)


def _skip_test(obj: SplitObjective, x, v, lam, mu) -> bool:
    """``F(x) > L_mu(x, v; lam)``.

    ``f(x)`` appears on both sides, so it is cancelled before comparing.
    """
    d = x - v
    return obj.g.value(x) - obj.g.value(v) + inner(lam, d) - inner(d, d) / (2.0 * mu) > 0.0


def run_adal(obj: SplitObjective, config: SolverConfig, lambda0=None, x0=None) -> RunTrace:
    """Alternating direction augmented Lagrangian method."""
    run = _Run("adal", obj, config)
    y = _start(obj, x0)
    lam = _initial_multiplier(obj, y, lambda0)
    for k in range(1, config.max_iter + 1):
        mu = run.mu
        x = obj.f.prox(y + mu * lam, mu)
        y = obj.g.prox(x - mu * lam, mu)
        lam = lam - (x - y) / mu
        if run.record(k, x, y):
            break
        run.advance_mu()
    return run.finish()


def run_sadal(obj: SplitObjective, config: SolverConfig, lambda0=None, x0=None) -> RunTrace:
    """Symmetric ADAL: the multiplier is updated after the x-step and after the y-step."""
    run = _Run("sadal", obj, config)
    y = _start(obj, x0)
    lam = _initial_multiplier(obj, y, lambda0)
    for k in range(1, config.max_iter + 1):
        mu = run.mu
        x = obj.f.prox(y + mu * lam, mu)
        lam_half = lam - (x - y) / mu
        y = obj.g.prox(x - mu * lam_half, mu)
        lam = lam_half - (x - y) / mu
        if run.record(k, x, y):
            break
        run.advance_mu()
    return run.finish()


def run_alm(obj: SplitObjective, config: SolverConfig, x0=None) -> RunTrace:
    """Alternating linearization: both f and g must be smooth."""
    _require_smooth(obj, "fg", "alm")
    run = _Run("alm", obj, config)
    y = _start(obj, x0)
    for k in range(1, config.max_iter + 1):
        mu = run.mu
        x = obj.f.prox(y - mu * obj.g.grad(y), mu)
        y = obj.g.prox(x - mu * obj.f.grad(x), mu)
        run.trace.grad_evals += 2
        if run.record(k, x, y):
            break
        run.advance_mu()
    return run.finish()


def run_alm_s(obj: SplitObjective, config: SolverConfig, lambda0=None, x0=None) -> RunTrace:
    """ALM with skipping steps; g may be non-smooth.

    The x-step minimizes the augmented Lagrangian.  When it overshoots
    (``F(x) > L_mu(x, y; lam)``) it is discarded and the iteration becomes an
    ISTA step from ``y``.
    """
    _require_smooth(obj, "f", "alm-s")
    run = _Run("alm-s", obj, config)
    y = _start(obj, x0)
    lam = _initial_multiplier(obj, y, lambda0)
    for k in range(1, config.max_iter + 1):
        mu = run.mu
        x = obj.f.prox(y + mu * lam, mu)
        skipped = config.force_skip or _skip_test(obj, x, y, lam, mu)
        if skipped:
            x = y
        gf = obj.f.grad(x)
        run.trace.grad_evals += 1
        y = obj.g.prox(x - mu * gf, mu)
        lam = gf - (x - y) / mu
        if run.record(k, x, y, skipped):
            break
        run.advance_mu()
    return run.finish()


def run_alm_s_equiv(obj: SplitObjective, config: SolverConfig, lambda0=None, x0=None) -> RunTrace:
    """ALM-S variant that takes a SADAL step on regular iterations.

    Regular iterations recover ``grad f(x)`` from the multiplier instead of
    evaluating it; only skipping iterations call ``f.grad``.
    """
    _require_smooth(obj, "f", "alm-s-equiv")
    run = _Run("alm-s-equiv", obj, config)
    y = _start(obj, x0)
    lam = _initial_multiplier(obj, y, lambda0)
    for k in range(1, config.max_iter + 1):
        mu = run.mu
        x = obj.f.prox(y + mu * lam, mu)
        skipped = config.force_skip or _skip_test(obj, x, y, lam, mu)
        if skipped:
            x = y
            gf = obj.f.grad(x)
            run.trace.grad_evals += 1
            y = obj.g.prox(x - mu * gf, mu)
            lam = gf - (x - y) / mu
        else:
            lam_half = lam - (x - y) / mu
            y = obj.g.prox(x - mu * lam_half, mu)
            lam = lam_half - (x - y) / mu
        if run.record(k, x, y, skipped):
            break
        run.advance_mu()
    return run.finish()


def _next_t(t: float, c: float) -> float:
    return 0.5 * (1.0 + math.sqrt(1.0 + c * t * t))


@dataclass(frozen=True)
class TkState:
    """Momentum scalar for iteration ``k``.

    ``t`` is the tentative ``t_k`` computed at the end of iteration ``k-1``;
    ``t_prev`` and ``prev_step_kind`` describe iteration ``k-1``
    (``"none"`` before the first iteration).
    """

    t: float = 1.0
    prev_step_kind: str = "none"
    t_prev: Optional[float] = None

    def __post_init__(self):
        if not self.t >= 1.0:
            raise ValueError(f"t must be >= 1, got {self.t}")
        if self.prev_step_kind not in ("none", "regular", "skip"):
            raise ValueError(f"unknown step kind {self.prev_step_kind!r}")
        if self.prev_step_kind != "none" and self.t_prev is None:
            raise ValueError("t_prev is required after the first iteration")


def corrected_tk(state: TkState) -> float:
    """``t_k`` recomputed from ``t_{k-1}`` once iteration ``k`` turns out to skip.

    Factor 8 after a regular step, 4 after a skipping step; the first
    iteration keeps ``t_1 = 1``.
    """
    if state.prev_step_kind == "none":
        return state.t
    c = 8.0 if state.prev_step_kind == "regular" else 4.0
    return _next_t(state.t_prev, c)


_EVENTS = {
    "regular": ("regular", None),
    "skip": ("skip", None),
    "skip_after_regular": ("skip", "regular"),
    "skip_after_skip": ("skip", "skip"),
}


def update_tk(state: TkState, event: str) -> TkState:
    """Close iteration ``k`` of kind ``event`` and return the state for ``k+1``.

    A skip first applies :func:`corrected_tk`.  The next value is
    ``(1 + sqrt(1 + 4 t_k^2)) / 2`` after a regular step and
    ``(1 + sqrt(1 + 2 t_k^2)) / 2`` after a skip.  The events
    ``skip_after_regular``/``skip_after_skip`` are checked against
    ``state.prev_step_kind`` (a first-iteration state matches either).
    """
    try:
        kind, expected_prev = _EVENTS[event]
    except KeyError:
        raise ValueError(f"unknown t_k event {event!r}") from None
    if expected_prev is not None and state.prev_step_kind not in ("none", expected_prev):
        raise ValueError(f"event {event!r} but previous step was {state.prev_step_kind!r}")
    if kind == "regular":
        t_k = state.t
        c = 4.0
    else:
        t_k = corrected_tk(state)
        c = 2.0
    return TkState(t=_next_t(t_k, c), prev_step_kind=kind, t_prev=t_k)


def tk_schedule(kinds) -> list[float]:
    """Final ``t_1, t_2, ...`` produced by FALM-S for a sequence of step kinds."""
    state = TkState()
    out = []
    for kind in kinds:
        out.append(state.t if kind == "regular" else corrected_tk(state))
        state = update_tk(state, kind)
    return out


def run_falm(obj: SplitObjective, config: SolverConfig, x0=None) -> RunTrace:
    """Accelerated alternating linearization: both f and g must be smooth."""
    _require_smooth(obj, "fg", "falm")
    run = _Run("falm", obj, config)
    z = _start(obj, x0)
    y_prev = z.copy()
    t = 1.0
    for k in range(1, config.max_iter + 1):
        mu = run.mu
        x = obj.f.prox(z - mu * obj.g.grad(z), mu)
        y = obj.g.prox(x - mu * obj.f.grad(x), mu)
        run.trace.grad_evals += 2
        if run.record(k, x, y, t=t):
            break
        t_next = _next_t(t, 4.0)
        z = y + ((t - 1.0) / t_next) * (y - y_prev)
        y_prev, t = y, t_next
        run.advance_mu()
    return run.finish()


def run_falm_s(obj: SplitObjective, config: SolverConfig, lambda0=None, x0=None) -> RunTrace:
    """Accelerated ALM with skipping steps; g may be non-smooth.

    On a skip at iteration ``k`` the already computed ``t_k`` is corrected
    from ``t_{k-1}`` and the extrapolated point ``z^k`` rebuilt with it before
    ``x^k := z^k``.  The multiplier is ``-gamma_g(z)`` for the handle's
    gradient or designated subgradient.
    """
    _require_smooth(obj, "f", "falm-s")
    if not (obj.g.smooth or obj.g.subgrad is not None):
        raise SolverMisuse("falm-s needs a gradient or subgradient selection for g")
    run = _Run("falm-s", obj, config)
    z = _start(obj, x0)
    y_prev = z.copy()  # y^{k-1}
    y_prev2 = z.copy()  # y^{k-2}
    lam = _initial_multiplier(obj, z, lambda0)
    state = TkState()
    for k in range(1, config.max_iter + 1):
        mu = run.mu
        x = obj.f.prox(z + mu * lam, mu)
        skipped = config.force_skip or _skip_test(obj, x, z, lam, mu)
        if skipped:
            t = corrected_tk(state)
            if state.prev_step_kind != "none":
                z = y_prev + ((state.t_prev - 1.0) / t) * (y_prev - y_prev2)
            x = z
        else:
            t = state.t
        y = obj.g.prox(x - mu * obj.f.grad(x), mu)
        run.trace.grad_evals += 2
        if run.record(k, x, y, skipped, t=t):
            break
        state = update_tk(state, "skip" if skipped else "regular")
        z = y + ((t - 1.0) / state.t) * (y - y_prev)
        lam = -obj.g.gamma(z)
        y_prev2, y_prev = y_prev, y
        run.advance_mu()
    return run.finish()


def run_ista(obj: SplitObjective, config: SolverConfig, x0=None) -> RunTrace:
    """Proximal gradient: linearize f, keep g."""
    _require_smooth(obj, "f", "ista")
    run = _Run("ista", obj, config)
    x = _start(obj, x0)
    for k in range(1, config.max_iter + 1):
        mu = run.mu
        x = obj.g.prox(x - mu * obj.f.grad(x), mu)
        run.trace.grad_evals += 1
        if run.record(k, None, x):
            break
        run.advance_mu()
    return run.finish()


def run_fista(obj: SplitObjective, config: SolverConfig, x0=None) -> RunTrace:
    """Accelerated proximal gradient with ``t_1 = 1`` and ``y^1 = x^0``."""
    _require_smooth(obj, "f", "fista")
    run = _Run("fista", obj, config)
    x_prev = _start(obj, x0)
    v = x_prev.copy()
    t = 1.0
    for k in range(1, config.max_iter + 1):
        mu = run.mu
        x = obj.g.prox(v - mu * obj.f.grad(v), mu)
        run.trace.grad_evals += 1
        if run.record(k, None, x, t=t):
            break
        t_next = _next_t(t, 4.0)
        v = x + ((t - 1.0) / t_next) * (x - x_prev)
        x_prev, t = x, t_next
        run.advance_mu()
    return run.finish()


SOLVERS: dict[str, Callable[..., RunTrace]] = {
    "adal": run_adal,
    "sadal": run_sadal,
    "alm": run_alm,
    "alm-s": run_alm_s,
    "alm-s-equiv": run_alm_s_equiv,
    "falm": run_falm,
    "falm-s": run_falm_s,
    "ista": run_ista,
    "fista": run_fista,
}

_USES_MULTIPLIER = {"adal", "sadal", "alm-s", "alm-s-equiv", "falm-s"}


def solve(name: str, obj: SplitObjective, config: SolverConfig, x0=None, lambda0=None) -> RunTrace:
    """Run solver ``name`` from :data:`SOLVERS`."""
    try:
        fn = SOLVERS[name]
    except KeyError:
        raise ValueError(f"unknown solver {name!r}; choose from {sorted(SOLVERS)}") from None
    if name in _USES_MULTIPLIER:
        return fn(obj, config, lambda0=lambda0, x0=x0)
    if lambda0 is not None:
        raise SolverMisuse(f"{name} has no multiplier; lambda0 is not accepted")
    return fn(obj, config, x0=x0)
