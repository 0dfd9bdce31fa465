"""Problem instances: lasso, wavelet deblurring, robust PCA and matrix completion.

Each family is turned into a :class:`~altlin.objective.SplitObjective` for
the generic solvers.  Robust PCA ``min ||X||_* + rho ||Y||_1  s.t.  X + Y = M``
is posed over ``X`` alone with ``Y = M - X``, so the solver's ``y`` iterate is
``M - Y`` and its infeasibility ``||x - y||`` is ``||X + Y - M||``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from altlin import solvers
from altlin.linalg import (
    IndexMask,
    NumericFailure,
    as_matrix,
    as_vector,
    haar_2d,
    matrix_shrink,
    nuclear_norm,
    project_mask,
    svd,
    uniform_blur_apply,
    vector_shrink,
)
from altlin.objective import FunctionHandle, SplitObjective
from altlin.rng import SplitMix64
from altlin.smoothing import DEFAULT_SIGMA, SmoothedL1, SmoothedMaskedL1, SmoothedNuclear

__all__ = [
    "CompletionInstance",
    "CompletionSpec",
    "DeblurInstance",
    "LassoInstance",
    "RelativeErrors",
    "RpcaInstance",
    "deblur_handles",
    "generate_completion",
    "l1_handle",
    "lasso_handles",
    "random_lasso",
    "relative_errors",
    "rpca_continuation",
    "rpca_handles",
    "rpca_x_subproblem",
    "rpca_y_subproblem",
    "solve_rpca",
    "synthetic_deblur",
]


def l1_handle(rho: float, sigma: Optional[float] = None) -> FunctionHandle:
    """``rho * ||x||_1``, or its smoothed version when ``sigma`` is given.

    The exact norm carries the minimal-norm subgradient ``rho * sign(x)``.
    """
    if sigma is not None:
        h = SmoothedL1(rho, sigma)
        return FunctionHandle(
            value=h.value, prox=h.prox, grad=h.grad, lipschitz=h.lipschitz, name="smoothed-l1"
        )
    return FunctionHandle(
        value=lambda x: rho * float(np.sum(np.abs(x))),
        prox=lambda z, tau: vector_shrink(z, tau * rho),
        subgrad=lambda x: rho * np.sign(x),
        name="l1",
    )


@dataclass(frozen=True)
class LassoInstance:
    A: np.ndarray
    b: np.ndarray
    rho: float
    lipschitz: float = field(init=False)

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        b = as_vector(self.b, "b")
        if A.shape[0] != b.size:
            raise ValueError(f"A has {A.shape[0]} rows but b has length {b.size}")
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "lipschitz", float(np.linalg.eigvalsh(A.T @ A)[-1]))


def random_lasso(m: int, n: int, rho: float, seed: int, sparsity: float = 0.1) -> LassoInstance:
    """Gaussian ``A`` (entries N(0, 1/m)), sparse ground truth, noisy ``b``."""
    rng = SplitMix64(seed)
    A = rng.normal(m * n).reshape(m, n) / np.sqrt(m)
    x_true = np.zeros(n)
    support = rng.choice(n, max(1, int(round(sparsity * n))))
    x_true[support] = rng.normal(support.size)
    b = A @ x_true + 0.01 * rng.normal(m)
    return LassoInstance(A, b, rho)


def lasso_handles(inst: LassoInstance, sigma: Optional[float] = None) -> SplitObjective:
    """``f = ||Ax - b||^2 / 2`` and ``g = rho ||x||_1`` (smoothed if ``sigma``).

    ``prox_f`` solves ``(I + tau A^T A) x = z + tau A^T b`` with a Cholesky
    factorization cached per ``tau``.
    """
    A, b = inst.A, inst.b
    AtA = A.T @ A
    Atb = A.T @ b
    n = A.shape[1]

    @lru_cache(maxsize=8)
    def factor(tau: float):
        return scipy.linalg.cho_factor(np.eye(n) + tau * AtA)

    def value(x):
        r = A @ x - b
        return 0.5 * float(r @ r)

    f = FunctionHandle(
        value=value,
        grad=lambda x: AtA @ x - Atb,
        prox=lambda z, tau: scipy.linalg.cho_solve(factor(float(tau)), z + tau * Atb),
        lipschitz=inst.lipschitz,
        name="least-squares",
    )
    return SplitObjective(f=f, g=l1_handle(inst.rho, sigma), shape=(n,))


@dataclass(frozen=True)
class DeblurInstance:
    """Recover Haar coefficients ``x`` of an image from ``b = blur(W x) + noise``.

    ``W`` is the inverse orthonormal Haar transform, so ``A = blur o W`` has
    operator norm at most one.
    """

    b: np.ndarray
    kernel_size: int
    levels: int
    rho: float

    def __post_init__(self):
        b = as_matrix(self.b, "b")
        step = 2**self.levels
        if b.shape[0] % step or b.shape[1] % step:
            raise ValueError(f"image shape {b.shape} is not divisible by 2**{self.levels}")
        if self.kernel_size % 2 == 0 or not 1 <= self.kernel_size <= min(b.shape):
            raise ValueError(f"invalid kernel_size {self.kernel_size}")
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        object.__setattr__(self, "b", b)

    @property
    def shape(self) -> tuple[int, int]:
        return self.b.shape

    def apply(self, x: np.ndarray) -> np.ndarray:
        return uniform_blur_apply(haar_2d(x, self.levels, "inverse"), self.kernel_size)

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        return haar_2d(uniform_blur_apply(y, self.kernel_size, adjoint=True), self.levels, "forward")


def synthetic_deblur(
    size: int = 32,
    kernel_size: int = 5,
    levels: int = 3,
    rho: float = 1e-3,
    noise: float = 1e-3,
    seed: int = 0,
) -> tuple[DeblurInstance, np.ndarray]:
    """Blurred, noisy piecewise-constant test image; returns the instance and the clean image."""
    rng = SplitMix64(seed)
    img = np.zeros((size, size))
    img[size // 8 : size // 2, size // 8 : size // 2] = 1.0
    img[size // 2 : 7 * size // 8, size // 4 : 3 * size // 4] = 0.5
    ii, jj = np.mgrid[:size, :size]
    img[(ii - 0.7 * size) ** 2 + (jj - 0.25 * size) ** 2 < (size / 8) ** 2] = 0.8
    b = uniform_blur_apply(img, kernel_size) + noise * rng.normal(size * size).reshape(size, size)
    return DeblurInstance(b, kernel_size, levels, rho), img


def deblur_handles(
    inst: DeblurInstance, sigma: Optional[float] = None, cg_tol: float = 1e-10
) -> SplitObjective:
    """``f = ||A x - b||^2 / 2`` in operator form, ``g = rho ||x||_1`` (smoothed if ``sigma``).

    ``prox_f`` runs conjugate gradients on ``(I + tau A^T A) x = z + tau A^T b``.
    """
    shape = inst.shape
    size = shape[0] * shape[1]
    Atb = inst.adjoint(inst.b)

    def value(x):
        r = inst.apply(x) - inst.b
        return 0.5 * float(np.vdot(r, r))

    def grad(x):
        return inst.adjoint(inst.apply(x) - inst.b)

    def prox(z, tau):
        def matvec(v):
            v = v.reshape(shape)
            return (v + tau * inst.adjoint(inst.apply(v))).ravel()

        op = scipy.sparse.linalg.LinearOperator((size, size), matvec=matvec, dtype=np.float64)
        rhs = (z + tau * Atb).ravel()
        sol, info = scipy.sparse.linalg.cg(op, rhs, x0=z.ravel(), rtol=cg_tol, atol=0.0, maxiter=10 * size)
        if info != 0:
            raise NumericFailure(f"conjugate gradients did not converge (info={info})")
        return sol.reshape(shape)

    f = FunctionHandle(value=value, grad=grad, prox=prox, lipschitz=1.0, name="deblur-data")
    return SplitObjective(f=f, g=l1_handle(inst.rho, sigma), shape=shape)


@dataclass(frozen=True)
class RpcaInstance:
    """Robust PCA data; with a mask, ``M`` must already be zero off the mask."""

    M: np.ndarray
    rho: float
    sigma: float = DEFAULT_SIGMA
    mask: Optional[IndexMask] = None

    def __post_init__(self):
        M = as_matrix(self.M, "M")
        if not (self.rho > 0 and self.sigma > 0):
            raise ValueError("rho and sigma must be positive")
        if self.mask is not None:
            if self.mask.shape != M.shape:
                raise ValueError(f"mask shape {self.mask.shape} does not match M {M.shape}")
            if np.any(M[~self.mask.bool] != 0.0):
                raise ValueError("M must be projected onto the mask (zero off-mask)")
        object.__setattr__(self, "M", M)

    @classmethod
    def with_default_rho(cls, M, sigma: float = DEFAULT_SIGMA, mask=None) -> "RpcaInstance":
        """``rho = 1/sqrt(m)`` for an ``m x n`` matrix."""
        M = as_matrix(M, "M")
        return cls(M, 1.0 / np.sqrt(M.shape[0]), sigma, mask)


def _nuclear_subgrad(x):
    f = svd(x)
    keep = f.s > 1e-12 * max(f.s[0], 1.0)
    return f.u[:, keep] @ f.v[:, keep].T


def rpca_handles(inst: RpcaInstance, smooth_f: bool = True, smooth_g: bool = True) -> SplitObjective:
    """``f(X) = ||X||_*`` and ``g(X) = rho ||P(M - X)||_1``, each optionally smoothed.

    ``P`` is the mask projection (identity without a mask).
    """
    M, rho, sigma, mask = inst.M, inst.rho, inst.sigma, inst.mask
    proj = (lambda a: a) if mask is None else (lambda a: project_mask(a, mask))

    if smooth_f:
        sn = SmoothedNuclear(sigma)
        f = FunctionHandle(value=sn.value, grad=sn.grad, prox=sn.prox, lipschitz=sn.lipschitz,
                           name="smoothed-nuclear")
    else:
        f = FunctionHandle(value=nuclear_norm, prox=matrix_shrink, subgrad=_nuclear_subgrad,
                           name="nuclear")

    if smooth_g:
        h = SmoothedL1(rho, sigma) if mask is None else SmoothedMaskedL1(rho, sigma, mask)
        g = FunctionHandle(
            value=lambda x: h.value(M - x),
            grad=lambda x: -h.grad(M - x),
            prox=lambda z, tau: M - h.prox(M - z, tau),
            lipschitz=h.lipschitz,
            name="smoothed-l1-residual",
        )
    else:
        on = np.ones(M.shape, dtype=bool) if mask is None else mask.bool

        def prox_g(z, tau):
            w = M - z
            return M - np.where(on, vector_shrink(w, tau * rho), w)

        g = FunctionHandle(
            value=lambda x: rho * float(np.sum(np.abs(proj(M - x)))),
            prox=prox_g,
            subgrad=lambda x: -rho * np.sign(proj(M - x)),
            name="l1-residual",
        )
    return SplitObjective(f=f, g=g, shape=M.shape, reference_norm=float(np.linalg.norm(M)) or None)


def _smoothed_residual(rho, sigma, mask):
    return SmoothedL1(rho, sigma) if mask is None else SmoothedMaskedL1(rho, sigma, mask)


def rpca_x_subproblem(Yk, M, mu, sigma, rho, mask: Optional[IndexMask] = None) -> np.ndarray:
    """Closed-form X-update of smoothed RPCA.

    With ``U diag(gamma) V^T = svd(mu Z(Y) - Y + M)``, where ``Z`` is the
    smoothed l1 gradient, returns
    ``U diag(gamma - mu gamma / max(gamma, mu + sigma)) V^T``.
    """
    z = _smoothed_residual(rho, sigma, mask).grad(Yk)
    return SmoothedNuclear(sigma).prox(mu * z - Yk + M, mu)


def rpca_y_subproblem(Xk1, M, mu, sigma, rho, mask: Optional[IndexMask] = None) -> np.ndarray:
    """Closed-form Y-update of smoothed RPCA.

    ``B = mu W(X) - X + M`` with ``W`` the smoothed nuclear gradient, then
    ``Y = B - mu clip(B / (sigma + mu), -rho, rho)`` on observed entries and
    ``Y = B`` elsewhere.
    """
    B = mu * SmoothedNuclear(sigma).grad(Xk1) - Xk1 + M
    return _smoothed_residual(rho, sigma, mask).prox(B, mu)


def rpca_continuation(M, mu_bar: float = 1e-6, eta: float = 2.0 / 3.0, norm: str = "spectral"):
    """``mu0 = ||M|| / 1.25`` with the spectral (default) or Frobenius norm."""
    M = as_matrix(M, "M")
    scale = np.linalg.norm(M, 2) if norm == "spectral" else np.linalg.norm(M)
    return solvers.Continuation(mu0=float(scale) / 1.25, mu_bar=mu_bar, eta=eta)


def solve_rpca(
    inst: RpcaInstance,
    config: solvers.SolverConfig,
    solver: str = "alm",
    smooth_f: bool = True,
    smooth_g: bool = True,
):
    """Run ``solver`` from ``(X, Y) = (M, 0)``; returns ``(X, Y, trace)``."""
    obj = rpca_handles(inst, smooth_f, smooth_g)
    trace = solvers.solve(solver, obj, config, x0=inst.M)
    return trace.final_x, inst.M - trace.final_y, trace


@dataclass(frozen=True)
class CompletionSpec:
    """Random corrupted matrix completion instance.

    ``n x n`` matrix of rank ``r``, a fraction ``spr`` of entries corrupted,
    a fraction ``sr`` of entries observed.
    """

    n: int
    r: int
    spr: float
    sr: float
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.r < self.n:
            raise ValueError(f"need 0 < r < n, got r={self.r}, n={self.n}")
        if not 0 <= self.spr <= 1:
            raise ValueError(f"spr must lie in [0, 1], got {self.spr}")
        if not 0 < self.sr <= 1:
            raise ValueError(f"sr must lie in (0, 1], got {self.sr}")


@dataclass(frozen=True)
class CompletionInstance:
    instance: RpcaInstance
    A: np.ndarray
    E: np.ndarray

    @property
    def mask(self) -> IndexMask:
        return self.instance.mask


def generate_completion(spec: CompletionSpec, sigma: float = DEFAULT_SIGMA) -> CompletionInstance:
    """Low-rank ``A = A_L A_R^T`` (standard normal factors), sparse ``E`` with
    entries uniform on ``[-500, 500]``, uniformly sampled mask, ``M = P(A + E)``.

    Draw order from one SplitMix64 stream: ``A_L`` then ``A_R`` (row-major
    normals), the support of ``E``, its values, then the mask.  ``rho = 1/sqrt(n)``.
    """
    n, r = spec.n, spec.r
    rng = SplitMix64(spec.seed)
    AL = rng.normal(n * r).reshape(n, r)
    AR = rng.normal(n * r).reshape(n, r)
    A = AL @ AR.T
    E = np.zeros(n * n)
    k_e = int(round(spec.spr * n * n))
    support = rng.choice(n * n, k_e)
    E[support] = 1000.0 * rng.uniform(k_e) - 500.0
    E = E.reshape(n, n)
    observed = rng.choice(n * n, int(round(spec.sr * n * n)))
    mask = IndexMask(zip((observed // n).tolist(), (observed % n).tolist()), (n, n))
    M = project_mask(A + E, mask)
    return CompletionInstance(RpcaInstance(M, 1.0 / np.sqrt(n), sigma, mask), A, E)


@dataclass(frozen=True)
class RelativeErrors:
    """``relX = ||X - A|| / ||A||`` and ``relY = ||Y - E|| / ||E||`` (Frobenius).

    When a ground truth is zero the plain error norm is reported and the
    matching ``*_absolute`` flag is set.
    """

    relX: float
    relY: float
    x_absolute: bool = False
    y_absolute: bool = False


def relative_errors(X, Y, truth_A, truth_E) -> RelativeErrors:
    X, Y, A, E = (np.asarray(a, dtype=np.float64) for a in (X, Y, truth_A, truth_E))
    if not (X.shape == A.shape and Y.shape == E.shape):
        raise ValueError("shape mismatch between estimates and ground truth")
    na, ne = np.linalg.norm(A), np.linalg.norm(E)
    ex, ey = np.linalg.norm(X - A), np.linalg.norm(Y - E)
    return RelativeErrors(
        relX=float(ex / na) if na > 0 else float(ex),
        relY=float(ey / ne) if ne > 0 else float(ey),
        x_absolute=na == 0,
        y_absolute=ne == 0,
    )
