"""Bounded nonlinear least squares for real or complex models.

Thin layer over :func:`scipy.optimize.least_squares` (trust-region
reflective) that adds complex residual stacking, 1-sigma weighting,
covariance from the Jacobian at the optimum and an explicit failure type.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize

from ..errors import ConvergenceError

# convergence requires ||J^T r|| <= GRADIENT_RTOL * ||J|| * (||r|| + ||y||)
GRADIENT_RTOL = 1e-8
SINGULAR_RCOND = 1e-12


@dataclass
class NllsResult:
    params: np.ndarray
    covariance: np.ndarray
    residual_rms: float
    cost: float
    nfev: int
    relative_gradient: float
    singular: bool = False
    message: str = ""
    jacobian: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0, None))


def _stack(values):
    values = np.asarray(values)
    if np.iscomplexobj(values):
        return np.concatenate([values.real, values.imag])
    return values.astype(float)


def _covariance(jac):
    """Unscaled covariance (J^T J)^-1 via SVD, and a singularity flag."""
    _, sv, vt = np.linalg.svd(jac, full_matrices=False)
    singular = sv.size == 0 or sv[-1] <= SINGULAR_RCOND * sv[0]
    keep = sv > SINGULAR_RCOND * (sv[0] if sv.size else 0)
    inv_sq = np.where(keep, 1 / np.where(keep, sv, 1) ** 2, 0.0)
    cov = (vt.T * inv_sq) @ vt
    return cov, bool(singular)


def nlls_fit(
    model: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x,
    y,
    p0: Sequence[float],
    bounds=(-np.inf, np.inf),
    sigma=None,
    max_nfev: int = 2000,
    absolute_sigma: bool = False,
) -> NllsResult:
    """Minimize sum |(model(x, p) - y) / sigma|**2 over p.

    ``model`` may return complex values; real and imaginary residuals are
    then fitted jointly.  ``sigma`` is the 1-sigma error of each observation
    (of each quadrature for complex data).  Unless ``absolute_sigma``, the
    covariance is rescaled by the reduced chi-square.

    Raises ConvergenceError (with ``.best``) if the iteration limit is hit
    or the final gradient is not small.
    """
    p0 = np.asarray(p0, dtype=float)
    y = np.asarray(y)
    if not np.all(np.isfinite(y)):
        raise ValueError("data contain non-finite values")
    weights = None if sigma is None else 1 / np.broadcast_to(np.asarray(sigma, dtype=float), y.shape)
    y_stacked = _stack(y)
    w_stacked = None if weights is None else np.concatenate([weights, weights]) if np.iscomplexobj(y) else weights

    def residuals(p):
        r = _stack(model(x, p)) - y_stacked
        return r if w_stacked is None else r * w_stacked

    lo, hi = np.broadcast_to(bounds[0], p0.shape), np.broadcast_to(bounds[1], p0.shape)
    if np.any(p0 < lo) or np.any(p0 > hi):
        raise ValueError("initial parameters lie outside the bounds")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        sol = optimize.least_squares(
            residuals,
            p0,
            jac="3-point",
            bounds=(lo, hi),
            method="trf",
            x_scale="jac",
            ftol=1e-15,
            xtol=1e-15,
            gtol=1e-15,
            max_nfev=max_nfev,
        )

    jac = sol.jac
    r = sol.fun
    m, n = jac.shape
    grad = jac.T @ r
    # active bounds legitimately carry a non-zero gradient
    free = sol.active_mask == 0
    # normalized by data scale too: round-off residuals of exact fits are not orthogonal to J
    y_scale = np.linalg.norm(y_stacked if w_stacked is None else y_stacked * w_stacked)
    scale = np.linalg.norm(jac) * (np.linalg.norm(r) + y_scale)
    rel_grad = float(np.linalg.norm(grad[free]) / scale) if scale > 0 else 0.0
    cov, singular = _covariance(jac)
    if not absolute_sigma:
        cov = cov * (2 * sol.cost / (m - n) if m > n else np.nan)
    if singular:
        cov = np.full_like(cov, np.inf)

    result = NllsResult(
        params=sol.x,
        covariance=cov,
        residual_rms=float(np.sqrt(2 * sol.cost / m)),
        cost=float(sol.cost),
        nfev=int(sol.nfev),
        relative_gradient=rel_grad,
        singular=singular,
        message=sol.message,
        jacobian=jac,
    )
    if sol.status == 0:
        raise ConvergenceError(f"no convergence after {sol.nfev} evaluations", best=result)
    if rel_grad > GRADIENT_RTOL:
        raise ConvergenceError(f"stopped with relative gradient {rel_grad:.3g}: {sol.message}", best=result)
    if singular:
        warnings.warn("Jacobian is singular at the optimum; covariance is unbounded", RuntimeWarning, stacklevel=2)
    return result
