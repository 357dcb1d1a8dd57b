"""Kinetic inductance of a thin superconducting CPW.

The effective penetration depth of a film of thickness d is
``lambda0 * coth(d / lambda0)``.  It is substituted into the thin-film CPW
expression ``L_k = mu0 * lambda**2 / (d * w) * g(s, w, d)`` whose geometric
factor g accounts for current crowding at the conductor edges.  The
expression is only quantitatively trustworthy for ``d < 2 * lambda``;
results outside that range are still returned but flagged.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import constants

from .em import CpwGeometry, Material, cpw_geometric_inductance, elliptic_k
from .errors import DomainError


@dataclass(frozen=True)
class KineticParams:
    lambda_eff: float
    g_factor: float
    lk_per_len: float
    kinetic_fraction: float
    valid_thin_film: bool


def penetration_depth(d, lambda0):
    """Effective penetration depth [m] of a film of thickness ``d`` [m]."""
    d_arr = np.asarray(d, dtype=float)
    if np.any(~(d_arr > 0)) or not lambda0 > 0:
        raise DomainError(f"penetration_depth needs d > 0 and lambda0 > 0, got d={d!r}, lambda0={lambda0!r}")
    out = lambda0 / np.tanh(d_arr / lambda0)
    return float(out) if out.ndim == 0 else out


def _geometric_factor(w, s, d):
    """Array-friendly core of geometric_factor; no validation."""
    k = w / (w + 2 * s)
    kk = elliptic_k(k)
    bracket = (
        -np.log(d / (4 * w))
        - k * np.log(d / (4 * (w + 2 * s)))
        + 2 * (w + s) / (w + 2 * s) * np.log(s / (w + s))
    )
    return bracket / (2 * k**2 * kk**2)


def _check_thickness(w, d):
    d_arr = np.asarray(d, dtype=float)
    if np.any(~(d_arr > 0)) or np.any(d_arr >= w):
        raise DomainError(f"thin-film kinetic model needs 0 < d < w (w={w!r}), got d={d!r}")


def geometric_factor(geom: CpwGeometry) -> float:
    """Dimensionless current-crowding factor g(s, w, d); requires d < w."""
    _check_thickness(geom.w, geom.d)
    g = _geometric_factor(geom.w, geom.s, geom.d)
    if not g > 0:
        raise DomainError(f"geometric factor is non-positive ({g!r}) for {geom}")
    return float(g)


def lk_per_len_vs_thickness(geom: CpwGeometry, mat: Material, d):
    """Kinetic inductance per unit length [H/m] for an array of thicknesses.

    ``geom.d`` is ignored; every entry of ``d`` must satisfy ``0 < d < w``.
    """
    _check_thickness(geom.w, d)
    d = np.asarray(d, dtype=float)
    lam = penetration_depth(d, mat.lambda0)
    g = _geometric_factor(geom.w, geom.s, d)
    return constants.mu_0 * lam**2 / (d * geom.w) * g


def kinetic_inductance(geom: CpwGeometry, mat: Material) -> float:
    """Kinetic inductance per unit length [H/m]."""
    lam = penetration_depth(geom.d, mat.lambda0)
    return constants.mu_0 * lam**2 / (geom.d * geom.w) * geometric_factor(geom)


def kinetic_fraction(geom: CpwGeometry, mat: Material) -> float:
    """L_k / (L_m + L_k), with the film's internal inductance neglected."""
    lk = kinetic_inductance(geom, mat)
    return lk / (cpw_geometric_inductance(geom) + lk)


def kinetic_params(geom: CpwGeometry, mat: Material) -> KineticParams:
    lam = penetration_depth(geom.d, mat.lambda0)
    g = geometric_factor(geom)
    lk = constants.mu_0 * lam**2 / (geom.d * geom.w) * g
    lm = cpw_geometric_inductance(geom)
    return KineticParams(
        lambda_eff=lam,
        g_factor=g,
        lk_per_len=lk,
        kinetic_fraction=lk / (lm + lk),
        valid_thin_film=bool(geom.d < 2 * lam),
    )
