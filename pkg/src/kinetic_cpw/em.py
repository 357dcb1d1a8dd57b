"""Conformal-mapping model of a zero-thickness coplanar waveguide.

All lengths are in metres.  The elliptic integral here takes the *modulus*
``k`` (not the parameter ``m = k**2`` used by ``scipy.special.ellipk``).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import constants

from .errors import DomainError

_AGM_MAX_ITER = 64


@dataclass(frozen=True)
class CpwGeometry:
    """CPW cross-section and (optional) resonator length.

    w : center-conductor width [m]
    s : gap between center conductor and ground [m]
    d : film thickness [m]
    l : resonator length [m], ``None`` for per-unit-length work
    """

    w: float
    s: float
    d: float
    l: Optional[float] = None

    def __post_init__(self):
        for name in ("w", "s", "d"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise DomainError(f"{name} must be positive and finite, got {value!r}")
        if self.l is not None and (not np.isfinite(self.l) or self.l <= 0):
            raise DomainError(f"l must be positive and finite, got {self.l!r}")

    @property
    def k(self) -> float:
        return self.w / (self.w + 2 * self.s)

    @property
    def footprint(self) -> float:
        return self.w + 2 * self.s

    def with_thickness(self, d: float) -> "CpwGeometry":
        return CpwGeometry(self.w, self.s, d, self.l)

    def with_length(self, l: Optional[float]) -> "CpwGeometry":
        return CpwGeometry(self.w, self.s, self.d, l)


@dataclass(frozen=True)
class Material:
    """Superconductor and substrate parameters.

    lambda0 : bulk penetration depth [m]
    eps_r : substrate relative permittivity
    temperature : operating temperature [K]
    """

    lambda0: float
    eps_r: float
    temperature: float = 0.013

    def __post_init__(self):
        if not self.lambda0 > 0:
            raise DomainError(f"lambda0 must be positive, got {self.lambda0!r}")
        if not self.eps_r >= 1:
            raise DomainError(f"eps_r must be >= 1, got {self.eps_r!r}")
        if not self.temperature > 0:
            raise DomainError(f"temperature must be positive, got {self.temperature!r}")

    @property
    def eps_eff(self) -> float:
        # infinite substrate below, vacuum above
        return (self.eps_r + 1) / 2


@dataclass(frozen=True)
class TransmissionLineParams:
    """Per-unit-length line constants [F/m, H/m, H/m]."""

    c_per_len: float
    lm_per_len: float
    lk_per_len: float = 0.0

    @property
    def l_per_len(self) -> float:
        return self.lm_per_len + self.lk_per_len

    @property
    def phase_velocity(self) -> float:
        return 1 / np.sqrt(self.c_per_len * self.l_per_len)

    @property
    def impedance(self) -> float:
        return np.sqrt(self.l_per_len / self.c_per_len)

    @property
    def kinetic_fraction(self) -> float:
        return self.lk_per_len / self.l_per_len


def _complement(k):
    # (1-k)(1+k) keeps precision as k -> 1
    return np.sqrt((1 - k) * (1 + k))


def elliptic_k(k):
    """Complete elliptic integral of the first kind, K(k), modulus convention.

    Evaluated as ``pi / (2 * AGM(1, k'))``.  Accepts scalars or arrays;
    raises DomainError unless ``0 <= k < 1`` everywhere.
    """
    k_arr = np.asarray(k, dtype=float)
    if np.any(~np.isfinite(k_arr)) or np.any(k_arr < 0) or np.any(k_arr >= 1):
        raise DomainError(f"elliptic_k needs 0 <= k < 1, got {k!r}")
    a = np.ones_like(k_arr)
    b = _complement(k_arr)
    for _ in range(_AGM_MAX_ITER):
        a_next = (a + b) / 2
        b = np.sqrt(a * b)
        a = a_next
        if np.all(np.abs(a - b) <= 4 * np.finfo(float).eps * a):
            break
    out = np.pi / (a + b)
    return float(out) if out.ndim == 0 else out


def _k_ratio(geom: CpwGeometry) -> float:
    """K(k)/K(k') for the CPW modulus."""
    k = geom.k
    return elliptic_k(k) / elliptic_k(_complement(k))


def cpw_capacitance(geom: CpwGeometry, mat: Material) -> float:
    """Capacitance per unit length, 2 eps0 (eps_r + 1) K(k)/K(k')."""
    return 2 * constants.epsilon_0 * (mat.eps_r + 1) * _k_ratio(geom)


def cpw_geometric_inductance(geom: CpwGeometry) -> float:
    """Geometric (external) inductance per unit length, mu0/4 K(k')/K(k)."""
    return constants.mu_0 / 4 / _k_ratio(geom)


def transmission_line_params(geom: CpwGeometry, mat: Material, kinetic: bool = True) -> TransmissionLineParams:
    """Line constants for ``geom``; ``kinetic=False`` sets L_k to zero."""
    lk = 0.0
    if kinetic:
        from .kinetic import kinetic_inductance

        lk = kinetic_inductance(geom, mat)
    return TransmissionLineParams(cpw_capacitance(geom, mat), cpw_geometric_inductance(geom), lk)
