"""Input-line attenuation and intracavity photon number."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import constants

from ..errors import DomainError


@dataclass(frozen=True)
class AttenuationChain:
    """Ordered ``(label, attenuation_db)`` stages plus cable loss [dB]."""

    stages: Tuple[Tuple[str, float], ...] = ()
    cable_loss: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple((str(l), float(a)) for l, a in self.stages))
        for label, att in self.stages:
            if att < 0:
                raise DomainError(f"stage {label!r} has negative attenuation {att}")
        if self.cable_loss < 0:
            raise DomainError(f"cable loss must be >= 0, got {self.cable_loss}")

    @property
    def total_db(self) -> float:
        return sum(att for _, att in self.stages) + self.cable_loss

    @classmethod
    def cryostat_default(cls) -> "AttenuationChain":
        """20/3/6/40 dB on the 3K, still, cold-plate and MXC stages, 10 dB cable loss."""
        return cls((("3K", 20.0), ("still", 3.0), ("cold plate", 6.0), ("MXC", 40.0)), 10.0)


def power_at_chip(p_source_dbm: float, chain: AttenuationChain) -> float:
    """Source power [dBm] minus every stage and the cable loss."""
    return p_source_dbm - chain.total_db


def dbm_to_watt(p_dbm):
    return 1e-3 * 10 ** (np.asarray(p_dbm, dtype=float) / 10)


def watt_to_dbm(p_watt):
    return 10 * np.log10(np.asarray(p_watt, dtype=float) / 1e-3)


def photon_number(p_chip_dbm, f0: float, Q: float, Qc: float, impedance_factor: float = 1.0):
    """Mean photon number <n> = 2 Q^2 P / (Qc hbar w0^2) of a notch resonator.

    ``impedance_factor`` multiplies the result to account for a feedline /
    resonator impedance mismatch; 1 gives the standard convention.
    """
    for name, value in (("f0", f0), ("Q", Q), ("Qc", Qc), ("impedance_factor", impedance_factor)):
        if not value > 0:
            raise DomainError(f"{name} must be positive, got {value!r}")
    omega = 2 * np.pi * f0
    n = impedance_factor * 2 * Q**2 * dbm_to_watt(p_chip_dbm) / (Qc * constants.hbar * omega**2)
    return float(n) if np.ndim(n) == 0 else n


def power_for_photons(n, f0: float, Q: float, Qc: float, impedance_factor: float = 1.0) -> float:
    """Inverse of :func:`photon_number`: chip power [dBm] giving ``n`` photons."""
    omega = 2 * np.pi * f0
    watts = n * Qc * constants.hbar * omega**2 / (2 * Q**2 * impedance_factor)
    return float(watt_to_dbm(watts))
