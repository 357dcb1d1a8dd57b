"""Quarter-wave resonator frequencies with and without kinetic inductance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .em import CpwGeometry, Material, TransmissionLineParams, transmission_line_params
from .errors import DomainError

# central-difference step, relative to d
SENSITIVITY_STEP = 1e-4


def _require_positive(**values):
    for name, value in values.items():
        if not np.all(np.asarray(value) > 0):
            raise DomainError(f"{name} must be positive, got {value!r}")


def quarter_wave_frequency(l, c, ltot):
    """f = 1 / (4 l sqrt(C L)) [Hz] for length ``l`` [m] and line constants C [F/m], L [H/m]."""
    _require_positive(l=l, c=c, ltot=ltot)
    return 1 / (4 * l * np.sqrt(c * ltot))


def solve_length(f_target, c, ltot):
    """Length [m] of the quarter-wave line that resonates at ``f_target`` [Hz]."""
    _require_positive(f_target=f_target, c=c, ltot=ltot)
    return 1 / (4 * f_target * np.sqrt(c * ltot))


@dataclass(frozen=True)
class ResonatorModel:
    """A quarter-wave resonator of fixed length.

    ``f_geometric`` ignores kinetic inductance; ``f_full`` includes it unless
    the model was built with ``kinetic=False`` (then the two coincide).
    """

    geom: CpwGeometry
    mat: Material
    tl: TransmissionLineParams
    f_geometric: float
    f_full: float
    kinetic: bool = True

    @classmethod
    def build(cls, geom: CpwGeometry, mat: Material, kinetic: bool = True) -> "ResonatorModel":
        if geom.l is None:
            raise DomainError("resonator length is required; use from_target to solve it")
        tl = transmission_line_params(geom, mat, kinetic=kinetic)
        return cls(
            geom=geom,
            mat=mat,
            tl=tl,
            f_geometric=float(quarter_wave_frequency(geom.l, tl.c_per_len, tl.lm_per_len)),
            f_full=float(quarter_wave_frequency(geom.l, tl.c_per_len, tl.l_per_len)),
            kinetic=kinetic,
        )

    @classmethod
    def from_target(
        cls,
        geom: CpwGeometry,
        mat: Material,
        f_target: float,
        kinetic_aware: bool = False,
        kinetic: bool = True,
    ) -> "ResonatorModel":
        """Solve the length for ``f_target``.

        With ``kinetic_aware=False`` the length is chosen from C and L_m alone,
        as an EM simulation without kinetic inductance would; the kinetic
        term then pulls ``f_full`` below the target.
        """
        tl = transmission_line_params(geom, mat, kinetic=kinetic)
        ltot = tl.l_per_len if kinetic_aware else tl.lm_per_len
        length = float(solve_length(f_target, tl.c_per_len, ltot))
        return cls.build(geom.with_length(length), mat, kinetic=kinetic)

    @property
    def kinetic_fraction(self) -> float:
        return self.tl.kinetic_fraction

    def at_thickness(self, d: float) -> "ResonatorModel":
        return ResonatorModel.build(self.geom.with_thickness(d), self.mat, kinetic=self.kinetic)


def frequency_shift(model: ResonatorModel) -> float:
    """f_full - f_geometric [Hz]; negative whenever L_k > 0."""
    return model.f_full - model.f_geometric


def thickness_sensitivity(model: ResonatorModel) -> float:
    """df_full/dd [Hz/m] at fixed length, by central difference."""
    d = model.geom.d
    h = SENSITIVITY_STEP * d
    f_hi = model.at_thickness(d + h).f_full
    f_lo = model.at_thickness(d - h).f_full
    return (f_hi - f_lo) / (2 * h)
