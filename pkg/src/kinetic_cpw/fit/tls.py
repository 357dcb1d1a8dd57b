"""Power dependence of the internal quality factor from two-level systems.

    1/Qi(n) = F*delta0 * tanh(hbar*w / (2 kB T)) / sqrt(1 + n/n_c) + 1/Q_others

The thermal factor is fixed by the supplied temperature and frequency; the
three remaining parameters are fitted in log space with 1/sigma^2 weights.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import constants

from ..errors import DataError
from .nlls import nlls_fit

MIN_POINTS = 5
MIN_DECADES = 3.0


def thermal_factor(temperature: float, frequency: float) -> float:
    """tanh(hbar w / 2 kB T)."""
    x = constants.hbar * 2 * np.pi * frequency / (2 * constants.k * temperature)
    return float(np.tanh(x))


def tls_qi(n, f_delta0, n_c, q_others, temperature, frequency):
    """Internal Q at mean photon number ``n`` (array-friendly)."""
    n = np.asarray(n, dtype=float)
    loss = f_delta0 * thermal_factor(temperature, frequency) / np.sqrt(1 + n / n_c) + 1 / q_others
    return 1 / loss


@dataclass
class TlsFit:
    f_delta0: float
    n_c: float
    q_others: float
    temperature: float
    frequency: float
    uncertainties: dict
    degenerate: bool = False

    def qi(self, n):
        return tls_qi(n, self.f_delta0, self.n_c, self.q_others, self.temperature, self.frequency)

    def as_dict(self) -> dict:
        return {
            "f_delta0": self.f_delta0,
            "n_c": self.n_c,
            "q_others": self.q_others,
            "temperature_k": self.temperature,
            "frequency_hz": self.frequency,
            "sigma": dict(self.uncertainties),
            "degenerate": self.degenerate,
        }


def fit_tls(n, qi, qi_sigma, temperature: float, frequency: float) -> TlsFit:
    """Weighted fit of (F*delta0, n_c, Q_others) to a power sweep.

    Needs at least five points spanning three decades of photon number.  A
    sweep whose Qi does not change beyond its error bars is flagged as
    degenerate (the TLS and power-independent losses cannot be separated).
    """
    n = np.asarray(n, dtype=float)
    qi = np.asarray(qi, dtype=float)
    qi_sigma = np.broadcast_to(np.asarray(qi_sigma, dtype=float), qi.shape)
    if n.size < MIN_POINTS:
        raise DataError(f"TLS fit needs at least {MIN_POINTS} points, got {n.size}")
    if np.any(n <= 0) or np.any(qi <= 0) or np.any(qi_sigma <= 0):
        raise DataError("photon numbers, Qi and their errors must be positive")
    if np.log10(n.max() / n.min()) < MIN_DECADES:
        raise DataError(f"sweep spans fewer than {MIN_DECADES:g} decades of photon number")

    order = np.argsort(n)
    n, qi, qi_sigma = n[order], qi[order], qi_sigma[order]
    thermal = thermal_factor(temperature, frequency)

    spread = qi.max() - qi.min()
    degenerate = bool(spread <= 3 * np.median(qi_sigma))
    if degenerate:
        warnings.warn("Qi shows no resolvable power dependence; Q_others is unidentifiable", RuntimeWarning, stacklevel=2)

    # starting point: high-power Qi ~ Q_others, low-power excess loss ~ TLS term
    q_others0 = qi[-1] * 1.05
    excess = max(1 / qi[0] - 1 / q_others0, 1e-3 / q_others0)
    fd0 = excess / thermal * np.sqrt(1 + n[0] / np.sqrt(n[0] * n[-1]))
    nc0 = np.sqrt(n[0] * n[-1]) if degenerate else _half_point(n, 1 / qi - 1 / q_others0)
    p0 = np.log([fd0, nc0, q_others0])

    def model(x, p):
        return tls_qi(x, *np.exp(p), temperature, frequency)

    res = nlls_fit(model, n, qi, p0, sigma=qi_sigma, absolute_sigma=False)
    fd, nc, qo = np.exp(res.params)
    se = res.stderr
    return TlsFit(
        f_delta0=float(fd),
        n_c=float(nc),
        q_others=float(qo),
        temperature=temperature,
        frequency=frequency,
        uncertainties={"f_delta0": float(fd * se[0]), "n_c": float(nc * se[1]), "q_others": float(qo * se[2])},
        degenerate=degenerate,
    )


def _half_point(n, excess_loss):
    """Guess n_c from where the excess loss has halved (which happens at n = 3 n_c)."""
    target = excess_loss[0] / 2
    below = np.flatnonzero(excess_loss <= target)
    if below.size == 0:
        return float(n[-1])
    return float(max(n[below[0]] / 3, n[0] * 1e-3))
