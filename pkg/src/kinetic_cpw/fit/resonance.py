"""Notch-type resonance fitting of complex S21 traces.

The ideal response of a resonator hanging off a feedline is

    S21(f) = 1 - (Q / Qc_hat) / (1 + 2j Q (f - f0) / f0),   Qc_hat = Qc exp(-1j phi)

where phi accounts for impedance mismatch around the resonator ("diameter
correction").  The internal quality factor is derived, not fitted:
1/Qi = 1/Q - cos(phi)/Qc.

Raw traces carry an environmental baseline (amplitude, linear amplitude
tilt, phase offset and cable delay).  :func:`preprocess_trace` estimates it
from the off-resonance wings; :func:`fit_resonance` then refines baseline
and resonance jointly on the raw data so that tails of the resonance in the
wings do not bias the result.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ConvergenceError, DataError
from .nlls import nlls_fit

_PHI_LIMIT = np.pi / 2 - 1e-9
MIN_FIT_POINTS = 20


def notch_s21(f, f0, Q, Qc, phi=0.0):
    """Ideal notch response; ``f`` may be an array."""
    f = np.asarray(f, dtype=float)
    return 1 - (Q / Qc) * np.exp(1j * phi) / (1 + 2j * Q * (f - f0) / f0)


def loaded_q(qi, qc, phi=0.0):
    """Loaded Q from internal Q, coupling Q magnitude and mismatch angle."""
    return 1 / (1 / qi + np.cos(phi) / qc)


def internal_q(q, qc, phi=0.0):
    """Internal Q from loaded Q; raises DataError if the result is unphysical."""
    inv = 1 / q - np.cos(phi) / qc
    if not inv > 0:
        raise DataError(f"unphysical parameters: 1/Q - cos(phi)/Qc = {inv!r} <= 0")
    return 1 / inv


@dataclass
class S21Trace:
    freq: np.ndarray
    s21: np.ndarray
    power_dbm: Optional[float] = None

    def __post_init__(self):
        self.freq = np.asarray(self.freq, dtype=float)
        self.s21 = np.asarray(self.s21, dtype=complex)
        if self.freq.ndim != 1 or self.freq.shape != self.s21.shape:
            raise DataError("freq and s21 must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(self.freq)) and np.all(np.isfinite(self.s21))):
            raise DataError("trace contains non-finite values")
        if self.freq.size > 1 and np.any(np.diff(self.freq) <= 0):
            bad = int(np.argmax(np.diff(self.freq) <= 0)) + 1
            raise DataError(f"frequencies must be strictly increasing (point {bad})")

    def __len__(self):
        return self.freq.size

    def select(self, mask) -> "S21Trace":
        return S21Trace(self.freq[mask], self.s21[mask], self.power_dbm)


@dataclass(frozen=True)
class Baseline:
    """(amplitude + amplitude_slope*(f - f_ref)) * exp(1j*(phase - 2*pi*delay*(f - f_ref)))."""

    amplitude: float = 1.0
    amplitude_slope: float = 0.0
    phase: float = 0.0
    delay: float = 0.0
    f_ref: float = 0.0

    def __call__(self, f):
        df = np.asarray(f, dtype=float) - self.f_ref
        return (self.amplitude + self.amplitude_slope * df) * np.exp(1j * (self.phase - 2 * np.pi * self.delay * df))


@dataclass
class NormalizedTrace:
    trace: S21Trace
    baseline: Baseline


def _wing_mask(n, wing_fraction):
    n_wing = max(2, int(round(n * wing_fraction / 2)))
    if 2 * n_wing >= n:
        raise DataError(f"too few points ({n}) to separate off-resonance wings")
    mask = np.zeros(n, dtype=bool)
    mask[:n_wing] = True
    mask[-n_wing:] = True
    return mask, n_wing


def preprocess_trace(trace: S21Trace, wing_fraction: float = 0.2) -> NormalizedTrace:
    """Divide out a baseline estimated from the outer ``wing_fraction`` of points.

    Amplitude: straight-line fit of |S21| against f.  Phase: straight-line fit
    of the unwrapped phase (offset plus cable delay), with the upper wing
    allowed a 2*pi shift relative to the lower one.
    """
    f, z = trace.freq, trace.s21
    mask, n_wing = _wing_mask(f.size, wing_fraction)
    f_ref = 0.5 * (f[0] + f[-1])
    fw = f[mask] - f_ref

    amp_slope, amp = np.polyfit(fw, np.abs(z[mask]), 1)
    if not amp > 0:
        raise DataError("baseline amplitude estimate is non-positive")

    phase = np.unwrap(np.angle(z))
    lo, hi = phase[:n_wing], phase[-n_wing:]
    f_lo, f_hi = f[:n_wing] - f_ref, f[-n_wing:] - f_ref
    if n_wing >= 2 and np.ptp(f_lo) > 0:
        slope_lo = np.polyfit(f_lo, lo, 1)[0]
    else:
        slope_lo = 0.0
    predicted = lo.mean() + slope_lo * (f_hi.mean() - f_lo.mean())
    hi = hi - 2 * np.pi * np.round((hi.mean() - predicted) / (2 * np.pi))
    ph_slope, ph0 = np.polyfit(np.concatenate([f_lo, f_hi]), np.concatenate([lo, hi]), 1)

    baseline = Baseline(
        amplitude=float(amp),
        amplitude_slope=float(amp_slope),
        phase=float(ph0),
        delay=float(-ph_slope / (2 * np.pi)),
        f_ref=float(f_ref),
    )
    return NormalizedTrace(S21Trace(f, z / baseline(f), trace.power_dbm), baseline)


def initial_guess(freq, s21_norm):
    """(f0, Q, Qc, phi) from a normalized trace.

    f0 at the |S21| minimum, Q from the full width at half maximum of
    |1 - S21|**2, Qc from the dip depth, phi from the angle of 1 - S21 there.
    """
    freq = np.asarray(freq, dtype=float)
    dev = 1 - np.asarray(s21_norm)
    power = np.abs(dev) ** 2
    i0 = int(np.argmin(np.abs(s21_norm)))
    f0 = freq[i0]
    half = power[i0] / 2

    def crossing(indices):
        prev = i0
        for i in indices:
            if power[i] < half:
                # linear interpolation between prev (above) and i (below)
                t = (power[prev] - half) / (power[prev] - power[i])
                return freq[prev] + t * (freq[i] - freq[prev])
            prev = i
        return freq[prev]

    f_lo = crossing(range(i0 - 1, -1, -1))
    f_hi = crossing(range(i0 + 1, freq.size))
    fwhm = max(f_hi - f_lo, np.min(np.diff(freq)) if freq.size > 1 else f0 * 1e-9)
    Q = f0 / fwhm
    depth = np.abs(dev[i0])
    if depth <= 0:
        raise DataError("no resonance dip found")
    Qc = Q / depth
    phi = float(np.clip(np.angle(dev[i0]), -1.5, 1.5))
    return float(f0), float(Q), float(Qc), phi


@dataclass
class ResonanceFit:
    f0: float
    Q: float
    Qc: float
    phi: float
    Qi: float
    uncertainties: dict
    residual_rms: float
    baseline: Baseline = field(default_factory=Baseline)
    n_points: int = 0

    def as_dict(self) -> dict:
        return {
            "f0_hz": self.f0,
            "q_loaded": self.Q,
            "q_c": self.Qc,
            "phi_rad": self.phi,
            "q_i": self.Qi,
            "sigma": dict(self.uncertainties),
            "residual_rms": self.residual_rms,
            "n_points": self.n_points,
            "baseline": {
                "amplitude": self.baseline.amplitude,
                "amplitude_slope_per_hz": self.baseline.amplitude_slope,
                "phase_rad": self.baseline.phase,
                "delay_s": self.baseline.delay,
                "f_ref_hz": self.baseline.f_ref,
            },
        }


def fit_resonance(
    trace: S21Trace,
    preprocess: bool = True,
    fit_baseline: bool = True,
    wing_fraction: float = 0.2,
    min_depth: float = 0.01,
) -> ResonanceFit:
    """Fit a single notch resonance.

    With ``preprocess=False`` the trace is taken as already normalized and
    only (f0, Q, Qc, phi) are fitted.  Otherwise the wing baseline is
    removed first, and with ``fit_baseline`` its four parameters are refined
    together with the resonance on the raw data.
    """
    if len(trace) < MIN_FIT_POINTS:
        raise DataError(f"need at least {MIN_FIT_POINTS} points to fit, got {len(trace)}")
    f = trace.freq
    if preprocess:
        norm = preprocess_trace(trace, wing_fraction)
        baseline, z_norm = norm.baseline, norm.trace.s21
    else:
        baseline, z_norm = Baseline(f_ref=0.5 * (f[0] + f[-1])), trace.s21

    if np.min(np.abs(z_norm)) > 1 - min_depth:
        raise DataError(f"no resonance dip deeper than {min_depth:g} found")
    f_g, q_g, qc_g, phi_g = initial_guess(f, z_norm)

    # resonance parameters: x = (f0/f_g - 1) * q_g, ln Q, ln Qc, phi
    x_lo = (f[0] / f_g - 1) * q_g
    x_hi = (f[-1] / f_g - 1) * q_g
    p0 = [0.0, np.log(q_g), np.log(qc_g), phi_g]
    lo = [x_lo, 0.0, 0.0, -_PHI_LIMIT]
    hi = [x_hi, 40.0, 40.0, _PHI_LIMIT]

    def resonance(freq, p):
        return notch_s21(freq, f_g * (1 + p[0] / q_g), np.exp(p[1]), np.exp(p[2]), p[3])

    joint = preprocess and fit_baseline
    if joint:
        # baseline in scaled form over u = (f - f_ref)/half_span in [-1, 1]
        half_span = 0.5 * (f[-1] - f[0])
        u = (f - baseline.f_ref) / half_span
        p0 += [
            baseline.amplitude,
            baseline.amplitude_slope * half_span,
            baseline.phase,
            2 * np.pi * baseline.delay * half_span,
        ]
        lo += [0.0, -np.inf, -np.inf, -np.inf]
        hi += [np.inf, np.inf, np.inf, np.inf]

        def model(freq, p):
            env = (p[4] + p[5] * u) * np.exp(1j * (p[6] - p[7] * u))
            return env * resonance(freq, p)

        data = trace.s21
    else:
        model, data = resonance, z_norm

    p0 = np.clip(p0, lo, hi)
    res = nlls_fit(model, f, data, p0, bounds=(np.array(lo), np.array(hi)))
    p, cov = res.params, res.covariance

    if joint:
        baseline = Baseline(
            amplitude=float(p[4]),
            amplitude_slope=float(p[5] / half_span),
            phase=float(p[6]),
            delay=float(p[7] / (2 * np.pi * half_span)),
            f_ref=baseline.f_ref,
        )
        z_norm = trace.s21 / baseline(f)

    f0 = f_g * (1 + p[0] / q_g)
    Q, Qc, phi = float(np.exp(p[1])), float(np.exp(p[2])), float(p[3])
    try:
        Qi = internal_q(Q, Qc, phi)
    except DataError as exc:
        raise ConvergenceError(str(exc), best=res) from exc

    # first-order propagation: d(1/Qi) over (ln Q, ln Qc, phi), then dQi = -Qi^2 d(1/Qi)
    grad_inv = np.array([-1 / Q, np.cos(phi) / Qc, np.sin(phi) / Qc])
    grad_qi = -(Qi**2) * grad_inv
    sub = cov[1:4, 1:4]
    sigma = {
        "f0": float(f_g / q_g * np.sqrt(cov[0, 0])),
        "Q": float(Q * np.sqrt(cov[1, 1])),
        "Qc": float(Qc * np.sqrt(cov[2, 2])),
        "phi": float(np.sqrt(cov[3, 3])),
        "Qi": float(np.sqrt(max(grad_qi @ sub @ grad_qi, 0.0))),
    }
    resid = z_norm - notch_s21(f, f0, Q, Qc, phi)
    return ResonanceFit(
        f0=float(f0),
        Q=Q,
        Qc=Qc,
        phi=phi,
        Qi=float(Qi),
        uncertainties=sigma,
        residual_rms=float(np.sqrt(np.mean(np.abs(resid) ** 2))),
        baseline=baseline,
        n_points=len(trace),
    )


def find_dips(trace: S21Trace, min_depth: float = 0.01, max_count: Optional[int] = None, exclusion: float = 5.0):
    """Locate resonance dips in a (possibly multi-resonator) trace.

    Returns a frequency-sorted list of ``(f_center, width)`` where width is a
    rough full width of the amplitude dip.  Dips are accepted greedily from
    the deepest.  Each one masks its contiguous flanks above the detection
    threshold plus ``exclusion`` widths beyond them.  The threshold is
    ``min_depth`` or five times the estimated point-to-point noise, whichever
    is larger.
    """
    f = trace.freq
    amp = np.abs(trace.s21)
    level = np.percentile(amp, 90)
    deficit = 1 - amp / level
    noise = np.median(np.abs(np.diff(amp))) / (0.6745 * np.sqrt(2)) / level if f.size > 2 else 0.0
    threshold = max(min_depth, 5 * noise)
    available = np.ones(f.size, dtype=bool)
    dips = []
    while available.any() and (max_count is None or len(dips) < max_count):
        i0 = int(np.flatnonzero(available)[np.argmax(deficit[available])])
        if deficit[i0] < threshold:
            break
        half = deficit[i0] / 2
        lo = i0
        while lo > 0 and deficit[lo - 1] > half:
            lo -= 1
        hi = i0
        while hi < f.size - 1 and deficit[hi + 1] > half:
            hi += 1
        width = max(f[hi] - f[lo], np.min(np.diff(f)))
        while lo > 0 and deficit[lo - 1] > threshold:
            lo -= 1
        while hi < f.size - 1 and deficit[hi + 1] > threshold:
            hi += 1
        dips.append((float(f[i0]), float(width)))
        available &= (f < f[lo] - exclusion * width) | (f > f[hi] + exclusion * width)
    return sorted(dips)


def fit_all(
    trace: S21Trace,
    window_widths: float = 10.0,
    min_depth: float = 0.01,
    max_count: Optional[int] = None,
    **fit_kwargs,
):
    """Fit every dip of a composite trace in its own frequency window.

    Each window spans ``window_widths`` rough dip widths on either side of the
    dip, clipped halfway to the neighbouring dips.
    """
    dips = find_dips(trace, min_depth=min_depth, max_count=max_count)
    if not dips:
        raise DataError(f"no resonance dip deeper than {min_depth:g} found")
    centers = [c for c, _ in dips]
    fits = []
    for j, (center, width) in enumerate(dips):
        lo = center - window_widths * width
        hi = center + window_widths * width
        if j > 0:
            lo = max(lo, 0.5 * (centers[j - 1] + center))
        if j < len(dips) - 1:
            hi = min(hi, 0.5 * (center + centers[j + 1]))
        window = trace.select((trace.freq >= lo) & (trace.freq <= hi))
        fits.append(fit_resonance(window, min_depth=min_depth, **fit_kwargs))
    return fits
