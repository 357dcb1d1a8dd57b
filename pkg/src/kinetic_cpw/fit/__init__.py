"""Measurement analysis: generic least squares, notch resonance, input power and TLS loss."""

from .nlls import NllsResult, nlls_fit
from .power import AttenuationChain, photon_number, power_at_chip
from .resonance import ResonanceFit, S21Trace, fit_all, fit_resonance, preprocess_trace
from .tls import TlsFit, fit_tls, tls_qi

__all__ = [
    "AttenuationChain", "NllsResult", "ResonanceFit", "S21Trace", "TlsFit", "fit_all", "fit_resonance",
    "fit_tls", "nlls_fit", "photon_number", "power_at_chip", "preprocess_trace", "tls_qi",
]
