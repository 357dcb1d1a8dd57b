"""Chip-level model: N quarter-wave resonators on one feedline.

Frequencies enter the linearity metric in MHz, so MSE values are in MHz^2.

Random numbers: trial ``i`` of a Monte-Carlo run draws from
``numpy.random.Generator(PCG64(SeedSequence(seed, spawn_key=(i,))))``.  Each
trial is therefore a pure function of ``(seed, i)`` and runs split across
worker processes reproduce a serial run bit for bit.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .em import CpwGeometry, Material, cpw_capacitance, cpw_geometric_inductance
from .errors import DomainError
from .fit.resonance import loaded_q, notch_s21
from .kinetic import kinetic_fraction, lk_per_len_vs_thickness
from .resonator import quarter_wave_frequency, solve_length

RNG_ALGORITHM = "numpy.random.PCG64 via SeedSequence(seed, spawn_key=(trial,))"
MAX_REJECTIONS = 100
MHZ = 1e6


@dataclass(frozen=True)
class ChipDesign:
    n_resonators: int
    f_mean: float
    f_gap: float
    geom: CpwGeometry
    mat: Material
    q_c_nominal: float = 7e5

    def __post_init__(self):
        if self.n_resonators < 2:
            raise DomainError(f"a chip needs at least 2 resonators, got {self.n_resonators}")
        if not self.f_gap > 0:
            raise DomainError(f"f_gap must be positive, got {self.f_gap}")
        if not self.f_mean > 0 or self.target_frequencies[0] <= 0:
            raise DomainError("all target frequencies must be positive")
        if not self.q_c_nominal > 0:
            raise DomainError(f"q_c_nominal must be positive, got {self.q_c_nominal}")

    @property
    def target_frequencies(self) -> np.ndarray:
        idx = np.arange(self.n_resonators)
        return self.f_mean + (idx - (self.n_resonators - 1) / 2) * self.f_gap

    def lengths(self, kinetic_aware: bool = True) -> np.ndarray:
        """Lengths that place each resonator on its target at the nominal thickness."""
        c = cpw_capacitance(self.geom, self.mat)
        ltot = cpw_geometric_inductance(self.geom)
        if kinetic_aware:
            ltot = ltot + float(lk_per_len_vs_thickness(self.geom, self.mat, self.geom.d))
        return solve_length(self.target_frequencies, c, ltot)

    def frequencies(self, d, lengths=None) -> np.ndarray:
        """Full (kinetic) frequencies for per-resonator thicknesses ``d``."""
        if lengths is None:
            lengths = self.lengths()
        c = cpw_capacitance(self.geom, self.mat)
        lm = cpw_geometric_inductance(self.geom)
        lk = lk_per_len_vs_thickness(self.geom, self.mat, np.broadcast_to(d, np.broadcast_shapes(np.shape(d), np.shape(lengths))))
        return quarter_wave_frequency(lengths, c, lm + lk)


@dataclass(frozen=True)
class ThicknessModel:
    """Film thickness per resonator: nominal + centered linear drift + i.i.d. Gaussian."""

    d_nominal: float
    sigma_d: float = 0.0
    gradient_d: float = 0.0

    def __post_init__(self):
        if not self.d_nominal > 0:
            raise DomainError(f"d_nominal must be positive, got {self.d_nominal}")
        if not self.sigma_d >= 0:
            raise DomainError(f"sigma_d must be >= 0, got {self.sigma_d}")

    @classmethod
    def relative(cls, d_nominal: float, sigma_rel: float = 0.02, gradient_d: float = 0.0) -> "ThicknessModel":
        return cls(d_nominal, sigma_rel * d_nominal, gradient_d)

    def mean_profile(self, n: int) -> np.ndarray:
        return self.d_nominal + self.gradient_d * (np.arange(n) - (n - 1) / 2)


@dataclass
class McResult:
    mse_samples: np.ndarray
    delta_f_samples: np.ndarray
    seed: int
    n_trials: int
    rng: str = RNG_ALGORITHM

    @property
    def mean_mse(self) -> float:
        return float(np.mean(self.mse_samples))

    @property
    def mean_delta_f(self) -> float:
        return float(np.mean(self.delta_f_samples))

    def summary(self) -> dict:
        mse = self.mse_samples
        return {
            "n_trials": self.n_trials,
            "seed": self.seed,
            "rng": self.rng,
            "mse_mhz2_mean": float(np.mean(mse)),
            "mse_mhz2_std": float(np.std(mse)),
            "mse_mhz2_median": float(np.median(mse)),
            "delta_f_mhz_mean": float(np.mean(self.delta_f_samples)),
            "delta_f_mhz_std": float(np.std(self.delta_f_samples)),
        }


def _line_fit_rows(y):
    """Row-wise OLS against index; shared by single fits and Monte-Carlo batches."""
    n = y.shape[-1]
    x = np.arange(n, dtype=float)
    xc = x - x.mean()
    y_mean = y.mean(axis=-1, keepdims=True)
    slope = (xc * (y - y_mean)).sum(axis=-1) / (xc * xc).sum()
    intercept = y_mean[..., 0] - slope * x.mean()
    resid = y - (intercept[..., None] + slope[..., None] * x)
    return slope, intercept, (resid * resid).mean(axis=-1)


def linear_fit_mse(freqs: Sequence[float]) -> Tuple[float, float, float]:
    """Ordinary least-squares line through (index, freq).

    Returns ``(slope, intercept, mse)`` where mse is the mean squared residual
    with divisor n.  Units follow the input (MHz in, MHz^2 out).
    """
    y = np.asarray(freqs, dtype=float)
    if y.ndim != 1 or y.size < 2:
        raise ValueError("linear fit needs a 1-D sequence of at least 2 points")
    slope, intercept, mse = _line_fit_rows(y[None, :])
    return float(slope[0]), float(intercept[0]), float(mse[0])


def _draw_thicknesses(rng, mean, sigma, w):
    d = mean + sigma * rng.standard_normal(mean.size)
    for j in range(d.size):
        tries = 0
        while not 0 < d[j] < w:
            tries += 1
            if tries > MAX_REJECTIONS:
                raise DomainError(f"{MAX_REJECTIONS} consecutive rejected thickness draws for resonator {j}")
            d[j] = mean[j] + sigma * rng.standard_normal()
    return d


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(trial,))))


def _run_trials(chip: ChipDesign, tm: ThicknessModel, seed: int, trials: Sequence[int]):
    lengths = chip.lengths()
    targets = chip.target_frequencies
    mean = tm.mean_profile(chip.n_resonators)
    if np.any(mean <= 0) or np.any(mean >= chip.geom.w):
        raise DomainError("thickness gradient drives the mean profile outside 0 < d < w")
    if tm.sigma_d == 0:
        # deterministic: no random numbers consumed
        d = np.broadcast_to(mean, (len(trials), mean.size))
    else:
        d = np.empty((len(trials), mean.size))
        for k, trial in enumerate(trials):
            d[k] = _draw_thicknesses(_trial_rng(seed, trial), mean, tm.sigma_d, chip.geom.w)
    f = chip.frequencies(d, lengths)
    _, _, mse = _line_fit_rows(f / MHZ)
    shift = ((f - targets) / MHZ).mean(axis=-1)
    return mse, shift


def run_monte_carlo(chip: ChipDesign, tm: ThicknessModel, n_trials: int, seed: int, workers: int = 1) -> McResult:
    """Propagate thickness disorder to the chip's frequency-linearity metric.

    Lengths are solved so every resonator hits its target at ``tm.d_nominal``
    with kinetic inductance included; each trial redraws the thickness of
    every resonator and records the linear-fit MSE [MHz^2] and the mean
    frequency shift [MHz].  Thickness draws outside ``0 < d < w`` are
    redrawn.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    chip = ChipDesign(chip.n_resonators, chip.f_mean, chip.f_gap, chip.geom.with_thickness(tm.d_nominal), chip.mat, chip.q_c_nominal)
    trials = np.arange(n_trials)
    if workers <= 1 or n_trials < 2:
        mse, shift = _run_trials(chip, tm, seed, trials)
    else:
        chunks = np.array_split(trials, min(workers, n_trials))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_trials, [chip] * len(chunks), [tm] * len(chunks), [seed] * len(chunks), chunks))
        mse = np.concatenate([p[0] for p in parts])
        shift = np.concatenate([p[1] for p in parts])
    return McResult(mse, shift, seed, n_trials)


def optimize_geometry(
    total: float,
    d: float,
    mat: Material,
    grid_step: float,
    s_min: float = 1e-6,
    s_max: Optional[float] = None,
) -> List[Tuple[float, float, float]]:
    """Grid search over the gap at fixed footprint ``w + 2s = total``.

    Returns ``(s, w, kinetic_fraction)`` for every feasible grid point
    (``s >= s_min``, ``w > d``), sorted by ascending kinetic fraction.
    """
    if not total > 0 or not grid_step > 0:
        raise DomainError("total footprint and grid step must be positive")
    upper = total / 2 if s_max is None else min(s_max, total / 2)
    n_steps = int(np.floor((upper - s_min) / grid_step + 1e-9)) + 1 if upper >= s_min else 0
    candidates = []
    for i in range(max(n_steps, 0)):
        s = s_min + i * grid_step
        w = total - 2 * s
        if w <= d or s <= 0:
            continue
        geom = CpwGeometry(w=w, s=s, d=d)
        try:
            candidates.append((s, w, kinetic_fraction(geom, mat)))
        except DomainError:
            continue
    if not candidates:
        raise DomainError("no feasible (s, w) on the grid")
    return sorted(candidates, key=lambda c: c[2])


@dataclass(frozen=True)
class Resonance:
    f0: float
    qi: float
    qc: float
    phi: float = 0.0

    @property
    def q_loaded(self) -> float:
        return float(loaded_q(self.qi, self.qc, self.phi))

    @property
    def linewidth(self) -> float:
        return self.f0 / self.q_loaded


def chip_resonances(chip: ChipDesign, qi: float, phi: float = 0.0, f0=None) -> List[Resonance]:
    """Resonances at the chip targets (or ``f0``) with nominal coupling Q."""
    f0 = chip.target_frequencies if f0 is None else f0
    return [Resonance(float(f), qi, chip.q_c_nominal, phi) for f in f0]


def segmented_grid(resonances: Sequence[Resonance], span_linewidths: float = 20.0, points_per_resonance: int = 401, background=None) -> np.ndarray:
    """Dense windows of ``span_linewidths`` linewidths around each resonance,
    merged with optional ``background`` points; strictly increasing."""
    parts = [np.asarray(background, dtype=float)] if background is not None else []
    for r in resonances:
        half = 0.5 * span_linewidths * r.linewidth
        parts.append(np.linspace(r.f0 - half, r.f0 + half, points_per_resonance))
    return np.unique(np.concatenate(parts)) if parts else np.array([])


def synthesize_s21(
    chip: Optional[ChipDesign],
    freq,
    resonances: Optional[Sequence[Resonance]] = None,
    qi: float = 1e6,
    phi: float = 0.0,
    noise_sigma: float = 0.0,
    seed: Optional[int] = None,
) -> np.ndarray:
    """Composite feedline transmission: product of notch responses plus noise.

    Without explicit ``resonances`` they are taken from the chip targets with
    ``qi``, ``phi`` and the chip's nominal coupling Q.  ``noise_sigma`` is the
    standard deviation of each of the real and imaginary noise components.
    """
    freq = np.asarray(freq, dtype=float)
    if freq.size > 1 and np.any(np.diff(freq) <= 0):
        raise ValueError("frequency grid must be strictly increasing")
    if resonances is None:
        resonances = chip_resonances(chip, qi, phi) if chip is not None else []
    if len(resonances) > 1:
        f0s = np.sort([r.f0 for r in resonances])
        widest = max(r.linewidth for r in resonances)
        if np.min(np.diff(f0s)) < 10 * widest:
            warnings.warn("resonances are closer than 10 linewidths; the product-of-notches approximation degrades", RuntimeWarning, stacklevel=2)
    s21 = np.ones(freq.shape, dtype=complex)
    for r in resonances:
        s21 *= notch_s21(freq, r.f0, r.q_loaded, r.qc, r.phi)
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        s21 = s21 + noise_sigma * (rng.standard_normal(freq.size) + 1j * rng.standard_normal(freq.size))
    return s21
