"""Command-line front end.

    kinetic-cpw <mode> --config FILE [--out DIR] [--seed N] [--trials N] [--trace PATH ...]

Each run writes ``report.json`` (config echo, results, provenance) and the
plot tables for its mode into the output directory.  Exit codes: 0 success,
2 config error, 3 data error, 4 fit failed to converge.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import platform
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import scipy

from . import __version__
from .chip import (
    MHZ,
    RNG_ALGORITHM,
    ChipDesign,
    Resonance,
    linear_fit_mse,
    optimize_geometry,
    run_monte_carlo,
    segmented_grid,
    synthesize_s21,
)
from .config import MODES, SCHEMA_VERSION, RunConfig, load_mapping, parse_mapping
from .em import CpwGeometry
from .errors import ConfigError, ConvergenceError, DataError, DomainError
from .fit.power import photon_number, power_at_chip
from .fit.resonance import Baseline, S21Trace, fit_all
from .fit.tls import fit_tls, tls_qi
from .io import dumps_json, read_table, read_trace, write_json, write_table, write_trace
from .kinetic import kinetic_fraction, kinetic_params
from .resonator import ResonatorModel, frequency_shift, thickness_sensitivity

TOOL = "kinetic-cpw"
REPORT_FORMAT = 1
REPORT_SUFFIX = "_report.json"

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_CONVERGENCE, EXIT_INTERNAL = 0, 2, 3, 4, 1


# -- modes -------------------------------------------------------------------

def _run_design(cfg: RunConfig, out: Path) -> dict:
    chip = cfg.chip
    targets = chip.target_frequencies
    lengths = chip.lengths(kinetic_aware=True)
    predicted = chip.frequencies(chip.geom.d, lengths)
    naive_lengths = chip.lengths(kinetic_aware=False)
    naive = chip.frequencies(chip.geom.d, naive_lengths)
    slope, intercept, mse = linear_fit_mse(predicted / MHZ)
    fitted_line = (intercept + slope * np.arange(chip.n_resonators)) * MHZ

    centre = ResonatorModel.from_target(chip.geom, chip.mat, chip.f_mean, kinetic_aware=False)
    kp = kinetic_params(chip.geom, chip.mat)
    write_table(
        out / "design_frequencies.csv",
        ["index", "target_hz", "length_m", "f_predicted_hz", "f_linear_fit_hz", "length_geometric_m", "f_geometric_design_hz"],
        [[i, float(targets[i]), float(lengths[i]), float(predicted[i]), float(fitted_line[i]), float(naive_lengths[i]), float(naive[i])]
         for i in range(chip.n_resonators)],
    )
    return {
        "lengths_m": lengths,
        "f_target_hz": targets,
        "f_predicted_hz": predicted,
        "linear_fit": {"slope_mhz_per_index": slope, "intercept_mhz": intercept, "mse_mhz2": mse},
        "mse_vs_targets_mhz2": float(np.mean(((predicted - targets) / MHZ) ** 2)),
        "geometric_design": {
            "lengths_m": naive_lengths,
            "f_actual_hz": naive,
            "delta_f_hz": naive - targets,
        },
        "line": {
            "c_per_len_f_per_m": centre.tl.c_per_len,
            "lm_per_len_h_per_m": centre.tl.lm_per_len,
            "lk_per_len_h_per_m": centre.tl.lk_per_len,
            "kinetic_fraction": centre.kinetic_fraction,
            "impedance_ohm": centre.tl.impedance,
            "phase_velocity_m_per_s": centre.tl.phase_velocity,
            "lambda_eff_m": kp.lambda_eff,
            "g_factor": kp.g_factor,
            "valid_thin_film": kp.valid_thin_film,
        },
        "center_resonator": {
            "delta_f_hz": frequency_shift(centre),
            "df_dd_hz_per_m": thickness_sensitivity(centre),
        },
    }


def _n_trials(cfg: RunConfig, section: str) -> int:
    sec = cfg.section(section)
    return sec.get("n_trials") or cfg.section("mc")["n_trials"]


def _run_mc(cfg: RunConfig, out: Path) -> dict:
    mc = cfg.section("mc")
    tm = cfg.thickness_model()
    result = run_monte_carlo(cfg.chip, tm, mc["n_trials"], cfg.seed, workers=mc["workers"])
    write_table(
        out / "mc_samples.csv",
        ["trial", "mse_mhz2", "mean_shift_mhz"],
        ([i, float(m), float(s)] for i, (m, s) in enumerate(zip(result.mse_samples, result.delta_f_samples))),
    )
    summary = result.summary()
    summary["thickness_model"] = {"d_nominal_m": tm.d_nominal, "sigma_d_m": tm.sigma_d, "gradient_d_m_per_index": tm.gradient_d}
    return summary


def _run_sweep(cfg: RunConfig, out: Path) -> dict:
    chip, sweep = cfg.chip, cfg.section("sweep")
    n_trials = _n_trials(cfg, "sweep")
    workers = cfg.section("mc")["workers"]

    by_d = []
    for d_nm in sweep["d_nm"]:
        d = d_nm / 1e9
        res = run_monte_carlo(chip, cfg.thickness_model(d), n_trials, cfg.seed, workers)
        geom = chip.geom.with_thickness(d)
        centre = ResonatorModel.from_target(geom, chip.mat, chip.f_mean, kinetic_aware=False)
        by_d.append([d_nm, kinetic_fraction(geom, chip.mat), res.mean_mse, float(np.std(res.mse_samples)), frequency_shift(centre) / MHZ])
    write_table(out / "mse_vs_d.csv", ["d_nm", "kinetic_fraction", "mse_mhz2_mean", "mse_mhz2_std", "delta_f_mhz"], by_d)

    by_sw = []
    d = sweep["sw_d_nm"] / 1e9
    for s_um, w_um in sweep["sw_um"]:
        geom = CpwGeometry(w_um / 1e6, s_um / 1e6, d)
        sw_chip = ChipDesign(chip.n_resonators, chip.f_mean, chip.f_gap, geom, chip.mat, chip.q_c_nominal)
        res = run_monte_carlo(sw_chip, cfg.thickness_model(d), n_trials, cfg.seed, workers)
        centre = ResonatorModel.from_target(geom, chip.mat, chip.f_mean, kinetic_aware=False)
        by_sw.append([s_um, w_um, kinetic_fraction(geom, chip.mat), res.mean_mse, float(np.std(res.mse_samples)), frequency_shift(centre) / MHZ])
    write_table(out / "mse_vs_sw.csv", ["s_um", "w_um", "kinetic_fraction", "mse_mhz2_mean", "mse_mhz2_std", "delta_f_mhz"], by_sw)

    results = {
        "n_trials": n_trials,
        "mse_vs_d": [dict(zip(("d_nm", "kinetic_fraction", "mse_mhz2_mean", "mse_mhz2_std", "delta_f_mhz"), r)) for r in by_d],
        "mse_vs_sw": [dict(zip(("s_um", "w_um", "kinetic_fraction", "mse_mhz2_mean", "mse_mhz2_std", "delta_f_mhz"), r)) for r in by_sw],
    }
    if "optimize" in cfg.sections:
        opt = cfg.sections["optimize"]
        total = opt.get("footprint_um", chip.geom.footprint * 1e6) / 1e6
        d_opt = opt.get("d_nm", chip.geom.d * 1e9) / 1e9
        s_max = opt["s_max_um"] / 1e6 if "s_max_um" in opt else None
        ranked = optimize_geometry(total, d_opt, chip.mat, opt["grid_step_um"] / 1e6, opt["s_min_um"] / 1e6, s_max)
        write_table(out / "optimize.csv", ["s_um", "w_um", "kinetic_fraction"], [[s * 1e6, w * 1e6, x] for s, w, x in ranked])
        s, w, x = ranked[0]
        results["optimize"] = {"best_s_um": s * 1e6, "best_w_um": w * 1e6, "kinetic_fraction": x, "n_candidates": len(ranked)}
    return results


def _run_synth(cfg: RunConfig, out: Path) -> dict:
    chip, syn = cfg.chip, cfg.section("synth")
    f0 = chip.frequencies(chip.geom.d, chip.lengths(kinetic_aware=True))
    resonances = [Resonance(float(f), syn["qi"], chip.q_c_nominal, syn["phi_rad"]) for f in f0]
    background = None
    if syn["background_points"] > 0:
        pad = 10 * max(r.linewidth for r in resonances)
        background = np.linspace(f0[0] - pad - 0.5 * chip.f_gap, f0[-1] + pad + 0.5 * chip.f_gap, syn["background_points"])
    freq = segmented_grid(resonances, syn["span_linewidths"], syn["points_per_resonance"], background)
    s21 = synthesize_s21(None, freq, resonances)
    distortion = Baseline(syn["amplitude"], 0.0, syn["phase_rad"], syn["delay_ns"] / 1e9, float(freq[0]))
    s21 = s21 * distortion(freq)
    if syn["noise_sigma"] > 0:
        rng = np.random.default_rng(cfg.seed)
        s21 = s21 + syn["noise_sigma"] * (rng.standard_normal(freq.size) + 1j * rng.standard_normal(freq.size))
    trace_path = out / syn["trace_file"]
    write_trace(trace_path, S21Trace(freq, s21, syn.get("power_dbm")))
    return {
        "trace_file": str(trace_path),
        "n_points": int(freq.size),
        "resonances": [{"f0_hz": r.f0, "q_i": r.qi, "q_c": r.qc, "phi_rad": r.phi, "q_loaded": r.q_loaded} for r in resonances],
    }


def _run_fit(cfg: RunConfig, out: Path) -> dict:
    fit = cfg.section("fit")
    rows, traces = [], []
    for index, path in enumerate(fit["traces"]):
        trace = read_trace(path)
        fits = fit_all(
            trace,
            window_widths=fit["window_linewidths"],
            min_depth=fit["min_depth"],
            fit_baseline=fit["joint_baseline"],
            wing_fraction=fit["wing_fraction"],
        )
        p_chip = None
        if trace.power_dbm is not None:
            p_chip = trace.power_dbm if fit["power_reference"] == "chip" else power_at_chip(trace.power_dbm, cfg.chain)
        entries = []
        for r in fits:
            entry = r.as_dict()
            n = float("nan")
            if p_chip is not None:
                n = photon_number(p_chip, r.f0, r.Q, r.Qc, fit["impedance_factor"])
                entry["power_chip_dbm"] = p_chip
                entry["n_photons"] = n
            entries.append(entry)
            rows.append([index, r.f0, r.Q, r.Qc, r.phi, r.Qi, r.uncertainties["Qi"], r.uncertainties["f0"],
                         float("nan") if p_chip is None else float(p_chip), n])
        traces.append({"trace": path, "power_dbm": trace.power_dbm, "resonances": entries})
    write_table(
        out / "fits.csv",
        ["trace_index", "f0_hz", "q_loaded", "q_c", "phi_rad", "q_i", "q_i_sigma", "f0_sigma_hz", "power_chip_dbm", "n_photons"],
        rows,
    )
    return {"traces": traces}


def _tls_data(cfg: RunConfig):
    tls = cfg.section("tls")
    if "synthetic" in tls:
        syn = tls["synthetic"]
        n = np.logspace(np.log10(syn["n_min"]), np.log10(syn["n_max"]), syn["n_points"])
        qi = tls_qi(n, syn["f_delta0"], syn["n_c"], syn["q_others"], _tls_temperature(cfg), tls["frequency_ghz"] * 1e9)
        sigma = syn["rel_sigma"] * qi
        if syn["noise"]:
            qi = qi + sigma * np.random.default_rng(cfg.seed).standard_normal(n.size)
        return n, qi, sigma
    table = read_table(tls["sweep_file"])
    for col in ("n_photons", "q_i", "q_i_sigma"):
        if col not in table:
            raise DataError(f"{tls['sweep_file']}: missing column {col!r}", line=1)
    n, qi, sigma = table["n_photons"], table["q_i"], table["q_i_sigma"]
    keep = np.isfinite(n) & np.isfinite(qi) & np.isfinite(sigma)
    return n[keep], qi[keep], sigma[keep]


def _tls_temperature(cfg: RunConfig) -> float:
    tls = cfg.section("tls")
    if "temperature_mk" in tls:
        return tls["temperature_mk"] / 1e3
    return cfg.material.temperature


def _run_tls(cfg: RunConfig, out: Path) -> dict:
    n, qi, sigma = _tls_data(cfg)
    result = fit_tls(n, qi, sigma, _tls_temperature(cfg), cfg.section("tls")["frequency_ghz"] * 1e9)
    write_table(
        out / "qi_vs_n.csv",
        ["n_photons", "q_i", "q_i_sigma", "q_i_fit"],
        [[float(a), float(b), float(c), float(d)] for a, b, c, d in zip(n, qi, sigma, result.qi(n))],
    )
    curve_n = np.logspace(np.log10(n.min()), np.log10(n.max()), 200)
    write_table(out / "qi_fit_curve.csv", ["n_photons", "q_i_fit"], [[float(a), float(b)] for a, b in zip(curve_n, result.qi(curve_n))])
    summary = result.as_dict()
    summary["q_i_at_one_photon"] = float(result.qi(1.0))
    summary["n_points"] = int(n.size)
    return summary


RUNNERS: Dict[str, Callable[[RunConfig, Path], dict]] = {
    "design": _run_design,
    "sweep": _run_sweep,
    "mc": _run_mc,
    "synth": _run_synth,
    "fit": _run_fit,
    "tls": _run_tls,
}


# -- driver ------------------------------------------------------------------

def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def run(mode: str, cfg: RunConfig) -> dict:
    """Execute ``mode`` and write its report and tables; returns the report."""
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    started = _now()
    results = RUNNERS[mode](cfg, out)
    report = {
        "tool": TOOL,
        "version": __version__,
        "report_format": REPORT_FORMAT,
        "config_schema": SCHEMA_VERSION,
        "mode": mode,
        "config": cfg.echo,
        "config_si": cfg.si(),
        "results": results,
        "provenance": {
            "seed": cfg.seed,
            "rng": RNG_ALGORITHM,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
            "started_utc": started,
            "finished_utc": _now(),
        },
    }
    write_json(out / f"{mode}{REPORT_SUFFIX}", report)
    return report


def _overrides(args) -> dict:
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.trials is not None:
        over["mc.n_trials"] = args.trials
    if args.out is not None:
        over["output.dir"] = str(Path(args.out).resolve())
    if args.trace:
        over["fit.traces"] = [str(Path(t).resolve()) for t in args.trace]
    return over


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog=TOOL, description="Kinetic-inductance-aware CPW resonator design and S21 analysis.")
    p.add_argument("--version", action="version",
                   version=f"{TOOL} {__version__} (report format {REPORT_FORMAT}, config schema {SCHEMA_VERSION})")
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", required=True, help="YAML or JSON run configuration")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--seed", type=int, help="random seed (overrides seed)")
    p.add_argument("--trials", type=int, help="Monte-Carlo trials (overrides mc.n_trials and sweep.n_trials)")
    p.add_argument("--trace", nargs="+", help="trace CSV files for fit mode (override fit.traces)")
    return p


def _error(kind: str, exc: Exception, code: int) -> int:
    block = {"error": {"type": kind, "message": str(exc), "exit_code": code}}
    if isinstance(exc, ConfigError) and exc.path:
        block["error"]["key"] = exc.path
        block["error"]["fields"] = [{"key": k, "message": m} for k, m in exc.errors]
    if isinstance(exc, DataError) and exc.line is not None:
        block["error"]["line"] = exc.line
    if isinstance(exc, ConvergenceError) and exc.best is not None:
        block["error"]["best"] = getattr(exc.best, "params", None)
    sys.stderr.write(dumps_json(block))
    return code


def main(argv: Optional[List[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config_path = Path(args.config)
        data = load_mapping(config_path)
        if args.trials is not None and "sweep" in data and isinstance(data["sweep"], dict):
            data["sweep"] = dict(data["sweep"], n_trials=args.trials)
        cfg = parse_mapping(data, mode=args.mode, base=config_path.resolve().parent, overrides=_overrides(args))
        report = run(args.mode, cfg)
    except ConfigError as exc:
        return _error("config", exc, EXIT_CONFIG)
    except DataError as exc:
        return _error("data", exc, EXIT_DATA)
    except ConvergenceError as exc:
        return _error("convergence", exc, EXIT_CONVERGENCE)
    except DomainError as exc:
        return _error("config", exc, EXIT_CONFIG)
    except Exception as exc:  # pragma: no cover - last-resort reporting
        return _error("internal", exc, EXIT_INTERNAL)
    print(json.dumps({"mode": args.mode, "report": str(cfg.output_dir / f"{args.mode}{REPORT_SUFFIX}")}))
    return EXIT_OK if report else EXIT_INTERNAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
