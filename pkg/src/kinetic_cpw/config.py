"""Run configuration: strict YAML/JSON schema with unit-suffixed keys.

Every physical quantity carries its unit in the key name (``w_um``,
``d_nm``, ``f_ghz``...).  Unknown keys are rejected.  The parsed config
keeps a normalized echo (same keys, defaults filled in, paths made
absolute) that can be written back out and parsed to reproduce a run.
"""
from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import yaml

from .chip import ChipDesign, ThicknessModel
from .em import CpwGeometry, Material
from .errors import ConfigError, DomainError
from .fit.power import AttenuationChain

MODES = ("design", "sweep", "mc", "synth", "fit", "tls")
SCHEMA_VERSION = 1

_MISSING = object()


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads exponent floats without a dot (``1e-07``)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |\.[0-9_]+(?:[eE][-+][0-9]+)?
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.X,
    ),
    list("-+0123456789."),
)


@dataclass(frozen=True)
class Field:
    kind: str
    required: bool = False
    default: Any = _MISSING
    check: Optional[Callable[[Any], bool]] = None
    rule: str = ""


def _pos(x):
    return x > 0


def _nonneg(x):
    return x >= 0


POSITIVE = dict(check=_pos, rule="must be > 0")
NONNEG = dict(check=_nonneg, rule="must be >= 0")

SCHEMA: Dict[str, Any] = {
    "mode": Field("str", check=lambda m: m in MODES, rule=f"must be one of {', '.join(MODES)}"),
    "seed": Field("int", default=0, **NONNEG),
    "chip": {
        "n_resonators": Field("int", required=True, check=lambda n: n >= 2, rule="must be >= 2"),
        "f_mean_ghz": Field("float", required=True, **POSITIVE),
        "f_gap_mhz": Field("float", required=True, **POSITIVE),
        "q_c_nominal": Field("float", default=7e5, **POSITIVE),
        "geom": {
            "w_um": Field("float", required=True, **POSITIVE),
            "s_um": Field("float", required=True, **POSITIVE),
            "d_nm": Field("float", required=True, **POSITIVE),
        },
    },
    "material": {
        "lambda0_nm": Field("float", required=True, **POSITIVE),
        "eps_r": Field("float", required=True, check=lambda e: e >= 1, rule="must be >= 1"),
        "temperature_mk": Field("float", default=13.0, **POSITIVE),
    },
    "thickness_model": {
        "sigma_d_rel": Field("float", **NONNEG),
        "sigma_d_nm": Field("float", **NONNEG),
        "gradient_d_nm_per_index": Field("float", default=0.0),
    },
    "chain": {
        "stages": Field("stages", default=[]),
        "cable_loss_db": Field("float", default=0.0, **NONNEG),
    },
    "mc": {
        "n_trials": Field("int", default=1000, check=lambda n: n >= 1, rule="must be >= 1"),
        "workers": Field("int", default=1, check=lambda n: n >= 1, rule="must be >= 1"),
    },
    "sweep": {
        "d_nm": Field("floats", default=[100.0, 200.0, 300.0], **POSITIVE),
        "sw_um": Field("pairs", default=[[7.0, 2.0], [6.0, 4.0], [5.0, 6.0], [4.0, 8.0], [3.0, 10.0]]),
        "sw_d_nm": Field("float", default=100.0, **POSITIVE),
        "n_trials": Field("int", check=lambda n: n >= 1, rule="must be >= 1"),
    },
    "optimize": {
        "footprint_um": Field("float", **POSITIVE),
        "d_nm": Field("float", **POSITIVE),
        "grid_step_um": Field("float", default=1.0, **POSITIVE),
        "s_min_um": Field("float", default=1.0, **POSITIVE),
        "s_max_um": Field("float", **POSITIVE),
    },
    "synth": {
        "qi": Field("float", default=2.5e6, **POSITIVE),
        "phi_rad": Field("float", default=0.0, check=lambda p: abs(p) < 1.5707963267948966, rule="must satisfy |phi| < pi/2"),
        "noise_sigma": Field("float", default=0.0, **NONNEG),
        "span_linewidths": Field("float", default=20.0, **POSITIVE),
        "points_per_resonance": Field("int", default=401, check=lambda n: n >= 20, rule="must be >= 20"),
        "background_points": Field("int", default=0, **NONNEG),
        "power_dbm": Field("float"),
        "amplitude": Field("float", default=1.0, **POSITIVE),
        "phase_rad": Field("float", default=0.0),
        "delay_ns": Field("float", default=0.0),
        "trace_file": Field("str", default="synth_trace.csv"),
    },
    "fit": {
        "traces": Field("paths", default=[]),
        "wing_fraction": Field("float", default=0.2, check=lambda x: 0 < x < 1, rule="must be in (0, 1)"),
        "min_depth": Field("float", default=0.01, check=lambda x: 0 < x < 1, rule="must be in (0, 1)"),
        "window_linewidths": Field("float", default=10.0, **POSITIVE),
        "joint_baseline": Field("bool", default=True),
        "power_reference": Field("str", default="source", check=lambda s: s in ("source", "chip"), rule="must be 'source' or 'chip'"),
        "impedance_factor": Field("float", default=1.0, **POSITIVE),
    },
    "tls": {
        "sweep_file": Field("path"),
        "frequency_ghz": Field("float", **POSITIVE),
        "temperature_mk": Field("float", **POSITIVE),
        "synthetic": {
            "f_delta0": Field("float", required=True, **POSITIVE),
            "n_c": Field("float", required=True, **POSITIVE),
            "q_others": Field("float", required=True, **POSITIVE),
            "n_min": Field("float", default=0.1, **POSITIVE),
            "n_max": Field("float", default=1e6, **POSITIVE),
            "n_points": Field("int", default=15, check=lambda n: n >= 5, rule="must be >= 5"),
            "rel_sigma": Field("float", default=0.01, **POSITIVE),
            "noise": Field("bool", default=False),
        },
    },
    "output": {
        "dir": Field("path", default="out"),
    },
}


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _coerce(fld: Field, value, path: str, base: Path):
    kind = fld.kind
    if kind == "float":
        if not _is_number(value):
            raise ConfigError(f"expected a number, got {value!r}", path)
        value = float(value)
        if value != value or value in (float("inf"), float("-inf")):
            raise ConfigError("must be finite", path)
    elif kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", path)
    elif kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", path)
    elif kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", path)
    elif kind == "path":
        if not isinstance(value, str):
            raise ConfigError(f"expected a path string, got {value!r}", path)
        value = str((base / value).resolve())
    elif kind == "paths":
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError("expected a list of path strings", path)
        value = [str((base / v).resolve()) for v in value]
    elif kind == "floats":
        if not isinstance(value, list) or not value or not all(_is_number(v) for v in value):
            raise ConfigError("expected a non-empty list of numbers", path)
        value = [float(v) for v in value]
        if fld.check and not all(fld.check(v) for v in value):
            raise ConfigError(f"every entry {fld.rule}", path)
        return value
    elif kind == "pairs":
        ok = isinstance(value, list) and value and all(
            isinstance(p, list) and len(p) == 2 and all(_is_number(v) and v > 0 for v in p) for p in value
        )
        if not ok:
            raise ConfigError("expected a non-empty list of positive [s, w] pairs", path)
        return [[float(a), float(b)] for a, b in value]
    elif kind == "stages":
        if not isinstance(value, list):
            raise ConfigError("expected a list of {label, attenuation_db} entries", path)
        out = []
        for i, stage in enumerate(value):
            p = f"{path}[{i}]"
            if not isinstance(stage, dict):
                raise ConfigError("expected a mapping with label and attenuation_db", p)
            unknown = set(stage) - {"label", "attenuation_db"}
            if unknown:
                raise ConfigError(f"unknown key {sorted(unknown)[0]!r}", f"{p}.{sorted(unknown)[0]}")
            if not isinstance(stage.get("label"), str):
                raise ConfigError("expected a string", f"{p}.label")
            att = stage.get("attenuation_db", _MISSING)
            if att is _MISSING:
                raise ConfigError("missing required key", f"{p}.attenuation_db")
            if not _is_number(att) or att < 0:
                raise ConfigError("must be a number >= 0", f"{p}.attenuation_db")
            out.append({"label": stage["label"], "attenuation_db": float(att)})
        return out
    else:  # pragma: no cover - schema typo
        raise AssertionError(kind)
    if fld.check is not None and not fld.check(value):
        raise ConfigError(f"{fld.rule}, got {value!r}", path)
    return value


def _validate(schema: dict, data, path: str, base: Path, errors: Optional[list] = None) -> dict:
    """Check ``data`` against ``schema``; every problem found is reported at once."""
    top = errors is None
    errors = [] if top else errors
    out = {}
    if not isinstance(data, dict):
        errors.append(ConfigError("expected a mapping", path or "<root>"))
        data = {}
    for key in data:
        if key not in schema:
            errors.append(ConfigError("unknown key", f"{path}.{key}" if path else str(key)))
    for key, fld in schema.items():
        p = f"{path}.{key}" if path else key
        if isinstance(fld, dict):
            if key in data:
                out[key] = _validate(fld, data[key], p, base, errors)
            continue
        if key in data:
            try:
                out[key] = _coerce(fld, data[key], p, base)
            except ConfigError as exc:
                errors.append(exc)
        elif fld.required:
            errors.append(ConfigError("missing required key", p))
        elif fld.default is not _MISSING:
            default = copy.deepcopy(fld.default)
            if fld.kind == "path":
                default = str((base / default).resolve())
            out[key] = default
    if top and errors:
        raise ConfigError.collect(errors)
    return out


@dataclass
class RunConfig:
    mode: Optional[str]
    seed: int
    echo: dict
    chip: Optional[ChipDesign] = None
    material: Optional[Material] = None
    chain: AttenuationChain = field(default_factory=AttenuationChain)
    sections: dict = field(default_factory=dict)

    @property
    def output_dir(self) -> Path:
        return Path(self.sections["output"]["dir"])

    def section(self, name: str) -> dict:
        return self.sections.get(name) or _validate(SCHEMA[name], {}, name, Path.cwd())

    def si(self) -> dict:
        """Resolved physical inputs in SI units (for reports; not re-parseable)."""
        out: dict = {"mode": self.mode, "seed": self.seed}
        if self.material is not None:
            m = self.material
            out["material"] = {"lambda0_m": m.lambda0, "eps_r": m.eps_r, "temperature_k": m.temperature}
        if self.chip is not None:
            c, g = self.chip, self.chip.geom
            out["chip"] = {
                "n_resonators": c.n_resonators,
                "f_mean_hz": c.f_mean,
                "f_gap_hz": c.f_gap,
                "f_target_hz": c.target_frequencies.tolist(),
                "q_c_nominal": c.q_c_nominal,
                "geom": {"w_m": g.w, "s_m": g.s, "d_m": g.d},
            }
            tm = self.thickness_model()
            out["thickness_model"] = {"d_nominal_m": tm.d_nominal, "sigma_d_m": tm.sigma_d, "gradient_d_m_per_index": tm.gradient_d}
        out["chain"] = {"stages_db": [list(s) for s in self.chain.stages], "cable_loss_db": self.chain.cable_loss, "total_db": self.chain.total_db}
        return out

    def thickness_model(self, d_nominal: Optional[float] = None) -> ThicknessModel:
        """Thickness disorder at ``d_nominal`` [m] (default: the chip's film)."""
        tm = self.section("thickness_model")
        d_chip = self.chip.geom.d if self.chip is not None else None
        d = d_nominal if d_nominal is not None else d_chip
        gradient = tm["gradient_d_nm_per_index"] / 1e9
        if "sigma_d_nm" in tm and d_nominal is not None and d_chip is not None and d_nominal != d_chip:
            # absolute disorder is specified at the chip film; keep it relative elsewhere
            return ThicknessModel.relative(d, tm["sigma_d_nm"] / 1e9 / d_chip, gradient)
        if "sigma_d_nm" in tm:
            return ThicknessModel(d, tm["sigma_d_nm"] / 1e9, gradient)
        return ThicknessModel.relative(d, tm.get("sigma_d_rel", 0.02), gradient)


def _build(mode: Optional[str], data: dict, base: Path) -> RunConfig:
    norm = _validate(SCHEMA, data, "", base)
    tm = norm.get("thickness_model", {})
    if "sigma_d_rel" in tm and "sigma_d_nm" in tm:
        raise ConfigError("give either sigma_d_rel or sigma_d_nm, not both", "thickness_model.sigma_d_nm")
    if "thickness_model" in norm and not ("sigma_d_rel" in tm or "sigma_d_nm" in tm):
        tm["sigma_d_rel"] = 0.02
    if mode is None:
        mode = norm.get("mode")
    norm["mode"] = mode
    norm.setdefault("output", _validate(SCHEMA["output"], {}, "output", base))

    chip = material = None
    if "material" in norm:
        m = norm["material"]
        try:
            material = Material(m["lambda0_nm"] / 1e9, m["eps_r"], m["temperature_mk"] / 1e3)
        except DomainError as exc:
            raise ConfigError(str(exc), "material") from None
    if "chip" in norm:
        c = norm["chip"]
        if "geom" not in c:
            raise ConfigError("missing required key", "chip.geom")
        g = c["geom"]
        if material is None:
            raise ConfigError("missing required section (needed by chip)", "material")
        if g["d_nm"] / 1e9 >= g["w_um"] / 1e6:
            raise ConfigError("film thickness must be smaller than the center width", "chip.geom.d_nm")
        geom = CpwGeometry(g["w_um"] / 1e6, g["s_um"] / 1e6, g["d_nm"] / 1e9)
        try:
            chip = ChipDesign(c["n_resonators"], c["f_mean_ghz"] * 1e9, c["f_gap_mhz"] * 1e6, geom, material, c["q_c_nominal"])
        except DomainError as exc:
            raise ConfigError(str(exc), "chip") from None
    chain = AttenuationChain()
    if "chain" in norm:
        ch = norm["chain"]
        chain = AttenuationChain(tuple((s["label"], s["attenuation_db"]) for s in ch["stages"]), ch["cable_loss_db"])

    cfg = RunConfig(mode, norm["seed"], norm, chip, material, chain, norm)
    if mode is not None:
        _check_mode(cfg)
    return cfg


def _check_mode(cfg: RunConfig):
    mode, s = cfg.mode, cfg.sections
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}", "mode")
    if mode in ("design", "sweep", "mc", "synth"):
        for name in ("chip", "material"):
            if name not in s:
                raise ConfigError(f"missing required section for mode {mode!r}", name)
    if mode == "fit" and not s.get("fit", {}).get("traces"):
        raise ConfigError("fit mode needs at least one trace (config or --trace)", "fit.traces")
    if mode == "tls":
        tls = s.get("tls")
        if tls is None:
            raise ConfigError("missing required section for mode 'tls'", "tls")
        if ("sweep_file" in tls) == ("synthetic" in tls):
            raise ConfigError("give exactly one of sweep_file or synthetic", "tls")
        if "frequency_ghz" not in tls:
            raise ConfigError("missing required key", "tls.frequency_ghz")
        if "temperature_mk" not in tls and cfg.material is None:
            raise ConfigError("missing required key (or a material section)", "tls.temperature_mk")


def load_mapping(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        data = json.loads(text) if path.suffix.lower() == ".json" else yaml.load(text, Loader=_Loader)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"not valid {'JSON' if path.suffix.lower() == '.json' else 'YAML'}: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", "<root>")
    return data


def parse_mapping(data: dict, mode: Optional[str] = None, base: Optional[Path] = None, overrides: Optional[dict] = None) -> RunConfig:
    """Validate an already-loaded mapping.  ``overrides`` maps dotted keys to values."""
    data = copy.deepcopy(data)
    for dotted, value in (overrides or {}).items():
        node = data
        *parents, leaf = dotted.split(".")
        for key in parents:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError("expected a mapping", key)
        node[leaf] = value
    return _build(mode, data, Path(base) if base is not None else Path.cwd())


def parse_config(path, mode: Optional[str] = None, overrides: Optional[dict] = None) -> RunConfig:
    """Read and validate a YAML (or ``.json``) config file.

    Relative paths inside the file resolve against the file's directory.
    """
    path = Path(path)
    return parse_mapping(load_mapping(path), mode=mode, base=path.resolve().parent, overrides=overrides)
