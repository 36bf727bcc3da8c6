"""Line-oriented run configuration: parsing, validation, serialization.

The format is `section.key = value`, one per line, with `#` comments and
blank lines ignored.  Sections are `system`, `etm`, `sim` and `initial`;
unknown keys are errors (no silent defaults for misspellings).  Matrices
for the custom preset are written row-major with `;` between rows and `,`
between entries; complex entries use Python syntax (`1+2j`).
"""

from dataclasses import dataclass, field

import numpy as np

from . import model
from .errors import ConfigParseError, ConfigurationError, DomainError
from .etm import ETMSpec, ETMVariant

__all__ = ["RunConfig", "parse_config", "serialize_config", "load_config"]

# section -> key -> type tag
_SCHEMA = {
    "system": {
        "preset": "str",
        "n_modes": "int",
        "gamma": "float",
        "feedback_gain": "float",
        "b_amp": "float",
        "b_lo": "float",
        "b_hi": "float",
        "G": "float",
        "H": "float",
        "f": "float",
        "F2": "float",
        "alpha": "float",
        "A": "matrix",
        "B": "matrix",
        "F": "matrix",
        "gram": "matrix",
        "gram_U": "matrix",
    },
    "etm": {
        "variant": "str",
        "epsilon": "float",
        "tau_max": "float",
        "h": "float",
        "ell_max": "int",
        "allow_zeno": "bool",
    },
    "sim": {
        "t_end": "float",
        "dt_out": "float",
        "dt_scan": "float",
        "tol_event": "float",
        "dt_min": "float",
        "seed": "int",
    },
    "initial": {
        "preset": "str",
        "coeffs": "complex_list",
    },
}

_PRESETS = ("heat_rod", "heat_cascade", "beam", "custom_modal")


@dataclass
class RunConfig:
    """Validated key/value record of one run; only explicit keys are stored."""

    system: dict = field(default_factory=dict)
    etm: dict = field(default_factory=dict)
    sim: dict = field(default_factory=dict)
    initial: dict = field(default_factory=dict)

    def section(self, name):
        return getattr(self, name)


def _parse_value(kind, raw, line_no):
    raw = raw.strip()
    try:
        if kind == "str":
            return raw
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            if raw.lower() in ("true", "yes", "on", "1"):
                return True
            if raw.lower() in ("false", "no", "off", "0"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "complex_list":
            return [complex(tok.strip().replace(" ", "")) for tok in raw.split(",")]
        if kind == "matrix":
            rows = [r for r in raw.split(";") if r.strip()]
            mat = [[complex(tok.strip().replace(" ", "")) for tok in r.split(",")]
                   for r in rows]
            width = len(mat[0])
            if any(len(r) != width for r in mat):
                raise ValueError("ragged matrix literal")
            return np.array(mat, dtype=complex)
    except ValueError as exc:
        raise ConfigParseError(f"cannot parse value {raw!r}: {exc}", line_no) from None
    raise ConfigParseError(f"unknown value kind {kind!r}", line_no)


def parse_config(text):
    """Parse configuration text into a RunConfig, validating every key."""
    cfg = RunConfig()
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigParseError(f"expected 'section.key = value', got {stripped!r}",
                                   line_no)
        lhs, rhs = stripped.split("=", 1)
        lhs = lhs.strip()
        if "." not in lhs:
            raise ConfigParseError(f"key {lhs!r} is missing its section", line_no)
        section, key = lhs.split(".", 1)
        if section not in _SCHEMA:
            raise ConfigParseError(f"unknown section {section!r}", line_no)
        if key not in _SCHEMA[section]:
            raise ConfigParseError(f"unknown key {section}.{key}", line_no)
        if key in cfg.section(section):
            raise ConfigParseError(f"duplicate key {section}.{key}", line_no)
        cfg.section(section)[key] = _parse_value(_SCHEMA[section][key], rhs, line_no)
    _validate(cfg)
    return cfg


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


def _validate(cfg):
    preset = cfg.system.get("preset")
    if preset is None:
        raise ConfigParseError("system.preset is required")
    if preset not in _PRESETS:
        raise ConfigParseError(
            f"system.preset must be one of {_PRESETS}, got {preset!r}")
    if preset == "custom_modal":
        for key in ("A", "B", "F"):
            if key not in cfg.system:
                raise ConfigParseError(f"custom_modal requires system.{key}")
    if "variant" in cfg.etm:
        try:
            build_etm_spec(cfg)
        except (ConfigurationError, ValueError) as exc:
            raise ConfigParseError(f"etm section invalid: {exc}") from None
    for key in ("t_end", "dt_out", "dt_scan", "tol_event", "dt_min"):
        if key in cfg.sim and not cfg.sim[key] > 0.0:
            raise ConfigParseError(f"sim.{key} must be positive")
    # constructing the system exercises the builders' own validation
    try:
        build_system(cfg)
    except (DomainError, ValueError) as exc:
        raise ConfigParseError(f"system section invalid: {exc}") from None


def _fmt_value(kind, value):
    if kind == "matrix":
        return "; ".join(
            ", ".join(_fmt_complex(v) for v in row) for row in np.atleast_2d(value))
    if kind == "complex_list":
        return ", ".join(_fmt_complex(v) for v in value)
    if kind == "bool":
        return "true" if value else "false"
    if kind == "float":
        return f"{value:.12g}"
    return str(value)


def _fmt_complex(v):
    v = complex(v)
    if v.imag == 0.0:
        return f"{v.real:.12g}"
    return f"{v.real:.12g}{'+' if v.imag >= 0 else '-'}{abs(v.imag):.12g}j"


def serialize_config(cfg):
    """Canonical text form; parse_config(serialize_config(cfg)) == cfg."""
    lines = []
    for section in ("system", "etm", "sim", "initial"):
        for key in _SCHEMA[section]:
            if key in cfg.section(section):
                val = _fmt_value(_SCHEMA[section][key], cfg.section(section)[key])
                lines.append(f"{section}.{key} = {val}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# building runtime objects from a config

_SYSTEM_DEFAULTS = {
    "heat_rod": {"n_modes": 10},
    "heat_cascade": {"n_modes": 20, "b_amp": 5.0, "b_lo": 0.4, "b_hi": 0.6,
                     "G": 0.5, "H": 1.0, "f": -1.0, "F2": -2.5},
    "beam": {"n_modes": 15, "gamma": 1.0 / 15.0, "feedback_gain": 1.0},
}


def build_system(cfg):
    """ModalSystem named by system.preset with the configured parameters."""
    preset = cfg.system["preset"]
    params = dict(_SYSTEM_DEFAULTS.get(preset, {}))
    for key, val in cfg.system.items():
        if key not in ("preset", "alpha", "A", "B", "F", "gram", "gram_U"):
            params[key] = val
    if preset == "heat_rod":
        return model.build_heat_rod(params["n_modes"])
    if preset == "heat_cascade":
        return model.build_heat_cascade(
            params["n_modes"], b_amp=params["b_amp"], b_lo=params["b_lo"],
            b_hi=params["b_hi"], G=params["G"], H=params["H"], f=params["f"],
            F2=params["F2"])
    if preset == "beam":
        return model.build_beam(params["n_modes"], params["gamma"],
                                feedback_gain=params["feedback_gain"])
    A = cfg.system["A"]
    B = cfg.system["B"]
    F = cfg.system["F"]
    n, m = A.shape[0], np.atleast_2d(B).shape[1]
    gram = cfg.system.get("gram", np.eye(n))
    gram_U = cfg.system.get("gram_U", np.eye(m))
    return model.ModalSystem(A, B, F, gram, gram_U, name="custom_modal")


def splitting_abscissa(cfg, sys):
    """Configured decomposition abscissa, defaulting per preset."""
    if "alpha" in cfg.system:
        return cfg.system["alpha"]
    if sys.name == "beam":
        return model.default_beam_alpha(sys.meta["gamma"])
    return -1.0


def build_etm_spec(cfg):
    """ETMSpec from the etm (rule) and sim (tolerance) sections."""
    if "variant" not in cfg.etm:
        raise ConfigurationError("etm.variant is required")
    kwargs = {}
    for key in ("epsilon", "tau_max", "h", "ell_max", "allow_zeno"):
        if key in cfg.etm:
            kwargs[key] = cfg.etm[key]
    for cfg_key, spec_key in (("dt_scan", "dt_scan"), ("tol_event", "tol_event"),
                              ("dt_min", "dt_min")):
        if cfg_key in cfg.sim:
            kwargs[spec_key] = cfg.sim[cfg_key]
    return ETMSpec(ETMVariant(cfg.etm["variant"]), **kwargs)


def initial_state(cfg, sys):
    """Initial modal coefficients from initial.coeffs or a named preset."""
    if "coeffs" in cfg.initial:
        return sys.as_state(cfg.initial["coeffs"])
    preset = cfg.initial.get("preset", "paper-ic")
    if sys.name == "beam":
        return model.beam_initial_preset(sys, preset)
    if preset == "paper-ic":
        x0 = np.zeros(sys.n_state, dtype=complex)
        if sys.name == "heat_cascade":
            # flat unit temperature and ODE state -1
            x0[0] = 1.0
            x0[-1] = -1.0
        else:
            x0[0] = 1.0
        return x0
    if preset.startswith("mode:"):
        k = int(preset.split(":", 1)[1])
        if not 0 <= k < sys.n_state:
            raise ConfigParseError(f"initial preset mode index {k} out of range")
        x0 = np.zeros(sys.n_state, dtype=complex)
        x0[k] = 1.0
        return x0
    raise ConfigParseError(f"unknown initial preset {preset!r}")


def sim_params(cfg):
    """(t_end, dt_out, seed) with defaults for the optional entries."""
    if "t_end" not in cfg.sim:
        raise ConfigParseError("sim.t_end is required for simulation")
    return (cfg.sim["t_end"], cfg.sim.get("dt_out", 1e-2), cfg.sim.get("seed", 0))
