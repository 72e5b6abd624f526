"""Run configuration files.

A configuration is an INI file with a ``[common]`` section and one optional
section per command::

    [common]
    eta = 0.1
    s = 1
    omega_c = 3, 5, 10, 20
    temperature = 0.1

    [dynamics]
    stride = 10

Comments start with ``#`` or ``;``, also after a value. List-valued keys
define sweeps; every combination of ``eta``, ``s`` and
``omega_c`` is one parameter point. Unknown sections or keys are errors.
"""
from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field
from typing import Any, Callable

COMMANDS = ("dynamics", "steady", "spectrum", "heatspec", "fit", "validate")


class ConfigError(ValueError):
    pass


# --- value codecs -----------------------------------------------------------

def _float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None


def _floats(text: str) -> tuple[float, ...]:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise ConfigError("empty list")
    return tuple(_float(t) for t in items)


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"not an integer: {text!r}") from None


def _complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", ""))
    except ValueError:
        raise ConfigError(f"not a complex number: {text!r}") from None


def _fmt_float(x: float) -> str:
    return repr(float(x))


def _fmt_floats(xs) -> str:
    return ", ".join(_fmt_float(x) for x in xs)


def _fmt_complex(z: complex) -> str:
    return repr(complex(z)).strip("()")


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    dump: Callable[[Any], str]
    default: Any
    check: Callable[[Any], bool] = lambda v: True
    rule: str = ""


def _positive(v):
    vals = v if isinstance(v, tuple) else (v,)
    return all(math.isfinite(x) and x > 0 for x in vals)


def _nonneg(v):
    vals = v if isinstance(v, tuple) else (v,)
    return all(math.isfinite(x) and x >= 0 for x in vals)


FLOATS = dict(parse=_floats, dump=_fmt_floats)
FLOAT = dict(parse=_float, dump=_fmt_float)
INT = dict(parse=_int, dump=str)
TEXT = dict(parse=lambda t: t.strip(), dump=str)

SCHEMA: dict[str, dict[str, Key]] = {
    "common": {
        "eta": Key(**FLOATS, default=(0.1,), check=_nonneg, rule="non-negative"),
        "s": Key(**FLOATS, default=(1.0,), check=_positive, rule="positive"),
        "omega_c": Key(**FLOATS, default=(10.0,), check=_positive, rule="positive"),
        "omega0": Key(**FLOAT, default=1.0, check=_positive, rule="positive"),
        "temperature": Key(**FLOATS, default=(0.1,), check=_positive, rule="positive"),
        "t_max": Key(**FLOAT, default=50.0, check=_positive, rule="positive"),
        "dt": Key(**FLOAT, default=0.01, check=_positive, rule="positive"),
        "alpha0": Key(parse=_complex, dump=_fmt_complex, default=1 + 0j),
        "omega_lo": Key(**FLOAT, default=1e-6, check=_positive, rule="positive"),
        "max_panel_width": Key(**FLOAT, default=0.5, check=_positive, rule="positive"),
    },
    "dynamics": {
        "stride": Key(**INT, default=1, check=lambda v: v >= 1, rule=">= 1"),
        "solver": Key(**TEXT, default="volterra",
                      check=lambda v: v in ("volterra", "spectral"),
                      rule="volterra or spectral"),
    },
    "steady": {
        "sweep": Key(**TEXT, default="omega_c",
                     check=lambda v: v in ("omega_c", "eta", "s"),
                     rule="omega_c, eta or s"),
        "horizon": Key(**FLOAT, default=400.0, check=_positive, rule="positive"),
        "horizon_dt": Key(**FLOAT, default=0.025, check=_positive, rule="positive"),
    },
    "spectrum": {
        "n_modes": Key(**INT, default=300, check=lambda v: v >= 2, rule=">= 2"),
        "omega_max": Key(**FLOAT, default=0.0, check=_nonneg,
                         rule="non-negative (0 selects 40 max(omega_c, 1))"),
    },
    "heatspec": {
        "times": Key(parse=lambda t: () if not t.strip() else _floats(t),
                     dump=_fmt_floats, default=(), check=_positive, rule="positive"),
        "omega_plot_max": Key(**FLOAT, default=5.0, check=_positive, rule="positive"),
    },
    "fit": {
        "detunings": Key(**FLOATS, default=(0.01, 0.0136, 0.0186, 0.0253, 0.0344, 0.0469,
                                            0.0639, 0.0871, 0.119, 0.162, 0.22, 0.3),
                         check=_positive, rule="positive"),
    },
    "validate": {
        "dt_scale": Key(**FLOAT, default=1.0, check=_positive, rule="positive"),
    },
}


@dataclass
class RunConfig:
    """Parsed configuration: ``values[section][key]`` with defaults filled in."""

    values: dict[str, dict[str, Any]] = field(default_factory=dict)

    def __post_init__(self):
        for sec, keys in SCHEMA.items():
            got = self.values.setdefault(sec, {})
            for key, spec in keys.items():
                got.setdefault(key, spec.default)

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.values[section]

    @property
    def common(self) -> dict[str, Any]:
        return self.values["common"]

    def points(self) -> list[tuple[float, float, float]]:
        """``(eta, s, omega_c)`` combinations in config order."""
        c = self.common
        return [(e, s, w) for e in c["eta"] for s in c["s"] for w in c["omega_c"]]

    def set(self, section: str, key: str, text: str) -> None:
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        spec = SCHEMA[section][key]
        value = spec.parse(text)
        if not spec.check(value):
            raise ConfigError(f"[{section}] {key} must be {spec.rule}, got {text!r}")
        self.values[section][key] = value

    def override(self, item: str, command: str | None = None) -> None:
        """Apply ``key=value`` or ``section.key=value``. A bare key is looked
        up in ``[common]`` first, then in the command's section."""
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        name, text = (p.strip() for p in item.split("=", 1))
        if "." in name:
            section, key = name.split(".", 1)
        elif name in SCHEMA["common"]:
            section, key = "common", name
        elif command is not None and name in SCHEMA.get(command, {}):
            section, key = command, name
        else:
            raise ConfigError(f"unknown override key {name!r}")
        self.set(section, key, text)

    def check(self) -> None:
        """Cross-key constraints that single-key rules cannot express."""
        c = self.common
        if c["dt"] > c["t_max"]:
            raise ConfigError(f"dt={c['dt']} exceeds t_max={c['t_max']}")
        short = [t for t in self.values["heatspec"]["times"] if t < c["dt"]]
        if short:
            raise ConfigError(f"[heatspec] times {short} are shorter than dt={c['dt']}")

    def dumps(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        for sec, keys in SCHEMA.items():
            parser[sec] = {k: keys[k].dump(self.values[sec][k]) for k in keys}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    def echo(self) -> dict[str, dict[str, str]]:
        """Plain-string copy for JSON summaries."""
        return {sec: {k: SCHEMA[sec][k].dump(v) for k, v in vals.items()}
                for sec, vals in self.values.items()}

    def __eq__(self, other) -> bool:
        return isinstance(other, RunConfig) and self.values == other.values


def loads(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__",
                                       inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    cfg = RunConfig()
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser[section].items():
            cfg.set(section, key, raw)
    return cfg


def load(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return loads(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
