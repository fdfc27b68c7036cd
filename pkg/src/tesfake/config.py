"""Profile and scenario files: sectioned ``key = value`` text, SI units."""

import configparser
import hashlib
from dataclasses import fields
from importlib import resources
from pathlib import Path

from .detector import Detector
from .readout import ReadoutParams
from .tes import BiasPoint, TesParams


class ConfigError(ValueError):
    """Malformed or incomplete configuration file."""


def bundled_profile(name="paper_like"):
    return resources.files("tesfake") / "profiles" / f"{name}.ini"


def file_hash(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def read_config(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return cp


def get_float(section, key, default=None):
    if key not in section:
        if default is None:
            raise ConfigError(f"[{section.name}] missing key '{key}'")
        return default
    try:
        return float(section[key])
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} = {section[key]!r} is not a number") from None


def get_floats(section, key, default=None):
    if key not in section:
        if default is None:
            raise ConfigError(f"[{section.name}] missing key '{key}'")
        return list(default)
    try:
        return [float(x) for x in section[key].split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} = {section[key]!r} is not a number list") from None


def get_int(section, key, default=None):
    value = get_float(section, key, default)
    if value != int(value):
        raise ConfigError(f"[{section.name}] {key} must be an integer")
    return int(value)


def _section(cp, name):
    if not cp.has_section(name):
        raise ConfigError(f"missing section [{name}]")
    return cp[name]


def _build(cls, section, optional=()):
    known = {f.name for f in fields(cls)}
    for key in section:
        if key not in known:
            raise ConfigError(f"[{section.name}] unknown key '{key}'")
    kwargs = {}
    for f in fields(cls):
        if f.name in section:
            kwargs[f.name] = get_float(section, f.name)
        elif f.name not in optional:
            raise ConfigError(f"[{section.name}] missing key '{f.name}'")
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"[{section.name}] {exc}") from exc


def load_profile(path=None):
    """Build a :class:`Detector` from a profile file (bundled one by default)."""
    path = bundled_profile() if path is None else path
    cp = read_config(path)
    params = _build(TesParams, _section(cp, "tes"), optional=("coupling_efficiency",))
    bias = BiasPoint(get_float(_section(cp, "bias"), "bias_current"))
    readout = _build(ReadoutParams, _section(cp, "readout"), optional=[f.name for f in fields(ReadoutParams)])
    width = get_float(cp["optics"], "pulse_width", 16e-9) if cp.has_section("optics") else 16e-9
    per_wl = {}
    if cp.has_section("wavelength_coupling"):
        sec = cp["wavelength_coupling"]
        for key in sec:
            try:
                nm = float(key)
            except ValueError:
                raise ConfigError(f"[wavelength_coupling] key '{key}' is not a wavelength in nm") from None
            value = get_float(sec, key)
            if not 0 <= value <= 1:
                raise ConfigError(f"[wavelength_coupling] {key} must lie in [0, 1]")
            per_wl[nm] = value
    return Detector(params, bias, readout, width, tuple(sorted(per_wl.items())))
