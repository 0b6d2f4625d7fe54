"""Linear unit conversions for the handful of quantities used at the interfaces.

Internally everything is SI (J, s, rad/s, m, K). These helpers exist so that
configuration files and CLI flags can say "1.0 mK" or "3 kHz" without anyone
doing mental arithmetic. Temperature <-> energy crosses categories through
E = k_B * T; no other cross-category conversion is supported.
"""

import math
import re

from .errors import ConfigError

_KB = 1.380649e-23  # J/K, exact

# unit -> (category, scale to the category base)
# bases: K (temperature), J (energy), Hz (frequency), s (time), m (length)
_REGISTRY = {
    "K": ("temperature", 1.0),
    "mK": ("temperature", 1e-3),
    "uK": ("temperature", 1e-6),
    "µK": ("temperature", 1e-6),
    "J": ("energy", 1.0),
    "Hz": ("frequency", 1.0),
    "kHz": ("frequency", 1e3),
    "MHz": ("frequency", 1e6),
    "GHz": ("frequency", 1e9),
    "THz": ("frequency", 1e12),
    "rad/s": ("frequency", 1.0 / (2.0 * math.pi)),
    "s": ("time", 1.0),
    "ms": ("time", 1e-3),
    "us": ("time", 1e-6),
    "µs": ("time", 1e-6),
    "m": ("length", 1.0),
    "mm": ("length", 1e-3),
    "um": ("length", 1e-6),
    "µm": ("length", 1e-6),
    "nm": ("length", 1e-9),
}


def supported_units():
    return sorted(_REGISTRY)


def convert_units(value, from_unit, to_unit):
    """Convert `value` between two supported units.

    Exact linear conversion; temperature <-> energy uses E = k_B * T.
    Raises ConfigError for an unsupported unit or unit pair.
    """
    try:
        cat_a, scale_a = _REGISTRY[from_unit]
    except KeyError:
        raise ConfigError(f"unsupported unit {from_unit!r}") from None
    try:
        cat_b, scale_b = _REGISTRY[to_unit]
    except KeyError:
        raise ConfigError(f"unsupported unit {to_unit!r}") from None

    base = value * scale_a
    if cat_a == cat_b:
        return base / scale_b
    if (cat_a, cat_b) == ("temperature", "energy"):
        return base * _KB / scale_b
    if (cat_a, cat_b) == ("energy", "temperature"):
        return base / _KB / scale_b
    raise ConfigError(f"cannot convert {from_unit!r} to {to_unit!r}")


_QUANTITY_RE = re.compile(r"^\s*([-+]?[0-9.][0-9.eE+-]*)\s*(\S.*?)\s*$")


def parse_quantity(text, target_unit):
    """Parse '1.0 mK' (or '1.0mK') style strings into the target unit.

    Plain numbers are accepted only when target_unit is None (dimensionless).
    """
    if target_unit is None:
        try:
            return float(text.strip())
        except ValueError:
            raise ConfigError(f"expected a plain number, got {text!r}") from None
    m = _QUANTITY_RE.match(text)
    if not m:
        raise ConfigError(f"expected '<number> <unit>', got {text!r}")
    try:
        value = float(m.group(1))
    except ValueError:
        raise ConfigError(f"bad number in {text!r}") from None
    return convert_units(value, m.group(2), target_unit)


def format_quantity(value, unit, display_unit=None):
    """Format an SI value back into a display unit ('0.001 K' -> '1 mK')."""
    if display_unit is None:
        display_unit = unit
    out = convert_units(value, unit, display_unit)
    return f"{out:.12g} {display_unit}"
