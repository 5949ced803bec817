"""Durations with unit suffixes.

Months are 30 days and years 365 days. Those are the conventions under which
the heart-transplant generator (rates per day) reproduces the reported
monthly and yearly horizons.
"""
import re

from .errors import ValidationError

DAYS = {"d": 1.0, "m": 30.0, "y": 365.0}
UNIT_ALIASES = {"d": "d", "day": "d", "days": "d",
                "m": "m", "month": "m", "months": "m",
                "y": "y", "year": "y", "years": "y"}

_DURATION = re.compile(r"^\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*([a-zA-Z]*)\s*$")


def unit_code(unit):
    try:
        return UNIT_ALIASES[unit.lower()]
    except KeyError:
        raise ValidationError(f"unknown time unit {unit!r}") from None


def convert(value, from_unit, to_unit):
    return value * DAYS[unit_code(from_unit)] / DAYS[unit_code(to_unit)]


def parse_duration(text, model_unit="days"):
    """``"6m"`` -> 180.0 for a model in days, 6.0 for a model in months.

    A bare number is taken to be in the model's own unit.
    """
    m = _DURATION.match(str(text))
    if not m:
        raise ValidationError(f"cannot parse duration {text!r}")
    value, suffix = float(m.group(1)), m.group(2)
    if not suffix:
        return value
    return convert(value, suffix, model_unit)


def parse_durations(text, model_unit="days"):
    return [parse_duration(p, model_unit) for p in str(text).split(",") if p.strip()]
