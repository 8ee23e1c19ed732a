"""Run-configuration schema and loading.

A config file is one JSON object. ``trap`` and ``rotation`` describe the
geometry; one optional section per scenario carries its parameters;
``seed`` fixes any randomized sweep. Unknown keys anywhere are rejected.
"""

import json
from pathlib import Path

import jsonschema

from .errors import ValidationError

_NUMBER = {"type": "number"}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_VEC3 = {"type": "array", "items": _NUMBER, "minItems": 3, "maxItems": 3}


def _section(properties, required=()):
    return {"type": "object", "properties": properties, "required": list(required),
            "additionalProperties": False}


SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "scenario": {"enum": ["spectrum", "window", "trajectory", "verify-family", "fewbody"]},
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
        "trap": _section({"ax": _POSITIVE, "ay": _POSITIVE, "az": _POSITIVE,
                          "euler_deg": _VEC3}, ["ax", "ay", "az"]),
        "rotation": _section({"omega": _VEC3}),
        "spectrum": _section({
            "omega_range": {"type": "array", "items": _NUMBER, "minItems": 3, "maxItems": 3},
            "axis": _VEC3,
            "closed_form": {"type": "boolean"},
        }),
        "window": _section({"axis": _VEC3, "method": {"enum": ["biquadratic", "bisection"]}}),
        "trajectory": _section({
            "r0": _VEC3, "v0": _VEC3, "t_end": _POSITIVE, "dt": _POSITIVE,
            "frame": {"enum": ["lab", "rot"]}, "force": {"type": "boolean"},
            "with_boundary": {"type": "boolean"},
        }),
        "verify_family": _section({
            "g": _NUMBER, "r0": _NUMBER, "v0": _NUMBER,
            "t_checks": {"type": "array", "items": _POSITIVE, "minItems": 1},
            "dt": _POSITIVE, "grid": _section({"points": {"type": "integer"},
                                               "extent": _POSITIVE}),
            "modulation": _section({"depth": _NUMBER, "frequency": _NUMBER}, ["depth", "frequency"]),
            "quartic": _NUMBER,
            "tolerance": _POSITIVE,
            "dump_snapshot": {"type": "string"},
        }),
        "fewbody": _section({
            "a": _POSITIVE, "interaction": {"type": "string"},
            "grid": _section({"points": {"type": "integer"}, "extent": _POSITIVE}),
            "k": {"type": "integer", "minimum": 1},
            "transform_check": {"type": "boolean"},
        }),
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def validate(config: dict) -> dict:
    """Check ``config`` against the schema; raise ValidationError listing the first problem."""
    errors = sorted(_VALIDATOR.iter_errors(config), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.path) or "<root>"
        raise ValidationError(f"config error at {where}: {e.message}")
    return config


def load_config(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object")
    return validate(data)
