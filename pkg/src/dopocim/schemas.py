"""JSON schemas for instance files, run configs and emitted reports."""

from __future__ import annotations

import jsonschema

_NUM = {"type": "number"}
_INT = {"type": "integer"}

INSTANCE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "Ising instance",
    "type": "object",
    "required": ["n", "edges"],
    "properties": {
        "name": {"type": "string"},
        "n": {"type": "integer", "minimum": 1},
        "edges": {
            "type": "array",
            "items": {
                "type": "array",
                "prefixItems": [{"type": "integer", "minimum": 0}, {"type": "integer", "minimum": 0}, _NUM],
                "minItems": 3,
                "maxItems": 3,
            },
        },
    },
    "additionalProperties": False,
}

SCHEDULE_SCHEMA = {
    "type": "object",
    "required": ["kind", "p_end"],
    "properties": {
        "kind": {"enum": ["abrupt", "linear"]},
        "p_start": {"type": "number", "minimum": 0},
        "p_end": {"type": "number", "minimum": 0},
        "ramp": {"type": "number", "minimum": 1},
    },
    "additionalProperties": False,
}

SINGLEMODE_PARAMS_SCHEMA = {
    "type": "object",
    "properties": {
        "n_pulses": {"type": "integer", "minimum": 1},
        "T_s": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "R_inj": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "x_sat": {"type": "number", "exclusiveMinimum": 0},
        "vacuum_variance": {"type": "number", "minimum": 0},
        "rounds": {"type": "integer", "minimum": 1},
        "readout_round": {"type": ["integer", "null"], "minimum": 1},
        "normalize_by_degree": {"type": "boolean"},
        "gain_form": {"enum": ["sqrt-pump", "exp-pump"]},
    },
    "additionalProperties": False,
}

MULTIMODE_PARAMS_SCHEMA = {
    "type": "object",
    "properties": {
        "n_pulses": {"type": "integer", "minimum": 1},
        "K_modes": {"type": "integer", "minimum": 1},
        "gamma_s": {"type": "number", "exclusiveMinimum": 0},
        "Delta": _NUM,
        "DeltaOmega": _NUM,
        "K_nl": {"type": "number", "exclusiveMinimum": 0},
        "N_s": {"type": "number", "exclusiveMinimum": 0},
        "M": {"type": "integer", "minimum": 1},
        "phase_match": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["constant", "sinc"]},
                "width": {"type": ["number", "null"], "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "pump_width": {"type": "number", "exclusiveMinimum": 0},
        "pump_spectrum": {
            "type": ["array", "null"],
            "items": {"type": "array", "prefixItems": [_NUM, _NUM], "minItems": 2, "maxItems": 2},
        },
        "xi": _NUM,
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "t_end": {"type": "number", "exclusiveMinimum": 0},
        "noise_variance": {"type": "number", "minimum": 0},
        "divergence_intensity": {"type": "number", "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}

FLIPTRACE_SCHEMA = {
    "type": "object",
    "properties": {
        "seeds": {"type": "array", "items": _INT, "minItems": 1},
        "pulse": {"type": ["integer", "null"], "minimum": 0},
        "t_skip": {"type": "number", "minimum": 0},
        "window": {"type": "number", "exclusiveMinimum": 0},
        "hysteresis": {"type": "number", "minimum": 0},
        "intensity_floor": {"type": "number", "minimum": 0},
    },
    "additionalProperties": False,
}

_INSTANCE_REF = {"oneOf": [{"type": "string"}, {"$ref": "#/$defs/instance"}]}

RUN_CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "Run configuration",
    "type": "object",
    "required": ["model", "schedule"],
    "properties": {
        "label": {"type": "string"},
        "model": {"enum": ["singlemode", "multimode"]},
        "instance": _INSTANCE_REF,
        "instances": {"type": "array", "items": _INSTANCE_REF, "minItems": 1},
        "params": {"type": "object"},
        "schedule": {"$ref": "#/$defs/schedule"},
        "trials": {"type": "integer", "minimum": 1},
        "base_seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "record_stride": {"type": ["integer", "null"], "minimum": 1},
        "parallel": {"type": "integer", "minimum": 1},
        "max_failed_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "out_dir": {"type": "string"},
        "fliptrace": {"$ref": "#/$defs/fliptrace"},
    },
    "oneOf": [{"required": ["instance"]}, {"required": ["instances"]}],
    "allOf": [
        {
            "if": {"properties": {"model": {"const": "singlemode"}}},
            "then": {"properties": {"params": SINGLEMODE_PARAMS_SCHEMA}},
            "else": {"properties": {"params": MULTIMODE_PARAMS_SCHEMA}},
        }
    ],
    "additionalProperties": False,
    "$defs": {"instance": INSTANCE_SCHEMA, "schedule": SCHEDULE_SCHEMA, "fliptrace": FLIPTRACE_SCHEMA},
}

_SPEC_SCHEMA = {
    "type": "object",
    "required": ["instance", "model", "params", "schedule", "trials", "base_seed"],
    "properties": {
        "label": {"type": "string"},
        "instance": {"$ref": "#/$defs/instance"},
        "model": {"enum": ["singlemode", "multimode"]},
        "params": {"type": "object"},
        "schedule": {"$ref": "#/$defs/schedule"},
        "trials": {"type": "integer", "minimum": 1},
        "base_seed": {"type": "integer", "minimum": 0},
        "record_stride": {"type": ["integer", "null"], "minimum": 1},
    },
    "additionalProperties": False,
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "Experiment report",
    "type": "object",
    "required": ["success_rate", "successes", "trials", "ci95", "ground_energy", "failed_numeric",
                 "success_curve", "final_energy_histogram", "per_trial", "provenance"],
    "properties": {
        "success_rate": {"type": "number", "minimum": 0, "maximum": 1},
        "successes": {"type": "integer", "minimum": 0},
        "trials": {"type": "integer", "minimum": 1},
        "ci95": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1},
                 "minItems": 2, "maxItems": 2},
        "ground_energy": _NUM,
        "failed_numeric": {"type": "integer", "minimum": 0},
        "success_curve": {
            "type": "array",
            "items": {"type": "array", "prefixItems": [_NUM, {"type": "number", "minimum": 0, "maximum": 1}],
                      "minItems": 2, "maxItems": 2},
        },
        "final_energy_histogram": {
            "type": "array",
            "items": {"type": "array", "prefixItems": [_NUM, {"type": "integer", "minimum": 0}],
                      "minItems": 2, "maxItems": 2},
        },
        "per_trial": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["spins", "energy", "rounds", "flags"],
                "properties": {
                    "spins": {"type": "string", "pattern": "^[+-]+$"},
                    "energy": _NUM,
                    "rounds": {"type": "integer", "minimum": 0},
                    "flags": {"type": "array", "items": {"enum": ["failed-numeric", "degenerate-readout"]}},
                    "success": {"type": "boolean"},
                    "trajectory": {"type": "array"},
                },
            },
        },
        "provenance": {
            "type": "object",
            "required": ["spec", "base_seed", "version"],
            "properties": {"spec": _SPEC_SCHEMA, "base_seed": {"type": "integer"}, "version": {"type": "string"}},
        },
        "timestamp": {"type": "string"},
    },
    "additionalProperties": False,
    "$defs": {"instance": INSTANCE_SCHEMA, "schedule": SCHEDULE_SCHEMA},
}

SPECTRUM_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "Exact spectrum summary",
    "type": "object",
    "required": ["n", "ground_energy", "degeneracy", "ground_states", "energy_histogram",
                 "local_minima_strict", "local_minima_nonstrict", "local_minima_counts"],
    "properties": {
        "instance": {"type": "string"},
        "n": {"type": "integer", "minimum": 1},
        "ground_energy": _NUM,
        "degeneracy": {"type": "integer", "minimum": 1},
        "ground_states": {"type": "array", "items": {"type": "string", "pattern": "^[+-]+$"}},
        "energy_histogram": {"type": "array"},
        "local_minima_strict": {"type": "array", "items": {"type": "string"}},
        "local_minima_nonstrict": {"type": "array", "items": {"type": "string"}},
        "local_minima_counts": {"type": "object", "additionalProperties": {"type": "integer"}},
    },
}

FLIP_REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "Flip-event report",
    "type": "object",
    "required": ["seed", "pulse_events", "intensity_floor", "qualifying_events", "provenance"],
    "properties": {
        "seed": {"type": "integer"},
        "intensity_floor": _NUM,
        "pulse_events": {"type": "array", "items": {"type": "object"}},
        "qualifying_events": {"type": "integer", "minimum": 0},
        "final_spins": {"type": "string"},
        "failed_numeric": {"type": "boolean"},
        "provenance": {"type": "object"},
    },
}

SCHEMAS = {
    "instance": INSTANCE_SCHEMA,
    "run-config": RUN_CONFIG_SCHEMA,
    "report": REPORT_SCHEMA,
    "spectrum": SPECTRUM_SCHEMA,
    "flip-report": FLIP_REPORT_SCHEMA,
}


def validation_errors(doc, schema: dict) -> list[str]:
    """Every violation as ``'<json pointer>: <message>'``, sorted by location."""
    validator = jsonschema.Draft202012Validator(schema)
    errs = sorted(validator.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    return [f"/{'/'.join(map(str, e.absolute_path))}: {e.message}" for e in errs]
