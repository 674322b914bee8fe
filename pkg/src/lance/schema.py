"""JSON schema of the report written by ``lance fit``."""

_num_or_null = {"type": ["number", "null"]}

FIT_REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "lance fit report",
    "type": "object",
    "required": ["lance_version", "command", "config", "fit", "cv", "timings"],
    "properties": {
        "lance_version": {"type": "string"},
        "command": {"const": "fit"},
        "config": {
            "type": "object",
            "required": ["input", "seed", "hyperparameters", "grid", "ncv", "threads", "center"],
        },
        "fit": {
            "type": "object",
            "required": ["n", "p", "bandwidths", "coefficients", "variances",
                         "hyperparameters", "diagnostics", "seed"],
            "properties": {
                "n": {"type": "integer", "minimum": 2},
                "p": {"type": "integer", "minimum": 2},
                "bandwidths": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "coefficients": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "number"}},
                },
                "variances": {"type": "array", "items": _num_or_null},
                "posterior_mean_bandwidth": {"type": "array", "items": _num_or_null},
                "posterior_mode_probability": {"type": "array", "items": _num_or_null},
                "hyperparameters": {
                    "type": "object",
                    "required": ["alpha", "gamma", "c1", "c2", "nu0", "rmax", "ridge_c"],
                },
                "diagnostics": {
                    "type": "object",
                    "required": ["truncated", "degenerate", "failed"],
                    "properties": {
                        "truncated": {"type": "object"},
                        "degenerate": {"type": "object"},
                        "failed": {"type": "array", "items": {"type": "integer"}},
                    },
                },
                "seed": {"type": ["integer", "null"]},
            },
        },
        "cv": {
            "type": ["object", "null"],
            "properties": {
                "c2_best": {"type": "number"},
                "n_profile_builds": {"type": "integer"},
                "excluded_columns": {"type": "array", "items": {"type": "integer"}},
            },
        },
        "timings": {"type": "object", "additionalProperties": {"type": "number"}},
    },
}
