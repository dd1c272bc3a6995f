"""JSON schemas for every artifact the CLI reads."""
from __future__ import annotations

_RATIONAL = {"type": ["string", "integer"]}
_INDEX_LIST = {"type": "array", "items": {"type": "integer", "minimum": 1}}
_EXPONENT = {"type": ["string", "integer", "number"]}

CODE = {
    "type": "object",
    "required": ["m", "n", "form"],
    "properties": {
        "m": {"type": "integer", "minimum": 1},
        "n": {"type": "integer", "minimum": 1},
        "form": {"enum": ["explicit", "walsh"]},
        "codewords": {"type": "array", "items": {"type": "array", "items": {"enum": [-1, 1]}}},
    },
}

DECODER = {
    "type": "object",
    "required": ["m", "n", "per_bit"],
    "properties": {
        "m": {"type": "integer", "minimum": 1},
        "n": {"type": "integer", "minimum": 1},
        "per_bit": {
            "type": "array",
            "items": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["i", "j", "k", "g", "w"],
                    "properties": {
                        "i": {"type": "integer", "minimum": 1},
                        "j": {"type": "integer", "minimum": 1},
                        "k": {"type": "integer", "minimum": 1},
                        "g": {"type": "array", "minItems": 8, "maxItems": 8, "items": {"enum": [-1, 1]}},
                        "w": _RATIONAL,
                    },
                },
            },
        },
    },
}

SMOOTHED = {
    "type": "object",
    "required": ["m", "n", "three_n", "per_bit", "code", "theta"],
    "properties": {
        "m": {"type": "integer", "minimum": 1},
        "n": {"type": "integer", "minimum": 1},
        "three_n": {"type": "integer", "minimum": 3},
        "theta": _RATIONAL,
        "phi": _RATIONAL,
        "code": CODE,
        "per_bit": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["pi", "sigma", "tau", "signs", "J", "biases"],
                "properties": {
                    "pi": _INDEX_LIST,
                    "sigma": _INDEX_LIST,
                    "tau": _INDEX_LIST,
                    "signs": {"type": "array", "items": {"enum": [-1, 1]}},
                    "J": {"type": "integer", "minimum": 0},
                    "biases": {"type": "array", "items": _RATIONAL},
                },
            },
        },
    },
}

TENSOR = {
    "type": "object",
    "required": ["n", "entries"],
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "order": {"const": "ijk-row-major-k-fastest"},
        "arithmetic": {"enum": ["rational", "float"]},
        "entries": {"type": "array", "items": {"type": ["string", "integer", "number"]}},
    },
}

CERTIFICATE = {
    "type": "object",
    "required": ["q", "spec", "m", "n", "J_min", "alpha_min", "per_witness", "per_sign", "value", "inputs_hash"],
    "properties": {
        "q": _RATIONAL,
        "spec": {
            "type": "object",
            "required": ["p", "n"],
            "properties": {"p": {"type": "array", "minItems": 3, "maxItems": 3, "items": _EXPONENT}},
        },
        "m": {"type": "integer"},
        "n": {"type": "integer"},
        "J_min": {"type": "integer"},
        "alpha_min": _RATIONAL,
        "per_witness": {"type": "array", "items": {"type": "object", "required": ["L", "method"]}},
        "per_sign": {"type": "array", "items": {"type": "object", "required": ["U", "method"]}},
        "value": {"type": "number"},
        "inputs_hash": {"type": "string"},
        "runtime": {"type": "number"},
    },
}
