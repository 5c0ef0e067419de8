"""JSON model documents and the compact strings used on the command line.

Model document::

    {
      "rho": TF,                          # optional, defaults to constant 1
      "recruitment": [
        {"kind": "beverton-holt", "alpha": TF, "beta": TF,
         "delay": {"atoms": [{"lag": TF, "weight": 1.0}]}}
      ],
      "mortality": {"mu": TF, "kappa": TF},
      "tau_max": 1.0
    }

    TF = {"kind": "constant" | "sinusoid" | "piecewise-linear",
          "params": [...], "inf": ..., "sup": ..., "tail_liminf": ..., "tail_limsup": ...}

``params`` is ``[c]``, ``[a, b, omega, phase]`` or ``[[t, value], ...]``.
The four metadata keys may be omitted and are then computed from the
parameters. Unknown keys anywhere are rejected.
"""

from __future__ import annotations

import ast
import json
import math
import operator
import os
from urllib.parse import parse_qsl

import jsonschema

from .errors import BadParams, ModelFormatError
from .model import (DelayTerm, HistorySpec, ModelSpec, MortalityTerm,
                    RecruitmentTerm, TimeFunction)
from .presets import preset

_NUM = {"type": "number"}

TIME_FUNCTION_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["constant", "sinusoid", "piecewise-linear"]},
        "params": {"type": "array"},
        "inf": _NUM, "sup": _NUM, "tail_liminf": _NUM, "tail_limsup": _NUM,
    },
    "required": ["kind", "params"],
    "additionalProperties": False,
}

MODEL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "permadde model",
    "type": "object",
    "$defs": {"tf": TIME_FUNCTION_SCHEMA},
    "properties": {
        "rho": {"$ref": "#/$defs/tf"},
        "recruitment": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "kind": {"enum": ["linear", "beverton-holt", "ricker", "capped-ricker"]},
                    "alpha": {"$ref": "#/$defs/tf"},
                    "beta": {"$ref": "#/$defs/tf"},
                    "delay": {
                        "type": "object",
                        "properties": {
                            "atoms": {
                                "type": "array",
                                "minItems": 1,
                                "items": {
                                    "type": "object",
                                    "properties": {"lag": {"$ref": "#/$defs/tf"},
                                                   "weight": _NUM},
                                    "required": ["lag", "weight"],
                                    "additionalProperties": False,
                                },
                            }
                        },
                        "required": ["atoms"],
                        "additionalProperties": False,
                    },
                },
                "required": ["kind", "alpha", "delay"],
                "additionalProperties": False,
            },
        },
        "mortality": {
            "type": "object",
            "properties": {"mu": {"$ref": "#/$defs/tf"}, "kappa": {"$ref": "#/$defs/tf"}},
            "required": ["mu", "kappa"],
            "additionalProperties": False,
        },
        "tau_max": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["recruitment", "mortality", "tau_max"],
    "additionalProperties": False,
}

_META = ("inf", "sup", "tail_liminf", "tail_limsup")


# ---------------------------------------------------------------------------
# model documents
# ---------------------------------------------------------------------------


def tf_to_dict(f: TimeFunction) -> dict:
    params = [list(p) for p in f.params] if f.kind == "piecewise-linear" else list(f.params)
    return {"kind": f.kind, "params": params, "inf": f.inf, "sup": f.sup,
            "tail_liminf": f.tail_liminf, "tail_limsup": f.tail_limsup}


def tf_from_dict(doc: dict) -> TimeFunction:
    kind, params = doc["kind"], doc["params"]
    meta = {k: doc[k] for k in _META if k in doc}
    try:
        if kind == "constant":
            (c,) = params
            base = TimeFunction.constant(c)
        elif kind == "sinusoid":
            a, b, w, ph = params
            base = TimeFunction.sinusoid(a, b, w, ph)
        else:
            base = TimeFunction.piecewise_linear([tuple(p) for p in params])
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"bad params for {kind} time function: {params!r}") from exc
    if not meta:
        return base
    filled = {k: float(meta.get(k, getattr(base, k))) for k in _META}
    return TimeFunction(base.kind, base.params, **filled)


def model_to_dict(model: ModelSpec) -> dict:
    terms = []
    for t in model.recruitment:
        doc = {"kind": t.kind, "alpha": tf_to_dict(t.alpha)}
        if t.beta is not None:
            doc["beta"] = tf_to_dict(t.beta)
        doc["delay"] = {"atoms": [{"lag": tf_to_dict(g), "weight": w} for g, w in t.delay.atoms]}
        terms.append(doc)
    return {
        "rho": tf_to_dict(model.rho),
        "recruitment": terms,
        "mortality": {"mu": tf_to_dict(model.mortality.mu),
                      "kappa": tf_to_dict(model.mortality.kappa)},
        "tau_max": model.tau_max,
    }


def model_from_dict(doc) -> ModelSpec:
    """Validate ``doc`` against :data:`MODEL_SCHEMA` and build the model."""
    try:
        jsonschema.validate(doc, MODEL_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ModelFormatError(f"{path}: {exc.message}") from None
    try:
        terms = []
        for t in doc["recruitment"]:
            delay = DelayTerm(tuple((tf_from_dict(a["lag"]), float(a["weight"]))
                                    for a in t["delay"]["atoms"]))
            beta = tf_from_dict(t["beta"]) if "beta" in t else None
            terms.append(RecruitmentTerm(t["kind"], tf_from_dict(t["alpha"]), delay, beta=beta))
        mort = MortalityTerm(tf_from_dict(doc["mortality"]["mu"]),
                             tf_from_dict(doc["mortality"]["kappa"]))
        rho = tf_from_dict(doc["rho"]) if "rho" in doc else TimeFunction.constant(1.0)
        return ModelSpec(terms, mort, doc["tau_max"], rho=rho)
    except ModelFormatError:
        raise
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(str(exc)) from exc


def dumps_model(model: ModelSpec) -> str:
    return json.dumps(model_to_dict(model), indent=2)


def loads_model(text: str) -> ModelSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"invalid JSON at line {exc.lineno} column {exc.colno}: "
                               f"{exc.msg}") from None
    return model_from_dict(doc)


def load_model(path) -> ModelSpec:
    with open(path) as fh:
        return loads_model(fh.read())


def save_model(model: ModelSpec, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_model(model) + "\n")


# ---------------------------------------------------------------------------
# compact strings
# ---------------------------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_NAMES = {"e": math.e, "pi": math.pi}
_FUNCS = {"log": math.log, "exp": math.exp, "sqrt": math.sqrt}


def parse_number(text: str) -> float:
    """Evaluate a small arithmetic expression: ``2.5``, ``e``, ``log(2)``, ``1/3``."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
        return float(_eval(tree.body))
    except (SyntaxError, ValueError, ZeroDivisionError, KeyError, TypeError) as exc:
        raise BadParams(f"cannot read number {text!r}") from exc


def _eval(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return node.value
    if isinstance(node, ast.Name):
        return _NAMES[node.id]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval(node.left), _eval(node.right))
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCS and len(node.args) == 1):
        return _FUNCS[node.func.id](_eval(node.args[0]))
    raise ValueError("unsupported expression")


def _pairs(body: str):
    pairs = []
    for item in body.split(";"):
        if "=" not in item:
            raise BadParams(f"expected t=value, got {item!r}")
        t, v = item.split("=", 1)
        pairs.append((parse_number(t), parse_number(v)))
    return pairs


def parse_time_function(text: str):
    """``2.5`` | ``const:c`` | ``sin:a:b:omega:phase`` | ``pwl:t=v;t=v``.

    Plain numbers stay floats so presets can check constancy.
    """
    text = text.strip()
    if text.startswith("const:"):
        return TimeFunction.constant(parse_number(text[6:]))
    if text.startswith("sin:"):
        parts = [parse_number(p) for p in text[4:].split(":")]
        if len(parts) == 3:
            parts.append(0.0)
        if len(parts) != 4:
            raise BadParams(f"sin: needs a:b:omega[:phase], got {text!r}")
        return TimeFunction.sinusoid(*parts)
    if text.startswith("pwl:"):
        return TimeFunction.piecewise_linear(_pairs(text[4:]))
    return parse_number(text)


def parse_preset_uri(text: str) -> tuple:
    """``preset:name?key=value&key=v1,v2`` -> ``(name, params)``."""
    body = text[len("preset:"):] if text.startswith("preset:") else text
    name, _, query = body.partition("?")
    params = {}
    for key, value in parse_qsl(query, keep_blank_values=True):
        items = [parse_time_function(v) for v in value.split(",")]
        if key == "m":
            params[key] = int(items[0])
        else:
            params[key] = items if len(items) > 1 else items[0]
    return name.strip(), params


def model_from_uri(text: str) -> ModelSpec:
    name, params = parse_preset_uri(text)
    return preset(name, params)


def history_to_dict(history: HistorySpec) -> dict:
    params = [list(p) for p in history.params] if history.kind == "tabulated" \
        else list(history.params)
    return {"kind": history.kind, "params": params}


def history_from_dict(doc: dict) -> HistorySpec:
    if set(doc) - {"kind", "params"}:
        raise ModelFormatError(f"unknown history keys {sorted(set(doc) - {'kind', 'params'})}")
    try:
        if doc["kind"] == "tabulated":
            return HistorySpec.tabulated([tuple(p) for p in doc["params"]])
        return HistorySpec(doc["kind"], tuple(doc["params"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"bad history document: {exc}") from exc


def parse_history(text: str) -> HistorySpec:
    """``0.5`` | ``const:c`` | ``sin:a:b:omega[:phase]`` | ``table:t=v;t=v`` | JSON file."""
    text = text.strip()
    if text.startswith("const:"):
        return HistorySpec.constant(parse_number(text[6:]))
    if text.startswith("sin:"):
        parts = [parse_number(p) for p in text[4:].split(":")]
        if len(parts) == 3:
            parts.append(0.0)
        if len(parts) != 4:
            raise BadParams(f"sin: needs a:b:omega[:phase], got {text!r}")
        return HistorySpec.sinusoid(*parts)
    if text.startswith("table:"):
        return HistorySpec.tabulated(_pairs(text[6:]))
    if os.path.exists(text):
        with open(text) as fh:
            try:
                return history_from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise ModelFormatError(f"invalid history JSON: {exc.msg}") from None
    return HistorySpec.constant(parse_number(text))
