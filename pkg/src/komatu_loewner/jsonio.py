"""Deterministic JSON output: floats always carry 17 significant digits."""

from __future__ import annotations

import json
import math

import numpy as np


def _float(x: float) -> str:
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return json.dumps(None)
    return format(x, ".17g")


def dumps(obj, indent: int | None = 2) -> str:
    """Serialise ``obj`` with fixed-width floats so reruns are byte-identical.

    Complex numbers become ``[re, im]``; numpy scalars and arrays are
    converted to their Python counterparts.  Non-finite floats become null.
    """
    pad = "" if indent is None else " " * indent

    def enc(o, depth):
        nl = "" if indent is None else "\n" + pad * (depth + 1)
        end = "" if indent is None else "\n" + pad * depth
        sep = ", " if indent is None else ","
        if isinstance(o, (bool, np.bool_)):
            return "true" if o else "false"
        if o is None:
            return "null"
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return _float(o)
        if isinstance(o, (complex, np.complexfloating)):
            return enc([o.real, o.imag], depth)
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, np.ndarray):
            return enc(o.tolist(), depth)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [nl + json.dumps(str(k)) + ": " + enc(v, depth + 1) for k, v in o.items()]
            return "{" + sep.join(items) + end + "}"
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            if all(isinstance(v, (int, float, np.integer, np.floating)) and
                   not isinstance(v, bool) for v in o):
                return "[" + ", ".join(enc(v, depth + 1) for v in o) + "]"
            return "[" + sep.join(nl + enc(v, depth + 1) for v in o) + end + "]"
        return json.dumps(str(o))

    return enc(obj, 0) + ("\n" if indent is not None else "")
