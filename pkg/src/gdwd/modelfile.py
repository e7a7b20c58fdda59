"""Plain-text model persistence.

Layout (one ``key value`` pair per line, then the dense normal vector)::

    gdwd-model 1
    q 1.0
    C 375.0
    Z_scale 12.3
    beta -0.25
    label -1 0.0
    label 1 1.0
    term status s Converged
    term iterations i 81
    d 3
    w
    0.5
    ...

Floats are written with ``repr`` so that reading them back is exact.
"""

from __future__ import annotations

import os
from typing import IO

import numpy as np

from .errors import InvalidInputError
from .model import TrainedModel

MAGIC = "gdwd-model"
VERSION = 1

_TYPES = {"s": str, "i": int, "f": float, "b": lambda v: v == "True"}


def _tag(value) -> str:
    if isinstance(value, bool):
        return "b"
    if isinstance(value, (int, np.integer)):
        return "i"
    if isinstance(value, (float, np.floating)):
        return "f"
    return "s"


def _val(value) -> str:
    if isinstance(value, (float, np.floating)) and not isinstance(value, bool):
        return repr(float(value))
    return str(value)


def write_model(m: TrainedModel, stream: IO[str]) -> None:
    w = np.asarray(m.w, dtype=float).ravel()
    out = [f"{MAGIC} {VERSION}", f"q {m.q!r}", f"C {m.C!r}",
           f"Z_scale {float(m.Z_scale)!r}", f"beta {float(m.beta)!r}"]
    for raw, sign in sorted((m.label_map or {}).items(), key=lambda kv: kv[1]):
        out.append(f"label {int(sign)} {float(raw)!r}")
    for key, value in (m.termination or {}).items():
        text = _val(value)
        if any(c.isspace() for c in str(key)) or "\n" in text:
            raise InvalidInputError(f"termination entry {key!r} cannot be stored")
        out.append(f"term {key} {_tag(value)} {text}")
    out.append(f"d {w.size}")
    out.append("w")
    out.extend(repr(float(v)) for v in w)
    stream.write("\n".join(out) + "\n")


def read_model(stream: IO[str]) -> TrainedModel:
    lines = stream.read().splitlines()
    if not lines:
        raise InvalidInputError("empty model file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != MAGIC:
        raise InvalidInputError("not a gdwd model file")
    if int(head[1]) != VERSION:
        raise InvalidInputError(f"unsupported model version {head[1]}")
    fields = {}
    label_map = {}
    term = {}
    d = None
    i = 1
    while i < len(lines):
        parts = lines[i].split(" ", 3)
        i += 1
        key = parts[0]
        if key == "w":
            break
        if key == "label":
            label_map[float(parts[2])] = int(parts[1])
        elif key == "term":
            name, tag, text = parts[1], parts[2], parts[3] if len(parts) > 3 else ""
            term[name] = _TYPES[tag](text)
        elif key == "d":
            d = int(parts[1])
        elif key in ("q", "C", "Z_scale", "beta"):
            fields[key] = float(parts[1])
        else:
            raise InvalidInputError(f"unknown model key {key!r}")
    missing = {"q", "C", "Z_scale", "beta"} - fields.keys()
    if missing or d is None:
        raise InvalidInputError(f"model file is missing {sorted(missing) or ['d']}")
    w = np.array([float(v) for v in lines[i:i + d]], dtype=float)
    if w.size != d:
        raise InvalidInputError(f"expected {d} weights, found {w.size}")
    return TrainedModel(w=w, beta=fields["beta"], q=fields["q"], C=fields["C"],
                        Z_scale=fields["Z_scale"], termination=term,
                        label_map=label_map or None)


def save_model(m: TrainedModel, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        write_model(m, fh)


def load_model(path: str | os.PathLike) -> TrainedModel:
    with open(path, "r", encoding="utf-8") as fh:
        return read_model(fh)
