"""CSV and JSON emission shared by the command-line tools."""
from __future__ import annotations

import io
import json
import math
import os
import sys
from numbers import Integral, Real

from .fano_p1 import MetricProfile


class InputError(ValueError):
    """Malformed user input (maps to exit code 1)."""


def _fmt(x):
    if isinstance(x, (bool,)):
        return "1" if x else "0"
    if isinstance(x, Integral):
        return str(int(x))
    if isinstance(x, Real):
        x = float(x)
        if math.isnan(x):
            return "nan"
        return "%.17g" % x
    return str(x)


def render_csv(rows, schema):
    """CSV text for ``rows``; raises before producing anything if a row does not fit ``schema``."""
    schema = tuple(schema)
    rows = [tuple(r) for r in rows]
    for i, r in enumerate(rows):
        if len(r) != len(schema):
            raise ValueError(f"row {i} has {len(r)} fields, schema {schema} has {len(schema)}")
    buf = io.StringIO()
    buf.write(",".join(schema) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(x) for x in r) + "\n")
    return buf.getvalue()


def emit(rows, schema, path=None):
    """Write rows under a header to ``path`` (stdout when ``None`` or ``-``)."""
    text = render_csv(rows, schema)
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)


def check_writable(path):
    if path in (None, "-"):
        return
    parent = os.path.dirname(os.path.abspath(path)) or "."
    if not os.path.isdir(parent):
        raise InputError(f"output directory does not exist: {parent}")
    if not os.access(parent, os.W_OK):
        raise InputError(f"output directory is not writable: {parent}")


def load_json(path, what="config"):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(f"{what} file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} file {path} is not valid JSON: {exc}") from None


def load_profile(path):
    data = load_json(path, "profile")
    if not isinstance(data, dict):
        raise InputError(f"profile {path} must be a JSON object")
    try:
        return MetricProfile.from_json(data).validate()
    except (ValueError, TypeError) as exc:
        raise InputError(f"profile {path}: {exc}") from None


def save_profile(profile, path):
    # json writes floats with repr, so the values round-trip exactly
    with open(path, "w") as fh:
        json.dump(profile.to_json(), fh)
        fh.write("\n")
