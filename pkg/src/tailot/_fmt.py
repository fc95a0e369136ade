"""Float formatting shared by every writer: 17 significant digits."""

import numpy as np


def fmt(v):
    return format(float(v), ".17g")


def json_array(values):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        return "[" + ", ".join(fmt(v) for v in values) + "]"
    return "[" + ", ".join(json_array(row) for row in values) + "]"
