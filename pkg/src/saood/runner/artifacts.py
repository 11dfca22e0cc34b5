"""Result files. Everything is written to a temp file and renamed into place."""

from __future__ import annotations

import json
import math
import os
import tempfile


def atomic_write(path, text):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(value):
    """Nine significant digits; NaN as 'nan'."""
    if value is None:
        return ""
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    value = float(value)
    if math.isnan(value):
        return "nan"
    return f"{value:.9g}"


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    atomic_write(path, "\n".join(lines) + "\n")


def write_json(path, obj):
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def write_matrix_csv(path, prefix, blocks):
    """Per-sample rows: ``set,index,label,<prefix>0..`` for every (name, matrix, labels) block."""
    width = blocks[0][1].shape[1]
    header = ["set", "index", "label"] + [f"{prefix}{j}" for j in range(width)]
    lines = [",".join(header)]
    for name, matrix, labels in blocks:
        for i, row in enumerate(matrix):
            label = str(int(labels[i])) if labels is not None else "-1"
            lines.append(",".join([name, str(i), label] + [f"{v:.9g}" for v in row]))
    atomic_write(path, "\n".join(lines) + "\n")
