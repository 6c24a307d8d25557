"""CSV ingestion and deterministic JSON/CSV writers."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .core import Dataset, standardize
from .errors import ConfigError, DataFormatError


def ingest_csv(
    path,
    response: str = "y",
    allow_wide: bool = False,
    center: bool = False,
) -> tuple[Dataset, list[str]]:
    """Read a header-first UTF-8 CSV into a standardized :class:`Dataset`.

    Parameters
    ----------
    path : path-like
    response : str
        Name of the response column; every other column is a predictor.
    allow_wide : bool
        Accept ``n <= p``.  Such data support only noise-scale estimation.
    center : bool
        Center predictors and response before scaling.

    Returns
    -------
    dataset, names
        ``names[j]`` is the header of predictor ``j``.

    Raises
    ------
    DataFormatError
        Missing response column, ragged rows, a non-numeric cell (the
        message names the 1-based data row and the column header), or
        ``n <= p`` without ``allow_wide``, or an unreadable file.
    """
    path = Path(path)
    if not path.is_file():
        raise DataFormatError(f"{path}: no such file")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataFormatError(f"{path}: file is empty") from None
        if response not in header:
            raise DataFormatError(f"{path}: response column {response!r} not found in header")
        rows = []
        for r, row in enumerate(reader, start=1):
            if not row or all(c.strip() == "" for c in row):
                continue
            if len(row) != len(header):
                raise DataFormatError(f"{path}: row {r} has {len(row)} cells, header has {len(header)}")
            vals = []
            for name, cell in zip(header, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataFormatError(f"{path}: non-numeric value {cell!r} at row {r}, column {name}") from None
                if not math.isfinite(v):
                    raise DataFormatError(f"{path}: non-finite value {cell!r} at row {r}, column {name}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    data = np.array(rows)
    yi = header.index(response)
    names = [h for k, h in enumerate(header) if k != yi]
    X = np.delete(data, yi, axis=1)
    y = data[:, yi]
    n, p = X.shape
    if p == 0:
        raise DataFormatError(f"{path}: no predictor columns")
    if n <= p and not allow_wide:
        raise DataFormatError(f"{path}: n={n} <= p={p}; pass --allow-wide for the noise-scale-only workflow")
    try:
        d = standardize(X, y, center=center)
    except ConfigError as exc:
        msg = str(exc)
        for k, name in enumerate(names):
            if msg.startswith(f"column {k} "):
                msg = f"column {name} (index {k})" + msg[len(f"column {k}") :]
                break
        raise DataFormatError(f"{path}: {msg}") from None
    return d, names


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (frozenset, set)):
        return sorted(_clean(v) for v in obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, obj) -> None:
    """Write ``obj`` as sorted, indented JSON; non-finite floats become ``null``."""
    text = json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def write_rows(path, columns, rows) -> None:
    """Write a CSV with ``columns`` and an iterable of dicts or sequences."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            vals = [row.get(c) for c in columns] if isinstance(row, dict) else list(row)
            w.writerow(["" if v is None else (repr(float(v) + 0.0) if isinstance(v, (float, np.floating)) else v) for v in vals])
