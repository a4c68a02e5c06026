"""Reading bivariate samples from delimited text."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from pavecop.empirical import Sample, build_sample


def pseudo_observations(x: np.ndarray) -> np.ndarray:
    """Column-wise ``(rank - 0.5) / n``, ties broken by position."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    out = np.empty_like(x)
    for c in range(x.shape[1]):
        order = np.argsort(x[:, c], kind="stable")
        out[order, c] = (np.arange(1, n + 1) - 0.5) / n
    return out


def parse_pairs(text: str, delimiter: str | None = None) -> np.ndarray:
    """Two numeric columns per row; a non-numeric first row is a header.

    The delimiter is sniffed among comma, semicolon, tab and space when not
    given. Blank lines and lines starting with ``#`` are skipped.
    """
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ValueError("no data rows")
    if delimiter is None:
        try:
            delimiter = csv.Sniffer().sniff(lines[0] + "\n", delimiters=",;\t ").delimiter
        except csv.Error:
            delimiter = ","
    rows = []
    for lineno, row in enumerate(csv.reader(io.StringIO("\n".join(lines)), delimiter=delimiter), start=1):
        cells = [c.strip() for c in row if c.strip()]
        if len(cells) != 2:
            raise ValueError(f"row {lineno}: expected 2 columns, got {len(cells)}")
        try:
            rows.append((float(cells[0]), float(cells[1])))
        except ValueError:
            if lineno == 1 and not rows:
                continue
            raise ValueError(f"row {lineno}: non-numeric value") from None
    if not rows:
        raise ValueError("no data rows")
    return np.array(rows)


def read_sample(path: str | Path, pseudo: bool = False, delimiter: str | None = None) -> Sample:
    """Load a sample from a delimited file.

    With ``pseudo`` the columns are replaced by rank pseudo-observations;
    otherwise every value must already lie in (0, 1).
    """
    data = parse_pairs(Path(path).read_text(), delimiter)
    if pseudo:
        data = pseudo_observations(data)
    elif np.any((data <= 0) | (data >= 1)):
        raise ValueError("values outside (0, 1); pass pseudo=True to rank-transform")
    return build_sample(data)
