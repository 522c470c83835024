"""Dataset ingestion: the bundled Old Faithful data and CSV files.

The bundled data set records eruption duration and waiting time to the next
eruption (both in minutes) for 272 eruptions of the Old Faithful geyser,
as collected by Azzalini & Bowman (1990) and distributed with R as
``faithful``. It ships with the package as ``data/faithful.csv``.
"""

from __future__ import annotations

import csv
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .exceptions import ParseError
from .mixture import as_data_matrix

FAITHFUL = "faithful"


def load_faithful() -> np.ndarray:
    """The bundled Old Faithful data: 272 rows of (eruptions, waiting)."""
    ref = resources.files("mixboot").joinpath("data/faithful.csv")
    with ref.open("r", encoding="utf-8") as fh:
        return _parse_csv(fh, delimiter=",", header=True, columns=None,
                          source="bundled faithful data")


def _select_columns(row: Sequence[str], columns, header_names, row_no: int):
    if columns is None:
        return list(range(len(row)))
    idx = []
    for c in columns:
        if isinstance(c, int):
            if not 1 <= c <= len(row):
                raise ParseError(f"column {c} out of range (row has {len(row)} fields)",
                                 row=row_no, column=c)
            idx.append(c - 1)
        else:
            if header_names is None or c not in header_names:
                raise ParseError(f"no column named {c!r} in header")
            idx.append(header_names.index(c))
    return idx


def _parse_csv(fh, delimiter: str, header: bool, columns, source: str) -> np.ndarray:
    reader = csv.reader(fh, delimiter=delimiter)
    header_names = None
    rows = []
    data_row = 0
    col_idx = None
    for raw in reader:
        if not raw or all(cell.strip() == "" for cell in raw):
            continue
        if header and header_names is None:
            header_names = [c.strip() for c in raw]
            continue
        data_row += 1
        if col_idx is None:
            col_idx = _select_columns(raw, columns, header_names, data_row)
        parsed = []
        for j in col_idx:
            if j >= len(raw):
                raise ParseError(f"row has only {len(raw)} fields",
                                 row=data_row, column=j + 1)
            cell = raw[j].strip()
            try:
                parsed.append(float(cell))
            except ValueError:
                raise ParseError(
                    f"non-numeric value {cell!r} at row {data_row}, column {j + 1} "
                    f"of {source}", row=data_row, column=j + 1) from None
        rows.append(parsed)
    if not rows:
        raise ParseError(f"{source} contains no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ParseError(f"{source} has ragged rows (widths {sorted(widths)})")
    return as_data_matrix(np.array(rows))


def load_csv(path: Union[str, Path], delimiter: str = ",", header: bool = True,
             columns: Optional[Sequence] = None) -> np.ndarray:
    """Parse a numeric CSV file into a data matrix.

    ``columns`` optionally selects a subset, by 1-based index or by header
    name. Non-numeric cells raise ParseError with their (row, column)
    location; a missing file raises FileNotFoundError.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such data file: {path}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return _parse_csv(fh, delimiter=delimiter, header=header,
                          columns=columns, source=str(path))


def load_dataset(source: Union[str, Path], delimiter: str = ",",
                 header: bool = True, columns: Optional[Sequence] = None) -> np.ndarray:
    """Resolve a dataset source: the name ``faithful`` or a CSV path."""
    if isinstance(source, str) and source.strip().lower() == FAITHFUL:
        return load_faithful()
    return load_csv(source, delimiter=delimiter, header=header, columns=columns)
