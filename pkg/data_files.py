"""Read and write the on-disk formats: matrix/state text, spectral and moment JSON, CSV tables."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path

import numpy as np

from errors import InputError
from linalg import DenseSymmetricMatrix, StateVector
from moments import Basis, MomentVector, ScalingWindow
from spectrum import SpectralModel


class InputFileError(InputError):
    def __init__(
        self,
        message: str,
        path: Path,
        line: int | None = None,
        field: str | None = None,
    ) -> None:
        location = str(path)
        if line is not None:
            location += f":{line}"
        if field is not None:
            location += f" [{field}]"
        super().__init__(f"{location}: {message}")
        self.path = path
        self.line = line
        self.field = field


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputFileError(f"cannot read file ({exc.strerror or exc})", path) from exc


def _data_lines(path: Path) -> list[tuple[int, list[str]]]:
    """Non-blank, non-comment lines split on whitespace, with 1-based line numbers."""
    lines = []
    for number, line in enumerate(_read_text(path).splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        lines.append((number, stripped.split()))
    return lines


def _parse_float(token: str, path: Path, line: int) -> float:
    try:
        value = float(token)
    except ValueError as exc:
        raise InputFileError(f"not a number: {token!r}", path, line) from exc
    if not math.isfinite(value):
        raise InputFileError(f"non-finite value {token!r}", path, line)
    return value


def read_matrix(path: Path) -> DenseSymmetricMatrix:
    """First data line holds n, then n lines of n whitespace-separated decimals."""
    path = Path(path)
    lines = _data_lines(path)
    if not lines:
        raise InputFileError("empty matrix file", path)
    header_line, header = lines[0]
    if len(header) != 1:
        raise InputFileError("first line must hold the dimension only", path, header_line)
    try:
        n = int(header[0])
    except ValueError as exc:
        message = f"dimension is not an integer: {header[0]!r}"
        raise InputFileError(message, path, header_line) from exc
    if n < 1:
        raise InputFileError(f"dimension must be positive, got {n}", path, header_line)
    body = lines[1:]
    if len(body) != n:
        raise InputFileError(f"expected {n} matrix rows, found {len(body)}", path)
    rows = []
    for number, tokens in body:
        if len(tokens) != n:
            raise InputFileError(f"expected {n} entries, found {len(tokens)}", path, number)
        rows.append([_parse_float(token, path, number) for token in tokens])
    try:
        return DenseSymmetricMatrix.from_rows(rows)
    except InputError as exc:
        raise InputFileError(str(exc), path) from exc


def read_state(path: Path, normalize: bool = False) -> StateVector:
    """One amplitude per line."""
    path = Path(path)
    values = []
    for number, tokens in _data_lines(path):
        if len(tokens) != 1:
            raise InputFileError("expected one amplitude per line", path, number)
        values.append(_parse_float(tokens[0], path, number))
    if not values:
        raise InputFileError("empty state file", path)
    try:
        return StateVector.from_amplitudes(values, normalize=normalize)
    except InputError as exc:
        raise InputFileError(str(exc), path) from exc


def _format(value: float) -> str:
    return repr(float(value))


def format_matrix(matrix: DenseSymmetricMatrix) -> str:
    lines = [str(matrix.n)]
    lines.extend(" ".join(_format(value) for value in row) for row in matrix.entries)
    return "\n".join(lines) + "\n"


def format_state(state: StateVector) -> str:
    return "\n".join(_format(value) for value in state.amplitudes) + "\n"


def _load_json(path: Path) -> Mapping[str, object]:
    text = _read_text(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputFileError(f"invalid JSON: {exc.msg}", path, exc.lineno) from exc
    if not isinstance(data, dict):
        raise InputFileError("top-level JSON value must be an object", path)
    return data


def read_spectral_model(path: Path) -> SpectralModel:
    path = Path(path)
    data = _load_json(path)
    for key in ("eigenvalues", "overlaps"):
        if key not in data:
            raise InputFileError("missing field", path, field=key)
    try:
        return SpectralModel.from_json_dict(data)
    except InputError as exc:
        raise InputFileError(str(exc), path) from exc


def read_moments(path: Path) -> MomentVector:
    path = Path(path)
    data = _load_json(path)
    for key in ("basis", "values"):
        if key not in data:
            raise InputFileError("missing field", path, field=key)
    window_data = data.get("window")
    try:
        window = None
        if window_data is not None:
            bounds = dict(window_data)  # type: ignore[call-overload]
            window = ScalingWindow(float(bounds["E_L"]), float(bounds["E_U"]))
        return MomentVector(
            basis=Basis(str(data["basis"])),
            values=np.asarray(data["values"], dtype=float),
            window=window,
        )
    except KeyError as exc:
        raise InputFileError("missing field", path, field=f"window.{exc.args[0]}") from exc
    except (TypeError, ValueError) as exc:
        raise InputFileError(f"malformed moments: {exc}", path) from exc


def atomic_write_text(path: Path, text: str) -> None:
    """Write next to the destination, then rename over it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temporary = path.with_name(f".{path.name}.tmp")
    temporary.write_text(text, encoding="utf-8")
    os.replace(temporary, path)


def write_json(path: Path, payload: Mapping[str, object]) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def format_csv(
    header: Sequence[str],
    rows: Iterable[Sequence[object]],
    config: Mapping[str, object] | None = None,
) -> str:
    """CSV text; the resolved config, when given, goes on a leading ``# config=`` line."""
    buffer = io.StringIO()
    if config is not None:
        buffer.write("# config=" + json.dumps(config, sort_keys=True, separators=(",", ":")) + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(_format(cell) if isinstance(cell, float) else cell for cell in row)
    return buffer.getvalue()
