"""Descriptor loading and table / report emission."""
import io
import json
import os
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from services.errors import DescriptorError


def load_json(path: str) -> Dict[str, Any]:
    if not os.path.isfile(path):
        raise DescriptorError("file not found", path)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except json.JSONDecodeError as exc:
        raise DescriptorError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", path)


def load_matrix_csv(path: str) -> List[List[List[float]]]:
    """Square complex matrix from CSV rows of interleaved re,im entries"""
    if not os.path.isfile(path):
        raise DescriptorError("file not found", path)
    try:
        raw = np.loadtxt(path, delimiter=",", comments="#", ndmin=2, dtype=float)
    except ValueError as exc:
        raise DescriptorError(f"unreadable matrix: {exc}", path)
    rows, columns = raw.shape
    if columns % 2:
        raise DescriptorError(f"{columns} columns; entries must come as re,im pairs", path)
    if columns // 2 != rows:
        raise DescriptorError(f"matrix is {rows}×{columns // 2}, expected square", path)
    return raw.reshape(rows, rows, 2).tolist()


def matrix_from_nested(entries: List[List[List[float]]]) -> np.ndarray:
    pairs = np.asarray(entries, dtype=float)
    return pairs[..., 0] + 1j * pairs[..., 1]


def matrix_to_nested(matrix: np.ndarray) -> List[List[List[float]]]:
    matrix = np.asarray(matrix, dtype=complex)
    return np.stack([matrix.real, matrix.imag], axis=-1).tolist()


def parse_int_list(text: Optional[str], location: str = "--n") -> List[int]:
    """'1..20', '16,32,64' or '5'"""
    if text is None or not text.strip():
        return []
    values: List[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if ".." in part:
                start, stop = (int(bound) for bound in part.split("..", 1))
                if stop < start:
                    raise ValueError(f"empty range {part}")
                values.extend(range(start, stop + 1))
            else:
                values.append(int(part))
    except ValueError as exc:
        raise DescriptorError(str(exc), location)
    return values


def parse_complex_list(text: Optional[str], location: str) -> List[complex]:
    """Comma separated Python complex literals, e.g. '0.5,0.3+0.2j'"""
    if text is None or not text.strip():
        return []
    try:
        return [complex(part.strip().replace(" ", "")) for part in text.split(",")]
    except ValueError as exc:
        raise DescriptorError(str(exc), location)


def table_to_csv(frame: pd.DataFrame, seed: int, digest: str) -> str:
    """CSV text whose first line records the seed and the config digest"""
    buffer = io.StringIO()
    buffer.write(f"# seed={seed} digest={digest}\n")
    frame.to_csv(buffer, index=False, float_format="%.17g")
    return buffer.getvalue()


def write_text(text: str, path: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)
