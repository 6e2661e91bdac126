"""Planar embeddings of code-distance matrices and data-file emission.

Classical (Torgerson) scaling keeps the pipeline deterministic: double-center
the squared distances, take the top two spectral axes, fix signs. Emission
covers every artifact a run produces: CSV for generation histories and
matrices, JSON-shaped text for reports, snapshots and embeddings. Numbers are
printed with 12 significant digits and files always end with a newline, so
identical inputs give byte-identical files on any platform.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import UsageError

_SYMMETRY_TOL = 1e-9


@dataclass(frozen=True)
class Embedding2D:
    """Planar point configuration with per-point labels and a residual."""

    points: np.ndarray  # (n, 2)
    labels: tuple
    stress: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise UsageError(f"points must be n x 2, got shape {pts.shape}")
        if not np.isfinite(pts).all():
            raise UsageError("embedding coordinates must be finite")
        if not np.isfinite(self.stress) or self.stress < 0.0:
            raise UsageError(f"stress must be finite and >= 0, got {self.stress}")
        object.__setattr__(self, "points", pts)

    def to_dict(self) -> dict:
        return {
            "points": [[float(x), float(y)] for x, y in self.points],
            "labels": list(self.labels),
            "stress": float(self.stress),
        }


def _as_square(obj) -> tuple:
    """(matrix, labels) from a distance-matrix-like object."""
    labels = ()
    if hasattr(obj, "d"):
        mat, labels = np.asarray(obj.d, dtype=float), tuple(obj.labels)
    else:
        mat = np.asarray(obj, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise UsageError(f"expected a square matrix, got shape {mat.shape}")
    return mat, labels


def mds_embed(d, labels=None) -> Embedding2D:
    """Classical MDS of a symmetric zero-diagonal distance matrix.

    Axes are ordered by descending eigenvalue and sign-fixed so the first
    nonzero coordinate of each axis is positive; the output is centered.
    Negative eigenvalues (the distance need not be Euclidean) are clamped,
    and all residual error shows up in the reported stress.
    """
    mat, mat_labels = _as_square(d)
    if labels is None:
        labels = mat_labels
    labels = tuple(labels)
    n = mat.shape[0]
    if labels and len(labels) != n:
        raise UsageError(f"{len(labels)} labels for {n} points")
    if n == 0:
        return Embedding2D(np.zeros((0, 2)), labels, 0.0)
    if np.abs(mat - mat.T).max() > _SYMMETRY_TOL:
        raise UsageError("distance matrix must be symmetric")
    if np.abs(np.diag(mat)).max() > _SYMMETRY_TOL:
        raise UsageError("distance matrix must have a zero diagonal")

    sq = mat * mat
    centering = np.eye(n) - np.full((n, n), 1.0 / n)
    gram = -0.5 * centering @ sq @ centering
    gram = 0.5 * (gram + gram.T)  # keep eigh on the exactly symmetric part
    eigvals, eigvecs = np.linalg.eigh(gram)
    order = np.argsort(eigvals)[::-1][: min(2, n)]
    axes = np.clip(eigvals[order], 0.0, None)
    points = np.zeros((n, 2))
    points[:, : len(order)] = eigvecs[:, order] * np.sqrt(axes)
    points = points - points.mean(axis=0)

    scale = np.abs(points).max() if n else 0.0
    tol = 1e-12 * max(scale, 1.0)
    for k in range(2):
        col = points[:, k]
        nz = np.flatnonzero(np.abs(col) > tol)
        if nz.size and col[nz[0]] < 0.0:
            points[:, k] = -col

    diff = points[:, None, :] - points[None, :, :]
    emb = np.sqrt((diff * diff).sum(axis=2))
    off = ~np.eye(n, dtype=bool)
    if off.any():
        stress = float(np.sqrt(np.mean((emb[off] - mat[off]) ** 2)))
    else:
        stress = 0.0
    return Embedding2D(points, labels, stress)


def _fmt(value) -> str:
    """Canonical 12-significant-digit text for a number."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    x = float(value)
    if not np.isfinite(x):
        raise UsageError(f"cannot emit non-finite number {x!r}")
    if x == 0.0:
        x = 0.0  # collapse -0.0
    return f"{x:.12g}"


def _cell(value) -> str:
    if isinstance(value, str):
        if any(ch in value for ch in ',"\n\r'):
            return '"' + value.replace('"', '""') + '"'
        return value
    return _fmt(value)


def _write_text(path, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as err:
        raise UsageError(f"cannot write {path}: {err}") from err


def write_csv(path, header, rows) -> None:
    """Comma-separated table with a header line and a trailing newline."""
    lines = [",".join(_cell(h) for h in header)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    _write_text(path, "\n".join(lines) + "\n")


def read_csv(path) -> tuple:
    """(header, rows) with numeric cells parsed back to int/float."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            raw = fh.read()
    except OSError as err:
        raise UsageError(f"cannot read {path}: {err}") from err
    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    parsed = [_split_csv_line(line) for line in lines]
    if not parsed:
        raise UsageError(f"{path}: empty CSV")
    return parsed[0], [[_parse_cell(c) for c in row] for row in parsed[1:]]


def _split_csv_line(line: str) -> list:
    out, cur, quoted = [], [], False
    i = 0
    while i < len(line):
        ch = line[i]
        if quoted:
            if ch == '"':
                if i + 1 < len(line) and line[i + 1] == '"':
                    cur.append('"')
                    i += 1
                else:
                    quoted = False
            else:
                cur.append(ch)
        elif ch == '"':
            quoted = True
        elif ch == ",":
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
        i += 1
    out.append("".join(cur))
    return out


def _parse_cell(cell: str):
    try:
        return int(cell)
    except ValueError:
        pass
    try:
        return float(cell)
    except ValueError:
        return cell


def _json_text(value, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [
            f'{pad}  {json.dumps(str(k))}: {_json_text(v, indent + 1)}'
            for k, v in value.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(value, (list, tuple)):
        seq = list(value)
        if not seq:
            return "[]"
        flat = all(not isinstance(v, (dict, list, tuple)) for v in seq)
        if flat and len(seq) <= 16:
            return "[" + ", ".join(_json_text(v) for v in seq) + "]"
        items = [f"{pad}  {_json_text(v, indent + 1)}" for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if value is None:
        return "null"
    if isinstance(value, str):
        return json.dumps(value)
    return _fmt(value)


def write_json(path, payload: dict) -> None:
    _write_text(path, _json_text(payload) + "\n")


def read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as err:
        raise UsageError(f"cannot read {path}: {err}") from err


def _matrix_table(obj) -> tuple:
    """(header, rows) for a 2-D array-like with symbol/label ids."""
    if hasattr(obj, "d"):
        mat = np.asarray(obj.d, dtype=float)
        row_ids = col_ids = list(obj.labels) or [str(i) for i in range(mat.shape[0])]
    elif hasattr(obj, "p"):
        mat = np.asarray(obj.p, dtype=float)
        row_ids = [str(i) for i in range(mat.shape[0])]
        col_ids = [str(j) for j in range(mat.shape[1])]
    else:
        mat = np.asarray(obj, dtype=float)
        if mat.ndim != 2:
            raise UsageError(f"matrix emission needs 2 dimensions, got {mat.ndim}")
        row_ids = [str(i) for i in range(mat.shape[0])]
        col_ids = [str(j) for j in range(mat.shape[1])]
    header = ["id"] + [str(c) for c in col_ids]
    rows = [[str(row_ids[i])] + list(mat[i]) for i in range(mat.shape[0])]
    return header, rows


def emit(obj, format: str, path) -> None:
    """Write one run artifact. CSV fits tabular data, JSON structured data."""
    if format == "csv":
        if hasattr(obj, "columns") and hasattr(obj, "rows"):
            write_csv(path, obj.columns(), obj.rows())
        else:
            header, rows = _matrix_table(obj)
            write_csv(path, header, rows)
        return
    if format == "json":
        if hasattr(obj, "to_dict"):
            write_json(path, obj.to_dict())
        elif isinstance(obj, dict):
            write_json(path, obj)
        else:
            raise UsageError(f"cannot emit {type(obj).__name__} as JSON")
        return
    raise UsageError(f"unknown emission format {format!r}; expected 'csv' or 'json'")
