"""LINQS citation-corpus parsing (``.content`` / ``.cites``) and artifact files.

``.content``: one paper per line, ``<paper_id>\\t<w_1>\\t...\\t<w_L>\\t<class_label>``
with binary word indicators.

``.cites``: one citation per line, ``<cited_id>\\t<citing_id>``.  Citations are
treated as undirected; references to ids missing from the content file are
skipped and counted.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .tensor import csr_from_coo

__all__ = [
    "DatasetFormatError",
    "Dataset",
    "Citations",
    "load_content",
    "load_cites",
    "load_dataset",
    "edges_to_adjacency",
    "atomic_write_text",
    "write_json",
    "write_embeddings",
    "read_embeddings",
    "write_assignments",
    "read_assignments",
    "write_edge_list",
    "read_edge_list",
]

log = logging.getLogger(__name__)


class DatasetFormatError(ValueError):
    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = str(path)
        self.lineno = lineno


@dataclass
class Citations:
    edges: np.ndarray  # (m, 2) int, i < j, deduplicated, lexicographically sorted
    n_lines: int
    n_dangling: int
    n_self: int


@dataclass
class Dataset:
    ids: list[str]
    X: np.ndarray
    labels: list[str]
    cite_edges: np.ndarray | None = None
    citations: Citations | None = field(default=None, repr=False)
    name: str = ""

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def id_index(self) -> dict[str, int]:
        return {pid: i for i, pid in enumerate(self.ids)}

    @property
    def classes(self) -> list[str]:
        return sorted(set(self.labels))

    def adjacency(self) -> sp.csr_array:
        if self.cite_edges is None:
            raise ValueError("dataset was loaded without citations")
        return edges_to_adjacency(self.cite_edges, self.n)


def _split(line: str) -> list[str]:
    return line.rstrip("\r\n").split("\t")


def load_content(path) -> Dataset:
    """Parse a ``.content`` file; row order follows the file."""
    path = Path(path)
    ids, rows, labels = [], [], []
    seen = {}
    width = None
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = _split(line)
            if len(parts) < 3:
                raise DatasetFormatError(path, lineno, "expected id, features and label")
            pid, words, label = parts[0], parts[1:-1], parts[-1]
            if width is None:
                width = len(words)
            elif len(words) != width:
                raise DatasetFormatError(
                    path, lineno, f"expected {width} features, found {len(words)}"
                )
            if pid in seen:
                raise DatasetFormatError(
                    path, lineno, f"duplicate paper id {pid!r} (first on line {seen[pid]})"
                )
            row = np.array(words)
            bad = (row != "0") & (row != "1")
            if bad.any():
                tok = row[np.argmax(bad)]
                raise DatasetFormatError(path, lineno, f"non-binary feature token {tok!r}")
            seen[pid] = lineno
            ids.append(pid)
            rows.append(row == "1")
            labels.append(label)
    if not ids:
        raise DatasetFormatError(path, 0, "no samples found")
    X = np.vstack(rows).astype(np.float64)
    return Dataset(ids=ids, X=X, labels=labels, name=path.stem)


def load_cites(path, id_index: dict[str, int]) -> Citations:
    """Parse a ``.cites`` file into deduplicated undirected index pairs."""
    path = Path(path)
    pairs = set()
    n_lines = n_dangling = n_self = 0
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DatasetFormatError(path, lineno, "expected '<cited_id>\\t<citing_id>'")
            n_lines += 1
            i, j = id_index.get(parts[0]), id_index.get(parts[1])
            if i is None or j is None:
                n_dangling += 1
                continue
            if i == j:
                n_self += 1
                continue
            pairs.add((min(i, j), max(i, j)))
    if n_dangling:
        log.info("%s: skipped %d citations referencing unknown ids", path.name, n_dangling)
    edges = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
    return Citations(edges=edges, n_lines=n_lines, n_dangling=n_dangling, n_self=n_self)


def load_dataset(content, cites=None) -> Dataset:
    ds = load_content(content)
    if cites is not None:
        ds.citations = load_cites(cites, ds.id_index)
        ds.cite_edges = ds.citations.edges
    return ds


def edges_to_adjacency(edges, n: int) -> sp.csr_array:
    """Symmetric binary adjacency from index pairs; self-pairs are dropped."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        raise ValueError(f"edge index out of range for n={n}")
    edges = edges[edges[:, 0] != edges[:, 1]]
    i, j = edges[:, 0], edges[:, 1]
    A = csr_from_coo(np.r_[i, j], np.r_[j, i], 1.0, (n, n))
    A.data[:] = 1.0
    return A


# ---------------------------------------------------------------- artifacts


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the target directory and rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2) + "\n")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_embeddings(path, Z, ids=None) -> None:
    """CSV ``id,z0,...,z{D-1}`` with 17 significant digits (exact round trip)."""
    Z = np.asarray(Z, dtype=np.float64)
    ids = range(Z.shape[0]) if ids is None else ids
    lines = [",".join(["id"] + [f"z{d}" for d in range(Z.shape[1])])]
    for pid, row in zip(ids, Z):
        lines.append(",".join([str(pid)] + [_fmt(v) for v in row]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_embeddings(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "id":
            raise DatasetFormatError(path, 1, "embedding CSV must start with an 'id' column")
        ids, rows = [], []
        for row in reader:
            ids.append(row[0])
            rows.append([float(v) for v in row[1:]])
    return ids, np.array(rows, dtype=np.float64).reshape(len(ids), len(header) - 1)


def write_assignments(path, labels, ids=None) -> None:
    labels = np.asarray(labels)
    ids = range(labels.size) if ids is None else ids
    lines = ["id,cluster"] + [f"{pid},{int(c)}" for pid, c in zip(ids, labels)]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_assignments(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["id", "cluster"]:
            raise DatasetFormatError(path, 1, "assignment CSV header must be 'id,cluster'")
        ids, labels = [], []
        for row in reader:
            ids.append(row[0])
            labels.append(int(row[1]))
    return ids, np.array(labels, dtype=np.int64)


def write_edge_list(path, S) -> None:
    """Every stored (row, col) pair as ``i<TAB>j``, 0-based, lexicographic order."""
    coo = sp.coo_array(S)
    order = np.lexsort((coo.col, coo.row))
    lines = [f"{coo.row[t]}\t{coo.col[t]}" for t in order]
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def read_edge_list(path) -> np.ndarray:
    pairs = np.loadtxt(path, dtype=np.int64, delimiter="\t", ndmin=2)
    return pairs.reshape(-1, 2)
