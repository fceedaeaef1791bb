"""Loaders for reference rating datasets, binarized to user-item interactions."""

import csv
from dataclasses import dataclass, field
import json
from pathlib import Path

import numpy as np
from scipy import sparse


class DataFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ReferenceDataset:
    """Binary interactions with ids remapped to dense 0-based indices.

    ``user_ids[k]`` / ``item_ids[k]`` hold the original id of dense index ``k``.
    """

    user_idx: np.ndarray
    item_idx: np.ndarray
    user_ids: list
    item_ids: list
    provenance: dict = field(default_factory=dict)

    @property
    def users(self):
        return len(self.user_ids)

    @property
    def items(self):
        return len(self.item_ids)

    @property
    def pairs(self):
        return len(self.user_idx)

    def to_csr(self):
        data = np.ones(self.pairs, dtype=np.float64)
        return sparse.csr_matrix((data, (self.user_idx, self.item_idx)), shape=(self.users, self.items))

    def save_mapping(self, path):
        with open(path, "w") as f:
            json.dump({"users": self.user_ids, "items": self.item_ids, "provenance": self.provenance}, f)


def _sort_key(v):
    # numeric ids sort numerically, then anything else lexically
    try:
        return (0, int(v), "")
    except ValueError:
        return (1, 0, v)


def _build(pairs, provenance):
    if not pairs:
        raise DataFormatError(f"{provenance['path']}: no interactions")
    pairs = set(pairs)
    users = sorted({u for u, _ in pairs}, key=_sort_key)
    items = sorted({i for _, i in pairs}, key=_sort_key)
    umap = {u: k for k, u in enumerate(users)}
    imap = {i: k for k, i in enumerate(items)}
    arr = np.array(sorted((umap[u], imap[i]) for u, i in pairs), dtype=np.int64)
    return ReferenceDataset(arr[:, 0].copy(), arr[:, 1].copy(), users, items, provenance)


def load_movielens(path) -> ReferenceDataset:
    """Read a MovieLens-1M ``ratings.dat`` (``UserID::MovieID::Rating::Timestamp``)."""
    path = Path(path)
    pairs = []
    with open(path, encoding="latin-1") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("::")
            if len(parts) != 4 or not all(p.strip().lstrip("-").isdigit() for p in parts):
                raise DataFormatError(f"{path}:{lineno}: malformed rating line {line!r}")
            pairs.append((parts[0].strip(), parts[1].strip()))
    return _build(pairs, {"path": str(path), "format": "movielens"})


def load_delimited(path, delimiter=",", user_col=0, item_col=1, header=True) -> ReferenceDataset:
    """Read a delimited file; columns are names (with ``header``) or 0-based indices."""
    path = Path(path)
    pairs = []
    with open(path, newline="", encoding="utf-8") as f:
        rd = csv.reader(f, delimiter=delimiter)
        cols = []
        if header:
            names = next(rd, None)
            if names is None:
                raise DataFormatError(f"{path}: empty file")
            names = [n.strip() for n in names]
            for c in (user_col, item_col):
                if isinstance(c, int) or str(c).isdigit():
                    if int(c) >= len(names):
                        raise DataFormatError(f"{path}: missing column {c}")
                    cols.append(int(c))
                elif c in names:
                    cols.append(names.index(c))
                else:
                    raise DataFormatError(f"{path}: missing column {c!r}")
        else:
            for c in (user_col, item_col):
                if not (isinstance(c, int) or str(c).isdigit()):
                    raise DataFormatError(f"{path}: column {c!r} must be an index without a header")
                cols.append(int(c))
        ucol, icol = cols
        for lineno, row in enumerate(rd, 2 if header else 1):
            if not row:
                continue
            if max(ucol, icol) >= len(row):
                raise DataFormatError(f"{path}:{lineno}: missing column in row {row!r}")
            pairs.append((row[ucol].strip(), row[icol].strip()))
    return _build(pairs, {"path": str(path), "format": "delimited", "delimiter": delimiter})


def load_dataset(path, fmt="movielens", **kw) -> ReferenceDataset:
    if not Path(path).exists():
        raise FileNotFoundError(f"dataset not found: {path}")
    if fmt == "movielens":
        return load_movielens(path)
    if fmt == "delimited":
        return load_delimited(path, **kw)
    raise ValueError(f"unknown dataset format {fmt!r}; valid options: movielens, delimited")
