"""Dataset files: a raw float64 block file plus a ``.meta`` text sidecar.

Layout
------
``<path>`` holds the arrays below back to back, each as little-endian
float64 in column-major (Fortran) order, with no header or padding:

==============  ==========  ===========================================
block           shape       content
==============  ==========  ===========================================
``X_tilde``     d x n       contaminated data
``X``           d x n       clean data
``truth_U``     d x r       population spike basis
``means``       d x k       mean-shift vectors ``m_i``
``directions``  d x k       unit directions of ``m_i``
``memberships`` k x n       0/1 membership rows (stored as float64)
``thetas``      k x 1       ``sqrt(pi_i) * ||m_i||``
``u2``          d x 1       optional, extra outlier spike direction
==============  ==========  ===========================================

``<path>.meta`` is UTF-8 text with one ``key=value`` per line, sorted by key.
Each block has a line ``block.<name>=<offset>,<rows>,<cols>`` (offset in
bytes).  Other keys: ``format``, ``version``, ``d``, ``n``, ``r``, ``k``,
``seed``, ``ells`` (comma list) and free-form ``spec.<name>`` entries that
record the generating parameters.
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .simulate import Dataset
from .spectral import DataError

__all__ = ["save_dataset", "load_dataset", "read_meta", "load_matrix", "FORMAT_NAME"]

FORMAT_NAME = "mspca-dataset"
FORMAT_VERSION = 1
_DTYPE = np.dtype("<f8")
_BLOCKS = ("X_tilde", "X", "truth_U", "means", "directions", "memberships", "thetas")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def save_dataset(ds: Dataset, path, spec: dict | None = None):
    """Write ``ds`` to ``path`` and ``path.meta``; returns both paths."""
    path = Path(path)
    arrays = {
        "X_tilde": ds.X_tilde,
        "X": ds.X,
        "truth_U": ds.truth_U,
        "means": ds.means,
        "directions": ds.directions,
        "memberships": ds.memberships.astype(float),
        "thetas": np.asarray(ds.thetas, dtype=float).reshape(-1, 1),
    }
    if "u2" in ds.extras:
        arrays["u2"] = np.asarray(ds.extras["u2"], dtype=float).reshape(-1, 1)
    meta = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "d": ds.d,
        "n": ds.n,
        "r": ds.truth_U.shape[1],
        "k": ds.means.shape[1],
        "seed": "" if ds.seed is None else int(ds.seed),
        "ells": tuple(float(e) for e in ds.ells),
    }
    if "ell2" in ds.extras:
        meta["ell2"] = float(ds.extras["ell2"])
    offset = 0
    with open(path, "wb") as fh:
        for name, arr in arrays.items():
            arr = np.asarray(arr, dtype=float)
            if arr.ndim == 1:
                arr = arr.reshape(-1, 1)
            fh.write(np.asfortranarray(arr).astype(_DTYPE).tobytes(order="F"))
            meta[f"block.{name}"] = f"{offset},{arr.shape[0]},{arr.shape[1]}"
            offset += arr.size * _DTYPE.itemsize
    for key, val in (spec or {}).items():
        meta[f"spec.{key}"] = _fmt(val)
    meta_path = Path(str(path) + ".meta")
    lines = [f"{k}={_fmt(v)}" for k, v in sorted(meta.items())]
    meta_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path, meta_path


def read_meta(path):
    """Parse a ``.meta`` sidecar (pass either the data or the meta path)."""
    path = Path(path)
    meta_path = path if path.suffix == ".meta" else Path(str(path) + ".meta")
    try:
        text = meta_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read metadata {meta_path}: {exc}") from exc
    meta = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise DataError(f"{meta_path}:{lineno}: expected key=value")
        meta[key.strip()] = val.strip()
    if meta.get("format") != FORMAT_NAME:
        raise DataError(f"{meta_path}: not a {FORMAT_NAME} sidecar")
    return meta


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x)


def load_dataset(path) -> Dataset:
    """Inverse of :func:`save_dataset`."""
    path = Path(path)
    meta = read_meta(path)
    try:
        raw = np.fromfile(path, dtype=_DTYPE)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    blocks = {}
    for key, val in meta.items():
        if not key.startswith("block."):
            continue
        try:
            off, rows, cols = (int(x) for x in val.split(","))
        except ValueError as exc:
            raise DataError(f"bad block entry {key}={val}") from exc
        start = off // _DTYPE.itemsize
        if off % _DTYPE.itemsize or start + rows * cols > raw.size:
            raise DataError(f"block {key[6:]} lies outside {path} ({raw.size * 8} bytes)")
        blocks[key[6:]] = raw[start:start + rows * cols].reshape((rows, cols), order="F").astype(float)
    missing = [b for b in _BLOCKS if b not in blocks]
    if missing:
        raise DataError(f"{path}: missing blocks {missing}")
    d, n = int(meta["d"]), int(meta["n"])
    if blocks["X_tilde"].shape != (d, n) or blocks["X"].shape != (d, n):
        raise DataError(f"{path}: data blocks do not match d={d}, n={n}")
    extras = {}
    if "u2" in blocks:
        extras["u2"] = blocks["u2"][:, 0]
    if "ell2" in meta:
        extras["ell2"] = float(meta["ell2"])
    seed = int(meta["seed"]) if meta.get("seed") else None
    return Dataset(
        blocks["X"], blocks["X_tilde"], blocks["truth_U"], _floats(meta.get("ells", "")),
        blocks["means"], blocks["directions"], blocks["memberships"].astype(np.int8),
        blocks["thetas"][:, 0], seed, extras,
    )


def load_matrix(path):
    """Read a ``d x n`` data matrix for analysis.

    Accepts a dataset file (its ``X_tilde`` block is used), a ``.npy`` array,
    or whitespace/comma separated text with one row per coordinate.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    if os.path.exists(str(path) + ".meta"):
        return load_dataset(path).X_tilde
    try:
        if path.suffix == ".npy":
            X = np.load(path, allow_pickle=False)
        else:
            with open(path, encoding="utf-8") as fh:
                first = fh.readline()
            X = np.loadtxt(path, delimiter="," if "," in first else None, ndmin=2)
    except (OSError, ValueError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc
    if X.ndim != 2:
        raise DataError(f"{path}: expected a 2-D array, got shape {X.shape}")
    return X
