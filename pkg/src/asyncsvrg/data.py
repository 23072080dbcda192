"""Dataset ingestion: LibSVM text parsing, synthetic problem generation, stats."""

from __future__ import annotations

import gzip
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .model import Dataset, SparseExample


class ParseError(ValueError):
    """Rejection of a malformed LibSVM line; carries the 1-based line number."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


@dataclass(frozen=True)
class DatasetMeta:
    n: int
    d: int
    nnz: int
    source: str
    max_row_sq_norm: float


def _open_text(source):
    if hasattr(source, "read"):
        return source, False
    path = Path(source)
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb")), True
    return open(path, "r"), True


def parse_libsvm(source, dim=None) -> Dataset:
    """Parse LibSVM text: ``<label> <idx>:<val> ...`` with 1-based indices.

    Labels "+1"/"1" map to +1 and "-1" maps to -1; anything else (including
    "0") is rejected.  Indices must be strictly increasing per line.  ``dim``
    pins the feature dimension (to align train/test sets); the default is the
    maximum index observed.  Gzip files are handled transparently by path
    suffix.
    """
    stream, owned = _open_text(source)
    examples = []
    try:
        for lineno, raw in enumerate(stream, start=1):
            line = raw.strip()
            if not line:
                continue
            tokens = line.split()
            label_tok = tokens[0]
            if label_tok in ("+1", "1"):
                label = 1
            elif label_tok == "-1":
                label = -1
            else:
                raise ParseError(lineno, f"label must be +1/1/-1, got {label_tok!r}")
            idx = np.empty(len(tokens) - 1, dtype=np.int64)
            vals = np.empty(len(tokens) - 1, dtype=np.float64)
            prev = 0
            for j, tok in enumerate(tokens[1:]):
                left, sep, right = tok.partition(":")
                if not sep:
                    raise ParseError(lineno, f"malformed feature token {tok!r}")
                try:
                    k = int(left)
                    v = float(right)
                except ValueError:
                    raise ParseError(lineno, f"malformed feature token {tok!r}") from None
                if k <= prev:
                    raise ParseError(
                        lineno, f"indices must be strictly increasing (index {k} after {prev})")
                idx[j] = k - 1  # convert to 0-based
                vals[j] = v
                prev = k
            examples.append(SparseExample(idx, vals, label))
    finally:
        if owned:
            stream.close()
    if not examples:
        raise ParseError(0, "empty input")
    try:
        return Dataset.from_examples(examples, dim=dim)
    except ValueError as e:
        raise ParseError(0, str(e)) from None


def serialize_libsvm(data: Dataset, target) -> None:
    """Write a Dataset back out in LibSVM text format (round-trip exact)."""
    stream, owned = (target, False) if hasattr(target, "write") else (open(target, "w"), True)
    try:
        for i in range(data.n):
            lo, hi = data.indptr[i], data.indptr[i + 1]
            label = "+1" if data.labels[i] > 0 else "-1"
            feats = " ".join(
                f"{int(k) + 1}:{float(v)!r}"
                for k, v in zip(data.col_indices[lo:hi], data.values[lo:hi]))
            stream.write(label + (" " + feats if feats else "") + "\n")
    finally:
        if owned:
            stream.close()


def generate_synthetic(n: int, d: int, seed: int, separation: float = 5.0) -> Dataset:
    """Seeded synthetic logistic problem with L2-normalized rows.

    A planted unit weight vector labels rows through a logistic channel:
    P(y=+1 | x) = sigmoid(separation * x.w_planted).  ``separation=inf``
    switches the noise off, so the planted vector classifies every example
    correctly.  Deterministic for a fixed (n, d, seed, separation).
    """
    if n < 1 or d < 1:
        raise ValueError("need n >= 1 and d >= 1")
    rng = np.random.default_rng([seed, n, d])
    planted = rng.standard_normal(d)
    planted /= np.linalg.norm(planted)
    X = rng.standard_normal((n, d))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    margins = X @ planted
    if np.isinf(separation):
        labels = np.where(margins >= 0, 1.0, -1.0)
    else:
        prob_pos = expit(separation * margins)
        labels = np.where(rng.random(n) < prob_pos, 1.0, -1.0)
    indptr = np.arange(n + 1, dtype=np.int64) * d
    col = np.tile(np.arange(d, dtype=np.int64), n)
    return Dataset(indptr, col, X.ravel(), labels, d)


def synthetic_descriptor(n: int, d: int, seed: int, separation: float) -> str:
    """Small key=value header that reproduces a synthetic dataset."""
    return (f"kind=synthetic\nn={n}\nd={d}\nseed={seed}\nseparation={separation!r}\n")


def parse_synthetic_descriptor(text: str) -> Dataset:
    kv = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        kv[key.strip()] = value.strip()
    if kv.get("kind") != "synthetic":
        raise ValueError("descriptor is not a synthetic dataset header")
    return generate_synthetic(int(kv["n"]), int(kv["d"]), int(kv["seed"]),
                              float(kv["separation"]))


def dataset_stats(data: Dataset, source: str = "<memory>") -> DatasetMeta:
    return DatasetMeta(
        n=data.n,
        d=data.dim,
        nnz=data.nnz,
        source=source,
        max_row_sq_norm=float(data.row_sq_norms.max()),
    )
