"""Dense similarity kernels over embedding vectors.

Kernels are cosine similarities affinely rescaled to [0, 1] via
s -> (1 + s) / 2, which keeps square kernels positive semidefinite
(the rescaled matrix is a convex combination of the all-ones matrix
and a Gram matrix) and keeps every downstream formula that assumes
nonnegative similarities well behaved.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Regularization defaults: the log-determinant family needs an invertible
# diagonal bump, everything else runs on the raw rescaled kernel.
DEFAULT_LOGDET_EPS = 1e-2

_MAGIC = b"SIMK"
_HEADER = struct.Struct("<4sIIB3x")  # magic, n_rows, n_cols, symmetric flag


@dataclass(frozen=True)
class EmbeddingMatrix:
    """A stack of row vectors with stable external identifiers."""

    data: np.ndarray
    ids: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64))
        if data.ndim != 2:
            raise ValueError(f"embedding matrix must be 2-D, got shape {data.shape}")
        ids = np.asarray(self.ids)
        if ids.shape != (data.shape[0],):
            raise ValueError(
                f"ids must align with rows: {ids.shape[0] if ids.ndim else 0} ids "
                f"for {data.shape[0]} rows"
            )
        if len(np.unique(ids)) != len(ids):
            raise ValueError("ids must be unique")
        if not np.all(np.isfinite(data)):
            bad = np.where(~np.isfinite(data).all(axis=1))[0][0]
            raise ValueError(f"non-finite entries in row id={ids[bad].item()!r}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "ids", ids)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    @classmethod
    def from_array(cls, data: np.ndarray, ids: Sequence | None = None) -> "EmbeddingMatrix":
        data = np.asarray(data, dtype=np.float64)
        if ids is None:
            ids = np.arange(data.shape[0])
        return cls(data=data, ids=np.asarray(ids))


@dataclass(frozen=True)
class SimilarityKernel:
    """Dense row-major similarity matrix, square or rectangular.

    Entries live in [0, 1] after rescaling; a square symmetric kernel
    carries an optional diagonal regularization eps recorded in
    ``regularization`` (diagonal entries are then 1 + eps).
    """

    data: np.ndarray
    symmetric: bool
    row_ids: np.ndarray
    col_ids: np.ndarray
    regularization: float = 0.0

    def __post_init__(self):
        data = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64))
        if data.ndim != 2:
            raise ValueError("kernel data must be 2-D")
        if self.symmetric and data.shape[0] != data.shape[1]:
            raise ValueError("symmetric kernel must be square")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "row_ids", np.asarray(self.row_ids))
        object.__setattr__(self, "col_ids", np.asarray(self.col_ids))

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


# Outputs above this element count are computed in row blocks: one huge
# GEMM call corrupts the heap on some OpenBLAS builds, and blocking also
# caps the workspace.
_GEMM_BLOCK_ELEMENTS = 1 << 24
_GEMM_BLOCK_ROWS = 4096


def _big_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[0] * b.shape[0] <= _GEMM_BLOCK_ELEMENTS:
        return a @ b.T
    out = np.empty((a.shape[0], b.shape[0]))
    bt = b.T
    for i in range(0, a.shape[0], _GEMM_BLOCK_ROWS):
        np.matmul(a[i : i + _GEMM_BLOCK_ROWS], bt, out=out[i : i + _GEMM_BLOCK_ROWS])
    return out


def _normalized_rows(emb: EmbeddingMatrix) -> np.ndarray:
    norms = np.linalg.norm(emb.data, axis=1)
    zero = norms <= 0.0
    if np.any(zero):
        bad = np.where(zero)[0][0]
        raise ValueError(f"zero-norm embedding row id={emb.ids[bad].item()!r}")
    return emb.data / norms[:, None]


def cosine_kernel(a: EmbeddingMatrix, b: EmbeddingMatrix | None = None) -> SimilarityKernel:
    """Rescaled cosine kernel between two embedding matrices.

    Raw cosines in [-1, 1] map to (1 + s) / 2 in [0, 1].  The kernel is
    marked symmetric iff ``b`` is the same matrix as ``a`` (or omitted),
    in which case the diagonal is pinned to exactly 1 before any later
    regularization.
    """
    same = b is None or b is a
    bm = a if same else b
    if a.dim != bm.dim:
        raise ValueError(f"embedding dim mismatch: {a.dim} vs {bm.dim}")
    an = _normalized_rows(a)
    bn = an if same else _normalized_rows(bm)
    rescaled = _big_matmul(an, bn)
    np.clip(rescaled, -1.0, 1.0, out=rescaled)
    rescaled += 1.0
    rescaled *= 0.5
    if same:
        np.fill_diagonal(rescaled, 1.0)
    return SimilarityKernel(
        data=rescaled,
        symmetric=same,
        row_ids=a.ids,
        col_ids=bm.ids,
        regularization=0.0,
    )


def regularize(k: SimilarityKernel, eps: float) -> SimilarityKernel:
    """Add eps to the diagonal of a symmetric kernel."""
    if not k.symmetric:
        raise ValueError("regularization requires a symmetric kernel")
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    if eps == 0.0:
        return k
    data = k.data.copy()
    data[np.diag_indices_from(data)] += eps
    return SimilarityKernel(
        data=data,
        symmetric=True,
        row_ids=k.row_ids,
        col_ids=k.col_ids,
        regularization=k.regularization + eps,
    )


def submatrix(k: SimilarityKernel, rows: Sequence[int], cols: Sequence[int]) -> SimilarityKernel:
    """Extract a block; ids are inherited from the selected rows/cols."""
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    n_rows, n_cols = k.shape
    for idx, bound, what in ((rows, n_rows, "row"), (cols, n_cols, "col")):
        if idx.size and (idx.min() < 0 or idx.max() >= bound):
            raise IndexError(f"{what} index out of range for kernel of shape {k.shape}")
    sym = k.symmetric and rows.shape == cols.shape and bool(np.all(rows == cols))
    return SimilarityKernel(
        data=k.data[np.ix_(rows, cols)],
        symmetric=sym,
        row_ids=k.row_ids[rows],
        col_ids=k.col_ids[cols],
        regularization=k.regularization if sym else 0.0,
    )


def save_kernel(k: SimilarityKernel, path) -> None:
    """Binary dump: 16-byte header (magic, dims, symmetric flag) then
    little-endian float64 entries row-major."""
    n_rows, n_cols = k.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, n_rows, n_cols, 1 if k.symmetric else 0))
        fh.write(np.ascontiguousarray(k.data, dtype="<f8").tobytes())


def load_kernel(path) -> SimilarityKernel:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ValueError(f"truncated kernel file: {path}")
        magic, n_rows, n_cols, sym = _HEADER.unpack(header)
        if magic != _MAGIC:
            raise ValueError(f"bad magic {magic!r} in kernel file: {path}")
        payload = fh.read(8 * n_rows * n_cols)
    if len(payload) != 8 * n_rows * n_cols:
        raise ValueError(f"truncated kernel payload in {path}")
    data = np.frombuffer(payload, dtype="<f8").reshape(n_rows, n_cols).copy()
    return SimilarityKernel(
        data=data,
        symmetric=bool(sym),
        row_ids=np.arange(n_rows),
        col_ids=np.arange(n_cols),
    )
