"""Truncated factorization of the symmetric estimator matrix.

Orthonormalization uses the Gram-eigendecomposition route (economy SVD from
eig(X'X)), which beats QR on tall thin matrices.  The range finder is the
power iteration scheme: project a Gaussian test matrix, re-orthonormalize
after every sparse multiply, slice the top d columns at the end.  Sigma from
the final step approximates the singular values of the projected operator;
on the inputs this package produces it tracks the true spectrum, which is
what the tests pin down.

The Gaussian test matrix is generated from a counter-based stream keyed by
(seed, row, column), so factors are reproducible bit for bit regardless of
parallelism.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .rng import STREAM_OMEGA, hash_arrays, normal_from_bits

EMBEDDING_MAGIC = b"LNE2EMB0"
EMBEDDING_VERSION = 1
_EMB_HEADER = struct.Struct("<8sIQI")  # magic, version, n, d

_EIG_CLAMP = 1e-12  # relative floor for Gram eigenvalues before sqrt


@dataclass(frozen=True)
class SvdParams:
    d: int
    s_over: int = 16
    q: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.s_over < 0:
            raise ValueError(f"s_over must be >= 0, got {self.s_over}")
        if self.q < 1:
            raise ValueError(f"q must be >= 1, got {self.q}")


@dataclass
class SvdFactors:
    U: np.ndarray  # (n, d), orthonormal columns
    Sigma: np.ndarray  # (d,), descending, >= 0
    V: np.ndarray  # (n, d)


def eig_svd(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Economy SVD of a tall matrix via its Gram eigendecomposition.

    Returns (U, S, V) with S descending and U = X V diag(1/S).  The Gram
    matrix is accumulated in double precision; near-zero eigenvalues are
    clamped before the square root so U stays finite on rank-deficient
    input.
    """
    X = np.asarray(X)
    n, k = X.shape
    if k > n:
        raise ValueError(f"need n >= k, got shape {X.shape}")
    C = X.T.astype(np.float64) @ X.astype(np.float64)
    w, V = np.linalg.eigh(C)  # ascending; reorder so slices take dominants
    w = w[::-1].copy()
    V = V[:, ::-1].copy()
    if w[0] <= 0:
        return np.zeros_like(X), np.zeros(k), np.eye(k)
    w = np.maximum(w, _EIG_CLAMP * w[0])
    S = np.sqrt(w)
    U = ((X.astype(np.float64) @ V) / S).astype(X.dtype)
    return U, S, V


def gaussian_test_matrix(n: int, k: int, seed: int) -> np.ndarray:
    """(n, k) standard normal matrix from the (seed, row, col) stream."""
    rows = np.arange(n, dtype=np.int64)[:, None]
    cols = np.arange(k, dtype=np.int64)[None, :]
    bits = hash_arrays(seed, STREAM_OMEGA, rows, cols)
    return normal_from_bits(bits).astype(np.float32)


def projection_subspace(M, p: SvdParams):
    """Power-iterated orthonormal basis of the dominant range of M.

    Returns (Q, S, V, T) from the final orthonormalization step: the basis
    Q, its singular values S, right factors V, and the previous basis T.
    """
    n = M.shape[0]
    k = p.d + p.s_over
    if k > n:
        raise ValueError(f"d + s_over = {k} exceeds n = {n}")
    omega = gaussian_test_matrix(n, k, p.seed)
    Y = M @ omega
    Q, _, _ = eig_svd(Y)
    S = V = T = None
    for _ in range(p.q):
        Y = M @ Q
        T = Q
        Q, S, V = eig_svd(Y)
    return Q, S, V, T


def fast_randomized_svd(M, p: SvdParams) -> SvdFactors:
    """Truncated SVD of a symmetric sparse matrix; see module docstring."""
    Q, S, V, T = projection_subspace(M, p)
    U = Q[:, : p.d]
    Sigma = S[: p.d]
    V_full = (T.astype(np.float64) @ V).astype(np.float32)
    return SvdFactors(U=U, Sigma=Sigma, V=V_full[:, : p.d])


def embedding_from_factors(f: SvdFactors) -> np.ndarray:
    """Embedding rows X = U diag(Sigma)^(1/2), single precision."""
    if np.any(f.Sigma < 0):
        raise ValueError("singular values must be non-negative")
    return (f.U * np.sqrt(f.Sigma)[None, :]).astype(np.float32)


# ---------------------------------------------------------------------------
# embedding files


def save_embedding(X: np.ndarray, path) -> None:
    X = np.ascontiguousarray(X, dtype="<f4")
    n, d = X.shape
    with open(path, "wb") as fh:
        fh.write(_EMB_HEADER.pack(EMBEDDING_MAGIC, EMBEDDING_VERSION, n, d))
        fh.write(X.tobytes())


def load_embedding(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _EMB_HEADER.size:
        raise FormatError("embedding file too short")
    magic, version, n, d = _EMB_HEADER.unpack_from(blob, 0)
    if magic != EMBEDDING_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != EMBEDDING_VERSION:
        raise FormatError(f"unsupported version {version}")
    expected = _EMB_HEADER.size + 4 * n * d
    if len(blob) != expected:
        raise FormatError(f"embedding file size {len(blob)}, expected {expected}")
    X = np.frombuffer(blob, dtype="<f4", offset=_EMB_HEADER.size).reshape(n, d)
    return np.ascontiguousarray(X)


def save_embedding_text(X: np.ndarray, path) -> None:
    """Text export: one "id v1 ... vd" line per vertex."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, row in enumerate(np.asarray(X)):
            fh.write(f"{i} " + " ".join(repr(float(x)) for x in row) + "\n")
