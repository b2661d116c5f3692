"""Spectral enhancement of an embedding by a low-degree band-pass filter.

The filter is a Chebyshev expansion in the shifted operator built from the
self-looped, row-normalized graph: with ``A1 = rownorm(A + I)`` and
``Mh = (I - A1) - mu*I``, terms follow

    L0 = X
    L1 = 0.5 * Mh(Mh X) - X
    Li = Mh(Mh L(i-1)) - 2 L(i-1) - L(i-2)

(the Chebyshev recurrence in the operator Mh^2/2 - I), combined with
modified-Bessel weights of the modulation parameter theta and alternating
signs, and finally smoothed once more:

    out = A1 (X - [i0(theta) L0 - 2 i1(theta) L1 + sum_{i>=2} (-1)^i 2 i_i(theta) Li])

Self-loop augmentation keeps every row degree positive, so the filter is
finite on any loop-free graph.  ``k=1`` short-circuits to the input.
Internally everything runs in float64; the returned embedding is float32.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import Graph


@dataclass(frozen=True)
class PropagationParams:
    k: int = 10
    mu: float = 0.2
    theta: float = 0.5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")


def normalized_laplacian_apply(g: Graph, X: np.ndarray) -> np.ndarray:
    """Apply I - Dinv A to the rows of X.

    Isolated vertices pass through unchanged (their adjacency row is zero).
    """
    X = np.asarray(X)
    if X.shape[0] != g.n:
        raise ValueError(f"X has {X.shape[0]} rows, graph has {g.n} vertices")
    A = g.adjacency_csr_matrix(dtype=np.float64)
    dinv = np.zeros(g.n)
    nz = g.degrees > 0
    dinv[nz] = 1.0 / g.degrees[nz]
    return X - dinv[:, None] * (A @ X)


def modified_bessel_i(r: int, theta: float) -> float:
    """Modified Bessel function of the first kind by direct power series.

    Sums (theta/2)^(2m+r) / (m! (m+r)!) until a term drops below 1e-16 of
    the partial sum.
    """
    if r < 0:
        raise ValueError(f"order must be >= 0, got {r}")
    if theta < 0:
        raise ValueError(f"argument must be >= 0, got {theta}")
    if theta == 0.0:
        return 1.0 if r == 0 else 0.0
    half = theta / 2.0
    # m = 0 term: half^r / r!
    term = 1.0
    for i in range(1, r + 1):
        term *= half / i
    total = term
    m = 1
    while True:
        term *= half * half / (m * (m + r))
        total += term
        if term < 1e-16 * total:
            return total
        m += 1


def _self_looped_rownorm(g: Graph) -> sp.csr_matrix:
    A = g.adjacency_csr_matrix(dtype=np.float64)
    A = A + sp.eye(g.n, format="csr")
    inv = 1.0 / np.asarray(A.sum(axis=1)).ravel()
    return sp.diags(inv) @ A


def chebyshev_propagate(g: Graph, X: np.ndarray, p: PropagationParams) -> np.ndarray:
    """Band-pass filtered embedding; see module docstring for the recurrence."""
    X = np.asarray(X)
    if X.shape[0] != g.n:
        raise ValueError(f"X has {X.shape[0]} rows, graph has {g.n} vertices")
    if p.k < 2:
        return X.astype(np.float32, copy=True)

    A1 = _self_looped_rownorm(g)
    mu = p.mu

    def mh(Z: np.ndarray) -> np.ndarray:
        # (L - mu I) Z with L = I - A1
        return (1.0 - mu) * Z - A1 @ Z

    X64 = X.astype(np.float64)
    L0 = X64
    L1 = 0.5 * mh(mh(X64)) - X64
    conv = modified_bessel_i(0, p.theta) * L0
    conv = conv - 2.0 * modified_bessel_i(1, p.theta) * L1
    for i in range(2, p.k):
        L2 = mh(mh(L1)) - 2.0 * L1 - L0
        coef = 2.0 * modified_bessel_i(i, p.theta)
        conv = conv + coef * L2 if i % 2 == 0 else conv - coef * L2
        L0, L1 = L1, L2
    return (A1 @ (X64 - conv)).astype(np.float32)
