"""Downstream-task scoring and the brute-force oracles used by tests.

Classification follows the usual protocol for multi-label node
classification: train one-vs-rest L2-regularized logistic regression, then
for a node with l true labels predict its l highest-scoring labels and
report Micro/Macro F1.  Link prediction ranks each held-out edge against
uniformly corrupted tails (resampled when a corruption is itself a true
edge) and reports MR, MRR, HITS@K and pairwise AUC.

The oracles at the bottom are deliberately naive dense computations kept
independent of the fast paths they are used to check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from .datasets import LabeledNodes, LinkPredSplit
from .graph import Graph
from .rng import STREAM_CORRUPT, hash_arrays

HITS_KS = (1, 10, 50)


@dataclass
class Metrics:
    """Union of task metrics; fields not produced by a task stay None."""

    micro_f1: float | None = None
    macro_f1: float | None = None
    auc: float | None = None
    mr: float | None = None
    mrr: float | None = None
    hits: dict[int, float] = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {}
        for name in ("micro_f1", "macro_f1", "auc", "mr", "mrr"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        for k, v in sorted(self.hits.items()):
            out[f"hits@{k}"] = v
        return out


# ---------------------------------------------------------------------------
# one-vs-rest logistic regression


@dataclass
class OvrLogReg:
    W: np.ndarray  # (n_labels, dim)
    bias: np.ndarray  # (n_labels,)
    degenerate: list[int]  # labels trained on a single class (prior only)

    def scores(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.W.T + self.bias


def _fit_binary(X: np.ndarray, y: np.ndarray, reg: float) -> np.ndarray:
    n, dim = X.shape

    def loss_grad(wb):
        w, b = wb[:dim], wb[dim]
        z = y * (X @ w + b)
        loss = np.mean(np.logaddexp(0.0, -z)) + 0.5 * reg * (w @ w)
        gz = -(y * expit(-z)) / n
        grad = np.empty(dim + 1)
        grad[:dim] = X.T @ gz + reg * w
        grad[dim] = gz.sum()
        return loss, grad

    res = minimize(
        loss_grad,
        np.zeros(dim + 1),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": 500, "gtol": 1e-6, "ftol": 1e-18},
    )
    return res.x


def train_ovr_logreg(X: np.ndarray, Y: np.ndarray, reg: float = 1e-2) -> OvrLogReg:
    """Fit one L2-regularized logistic classifier per label column of Y.

    Deterministic full-batch optimization (stops at gradient inf-norm below
    1e-6 or 500 iterations).  A label with no positive or no negative
    training example gets a prior-only classifier and is flagged.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    n, dim = X.shape
    n_labels = Y.shape[1]
    W = np.zeros((n_labels, dim))
    bias = np.zeros(n_labels)
    degenerate = []
    for j in range(n_labels):
        pos = Y[:, j] > 0
        n_pos = int(pos.sum())
        if n_pos == 0 or n_pos == n:
            prior = np.clip(n_pos / n, 1e-9, 1.0 - 1e-9)
            bias[j] = np.log(prior / (1.0 - prior))
            degenerate.append(j)
            continue
        wb = _fit_binary(X, np.where(pos, 1.0, -1.0), reg)
        W[j] = wb[:dim]
        bias[j] = wb[dim]
    return OvrLogReg(W=W, bias=bias, degenerate=degenerate)


def top_l_predictions(scores: np.ndarray, label_counts) -> list[list[int]]:
    """Known-label-count protocol: node i keeps its l_i best-scoring labels."""
    preds = []
    for row, l in zip(np.asarray(scores), label_counts):
        l = int(l)
        if l <= 0:
            preds.append([])
            continue
        top = np.argpartition(-row, min(l, len(row)) - 1)[:l]
        preds.append(sorted(int(t) for t in top))
    return preds


def micro_macro_f1(
    predicted: list[list[int]], true: list[list[int]], n_labels: int
) -> tuple[float, float]:
    """F1 from per-label confusion counts; micro pools counts globally,
    macro averages per-label F1 (labels with empty denominators score 0)."""
    tp = np.zeros(n_labels)
    fp = np.zeros(n_labels)
    fn = np.zeros(n_labels)
    for pred, truth in zip(predicted, true):
        p, t = set(pred), set(truth)
        for l in p & t:
            tp[l] += 1
        for l in p - t:
            fp[l] += 1
        for l in t - p:
            fn[l] += 1
    denom = 2 * tp + fp + fn
    per_label = np.divide(2 * tp, denom, out=np.zeros(n_labels), where=denom > 0)
    micro_denom = denom.sum()
    micro = float(2 * tp.sum() / micro_denom) if micro_denom > 0 else 0.0
    return micro, float(per_label.mean())


def classify_and_score(
    model: OvrLogReg, X_test: np.ndarray, labels_test: list[list[int]]
) -> tuple[float, float]:
    """(micro_f1, macro_f1) of top-l predictions on the test rows."""
    scores = model.scores(X_test)
    preds = top_l_predictions(scores, [len(t) for t in labels_test])
    return micro_macro_f1(preds, labels_test, model.W.shape[0])


def node_classification_eval(
    X: np.ndarray,
    labeled: LabeledNodes,
    train_ratio: float,
    repeats: int = 10,
    seed: int = 0,
    reg: float = 1e-2,
) -> Metrics:
    """Mean Micro/Macro F1 over repeated seeded splits."""
    from .datasets import split_train_test

    vertices = labeled.labeled_vertices()
    micros, macros = [], []
    for rep in range(repeats):
        train, test = split_train_test(vertices, train_ratio, seed, repeat=rep)
        model = train_ovr_logreg(X[train], labeled.multihot(train), reg=reg)
        micro, macro = classify_and_score(
            model, X[test], [labeled.labels[int(v)] for v in test]
        )
        micros.append(micro)
        macros.append(macro)
    return Metrics(micro_f1=float(np.mean(micros)), macro_f1=float(np.mean(macros)))


# ---------------------------------------------------------------------------
# link prediction


def _corrupt_tails(
    heads: np.ndarray,
    packed_pos: np.ndarray,
    edge_keys: np.ndarray,
    n: int,
    n_cols: int,
    seed: int,
) -> np.ndarray:
    """(P, n_cols) corrupted tails; entries forming a true edge with their
    head are resampled.  Streams are keyed by the positive pair itself, so
    the result is independent of positive-list order."""
    cols = np.arange(n_cols, dtype=np.int64)[None, :]
    pos_key = packed_pos[:, None]
    attempt = 0
    tails = (hash_arrays(seed, STREAM_CORRUPT, 1, pos_key, cols, attempt) % np.uint64(n)).astype(
        np.int64
    )
    while True:
        lo = np.minimum(heads[:, None], tails)
        hi = np.maximum(heads[:, None], tails)
        cand = (lo.astype(np.uint64) << np.uint64(32)) | hi.astype(np.uint64)
        at = np.searchsorted(edge_keys, cand)
        at = np.minimum(at, len(edge_keys) - 1)
        bad = edge_keys[at] == cand if len(edge_keys) else np.zeros_like(cand, dtype=bool)
        if not bad.any():
            return tails
        attempt += 1
        fresh = hash_arrays(
            seed, STREAM_CORRUPT, 1, np.broadcast_to(pos_key, bad.shape)[bad],
            np.broadcast_to(cols, bad.shape)[bad], attempt,
        )
        tails[bad] = (fresh % np.uint64(n)).astype(np.int64)


def link_pred_score(X: np.ndarray, split: LinkPredSplit) -> Metrics:
    """Rank each positive against corrupted tails by dot-product score.

    Ties split half-and-half, so rank = 1 + #(better) + #(ties)/2.  AUC uses
    one dedicated corruption per positive.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    pos = split.positives.astype(np.int64)
    heads, true_tails = pos[:, 0], pos[:, 1]
    packed_pos = (pos[:, 0].astype(np.uint64) << np.uint64(32)) | pos[:, 1].astype(np.uint64)

    res_edges = split.residual.edge_array().astype(np.uint64)
    all_keys = np.concatenate(
        [(res_edges[:, 0] << np.uint64(32)) | res_edges[:, 1], packed_pos]
    )
    all_keys.sort()

    tails = _corrupt_tails(
        heads, packed_pos, all_keys, n, split.n_negatives + 1, split.seed
    )
    corr, auc_tail = tails[:, :-1], tails[:, -1]

    pos_score = np.einsum("ij,ij->i", X[heads], X[true_tails])
    corr_score = np.einsum("ij,ikj->ik", X[heads], X[corr])
    better = (corr_score > pos_score[:, None]).sum(axis=1)
    ties = (corr_score == pos_score[:, None]).sum(axis=1)
    ranks = 1.0 + better + 0.5 * ties

    auc_score = np.einsum("ij,ij->i", X[heads], X[auc_tail])
    auc = float(np.mean((pos_score > auc_score) + 0.5 * (pos_score == auc_score)))

    return Metrics(
        auc=auc,
        mr=float(ranks.mean()),
        mrr=float((1.0 / ranks).mean()),
        hits={k: float((ranks <= k).mean()) for k in HITS_KS},
    )


# ---------------------------------------------------------------------------
# brute-force oracles


def dense_netmf_oracle(
    g: Graph, T: int, s_coeffs=None, b: float = 1.0, apply_log: bool = True
) -> np.ndarray:
    """Exact dense target matrix (vol/b) sum_r s_r (Dinv A)^r Dinv, then the
    entrywise truncated log.  Small graphs only."""
    if g.n > 2000:
        raise ValueError("dense oracle capped at n = 2000")
    if s_coeffs is None:
        s_coeffs = [1.0 / T] * T
    if len(s_coeffs) != T:
        raise ValueError("need T coefficients")
    A = g.adjacency_csr_matrix(dtype=np.float64).toarray()
    dinv = np.zeros(g.n)
    nz = g.degrees > 0
    dinv[nz] = 1.0 / g.degrees[nz]
    P = dinv[:, None] * A
    acc = np.zeros_like(A)
    power = np.eye(g.n)
    for s_r in s_coeffs:
        power = power @ P
        acc += s_r * power
    M = (g.vol / b) * acc * dinv[None, :]
    if apply_log:
        return np.where(M > 1.0, np.log(np.maximum(M, 1e-300)), 0.0)
    return M


def effective_resistance_oracle(g: Graph) -> np.ndarray:
    """Exact effective resistance per canonical edge via the pseudoinverse
    of the combinatorial Laplacian.  Connected graphs up to n = 500."""
    from .datasets import is_connected

    if g.n > 500:
        raise ValueError("resistance oracle capped at n = 500")
    if not is_connected(g):
        raise ValueError("graph must be connected")
    A = g.adjacency_csr_matrix(dtype=np.float64).toarray()
    L = np.diag(g.degrees.astype(np.float64)) - A
    Lp = np.linalg.pinv(L)
    edges = g.edge_array().astype(np.int64)
    u, v = edges[:, 0], edges[:, 1]
    return Lp[u, u] + Lp[v, v] - 2 * Lp[u, v]


def jacobi_singular_values(X: np.ndarray, tol: float = 1e-12, max_sweeps: int = 30) -> np.ndarray:
    """Singular values by one-sided Jacobi rotations on the columns of X.

    Never forms the Gram matrix, so it is an independent check of the
    eigendecomposition route.
    """
    A = np.asarray(X, dtype=np.float64).copy()
    k = A.shape[1]
    for _ in range(max_sweeps):
        rotated = False
        for p in range(k - 1):
            for q in range(p + 1, k):
                ap = A[:, p]
                aq = A[:, q]
                apq = ap @ aq
                app = ap @ ap
                aqq = aq @ aq
                if abs(apq) <= tol * np.sqrt(app * aqq):
                    continue
                rotated = True
                tau = (aqq - app) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                new_p = c * ap - s * aq
                new_q = s * ap + c * aq
                A[:, p] = new_p
                A[:, q] = new_q
        if not rotated:
            break
    return np.sort(np.linalg.norm(A, axis=0))[::-1]
