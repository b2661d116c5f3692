import numpy as np
import pytest
import scipy.sparse as sp

import lightne as ln
from lightne.errors import FormatError


def random_sparse_symmetric(n, density, seed):
    rng = np.random.default_rng(seed)
    k = int(density * n * n / 2)
    rows = rng.integers(0, n, size=k)
    cols = rng.integers(0, n, size=k)
    vals = rng.standard_normal(k).astype(np.float32)
    A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n))
    return ((A + A.T) * 0.5).tocsr().astype(np.float32)


# ---------------------------------------------------------------------------
# eig_svd


def test_eig_svd_identity():
    U, S, V = ln.eig_svd(np.eye(3, dtype=np.float32))
    assert np.allclose(S, 1.0)
    assert np.allclose(U @ V.T, np.eye(3), atol=1e-6)


def test_eig_svd_diagonal():
    U, S, V = ln.eig_svd(np.diag([3.0, 2.0]).astype(np.float32))
    assert np.allclose(S, [3.0, 2.0])


def test_eig_svd_rejects_wide():
    with pytest.raises(ValueError):
        ln.eig_svd(np.zeros((2, 3)))


def test_eig_svd_zero_matrix_is_finite():
    U, S, V = ln.eig_svd(np.zeros((5, 3), dtype=np.float32))
    assert np.all(np.isfinite(U)) and np.all(S == 0.0)


def test_eig_svd_matches_jacobi_oracle():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((500, 32)).astype(np.float32)
    U, S, V = ln.eig_svd(X)
    ref = ln.jacobi_singular_values(X)
    assert np.abs(S - ref).max() / ref[0] < 1e-4
    Xf = X.astype(np.float64)
    recon = U.astype(np.float64) @ np.diag(S) @ V.T
    assert np.linalg.norm(recon - Xf) < 1e-3 * np.linalg.norm(Xf)
    gram = U.astype(np.float64).T @ U.astype(np.float64)
    assert np.linalg.norm(gram - np.eye(32)) < 1e-4 * 32


def test_eig_svd_descending_order():
    rng = np.random.default_rng(4)
    _, S, _ = ln.eig_svd(rng.standard_normal((64, 10)))
    assert np.all(np.diff(S) <= 0)


# ---------------------------------------------------------------------------
# fast_randomized_svd


def test_params_validate():
    with pytest.raises(ValueError):
        ln.SvdParams(d=0)
    with pytest.raises(ValueError):
        ln.SvdParams(d=4, q=0)
    with pytest.raises(ValueError):
        ln.SvdParams(d=4, s_over=-1)


def test_rejects_oversized_subspace():
    M = sp.eye(10, format="csr", dtype=np.float32)
    with pytest.raises(ValueError):
        ln.fast_randomized_svd(M, ln.SvdParams(d=8, s_over=8, q=1))


def test_exact_rank_input_recovered_at_q1():
    rng = np.random.default_rng(5)
    n, d = 300, 6
    B = rng.standard_normal((n, d))
    lam = np.array([5.0, 4.0, 3.0, 2.0, 1.5, 1.0])
    M = sp.csr_matrix((B * lam) @ B.T).astype(np.float32)
    f = ln.fast_randomized_svd(M, ln.SvdParams(d=d, s_over=10, q=1, seed=0))
    R = f.U @ np.diag(f.Sigma) @ f.V.T
    dense = M.toarray()
    assert np.linalg.norm(R - dense) < 1e-3 * np.linalg.norm(dense)


def test_known_spectrum_sigma_accuracy():
    n, d = 500, 8
    M = sp.diags(1.0 / np.arange(1, n + 1)).tocsr().astype(np.float32)
    f = ln.fast_randomized_svd(M, ln.SvdParams(d=d, s_over=16, q=3, seed=0))
    true = 1.0 / np.arange(1, d + 1)
    assert (np.abs(f.Sigma - true) / true).max() < 1e-3


def test_residual_ratio_non_increasing_in_q():
    # median over seeds of ||M - Q Q' M||_2 / sigma_{d+1}, dense SVD oracle
    n, d, s = 400, 16, 8
    M = random_sparse_symmetric(n, 0.02, seed=7)
    sigma = np.linalg.svd(M.toarray().astype(np.float64), compute_uv=False)
    sigma_next = sigma[d + s]
    medians = []
    for q in (1, 2, 5):
        ratios = []
        for seed in range(30):
            Q, _, _, _ = ln.projection_subspace(M, ln.SvdParams(d=d, s_over=s, q=q, seed=seed))
            Q = Q.astype(np.float64)
            B = M.toarray().astype(np.float64)
            resid = np.linalg.norm(B - Q @ (Q.T @ B), 2)
            ratios.append(resid / sigma_next)
        medians.append(np.median(ratios))
    assert medians[0] >= medians[1] >= medians[2]


def test_factors_deterministic():
    M = random_sparse_symmetric(200, 0.05, seed=1)
    p = ln.SvdParams(d=8, s_over=8, q=2, seed=42)
    f1 = ln.fast_randomized_svd(M, p)
    f2 = ln.fast_randomized_svd(M, p)
    assert np.array_equal(f1.U, f2.U)
    assert np.array_equal(f1.Sigma, f2.Sigma)
    assert np.array_equal(f1.V, f2.V)


def test_gaussian_test_matrix_is_standard_normal():
    omega = ln.gaussian_test_matrix(400, 50, seed=9)
    flat = omega.ravel().astype(np.float64)
    assert abs(flat.mean()) < 4 / np.sqrt(flat.size)
    assert abs(flat.std() - 1.0) < 0.01
    # keyed by (row, col): different seeds decorrelate
    other = ln.gaussian_test_matrix(400, 50, seed=10)
    assert abs(np.corrcoef(flat, other.ravel())[0, 1]) < 0.02


# ---------------------------------------------------------------------------
# embedding_from_factors


def test_embedding_diag_example():
    f = ln.SvdFactors(U=np.eye(2, dtype=np.float32), Sigma=np.array([4.0, 1.0]), V=np.eye(2))
    assert np.allclose(ln.embedding_from_factors(f), np.diag([2.0, 1.0]))


def test_embedding_zero_sigma():
    f = ln.SvdFactors(
        U=np.ones((3, 2), dtype=np.float32), Sigma=np.zeros(2), V=np.ones((3, 2))
    )
    assert np.all(ln.embedding_from_factors(f) == 0.0)


def test_embedding_gram_identity():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((300, 12)).astype(np.float32)
    U, S, V = ln.eig_svd(X)
    f = ln.SvdFactors(U=U, Sigma=S, V=V)
    E = ln.embedding_from_factors(f).astype(np.float64)
    gram = E.T @ E
    assert np.allclose(gram, np.diag(S), rtol=1e-3, atol=1e-3 * S[0])


def test_embedding_rejects_negative_sigma():
    f = ln.SvdFactors(U=np.eye(2), Sigma=np.array([1.0, -0.1]), V=np.eye(2))
    with pytest.raises(ValueError):
        ln.embedding_from_factors(f)


# ---------------------------------------------------------------------------
# embedding files


def test_embedding_file_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((37, 5)).astype(np.float32)
    path = tmp_path / "emb.bin"
    ln.save_embedding(X, path)
    Y = ln.load_embedding(path)
    assert np.array_equal(X, Y)


def test_embedding_file_rejects_bad_size(tmp_path):
    path = tmp_path / "emb.bin"
    ln.save_embedding(np.zeros((4, 3), dtype=np.float32), path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-4])
    with pytest.raises(FormatError):
        ln.load_embedding(path)


def test_embedding_text_export(tmp_path):
    X = np.array([[1.5, -2.0], [0.25, 3.0]], dtype=np.float32)
    path = tmp_path / "emb.txt"
    ln.save_embedding_text(X, path)
    lines = path.read_text().splitlines()
    assert lines[0].split() == ["0", "1.5", "-2.0"]
    assert lines[1].split() == ["1", "0.25", "3.0"]
