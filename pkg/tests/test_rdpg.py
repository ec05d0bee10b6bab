import numpy as np
import pytest

from rdpginfer import curve as cv
from rdpginfer import rdpg as rd


def haar_orthogonal(rng, k):
    Q, R = np.linalg.qr(rng.normal(size=(k, k)))
    return Q * np.sign(np.diagonal(R))


class TestValidateLatent:
    def test_all_zero_rows(self):
        assert rd.validate_latent(np.zeros((4, 3)))

    def test_self_inner_product_violation(self):
        X = np.array([[2.0, 0.0, 0.0], [0.1, 0.1, 0.1]])
        assert not rd.validate_latent(X)

    def test_trinomial_grid(self, hw):
        X = hw.evaluate(np.linspace(0, 1, 100))
        assert rd.validate_latent(X)
        # exhaustive pairwise oracle
        for i in range(100):
            for j in range(100):
                p = float(X[i] @ X[j])
                assert -1e-12 <= p <= 1.0 + 1e-12


class TestSampleAdjacency:
    def test_zero_probabilities(self):
        lat = rd.LatentMatrix(np.zeros((6, 3)), s=2)
        adj = rd.sample_adjacency(lat, np.random.default_rng(0))
        assert not adj.matrix.any()

    def test_unit_probabilities(self):
        X = np.tile([1.0, 0.0, 0.0], (5, 1))
        adj = rd.sample_adjacency(rd.LatentMatrix(X, s=1), np.random.default_rng(0))
        expected = 1.0 - np.eye(5)
        assert np.array_equal(adj.matrix, expected)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_symmetric_hollow(self, hw, seed):
        X = hw.evaluate(np.random.default_rng(seed).uniform(0, 1, 40))
        adj = rd.sample_adjacency(rd.LatentMatrix(X, s=5), np.random.default_rng(seed))
        A = adj.matrix
        assert np.array_equal(A, A.T)
        assert not np.diagonal(A).any()
        assert np.all((A == 0) | (A == 1))

    def test_bernoulli_frequency(self):
        # fixed pair with inner product 0.37, Monte Carlo frequency oracle
        X = np.array([[1.0, 0.0, 0.0], [0.37, 0.5, 0.0]])
        lat = rd.LatentMatrix(X, s=1)
        rng = np.random.default_rng(2024)
        draws = [rd.sample_adjacency(lat, rng).matrix[0, 1] for _ in range(10_000)]
        assert np.mean(draws) == pytest.approx(0.37, abs=0.015)

    def test_invalid_latent_rejected(self):
        lat = rd.LatentMatrix(np.full((3, 3), 0.8), s=1)
        with pytest.raises(ValueError, match="inner products"):
            rd.sample_adjacency(lat, np.random.default_rng(0))

    def test_reproducible(self, hw):
        X = hw.evaluate(np.linspace(0, 1, 25))
        lat = rd.LatentMatrix(X, s=2)
        a = rd.sample_adjacency(lat, np.random.default_rng(42)).matrix
        b = rd.sample_adjacency(lat, np.random.default_rng(42)).matrix
        assert np.array_equal(a, b)


class TestAse:
    def test_zero_matrix(self):
        emb = rd.ase(np.zeros((5, 5)), 3)
        assert not emb.points.any()
        assert np.array_equal(emb.sigmas, np.zeros(3))

    def test_gram_reconstruction(self, hw):
        X = hw.evaluate(np.linspace(0.05, 0.95, 40))
        P = X @ X.T
        emb = rd.ase(P, 3)
        assert np.abs(emb.points @ emb.points.T - P).max() < 1e-8

    def test_negative_eigenvalue_clipped_to_zero_column(self):
        rng = np.random.default_rng(7)
        Q = haar_orthogonal(rng, 3)
        M = Q @ np.diag([2.0, 1.0, -1.0]) @ Q.T
        M = 0.5 * (M + M.T)
        emb = rd.ase(M, 3)
        assert emb.eigenvalues[2] < 0
        assert not emb.points[:, 2].any()
        assert emb.sigmas[2] == 0.0

    def test_orthonormal_vectors_and_residuals(self):
        rng = np.random.default_rng(3)
        A = rng.random((30, 30))
        A = np.triu(A, 1); A = (A + A.T > 0.7).astype(float)
        emb = rd.ase(A, 4)
        assert np.abs(emb.vectors.T @ emb.vectors - np.eye(4)).max() < 1e-8
        norm = np.abs(np.linalg.eigvalsh(A)).max()
        resid = np.linalg.norm(A @ emb.vectors - emb.vectors * emb.eigenvalues, axis=0)
        assert np.all(resid <= 1e-8 * norm)

    def test_descending_eigenvalues(self):
        rng = np.random.default_rng(5)
        M = rng.normal(size=(12, 12)); M = 0.5 * (M + M.T)
        emb = rd.ase(M, 5)
        assert np.all(np.diff(emb.eigenvalues) <= 0)

    def test_self_reconstruction_spectrum(self, hw):
        X = hw.evaluate(np.linspace(0, 1, 30))
        A = rd.sample_adjacency(rd.LatentMatrix(X, s=3), np.random.default_rng(1)).matrix
        emb = rd.ase(A, 3)
        again = rd.ase(emb.points @ emb.points.T, 3)
        clipped = np.maximum(emb.eigenvalues, 0.0)
        assert np.allclose(again.eigenvalues, clipped, atol=1e-8)

    def test_asymmetric_rejected(self):
        M = np.array([[0.0, 1.0], [0.5, 0.0]])
        with pytest.raises(ValueError, match="symmetric"):
            rd.ase(M, 1)

    def test_deterministic(self):
        rng = np.random.default_rng(9)
        M = rng.normal(size=(15, 15)); M = 0.5 * (M + M.T)
        a = rd.ase(M, 3)
        b = rd.ase(M, 3)
        assert np.array_equal(a.points, b.points)


class TestProcrustes:
    def test_identity_when_aligned(self):
        rng = np.random.default_rng(0)
        S = rng.normal(size=(20, 3))
        W = rd.procrustes_align(S, S)
        assert np.abs(W - np.eye(3)).max() < 1e-10

    def test_planted_rotation_recovery(self):
        rng = np.random.default_rng(1)
        S = rng.normal(size=(30, 3))
        W_true = haar_orthogonal(rng, 3)
        T = S @ W_true.T
        W = rd.procrustes_align(S, T)
        assert np.abs(W - W_true).max() < 1e-10

    def test_orthogonality(self):
        rng = np.random.default_rng(2)
        W = rd.procrustes_align(rng.normal(size=(10, 4)), rng.normal(size=(10, 4)))
        assert np.abs(W.T @ W - np.eye(4)).max() < 1e-10

    def test_noisy_2d_matches_grid_oracle(self):
        rng = np.random.default_rng(3)
        S = rng.normal(size=(25, 2))
        W_true = haar_orthogonal(rng, 2)
        T = S @ W_true.T + 0.05 * rng.normal(size=(25, 2))
        W = rd.procrustes_align(S, T)
        loss = np.sum((S @ W.T - T) ** 2)

        # brute force over rotations and reflections
        C = T.T @ S
        theta = np.linspace(0, 2 * np.pi, 100_000, endpoint=False)
        c, s = np.cos(theta), np.sin(theta)
        tr_rot = c * (C[0, 0] + C[1, 1]) + s * (C[1, 0] - C[0, 1])
        tr_ref = c * (C[0, 0] - C[1, 1]) + s * (C[0, 1] + C[1, 0])
        base = np.sum(S ** 2) + np.sum(T ** 2)
        grid_loss = (base - 2 * np.maximum(tr_rot, tr_ref)).min()
        assert loss <= grid_loss + 1e-4

    def test_degenerate_cross_product(self):
        S = np.zeros((5, 3))
        T = np.zeros((5, 3))
        with pytest.warns(RuntimeWarning, match="degenerate"):
            W = rd.procrustes_align(S, T)
        assert np.array_equal(W, np.eye(3))

    def test_loss_not_beaten_by_random_orthogonals(self, hw):
        rng = np.random.default_rng(4)
        X = hw.evaluate(rng.uniform(0, 1, 50))
        A = rd.sample_adjacency(rd.LatentMatrix(X, s=5), rng).matrix
        emb = rd.ase(A, 3)
        W = rd.procrustes_align(emb.points, X)
        loss = np.sum((emb.points @ W.T - X) ** 2)
        assert loss <= np.sum((emb.points - X) ** 2) + 1e-12
        for _ in range(100):
            Q = haar_orthogonal(rng, 3)
            assert loss <= np.sum((emb.points @ Q.T - X) ** 2) + 1e-12


class TestModelInvariance:
    def test_rotated_latents_same_edge_probabilities(self, hw):
        rng = np.random.default_rng(6)
        X = hw.evaluate(rng.uniform(0, 1, 40))
        Q = haar_orthogonal(rng, 3)
        assert np.abs((X @ Q) @ (X @ Q).T - X @ X.T).max() < 1e-12


@pytest.mark.slow
class TestConsistencyTrend:
    def test_max_row_error_non_increasing_in_n(self, hw):
        # empirical consistency of ASE after oracle alignment
        medians = []
        for n in (200, 400, 800, 1600):
            errs = []
            for seed in range(20):
                rng = np.random.default_rng([808, n, seed])
                X = hw.evaluate(rng.uniform(0, 1, n))
                lat = rd.LatentMatrix(X, s=1)
                A = rd.sample_adjacency(lat, rng).matrix
                emb = rd.ase(A, 3)
                W = rd.procrustes_align(emb.points, X)
                errs.append(np.linalg.norm(emb.points @ W.T - X, axis=1).max())
            medians.append(np.median(errs))
        assert all(b <= a for a, b in zip(medians, medians[1:])), medians


class TestSerialization:
    def test_adjacency_roundtrip(self, hw, tmp_path):
        X = hw.evaluate(np.linspace(0, 1, 20))
        adj = rd.sample_adjacency(rd.LatentMatrix(X, s=2), np.random.default_rng(0))
        path = tmp_path / "adj.csv"
        rd.write_adjacency_csv(adj, path)
        back = rd.read_adjacency_csv(path, adj.n)
        assert np.array_equal(back.matrix, adj.matrix)

    def test_embedding_roundtrip(self, tmp_path):
        pts = np.random.default_rng(1).normal(size=(7, 3))
        path = tmp_path / "emb.csv"
        rd.write_embedding_csv(pts, path)
        back = rd.read_embedding_csv(path)
        assert np.array_equal(back, pts)
