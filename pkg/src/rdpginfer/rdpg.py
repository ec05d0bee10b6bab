"""Random dot product graphs: latent matrices, adjacency sampling, adjacency
spectral embedding, and orthogonal Procrustes alignment.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EigensolverError

INNER_PRODUCT_SLACK = 1e-12
SYMMETRY_TOL = 1e-10
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class LatentMatrix:
    """n x k latent positions; the first s rows form the community of interest."""

    X: np.ndarray
    s: int

    def __post_init__(self):
        X = np.ascontiguousarray(np.asarray(self.X, dtype=float))
        if X.ndim != 2:
            raise ValueError(f"latent matrix must be 2-D, got shape {X.shape}")
        if not 1 <= self.s <= X.shape[0]:
            raise ValueError(f"community size s={self.s} must lie in [1, {X.shape[0]}]")
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]

    @property
    def m(self) -> int:
        return self.n - self.s

    @property
    def community(self) -> np.ndarray:
        return self.X[: self.s]

    @property
    def auxiliary(self) -> np.ndarray:
        return self.X[self.s:]


@dataclass(frozen=True)
class Adjacency:
    """Symmetric hollow 0/1 adjacency matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.matrix, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {A.shape}")
        if not np.array_equal(A, A.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diagonal(A) != 0.0):
            raise ValueError("adjacency must be hollow (zero diagonal)")
        if not np.all((A == 0.0) | (A == 1.0)):
            raise ValueError("adjacency entries must be 0 or 1")
        object.__setattr__(self, "matrix", A)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def validate_latent(lat: LatentMatrix | np.ndarray) -> bool:
    """True iff every pairwise inner product (self included) lies in [0, 1]."""
    X = lat.X if isinstance(lat, LatentMatrix) else np.asarray(lat, dtype=float)
    gram = X @ X.T
    return bool(gram.min() >= -INNER_PRODUCT_SLACK and gram.max() <= 1.0 + INNER_PRODUCT_SLACK)


def sample_adjacency(lat: LatentMatrix, rng: np.random.Generator) -> Adjacency:
    """Draw A with independent Bernoulli(X_i^T X_j) above-diagonal entries.

    The matrix is symmetrized and hollow; identical (lat, rng state) give an
    identical draw.
    """
    if not validate_latent(lat):
        raise ValueError("latent matrix has pairwise inner products outside [0, 1]")
    X = lat.X if isinstance(lat, LatentMatrix) else np.asarray(lat, dtype=float)
    n = X.shape[0]
    P = np.clip(X @ X.T, 0.0, 1.0)
    iu = np.triu_indices(n, k=1)
    draws = (rng.random(iu[0].size) < P[iu]).astype(float)
    A = np.zeros((n, n))
    A[iu] = draws
    A += A.T
    return Adjacency(A)


@dataclass(frozen=True)
class SpectralEmbedding:
    """ASE of a symmetric matrix: X_hat = U_r S_r with sigma_i = sqrt(max(lambda_i, 0))."""

    points: np.ndarray          # n x r, rows are embedded positions
    eigenvalues: np.ndarray     # r algebraically largest, descending
    sigmas: np.ndarray
    vectors: np.ndarray         # n x r orthonormal columns
    r: int = field(default=0)

    def __post_init__(self):
        object.__setattr__(self, "r", self.points.shape[1])


def ase(M: np.ndarray, r: int) -> SpectralEmbedding:
    """Adjacency spectral embedding of a symmetric matrix into R^r.

    Takes the r algebraically largest eigenpairs of M and returns
    X_hat = U_r S_r with S_r = diag(sqrt(max(lambda_i, 0))).  Eigenvector
    signs are fixed by making the first component of magnitude > 1e-12
    positive, so stored embeddings are reproducible.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if M.ndim != 2 or M.shape[1] != n:
        raise ValueError(f"matrix must be square, got shape {M.shape}")
    if not 1 <= r <= n:
        raise ValueError(f"rank r={r} must lie in [1, {n}]")
    if np.max(np.abs(M - M.T)) > SYMMETRY_TOL:
        raise ValueError("matrix is not symmetric within 1e-10")
    try:
        all_lam, all_vec = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"symmetric eigendecomposition failed: {exc}") from exc
    norm2 = float(np.max(np.abs(all_lam))) if n else 0.0
    lam = all_lam[::-1][:r]
    vec = all_vec[:, ::-1][:, :r].copy()
    for i in range(r):
        col = vec[:, i]
        nz = np.nonzero(np.abs(col) > 1e-12)[0]
        if nz.size and col[nz[0]] < 0:
            vec[:, i] = -col
    resid = np.linalg.norm(M @ vec - vec * lam, axis=0)
    if np.any(resid > RESIDUAL_TOL * max(norm2, np.finfo(float).tiny)):
        raise EigensolverError(
            f"eigenpair residual {resid.max():.3g} exceeds contract "
            f"{RESIDUAL_TOL:.0e} * ||M||")
    sig = np.sqrt(np.maximum(lam, 0.0))
    return SpectralEmbedding(points=vec * sig, eigenvalues=lam, sigmas=sig, vectors=vec)


def procrustes_align(source: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Orthogonal W minimizing sum_i ||W source_i - target_i||^2.

    W is the polar factor of target^T source; rows of ``source`` are mapped as
    source_i -> W source_i, i.e. the aligned matrix is ``source @ W.T``.  A
    zero cross-product matrix yields the identity with a RuntimeWarning.
    """
    S = np.asarray(source, dtype=float)
    T = np.asarray(target, dtype=float)
    if S.shape != T.shape:
        raise ValueError(f"source and target shapes differ: {S.shape} vs {T.shape}")
    if S.ndim != 2 or S.shape[0] < S.shape[1]:
        raise ValueError(f"need at least k rows for a k-column alignment, got shape {S.shape}")
    C = T.T @ S
    U, sv, Vt = np.linalg.svd(C)
    if sv.max(initial=0.0) <= 1e-15 * max(1.0, np.abs(S).max(), np.abs(T).max()):
        warnings.warn("degenerate (zero) cross-product matrix; returning identity",
                      RuntimeWarning, stacklevel=2)
        return np.eye(S.shape[1])
    return U @ Vt


# -- serialization -------------------------------------------------------------

def write_adjacency_csv(adj: Adjacency, path) -> None:
    """Write the upper-triangle edge list, one 0-based `i,j` pair per line."""
    ii, jj = np.nonzero(np.triu(adj.matrix, k=1))
    with open(path, "w") as fh:
        for i, j in zip(ii, jj):
            fh.write(f"{i},{j}\n")


def read_adjacency_csv(path, n: int) -> Adjacency:
    """Read an edge-list CSV written by :func:`write_adjacency_csv`."""
    A = np.zeros((n, n))
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            i_s, j_s = line.split(",")
            i, j = int(i_s), int(j_s)
            A[i, j] = A[j, i] = 1.0
    return Adjacency(A)


def write_embedding_csv(points: np.ndarray, path) -> None:
    """Write an n x r embedding as CSV with header v,x1..xr."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    r = pts.shape[1]
    with open(path, "w") as fh:
        fh.write("v," + ",".join(f"x{i + 1}" for i in range(r)) + "\n")
        for v, row in enumerate(pts):
            fh.write(f"{v}," + ",".join(repr(float(x)) for x in row) + "\n")


def read_embedding_csv(path) -> np.ndarray:
    """Read an embedding CSV written by :func:`write_embedding_csv`."""
    rows = []
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("v,"):
            raise ValueError(f"{path}: expected header starting with 'v,'")
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) > 1:
                rows.append([float(x) for x in parts[1:]])
    return np.asarray(rows)
