"""Curve learning from noisy point clouds: localization graphs, all-pairs
shortest paths, CMDS initialization, raw-stress majorization into the line,
the closed-form stationary 1-D solution, and geodesic sandwich diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, csgraph_from_dense, shortest_path
from scipy.spatial.distance import pdist, squareform

from .errors import ConnectivityError, DegenerateEmbeddingError

COINCIDENT_TOL = 1e-12
DEFAULT_MAX_ITERS = 200
DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class LocalizationGraph:
    """Undirected graph on feature vectors, weighted by Euclidean distance.

    Edges are stored once with i < j.  ``rule`` records how the graph was
    built: "epsilon" with radius ``param`` or "knn" with K = ``param``.
    """

    n: int
    rule: str
    param: float
    edge_i: np.ndarray
    edge_j: np.ndarray
    weights: np.ndarray

    @property
    def n_edges(self) -> int:
        return self.edge_i.size

    def density(self) -> float:
        possible = self.n * (self.n - 1) / 2
        return self.n_edges / possible if possible else 0.0

    def weight_matrix(self) -> np.ndarray:
        """Dense matrix with np.inf where there is no edge, 0 on the diagonal."""
        W = np.full((self.n, self.n), np.inf)
        W[self.edge_i, self.edge_j] = self.weights
        W[self.edge_j, self.edge_i] = self.weights
        np.fill_diagonal(W, 0.0)
        return W


def build_epsilon_graph(points: np.ndarray, radius: float) -> LocalizationGraph:
    """Connect i and j exactly when ||x_i - x_j|| <= radius."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise ValueError(f"need at least 2 points of equal dimension, got shape {pts.shape}")
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    d = pdist(pts)
    ii, jj = np.triu_indices(pts.shape[0], k=1)
    keep = d <= radius
    return LocalizationGraph(pts.shape[0], "epsilon", float(radius),
                             ii[keep], jj[keep], d[keep])


def build_knn_graph(points: np.ndarray, K: int) -> LocalizationGraph:
    """Symmetrized-union K-nearest-neighbor graph.

    An edge (i, j) exists when j is among the K nearest neighbors of i or
    vice versa; distance ties are broken in favor of the smaller vertex index.
    """
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    if pts.ndim != 2 or n < 2:
        raise ValueError(f"need at least 2 points of equal dimension, got shape {pts.shape}")
    if not 1 <= K <= n - 1:
        raise ValueError(f"K must lie in [1, n-1] = [1, {n - 1}], got {K}")
    D = squareform(pdist(pts))
    edges = set()
    for i in range(n):
        # stable sort on distance keeps equal-distance neighbors in index order
        order = np.argsort(D[i], kind="stable")
        order = order[order != i][:K]
        for j in order:
            edges.add((min(i, int(j)), max(i, int(j))))
    ii = np.fromiter((e[0] for e in sorted(edges)), dtype=int, count=len(edges))
    jj = np.fromiter((e[1] for e in sorted(edges)), dtype=int, count=len(edges))
    return LocalizationGraph(n, "knn", float(K), ii, jj, D[ii, jj])


@dataclass(frozen=True)
class GeodesicMatrix:
    """All-pairs shortest-path distances on a localization graph.

    ``vertex_ids`` maps rows back to the original vertex indices when the
    matrix was restricted to the largest connected component, else None.
    """

    matrix: np.ndarray
    vertex_ids: np.ndarray | None = None

    def __post_init__(self):
        D = np.asarray(self.matrix, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise ValueError(f"distance matrix must be square, got shape {D.shape}")
        if not np.all(np.isfinite(D)):
            raise ValueError("distance matrix has non-finite entries")
        asym = np.max(np.abs(D - D.T)) if D.size else 0.0
        if asym > 1e-9:
            raise ValueError(f"distance matrix asymmetric by {asym:.3g}")
        D = 0.5 * (D + D.T)
        np.fill_diagonal(D, 0.0)
        object.__setattr__(self, "matrix", D)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def _dist_matrix(delta) -> np.ndarray:
    return delta.matrix if isinstance(delta, GeodesicMatrix) else np.asarray(delta, dtype=float)


def _components(g: LocalizationGraph):
    ones = csr_matrix((np.ones(g.n_edges), (g.edge_i, g.edge_j)), shape=(g.n, g.n))
    return connected_components(ones, directed=False)


def shortest_path_matrix(g: LocalizationGraph, largest_component: bool = False) -> GeodesicMatrix:
    """Exact all-pairs shortest-path distances on g.

    Raises ConnectivityError naming the components when g is disconnected;
    with ``largest_component=True`` the matrix is restricted to the largest
    component instead and carries the index map in ``vertex_ids``.
    """
    n_comp, labels = _components(g)
    ids = None
    if n_comp > 1:
        sizes = np.bincount(labels)
        if not largest_component:
            desc = ", ".join(f"component {c}: {s} vertices" for c, s in enumerate(sizes))
            raise ConnectivityError(
                f"localization graph is disconnected ({n_comp} components; {desc})",
                component_sizes=sizes.tolist())
        keep_label = int(np.argmax(sizes))
        ids = np.nonzero(labels == keep_label)[0]
        remap = -np.ones(g.n, dtype=int)
        remap[ids] = np.arange(ids.size)
        mask = labels[g.edge_i] == keep_label
        g = LocalizationGraph(ids.size, g.rule, g.param,
                              remap[g.edge_i[mask]], remap[g.edge_j[mask]], g.weights[mask])

    # Floyd-Warshall wins on dense graphs, Dijkstra on sparse ones
    use_dijkstra = g.n_edges * max(np.log2(max(g.n, 2)), 1.0) < g.n ** 2
    graph = csgraph_from_dense(g.weight_matrix(), null_value=np.inf)
    D = shortest_path(graph, method="D" if use_dijkstra else "FW", directed=False)
    if not np.all(np.isfinite(D)):
        raise ConnectivityError("shortest-path matrix has unreachable pairs")
    return GeodesicMatrix(D, vertex_ids=ids)


# -- embeddings ---------------------------------------------------------------

def cmds_embed(delta, d: int) -> np.ndarray:
    """Classical MDS: double-center -0.5 * delta^2, embed with the top-d
    nonnegative eigenpairs, coordinates scaled by square-rooted eigenvalues.
    """
    D = _dist_matrix(delta)
    n = D.shape[0]
    if not 1 <= d <= n - 1:
        raise ValueError(f"embedding dimension d={d} must lie in [1, {n - 1}]")
    D2 = D ** 2
    row = D2.mean(axis=1, keepdims=True)
    B = -0.5 * (D2 - row - row.T + D2.mean())
    lam, vec = np.linalg.eigh(B)
    lam = lam[::-1][:d]
    vec = vec[:, ::-1][:, :d]
    if lam[0] <= 0.0:
        if np.any(D != 0.0):
            raise DegenerateEmbeddingError(
                "no positive eigenvalue in the double-centered matrix; "
                "distance matrix is pathological")
        return np.zeros((n, d))
    return vec * np.sqrt(np.maximum(lam, 0.0))


def raw_stress(z, delta, weights=None) -> float:
    """Raw stress 0.5 * sum_ij u_ij (||z_i - z_j|| - delta_ij)^2."""
    D = _dist_matrix(delta)
    Z = np.asarray(z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if Z.shape[0] != D.shape[0]:
        raise ValueError(f"configuration has {Z.shape[0]} rows, distances {D.shape[0]}")
    dz = squareform(pdist(Z)) if Z.shape[0] > 1 else np.zeros_like(D)
    diff = dz - D
    if weights is None:
        return 0.5 * float(np.sum(diff ** 2))
    return 0.5 * float(np.sum(np.asarray(weights, dtype=float) * diff ** 2))


def _bz(Z: np.ndarray, D: np.ndarray, U: np.ndarray | None) -> np.ndarray:
    dz = squareform(pdist(Z)) if Z.shape[0] > 1 else np.zeros_like(D)
    with np.errstate(divide="ignore", invalid="ignore"):
        B = np.where(dz > COINCIDENT_TOL, -D / dz, 0.0)
    if U is not None:
        B *= U
    np.fill_diagonal(B, 0.0)
    np.fill_diagonal(B, -B.sum(axis=1))
    return B


def guttman_step(z, delta, weights=None):
    """One stress-majorization update; never increases the raw stress.

    With uniform weights the update is z' = B(z) z / n, where B(z) has
    off-diagonal entries -delta_ij / d_ij(z) (zero for coincident points)
    and diagonal entries the negated row sums.
    """
    D = _dist_matrix(delta)
    Z = np.asarray(z, dtype=float)
    squeeze = Z.ndim == 1
    if squeeze:
        Z = Z[:, None]
    n = Z.shape[0]
    if weights is None:
        out = _bz(Z, D, None) @ Z / n
    else:
        U = np.asarray(weights, dtype=float)
        V = -U.copy()
        np.fill_diagonal(V, 0.0)
        np.fill_diagonal(V, -V.sum(axis=1))
        out = np.linalg.pinv(V) @ (_bz(Z, D, U) @ Z)
    return out[:, 0] if squeeze else out


@dataclass(frozen=True)
class LineEmbedding:
    """Mean-centered 1-D configuration with its final raw stress."""

    coords: np.ndarray
    stress: float
    iterations: int = field(default=0)


def embed_line(delta, max_iters: int = DEFAULT_MAX_ITERS, tol: float = DEFAULT_TOL) -> LineEmbedding:
    """Embed a geodesic matrix into R^1 by CMDS + uniform-weight Guttman iteration.

    Iterates until the relative stress decrease drops below ``tol`` or
    ``max_iters`` is reached; the returned coordinates are mean-centered.
    """
    D = _dist_matrix(delta)
    z = cmds_embed(D, 1)[:, 0]
    stress = raw_stress(z, D)
    iters = 0
    for it in range(1, max_iters + 1):
        z = guttman_step(z, D)
        new = raw_stress(z, D)
        iters = it
        done = stress <= 0.0 or (stress - new) < tol * stress
        stress = new
        if done:
            break
    z = z - z.mean()
    return LineEmbedding(coords=z, stress=float(stress), iterations=iters)


def stationary_line_solution(delta, order) -> np.ndarray:
    """Closed-form stationary point of 1-D raw stress for a known coordinate order.

    For vertices sorted increasingly by ``order``, coordinate k equals
    (1/n) * [sum of distances to earlier vertices - sum to later vertices];
    the result is mean-centered by construction.
    """
    D = _dist_matrix(delta)
    n = D.shape[0]
    order = np.asarray(order, dtype=int)
    if order.shape != (n,) or not np.array_equal(np.sort(order), np.arange(n)):
        raise ValueError("order must be a permutation of range(n)")
    P = D[np.ix_(order, order)]
    before = np.triu(P, k=1).sum(axis=0)   # rows earlier in the order
    after = np.tril(P, k=-1).sum(axis=0)
    z = np.empty(n)
    z[order] = (before - after) / n
    return z


# -- diagnostics ----------------------------------------------------------------

@dataclass(frozen=True)
class SandwichReport:
    """Per-pair check of the geodesic lower/upper sandwich bounds."""

    fraction_both: float
    fraction_lower: float
    fraction_upper: float
    n_pairs: int
    violations: list

    def to_json_dict(self) -> dict:
        return {
            "fraction_both": self.fraction_both,
            "fraction_lower": self.fraction_lower,
            "fraction_upper": self.fraction_upper,
            "n_pairs": self.n_pairs,
            "violations": [
                {"i": int(i), "j": int(j), "graph": float(dg), "manifold": float(dm),
                 "bound": which}
                for (i, j, dg, dm, which) in self.violations
            ],
        }


def sandwich_check(delta, true_geodesics, noise_radius: float, epsilon: float) -> SandwichReport:
    """Check d_M - 2*noise_radius <= d_G <= (1 + 4*noise_radius/epsilon) * d_M per pair.

    ``true_geodesics`` holds manifold distances d_M; requires
    2 * noise_radius <= epsilon.
    """
    if noise_radius <= 0 or epsilon <= 0:
        raise ValueError("noise_radius and epsilon must be positive")
    if 2.0 * noise_radius > epsilon * (1 + 1e-12):
        raise ValueError(f"need 2*noise_radius <= epsilon, got {2 * noise_radius} > {epsilon}")
    DG = _dist_matrix(delta)
    DM = np.asarray(_dist_matrix(true_geodesics), dtype=float)
    if DG.shape != DM.shape:
        raise ValueError(f"shape mismatch: {DG.shape} vs {DM.shape}")
    slack = 1e-12 * max(1.0, DM.max(initial=0.0))
    ii, jj = np.triu_indices(DG.shape[0], k=1)
    dg, dm = DG[ii, jj], DM[ii, jj]
    lower_ok = dg >= dm - 2.0 * noise_radius - slack
    upper_ok = dg <= (1.0 + 4.0 * noise_radius / epsilon) * dm + slack
    both = lower_ok & upper_ok
    bad = np.nonzero(~both)[0]
    violations = []
    for idx in bad[:1000]:
        which = ("lower+upper" if not lower_ok[idx] and not upper_ok[idx]
                 else "lower" if not lower_ok[idx] else "upper")
        violations.append((int(ii[idx]), int(jj[idx]), float(dg[idx]), float(dm[idx]), which))
    n_pairs = ii.size
    return SandwichReport(
        fraction_both=float(both.mean()) if n_pairs else 1.0,
        fraction_lower=float(lower_ok.mean()) if n_pairs else 1.0,
        fraction_upper=float(upper_ok.mean()) if n_pairs else 1.0,
        n_pairs=int(n_pairs),
        violations=violations,
    )


# -- serialization ----------------------------------------------------------------

def write_distance_csv(delta, path) -> None:
    """Write a dense distance matrix as CSV."""
    D = _dist_matrix(delta)
    with open(path, "w") as fh:
        for row in D:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def read_distance_csv(path) -> GeodesicMatrix:
    """Read a dense distance matrix CSV."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(x) for x in line.split(",")])
    return GeodesicMatrix(np.asarray(rows))


def write_line_embedding_csv(emb: LineEmbedding, path, vertex_ids=None) -> None:
    """Write a 1-D embedding as CSV with header v,z.

    ``vertex_ids`` relabels rows with their original vertex indices when the
    embedding covered only the largest component.
    """
    ids = range(len(emb.coords)) if vertex_ids is None else vertex_ids
    with open(path, "w") as fh:
        fh.write("v,z\n")
        for v, value in zip(ids, emb.coords):
            fh.write(f"{int(v)},{repr(float(value))}\n")
