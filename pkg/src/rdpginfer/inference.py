"""The three one-sample test statistics: unrestricted distance in the ambient
space, geodesic distance on the known curve (via minimum distance estimation),
and geodesic distance on a curve learnt from the data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import curve as _curve
from . import manifold as _manifold

MDE_GRID = 2048
MDE_TOL = 1e-8
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0

KIND_UNRESTRICTED = "unrestricted"
KIND_TRUE = "true-manifold"
KIND_LEARNT = "learnt-manifold"


@dataclass(frozen=True)
class MetricMatrix:
    """Symmetric positive definite matrix defining the test's quadratic form."""

    matrix: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError(f"metric must be square, got shape {M.shape}")
        if np.max(np.abs(M - M.T)) > 1e-12:
            raise ValueError("metric must be symmetric within 1e-12")
        if np.linalg.eigvalsh(M)[0] <= 0:
            raise ValueError("metric must be positive definite")
        object.__setattr__(self, "matrix", M)

    @classmethod
    def identity(cls, k: int) -> "MetricMatrix":
        return cls(np.eye(k))

    @property
    def k(self) -> int:
        return self.matrix.shape[0]

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)


def _as_metric(metric, k: int) -> MetricMatrix:
    if metric is None:
        return MetricMatrix.identity(k)
    if isinstance(metric, MetricMatrix):
        m = metric
    else:
        m = MetricMatrix(np.asarray(metric, dtype=float))
    if m.k != k:
        raise ValueError(f"metric is {m.k}x{m.k}, expected {k}x{k}")
    return m


@dataclass(frozen=True)
class TestOutcome:
    """A computed statistic with its per-vertex diagnostics."""

    kind: str
    value: float
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (np.isfinite(self.value) and self.value >= 0.0):
            raise ValueError(f"statistic must be finite and non-negative, got {self.value}")
        object.__setattr__(self, "value", float(self.value))

    def to_json_dict(self) -> dict:
        def clean(v):
            if isinstance(v, np.ndarray):
                return [float(x) for x in v]
            if isinstance(v, (np.floating, float)):
                return float(v)
            if isinstance(v, (np.integer, int)):
                return int(v)
            return v
        return {"kind": self.kind, "value": float(self.value),
                "diagnostics": {k: clean(v) for k, v in self.diagnostics.items()}}


def t_unrestricted(aligned_community: np.ndarray, p0: np.ndarray, metric=None) -> TestOutcome:
    """sqrt((xbar - p0)^T M (xbar - p0)) for the community centroid xbar."""
    pts = np.atleast_2d(np.asarray(aligned_community, dtype=float))
    p0 = np.asarray(p0, dtype=float)
    if pts.shape[0] < 1 or pts.shape[1] != p0.shape[0]:
        raise ValueError(f"community shape {pts.shape} does not match p0 of length {p0.shape[0]}")
    M = _as_metric(metric, p0.shape[0])
    diff = pts.mean(axis=0) - p0
    value = float(np.sqrt(diff @ M.matrix @ diff))
    return TestOutcome(KIND_UNRESTRICTED, value, {"centroid": pts.mean(axis=0)})


def _golden_section(q, a: float, b: float, tol: float = MDE_TOL) -> float:
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    q1, q2 = q(x1), q(x2)
    while b - a > tol:
        if q1 <= q2:
            b, x2, q2 = x2, x1, q1
            x1 = b - _GOLDEN * (b - a)
            q1 = q(x1)
        else:
            a, x1, q1 = x1, x2, q2
            x2 = a + _GOLDEN * (b - a)
            q2 = q(x2)
    return 0.5 * (a + b)


def mde_fit(curve: _curve.ParametricCurve, y: np.ndarray, metric=None) -> float:
    """Parameter of the curve point closest to y in the M^{-1} quadratic form.

    Minimizes Q(tau) = (psi(tau) - y)^T M^{-1} (psi(tau) - y) over [0, 1]
    by a 2048-point grid scan followed by golden-section refinement.
    """
    y = np.asarray(y, dtype=float)
    M = _as_metric(metric, curve.dimension)
    identity = np.array_equal(M.matrix, np.eye(curve.dimension))
    Minv = None if identity else M.inverse()

    pts = curve.grid_points(MDE_GRID)
    res = pts - y
    if identity:
        qs = np.einsum("ij,ij->i", res, res)
    else:
        qs = np.einsum("ij,jk,ik->i", res, Minv, res)
    i = int(np.argmin(qs))
    grid = np.linspace(0.0, 1.0, MDE_GRID)

    def q(tau: float) -> float:
        r = curve.evaluate(tau) - y
        return float(r @ r) if identity else float(r @ Minv @ r)

    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, MDE_GRID - 1)]
    tau_hat = _golden_section(q, lo, hi)
    # never return anything worse than the best grid point
    return float(tau_hat) if q(tau_hat) <= qs[i] else float(grid[i])


def t_true_manifold(curve: _curve.ParametricCurve, aligned_community: np.ndarray,
                    tau0: float, metric=None) -> TestOutcome:
    """|tbar - t0|: arc-length distance of the community's Frechet mean from psi(tau0).

    Each community row is projected to the curve by mde_fit; its arc length
    from psi(0) gives t_hat_i, and tbar is their mean.
    """
    pts = np.atleast_2d(np.asarray(aligned_community, dtype=float))
    if pts.shape[0] < 1:
        raise ValueError("community must contain at least one row")
    if not 0.0 <= tau0 <= 1.0:
        raise ValueError(f"tau0 must lie in [0, 1], got {tau0}")
    tau_hat = np.array([mde_fit(curve, row, metric) for row in pts])
    t_hat = np.array([_curve.arc_length(curve, 0.0, t) for t in tau_hat])
    t0 = _curve.arc_length(curve, 0.0, tau0)
    t_bar = _curve.frechet_mean_arclength(t_hat)
    return TestOutcome(KIND_TRUE, abs(t_bar - t0),
                       {"tau_hat": tau_hat, "t_hat": t_hat, "t_bar": t_bar, "t0": t0})


def t_learnt_manifold(p0: np.ndarray, aligned_estimates: np.ndarray, s: int,
                      radius: float, max_iters: int = _manifold.DEFAULT_MAX_ITERS,
                      tol: float = _manifold.DEFAULT_TOL) -> TestOutcome:
    """|Zbar_s - Z0| on the 1-D embedding of the learnt curve.

    The hypothesized point p0 is embedded jointly as vertex 0 with all n
    estimated positions; the localization graph uses the epsilon rule with
    the given radius.  Raises ConnectivityError when the graph is
    disconnected (the statistic is then undefined).
    """
    est = np.atleast_2d(np.asarray(aligned_estimates, dtype=float))
    p0 = np.asarray(p0, dtype=float)
    if not 1 <= s <= est.shape[0]:
        raise ValueError(f"community size s={s} must lie in [1, {est.shape[0]}]")
    if est.shape[1] != p0.shape[0]:
        raise ValueError(f"estimates have dimension {est.shape[1]}, p0 has {p0.shape[0]}")
    points = np.vstack([p0[None, :], est])
    graph = _manifold.build_epsilon_graph(points, radius)
    delta = _manifold.shortest_path_matrix(graph)
    emb = _manifold.embed_line(delta, max_iters=max_iters, tol=tol)
    z = emb.coords
    z_bar = float(z[1:s + 1].mean())
    return TestOutcome(KIND_LEARNT, abs(z_bar - z[0]),
                       {"z": z, "z0": float(z[0]), "z_bar_s": z_bar,
                        "stress": emb.stress, "iterations": emb.iterations})
