"""Parametric curves in R^k: arc length, inversion, Frechet means, covering radii.

A curve is a map psi: [0,1] -> R^k with an (analytic or finite-difference)
derivative.  Arc lengths are computed by adaptive Simpson quadrature, and the
arc-length map t(tau) is tabulated once per curve so it can be inverted.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import QuadratureError

QUAD_TOL = 1e-9
QUAD_MAX_DEPTH = 20
FD_STEP = 1e-6
TABLE_KNOTS = 4096
COVERING_GRID = 10_000
_DOMAIN_SLACK = 1e-12


def _check_unit_interval(tau, name="tau"):
    """Clamp float noise at the endpoints, reject anything truly outside [0,1]."""
    t = np.asarray(tau, dtype=float)
    if np.any(t < -_DOMAIN_SLACK) or np.any(t > 1.0 + _DOMAIN_SLACK):
        raise ValueError(f"{name} must lie in [0, 1], got {tau!r}")
    return np.clip(t, 0.0, 1.0)


class ParametricCurve:
    """A 1-D curve psi: [0,1] -> R^k.

    Parameters
    ----------
    dimension : int
        Ambient dimension k.
    evaluator : callable
        Maps tau to a point in R^k.  If ``vectorized``, it must accept an
        array of shape (m,) and return (m, k).
    derivative : callable, optional
        Analytic derivative with the same calling convention.  When omitted,
        a finite-difference derivative with step 1e-6 is used (central in the
        interior, second-order one-sided at the endpoints).
    vectorized : bool
        Whether evaluator/derivative accept arrays of parameters.

    The constructor checks that speeds are finite on a 1000-point grid.
    Instances are immutable after construction and safe to share across
    threads; the arc-length table is built lazily and cached.
    """

    def __init__(self, dimension: int, evaluator: Callable, derivative: Callable | None = None,
                 vectorized: bool = False, name: str | None = None):
        if dimension < 1:
            raise ValueError(f"dimension must be a positive integer, got {dimension}")
        self.dimension = int(dimension)
        self._evaluator = evaluator
        self._derivative = derivative
        self._vectorized = bool(vectorized)
        self.name = name
        self._arclength = None
        self._grid_cache: dict[int, np.ndarray] = {}

        probe = np.linspace(0.0, 1.0, 1000)
        speeds = self.speed(probe)
        if not np.all(np.isfinite(speeds)):
            raise ValueError("curve speed is not finite everywhere on [0, 1]")

    # -- evaluation ---------------------------------------------------------

    def _eval_many(self, taus: np.ndarray) -> np.ndarray:
        if self._vectorized:
            return np.asarray(self._evaluator(taus), dtype=float)
        return np.asarray([self._evaluator(float(t)) for t in taus], dtype=float)

    def evaluate(self, tau):
        """Return psi(tau); tau may be a scalar or an array of parameters."""
        t = _check_unit_interval(tau)
        if t.ndim == 0:
            out = np.asarray(self._evaluator(float(t)) if not self._vectorized
                             else self._evaluator(t[None])[0], dtype=float)
            if out.shape != (self.dimension,):
                raise ValueError(f"evaluator returned shape {out.shape}, expected ({self.dimension},)")
            return out
        return self._eval_many(t).reshape(len(t), self.dimension)

    def derivative(self, tau):
        """Return d psi / d tau at tau (analytic if supplied, else finite difference)."""
        t = _check_unit_interval(tau)
        if self._derivative is not None:
            if t.ndim == 0:
                return np.asarray(self._derivative(float(t)) if not self._vectorized
                                  else self._derivative(t[None])[0], dtype=float)
            if self._vectorized:
                return np.asarray(self._derivative(t), dtype=float)
            return np.asarray([self._derivative(float(x)) for x in t], dtype=float)
        return self._fd_derivative(t)

    def _fd_derivative(self, t: np.ndarray):
        scalar = t.ndim == 0
        ts = np.atleast_1d(t)
        h = FD_STEP
        out = np.empty((len(ts), self.dimension))
        for i, x in enumerate(ts):
            if x < h:
                # one-sided differences keep evaluation inside [0, 1]
                out[i] = (-3.0 * self.evaluate(x) + 4.0 * self.evaluate(x + h)
                          - self.evaluate(x + 2 * h)) / (2 * h)
            elif x > 1.0 - h:
                out[i] = (3.0 * self.evaluate(x) - 4.0 * self.evaluate(x - h)
                          + self.evaluate(x - 2 * h)) / (2 * h)
            else:
                out[i] = (self.evaluate(x + h) - self.evaluate(x - h)) / (2 * h)
        return out[0] if scalar else out

    def speed(self, tau):
        """Return ||d psi / d tau|| at tau."""
        d = self.derivative(tau)
        return np.linalg.norm(d, axis=-1)

    # -- cached helpers -----------------------------------------------------

    def grid_points(self, size: int) -> np.ndarray:
        """Curve points on a uniform size-point tau grid (cached per size)."""
        if size not in self._grid_cache:
            pts = self.evaluate(np.linspace(0.0, 1.0, size))
            pts.setflags(write=False)
            self._grid_cache[size] = pts
        return self._grid_cache[size]

    def arclength_param(self) -> "ArcLengthParam":
        """The arc-length reparametrization of this curve (built once, cached)."""
        if self._arclength is None:
            self._arclength = ArcLengthParam(self)
        return self._arclength


def evaluate(curve: ParametricCurve, tau):
    """Evaluate psi(tau); errors if tau is outside [0, 1]."""
    return curve.evaluate(tau)


def speed(curve: ParametricCurve, tau):
    """Speed ||psi'(tau)||; errors if tau is outside [0, 1]."""
    return curve.speed(tau)


# -- quadrature --------------------------------------------------------------

def _simpson_recurse(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    err = left + right - whole
    if abs(err) <= 15.0 * tol:
        return left + right + err / 15.0
    if depth <= 0:
        raise QuadratureError(
            f"adaptive Simpson did not converge after {QUAD_MAX_DEPTH} refinement levels "
            f"on [{a:.6g}, {b:.6g}] (error estimate {abs(err):.3g})")
    return (_simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + _simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1))


def adaptive_simpson(f, a: float, b: float, tol: float = QUAD_TOL,
                     max_depth: int = QUAD_MAX_DEPTH) -> float:
    """Integrate f over [a, b] to absolute tolerance tol by adaptive Simpson."""
    if a == b:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _simpson_recurse(f, a, b, fa, fm, fb, whole, tol, max_depth)


def arc_length(curve: ParametricCurve, tau_a: float, tau_b: float) -> float:
    """Arc length |integral of speed from tau_a to tau_b| (tolerance 1e-9)."""
    a = float(_check_unit_interval(tau_a, "tau_a"))
    b = float(_check_unit_interval(tau_b, "tau_b"))
    if a == b:
        return 0.0
    value = adaptive_simpson(lambda t: float(curve.speed(t)), min(a, b), max(a, b))
    return abs(value)


# -- arc-length reparametrization --------------------------------------------

class ArcLengthParam:
    """Monotone table of the arc-length map t(tau) with bisection inversion.

    Built on 4096 uniformly spaced tau knots; each knot value is a cumulative
    composite-Simpson integral, so table error is far below the 1e-8 * L
    round-trip contract.
    """

    def __init__(self, curve: ParametricCurve, knots: int = TABLE_KNOTS):
        self.curve = curve
        self.knots_tau = np.linspace(0.0, 1.0, knots)
        # composite Simpson with 4 panels per knot interval, vectorized
        panels = 4
        fine = np.linspace(0.0, 1.0, (knots - 1) * 2 * panels + 1)
        s_vals = np.asarray(curve.speed(fine)).reshape(-1)
        h = fine[1] - fine[0]
        per_pair = h / 3.0 * (s_vals[0:-2:2] + 4.0 * s_vals[1:-1:2] + s_vals[2::2])
        per_interval = per_pair.reshape(knots - 1, panels).sum(axis=1)
        self.knots_t = np.concatenate([[0.0], np.cumsum(per_interval)])
        self.total_length = float(self.knots_t[-1])
        if np.any(np.diff(self.knots_t) <= 0):
            raise ValueError("arc-length table is not strictly increasing; "
                             "curve may have zero-speed segments")

    def forward(self, tau: float) -> float:
        """t(tau) = arc length from 0 to tau, by quadrature from the nearest knot."""
        tau = float(_check_unit_interval(tau))
        i = min(int(np.searchsorted(self.knots_tau, tau, side="right")) - 1,
                len(self.knots_tau) - 2)
        return float(self.knots_t[i]) + arc_length(self.curve, float(self.knots_tau[i]), tau)

    def invert(self, t: float) -> float:
        """tau with |arc_length(0, tau) - t| <= 1e-8 * L, by table + bisection."""
        L = self.total_length
        if t < -_DOMAIN_SLACK * max(L, 1.0) or t > L * (1.0 + _DOMAIN_SLACK) + _DOMAIN_SLACK:
            raise ValueError(f"t must lie in [0, {L!r}], got {t!r}")
        t = min(max(float(t), 0.0), L)
        if t == 0.0:
            return 0.0
        if t == L:
            return 1.0
        i = min(int(np.searchsorted(self.knots_t, t, side="right")) - 1,
                len(self.knots_t) - 2)
        base_tau = float(self.knots_tau[i])
        base_t = float(self.knots_t[i])
        lo, hi = base_tau, float(self.knots_tau[i + 1])
        # g(tau) = base_t + arc(base_tau, tau) - t is increasing on [lo, hi]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if base_t + arc_length(self.curve, base_tau, mid) < t:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-14:
                break
        return 0.5 * (lo + hi)

    def point(self, t: float) -> np.ndarray:
        """gamma(t) = psi(tau(t)), the arc-length parametrization."""
        return self.curve.evaluate(self.invert(t))

    def invert_many(self, ts) -> np.ndarray:
        """Vectorized inversion by table interpolation (error ~ (1/4096)^2 * |speed'|).

        Good enough for bulk sampling of curve points; use :meth:`invert` when
        the 1e-8 * L contract matters.
        """
        ts = np.asarray(ts, dtype=float)
        if np.any(ts < -_DOMAIN_SLACK) or np.any(ts > self.total_length * (1.0 + _DOMAIN_SLACK)):
            raise ValueError(f"arc lengths must lie in [0, {self.total_length!r}]")
        return np.interp(np.clip(ts, 0.0, self.total_length), self.knots_t, self.knots_tau)

    def points(self, ts) -> np.ndarray:
        """gamma evaluated at many arc lengths (table-interpolated inversion)."""
        return self.curve.evaluate(self.invert_many(ts))


def invert_arclength(param: ArcLengthParam, t: float) -> float:
    """Parameter tau with arc_length(0, tau) = t; errors outside [0, L]."""
    return param.invert(t)


# -- Frechet mean and covering radius ----------------------------------------

def frechet_mean_arclength(t_values: Sequence[float]) -> float:
    """Sample mean of arc-length parameters; the Frechet mean point is gamma(mean)."""
    t = np.asarray(t_values, dtype=float)
    if t.size == 0:
        raise ValueError("t_values must be non-empty")
    return float(np.mean(t))


def covering_radius(curve: ParametricCurve | ArcLengthParam, t_sample: Sequence[float]) -> float:
    """Empirical covering radius of an arc-length sample.

    Returns the maximum, over a 10000-point arc-length grid, of the distance
    to the nearest sample point: the smallest delta for which the sample
    delta-covers the curve (up to grid resolution).
    """
    param = curve if isinstance(curve, ArcLengthParam) else curve.arclength_param()
    t = np.sort(np.asarray(t_sample, dtype=float))
    if t.size == 0:
        raise ValueError("t_sample must be non-empty")
    L = param.total_length
    if t[0] < -_DOMAIN_SLACK * max(L, 1.0) or t[-1] > L * (1.0 + _DOMAIN_SLACK) + _DOMAIN_SLACK:
        raise ValueError(f"arc-length samples must lie in [0, {L!r}]")
    grid = np.linspace(0.0, L, COVERING_GRID)
    pos = np.searchsorted(t, grid)
    left = np.where(pos > 0, np.abs(grid - t[np.maximum(pos - 1, 0)]), np.inf)
    right = np.where(pos < len(t), np.abs(t[np.minimum(pos, len(t) - 1)] - grid), np.inf)
    return float(np.max(np.minimum(left, right)))


# -- curve constructors -------------------------------------------------------

def hardy_weinberg() -> ParametricCurve:
    """The trinomial curve psi(tau) = (tau^2, 2 tau (1-tau), (1-tau)^2) in R^3."""
    def psi(tau):
        tau = np.asarray(tau, dtype=float)
        return np.stack([tau ** 2, 2.0 * tau * (1.0 - tau), (1.0 - tau) ** 2], axis=-1)

    def dpsi(tau):
        tau = np.asarray(tau, dtype=float)
        return np.stack([2.0 * tau, 2.0 - 4.0 * tau, -2.0 * (1.0 - tau)], axis=-1)

    return ParametricCurve(3, psi, dpsi, vectorized=True, name="hardy-weinberg")


def polynomial_curve(coefficients: Sequence[Sequence[float]], name: str = "polynomial") -> ParametricCurve:
    """Curve whose coordinates are polynomials in tau.

    ``coefficients[c]`` lists the coefficients of coordinate c in ascending
    powers, e.g. the Hardy-Weinberg curve is
    ``[[0, 0, 1], [0, 2, -2], [1, -2, 1]]``.
    """
    coeffs = [np.asarray(c, dtype=float) for c in coefficients]
    if not coeffs:
        raise ValueError("coefficients must list at least one coordinate")
    dcoeffs = [np.polynomial.polynomial.polyder(c) if len(c) > 1 else np.zeros(1) for c in coeffs]

    def psi(tau):
        tau = np.asarray(tau, dtype=float)
        return np.stack([np.polynomial.polynomial.polyval(tau, c) for c in coeffs], axis=-1)

    def dpsi(tau):
        tau = np.asarray(tau, dtype=float)
        return np.stack([np.polynomial.polynomial.polyval(tau, c) for c in dcoeffs], axis=-1)

    return ParametricCurve(len(coeffs), psi, dpsi, vectorized=True, name=name)


def make_curve(spec) -> ParametricCurve:
    """Build a curve from a config value: a registered name or coefficient lists."""
    if isinstance(spec, str):
        try:
            return CURVES[spec]()
        except KeyError:
            raise ValueError(f"unknown curve {spec!r}; known names: {sorted(CURVES)}") from None
    if isinstance(spec, (list, tuple)):
        return polynomial_curve(spec)
    raise ValueError(f"curve spec must be a name or coefficient lists, got {type(spec).__name__}")


CURVES = {"hardy-weinberg": hardy_weinberg}


def validate_latent_support(curve: ParametricCurve, grid_size: int = 200) -> bool:
    """True iff psi(a)^T psi(b) lies in [0, 1] for all a, b on a validation grid."""
    pts = curve.grid_points(grid_size)
    gram = pts @ pts.T
    return bool(gram.min() >= -_DOMAIN_SLACK and gram.max() <= 1.0 + _DOMAIN_SLACK)
