"""Discrete fractional calculus on uniform time grids.

Provides the fractional integral of Riemann-Liouville type, the Caputo
derivative for orders between 1 and 2, the two-parameter Mittag-Leffler
function, and a truncated numerical Laplace transform.  The integral and
derivative are discretized by product integration: the input is
reconstructed piecewise-linearly and the weakly singular kernel is
integrated exactly against that reconstruction, which keeps first-order
accuracy near t = 0 where naive quadrature degrades.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln as _gammaln, rgamma as _rgamma

from .errors import MittagLefflerError

__all__ = [
    "TimeGrid",
    "TimeSeries",
    "LaplaceValue",
    "rl_weights",
    "rl_integral",
    "caputo_derivative",
    "second_differences",
    "mittag_leffler",
    "mittag_leffler_array",
    "laplace_numeric",
    "write_timeseries_csv",
    "read_timeseries_csv",
]

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class TimeGrid:
    """Uniform mesh t_k = k*dt on [0, T] with K steps (K+1 nodes)."""

    T: float
    K: int

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"final time must be positive and finite, got {self.T}")
        if self.K < 2:
            raise ValueError(f"need at least 2 time steps, got {self.K}")

    @property
    def dt(self) -> float:
        return self.T / self.K

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.K + 1)

    def __len__(self) -> int:
        return self.K + 1


@dataclass
class TimeSeries:
    """Samples (real or complex) on the nodes of a :class:`TimeGrid`."""

    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != (len(self.grid),):
            raise ValueError(
                f"values must have length {len(self.grid)}, got shape {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("time series contains non-finite samples")

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)


def _check_order(alpha: float, lo: float, hi: float, lo_open=True, hi_open=False) -> None:
    ok = (alpha > lo if lo_open else alpha >= lo) and (alpha < hi if hi_open else alpha <= hi)
    if not (math.isfinite(alpha) and ok):
        lob, hib = "(" if lo_open else "[", ")" if hi_open else "]"
        raise ValueError(f"order must lie in {lob}{lo}, {hi}{hib}, got {alpha}")


def rl_weights(alpha: float, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Product-trapezoid weights for the order-``alpha`` fractional integral.

    On a uniform grid the integral of (t_k - s)^(alpha-1)/Gamma(alpha) against
    the piecewise-linear reconstruction of v is

        (dt^alpha / Gamma(alpha+2)) * (c0[k] * v_0 + sum_{j=1..k} w[k-j] * v_j).

    Returns
    -------
    w : ndarray, shape (K+1,)
        Convolution part: w[0] = 1 and
        w[m] = (m+1)^(alpha+1) - 2 m^(alpha+1) + (m-1)^(alpha+1).
    c0 : ndarray, shape (K+1,)
        Boundary weight multiplying v_0; c0[k] = (k-1)^(alpha+1) - k^alpha (k-alpha-1).

    Both arrays are dimensionless; the caller applies the dt^alpha/Gamma(alpha+2)
    scale.  The rule is exact for piecewise-linear v.
    """
    a1 = alpha + 1.0
    m = np.arange(K + 1, dtype=float)
    w = np.empty(K + 1)
    w[0] = 1.0
    if K >= 1:
        w[1:] = (m[1:] + 1.0) ** a1 - 2.0 * m[1:] ** a1 + (m[1:] - 1.0) ** a1
    k = m
    c0 = np.empty(K + 1)
    c0[0] = 0.0
    c0[1:] = (k[1:] - 1.0) ** a1 - k[1:] ** alpha * (k[1:] - alpha - 1.0)
    return w, c0


def rl_integral(v: TimeSeries, alpha: float) -> TimeSeries:
    """Fractional integral of order ``alpha`` in (0, 2] by product integration.

    Node 0 maps to 0 (empty integration range).  Exact for piecewise-linear
    input, second-order accurate for smooth input.
    """
    _check_order(alpha, 0.0, 2.0)
    K = v.grid.K
    w, c0 = rl_weights(alpha, K)
    scale = v.grid.dt**alpha * _rgamma(alpha + 2.0)
    out = np.zeros(K + 1, dtype=v.values.dtype if v.is_complex else float)
    # sum_{j=1..k} w[k-j] v_j is a discrete convolution of w with v[1:]
    if K >= 1:
        conv = np.convolve(w[:K], v.values[1:])[:K]
        out[1:] = scale * (c0[1:] * v.values[0] + conv)
    return TimeSeries(v.grid, out)


def second_differences(v: TimeSeries) -> np.ndarray:
    """Second-difference samples of v on its grid.

    Central stencils at interior nodes, one-sided second-order stencils at the
    two grid ends (no ghost nodes).  Exact for quadratics, annihilates affine
    input exactly.
    """
    K = v.grid.K
    if K < 3:
        raise ValueError("second differences need at least 4 nodes (K >= 3)")
    y = v.values
    dt2 = v.grid.dt**2
    d2 = np.empty_like(y, dtype=complex if v.is_complex else float)
    d2[1:K] = (y[2:] - 2.0 * y[1:K] + y[: K - 1]) / dt2
    d2[0] = (2.0 * y[0] - 5.0 * y[1] + 4.0 * y[2] - y[3]) / dt2
    d2[K] = (2.0 * y[K] - 5.0 * y[K - 1] + 4.0 * y[K - 2] - y[K - 3]) / dt2
    return d2


def caputo_derivative(v: TimeSeries, alpha: float) -> TimeSeries:
    """Caputo derivative of order ``alpha`` in (1, 2).

    Product integration of the kernel (t-s)^(1-alpha)/Gamma(2-alpha) against
    second differences of v.  O(dt) consistent for smooth v with
    v(0) = v'(0) = 0; exactly zero for affine v.
    """
    _check_order(alpha, 1.0, 2.0, hi_open=True)
    d2 = second_differences(v)
    return rl_integral(TimeSeries(v.grid, d2), 2.0 - alpha)


# ---------------------------------------------------------------------------
# Mittag-Leffler function
# ---------------------------------------------------------------------------

_ML_SERIES_RADIUS = 10.0  # safe for alpha >= 1 (cancellation ~ e^10 * eps ~ 2e-12)
_ML_MAX_TERMS = 600
_ML_POLE_GUARD = 1e-6  # radians; pole this close to the branch cut is rejected


def _ml_series_radius(alpha: float) -> float:
    if alpha >= 1.0:
        return _ML_SERIES_RADIUS
    # cancellation grows like exp(|z|^(1/alpha)); keep it below ~1e-12
    return max(0.5, 9.2**alpha)


def _ml_term(k: int, logz: complex, x: float) -> complex:
    """k-th series term z^k / Gamma(alpha*k + beta) with x = alpha*k + beta."""
    if x <= 0.0 and abs(x - round(x)) < 1e-12:
        return 0.0  # 1/Gamma at a non-positive integer
    if x > 0.0:
        return cmath.exp(k * logz - _gammaln(x))
    return cmath.exp(k * logz) * _rgamma(x)


def _ml_series(alpha: float, beta: float, z: complex) -> complex:
    total = complex(_rgamma(beta))
    logz = cmath.log(z)
    hump = abs(z) ** (1.0 / alpha)
    small = 0
    for k in range(1, _ML_MAX_TERMS + 1):
        term = _ml_term(k, logz, alpha * k + beta)
        total += term
        if abs(term) <= 1e-17 * (1.0 + abs(total)):
            small += 1
            if small >= 2 and k >= hump:
                return total
        else:
            small = 0
    raise MittagLefflerError(
        f"series did not converge within {_ML_MAX_TERMS} terms for "
        f"alpha={alpha}, beta={beta}, |z|={abs(z):.3g}"
    )


def _ml_cut_integrand(r: float, alpha: float, beta: float, z: complex) -> complex:
    ra = r**alpha
    f = cmath.exp(1j * math.pi * (alpha - beta)) / (ra * cmath.exp(1j * math.pi * alpha) - z)
    g = cmath.exp(-1j * math.pi * (alpha - beta)) / (ra * cmath.exp(-1j * math.pi * alpha) - z)
    return math.exp(-r) * (f - g)


def _quad_complex(func, lo, hi, **kw) -> complex:
    re = quad(lambda r: func(r).real, lo, hi, **kw)[0]
    im = quad(lambda r: func(r).imag, lo, hi, **kw)[0]
    return re + 1j * im


def _ml_cut_integral(alpha: float, beta: float, z: complex) -> complex:
    """Branch-cut part of the inverse-transform representation of E_{alpha,beta}."""
    gam = alpha - beta  # endpoint exponent r^gam
    peak = abs(z) ** (1.0 / alpha)
    opts = dict(epsabs=1e-13, epsrel=1e-12, limit=200)

    def h(r: float) -> complex:
        return r**gam * _ml_cut_integrand(r, alpha, beta, z)

    total = 0.0 + 0.0j
    if gam < 0.0:
        # substitute r = u^(1/(1+gam)) to remove the integrable endpoint singularity
        q = 1.0 / (1.0 + gam)

        def h0(u: float) -> complex:
            return q * _ml_cut_integrand(u**q, alpha, beta, z)

        total += _quad_complex(h0, 0.0, 1.0, **opts)
    else:
        total += _quad_complex(h, 0.0, 1.0, **opts)

    body_hi = min(max(30.0, peak + 40.0), 120.0)
    pts = [peak] if 1.0 < peak < body_hi else None
    total += _quad_complex(h, 1.0, body_hi, points=pts, **opts)
    total += _quad_complex(h, body_hi, np.inf, **opts)
    return -total / (2j * math.pi)


def _ml_large(alpha: float, beta: float, z: complex) -> complex:
    """E_{alpha,beta}(z) for |z| beyond the series radius, 0 < alpha <= 2.

    Deforms the inverse-Laplace representation onto a Hankel loop around the
    negative real axis: the value is the sum of residues at the principal-branch
    roots of s^alpha = z plus a branch-cut integral.
    """
    if beta >= 1.0 + alpha:
        raise MittagLefflerError(
            f"large-argument evaluation supports beta < 1 + alpha, "
            f"got alpha={alpha}, beta={beta}"
        )
    theta = cmath.phase(z)
    rad = abs(z) ** (1.0 / alpha)
    if alpha == 1.0 and abs(abs(theta) - math.pi) < 0.1:
        # the sole pole sits on (or hugs) the integration ray; only the
        # closed forms are reliable there
        if beta == 1.0:
            return cmath.exp(z)
        if beta == 2.0:
            return (cmath.exp(z) - 1.0) / z
        raise MittagLefflerError(
            f"alpha=1 with z near the negative real axis supported only for "
            f"beta in {{1, 2}}, got beta={beta}"
        )
    poles = []
    for k in (-1, 0, 1):
        phi = (theta + 2.0 * math.pi * k) / alpha
        if abs(abs(phi) - math.pi) < _ML_POLE_GUARD:
            raise MittagLefflerError(
                f"root of s^alpha = z lies on the branch cut "
                f"(alpha={alpha}, arg z={theta:.6g}); regime boundary"
            )
        if abs(phi) < math.pi:
            poles.append(rad * cmath.exp(1j * phi))
    total = 0.0 + 0.0j
    for s in poles:
        total += s ** (1.0 - beta) * cmath.exp(s) / alpha
    total += _ml_cut_integral(alpha, beta, z)
    return total


def mittag_leffler(alpha: float, beta: float, z: complex) -> complex:
    """Two-parameter Mittag-Leffler function E_{alpha,beta}(z).

    Power series for |z| below a cancellation-safe radius (10 for alpha >= 1),
    otherwise a pole-plus-branch-cut evaluation of the inverse-Laplace
    representation, which stays accurate where the asymptotic power series
    alone cannot reach 1e-10 yet.  Absolute accuracy ~1e-10 for
    alpha in [1, 2], |z| <= 50, and well beyond for arguments away from the
    regime boundaries; unsupported regimes raise :class:`MittagLefflerError`
    rather than degrade silently.

    Parameters
    ----------
    alpha : positive order; large arguments require 0 < alpha <= 2.
    beta : real second parameter; large arguments require beta < 1 + alpha.
    z : complex argument.
    """
    if not (math.isfinite(alpha) and alpha > 0.0):
        raise ValueError(f"alpha must be positive and finite, got {alpha}")
    if not math.isfinite(beta):
        raise ValueError(f"beta must be finite, got {beta}")
    z = complex(z)
    if not cmath.isfinite(z):
        raise ValueError("z must be finite")
    if z == 0.0:
        return complex(_rgamma(beta))
    if abs(z) <= _ml_series_radius(alpha):
        return _ml_series(alpha, beta, z)
    if alpha > 2.0:
        raise MittagLefflerError(
            f"|z|={abs(z):.3g} exceeds the series radius and the "
            f"large-argument path requires alpha <= 2, got alpha={alpha}"
        )
    return _ml_large(alpha, beta, z)


def mittag_leffler_array(alpha: float, beta: float, zs) -> np.ndarray:
    """Vectorized :func:`mittag_leffler` over an array of arguments."""
    zs = np.asarray(zs, dtype=complex)
    out = np.empty(zs.shape, dtype=complex)
    flat = zs.ravel()
    res = out.ravel()
    for i, zv in enumerate(flat):
        res[i] = mittag_leffler(alpha, beta, zv)
    return out


# ---------------------------------------------------------------------------
# Numerical Laplace transform
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LaplaceValue:
    """Truncated Laplace transform sample with its truncation error bound."""

    value: complex
    truncation_bound: float


def laplace_numeric(v: TimeSeries, p: complex) -> LaplaceValue:
    """Trapezoid approximation of the transform integral over [0, T].

    The integral over (T, infinity) is dropped; its magnitude is bounded by
    exp(-Re(p) T) * sup|v| / Re(p) <= exp(-Re(p) T) * sup|v| for Re(p) >= 1,
    and the conservative bound exp(-Re(p) T) * sup|v| is reported so callers
    can judge whether the truncation matters.
    """
    p = complex(p)
    if not p.real > 0.0:
        raise ValueError(f"need Re(p) > 0 for a reliable truncated transform, got p={p}")
    t = v.grid.nodes
    f = np.exp(-p * t) * v.values
    value = complex(np.trapezoid(f, dx=v.grid.dt))
    sup = float(np.max(np.abs(v.values))) if len(v.values) else 0.0
    bound = math.exp(-p.real * v.grid.T) * sup
    return LaplaceValue(value, bound)


# ---------------------------------------------------------------------------
# CSV serialization
# ---------------------------------------------------------------------------


def write_timeseries_csv(ts: TimeSeries, path) -> None:
    """Two-column CSV (t, value); complex series get value_re/value_im columns."""
    t = ts.grid.nodes
    with open(path, "w", encoding="utf-8") as fh:
        if ts.is_complex:
            fh.write("t,value_re,value_im\n")
            for tk, vk in zip(t, ts.values):
                fh.write(f"{tk:.17g},{vk.real:.17g},{vk.imag:.17g}\n")
        else:
            fh.write("t,value\n")
            for tk, vk in zip(t, ts.values):
                fh.write(f"{tk:.17g},{vk:.17g}\n")


def read_timeseries_csv(path) -> TimeSeries:
    data = np.genfromtxt(path, delimiter=",", names=True)
    t = np.atleast_1d(data["t"])
    if t.size < 3:
        raise ValueError("time series CSV needs at least 3 rows")
    grid = TimeGrid(T=float(t[-1]), K=t.size - 1)
    if not np.allclose(grid.nodes, t, rtol=0, atol=1e-12 * max(1.0, t[-1])):
        raise ValueError("CSV nodes are not a uniform grid starting at 0")
    names = data.dtype.names
    if "value_re" in names:
        values = np.atleast_1d(data["value_re"]) + 1j * np.atleast_1d(data["value_im"])
    else:
        values = np.atleast_1d(data["value"])
    return TimeSeries(grid, values)
