"""Isotropic alpha-stable laws: Levy density, sampling and transition density."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline


class StableError(ValueError):
    pass


def sphere_area(d):
    """Surface area of the unit sphere in R^d (omega_{d-1})."""
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


def ball_volume(d, r=1.0):
    return sphere_area(d) / d * r**d


def levy_constant(d, alpha):
    return 2**alpha * math.gamma((d + alpha) / 2) * math.pi ** (-d / 2) / abs(math.gamma(-alpha / 2))


@dataclass(frozen=True)
class StableLaw:
    d: int
    alpha: float

    def __post_init__(self):
        if not 0 < self.alpha < 2:
            raise StableError(f"alpha outside (0,2): {self.alpha}")
        if self.d < 1:
            raise StableError(f"dimension must be positive: {self.d}")

    @property
    def A(self):
        return levy_constant(self.d, self.alpha)

    # ---- Levy measure -------------------------------------------------

    def levy_density(self, z):
        """nu(z) = A |z|^{-d-alpha}; z has shape (..., d)."""
        r = np.linalg.norm(np.asarray(z, dtype=float), axis=-1)
        if np.any(r == 0):
            raise StableError("Levy density is singular at z = 0")
        return self.A * r ** (-self.d - self.alpha)

    def radial_tail(self, a, b=np.inf):
        """Integral of A r^{-1-alpha} over (a, b): nu-mass per unit solid angle."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        with np.errstate(divide="ignore"):
            fa = np.where(a > 0, a ** -self.alpha, np.inf)
            fb = np.where(np.isinf(b), 0.0, np.abs(b) ** -self.alpha)
        return self.A / self.alpha * (fa - fb)

    def big_jump_rate(self, eps):
        if np.any(np.asarray(eps) <= 0):
            raise StableError("big-jump cutoff must be positive")
        return self.A * sphere_area(self.d) * eps ** -self.alpha / self.alpha

    def small_jump_variance(self, eps):
        """Per-coordinate variance rate of the jumps smaller than eps."""
        return self.A * sphere_area(self.d) * eps ** (2 - self.alpha) / ((2 - self.alpha) * self.d)

    # ---- sampling -----------------------------------------------------

    def sample_subordinator(self, t, rng, size):
        """S_t with E exp(-lam S_t) = exp(-t lam^{alpha/2}) (Chambers-Mallows-Stuck)."""
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise StableError("time must be positive")
        b = self.alpha / 2
        u = rng.uniform(0.0, math.pi, size)
        e = rng.standard_exponential(size)
        s = np.sin(b * u) / np.sin(u) ** (1 / b) * (np.sin((1 - b) * u) / e) ** ((1 - b) / b)
        return t ** (1 / b) * s

    def sample_increment(self, t, rng, size=None):
        """Draws of X_t as sqrt(2 S_t) times a standard Gaussian vector."""
        n = 1 if size is None else size
        s = self.sample_subordinator(t, rng, n)
        g = rng.standard_normal((n, self.d))
        x = np.sqrt(2 * s)[:, None] * g
        return x[0] if size is None else x

    def sample_directions(self, rng, n):
        g = rng.standard_normal((n, self.d))
        return g / np.linalg.norm(g, axis=1, keepdims=True)

    def sample_big_jump(self, eps, rng, size=None):
        """(waiting time, jump) pairs for the jumps longer than eps."""
        rate = self.big_jump_rate(eps)
        n = 1 if size is None else size
        eps = np.asarray(eps, dtype=float)
        wait = rng.standard_exponential(n) / rate
        r = eps * rng.random(n) ** (-1 / self.alpha)
        jump = r[:, None] * self.sample_directions(rng, n)
        return (wait[0], jump[0]) if size is None else (wait, jump)

    # ---- densities ----------------------------------------------------

    def pdf(self, t, x):
        """Vectorized p_t(x) for x of shape (..., d), via a cached radial table."""
        t = np.asarray(t, dtype=float)
        rho = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
        if self.alpha == 1:
            return cauchy_density(self.d, t, rho)
        scale = t ** (1 / self.alpha)
        return radial_table(self.d, self.alpha)(rho / scale) / scale**self.d

    def envelope(self, t, x):
        """t^{-d/alpha} min t |x|^{-d-alpha}."""
        rho = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
        with np.errstate(divide="ignore"):
            return np.minimum(t ** (-self.d / self.alpha), t * rho ** (-self.d - self.alpha))


def cauchy_constant(d):
    return math.gamma((d + 1) / 2) / math.pi ** ((d + 1) / 2)


def cauchy_density(d, t, rho):
    return cauchy_constant(d) * t / (t * t + np.asarray(rho) ** 2) ** ((d + 1) / 2)


# ---------------------------------------------------------------------------
# Fourier inversion


@dataclass(frozen=True)
class DensityEval:
    value: float
    method: str
    abs_error_bound: float


def _radial_kernel(d, s):
    """Gamma(d/2) (2/s)^{d/2-1} J_{d/2-1}(s), the sphere average of exp(i s e1.w)."""
    if d == 1:
        return np.cos(s)
    if d == 3:
        return np.sinc(s / math.pi)
    nu = d / 2 - 1
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = math.gamma(d / 2) * (2 / s) ** nu * special.jv(nu, s)
    return np.where(s == 0, 1.0, out)


def _kernel_zeros(d, n):
    if d == 1:
        return (np.arange(n) + 0.5) * math.pi
    if d == 3:
        return (np.arange(n) + 1.0) * math.pi
    return special.jn_zeros(d / 2 - 1, n) if d == 2 else special.jn_zeros(int(d / 2 - 1), n)


_GL = {k: np.polynomial.legendre.leggauss(k) for k in (12, 24, 48)}


def _panel_integral(f, edges, k):
    x, w = _GL[k]
    a, b = edges[:-1, None], edges[1:, None]
    nodes = (a + b) / 2 + (b - a) / 2 * x
    return np.sum((b - a) / 2 * w * f(nodes))


def fourier_density_1(d, alpha, rho, target=1e-10):
    """p_1 at radius rho by radial Fourier inversion.

    Returns (value, error bound). The truncation radius R is chosen so the
    analytic tail bound is at most target/2; the integral over (0, R] runs
    over panels that are graded near 0 and split at the kernel zeros.
    """
    const = sphere_area(d) / (2 * math.pi) ** d
    a = d / alpha
    # tail: const * int_R^inf e^{-r^alpha} r^{d-1} dr = const/alpha Gamma(a) Q(a, R^alpha)
    q = min(target / 2 / (const / alpha * math.gamma(a)), 0.5)
    big_r = special.gammainccinv(a, q) ** (1 / alpha)
    tail = const / alpha * math.gamma(a) * special.gammaincc(a, big_r**alpha)
    edges = list(np.geomspace(1e-10 * big_r, big_r, 90))
    if rho > 0:
        n_zeros = int(rho * big_r / math.pi) + 2
        zeros = _kernel_zeros(d, n_zeros) / rho
        edges += list(zeros[zeros < big_r])
    edges = np.unique(np.concatenate([[0.0], edges, [big_r]]))

    def f(r):
        return np.exp(-(r**alpha)) * _radial_kernel(d, r * rho) * r ** (d - 1)

    coarse = _panel_integral(f, edges, 24)
    fine = _panel_integral(f, edges, 48)
    err = abs(fine - coarse) * const + tail + 1e-16 * abs(fine * const)
    return const * fine, err


def series_density_1(d, alpha, rho, terms=400):
    """Large-|x| expansion sum_k (-1)^{k+1}/k! 2^{k alpha} Gamma((d+k alpha)/2)
    Gamma(1+k alpha/2) sin(pi k alpha/2) / pi^{d/2+1} |x|^{-d-k alpha}.

    Convergent for alpha < 1, asymptotic otherwise. Returns (value, size of
    the last retained term + cancellation estimate)."""
    k = np.arange(1, terms + 1)
    logmag = (
        -special.gammaln(k + 1)
        + k * alpha * math.log(2)
        + special.gammaln((d + k * alpha) / 2)
        + special.gammaln(1 + k * alpha / 2)
        - (d / 2 + 1) * math.log(math.pi)
        - (d + k * alpha) * math.log(rho)
    )
    sign = (-1.0) ** (k + 1) * np.sin(math.pi * k * alpha / 2)
    with np.errstate(over="ignore"):
        mags = np.exp(logmag)
    if alpha >= 1:
        # stop at the smallest term of the asymptotic series
        stop = int(np.argmin(mags)) + 1
        mags, sign = mags[:stop], sign[:stop]
    total = float(np.sum(sign * mags))
    err = float(mags[-1] + 1e-16 * np.max(mags) * len(mags))
    return total, err


def density(law, t, x, target_abs_error=1e-10):
    """p_t(x) with a certified error bound."""
    if not t > 0:
        raise StableError("time must be positive")
    x = np.asarray(x, dtype=float)
    if x.shape != (law.d,):
        raise StableError(f"point must have shape ({law.d},)")
    rho = float(np.linalg.norm(x))
    if law.alpha == 1:
        return DensityEval(float(cauchy_density(law.d, t, rho)), "closed-form-cauchy", 0.0)
    value, err = fourier_inversion(law, t, rho, target_abs_error)
    if err > target_abs_error:
        raise StableError(f"quadrature reached error {err:.3e} > target {target_abs_error:.3e}")
    return DensityEval(max(value, 0.0), "fourier-inversion", err)


def fourier_inversion(law, t, rho, target_abs_error=1e-10):
    """p_t at radius rho by inversion, whatever alpha is (used to cross-check alpha=1)."""
    scale = t ** (1 / law.alpha)
    jac = scale ** -law.d
    value, err = fourier_density_1(law.d, law.alpha, rho / scale, target_abs_error / jac)
    return value * jac, err * jac


# ---------------------------------------------------------------------------
# tabulated p_1 for Monte Carlo use

RHO_MIN = 1e-4
RHO_MAX = 40.0


class RadialTable:
    """p_1(rho) interpolated in (log rho, log p), series beyond RHO_MAX."""

    def __init__(self, d, alpha, n=700):
        self.d, self.alpha = d, alpha
        grid = np.geomspace(RHO_MIN, RHO_MAX, n)
        vals = np.array([_p1(d, alpha, r) for r in grid])
        self.p0 = _p1(d, alpha, 0.0)
        self.spline = CubicSpline(np.log(grid), np.log(vals))
        # tail: a few series terms, exact to double precision beyond RHO_MAX
        k = np.arange(1, 31)
        self.tail_pow = d + k * alpha
        self.tail_coef = (
            (-1.0) ** (k + 1)
            * np.sin(math.pi * k * alpha / 2)
            * np.exp(
                -special.gammaln(k + 1)
                + k * alpha * math.log(2)
                + special.gammaln((d + k * alpha) / 2)
                + special.gammaln(1 + k * alpha / 2)
                - (d / 2 + 1) * math.log(math.pi)
            )
        )

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        out = np.empty_like(rho)
        small = rho < RHO_MIN
        big = rho > RHO_MAX
        mid = ~(small | big)
        out[small] = self.p0
        out[mid] = np.exp(self.spline(np.log(rho[mid])))
        if big.any():
            rb = rho[big][..., None]
            out[big] = np.sum(self.tail_coef * rb ** -self.tail_pow, axis=-1)
        return out


def _p1(d, alpha, rho):
    if alpha < 1 and rho >= 1.0:
        return series_density_1(d, alpha, rho)[0]
    if rho > RHO_MAX / 2:
        return series_density_1(d, alpha, rho)[0]
    return fourier_density_1(d, alpha, rho, 1e-13)[0]


@lru_cache(maxsize=None)
def radial_table(d, alpha):
    return RadialTable(d, alpha)


# ---------------------------------------------------------------------------
# density of the subordinator


def _kanter_a(beta, u):
    return (
        np.sin(beta * u) ** (beta / (1 - beta))
        * np.sin((1 - beta) * u)
        / np.sin(u) ** (1 / (1 - beta))
    )


def positive_stable_logpdf_direct(beta, x, nodes=400):
    """log density of S with E exp(-lam S) = exp(-lam^beta), from Kanter's
    representation f(x) = (1/pi) int_0^pi a(u) g x^{-g-1} exp(-a(u) x^{-g}) du,
    g = beta / (1 - beta)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    g = beta / (1 - beta)
    u, w = np.polynomial.legendre.leggauss(nodes)
    u = math.pi * (u + 1) / 2
    w = w * math.pi / 2
    a = _kanter_a(beta, u)
    xg = x[:, None] ** -g
    logs = np.log(a * w) - a * xg
    top = logs.max(axis=1, keepdims=True)
    lse = top[:, 0] + np.log(np.sum(np.exp(logs - top), axis=1))
    return lse + math.log(g / math.pi) - (g + 1) * np.log(x)


class SubordinatorTable:
    """log f_1 of the (alpha/2)-stable subordinator on a log grid.

    Beyond the grid the right tail uses the series
    f(x) ~ sum_k (-1)^{k+1} Gamma(k beta + 1) sin(pi k beta) / (pi k!) x^{-k beta - 1}
    and the left tail is treated as zero.
    """

    def __init__(self, beta, n=1500):
        self.beta = beta
        g = beta / (1 - beta)
        a_min = float(_kanter_a(beta, np.array([1e-9]))[0])
        self.lo = math.log((a_min / 700) ** (1 / g))
        self.hi = math.log(1e6)
        grid = np.linspace(self.lo, self.hi, n)
        vals = positive_stable_logpdf_direct(beta, np.exp(grid), nodes=800)
        self.spline = CubicSpline(grid, vals)
        k = np.arange(1, 6)
        self.tail_coef = (-1.0) ** (k + 1) * special.gamma(k * beta + 1) * np.sin(math.pi * k * beta) / (
            math.pi * special.factorial(k))
        self.tail_pow = k * beta + 1

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            lx = np.log(x)
        out = np.full(x.shape, -np.inf)
        mid = (lx >= self.lo) & (lx <= self.hi)
        out[mid] = self.spline(lx[mid])
        big = lx > self.hi
        if big.any():
            xb = x[big][..., None]
            out[big] = np.log(np.sum(self.tail_coef * xb ** -self.tail_pow, axis=-1))
        return out


@lru_cache(maxsize=None)
def subordinator_table(beta):
    return SubordinatorTable(beta)


def subordinator_logpdf(alpha, t, s):
    """log density of S_t (Laplace transform exp(-t lam^{alpha/2})) at s."""
    beta = alpha / 2
    s = np.asarray(s, dtype=float)
    if alpha == 1:
        with np.errstate(divide="ignore"):
            return np.log(t / (2 * math.sqrt(math.pi))) - 1.5 * np.log(s) - t * t / (4 * s)
    scale = np.asarray(t, dtype=float) ** (1 / beta)
    return subordinator_table(beta)(s / scale) - np.log(scale)
