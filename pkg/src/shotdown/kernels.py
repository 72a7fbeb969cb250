"""Estimators for the killed and shot-down heat kernels and Green functions.

Heat kernels
    ``p_hat_hunt`` / ``p_killed_hunt`` use the Hunt formula
    p - E[kill < t; p(t - kill, X_kill, y)] on simulated paths. In grid mode
    they estimate the kernel of the discretely monitored chain exactly: the
    chain kernel needs one extra term for paths that survive to the last
    grid time and then jump to y across D^c.

    ``bridge_kernels`` estimates the same chain kernels from stable bridges:
    conditionally on the subordinator increments the chain is a Gaussian
    random walk, so the bridge from x to y is a Brownian bridge in the
    subordinator clock, weighted by the Gaussian density of y - x. The
    estimator never evaluates the stable density and its variance stays
    bounded as t -> 0, which the Hunt correction does not.

Green functions
    Occupation-time estimators over the simulation skeleton.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .estimate import Estimate, ratio_estimate
from .parallel import map_chunks
from .rng import child_seed
from .sim import SimScheme, simulate_batch
from .stable import ball_volume, subordinator_logpdf


class KernelError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Hunt-formula estimators


def _hunt_samples(law, domain, t, x, ys, scheme, rng, n):
    """Per-path samples of the Hunt estimators for each target in ys.

    Returns arrays (n, len(ys)) for p_hat and p_D.
    """
    x = np.asarray(x, dtype=float)
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    sch = scheme.with_horizon(t)
    grid = sch.mode == "grid"
    h = sch.grid_steps()[1] if grid else 0.0
    b = simulate_batch(law, domain, x, sch, rng, n)
    # a kill strictly before t; on the grid that is at most t - h
    cut = t - h / 2 if grid else t
    ks = b.sigma < cut
    kt = b.tau < cut
    free = law.pdf(t, ys - x)
    out_hat = np.empty((n, len(ys)))
    out_kill = np.empty((n, len(ys)))
    for j, y in enumerate(ys):
        cs = np.zeros(n)
        ct = np.zeros(n)
        cs[ks] = law.pdf(t - b.sigma[ks], y - b.x_land[ks])
        ct[kt] = law.pdf(t - b.tau[kt], y - b.tau_land[kt])
        if grid:
            # last step of the chain: survivors at t - h jumping to y across D^c
            last_s = ~ks & np.isfinite(b.x_penult[:, 0])
            if last_s.any():
                xp = b.x_penult[last_s]
                blocked = ~domain.chord_in_domain(xp, np.broadcast_to(y, xp.shape))
                cs[last_s] += law.pdf(h, y - xp) * blocked
            if not domain.contains(y):
                last_t = ~kt & np.isfinite(b.x_penult[:, 0])
                ct[last_t] += law.pdf(h, y - b.x_penult[last_t])
        out_hat[:, j] = free[j] - cs
        out_kill[:, j] = free[j] - ct
    return out_hat, out_kill


def hunt_kernels(law, domain, t, x, ys, scheme, rng, n, chunk=50_000):
    """Coupled (p_hat, p_D) Hunt estimates for each y in ys, on the same paths."""
    if n <= 0:
        raise KernelError("budget n must be positive")
    seed = child_seed(rng)
    parts = map_chunks(lambda r, m: _hunt_samples(law, domain, t, x, ys, scheme, r, m), n, seed, chunk=chunk)
    hat = np.concatenate([p[0] for p in parts])
    kill = np.concatenate([p[1] for p in parts])
    note = f"hunt {scheme.mode} h={scheme.h:g}"
    return (
        [Estimate.from_samples(hat[:, j], note) for j in range(hat.shape[1])],
        [Estimate.from_samples(kill[:, j], note) for j in range(kill.shape[1])],
    )


def p_hat_hunt(law, domain, t, x, y, scheme, rng, n):
    return hunt_kernels(law, domain, t, x, [y], scheme, rng, n)[0][0]


def p_killed_hunt(law, domain, t, x, y, scheme, rng, n):
    return hunt_kernels(law, domain, t, x, [y], scheme, rng, n)[1][0]


# ---------------------------------------------------------------------------
# bridge estimator


@dataclass(frozen=True)
class BridgeResult:
    p_hat: Estimate
    p_killed: Estimate
    ratio: Estimate
    free: Estimate


BOOST_MIX = (0.5, 0.25, 0.25)


def _boosted_increments(law, hh, k, boost, rng):
    """Subordinator increments for paths with k[i] steps of length hh[i].

    Increments beyond a path's k[i] steps are zero. With probabilities
    BOOST_MIX a path has zero, one or two of its increments (at uniformly
    chosen distinct steps) drawn from S_boost instead of S_h; the returned
    likelihood ratio target / proposal is bounded by 1 / BOOST_MIX[0].
    """
    n = len(k)
    width = int(k.max())
    live = np.arange(width)[None, :] < k[:, None]
    ds = law.sample_subordinator(1.0, rng, (n, width)) * hh[:, None] ** (2 / law.alpha)
    ds[~live] = 0.0
    if boost is None:
        return ds, np.ones(n)
    lam = np.array(BOOST_MIX)
    comp = rng.choice(3, size=n, p=BOOST_MIX)
    comp = np.minimum(comp, k)
    keys = np.where(live, rng.random((n, width)), np.inf)
    order = np.argsort(keys, axis=1)
    for j in (1, 2):
        rows = np.flatnonzero(comp >= j)
        if len(rows):
            ds[rows, order[rows, j - 1]] = law.sample_subordinator(boost, rng, len(rows))
    with np.errstate(divide="ignore", invalid="ignore"):
        lr = subordinator_logpdf(law.alpha, boost, ds) - subordinator_logpdf(law.alpha, hh[:, None], ds)
    r = np.where(live, np.exp(lr), 0.0)
    s1 = r.sum(axis=1)
    s2 = (s1 * s1 - np.sum(r * r, axis=1)) / 2
    kf = k.astype(float)
    m1 = s1 / kf
    pairs = kf * (kf - 1) / 2
    m2 = np.where(k > 1, s2 / np.maximum(pairs, 1), 0.0)
    # a single-step path cannot carry two boosted increments
    lam1 = np.where(k > 1, lam[1], lam[1] + lam[2])
    lam2 = np.where(k > 1, lam[2], 0.0)
    return ds, 1.0 / (lam[0] + lam1 * m1 + lam2 * m2)


def auto_boost(law, x, y):
    """Boost time whose subordinator scale matches the squared distance |x-y|^2 / 8."""
    r2 = float(np.sum((np.asarray(y) - np.asarray(x)) ** 2))
    return (r2 / 8) ** (law.alpha / 2)


def _bridge_walk(law, domain, x, y, ds, k, rng):
    """Bridges from x (a point, or one start per path) to y given the subordinator increments.

    Conditionally on the increments the chain is a Gaussian walk with
    covariance 2 S I, so the bridge is a Brownian bridge in the S clock.
    Returns (Gaussian endpoint weight, alive for sigma, alive for tau).
    """
    n, d = len(k), law.d
    rem = np.cumsum(ds[:, ::-1], axis=1)[:, ::-1]
    total = rem[:, 0]
    pos = np.array(np.broadcast_to(x, (n, d)), dtype=float)
    r2 = np.sum((y - pos) ** 2, axis=1)
    w = (4 * math.pi * total) ** (-d / 2) * np.exp(-r2 / (4 * total))
    alive_s = np.ones(n, dtype=bool)
    alive_t = np.ones(n, dtype=bool)
    for j in range(ds.shape[1]):
        idx = np.flatnonzero(alive_t & (j < k))
        if len(idx) == 0:
            break
        p = pos[idx]
        last = j == k[idx] - 1
        frac = np.where(last, 1.0, ds[idx, j] / np.where(last, 1.0, rem[idx, j]))
        nxt = rem[idx, j + 1] if j + 1 < ds.shape[1] else np.zeros(len(idx))
        var = np.where(last, 0.0, 2 * ds[idx, j] * nxt / np.where(last, 1.0, rem[idx, j]))
        new = p + frac[:, None] * (y - p) + np.sqrt(var)[:, None] * rng.standard_normal(p.shape)
        new[last] = y
        s = alive_s[idx]
        if s.any():
            ok = domain.chord_in_domain(p[s], new[s])
            alive_s[idx[s][~ok]] = False
        inside = domain.contains(new)
        alive_t[idx[~inside]] = False
        pos[idx] = new
    return w, alive_s, alive_t


def _bridge_samples(law, domain, t, x, y, steps, rng, n, boost=None):
    k = np.full(n, steps)
    ds, lr = _boosted_increments(law, np.full(n, t / steps), k, boost, rng)
    w, alive_s, alive_t = _bridge_walk(law, domain, x, y, ds, k, rng)
    w = w * lr
    return w * alive_s, w * alive_t, w


def bridge_kernels(law, domain, t, x, y, steps, rng, n, boost=None, chunk=50_000):
    """Coupled bridge estimates of the grid-chain kernels p_hat and p_D.

    steps is the number of grid steps on [0, t]. boost (a time, or "auto")
    switches on importance sampling of one or two large subordinator
    increments, which is what paths around an obstacle need. Returns a
    BridgeResult whose ratio is p_hat / p_D with the delta-method
    standard error.
    """
    if n <= 0 or steps < 1:
        raise KernelError("need n > 0 and at least one step")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.array_equal(x, y):
        raise KernelError("bridge estimator needs x != y")
    if boost == "auto":
        boost = auto_boost(law, x, y)
    seed = child_seed(rng)
    parts = map_chunks(
        lambda r, m: _bridge_samples(law, domain, t, x, y, steps, r, m, boost), n, seed, chunk=chunk
    )
    hat = np.concatenate([p[0] for p in parts])
    kill = np.concatenate([p[1] for p in parts])
    free = np.concatenate([p[2] for p in parts])
    note = f"bridge steps={steps}" + (f" boost={boost:.4g}" if boost else "")
    if kill.sum() > 0:
        ratio = ratio_estimate(hat, kill, note)
    else:
        ratio = Estimate(math.nan, math.nan, n, note)
    return BridgeResult(
        Estimate.from_samples(hat, note),
        Estimate.from_samples(kill, note),
        ratio,
        Estimate.from_samples(free, note),
    )


def _ck_samples(law, domain, t, s, x, y, steps, boost, rng, n):
    h = t / steps
    m1 = int(round(s / h))
    pos = np.tile(x, (n, 1))
    alive_s = np.ones(n, dtype=bool)
    alive_t = np.ones(n, dtype=bool)
    for _ in range(m1):
        new = pos + law.sample_increment(h, rng, n)
        alive_s &= domain.chord_in_domain(pos, new)
        alive_t &= domain.contains(new)
        pos = new
    k = np.full(n, steps - m1)
    ds, lr = _boosted_increments(law, np.full(n, h), k, boost, rng)
    w, b_s, b_t = _bridge_walk(law, domain, pos, y, ds, k, rng)
    w = w * lr
    return w * (alive_s & b_s), w * (alive_t & b_t)


def chapman_kolmogorov(law, domain, t, s, x, y, steps, rng, n, boost="auto"):
    """The grid-chain kernels at t through an intermediate time s.

    Paths run forward as the exact chain up to s, then a bridge carries
    each one to y over the remaining steps. The product is an unbiased
    estimate of int p(s, x, z) p(t - s, z, y) dz for the same chain, which
    bridge_kernels estimates directly. Returns Estimates (p_hat, p_D).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    m1 = s * steps / t
    if not (0 < s < t and abs(m1 - round(m1)) < 1e-9 and 0 < round(m1) < steps):
        raise KernelError("s must be a grid time strictly between 0 and t")
    if boost == "auto":
        boost = auto_boost(law, x, y)
    seed = child_seed(rng)
    parts = map_chunks(lambda r, m: _ck_samples(law, domain, t, s, x, y, steps, boost, r, m), n, seed)
    note = f"forward {int(round(m1))} + bridge {steps - int(round(m1))} steps"
    hat = np.concatenate([p[0] for p in parts])
    kill = np.concatenate([p[1] for p in parts])
    return Estimate.from_samples(hat, note), Estimate.from_samples(kill, note)


# ---------------------------------------------------------------------------
# histograms


@dataclass(frozen=True)
class CellGrid:
    """Product grid of cells; edges is one increasing array per coordinate."""

    edges: tuple

    @classmethod
    def square(cls, lo, hi, m, d=2):
        e = np.linspace(lo, hi, m + 1)
        return cls(tuple(e for _ in range(d)))

    @property
    def shape(self):
        return tuple(len(e) - 1 for e in self.edges)

    @property
    def volumes(self):
        widths = [np.diff(e) for e in self.edges]
        return np.prod(np.meshgrid(*widths, indexing="ij"), axis=0)

    @property
    def centers(self):
        mids = [(e[1:] + e[:-1]) / 2 for e in self.edges]
        return np.stack(np.meshgrid(*mids, indexing="ij"), axis=-1)

    def counts(self, pts):
        if len(pts) == 0:
            return np.zeros(self.shape)
        return np.histogramdd(pts, bins=list(self.edges))[0]


def p_hat_histogram(law, domain, t, x, cells, scheme, rng, n, killed=False):
    """Landing histogram of paths alive at t, divided by cell volume.

    Returns (density array, stderr array, survival Estimate). With
    killed=True the tau-survivors are used instead (p_D).
    """
    if not isinstance(cells, CellGrid) or min(cells.shape) < 1:
        raise KernelError("empty cell grid")
    sch = scheme.with_horizon(t)
    seed = child_seed(rng)

    def run(r, m):
        b = simulate_batch(law, domain, np.asarray(x, float), sch, r, m)
        alive = ~np.isfinite(b.tau if killed else b.sigma)
        return cells.counts(b.x_final[alive]), alive

    parts = map_chunks(run, n, seed)
    counts = np.sum([p[0] for p in parts], axis=0)
    alive = np.concatenate([p[1] for p in parts])
    frac = counts / n
    vol = cells.volumes
    dens = frac / vol
    se = np.sqrt(frac * (1 - frac) / n) / vol
    return dens, se, Estimate.from_samples(alive)


# ---------------------------------------------------------------------------
# Green functions


@dataclass(frozen=True)
class GreenResult:
    g_hat: Estimate
    g_killed: Estimate
    lifetime: Estimate
    truncated: float


def _occupation(law, domain, x, y, rho, scheme, rng, n):
    occ_s = np.zeros(n)
    occ_t = np.zeros(n)
    life = np.zeros(n)

    def observer(idx, pts, dt, s_alive):
        near = np.sum((pts - y) ** 2, axis=1) < rho * rho
        occ_t[idx] += dt * near
        occ_s[idx] += dt * (near & s_alive)
        life[idx] += dt * s_alive

    b = simulate_batch(law, domain, x, scheme, rng, n, observer=observer)
    return occ_s, occ_t, life, ~np.isfinite(b.sigma)


def green(law, domain, x, y, rho, scheme, rng, n):
    """Occupation estimates of G_hat(x, y) and G_D(x, y) on the same paths.

    The density at y is smoothed over B(y, rho).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not law.d > law.alpha:
        raise KernelError("Green function estimates need d > alpha")
    dxy = float(np.linalg.norm(x - y))
    if dxy == 0:
        raise KernelError("x and y must differ")
    dy = domain.dist_to_complement(y)
    if not rho < min(dxy, dy) / 2:
        raise KernelError(f"smoothing radius {rho} violates rho < |x-y|/2 and rho < delta(y)/2")
    seed = child_seed(rng)
    parts = map_chunks(lambda r, m: _occupation(law, domain, x, y, rho, scheme, r, m), n, seed)
    vol = ball_volume(law.d, rho)
    occ_s, occ_t, life, surv = (np.concatenate([p[i] for p in parts]) for i in range(4))
    note = f"rho_G={rho:g} {scheme.mode} h={scheme.h:g} T={scheme.horizon:g}"
    truncated = float(surv.mean())
    lifetime = Estimate.from_samples(life, note)
    if truncated > 0 and truncated * scheme.horizon > 0.01 * lifetime.value:
        warnings.warn(f"horizon truncation: {truncated:.2%} of paths survive T={scheme.horizon:g}")
    return GreenResult(
        Estimate.from_samples(occ_s / vol, note),
        Estimate.from_samples(occ_t / vol, note),
        lifetime,
        truncated,
    )


def _green_bridge_samples(law, domain, x, y, h, t_range, max_steps, boost, rng, n):
    lo, hi = t_range
    span = math.log(hi / lo)
    t = lo * np.exp(span * rng.random(n))
    k = np.clip(np.ceil(t / h - 1e-9), 1, max_steps).astype(int)
    ds, lr = _boosted_increments(law, t / k, k, boost, rng)
    w, alive_s, alive_t = _bridge_walk(law, domain, x, y, ds, k, rng)
    # divide by the log-uniform density of t
    w = w * lr * t * span
    return w * alive_s, w * alive_t


def green_bridge(law, domain, x, y, h, t_range, rng, n, boost="auto", max_steps=512):
    """G_hat(x, y) and G_D(x, y) as the time integral of the bridge kernels.

    Each sample draws t log-uniformly on t_range and runs one bridge of
    ceil(t / h) steps (at most max_steps), so the estimate is the integral
    over t_range of the grid-chain kernels. The pinned endpoint removes the
    smoothing radius and the hitting problem of occupation estimates for
    distant or mutually invisible pairs. t_range should cover the bulk of
    the lifetime; the part below t_range[0] is O(t_range[0]^2).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not law.d > law.alpha:
        raise KernelError("Green function estimates need d > alpha")
    if np.array_equal(x, y):
        raise KernelError("x and y must differ")
    lo, hi = t_range
    if not 0 < lo < hi:
        raise KernelError("need 0 < t_min < t_max")
    if boost == "auto":
        boost = auto_boost(law, x, y)
    seed = child_seed(rng)
    parts = map_chunks(
        lambda r, m: _green_bridge_samples(law, domain, x, y, h, t_range, max_steps, boost, r, m),
        n, seed, chunk=8192,
    )
    note = f"bridge-time h={h:g} t=[{lo:g},{hi:g}] steps<={max_steps}"
    g_s = np.concatenate([p[0] for p in parts])
    g_t = np.concatenate([p[1] for p in parts])
    return Estimate.from_samples(g_s, note), Estimate.from_samples(g_t, note)


def green_hat(law, domain, x, y, rho, scheme, rng, n):
    return green(law, domain, x, y, rho, scheme, rng, n).g_hat


def occupation_partition(law, domain, x, scheme, rng, n, cells):
    """Integer occupation step counts of the shot-down paths per cell (grid mode).

    Returns (counts per cell, counts outside the grid, total steps
    alive, h). Summing the cells and the outside count reproduces the
    total alive time exactly.
    """
    if scheme.mode != "grid":
        raise KernelError("the exact partition identity needs the grid scheme")
    k, h = scheme.grid_steps()
    counts = np.zeros(cells.shape, dtype=np.int64)
    outside = np.zeros(1, dtype=np.int64)
    total = np.zeros(1, dtype=np.int64)

    def observer(idx, pts, dt, s_alive):
        p = pts[s_alive]
        c = cells.counts(p).astype(np.int64)
        counts[...] += c
        outside[0] += len(p) - int(c.sum())
        total[0] += len(p)

    b = simulate_batch(law, domain, np.asarray(x, float), scheme, rng, n, observer=observer)
    steps_alive = np.where(np.isfinite(b.sigma), np.round(b.sigma / h), k).astype(np.int64)
    return counts, int(outside[0]), int(total[0]), int(steps_alive.sum()), h


@dataclass(frozen=True)
class GreenRef:
    x: tuple
    y: tuple
    dx: float
    dy: float
    r: float
    value: float


def green_ref(domain, alpha, x, y):
    """delta_x^{a/2} delta_y^{a/2} r^{-a} |x-y|^{a-d} with r = dx v |x-y| v dy."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    d = len(x)
    dx = domain.dist_to_complement(x)
    dy = domain.dist_to_complement(y)
    dist = float(np.linalg.norm(x - y))
    r = max(dx, dist, dy)
    value = (dx * dy) ** (alpha / 2) * r ** (-alpha) * dist ** (alpha - d)
    return GreenRef(tuple(x), tuple(y), dx, dy, r, value)


def green_ratio(law, domain, pairs, scheme, rng, n, rho_frac=0.05):
    """[(pair, G_hat estimate, GreenRef, ratio)] for each (x, y) pair."""
    out = []
    for x, y in pairs:
        dxy = float(np.linalg.norm(np.subtract(x, y)))
        rho = rho_frac * dxy
        rho = min(rho, 0.45 * min(dxy, domain.dist_to_complement(y)))
        g = green_hat(law, domain, x, y, rho, scheme, rng, n)
        ref = green_ref(domain, law.alpha, x, y)
        out.append(((tuple(x), tuple(y)), g, ref, g.value / ref.value))
    return out


def horizon_for(law, domain, x, scheme, rng, n_pilot=2000, tail=1e-3, t0=None):
    """Smallest doubling of t0 with pilot survival P(sigma > T) < tail."""
    t = t0 or scheme.horizon
    for _ in range(20):
        b = simulate_batch(law, domain, np.asarray(x, float), scheme.with_horizon(t), rng, n_pilot, track_tau=False)
        if np.mean(np.isinf(b.sigma)) < tail:
            return t
        t *= 2
    raise KernelError("no horizon found with small survival")


# ---------------------------------------------------------------------------
# Riesz exit law of a ball


def riesz_constant(d, alpha):
    return math.gamma(d / 2) * math.pi ** (-d / 2 - 1) * math.sin(math.pi * alpha / 2)


def riesz_exit_density(alpha, r, x, z):
    """Density of X_{tau_B} at z for B = B(0, r) and start x."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    d = x.shape[-1]
    nx = np.sum(x * x, axis=-1)
    nz = np.sum(z * z, axis=-1)
    if np.any(nx >= r * r) or np.any(nz <= r * r):
        raise KernelError("need |x| < r < |z|")
    dist = np.linalg.norm(z - x, axis=-1)
    return (
        riesz_constant(d, alpha)
        * (r * r - nx) ** (alpha / 2)
        * (nz - r * r) ** (-alpha / 2)
        * dist ** (-d)
    )


def riesz_radial_cdf(alpha, r, rad):
    """P(|X_{tau_B}| <= rad) for a start at the center: r^2/|X|^2 ~ Beta(a/2, 1-a/2)."""
    u = (r / np.asarray(rad, float)) ** 2
    return special.betaincc(alpha / 2, 1 - alpha / 2, u)


def riesz_total_mass(alpha, r, x, tol=1e-11):
    """Integral of the exit density over |z| > r in d = 2, by nested quadrature.

    With |z| = r / sqrt(u) the radial singularity becomes the algebraic
    weight (1-u)^{-alpha/2}, handled by quad's 'alg' rule.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (2,):
        raise KernelError("quadrature implemented for d = 2")
    c = riesz_constant(2, alpha) * (r * r - x @ x) ** (alpha / 2)

    def radial(theta):
        e = np.array([math.cos(theta), math.sin(theta)])

        def f(u):
            rad = r / math.sqrt(u)
            z = rad * e
            # |z|^2 - r^2 = r^2 (1-u)/u; dR R = r^2 / (2 u^2) du
            rest = (r * r / u) ** (-alpha / 2) / np.sum((z - x) ** 2)
            return rest * r * r / (2 * u * u)

        val, _ = integrate.quad(f, 0, 1, weight="alg", wvar=(0, -alpha / 2), epsabs=tol, epsrel=tol, limit=200)
        return val

    val, err = integrate.quad(radial, 0, 2 * math.pi, epsabs=tol, epsrel=tol, limit=200)
    return c * val, err


# ---------------------------------------------------------------------------
# harmonic measure with the chord condition


@dataclass(frozen=True)
class BoxTarget:
    """Axis-parallel box target set in R^d."""

    lo: tuple
    hi: tuple

    @property
    def volume(self):
        return float(np.prod(np.subtract(self.hi, self.lo)))

    def contains(self, z):
        z = np.asarray(z)
        return np.all((z > np.asarray(self.lo)) & (z < np.asarray(self.hi)), axis=-1)

    def sample(self, rng, n):
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return lo + (hi - lo) * rng.random((n, len(lo)))


def _harmonic_levy(law, ball_domain, domain, x0, target, scheme, rng, n, m_target):
    acc = np.zeros(n)

    def observer(idx, pts, dt, s_alive):
        for _ in range(m_target):
            z = target.sample(rng, len(pts))
            ok = domain.chord_in_domain(pts, z)
            acc[idx] += dt * law.levy_density(z - pts) * ok / m_target

    simulate_batch(law, ball_domain, x0, scheme, rng, n, observer=observer, track_tau=False)
    return acc


def _harmonic_direct(law, ball_domain, domain, x0, target, scheme, rng, n):
    b = simulate_batch(law, ball_domain, x0, scheme, rng, n, track_tau=False)
    out = np.zeros(n)
    done = np.isfinite(b.sigma)
    hit = done & target.contains(np.where(done[:, None], b.x_land, np.inf))
    if hit.any():
        hit[hit] = domain.chord_in_domain(b.x_pre[hit], b.x_land[hit])
    out[hit] = 1.0 / target.volume
    return out


def harmonic_measure_shotdown(law, ball_domain, domain, x0, target, scheme, rng, n,
                              method="levy-system", m_target=4):
    """E_x[f(X_{tau_B}); [X_{tau_B-}, X_{tau_B}] in D] with f = 1_target / |target|.

    method="direct" reads the exit pair off simulated paths;
    method="levy-system" integrates the jump intensity into the target over
    the occupation of B, E_x int_0^{tau_B} (1/|A|) int_A nu(z - X_s)
    1{[X_s, z] in D} dz ds, with the inner integral sampled at m_target
    uniform points of A per skeleton step. The target must lie outside B.
    """
    x0 = np.asarray(x0, dtype=float)
    b = ball_domain.bound()
    if not ball_domain.convex or b is None:
        raise KernelError("B must be a ball")
    c, r = b
    if domain.dist_to_complement(c) < r:
        raise KernelError("B must be contained in D")
    seed = child_seed(rng)
    if method == "levy-system":
        fn = lambda rr, m: _harmonic_levy(law, ball_domain, domain, x0, target, scheme, rr, m, m_target)
    elif method == "direct":
        fn = lambda rr, m: _harmonic_direct(law, ball_domain, domain, x0, target, scheme, rr, m)
    else:
        raise KernelError(f"unknown method {method!r}")
    vals = np.concatenate(map_chunks(fn, n, seed))
    return Estimate.from_samples(vals, f"{method} {scheme.mode} h={scheme.h:g}")


def harnack7_target(eps):
    """Target strip behind the pinch between the two removed balls.

    Chords from B to the strip [5.5, 6.5] x (-eps/5, 0) must pass between
    the top of B' at (2.5, 0) and the bottom of B'' at (5, 0), so the points
    of B that see the target form a wedge of width of order eps above the
    x-axis.
    """
    return BoxTarget((5.5, -eps / 5), (6.5, 0.0))
