"""Killing intensity kappa_D, shooting-down intensity iota_D and their difference.

Both are nu-masses seen from x in polar coordinates:

    kappa(x) = int_sphere sum over D^c intervals (a, b) of (A/alpha)(a^-alpha - b^-alpha) dw
    iota(x)  = int_sphere (A/alpha) r*(w)^-alpha dw

where r*(w) is the first radius at which the ray from x leaves D; the ray
is visible exactly on [0, r*). The radial parts are exact, so only the
direction integral is numerical. In d = 2 the circle is split at the
directions tangent to ball leaves (where r* jumps) and each panel uses
Gauss-Legendre nodes after a smoothstep substitution that absorbs the
square-root behaviour at tangency; the node count doubles until the
relative change is below target.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Ball, HalfSpace, merge_intervals


class IntensityError(ValueError):
    pass


def ray_intensities(law, domain, x, omegas):
    """Per-direction radial integrals (kappa density, iota density) at x."""
    p = np.broadcast_to(np.asarray(x, float), omegas.shape)
    lo, hi = domain.complement_intervals(p, omegas)
    # only the forward half of each line matters; x itself is in D
    keep = hi > 0
    lo = np.where(keep, np.maximum(lo, 0.0), np.inf)
    hi = np.where(keep, hi, -np.inf)
    lo, hi = merge_intervals(lo, hi)
    full = lo <= hi
    c = law.A / law.alpha
    with np.errstate(divide="ignore", invalid="ignore"):
        a_term = np.where(full, lo ** -law.alpha, 0.0)
        b_term = np.where(full & np.isfinite(hi), hi ** -law.alpha, 0.0)
    kap = c * np.sum(a_term - b_term, axis=1)
    first = lo.min(axis=1)
    with np.errstate(divide="ignore"):
        iot = np.where(np.isfinite(first), c * first ** -law.alpha, 0.0)
    return kap, iot


@functools.lru_cache(maxsize=None)
def _gauss(m):
    return np.polynomial.legendre.leggauss(m)


def _smoothstep_nodes(a, b, m):
    u, w = _gauss(m)
    u = (u + 1) / 2
    w = w / 2
    s = u * u * (3 - 2 * u)
    ds = 6 * u * (1 - u)
    return a + (b - a) * s, (b - a) * ds * w


def circle_breaks(leaves, x):
    """Panel edges on [0, 2 pi] at directions where rays from x graze a leaf."""
    breaks = [0.0, 2 * math.pi]
    for leaf in leaves:
        if isinstance(leaf, Ball):
            v = np.asarray(leaf.center) - x
            dist = float(np.linalg.norm(v))
            if dist > leaf.radius:
                phi = math.atan2(v[1], v[0])
                half = math.asin(leaf.radius / dist)
                breaks += [phi - half, phi + half, phi]
            elif dist > 0:
                # inside the ball near its edge: r*(w) ~ gap / cos near the
                # nearest boundary point and turns over within an angle
                # ~ sqrt(gap / R) of the two tangent directions
                phi = math.atan2(-v[1], -v[0])
                gap = leaf.radius - dist
                width = math.sqrt(gap / leaf.radius)
                breaks.append(phi)
                for side in (phi - math.pi / 2, phi + math.pi / 2):
                    breaks.append(side)
                    w = width
                    while w < 0.5:
                        breaks += [side - w, side + w]
                        w *= 4
        elif isinstance(leaf, HalfSpace):
            nrm = leaf.normal
            phi = math.atan2(nrm[1], nrm[0])
            breaks += [phi + math.pi / 2, phi - math.pi / 2]
    br = np.unique(np.mod(breaks, 2 * math.pi))
    br = np.concatenate([br, [2 * math.pi]]) if br[-1] < 2 * math.pi else br
    if br[0] > 0:
        br = np.concatenate([[0.0], br])
    # drop slivers that would only add round-off
    keep = np.concatenate([[True], np.diff(br) > 1e-14])
    return br[keep]


def circle_rule(breaks, m):
    """Unit directions and weights: m smoothstep Gauss nodes per panel."""
    th, w = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        t, ww = _smoothstep_nodes(a, b, m)
        th.append(t)
        w.append(ww)
    th = np.concatenate(th)
    return np.stack([np.cos(th), np.sin(th)], axis=1), np.concatenate(w)


def _quad_circle(law, domain, x, m):
    om, w = circle_rule(circle_breaks(domain.shape.leaves(), x), m)
    kap, iot = ray_intensities(law, domain, x, om)
    return float(w @ kap), float(w @ iot)


def _quad_sphere(law, domain, x, m):
    # product rule: Gauss-Legendre in cos(polar angle), trapezoid in azimuth
    u, wu = np.polynomial.legendre.leggauss(m)
    k = 2 * m
    ph = 2 * math.pi * np.arange(k) / k
    cu, ph = np.meshgrid(u, ph, indexing="ij")
    su = np.sqrt(1 - cu**2)
    om = np.stack([su * np.cos(ph), su * np.sin(ph), cu], axis=-1).reshape(-1, 3)
    w = (wu[:, None] * np.full(k, 2 * math.pi / k)[None, :]).ravel()
    kap, iot = ray_intensities(law, domain, x, om)
    return float(w @ kap), float(w @ iot)


def _quad_line(law, domain, x):
    om = np.array([[1.0], [-1.0]])
    kap, iot = ray_intensities(law, domain, x, om)
    return float(kap.sum()), float(iot.sum())


@dataclass(frozen=True)
class IntensityValue:
    kappa: float
    iota: float
    kappa_err: float
    iota_err: float


def intensities(law, domain, x, target_rel_error=1e-8, m0=8, max_doublings=12):
    """(kappa, iota) at x with error estimates from successive doubling."""
    x = np.asarray(x, dtype=float)
    if not domain.contains(x):
        raise IntensityError("x must lie in D")
    d = domain.d
    if d == 1:
        k, i = _quad_line(law, domain, x)
        return IntensityValue(k, i, 0.0, 0.0)
    if d > 3:
        raise IntensityError("intensity quadrature supports d <= 3")
    rule = _quad_circle if d == 2 else _quad_sphere
    m = m0
    prev = rule(law, domain, x, m)
    for _ in range(max_doublings):
        m *= 2
        cur = rule(law, domain, x, m)
        ek, ei = abs(cur[0] - prev[0]), abs(cur[1] - prev[1])
        if ek <= target_rel_error * abs(cur[0]) and ei <= target_rel_error * abs(cur[1]):
            return IntensityValue(cur[0], cur[1], ek, ei)
        prev = cur
    raise IntensityError(f"quadrature did not reach {target_rel_error:g} (errors {ek:.2e}, {ei:.2e})")


def kappa(law, domain, x, target_rel_error=1e-8):
    return intensities(law, domain, x, target_rel_error).kappa


def iota(law, domain, x, target_rel_error=1e-8):
    return intensities(law, domain, x, target_rel_error).iota


@dataclass
class IntensityProfile:
    alpha: float
    domain_tag: str
    delta: np.ndarray
    points: np.ndarray
    kappa: np.ndarray
    iota: np.ndarray
    diff: np.ndarray
    diff_err: np.ndarray
    slope: float = math.nan
    rows: list = field(default_factory=list)

    def fit_slope(self, tail=None):
        """Least-squares slope of log(diff) against log(delta) over the last `tail` points."""
        sl = slice(-tail, None) if tail else slice(None)
        ok = self.diff[sl] > 0
        if ok.sum() < 2:
            return math.nan
        x = np.log(self.delta[sl][ok])
        y = np.log(self.diff[sl][ok])
        return float(np.polyfit(x, y, 1)[0])


def difference_profile(law, domain, boundary_point, normal, deltas, target_rel_error=1e-9):
    """kappa, iota and iota - kappa at boundary_point + delta * normal."""
    b = np.asarray(boundary_point, float)
    nrm = np.asarray(normal, float)
    nrm = nrm / np.linalg.norm(nrm)
    deltas = np.asarray(deltas, float)
    pts = b + deltas[:, None] * nrm
    if not np.all(domain.contains(pts)):
        raise IntensityError("a sweep point leaves D")
    vals = [intensities(law, domain, p, target_rel_error) for p in pts]
    k = np.array([v.kappa for v in vals])
    i = np.array([v.iota for v in vals])
    err = np.array([v.kappa_err + v.iota_err for v in vals])
    prof = IntensityProfile(law.alpha, domain.name, deltas, pts, k, i, i - k, err)
    prof.slope = prof.fit_slope()
    return prof


def iota_monte_carlo(law, domain, x, eps, rng, n):
    """iota(x) by sampling jumps longer than eps and counting invisible landings.

    Valid when eps < delta_D(x), so that every shorter jump is visible.
    Returns an Estimate.
    """
    from .estimate import Estimate

    x = np.asarray(x, float)
    if not eps < domain.dist_to_complement(x):
        raise IntensityError("need eps < delta_D(x)")
    _, z = law.sample_big_jump(eps, rng, n)
    blocked = ~domain.chord_in_domain(np.broadcast_to(x, z.shape), x + z)
    return Estimate.from_samples(blocked * law.big_jump_rate(eps), note=f"eps={eps:g}")


def nu_mass_ball(law, x, center, radius):
    """nu(B(center, radius) - x) for points x outside the closed ball.

    In d = 2 the rays through the ball fill an angle 2 asin(r/|c-x|) and
    the radial part is exact; in d = 1 the ball is an interval.
    """
    x = np.atleast_2d(np.asarray(x, float))
    c = np.asarray(center, float)
    v = c - x
    dist = np.linalg.norm(v, axis=1)
    if np.any(dist <= radius):
        raise IntensityError("x must lie outside the ball")
    if law.d == 1:
        return law.A / law.alpha * ((dist - radius) ** -law.alpha - (dist + radius) ** -law.alpha)
    if law.d != 2:
        raise IntensityError("nu_mass_ball supports d <= 2")
    u, w = _gauss(64)
    half = np.arcsin(radius / dist)
    # phi = half sin(pi u / 2) turns the square-root ends of the chord length into smooth ones
    t = math.pi / 2 * u
    phi = half[:, None] * np.sin(t)[None, :]
    jac = half[:, None] * math.pi / 2 * np.cos(t)[None, :]
    s = np.sqrt(np.maximum(radius**2 - (dist[:, None] * np.sin(phi)) ** 2, 0.0))
    r0 = dist[:, None] * np.cos(phi) - s
    r1 = dist[:, None] * np.cos(phi) + s
    f = law.A / law.alpha * (r0 ** -law.alpha - r1 ** -law.alpha) * jac
    return np.sum(f * w[None, :], axis=1)
