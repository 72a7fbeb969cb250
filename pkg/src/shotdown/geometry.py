"""Open domains built from balls and half-spaces, and the chord queries
the shot-down process needs.

Every set operation is evaluated along lines: for a segment or ray
``P + lam * V`` each shape reports the closed parameter intervals on which
the line lies in its complement (or its closure). Intervals are stored as
padded ``(N, K)`` arrays ``lo``/``hi`` where an empty slot has
``lo = +inf, hi = -inf``. This keeps all predicates vectorized over many
chords at once while staying exact for ball and half-space leaves.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

TAU_GEOM = 1e-12
MAX_LEAVES = 64


class GeometryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# interval algebra


def _empty(n, k=1):
    return np.full((n, k), np.inf), np.full((n, k), -np.inf)


def _prune(lo, hi):
    keep = np.any(lo <= hi, axis=0)
    if not keep.any():
        return _empty(lo.shape[0])
    return lo[:, keep], hi[:, keep]


def _union(sets):
    lo = np.concatenate([s[0] for s in sets], axis=1)
    hi = np.concatenate([s[1] for s in sets], axis=1)
    return _prune(lo, hi)


def _intersect(a, b):
    lo = np.maximum(a[0][:, :, None], b[0][:, None, :]).reshape(len(a[0]), -1)
    hi = np.minimum(a[1][:, :, None], b[1][:, None, :]).reshape(len(a[0]), -1)
    empty = lo > hi
    lo[empty], hi[empty] = np.inf, -np.inf
    return _prune(lo, hi)


def _intersect_all(sets):
    out = sets[0]
    for s in sets[1:]:
        out = _intersect(out, s)
    return out


def merge_intervals(lo, hi):
    """Sort and merge overlapping intervals row by row (empty slots go last)."""
    order = np.argsort(lo, axis=1)
    lo = np.take_along_axis(lo, order, axis=1)
    hi = np.take_along_axis(hi, order, axis=1)
    prev = np.maximum.accumulate(hi, axis=1)
    prev = np.concatenate([np.full((len(lo), 1), -np.inf), prev[:, :-1]], axis=1)
    # an interval starting inside the running cover is absorbed
    new_lo = np.maximum(lo, prev)
    new_hi = np.where(hi > prev, hi, -np.inf)
    new_lo = np.where(new_hi >= new_lo, new_lo, np.inf)
    new_hi = np.where(new_hi >= new_lo, new_hi, -np.inf)
    return new_lo, new_hi


# ---------------------------------------------------------------------------
# shape tree


class Shape:
    convex = False

    def leaves(self):
        raise NotImplementedError

    def inside(self, x):
        """Membership of rows of x in the open set."""
        raise NotImplementedError

    def in_closure(self, x):
        raise NotImplementedError

    def dist_out(self, x):
        """Distance to the complement (0 outside)."""
        raise NotImplementedError

    def dist_to(self, x):
        """Distance to the closure (0 inside the closure)."""
        raise NotImplementedError

    def complement_set(self, p, v, tau):
        raise NotImplementedError

    def closure_set(self, p, v, tau):
        raise NotImplementedError

    def bound(self):
        """Bounding ball (center, radius) or None if unbounded."""
        raise NotImplementedError

    def scaled(self, r):
        raise NotImplementedError

    def translated(self, shift):
        raise NotImplementedError


@dataclass(frozen=True)
class Ball(Shape):
    center: tuple
    radius: float
    convex = True

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def dim(self):
        return len(self.center)

    def leaves(self):
        return [self]

    def _norm(self, x):
        return np.linalg.norm(x - np.asarray(self.center), axis=-1)

    def inside(self, x):
        return self._norm(x) < self.radius

    def in_closure(self, x):
        return self._norm(x) <= self.radius

    def dist_out(self, x):
        return np.maximum(self.radius - self._norm(x), 0.0)

    def dist_to(self, x):
        return np.maximum(self._norm(x) - self.radius, 0.0)

    def _roots(self, p, v, tau):
        m = p - np.asarray(self.center)
        a = np.einsum("ij,ij->i", v, v)
        b = np.einsum("ij,ij->i", m, v)
        c = np.einsum("ij,ij->i", m, m) - self.radius**2
        safe_a = np.where(a > 0, a, 1.0)
        # r^2 minus squared distance from the center to the line
        gap = np.where(a > 0, b * b / safe_a - c, -c)
        rel = gap / self.radius**2
        s = np.sqrt(np.maximum(gap, 0.0) / safe_a)
        mid = -b / safe_a
        return a, c, rel, mid - s, mid + s

    def closure_set(self, p, v, tau):
        a, c, rel, r0, r1 = self._roots(p, v, tau)
        n = len(p)
        lo, hi = _empty(n)
        hit = (a > 0) & (rel >= -tau)
        lo[hit, 0], hi[hit, 0] = r0[hit], r1[hit]
        point = (a == 0) & (c <= 0)
        lo[point, 0], hi[point, 0] = -np.inf, np.inf
        return lo, hi

    def complement_set(self, p, v, tau):
        a, c, rel, r0, r1 = self._roots(p, v, tau)
        n = len(p)
        lo = np.full((n, 2), np.inf)
        hi = np.full((n, 2), -np.inf)
        cut = (a > 0) & (rel > tau)
        lo[cut, 0], hi[cut, 0] = -np.inf, r0[cut]
        lo[cut, 1], hi[cut, 1] = r1[cut], np.inf
        whole = ((a > 0) & ~cut) | ((a == 0) & (c >= 0))
        lo[whole, 0], hi[whole, 0] = -np.inf, np.inf
        return lo, hi

    def bound(self):
        return np.asarray(self.center), self.radius

    def scaled(self, r):
        return Ball(tuple(r * c for c in self.center), r * self.radius)

    def translated(self, shift):
        return Ball(tuple(c + s for c, s in zip(self.center, shift)), self.radius)


@dataclass(frozen=True)
class HalfSpace(Shape):
    """The open half-space {x : normal . x < offset}."""

    normal: tuple
    offset: float
    convex = True

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        norm = np.linalg.norm(n)
        if norm == 0:
            raise GeometryError("half-space normal must be nonzero")
        object.__setattr__(self, "normal", tuple(n / norm))
        object.__setattr__(self, "offset", float(self.offset) / norm)

    @property
    def dim(self):
        return len(self.normal)

    def leaves(self):
        return [self]

    def _g(self, x):
        return x @ np.asarray(self.normal) - self.offset

    def inside(self, x):
        return self._g(x) < 0

    def in_closure(self, x):
        return self._g(x) <= 0

    def dist_out(self, x):
        return np.maximum(-self._g(x), 0.0)

    def dist_to(self, x):
        return np.maximum(self._g(x), 0.0)

    def _side(self, p, v, nonpositive):
        nrm = np.asarray(self.normal)
        g0 = p @ nrm - self.offset
        g1 = v @ nrm
        if not nonpositive:
            g0, g1 = -g0, -g1
        # set {g0 + lam * g1 <= 0}
        n = len(p)
        lo, hi = _empty(n)
        with np.errstate(divide="ignore", invalid="ignore"):
            root = -g0 / g1
        up = g1 > 0
        lo[up, 0], hi[up, 0] = -np.inf, root[up]
        down = g1 < 0
        lo[down, 0], hi[down, 0] = root[down], np.inf
        flat = (g1 == 0) & (g0 <= 0)
        lo[flat, 0], hi[flat, 0] = -np.inf, np.inf
        return lo, hi

    def closure_set(self, p, v, tau):
        return self._side(p, v, True)

    def complement_set(self, p, v, tau):
        return self._side(p, v, False)

    def bound(self):
        return None

    def scaled(self, r):
        return HalfSpace(self.normal, r * self.offset)

    def translated(self, shift):
        return HalfSpace(self.normal, self.offset + float(np.dot(self.normal, shift)))


@dataclass(frozen=True)
class Union(Shape):
    children: tuple

    def leaves(self):
        return [leaf for c in self.children for leaf in c.leaves()]

    def inside(self, x):
        return np.any([c.inside(x) for c in self.children], axis=0)

    def in_closure(self, x):
        return np.any([c.in_closure(x) for c in self.children], axis=0)

    def dist_out(self, x):
        # exact for disjoint or nested children, a lower bound otherwise
        return np.max([c.dist_out(x) for c in self.children], axis=0)

    def dist_to(self, x):
        return np.min([c.dist_to(x) for c in self.children], axis=0)

    def complement_set(self, p, v, tau):
        return _intersect_all([c.complement_set(p, v, tau) for c in self.children])

    def closure_set(self, p, v, tau):
        return _union([c.closure_set(p, v, tau) for c in self.children])

    def bound(self):
        bounds = [c.bound() for c in self.children]
        if any(b is None for b in bounds):
            return None
        lo = np.min([c - r for c, r in bounds], axis=0)
        hi = np.max([c + r for c, r in bounds], axis=0)
        center = (lo + hi) / 2
        return center, max(np.linalg.norm(c - center) + r for c, r in bounds)

    def scaled(self, r):
        return Union(tuple(c.scaled(r) for c in self.children))

    def translated(self, shift):
        return Union(tuple(c.translated(shift) for c in self.children))


@dataclass(frozen=True)
class Intersection(Shape):
    children: tuple

    @property
    def convex(self):
        return all(c.convex for c in self.children)

    def leaves(self):
        return [leaf for c in self.children for leaf in c.leaves()]

    def inside(self, x):
        return np.all([c.inside(x) for c in self.children], axis=0)

    def in_closure(self, x):
        return np.all([c.in_closure(x) for c in self.children], axis=0)

    def dist_out(self, x):
        return np.min([c.dist_out(x) for c in self.children], axis=0)

    def dist_to(self, x):
        return np.max([c.dist_to(x) for c in self.children], axis=0)

    def complement_set(self, p, v, tau):
        return _union([c.complement_set(p, v, tau) for c in self.children])

    def closure_set(self, p, v, tau):
        return _intersect_all([c.closure_set(p, v, tau) for c in self.children])

    def bound(self):
        bounds = [b for b in (c.bound() for c in self.children) if b is not None]
        return min(bounds, key=lambda b: b[1]) if bounds else None

    def scaled(self, r):
        return Intersection(tuple(c.scaled(r) for c in self.children))

    def translated(self, shift):
        return Intersection(tuple(c.translated(shift) for c in self.children))


@dataclass(frozen=True)
class Difference(Shape):
    """base minus the closures of the removed shapes."""

    base: Shape
    removed: tuple

    def leaves(self):
        return self.base.leaves() + [leaf for c in self.removed for leaf in c.leaves()]

    def inside(self, x):
        out = self.base.inside(x)
        for c in self.removed:
            out = out & ~c.in_closure(x)
        return out

    def in_closure(self, x):
        out = self.base.in_closure(x)
        for c in self.removed:
            out = out & ~c.inside(x)
        return out

    def dist_out(self, x):
        return np.min([self.base.dist_out(x)] + [c.dist_to(x) for c in self.removed], axis=0)

    def dist_to(self, x):
        return np.max([self.base.dist_to(x)] + [c.dist_out(x) for c in self.removed], axis=0)

    def complement_set(self, p, v, tau):
        return _union(
            [self.base.complement_set(p, v, tau)]
            + [c.closure_set(p, v, tau) for c in self.removed]
        )

    def closure_set(self, p, v, tau):
        sets = [self.base.closure_set(p, v, tau)]
        sets += [c.complement_set(p, v, tau) for c in self.removed]
        return _intersect_all(sets)

    def bound(self):
        return self.base.bound()

    def scaled(self, r):
        return Difference(self.base.scaled(r), tuple(c.scaled(r) for c in self.removed))

    def translated(self, shift):
        return Difference(
            self.base.translated(shift), tuple(c.translated(shift) for c in self.removed)
        )


# ---------------------------------------------------------------------------
# domain


def _as_points(x, d):
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[-1] != d:
        raise GeometryError(f"dimension mismatch: expected {d}, got {arr.shape[-1]}")
    return arr, single


@dataclass(frozen=True)
class Domain:
    """An open subset of R^d given by a shape tree."""

    shape: Shape
    d: int
    tau_geom: float = TAU_GEOM
    name: str = field(default="", compare=False)

    def __post_init__(self):
        leaves = self.shape.leaves()
        if len(leaves) > MAX_LEAVES:
            raise GeometryError(f"{len(leaves)} leaves exceeds the limit of {MAX_LEAVES}")
        for leaf in leaves:
            if leaf.dim != self.d:
                raise GeometryError(f"leaf {leaf} does not live in dimension {self.d}")

    @property
    def convex(self):
        return self.shape.convex

    def contains(self, x):
        pts, single = _as_points(x, self.d)
        out = self.shape.inside(pts)
        return bool(out[0]) if single else out

    def dist_to_complement(self, x):
        pts, single = _as_points(x, self.d)
        out = np.where(self.shape.inside(pts), self.shape.dist_out(pts), 0.0)
        return float(out[0]) if single else out

    def complement_intervals(self, p, v):
        """Closed parameter intervals where p + lam v lies outside D."""
        return self.shape.complement_set(p, v, self.tau_geom)

    def chord_in_domain(self, x, y):
        """True iff the closed segment [x, y] avoids the complement."""
        px, single = _as_points(x, self.d)
        py, _ = _as_points(y, self.d)
        px, py = np.broadcast_arrays(px, py)
        if self.convex:
            out = self.shape.inside(px) & self.shape.inside(py)
            return bool(out[0]) if single else out
        # orient each chord canonically so the predicate is exactly symmetric
        key = _first_nonzero_sign(py - px)
        a = np.where(key[:, None] >= 0, px, py)
        b = np.where(key[:, None] >= 0, py, px)
        lo, hi = self.complement_intervals(a, b - a)
        out = ~np.any((lo <= 1.0) & (hi >= 0.0), axis=1)
        return bool(out[0]) if single else out

    def visible(self, x, y):
        px, single = _as_points(x, self.d)
        if not np.all(self.shape.inside(px)):
            raise GeometryError("visible() requires x in D")
        return self.chord_in_domain(x, y)

    def first_exit_radius(self, x, omega):
        """Smallest r >= 0 with x + r omega outside D, for unit directions omega."""
        px, single = _as_points(x, self.d)
        om, _ = _as_points(omega, self.d)
        px, om = np.broadcast_arrays(px, om)
        lo, hi = self.complement_intervals(px, om)
        start = np.where(hi >= 0, np.maximum(lo, 0.0), np.inf)
        out = start.min(axis=1)
        return float(out[0]) if single else out

    def bound(self):
        b = self.shape.bound()
        if b is None:
            return None
        return np.asarray(b[0], dtype=float), float(b[1])

    def sample_uniform(self, rng, n, min_acceptance=1e-3):
        """n uniform points of D by rejection from the bounding ball.

        Returns (points, acceptance_rate).
        """
        b = self.bound()
        if b is None:
            raise GeometryError("sample_uniform needs a bounded domain")
        center, radius = b
        out, tried, got = [], 0, 0
        while got < n:
            m = max(2 * (n - got), 1024)
            g = rng.standard_normal((m, self.d))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            u = rng.random(m) ** (1.0 / self.d)
            pts = center + radius * u[:, None] * g
            ok = self.shape.inside(pts)
            tried += m
            got += int(ok.sum())
            out.append(pts[ok])
            if tried >= 20_000 and got / tried < min_acceptance:
                raise GeometryError(f"acceptance rate {got / tried:.2e} below floor")
        return np.concatenate(out)[:n], got / tried

    def scaled(self, r):
        return Domain(self.shape.scaled(r), self.d, self.tau_geom, self.name)

    def translated(self, shift):
        return Domain(self.shape.translated(shift), self.d, self.tau_geom, self.name)


def _first_nonzero_sign(v):
    """Sign of the first nonzero coordinate of each row (0 for the zero row)."""
    s = np.sign(v)
    idx = np.argmax(s != 0, axis=1)
    return s[np.arange(len(s)), idx]


# module-level forms of the queries


def contains(domain, x):
    return domain.contains(x)


def dist_to_complement(domain, x):
    return domain.dist_to_complement(x)


def chord_in_domain(domain, x, y):
    return domain.chord_in_domain(x, y)


def visible(domain, x, y):
    return domain.visible(x, y)


def sample_uniform(domain, rng, n):
    return domain.sample_uniform(rng, n)


# ---------------------------------------------------------------------------
# presets and parsing


def ball(center, radius):
    return Domain(Ball(tuple(center), radius), len(center), name="ball")


def annulus(r1=1.0, r2=2.0, d=2):
    if not 0 < r1 < r2:
        raise GeometryError("annulus needs 0 < r1 < r2")
    zero = (0.0,) * d
    return Domain(Difference(Ball(zero, r2), (Ball(zero, r1),)), d, name=f"annulus({r1},{r2})")


HARNACK7_HOLES = (((2.5, -1.0), 1.0), ((5.0, 1.0), 1.0))


def harnack7():
    """B(0,9) with the closed unit balls at (2.5,-1) and (5,1) removed."""
    holes = tuple(Ball(c, r) for c, r in HARNACK7_HOLES)
    return Domain(Difference(Ball((0.0, 0.0), 9.0), holes), 2, name="harnack7")


_PRESET = re.compile(r"^\s*(\w+)\s*\(([^)]*)\)\s*$")


def parse_domain(text, d=None):
    """Parse a domain description.

    Accepts the presets ``annulus(r1,r2)``, ``harnack7`` and ``ball(r)``, or
    the grammar ``ball cx cy ... r``, ``halfspace nx ny ... off``,
    ``union{A; B; ...}``, ``inter{A; B; ...}`` and ``diff{base; removed...}``.
    """
    text = text.strip()
    if text in ("harnack7", "harnack7()"):
        return harnack7()
    m = _PRESET.match(text)
    if m and m.group(1) in ("annulus", "ball"):
        args = [float(a) for a in m.group(2).split(",") if a.strip()]
        dim = d or 2
        if m.group(1) == "annulus":
            if len(args) != 2:
                raise GeometryError("annulus(r1,r2) takes two radii")
            return annulus(*args, d=dim)
        if len(args) != 1:
            raise GeometryError("ball(r) takes one radius")
        return ball((0.0,) * dim, args[0])
    shape = _parse_shape(text)
    dims = {leaf.dim for leaf in shape.leaves()}
    if len(dims) != 1:
        raise GeometryError("leaves of mixed dimension")
    dim = dims.pop()
    if d is not None and d != dim:
        raise GeometryError(f"domain has dimension {dim}, expected {d}")
    return Domain(shape, dim, name=text)


def _split_top(body):
    parts, depth, cur = [], 0, []
    for ch in body:
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
        if ch == ";" and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


def _parse_shape(text):
    text = text.strip()
    m = re.match(r"^(union|inter|diff)\s*\{(.*)\}$", text, re.S)
    if m:
        kids = [_parse_shape(p) for p in _split_top(m.group(2))]
        if not kids:
            raise GeometryError(f"empty {m.group(1)}")
        if m.group(1) == "union":
            return Union(tuple(kids))
        if m.group(1) == "inter":
            return Intersection(tuple(kids))
        if len(kids) < 2:
            raise GeometryError("diff needs a base and at least one removed part")
        return Difference(kids[0], tuple(kids[1:]))
    words = text.split()
    if not words:
        raise GeometryError("empty shape")
    try:
        nums = [float(w) for w in words[1:]]
    except ValueError:
        raise GeometryError(f"malformed shape: {text!r}") from None
    if words[0] == "ball" and len(nums) >= 2:
        return Ball(tuple(nums[:-1]), nums[-1])
    if words[0] == "halfspace" and len(nums) >= 2:
        return HalfSpace(tuple(nums[:-1]), nums[-1])
    raise GeometryError(f"malformed shape: {text!r}")


def diameter(domain):
    b = domain.bound()
    return math.inf if b is None else 2 * b[1]
