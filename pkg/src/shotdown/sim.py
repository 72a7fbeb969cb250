"""Path simulation of the stable process with shot-down and exit times.

Two schemes are available. ``grid`` uses exact increments at times k h and
checks the chord between consecutive grid points. ``jump-adapted`` draws
the jumps longer than eps_J exactly from their compound Poisson law and
replaces the remaining small jumps by a Brownian motion of matched
variance, sub-stepped at h; chords are checked for every sub-step and every
big jump.

Paths are simulated in vectorized batches. sigma (shot-down time) is
triggered by a blocked chord, tau (exit time) by an endpoint outside D.
Survivors up to the horizon get sigma = tau = inf.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, replace

import numpy as np

from .estimate import Estimate
from .geometry import diameter

EXIT, CHORD, SURVIVED = 0, 1, 2
KILL_NAMES = {EXIT: "exit", CHORD: "chord", SURVIVED: "survived"}


class SimError(ValueError):
    pass


@dataclass(frozen=True)
class SimScheme:
    mode: str = "jump-adapted"
    h: float = 1e-3
    eps_j: float = 0.1
    horizon: float = 1.0
    max_halvings: int = 40
    boundary_cutoff: float = 0.5

    def __post_init__(self):
        if self.mode not in ("grid", "jump-adapted"):
            raise SimError(f"unknown scheme mode {self.mode!r}")
        if not (self.h > 0 and self.eps_j > 0 and self.horizon > 0):
            raise SimError("h, eps_j and horizon must be positive")

    @classmethod
    def default(cls, domain, horizon=1.0, mode="jump-adapted"):
        diam = diameter(domain)
        eps = 0.05 * diam if math.isfinite(diam) else 0.1
        return cls(mode, 1e-3 * horizon, eps, horizon)

    def with_horizon(self, horizon):
        return replace(self, horizon=horizon)

    def scaled(self, r, alpha):
        """Scheme for the domain scaled by r; the scaled process has the same law."""
        c = r**alpha
        return replace(self, h=self.h * c, eps_j=self.eps_j * r, horizon=self.horizon * c)

    def grid_steps(self, t=None):
        """Number of grid steps to reach t and the adjusted step t / steps."""
        t = self.horizon if t is None else t
        k = max(1, math.ceil(t / self.h - 1e-9))
        return k, t / k


@dataclass
class PathRecord:
    sigma: float
    tau: float
    x_pre: np.ndarray
    x_land: np.ndarray
    killed_by: str
    skeleton: list | None = None


@dataclass
class PathBatch:
    """Struct-of-arrays record of n simulated paths."""

    sigma: np.ndarray
    tau: np.ndarray
    x_pre: np.ndarray
    x_land: np.ndarray
    tau_land: np.ndarray
    killed_by: np.ndarray
    x_final: np.ndarray
    x_penult: np.ndarray
    horizon: float
    tracked_tau: bool = True
    steps: int = 0
    skeletons: list | None = None

    def __len__(self):
        return len(self.sigma)

    def record(self, i, skeleton=None):
        return PathRecord(
            float(self.sigma[i]),
            float(self.tau[i]),
            self.x_pre[i].copy(),
            self.x_land[i].copy(),
            KILL_NAMES[int(self.killed_by[i])],
            skeleton,
        )

    @classmethod
    def concat(cls, batches):
        first = batches[0]
        kw = {
            name: np.concatenate([getattr(b, name) for b in batches])
            for name in ("sigma", "tau", "x_pre", "x_land", "tau_land", "killed_by", "x_final", "x_penult")
        }
        return cls(**kw, horizon=first.horizon, tracked_tau=first.tracked_tau,
                   steps=sum(b.steps for b in batches))


class _Runner:
    def __init__(self, law, domain, x0, scheme, rng, n, track_tau, observer, skeleton):
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (domain.d,):
            raise SimError("x0 has the wrong dimension")
        if law.d != domain.d:
            raise SimError("law and domain dimensions differ")
        if not domain.contains(x0):
            raise SimError("x0 must lie in D")
        self.law, self.domain, self.scheme, self.rng = law, domain, scheme, rng
        self.track_tau, self.observer = track_tau, observer
        d = domain.d
        nan = np.full((n, d), np.nan)
        self.pos = np.tile(x0, (n, 1))
        self.sigma = np.full(n, np.inf)
        self.tau = np.full(n, np.inf)
        self.x_pre, self.x_land, self.tau_land = nan.copy(), nan.copy(), nan.copy()
        self.x_penult = nan.copy()
        self.killed_by = np.full(n, SURVIVED, dtype=np.int8)
        self.alive_s = np.ones(n, dtype=bool)
        self.alive_t = np.ones(n, dtype=bool)
        self.skeleton = [[(0.0, x0.copy())] for _ in range(n)] if skeleton else None
        self.steps = 0

    def active(self):
        return self.alive_t if self.track_tau else self.alive_s

    def check(self, idx, a, b, when):
        """Kill tests for the moves a -> b of the paths idx at times when."""
        s = self.alive_s[idx]
        if s.any():
            ok = self.domain.chord_in_domain(a[s], b[s])
            hit = ~ok
            kill = idx[s][hit]
            self.sigma[kill] = when[s][hit]
            self.x_pre[kill] = a[s][hit]
            self.x_land[kill] = b[s][hit]
            inside = self.domain.contains(b[s][hit])
            self.killed_by[kill] = np.where(inside, CHORD, EXIT)
            self.alive_s[kill] = False
            if not self.track_tau:
                self.tau[kill[~inside]] = when[s][hit][~inside]
                self.tau[kill[inside]] = np.nan
                self.tau_land[kill[~inside]] = b[s][hit][~inside]
                self.alive_t[kill] = False
        if self.track_tau:
            m = self.alive_t[idx]
            if m.any():
                out = ~self.domain.contains(b[m])
                kill = idx[m][out]
                self.tau[kill] = when[m][out]
                self.tau_land[kill] = b[m][out]
                self.alive_t[kill] = False
                if np.any(self.alive_s[kill]):
                    raise AssertionError("exit without shot-down: sigma <= tau violated")

    def record_skeleton(self, idx, pts, when):
        if self.skeleton is not None:
            for i, p, t in zip(idx, pts, when):
                self.skeleton[i].append((float(t), p.copy()))

    def run_grid(self):
        k_steps, h = self.scheme.grid_steps()
        for k in range(1, k_steps + 1):
            idx = np.flatnonzero(self.active())
            if len(idx) == 0:
                break
            x = self.pos[idx]
            if self.observer is not None:
                self.observer(idx, x, np.full(len(idx), h), self.alive_s[idx])
            if k == k_steps:
                self.x_penult[idx] = x
            xn = x + self.law.sample_increment(h, self.rng, len(idx))
            self.check(idx, x, xn, np.full(len(idx), k * h))
            self.pos[idx] = xn
            self.record_skeleton(idx, xn, np.full(len(idx), k * h))
            self.steps += len(idx)

    def run_jump_adapted(self):
        sch, law = self.scheme, self.law
        n = len(self.pos)
        t = np.zeros(n)
        horizon = sch.horizon
        while True:
            idx = np.flatnonzero(self.active() & (t < horizon))
            if len(idx) == 0:
                break
            x, tt = self.pos[idx], t[idx]
            delta = self.domain.dist_to_complement(x)
            eps = np.full(len(idx), sch.eps_j)
            if sch.boundary_cutoff > 0:
                # near the boundary only jumps shorter than a fraction of
                # delta are diffused, so exits happen through exact jumps
                eps = np.minimum(eps, sch.boundary_cutoff * delta)
            var = law.small_jump_variance(eps)
            rate = law.big_jump_rate(eps)
            # local step halving keeps the Brownian part well inside D
            with np.errstate(divide="ignore"):
                need = np.log2(sch.h * var / np.maximum((0.1 * delta) ** 2, 1e-300))
            halv = np.clip(np.ceil(need), 0, sch.max_halvings)
            dt = np.minimum(sch.h / 2.0**halv, horizon - tt)
            # the jump clock is memoryless, so it is redrawn every step
            wait = self.rng.standard_exponential(len(idx)) / rate
            jump = wait < dt
            dt = np.where(jump, wait, dt)
            if self.observer is not None:
                self.observer(idx, x, dt, self.alive_s[idx])
            xn = x + np.sqrt(var * dt)[:, None] * self.rng.standard_normal(x.shape)
            when = tt + dt
            self.check(idx, x, xn, when)
            live = self.active()[idx] & jump
            if live.any():
                j_idx = idx[live]
                _, z = law.sample_big_jump(eps[live], self.rng, len(j_idx))
                xj = xn[live] + z
                self.check(j_idx, xn[live], xj, when[live])
                xn[live] = xj
            t[idx] = when
            self.pos[idx] = xn
            self.record_skeleton(idx, xn, when)
            self.steps += len(idx)

    def batch(self):
        x_final = np.where(self.active()[:, None], self.pos, np.nan)
        return PathBatch(
            self.sigma, self.tau, self.x_pre, self.x_land, self.tau_land, self.killed_by,
            x_final, self.x_penult, self.scheme.horizon, self.track_tau, self.steps,
        )


def simulate_batch(law, domain, x0, scheme, rng, n, track_tau=True, observer=None, skeleton=False):
    """Simulate n paths from x0; returns a PathBatch.

    observer, if given, is called before every step as
    observer(idx, x, dt, sigma_alive) with the indices and positions of the
    paths still being simulated; it is how occupation estimators see the
    skeleton without storing it.
    """
    runner = _Runner(law, domain, x0, scheme, rng, n, track_tau, observer, skeleton)
    if scheme.mode == "grid":
        runner.run_grid()
    else:
        runner.run_jump_adapted()
    batch = runner.batch()
    tau = np.where(np.isnan(batch.tau), np.inf, batch.tau)
    if np.any(batch.sigma > tau):
        raise AssertionError("sigma <= tau violated")
    batch.skeletons = runner.skeleton
    return batch


def simulate(law, domain, x0, scheme, rng):
    """One path, with its skeleton of (time, point) pairs."""
    b = simulate_batch(law, domain, x0, scheme, rng, 1, skeleton=True)
    return b.record(0, b.skeletons[0])


def survival_probability(law, domain, x0, t, scheme, rng, n):
    """P_x(sigma_D > t) with binomial standard error."""
    if n <= 0:
        raise SimError("budget n must be positive")
    if t > scheme.horizon * (1 + 1e-12):
        raise SimError("t exceeds the scheme horizon")
    b = simulate_batch(law, domain, x0, scheme.with_horizon(t), rng, n, track_tau=False)
    return Estimate.from_samples(b.sigma > t, note=f"{scheme.mode} h={scheme.h} eps_J={scheme.eps_j}")


def exit_triple_histogram(batch, time_bins, pre_cells, land_cells):
    """Counts of (sigma, X_{sigma-}, X_sigma) over time bins x pre cells x land cells.

    pre_cells and land_cells are lists of predicates mapping (m, d) point
    arrays to boolean arrays. Returns (probabilities, standard errors).
    """
    if len(time_bins) < 2 or not pre_cells or not land_cells:
        raise SimError("empty cell specification")
    n = len(batch)
    killed = np.isfinite(batch.sigma)
    s, xp, xl = batch.sigma[killed], batch.x_pre[killed], batch.x_land[killed]
    tb = np.digitize(s, time_bins) - 1
    counts = np.zeros((len(time_bins) - 1, len(pre_cells), len(land_cells)))
    pre = np.array([c(xp) for c in pre_cells]) if len(s) else np.zeros((len(pre_cells), 0), bool)
    land = np.array([c(xl) for c in land_cells]) if len(s) else np.zeros((len(land_cells), 0), bool)
    for i in range(len(time_bins) - 1):
        in_t = tb == i
        counts[i] = (pre[:, None, :] & land[None, :, :] & in_t).sum(axis=2)
    p = counts / n
    return p, np.sqrt(p * (1 - p) / n)


# ---------------------------------------------------------------------------
# binary path dump

DUMP_MAGIC = b"SHDP"
DUMP_VERSION = 1


def write_dump(fh, law, scheme, batch):
    """Versioned little-endian dump: header, then one record per path."""
    d = batch.x_pre.shape[1]
    mode = 0 if scheme.mode == "grid" else 1
    fh.write(DUMP_MAGIC)
    fh.write(struct.pack("<HHdBdddQ", DUMP_VERSION, d, law.alpha, mode, scheme.h,
                         scheme.eps_j, scheme.horizon, len(batch)))
    rec = np.zeros(len(batch), dtype=[("sigma", "<f8"), ("tau", "<f8"), ("x_pre", "<f8", d),
                                      ("x_land", "<f8", d), ("killed_by", "<i1")])
    rec["sigma"], rec["tau"] = batch.sigma, batch.tau
    rec["x_pre"], rec["x_land"], rec["killed_by"] = batch.x_pre, batch.x_land, batch.killed_by
    fh.write(rec.tobytes())


def read_dump(fh):
    if fh.read(4) != DUMP_MAGIC:
        raise SimError("not a path dump")
    head = struct.unpack("<HHdBdddQ", fh.read(struct.calcsize("<HHdBdddQ")))
    version, d, alpha, mode, h, eps, horizon, n = head
    if version != DUMP_VERSION:
        raise SimError(f"unsupported dump version {version}")
    dt = np.dtype([("sigma", "<f8"), ("tau", "<f8"), ("x_pre", "<f8", d),
                   ("x_land", "<f8", d), ("killed_by", "<i1")])
    rec = np.frombuffer(fh.read(dt.itemsize * n), dtype=dt)
    meta = dict(d=d, alpha=alpha, mode="grid" if mode == 0 else "jump-adapted",
                h=h, eps_j=eps, horizon=horizon)
    return meta, rec
