"""Named experiments: each turns a config into ResultRows and data tables.

A row with ``passed`` set is an assertion at the budget written in its
``budget`` column; rows with ``passed = None`` are informational. Every
claim id used in a row is listed in CLAIMS. Budgets and defaults come from
the config; a zero config value selects the experiment default.
"""

from __future__ import annotations

import math
import zlib

import numpy as np
from scipy import stats

from . import forms, kernels
from .config import ConfigError
from .estimate import Estimate
from .geometry import Ball
from .intensity import difference_profile, intensities, iota_monte_carlo, nu_mass_ball
from .parallel import map_chunks
from .report import ExperimentResult, ResultRow, Table
from .rng import child_seed, stream
from .sim import CHORD, EXIT, PathBatch, SimScheme, simulate_batch
from .stable import StableLaw

CLAIMS = {
    "stable-cf": "characteristic function of X_t equals exp(-t |xi|^alpha)",
    "stable-scaling": "X_t has the law of t^(1/alpha) X_1",
    "stable-density": "histogram of X_1 (first coordinate) matches the stable density",
    "sigma-le-tau": "the shot-down time never exceeds the exit time",
    "convex-collapse": "on convex domains sigma equals tau pathwise",
    "shotdown-early": "on non-convex domains sigma < tau with positive probability",
    "record-invariants": "kill records are consistent with the chord and exit rules",
    "riesz-mass": "the closed Riesz exit density has total mass one",
    "riesz-chi2": "exit points from a ball follow the Riesz exit law",
    "kernel-symmetry": "the shot-down kernel is symmetric in x and y",
    "kernel-scaling": "r^d p_rD(r^alpha t, rx, ry) = p_D(t, x, y)",
    "chapman-kolmogorov": "the shot-down kernels form a semigroup",
    "incomparability-ratio": "p_hat / p_D at a mutually invisible pair",
    "incomparability-decreasing": "p_hat / p_D decreases as t -> 0 on a non-convex domain",
    "incomparability-drop": "p_hat / p_D drops by the growth budget over the t list",
    "convex-ratio-one": "p_hat / p_D is identically one on a convex domain",
    "iota-ge-kappa": "the shooting-down intensity dominates the killing intensity",
    "iota-quadrature-vs-mc": "iota by quadrature agrees with a Monte Carlo count",
    "relative-gap-decreasing": "(iota - kappa) / kappa decreases as delta -> 0",
    "gap-slope": "log-log slope of iota - kappa near a concave boundary (alpha > 1)",
    "gap-slope-full": "log-log slope of iota - kappa over the whole sweep",
    "gap-log-template": "iota - kappa grows at most like log(1/delta) (alpha = 1)",
    "gap-bounded": "iota - kappa stays bounded as delta -> 0 (alpha < 1)",
    "convex-equal": "iota = kappa on a convex domain",
    "form-identity": "E_hat[f] = E[f] + cross term",
    "form-order": "E_hat[f] >= E[f] for nonnegative f",
    "cross-term-ratio": "cross term relative to E[f]",
    "hardy-margin": "E[f] >= int f^2 kappa_D",
    "green-positive": "G_hat / GreenRef is finite and positive at every pair",
    "green-comparability": "max / min of G_hat / GreenRef over the pairs",
    "green-killed-spread": "max / min of G_D / GreenRef over the pairs",
    "green-pair-ratio": "G_hat / GreenRef at one pair",
    "green-scaling": "G_hat_rD(rx, ry) / G_hat_D(x, y) = r^(alpha - d)",
    "occupation-identity": "per-cell occupation counts sum to the total alive time",
    "iw-identity": "joint law of (sigma, X_sigma-, X_sigma) from the Levy system",
    "harnack-lower": "inf of u over a far ball dominates c times inf over the start ball",
    "harnack-ratio": "u_eps(0) / u_eps(x) for the pinched domain",
    "harnack-increasing": "u_eps(0) / u_eps(x) increases as eps halves",
    "harnack-growth": "total growth of u_eps(0) / u_eps(x) over the eps list",
}

CATALOGUE = {}

# minimum path budgets below which the stderr requirement cannot be met
MIN_N = {
    "stable-check": 10_000,
    "stopping-order": 1_000,
    "riesz-exit": 5_000,
    "kernel-symmetry": 10_000,
    "kernel-scaling": 10_000,
    "chapman-kolmogorov": 10_000,
    "incomparability": 10_000,
    "green-ratio": 2_000,
    "green-scaling": 5_000,
    "iw-identity": 50_000,
    "harnack-lower": 2_000,
    "harnack-failure": 10_000,
}


def experiment(name, doc):
    def wrap(fn):
        CATALOGUE[name] = (fn, doc)
        return fn

    return wrap


def run_experiment(cfg):
    """Run the experiment named in cfg; returns an ExperimentResult."""
    if cfg.experiment not in CATALOGUE:
        raise ConfigError(f"unknown experiment {cfg.experiment!r}; available: {', '.join(CATALOGUE)}")
    floor = MIN_N.get(cfg.experiment)
    if cfg.n and floor and cfg.n < floor:
        raise ConfigError(
            f"budget n = {cfg.n} is insufficient for {cfg.experiment}: the stderr requirement needs n >= {floor}"
        )
    fn, _ = CATALOGUE[cfg.experiment]
    res = ExperimentResult(cfg.experiment)
    fn(cfg, res)
    for r in res.rows:
        if r.claim not in CLAIMS:
            raise AssertionError(f"claim id {r.claim!r} missing from the catalogue")
    return res


# ---------------------------------------------------------------------------
# helpers


def _rng(cfg, *path):
    return stream(cfg.seed, zlib.crc32(cfg.experiment.encode()), *path)


def _scheme(cfg, h, eps_j, horizon, mode=None):
    return SimScheme(mode or cfg.scheme, cfg.h or h, cfg.eps_j or eps_j, cfg.horizon or horizon)


def _meta(scheme):
    return dict(h=scheme.h, eps_j=scheme.eps_j, horizon=scheme.horizon)


def _est_row(claim, quantity, est, **kw):
    return ResultRow(claim, quantity, est.value, est.stderr, est.n, bias_note=est.bias_note, **kw)


def _within(a, b, k):
    se = math.hypot(a.stderr, b.stderr)
    return abs(a.value - b.value) <= k * se, a.value - b.value, se


def _ratio(a, b):
    """a / b for independent estimates, delta-method stderr."""
    r = a.value / b.value
    se = abs(r) * math.hypot(a.stderr / a.value, b.stderr / b.value)
    return Estimate(r, se, min(a.n, b.n), a.bias_note)


def _preset_point(cfg, domain, table):
    if cfg.x:
        return np.asarray(cfg.x, float)
    key = domain.name.split("(")[0]
    if key not in table:
        raise ConfigError(f"{cfg.experiment} needs x for domain {cfg.domain!r}")
    return np.asarray(table[key], float)


def _require_annulus(cfg, domain):
    if domain.name != "annulus(1.0,2.0)" or domain.d != 2:
        raise ConfigError(f"{cfg.experiment} is defined on annulus(1,2) in d = 2")


def _batches(law, domain, x0, scheme, cfg, n, key, track_tau=True):
    seed = child_seed(_rng(cfg, *key))
    parts = map_chunks(lambda r, m: simulate_batch(law, domain, x0, scheme, r, m, track_tau=track_tau), n, seed)
    return PathBatch.concat(parts)


# ---------------------------------------------------------------------------
# sampler


@experiment("stable-check", "characteristic function, scaling and density of the stable sampler")
def stable_check(cfg, res):
    law = cfg.law()
    n = cfg.n or 1_000_000
    k = cfg.k_sigma
    rng = _rng(cfg, 0)
    x1 = law.sample_increment(1.0, rng, n)[:, 0]
    x2 = law.sample_increment(2.0, _rng(cfg, 1), n)[:, 0]
    budget = f"|diff| <= {k:g} stderr"
    for xi in (0.5, 1.0, 2.0):
        c = np.cos(xi * x1)
        est = Estimate.from_samples(c, f"n={n}")
        exact = math.exp(-(xi**law.alpha))
        ok = abs(est.value - exact) <= k * est.stderr
        res.rows.append(ResultRow("stable-cf", f"Re E exp(i {xi:g} X_1) - exp(-|xi|^alpha)",
                                  est.value - exact, est.stderr, n, budget, ok))
    est = Estimate.from_samples(np.cos(x2), f"n={n}")
    exact = math.exp(-2.0)
    res.rows.append(ResultRow("stable-scaling", "Re E exp(i X_2) - exp(-2)", est.value - exact,
                              est.stderr, n, budget, abs(est.value - exact) <= k * est.stderr))
    grid = np.linspace(0.1, 3.0, 30)
    cf = Table("cf", ("xi", "empirical", "stderr", "exact"),
               plot=dict(x="xi", y=["empirical", "exact"], err={"empirical": "stderr"},
                         title="characteristic function of X_1", ylabel="Re E exp(i xi X_1)"))
    for xi in grid:
        c = np.cos(xi * x1)
        cf.rows.append([float(xi), float(c.mean()), float(c.std(ddof=1) / math.sqrt(n)),
                        math.exp(-(xi**law.alpha))])
    res.tables.append(cf)

    # coordinate marginal of an isotropic stable vector is the 1-d stable law
    one = StableLaw(1, law.alpha)
    edges = np.linspace(-5.0, 5.0, 21)
    w = edges[1] - edges[0]
    counts, _ = np.histogram(x1, edges)
    p = counts / n
    dens = p / w
    se = np.sqrt(p * (1 - p) / n) / w
    mid = (edges[:-1] + edges[1:]) / 2
    f_mid = one.pdf(1.0, mid[:, None])
    if law.alpha == 1:
        avg = (np.arctan(edges[1:]) - np.arctan(edges[:-1])) / (math.pi * w)
    else:
        u, wu = np.polynomial.legendre.leggauss(8)
        pts = mid[:, None] + w / 2 * u[None, :]
        avg = (one.pdf(1.0, pts[..., None]) * wu).sum(axis=1) / 2
    bias = np.abs(avg - f_mid)
    score = np.abs(dens - f_mid) / (se + bias)
    worst = int(np.argmax(score))
    res.rows.append(ResultRow(
        "stable-density", "max cell |hist - density(mid)| / (stderr + bin bias)", float(score[worst]),
        math.nan, n, f"< {k:g}", bool(score[worst] < k),
        bias_note=f"20 cells on [-5,5]; worst cell at {mid[worst]:g}"))
    hist = Table("density", ("x", "histogram", "stderr", "density", "cell_average"),
                 plot=dict(x="x", y=["histogram", "density"], err={"histogram": "stderr"},
                           title="X_1 first coordinate", ylabel="density"))
    for row in zip(mid, dens, se, f_mid, avg):
        hist.rows.append([float(v) for v in row])
    res.tables.append(hist)


# ---------------------------------------------------------------------------
# stopping times


@experiment("stopping-order", "sigma_D <= tau_D on every path; equality on convex domains")
def stopping_order(cfg, res):
    law, dom = cfg.law(), cfg.make_domain()
    x0 = _preset_point(cfg, dom, {"ball": (0.0,) * dom.d, "annulus": (1.5,) + (0.0,) * (dom.d - 1),
                                   "harnack7": (0.0, -0.5)})
    n = cfg.n or 100_000
    sch = _scheme(cfg, 1e-3, min(0.1, 0.05 * _diam(dom)), 1.0)
    b = _batches(law, dom, x0, sch, cfg, n, (0,))
    tau = np.where(np.isnan(b.tau), np.inf, b.tau)
    le = np.mean(b.sigma <= tau)
    meta = _meta(sch)
    res.rows.append(ResultRow("sigma-le-tau", "fraction of paths with sigma <= tau", float(le), math.nan, n,
                              "== 1", bool(le == 1.0), **meta))
    killed = np.isfinite(b.sigma)
    pre_in = dom.contains(np.where(killed[:, None], b.x_pre, np.inf)) if killed.any() else killed
    chord_ok = np.ones(n, dtype=bool)
    if killed.any():
        blocked = ~dom.chord_in_domain(b.x_pre[killed], b.x_land[killed])
        land_in = dom.contains(b.x_land[killed])
        code_ok = np.where(land_in, b.killed_by[killed] == CHORD, b.killed_by[killed] == EXIT)
        chord_ok[killed] = blocked & pre_in[killed] & code_ok
    res.rows.append(ResultRow("record-invariants", "fraction of kill records consistent", float(chord_ok.mean()),
                              math.nan, n, "== 1", bool(chord_ok.all()), **meta))
    eq = np.mean(b.sigma == tau)
    lt = float(np.mean(b.sigma < tau))
    if dom.convex:
        res.rows.append(ResultRow("convex-collapse", "fraction of paths with sigma == tau", float(eq), math.nan,
                                  n, "== 1", bool(eq == 1.0), **meta))
    else:
        se = math.sqrt(lt * (1 - lt) / n)
        res.rows.append(ResultRow("shotdown-early", "fraction of paths with sigma < tau", lt, se, n,
                                  "> 0", lt > 0, **meta))
    ts = np.linspace(0, sch.horizon, 41)[1:]
    surv = Table("survival", ("t", "P(sigma > t)", "P(tau > t)"),
                 plot=dict(x="t", y=["P(sigma > t)", "P(tau > t)"], title="survival", ylabel="probability"))
    for t in ts:
        surv.rows.append([float(t), float(np.mean(b.sigma > t)), float(np.mean(tau > t))])
    res.tables.append(surv)


def _diam(dom):
    from .geometry import diameter

    d = diameter(dom)
    return d if math.isfinite(d) else 2.0


@experiment("riesz-exit", "exit law from a centred ball against the Riesz formula")
def riesz_exit(cfg, res):
    law, dom = cfg.law(), cfg.make_domain()
    shape = dom.shape
    if not isinstance(shape, Ball) or any(shape.center) or dom.d != 2:
        raise ConfigError("riesz-exit needs a ball centred at the origin in d = 2")
    r = shape.radius
    x0 = np.asarray(cfg.x or (0.0, 0.0), float)
    if np.any(x0):
        raise ConfigError("the riesz-exit chi-square test starts at the centre (x = 0)")
    if cfg.cells % 8:
        raise ConfigError("cells must be a multiple of 8 (angular sectors)")
    for pt in ((0.0, 0.0), (0.3 * r, 0.2 * r), (0.7 * r, -0.5 * r)):
        mass, err = kernels.riesz_total_mass(law.alpha, r, pt)
        res.rows.append(ResultRow("riesz-mass", f"|mass - 1| from ({pt[0]:g}, {pt[1]:g})", abs(mass - 1), err,
                                  0, "<= 1e-6", abs(mass - 1) <= 1e-6, bias_note="nested adaptive quadrature"))
    n = cfg.n or 100_000
    sch = _scheme(cfg, 1e-3 * r**law.alpha, 0.05 * r, 20.0 * r**law.alpha)
    b = _batches(law, dom, x0, sch, cfg, n, (0,))
    done = np.isfinite(b.tau)
    z = b.tau_land[done]
    n_rad = cfg.cells // 8
    # equal-probability radial bins under the exit law
    qs = np.arange(1, n_rad) / n_rad
    u_cut = stats.beta.ppf(1 - qs, law.alpha / 2, 1 - law.alpha / 2)
    rad_edges = np.concatenate([[r], r / np.sqrt(u_cut), [np.inf]])
    rad = np.linalg.norm(z, axis=1)
    ang = np.mod(np.arctan2(z[:, 1], z[:, 0]), 2 * math.pi)
    ri = np.clip(np.searchsorted(rad_edges, rad, side="right") - 1, 0, n_rad - 1)
    ai = np.minimum((ang / (2 * math.pi) * 8).astype(int), 7)
    obs = np.bincount(ri * 8 + ai, minlength=cfg.cells).astype(float)
    m = len(z)
    expected = np.full(cfg.cells, m / cfg.cells)
    chi2 = float(np.sum((obs - expected) ** 2 / expected))
    pval = float(stats.chi2.sf(chi2, cfg.cells - 1))
    meta = _meta(sch)
    res.rows.append(ResultRow("riesz-chi2", f"chi-square p-value over {cfg.cells} cells", pval, math.nan, m,
                              f"> {cfg.p_min:g}", pval > cfg.p_min, bias_note=f"chi2 = {chi2:.4g}", **meta))
    res.rows.append(ResultRow("riesz-chi2", "fraction of paths still inside at the horizon", float(1 - done.mean()),
                              math.nan, n, "", None, **meta))
    tab = Table("radial_cdf", ("radius", "empirical", "exact"),
                plot=dict(x="radius", y=["empirical", "exact"], logx=True, title="P(|X_tau| <= radius)",
                          ylabel="probability"))
    for q in np.geomspace(r * 1.001, 20 * r, 30):
        tab.rows.append([float(q), float(np.mean(rad <= q)), float(kernels.riesz_radial_cdf(law.alpha, r, q))])
    res.tables.append(tab)
    cells = Table("cells", ("cell", "observed", "expected"),
                  plot=dict(x="cell", y=["observed", "expected"], kind="scatter", title="exit cells", ylabel="count"))
    for i in range(cfg.cells):
        cells.rows.append([i, float(obs[i]), float(expected[i])])
    res.tables.append(cells)


# ---------------------------------------------------------------------------
# heat kernels


def _boost(cfg):
    if cfg.boost == "none":
        return None
    return cfg.boost if cfg.boost == "auto" else float(cfg.boost)


def _bridge(law, dom, t, x, y, cfg, n, key):
    return kernels.bridge_kernels(law, dom, t, np.asarray(x, float), np.asarray(y, float), cfg.steps,
                                  _rng(cfg, *key), n, boost=_boost(cfg))


def _random_pairs(cfg, dom, count, key, min_delta=0.0):
    rng = _rng(cfg, *key)
    out = []
    while len(out) < count:
        pts, _ = dom.sample_uniform(rng, 2 * count)
        for x, y in zip(pts[0::2], pts[1::2]):
            if np.linalg.norm(x - y) < cfg.min_dist:
                continue
            if min_delta and min(dom.dist_to_complement(x), dom.dist_to_complement(y)) < min_delta:
                continue
            out.append((x, y))
            if len(out) == count:
                break
    return out


@experiment("kernel-symmetry", "p_hat(t, x, y) = p_hat(t, y, x) at random pairs")
def kernel_symmetry(cfg, res):
    law, dom = cfg.law(), cfg.make_domain()
    t = cfg.t[0] if cfg.t else 0.5
    n = cfg.n or 1_000_000
    k = cfg.k_sigma
    tab = Table("pairs", ("pair", "forward", "forward_se", "reverse", "reverse_se"),
                plot=dict(x="pair", y=["forward", "reverse"], err={"forward": "forward_se", "reverse": "reverse_se"},
                          kind="scatter", title=f"p_hat at t = {t:g}", ylabel="kernel"))
    for i, (x, y) in enumerate(_random_pairs(cfg, dom, cfg.pairs or 10, (998,))):
        fwd = _bridge(law, dom, t, x, y, cfg, n, (i, 0)).p_hat
        rev = _bridge(law, dom, t, y, x, cfg, n, (i, 1)).p_hat
        ok, diff, se = _within(fwd, rev, k)
        q = f"p_hat(x,y) - p_hat(y,x) at x=({x[0]:.4f},{x[1]:.4f}) y=({y[0]:.4f},{y[1]:.4f})"
        res.rows.append(ResultRow("kernel-symmetry", q, diff, se, n, f"|diff| <= {k:g} stderr", ok,
                                  h=t / cfg.steps, horizon=t, bias_note=fwd.bias_note))
        tab.rows.append([i, fwd.value, fwd.stderr, rev.value, rev.stderr])
    res.tables.append(tab)


SCALING_CONFIGS = (
    ((1.5, 0.0), (0.0, 1.5), 0.3),
    ((1.5, 0.0), (-1.5, 0.0), 0.2),
    ((1.2, 0.3), (1.6, -0.5), 0.1),
)


@experiment("kernel-scaling", "r^d p_rD(r^alpha t, rx, ry) = p_D(t, x, y)")
def kernel_scaling(cfg, res):
    law, dom = cfg.law(), cfg.make_domain()
    r = cfg.scale
    n = cfg.n or 500_000
    k = cfg.k_sigma
    if cfg.x and cfg.y:
        confs = ((cfg.x, cfg.y, cfg.t[0] if cfg.t else 0.3),)
    else:
        _require_annulus(cfg, dom)
        confs = SCALING_CONFIGS
    big = dom.scaled(r)
    tab = Table("scaling", ("config", "p_D", "p_D_se", "scaled", "scaled_se"),
                plot=dict(x="config", y=["p_D", "scaled"], err={"p_D": "p_D_se", "scaled": "scaled_se"},
                          kind="bar", title=f"kernel scaling at r = {r:g}", ylabel="kernel"))
    for i, (x, y, t) in enumerate(confs):
        x, y = np.asarray(x, float), np.asarray(y, float)
        base = _bridge(law, dom, t, x, y, cfg, n, (i, 0)).p_hat
        scaled = _bridge(law, big, r**law.alpha * t, r * x, r * y, cfg, n, (i, 1)).p_hat.scaled(r**law.d)
        ok, diff, se = _within(scaled, base, k)
        res.rows.append(ResultRow("kernel-scaling", f"r^d p_rD - p_D, config {i} (t = {t:g})", diff, se, n,
                                  f"|diff| <= {k:g} stderr", ok, h=t / cfg.steps, horizon=t,
                                  bias_note=base.bias_note))
        tab.rows.append([i, base.value, base.stderr, scaled.value, scaled.stderr])
    res.tables.append(tab)


@experiment("chapman-kolmogorov", "p_hat(t) = int p_hat(s) p_hat(t - s) on the grid chain")
def chapman_kolmogorov(cfg, res):
    law, dom = cfg.law(), cfg.make_domain()
    x = np.asarray(cfg.x or (1.5, 0.0), float)
    y = np.asarray(cfg.y or (0.0, 1.5), float)
    t, s = cfg.t[:2] if len(cfg.t) >= 2 else (0.4, 0.2)
    n = cfg.n or 2_000_000
    k = cfg.k_sigma
    direct = _bridge(law, dom, t, x, y, cfg, n, (0,))
    comp_hat, comp_kill = kernels.chapman_kolmogorov(law, dom, t, s, x, y, cfg.steps, _rng(cfg, 1), n,
                                                      boost=_boost(cfg))
    tab = Table("composition", ("kernel", "direct", "direct_se", "composed", "composed_se"),
                plot=dict(x="kernel", y=["direct", "composed"], err={"direct": "direct_se", "composed": "composed_se"},
                          kind="bar", title=f"Chapman-Kolmogorov, t = {t:g}, s = {s:g}", ylabel="kernel"))
    for name, a, b in (("p_hat", direct.p_hat, comp_hat), ("p_D", direct.p_killed, comp_kill)):
        ok, diff, se = _within(a, b, k)
        res.rows.append(ResultRow("chapman-kolmogorov", f"{name}(t) - composition through s", diff, se, n,
                                  f"|diff| <= {k:g} stderr", ok, h=t / cfg.steps, horizon=t,
                                  bias_note=b.bias_note))
        tab.rows.append([name, a.value, a.stderr, b.value, b.stderr])
    res.tables.append(tab)


@experiment("incomparability", "p_hat / p_D at a blocked pair as t -> 0")
def incomparability(cfg, res):
    law, dom = cfg.law(), cfg.make_domain()
    x = np.asarray(cfg.x or (1.5,) + (0.0,) * (dom.d - 1), float)
    y = np.asarray(cfg.y or (-1.5,) + (0.0,) * (dom.d - 1), float)
    ts = cfg.t or (0.1, 0.05, 0.025, 0.0125)
    n = cfg.n or 1_000_000
    k = cfg.k_sigma
    growth = cfg.min_growth or 2.0
    ratios = []
    tab = Table("ratio", ("t", "ratio", "stderr", "p_hat", "p_D"),
                plot=dict(x="t", y=["ratio"], err={"ratio": "stderr"}, logx=True, logy=True,
                          title="p_hat / p_D at a blocked pair", ylabel="ratio"))
    for i, t in enumerate(ts):
        b = _bridge(law, dom, t, x, y, cfg, n, (i,))
        ratios.append(b.ratio)
        res.rows.append(_est_row("incomparability-ratio", f"p_hat / p_D at t = {t:g}", b.ratio,
                                 h=t / cfg.steps, horizon=t))
        tab.rows.append([t, b.ratio.value, b.ratio.stderr, b.p_hat.value, b.p_killed.value])
    res.tables.append(tab)
    if dom.convex:
        for t, r in zip(ts, ratios):
            res.rows.append(ResultRow("convex-ratio-one", f"p_hat / p_D - 1 at t = {t:g}", r.value - 1, 0.0, r.n,
                                      "== 0 exactly", r.value == 1.0))
        return
    for (t0, a), (t1, b) in zip(zip(ts, ratios), zip(ts[1:], ratios[1:])):
        ok, diff, se = _within(a, b, k)
        res.rows.append(ResultRow("incomparability-decreasing", f"ratio(t = {t0:g}) - ratio(t = {t1:g})", diff, se,
                                  n, f"> {k:g} stderr", diff > k * se))
    drop = _ratio(ratios[0], ratios[-1])
    res.rows.append(_est_row("incomparability-drop", f"ratio(t = {ts[0]:g}) / ratio(t = {ts[-1]:g})", drop,
                             budget=f">= {growth:g}", passed=drop.value >= growth))


# ---------------------------------------------------------------------------
# intensities


@experiment("intensity-profile", "iota >= kappa and the boundary behaviour of iota - kappa")
def intensity_profile(cfg, res):
    law, dom = cfg.law(), cfg.make_domain()
    target = 1e-9
    pts, _ = dom.sample_uniform(_rng(cfg, 0), cfg.points)
    worst, bad = math.inf, 0
    for p in pts:
        v = intensities(law, dom, p, target)
        slack = v.iota - v.kappa + 10 * (v.iota_err + v.kappa_err) + 1e-12 * v.kappa
        bad += slack < 0
        worst = min(worst, (v.iota - v.kappa) / v.kappa)
    res.rows.append(ResultRow("iota-ge-kappa", f"points with iota < kappa (of {cfg.points})", float(bad), math.nan,
                              cfg.points, "== 0", bad == 0, bias_note=f"min (iota - kappa) / kappa = {worst:.3g}"))

    if cfg.x and cfg.y:
        b0, normal = np.asarray(cfg.x, float), np.asarray(cfg.y, float)
    else:
        b0, normal = _boundary_point(cfg, dom)
    deltas = np.asarray(cfg.delta or np.geomspace(1e-1, 1e-5, 17))
    prof = difference_profile(law, dom, b0, normal, deltas, target)

    mid = b0 + 0.5 * deltas[0] * normal / np.linalg.norm(normal)
    eps = 0.5 * dom.dist_to_complement(mid)
    mc = iota_monte_carlo(law, dom, mid, eps, _rng(cfg, 1), cfg.n or 1_000_000)
    quad = intensities(law, dom, mid, target).iota
    res.rows.append(ResultRow("iota-quadrature-vs-mc", "iota Monte Carlo - quadrature", mc.value - quad, mc.stderr,
                              mc.n, f"|diff| <= {cfg.k_sigma:g} stderr", abs(mc.value - quad) <= cfg.k_sigma * mc.stderr,
                              bias_note=mc.bias_note))

    rel = prof.diff / prof.kappa
    tab = Table("profile", ("delta", "kappa", "iota", "diff", "diff_err", "relative_gap"),
                plot=dict(x="delta", y=["kappa", "iota", "diff"], logx=True, logy=True,
                          title=f"intensities near the boundary, alpha = {law.alpha:g}", ylabel="intensity"))
    for row in zip(deltas, prof.kappa, prof.iota, prof.diff, prof.diff_err, rel):
        tab.rows.append([float(v) for v in row])
    res.tables.append(tab)
    if dom.convex:
        gap = float(np.max(np.abs(prof.diff) - 10 * prof.diff_err))
        res.rows.append(ResultRow("convex-equal", "max |iota - kappa| beyond quadrature error", max(gap, 0.0),
                                  math.nan, len(deltas), "== 0", gap <= 0))
        return
    order = np.argsort(-deltas)
    r_sorted = rel[order]
    steps = np.diff(r_sorted)
    res.rows.append(ResultRow("relative-gap-decreasing", "max increase of (iota - kappa) / kappa as delta decreases",
                              float(steps.max()), math.nan, len(deltas), "< 0", bool(np.all(steps < 0))))
    a = law.alpha
    if a > 1:
        window = deltas <= cfg.fit_below
        if window.sum() < 3:
            raise ConfigError("fit window (delta <= fit_below) needs at least three sweep points")
        sl = _slope(deltas[window], prof.diff[window])
        res.rows.append(ResultRow("gap-slope", f"log-log slope of iota - kappa for delta <= {cfg.fit_below:g}", sl,
                                  math.nan, int(window.sum()), f"{1 - a:g} +- {cfg.slope_tol:g}",
                                  abs(sl - (1 - a)) <= cfg.slope_tol))
        res.rows.append(ResultRow("gap-slope-full", "log-log slope of iota - kappa over the sweep",
                                  _slope(deltas, prof.diff), math.nan, len(deltas), "", None))
    elif a == 1:
        q = prof.diff / np.log(math.e + 1 / deltas)
        spread = float(q.max() / q.min())
        lim = cfg.max_ratio or 10.0
        res.rows.append(ResultRow("gap-log-template", "max / min of (iota - kappa) / log(e + 1/delta)", spread,
                                  math.nan, len(deltas), f"< {lim:g}", spread < lim))
    else:
        spread = float(prof.diff.max() / prof.diff.min())
        lim = cfg.max_ratio or 10.0
        res.rows.append(ResultRow("gap-bounded", "max / min of iota - kappa over the sweep", spread, math.nan,
                                  len(deltas), f"< {lim:g}", spread < lim))


def _slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def _boundary_point(cfg, dom):
    """Default sweep start on the boundary and the unit normal into D."""
    key = dom.name.split("(")[0]
    e1 = np.eye(dom.d)[0]
    if key == "annulus":
        return dom.shape.removed[0].radius * e1, e1
    if key == "harnack7":
        return np.array([2.5, 0.0]), np.array([0.0, 1.0])
    if key == "ball":
        return dom.shape.radius * e1, -e1
    raise ConfigError("intensity-profile needs x (boundary point) and y (normal into D) for this domain")


# ---------------------------------------------------------------------------
# forms


def _suite(cfg, dom):
    key = {"annulus(1.0,2.0)": "annulus", "harnack7": "harnack7", "ball": "ball"}.get(dom.name)
    if key is None:
        raise ConfigError(f"no built-in test-function suite for domain {cfg.domain!r}")
    sd, funcs = forms.suite(key)
    if sd != dom:
        raise ConfigError(f"no built-in test-function suite for domain {cfg.domain!r}")
    if dom.d != 2:
        raise ConfigError("the form suites live in d = 2")
    return funcs


def _form_reports(cfg):
    law, dom = cfg.law(), cfg.make_domain()
    spec = forms.QuadSpec(target_rel_error=cfg.quad_target)
    reps = [forms.evaluate_forms(law, f, spec) for f in _suite(cfg, dom)]
    tab = Table("forms", ("function", "E", "E_hat", "cross", "whole_space", "kappa_part", "iota_part",
                          "residual", "hardy_margin", "quadrature_error"),
                plot=dict(x="function", y=["E", "E_hat", "kappa_part"], kind="bar",
                          title=f"forms on {cfg.domain}, alpha = {law.alpha:g}", ylabel="energy"))
    for r in reps:
        tab.rows.append([r.tag, r.killed.total, r.shotdown.total, r.cross, r.whole_space, r.killed.killing_part,
                         r.shotdown.killing_part, r.residual, r.hardy_margin, r.killed.quadrature_error])
    return reps, tab


@experiment("form-identity", "E_hat[f] = E[f] + cross term on the test-function suite")
def form_identity(cfg, res):
    reps, tab = _form_reports(cfg)
    for r in reps:
        note = f"level {r.level}, quadrature error {r.killed.quadrature_error:.2g}"
        res.rows.append(ResultRow("form-identity", f"|E_hat - E - C| / E_hat ({r.tag})", r.residual, math.nan, 0,
                                  f"< {cfg.residual_tol:g}", r.residual < cfg.residual_tol, bias_note=note))
        gap = r.shotdown.total - r.killed.total
        res.rows.append(ResultRow("form-order", f"E_hat - E ({r.tag})", gap, r.killed.quadrature_error, 0,
                                  ">= -quadrature error", gap >= -r.killed.quadrature_error, bias_note=note))
        res.rows.append(ResultRow("cross-term-ratio", f"C / E ({r.tag})", r.cross_ratio, math.nan, 0, "", None))
    res.tables.append(tab)


@experiment("hardy", "E[f] >= int f^2 kappa_D on the test-function suite")
def hardy(cfg, res):
    reps, tab = _form_reports(cfg)
    for r in reps:
        err = r.killed.quadrature_error
        res.rows.append(ResultRow("hardy-margin", f"E - int f^2 kappa ({r.tag})", r.hardy_margin, err, 0,
                                  "> quadrature error", r.hardy_margin > err,
                                  bias_note=f"relative margin {r.hardy_margin / r.killed.total:.3g}"))
    res.tables.append(tab)


# ---------------------------------------------------------------------------
# Green functions


def _green_setup(cfg, law):
    h = cfg.h or 5e-3
    t_max = cfg.horizon or 4.0
    return h, (h / 50, t_max)


@experiment("green-ratio", "G_hat / GreenRef over random pairs, and the occupation identity")
def green_ratio(cfg, res):
    law, dom = cfg.law(), cfg.make_domain()
    n = cfg.n or 50_000
    h, t_range = _green_setup(cfg, law)
    lim = cfg.max_ratio or 20.0
    pairs = _random_pairs(cfg, dom, cfg.pairs or 50, (998,), cfg.min_delta)
    tab = Table("pairs", ("pair", "dx", "dy", "dist", "visible", "G_hat", "G_hat_se", "G_D", "reference",
                          "ratio", "ratio_se"),
                plot=dict(x="pair", y=["ratio"], err={"ratio": "ratio_se"}, kind="scatter", logy=True,
                          title="G_hat / GreenRef", ylabel="ratio"))
    ratios, killed = [], []
    for i, (x, y) in enumerate(pairs):
        g, gd = kernels.green_bridge(law, dom, x, y, h, t_range, _rng(cfg, i), n, boost=_boost(cfg),
                                     max_steps=cfg.max_steps)
        ref = kernels.green_ref(dom, law.alpha, x, y)
        ratios.append(g.value / ref.value)
        killed.append(gd.value / ref.value)
        vis = bool(dom.chord_in_domain(x, y))
        res.rows.append(ResultRow("green-pair-ratio", f"pair {i}: G_hat / GreenRef", ratios[-1],
                                  g.stderr / ref.value, n, "", None, h=h, horizon=t_range[1], bias_note=g.bias_note))
        tab.rows.append([i, ref.dx, ref.dy, float(np.linalg.norm(x - y)), int(vis), g.value, g.stderr, gd.value,
                         ref.value, ratios[-1], g.stderr / ref.value])
    res.tables.append(tab)
    ratios = np.array(ratios)
    ok = bool(np.all(np.isfinite(ratios) & (ratios > 0)))
    res.rows.append(ResultRow("green-positive", "min G_hat / GreenRef", float(ratios.min()), math.nan, n,
                              "finite and > 0", ok, h=h, horizon=t_range[1]))
    spread = float(ratios.max() / ratios.min()) if ok else math.inf
    res.rows.append(ResultRow("green-comparability", f"max / min G_hat / GreenRef over {len(pairs)} pairs", spread,
                              math.nan, n, f"< {lim:g}", spread < lim, h=h, horizon=t_range[1]))
    killed = np.array(killed)
    res.rows.append(ResultRow("green-killed-spread", "max / min G_D / GreenRef over the same pairs",
                              float(killed.max() / killed.min()), math.nan, n, "", None, h=h, horizon=t_range[1]))
    _occupation_identity(cfg, law, dom, res)


def _occupation_identity(cfg, law, dom, res):
    x0 = _preset_point(cfg, dom, {"annulus": (1.5, 0.0), "harnack7": (0.0, -0.5), "ball": (0.0, 0.0)})
    sch = SimScheme("grid", 1e-2, 0.1, 20.0)
    c, r = dom.bound()
    cells = kernels.CellGrid(tuple(np.linspace(ci - r, ci + r, cfg.cells + 1) for ci in c))
    n = 20_000
    counts, outside, total, steps_alive, hh = kernels.occupation_partition(law, dom, x0, sch, _rng(cfg, 999), n,
                                                                          cells)
    diff = abs(int(counts.sum()) + outside - steps_alive) + abs(total - steps_alive)
    res.rows.append(ResultRow("occupation-identity", "|partition sum - sum of sigma / h| (integer steps)", float(diff),
                              0.0, n, "== 0 exactly", diff == 0, **_meta(sch),
                              bias_note=f"mean sigma = {steps_alive * hh / n:.6g}"))


GREEN_SCALING_PAIRS = (((1.5, 0.0), (1.5, 0.4)), ((1.5, 0.0), (0.6, 1.3)))


@experiment("green-scaling", "G_hat_rD(rx, ry) = r^(alpha - d) G_hat_D(x, y)")
def green_scaling(cfg, res):
    law, dom = cfg.law(), cfg.make_domain()
    n = cfg.n or 100_000
    h, t_range = _green_setup(cfg, law)
    r = cfg.scale
    c = r**law.alpha
    k = cfg.k_sigma
    big = dom.scaled(r)
    pairs = ((cfg.x, cfg.y),) if cfg.x and cfg.y else GREEN_SCALING_PAIRS
    want = r ** (law.alpha - law.d)
    tab = Table("scaling", ("pair", "G_D_hat", "se", "G_rD_hat", "se_r", "ratio", "ratio_se", "target"),
                plot=dict(x="pair", y=["ratio", "target"], err={"ratio": "ratio_se"}, kind="scatter",
                          title=f"Green scaling at r = {r:g}", ylabel="ratio"))
    for i, (x, y) in enumerate(pairs):
        x, y = np.asarray(x, float), np.asarray(y, float)
        g, _ = kernels.green_bridge(law, dom, x, y, h, t_range, _rng(cfg, i, 0), n, max_steps=cfg.max_steps)
        gr, _ = kernels.green_bridge(law, big, r * x, r * y, h * c, (t_range[0] * c, t_range[1] * c),
                                     _rng(cfg, i, 1), n, max_steps=cfg.max_steps)
        q = _ratio(gr, g)
        ok = abs(q.value - want) <= k * q.stderr
        res.rows.append(_est_row("green-scaling", f"G_hat_rD / G_hat_D, pair {i} (target {want:.6g})", q,
                                 budget=f"|ratio - target| <= {k:g} stderr", passed=ok, h=h, horizon=t_range[1]))
        tab.rows.append([i, g.value, g.stderr, gr.value, gr.stderr, q.value, q.stderr, want])
    res.tables.append(tab)


# ---------------------------------------------------------------------------
# Ikeda-Watanabe


@experiment("iw-identity", "joint law of (sigma, X_sigma-, X_sigma) against the Levy-system integral")
def iw_identity(cfg, res):
    law, dom = cfg.law(), cfg.make_domain()
    _require_annulus(cfg, dom)
    x0 = np.asarray(cfg.x or (1.5, 0.0), float)
    t_max = cfg.t[0] if cfg.t else 0.5
    n = cfg.n or 500_000
    sch = _scheme(cfg, 1e-2, 0.1, t_max)
    target_c, target_r = np.array([-4.0, 0.0]), 1.0
    r_lo, r_hi, half = 1.0, 1.25, math.pi / 6
    n_r, n_a = 5, 6
    r_edges = np.linspace(r_lo, r_hi, n_r + 1)
    a_edges = np.linspace(-half, half, n_a + 1)
    rc = (r_edges[:-1] + r_edges[1:]) / 2
    ac = (a_edges[:-1] + a_edges[1:]) / 2
    centers = np.stack(np.meshgrid(rc, ac, indexing="ij"), -1).reshape(-1, 2)
    centers = np.stack([centers[:, 0] * np.cos(centers[:, 1]), centers[:, 0] * np.sin(centers[:, 1])], -1)
    cell_mass = nu_mass_ball(law, centers, target_c, target_r)

    def in_a(p):
        rad = np.linalg.norm(p, axis=1)
        ang = np.arctan2(p[:, 1], p[:, 0])
        return (rad > r_lo) & (rad < r_hi) & (np.abs(ang) < half)

    def run(rng, m):
        acc = np.zeros(m)

        def observer(idx, pts, dt, s_alive):
            inside = in_a(pts) & s_alive
            if inside.any():
                p = pts[inside]
                ri = np.minimum(np.searchsorted(r_edges, np.linalg.norm(p, axis=1)) - 1, n_r - 1)
                ai = np.minimum(np.searchsorted(a_edges, np.arctan2(p[:, 1], p[:, 0])) - 1, n_a - 1)
                acc[idx[inside]] += dt[inside] * cell_mass[ri * n_a + ai]

        b = simulate_batch(law, dom, x0, sch, rng, m, track_tau=False, observer=observer)
        hit = np.isfinite(b.sigma) & (b.sigma <= t_max)
        pre = np.where(hit[:, None], b.x_pre, 0.0)
        land = np.where(hit[:, None], b.x_land, 0.0)
        hit &= in_a(pre) & (np.linalg.norm(land - target_c, axis=1) < target_r)
        return hit.astype(float), acc

    parts = map_chunks(run, n, child_seed(_rng(cfg, 0)))
    lhs = Estimate.from_samples(np.concatenate([p[0] for p in parts]), "simulated joint probability")
    rhs = Estimate.from_samples(np.concatenate([p[1] for p in parts]), f"{n_r}x{n_a} cell histogram quadrature")
    q = lhs.value / rhs.value if rhs.value > 0 else math.inf
    band = cfg.band
    res.rows.append(_est_row("iw-identity", "P(sigma in I, X_sigma- in A, X_sigma in B)", lhs, **_meta(sch)))
    res.rows.append(_est_row("iw-identity", "E int_I 1_A(X_s) nu(X_s, B) ds (histogram quadrature)", rhs,
                             **_meta(sch)))
    ratio = _ratio(lhs, rhs) if lhs.value > 0 else Estimate(0.0, math.nan, n)
    res.rows.append(_est_row("iw-identity", "simulated / quadrature", ratio, budget=f"within factor {band:g}",
                             passed=bool(1 / band <= q <= band), **_meta(sch)))
    tab = Table("iw", ("side", "value", "stderr"),
                plot=dict(x="side", y=["value"], err={"value": "stderr"}, kind="bar",
                          title="Ikeda-Watanabe check", ylabel="probability"))
    tab.rows += [["simulated", lhs.value, lhs.stderr], ["quadrature", rhs.value, rhs.stderr]]
    res.tables.append(tab)


# ---------------------------------------------------------------------------
# Harnack


HARNACK_CHAIN = ((1.5, 0.0), (1.06, 1.06), (0.0, 1.5))


def _ball_points(center, radius):
    c = np.asarray(center, float)
    ring = [c + 0.9 * radius * np.array([math.cos(a), math.sin(a)]) for a in (0.0, math.pi)]
    return [c] + ring


@experiment("harnack-lower", "Harnack lower bound along a chain of balls in the annulus")
def harnack_lower(cfg, res):
    law, dom = cfg.law(), cfg.make_domain()
    _require_annulus(cfg, dom)
    n = cfg.n or 10_000
    rho = 0.3
    sch = _scheme(cfg, 1e-2, 0.1, 5.0)
    tc, tr = np.array([2.6, 0.0]), 0.5
    k = cfg.k_sigma

    def u(z, key):
        def run(rng, m):
            acc = np.zeros(m)

            def observer(idx, pts, dt, s_alive):
                acc[idx] += dt * s_alive * nu_mass_ball(law, pts, tc, tr)

            simulate_batch(law, dom, z, sch, rng, m, track_tau=False, observer=observer)
            return acc

        vals = np.concatenate(map_chunks(run, n, child_seed(_rng(cfg, *key))))
        return Estimate.from_samples(vals, "Levy-system occupation")

    tab = Table("harnack_lower", ("eps", "inf_start", "inf_start_se", "inf_far", "inf_far_se", "c"),
                plot=dict(x="eps", y=["inf_start", "inf_far"], err={"inf_start": "inf_start_se", "inf_far": "inf_far_se"},
                          kind="scatter", title="Harnack lower bound", ylabel="u"))
    for j, eps in enumerate(cfg.eps or (0.25, 0.5)):
        start = [u(p, (j, 0, i)) for i, p in enumerate(_ball_points(HARNACK_CHAIN[0], eps * rho))]
        far = [u(p, (j, 1, i)) for i, p in enumerate(_ball_points(HARNACK_CHAIN[-1], (1 - eps) * rho))]
        lo_start = min(start, key=lambda e: e.value)
        lo_far = min(far, key=lambda e: e.value)
        c = _ratio(lo_far, lo_start)
        res.rows.append(_est_row("harnack-lower", f"inf_far u / inf_start u at eps = {eps:g}", c,
                                 budget=f"> 0 at {k:g} stderr", passed=bool(c.value - k * c.stderr > 0),
                                 **_meta(sch)))
        tab.rows.append([eps, lo_start.value, lo_start.stderr, lo_far.value, lo_far.stderr, c.value])
    res.tables.append(tab)


@experiment("harnack-failure", "u_eps(0) / u_eps(x) grows as the pinch closes")
def harnack_failure(cfg, res):
    law, dom = cfg.law(), cfg.make_domain()
    if dom.name != "harnack7":
        raise ConfigError("harnack-failure runs on the harnack7 domain")
    n = cfg.n or 100_000
    sch = _scheme(cfg, 1e-2, 0.1, 50.0)
    eps_list = cfg.eps or (0.2, 0.1, 0.05)
    x = np.asarray(cfg.x or (0.0, -0.5), float)
    k = cfg.k_sigma
    growth = cfg.min_growth or 1.5
    from .geometry import ball as make_ball

    bdom = make_ball((0.0, 0.0), 1.0)
    ratios = []
    tab = Table("harnack_failure", ("eps", "u_center", "u_center_se", "u_x", "u_x_se", "ratio", "ratio_se"),
                plot=dict(x="eps", y=["ratio"], err={"ratio": "ratio_se"}, logx=True, logy=True,
                          title="u_eps(0) / u_eps(x)", ylabel="ratio"))
    for j, eps in enumerate(eps_list):
        target = kernels.harnack7_target(eps)
        u0 = kernels.harmonic_measure_shotdown(law, bdom, dom, np.zeros(2), target, sch, _rng(cfg, j, 0), n)
        ux = kernels.harmonic_measure_shotdown(law, bdom, dom, x, target, sch, _rng(cfg, j, 1), n)
        q = _ratio(u0, ux)
        ratios.append(q)
        res.rows.append(_est_row("harnack-ratio", f"u_eps(0) / u_eps(x) at eps = {eps:g}", q, **_meta(sch)))
        tab.rows.append([eps, u0.value, u0.stderr, ux.value, ux.stderr, q.value, q.stderr])
    res.tables.append(tab)
    for (e0, a), (e1, b) in zip(zip(eps_list, ratios), zip(eps_list[1:], ratios[1:])):
        ok, diff, se = _within(b, a, k)
        res.rows.append(ResultRow("harnack-increasing", f"ratio(eps = {e1:g}) - ratio(eps = {e0:g})", diff, se, n,
                                  f"> {k:g} stderr", diff > k * se, **_meta(sch)))
    g = _ratio(ratios[-1], ratios[0])
    res.rows.append(_est_row("harnack-growth", f"ratio(eps = {eps_list[-1]:g}) / ratio(eps = {eps_list[0]:g})", g,
                             budget=f">= {growth:g}", passed=g.value >= growth, **_meta(sch)))
