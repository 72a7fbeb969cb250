import io
import math

import numpy as np
import pytest

from shotdown import SimScheme, StableLaw, annulus, simulate, simulate_batch
from shotdown.geometry import ball, harnack7
from shotdown.parallel import map_chunks
from shotdown.rng import stream
from shotdown.sim import CHORD, EXIT, PathBatch, SimError, read_dump, survival_probability, write_dump


@pytest.mark.parametrize("mode", ["grid", "jump-adapted"])
@pytest.mark.parametrize("alpha", [0.5, 1.5])
def test_sigma_never_exceeds_tau(ann, mode, alpha):
    law = StableLaw(2, alpha)
    sch = SimScheme(mode, 1e-2, 0.2, 1.0)
    b = simulate_batch(law, ann, (1.5, 0.0), sch, stream(1), 3000)
    tau = np.where(np.isnan(b.tau), np.inf, b.tau)
    assert np.all(b.sigma <= tau)
    assert np.any(b.sigma < tau)


def test_convex_collapse(disc, cauchy2):
    b = simulate_batch(cauchy2, disc, (0.2, 0.1), SimScheme("jump-adapted", 1e-2, 0.1, 5.0), stream(2), 3000)
    assert np.array_equal(b.sigma, b.tau)
    assert np.all(b.killed_by[np.isfinite(b.sigma)] == EXIT)


def test_kill_records(ann, cauchy2):
    b = simulate_batch(cauchy2, ann, (1.5, 0.0), SimScheme("jump-adapted", 1e-2, 0.2, 1.0), stream(3), 3000,
                       track_tau=False)
    k = np.isfinite(b.sigma)
    assert np.all(ann.contains(b.x_pre[k]))
    assert not np.any(ann.chord_in_domain(b.x_pre[k], b.x_land[k]))
    chord = b.killed_by == CHORD
    assert np.all(ann.contains(b.x_land[chord]))
    # shot down but landed inside D: tau is not observed
    assert np.all(np.isnan(b.tau[chord]))


def test_exit_record_for_single_path(ann, cauchy2):
    rec = simulate(cauchy2, ann, (1.5, 0.0), SimScheme("jump-adapted", 1e-2, 0.2, 20.0), stream(4))
    assert rec.killed_by in ("exit", "chord")
    assert rec.sigma <= rec.tau or math.isnan(rec.tau)
    times = [t for t, _ in rec.skeleton]
    assert times == sorted(times) and times[0] == 0.0


def test_chunked_runs_are_thread_independent(ann, cauchy2):
    sch = SimScheme("jump-adapted", 1e-2, 0.2, 0.5)

    def run(threads):
        parts = map_chunks(lambda r, m: simulate_batch(cauchy2, ann, (1.5, 0.0), sch, r, m), 4000, 99,
                           chunk=1000, threads=threads)
        return PathBatch.concat(parts)

    a, b = run(1), run(3)
    assert np.array_equal(a.sigma, b.sigma)
    assert np.array_equal(a.x_land, b.x_land, equal_nan=True)


def test_scaled_process_has_scaled_times(ann):
    law = StableLaw(2, 1.2)
    sch = SimScheme("grid", 1e-2, 0.2, 1.0)
    r = 2.0
    a = simulate_batch(law, ann, (1.5, 0.0), sch, stream(5), 20_000, track_tau=False)
    b = simulate_batch(law, ann.scaled(r), (3.0, 0.0), sch.scaled(r, 1.2), stream(6), 20_000, track_tau=False)
    pa = np.mean(a.sigma <= 0.5)
    pb = np.mean(b.sigma <= 0.5 * r**1.2)
    assert abs(pa - pb) < 4 * math.sqrt(2 * pa * (1 - pa) / 20_000)


def test_survival_probability(ann, cauchy2):
    sch = SimScheme("jump-adapted", 1e-2, 0.2, 1.0)
    e = survival_probability(cauchy2, ann, (1.5, 0.0), 0.5, sch, stream(7), 2000)
    assert 0 < e.value < 1
    with pytest.raises(SimError):
        survival_probability(cauchy2, ann, (1.5, 0.0), 2.0, sch, stream(7), 10)


def test_dump_round_trip(ann, cauchy2):
    sch = SimScheme("grid", 1e-2, 0.2, 0.5)
    b = simulate_batch(cauchy2, ann, (1.5, 0.0), sch, stream(8), 50)
    buf = io.BytesIO()
    write_dump(buf, cauchy2, sch, b)
    buf.seek(0)
    meta, rec = read_dump(buf)
    assert meta["mode"] == "grid" and meta["alpha"] == 1.0 and meta["d"] == 2
    assert np.array_equal(rec["sigma"], b.sigma)
    assert np.array_equal(rec["x_land"], b.x_land, equal_nan=True)


def test_bad_start(ann, cauchy2):
    with pytest.raises(SimError):
        simulate_batch(cauchy2, ann, (0.5, 0.0), SimScheme(), stream(0), 10)
    with pytest.raises(SimError):
        SimScheme("euler", 1e-2, 0.1, 1.0)


def test_pinched_domain_runs(pinched):
    law = StableLaw(2, 0.5)
    b = simulate_batch(law, pinched, (0.0, -0.5), SimScheme("jump-adapted", 1e-2, 0.5, 1.0), stream(9), 500)
    tau = np.where(np.isnan(b.tau), np.inf, b.tau)
    assert np.all(b.sigma <= tau)
