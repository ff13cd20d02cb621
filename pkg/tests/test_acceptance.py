"""Acceptance checks.  Each test records one PASS/FAIL line; run this file
directly or through pytest to see them in the terminal summary."""

import math
import os
import platform
import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from swarmctl.cli import main as cli_main
from swarmctl.config import ExperimentConfig
from swarmctl.dynamics import (DynamicsMatrix, LearnerConfig, Observation, combine, estimate_resonance,
                               fit_global, update_local)
from swarmctl.experiment import fit_records, run_episode
from swarmctl.geometry import GridPosition, LettersSpec, TargetPath, goal_reached, path_advance
from swarmctl.gridsearch import FRAMES_PER_COMBO, collect, enumerate_grid
from swarmctl.mt19937 import MT19937
from swarmctl.navigator import Outcome, choose_pzt
from swarmctl.plant import PlantConfig, field
from swarmctl.vision import VisionPipeline, compress, render_frame
from swarmctl.vision.corpus import make_corpus
from swarmctl.vision.filters import blur, otsu_threshold, threshold
from swarmctl.vision.tracker import init_tracker, track

SEEDS = range(1, 11)
PLANTED = (2.0, 2.0, 2.225, 2.0)


def record(n, ok, detail, seconds=None):
    tag = "PASS" if ok else "FAIL"
    if seconds is not None:
        detail = f"{detail} [{seconds:.1f} s]"
    ACCEPTANCE_LINES[n] = f"C{n:<2d} {tag}: {detail}"
    print(ACCEPTANCE_LINES[n])


def test_c01_ema_closed_form():
    t0 = time.perf_counter()
    worst = 0.0
    for alpha, q0, v, n in ((0.05, 3.0, 10.0, 50), (0.3, -2.0, 7.5, 20), (0.9, 100.0, -1.0, 5), (0.01, 0.0, 2.0, 200)):
        q = DynamicsMatrix(np.full((4, 4, 2, 4), q0))
        hist = [Observation(GridPosition(1, 2), 3, (v, -v))]
        for _ in range(n):
            q = update_local(q, hist, alpha, inplace=True)
        expect = v + (1 - alpha) ** n * (q0 - v)
        worst = max(worst, abs(q.values[2, 1, 0, 2] - expect) / max(abs(expect), 1e-300))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and dt < 1
    record(1, ok, f"max relative deviation {worst:.2e}", dt)
    assert ok


def test_c02_blend_endpoints():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    g = DynamicsMatrix(rng.normal(size=(300, 300, 2, 4)))
    loc = DynamicsMatrix(rng.normal(size=(300, 300, 2, 4)))
    exact = (np.array_equal(combine(g, loc, 1.0).values, g.values)
             and np.array_equal(combine(g, loc, 0.0).values, loc.values))
    mid = combine(DynamicsMatrix(np.full((2, 2, 2, 4), 2.0)), DynamicsMatrix(np.full((2, 2, 2, 4), 4.0)), 0.5)
    dt = time.perf_counter() - t0
    ok = exact and np.all(mid.values == 3.0) and dt < 1
    record(2, ok, f"endpoints bit-exact {exact}, midpoint {float(mid.values[0, 0, 0, 0])}", dt)
    assert ok


def test_c03_policy_oracle():
    rng = np.random.default_rng(3)
    qs = [DynamicsMatrix(rng.normal(scale=40, size=(300, 300, 2, 4))) for _ in range(2)]
    # a few coarse matrices so that ties occur
    qs.append(DynamicsMatrix(rng.integers(-2, 3, size=(300, 300, 2, 4)).astype(float) * 30))
    t0 = time.perf_counter()
    bad = 0
    for i in range(1000):
        q = qs[i % 3]
        ps = GridPosition(*rng.uniform(0, 299, 2))
        pt = GridPosition(*rng.uniform(0, 299, 2))
        dt_c = float(rng.choice([1 / 33, 0.25, 1.0]))
        ix, iy = int(np.clip(np.rint(ps.x), 0, 299)), int(np.clip(np.rint(ps.y), 0, 299))
        d = [(pt.x - (ps.x + q.values[iy, ix, 0, j] * dt_c)) ** 2 + (pt.y - (ps.y + q.values[iy, ix, 1, j] * dt_c)) ** 2
             for j in range(4)]
        if choose_pzt(q, ps, pt, dt_c) != int(np.argmin(d)) + 1:
            bad += 1
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 1
    record(3, ok, f"{1000 - bad}/1000 instances agree with brute force", dt)
    assert ok


def test_c04_goal_condition():
    t0 = time.perf_counter()
    p = GridPosition(10.0, 10.0)
    accept = goal_reached(GridPosition(11.0, 12.0), p, 5.0)
    reject = not goal_reached(GridPosition(11.0, 12.0 + 1e-9), p, 5.0)
    wps = tuple(GridPosition(x, 0.0) for x in (0.0, 20.0, 40.0, 60.0))
    path = TargetPath(wps, delta=5.0)
    # visits W2, W1, W3, W0, W1, W2, W3
    cursors = []
    for x in (40.0, 20.0, 60.0, 0.0, 20.0, 40.0, 60.0):
        path = path_advance(path, GridPosition(x, 0.0))
        cursors.append(path.cursor)
    dt = time.perf_counter() - t0
    sequential = cursors == [0, 0, 0, 1, 2, 3, 4]
    ok = accept and reject and sequential and dt < 1
    record(4, ok, f"d2=5 accepted {accept}, 5+eps rejected {reject}, cursor trace {cursors}", dt)
    assert ok


def test_c05_resonance_recovery():
    t0 = time.perf_counter()
    hits = []
    for s in SEEDS:
        cfg = ExperimentConfig(seed=s)
        rec = collect(enumerate_grid(), cfg.effective_plant(), s)
        est = [estimate_resonance(rec, k) for k in (1, 2, 3, 4)]
        hits.append(all(abs(e - f) <= 0.025 + 1e-9 for e, f in zip(est, PLANTED)))
    dt = time.perf_counter() - t0
    ok = sum(hits) >= 9 and dt < 120
    record(5, ok, f"all four f0 within one step in {sum(hits)}/10 seeds", dt)
    assert ok


@pytest.fixture(scope="module")
def zero_noise_sweep():
    plant = replace(ExperimentConfig(seed=1).effective_plant(), noise_sigma_cells=0.0)
    rec = collect(enumerate_grid(), plant, 1)
    return plant, rec


def _mean_interior_cosine(q, plant, times):
    idx = np.arange(20, 280)
    X, Y = np.meshgrid(idx.astype(float), idx.astype(float))
    out = []
    for k in (1, 2, 3, 4):
        gx, gy = np.zeros(X.shape), np.zeros(X.shape)
        for t in times:
            fx, fy = field(plant, k, X, Y, np.full(X.shape, float(t)))
            gx += fx
            gy += fy
        qx = q.values[20:280, 20:280, 0, k - 1]
        qy = q.values[20:280, 20:280, 1, k - 1]
        out.append(np.mean((qx * gx + qy * gy) / (np.hypot(qx, qy) * np.hypot(gx, gy))))
    return float(np.mean(out))


def test_c06_global_fit(zero_noise_sweep):
    t0 = time.perf_counter()
    plant, rec = zero_noise_sweep
    q, _, _ = fit_records(rec, LearnerConfig())
    # The field drifts during the sweep; the fit sees it averaged over the sweep.
    sweep_end = int(np.max(rec["combo_id"] * FRAMES_PER_COMBO + rec["frame_idx"]))
    cos_avg = _mean_interior_cosine(q, plant, np.linspace(0, sweep_end, 64))
    cos_t0 = _mean_interior_cosine(q, plant, [0])
    A = np.array([[0.2, -0.1], [0.05, 0.15]])
    b = np.array([3.0, -4.0])
    xy = np.random.default_rng(6).uniform(0, 299, size=(60_000, 2))
    samples = {k: (xy, xy @ A.T + b * k) for k in (1, 2, 3, 4)}
    qa, _ = fit_global(samples, LearnerConfig(), 300)
    gy, gx = np.mgrid[0:300, 0:300].astype(float)
    worst = 0.0
    for k in (1, 2, 3, 4):
        tx = A[0, 0] * gx + A[0, 1] * gy + b[0] * k
        ty = A[1, 0] * gx + A[1, 1] * gy + b[1] * k
        worst = max(worst, float(np.max(np.abs(qa.values[..., 0, k - 1] - tx))),
                    float(np.max(np.abs(qa.values[..., 1, k - 1] - ty))))
    dt = time.perf_counter() - t0
    ok = cos_avg >= 0.9 and worst <= 1e-6 and dt < 300
    record(6, ok, f"interior cosine {cos_avg:.4f} vs sweep-averaged field ({cos_t0:.4f} vs t=0 field); "
                  f"affine max error {worst:.1e} cells/s", dt)
    assert ok


def test_c07_voltage_linearity(zero_noise_sweep):
    t0 = time.perf_counter()
    _, rec = zero_noise_sweep
    r2 = []
    for k in (1, 2, 3, 4):
        volts = np.unique(rec["v_pp"])
        means = []
        for v in volts:
            s = rec[(rec["k"] == k) & (rec["v_pp"] == v)]
            means.append(float(np.mean(np.hypot(s["dx_dt"], s["dy_dt"]))))
        r2.append(float(np.corrcoef(volts, means)[0, 1] ** 2))
    dt = time.perf_counter() - t0
    ok = min(r2) >= 0.999 and dt < 60
    record(7, ok, "R^2 per k " + ", ".join(f"{r:.5f}" for r in r2), dt)
    assert ok


@pytest.fixture(scope="module")
def circle_runs(sweep_seed1):
    q = sweep_seed1[1]
    t0 = time.perf_counter()
    runs = {s: run_episode(ExperimentConfig(seed=s), q) for s in SEEDS}
    return runs, time.perf_counter() - t0


def test_c08_circle_navigation(circle_runs):
    runs, dt = circle_runs
    ok_seeds = [s for s, r in runs.items() if r.outcome is Outcome.SUCCESS]
    steps = [len(r.log) for r in runs.values() if r.outcome is Outcome.SUCCESS]
    ok = len(ok_seeds) >= 9 and all(n <= 5000 for n in steps) and dt < 120
    record(8, ok, f"{len(ok_seeds)}/10 seeds complete 3 laps, {min(steps)}-{max(steps)} steps", dt)
    assert ok


def test_c09_local_vs_global(sweep_seed1):
    q = sweep_seed1[1]
    t0 = time.perf_counter()
    out = {}
    for beta in (1.0, 0.5):
        out[beta] = [run_episode(ExperimentConfig(seed=s, disturb=True, learner=LearnerConfig(beta=beta)), q).outcome
                     for s in SEEDS]
    dt = time.perf_counter() - t0
    stuck = sum(o is Outcome.STUCK for o in out[1.0])
    budget = sum(o is Outcome.BUDGET_EXCEEDED for o in out[1.0])
    success = sum(o is Outcome.SUCCESS for o in out[0.5])
    ok = stuck >= 5 and success >= 9 and dt < 300
    record(9, ok, f"beta=1: {stuck}/10 stuck ({budget} over budget); beta=0.5: {success}/10 succeed", dt)
    assert ok


def test_c10_error_curves(circle_runs):
    runs, _ = circle_runs
    t0 = time.perf_counter()
    local, glob = [], []
    for r in runs.values():
        if r.outcome is not Outcome.SUCCESS:
            continue
        cur = r.log.column("cursor")
        first, last = cur < 36, cur >= 72
        el, eg = r.log.column("err_local"), r.log.column("err_global")
        local.append(el[last].mean() / el[first].mean())
        glob.append(eg[last].mean() / eg[first].mean())
    dt = time.perf_counter() - t0
    ok = bool(local) and max(local) <= 0.5 and max(abs(g - 1) for g in glob) < 0.2
    record(10, ok, f"{len(local)} runs; local last/first lap {min(local):.2f}-{max(local):.2f}, "
                   f"global {min(glob):.2f}-{max(glob):.2f}", dt)
    assert ok


def test_c11_letter_paths(q_file, tmp_path):
    t0 = time.perf_counter()
    good = 0
    for s in SEEDS:
        out = tmp_path / f"eth{s}"
        code = cli_main(["run", "--q", str(q_file), "--path", "letters:ETH", "--seed", str(s), "--out", str(out)])
        good += code == 0 and (out / "trajectory.svg").stat().st_size > 0
    dt = time.perf_counter() - t0
    ok = good >= 8 and dt < 180
    record(11, ok, f"letters:ETH completed with SVG in {good}/10 seeds", dt)
    assert ok


def test_c12_vision_accuracy():
    t0 = time.perf_counter()
    scenes = make_corpus(1)
    rng = np.random.Generator(np.random.MT19937(1))
    frames = [compress(render_frame(s, rng)) for s in scenes]
    pipe = VisionPipeline.calibrate(frames[:10])
    errors, wrong, missing, detects = [], 0, 0, 0
    for scene, f in zip(scenes, frames):
        d = pipe.process_lo(f)
        if d is None:
            missing += 1
            continue
        detects += d.source == "detect"
        sp = scene.swarm.position
        e = math.hypot(d.x - sp.x, d.y - sp.y)
        errors.append(e)
        if any(math.hypot(d.x - c.position.x, d.y - c.position.y) < e for c in scene.contaminants):
            wrong += 1
    n_cont = len(scenes[0].contaminants)
    dt = time.perf_counter() - t0
    ok = missing == 0 and wrong == 0 and max(errors) <= 2.0 and dt < 60
    record(12, ok, f"{len(scenes)} frames, {n_cont} contaminants, max error {max(errors):.2f} cells, "
                   f"{wrong} contaminant picks, {missing} misses, {detects} full detections", dt)
    assert ok


def test_c13_vision_throughput():
    scenes = make_corpus(2)
    rng = np.random.Generator(np.random.MT19937(2))
    hi = [render_frame(s, rng) for s in scenes[:60]]
    t_thr = otsu_threshold(compress(hi[0]))
    first = blur(threshold(compress(hi[0]), t_thr))
    p = scenes[0].swarm.position
    ts = init_tracker(first, GridPosition(p.x, p.y), 20)
    t0 = time.perf_counter()
    for f in hi:
        ts = track(ts, blur(threshold(compress(f), t_thr)))
    fps = len(hi) / (time.perf_counter() - t0)
    machine = f"{platform.machine()}, {os.cpu_count()} CPUs, Python {platform.python_version()}"
    record(13, fps >= 50, f"{fps:.0f} frames/s for compress+threshold+blur+track ({machine}); soft gate")


def _file_bytes(paths):
    return {p.name: p.read_bytes() for p in paths}


def test_c14_determinism(tmp_path):
    t0 = time.perf_counter()
    outs = []
    for rep in ("a", "b"):
        d = tmp_path / rep
        assert cli_main(["collect", "--seed", "4", "--out", str(d / "d.csv")]) == 0
        assert cli_main(["fit", str(d / "d.csv"), "--out", str(d / "q.qdyn")]) == 0
        code = cli_main(["run", "--q", str(d / "q.qdyn"), "--seed", "4", "--out", str(d / "run")])
        assert code in (0, 3, 4)
        outs.append(_file_bytes(p for p in sorted(d.rglob("*")) if p.is_file()))
    same = outs[0] == outs[1]
    dt = time.perf_counter() - t0
    record(14, same, f"{len(outs[0])} output files byte-identical across reruns: {sorted(outs[0])}", dt)
    assert same


def _reference_mt(seed, n):
    """Plain-integer Mersenne Twister, written independently of the package."""
    mt = [0] * 624
    mt[0] = seed
    for i in range(1, 624):
        mt[i] = (1812433253 * (mt[i - 1] ^ (mt[i - 1] >> 30)) + i) & 0xFFFFFFFF
    out, idx = [], 624
    for _ in range(n):
        if idx == 624:
            for i in range(624):
                y = (mt[i] & 0x80000000) | (mt[(i + 1) % 624] & 0x7FFFFFFF)
                mt[i] = mt[(i + 397) % 624] ^ (y >> 1) ^ (0x9908B0DF if y & 1 else 0)
            idx = 0
        y = mt[idx]
        idx += 1
        y ^= y >> 11
        y ^= (y << 7) & 0x9D2C5680
        y ^= (y << 15) & 0xEFC60000
        y ^= y >> 18
        out.append(y)
    return out


def test_c15_mt19937_conformance():
    t0 = time.perf_counter()
    ours = [int(v) for v in MT19937(5489).uint32(1000)]
    ref = _reference_mt(5489, 1000)
    numpy_ref = np.random.RandomState(5489).randint(0, 2**32, size=1000, dtype=np.uint64).tolist()
    ok = ours == ref == numpy_ref and ours[0] == 3499211612
    dt = time.perf_counter() - t0
    record(15, ok, f"first 1000 draws match plain reference and numpy RandomState (first {ours[0]})", dt)
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
