"""Acceptance criteria, one test each.  Every test prints a PASS/FAIL/WARN line."""
import subprocess
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oracles import dense_blend_solve, sparse_blend_solve
from panodepth import io
from panodepth.blending import (BlendSchedule, LaplacianTarget, assemble_targets, jacobi_level_solve,
                                multiscale_blend)
from panodepth.errors import FormatError
from panodepth.grid import EquirectGrid
from panodepth.io import PipelineConfig
from panodepth.metrics import evaluate
from panodepth.partitions import Partition, default_grid
from panodepth.pipeline import cmd_stitch, cmd_synth, register_partials, stitch_partials
from panodepth.registration import RegistrationPoly, SamplePairs, fit_poly, sample_pairs
from panodepth.synthetic import BoxRoom, render_room_panorama
from test_io import MALFORMED

pytestmark = pytest.mark.slow
HERE = Path(__file__).parent


def report(name, ok, detail, soft=False):
    status = "PASS" if ok else ("WARN" if soft else "FAIL")
    line = f"{status} {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    if soft and not ok:
        warnings.warn(line)
    return ok


def run_suite(path, *args):
    start = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           str(HERE / path), *args], capture_output=True, text=True, cwd=HERE.parent)
    return proc.returncode, time.perf_counter() - start, proc.stdout.strip().splitlines()[-1]


def rms(a, b):
    return float(np.sqrt(np.mean((np.asarray(a) - np.asarray(b)) ** 2)))


def test_1_geometry_suite():
    code, secs, tail = run_suite("test_geometry.py", "-k",
                                 "round_trip or covers or tight or upper_edge or corner_rule or touches")
    assert report("1 geometry suite", code == 0 and secs < 10, f"{tail}; {secs:.1f} s (limit 10 s)")


@pytest.fixture(scope="module")
def room_512():
    return render_room_panorama(BoxRoom(), 512, 256)


def test_2_registration_exactness(room_512):
    rng = np.random.default_rng(2)
    p = Partition(72, 144, 60, 120)
    worst_coef = worst_res = 0.0
    for degree in (1, 2, 3):
        for _ in range(10):
            a = rng.uniform(-1e-3, 1e-3) if degree == 3 else 0.0
            b = rng.uniform(-1e-2, 1e-2) if degree >= 2 else 0.0
            g = RegistrationPoly(a, b, rng.uniform(-0.5, 0.5), rng.uniform(-1, 1), degree)
            # lattice depths of a real partition; bilinear lookup does not commute with g,
            # so g is applied to the sampled values
            s = sample_pairs(room_512, room_512, p)
            s = SamplePairs(s.x, g(s.x))
            fit = fit_poly(s, degree)
            worst_coef = max(worst_coef, np.max(np.abs(np.subtract(fit.coefficients, g.coefficients))))
            worst_res = max(worst_res, np.max(np.abs(fit(s.x) - s.X)))
    ok = worst_coef <= 1e-9 and worst_res <= 1e-6
    assert report("2 registration exactness", ok,
                  f"max coefficient error {worst_coef:.2e} (<= 1e-9), residual {worst_res:.2e} (<= 1e-6)")


def small_instance(seed):
    rng = np.random.default_rng(seed)
    h, w = rng.integers(6, 17, 2)
    X = 5 + rng.random((h, w))
    if seed % 2:
        X[rng.random((h, w)) < 0.1] = np.nan
    L = 0.1 * rng.normal(size=(h, w))
    ref, tgt = EquirectGrid.from_array(X), EquirectGrid.from_array(L)
    return ref, LaplacianTarget(tgt, tgt.valid.astype(int))


@pytest.mark.parametrize("gamma", [1e-2, 1e-4])
def test_3_solver_oracle(gamma):
    worst, iters = 0.0, []
    for seed in range(20):
        ref, tgt = small_instance(seed)
        x, used, _ = jacobi_level_solve(tgt, ref, ref, gamma, 0.5, 20_000_000, 1e-12)
        sol, _ = dense_blend_solve(ref.filled(0.0), tgt.values.filled(0.0), tgt.values.valid,
                                   ref.valid, gamma)
        worst = max(worst, rms(x.values[ref.valid], sol))
        iters.append(used)
    assert report(f"3 solver oracle gamma={gamma:g}", worst <= 1e-5,
                  f"20 instances, worst RMS {worst:.2e} (<= 1e-5), sweeps up to {max(iters)}")


@pytest.mark.parametrize("W,H", [(512, 256), (2048, 1024)])
def test_4_fixed_point(W, H, tmp_path):
    gt, partials, _ = cmd_synth(tmp_path, width=W, height=H, identity=True)
    depth, _ = stitch_partials(partials, gt, PipelineConfig())
    err = rms(depth.values, gt.values)
    assert report(f"4 fixed point {W}x{H}", err <= 1e-4, f"RMS {err:.2e} (<= 1e-4)")


def recovery(tmp_path, noise, degraded):
    gt, partials, ref = cmd_synth(tmp_path, width=512, height=256, noise_sigma=noise)
    reference = ref if degraded else gt
    config = PipelineConfig()
    depth, rep = stitch_partials(partials, reference, config)
    # the exact minimizer of the same energy, for comparison
    registered, _ = register_partials(partials, reference, default_grid())
    tgt = assemble_targets(registered, 512, 256).values.crop_rows(gt.row_start, gt.row_end)
    sol = sparse_blend_solve(reference.values, tgt.filled(0.0), tgt.valid, config.gamma)
    return evaluate(depth, gt), evaluate(depth.with_values(np.maximum(sol, 0.0)), gt), gt, rep


def test_5a_recovery_exact_reference(tmp_path):
    m, oracle, gt, _ = recovery(tmp_path, 0.0, False)
    bound = 1e-3 * float(np.mean(gt.values))
    assert report("5a recovery, exact reference", m.rmse <= bound,
                  f"RMSE {m.rmse:.2e} (<= {bound:.2e}); exact minimizer {oracle.rmse:.2e}")


def test_5b_recovery_noisy_degraded(tmp_path):
    m, oracle, _, rep = recovery(tmp_path, 0.02, True)
    ok = m.rmse <= 0.05 and m.delta1 >= 0.99
    sweeps = rep["levels"][-1]["iterations"]
    assert report("5b recovery, noise 0.02 and degraded reference", ok,
                  f"RMSE {m.rmse:.4f} (<= 0.05), delta1 {m.delta1:.4f} (>= 0.99) after {sweeps} sweeps; "
                  f"exact minimizer RMSE {oracle.rmse:.4f}, delta1 {oracle.delta1:.4f}")


def test_6_schedules():
    s2 = BlendSchedule.auto(2048, 1024)
    s4 = BlendSchedule.auto(4096, 2048)
    ok = (s2.levels == [(512, 256), (1024, 512), (2048, 1024)] and s2.iterations == [200, 100, 50]
          and s4.levels == [(512, 256), (1024, 512), (2048, 1024), (4096, 2048)]
          and s4.iterations == [200, 150, 100, 50])
    assert report("6 schedules", ok, f"2048: {list(zip(s2.levels, s2.iterations))}; "
                                     f"4096: {list(zip(s4.levels, s4.iterations))}")


def test_7_convergence_pace(tmp_path):
    _, partials, ref = cmd_synth(tmp_path, width=512, height=256, noise_sigma=0.02)
    config = PipelineConfig(residual_stop=0.0)
    _, rep = stitch_partials(partials, ref, config)
    hist = rep["levels"][-1]["residuals"]
    ratio = hist[-1] / hist[0]
    hit = next((k for k, r in enumerate(hist) if r <= 1e-3 * hist[0]), None)
    report("7 convergence pace", ratio <= 1e-3,
           f"residual after {len(hist) - 1} sweeps is {100 * ratio:.3f}% of initial (<= 0.1%), "
           f"first reached at sweep {hit}; history {[f'{r:.3g}' for r in hist[::10]]}", soft=True)


def test_8_metrics_suite():
    code, secs, tail = run_suite("test_metrics.py")
    assert report("8 metrics suite", code == 0, f"{tail}; {secs:.1f} s")


def test_9_io_and_determinism(tmp_path):
    rng = np.random.default_rng(9)
    a = rng.normal(size=(37, 53)).astype(np.float32)
    a[3, 4] = np.nan
    io.write_pfm_array(a, tmp_path / "a.pfm")
    exact = io.read_pfm_array(tmp_path / "a.pfm").tobytes() == a.tobytes()

    rejected = 0
    for data, message in MALFORMED.values():
        try:
            io.decode_pfm(data)
        except FormatError as exc:
            rejected += message in str(exc)
    outputs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        cmd_synth(out, width=256, height=128, noise_sigma=0.02, views=True,
                  config=PipelineConfig(view_width=128, view_height=124))
        cmd_stitch(out / "manifest.json", out / "reference.pfm", PipelineConfig(), out / "depth.pfm")
        outputs.append((out / "depth.pfm").read_bytes())
    same = outputs[0] == outputs[1]
    ok = exact and rejected == len(MALFORMED) and same
    assert report("9 io and determinism", ok, f"round trip bit-exact {exact}; "
                  f"{rejected}/{len(MALFORMED)} malformed files rejected; repeat runs identical {same}")


def test_10_blend_performance(tmp_path):
    gt, partials, ref = cmd_synth(tmp_path, width=2048, height=1024, noise_sigma=0.02)
    config = PipelineConfig()
    registered, _ = register_partials(partials, ref, default_grid())
    start = time.perf_counter()
    multiscale_blend(registered, ref, config.blend_schedule(2048, 1024))
    secs = time.perf_counter() - start
    report("10 blend performance 2048x1024", secs <= 60, f"{secs:.1f} s (<= 60 s)", soft=True)
